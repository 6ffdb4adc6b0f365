//! Builds the schedule under age-varying market parameters and shows that
//! it reduces to the constant-parameter schedule when the curves are flat.
//!
//! The age-varying closed forms are a conjectural extension (the returned
//! schedule says so); the flat-curve reduction is the sanity anchor.
//!
//! Run with: cargo run --example time_varying

use tontine::annuity::QuadratureSettings;
use tontine::mortality::GompertzMakeham;
use tontine::strategy::{schedule, schedule_tv, AgeGrid, MarketParams, Preferences};

fn main() -> tontine::Result<()> {
    let market = MarketParams {
        risk_free: 0.02,
        risky_drift: 0.05,
        volatility: 0.2,
        time_preference: 0.02,
    };
    let prefs = Preferences::power(-0.08225, 10.0)?;
    let mortality = GompertzMakeham::uk_male();
    let settings = QuadratureSettings::default();
    let grid = AgeGrid::new(65.0, 95.0, 10.0)?;

    let flat = schedule_tv(&mortality, &grid, |_| market, &prefs, &settings)?;
    let base = schedule(&mortality, &grid, &market, &prefs, &settings)?;
    println!("flat curves (conjectural route: {})", flat.conjectural);
    println!(
        "{:>5} {:>14} {:>14} {:>10}",
        "age", "c* varying", "c* base", "diff"
    );
    for (varying, constant) in flat.rows.iter().zip(&base.rows) {
        println!(
            "{:>5} {:>14.10} {:>14.10} {:>10.1e}",
            varying.age,
            varying.consumption,
            constant.consumption,
            (varying.consumption - constant.consumption).abs()
        );
    }

    // A risk-free rate that climbs 2 basis points per year of age.
    let drifting = |age: f64| MarketParams {
        risk_free: 0.02 + 0.0002 * (age - 65.0),
        ..market
    };
    let moving = schedule_tv(&mortality, &grid, drifting, &prefs, &settings)?;
    println!();
    println!("rising risk-free curve");
    println!("{:>5} {:>14} {:>14} {:>12}", "age", "c*", "alpha*", "w*");
    for row in &moving.rows {
        println!(
            "{:>5} {:>14.10} {:>14.10} {:>12.6}",
            row.age, row.consumption, row.tontine_fraction, row.risky_weight
        );
    }
    Ok(())
}
