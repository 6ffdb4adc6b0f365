//! Tabulates the optimal controls over the retirement horizon: fractional
//! consumption rate, tontine and bequest account split, and risky weight.
//!
//! The preference pair here (risk exponent near the level-consumption root,
//! bequest weight 10) keeps expected discounted consumption flat, so the
//! schedule shows rising consumption against falling survival.
//!
//! Run with: cargo run --example optimal_schedule

use tontine::annuity::QuadratureSettings;
use tontine::mortality::GompertzMakeham;
use tontine::strategy::{schedule, AgeGrid, MarketParams, Preferences};

fn main() -> tontine::Result<()> {
    let market = MarketParams {
        risk_free: 0.02,
        risky_drift: 0.05,
        volatility: 0.2,
        time_preference: 0.02,
    };
    let prefs = Preferences::power(-0.08225, 10.0)?;
    let mortality = GompertzMakeham::uk_male();
    let grid = AgeGrid::new(65.0, 105.0, 5.0)?;

    let table = schedule(
        &mortality,
        &grid,
        &market,
        &prefs,
        &QuadratureSettings::default(),
    )?;

    println!(
        "regime: {}, feasibility margin at entry: {:.6}",
        table.regime, table.feasibility.margin
    );
    println!();
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>12} {:>10}",
        "age", "c*", "alpha*", "1-alpha*", "m price", "w*"
    );
    for row in &table.rows {
        println!(
            "{:>5} {:>10.6} {:>10.6} {:>10.6} {:>12.6} {:>10.6}",
            row.age,
            row.consumption,
            row.tontine_fraction,
            row.bequest_fraction,
            row.price,
            row.risky_weight
        );
    }

    println!();
    println!("CSV of the same table (yearly) via the library writer:");
    let yearly = schedule(
        &mortality,
        &AgeGrid::new(65.0, 70.0, 1.0)?,
        &market,
        &prefs,
        &QuadratureSettings::default(),
    )?;
    print!("{}", yearly.csv_string());
    Ok(())
}
