//! Integrates the consumption-rate ODE and compares it with the closed
//! form, then perturbs the initial value to show why the closed form is
//! the unique solution meeting the boundary conditions.
//!
//! Raising the starting rate blows consumption up in finite time; with a
//! bequest motive, lowering it collapses the bequest fraction instead of
//! letting it approach one.
//!
//! Run with: cargo run --example consumption_ode

use tontine::annuity::QuadratureSettings;
use tontine::mortality::GompertzMakeham;
use tontine::oracle::{boundary_divergence_demo, integrate_consumption_ode, OdeSettings};
use tontine::strategy::{consumption_rate, MarketParams, Preferences};

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

    let ode = OdeSettings::span(65.0, 105.0)?;
    let samples = integrate_consumption_ode(&mortality, &market, &prefs, &settings, &ode)?;
    println!("4th-order integration against the closed form");
    println!(
        "{:>5} {:>14} {:>14} {:>10}",
        "age", "integrated", "closed form", "rel err"
    );
    for &(age, along) in samples
        .iter()
        .filter(|(age, _)| age.fract() == 0.0 && (*age as u64) % 10 == 5)
    {
        let closed = consumption_rate(&mortality, age, &market, &prefs, &settings)?;
        println!(
            "{age:>5} {along:>14.10} {closed:>14.10} {:>10.1e}",
            (along - closed).abs() / closed
        );
    }

    println!();
    println!("perturbing the initial consumption rate c(65) = 1/m(65)");
    for &epsilon in &[-1e-3, 1e-3] {
        let outcome =
            boundary_divergence_demo(&mortality, &market, &prefs, &settings, 65.0, epsilon)?;
        println!("  epsilon = {epsilon:>6}: {outcome:?}");
    }
    Ok(())
}
