//! Shows how the bequest weight moves a member between the annuitant,
//! neutral, and insuree regimes.
//!
//! The sign of the tontine position follows the product of the discount
//! rate and the bequest multiple k = b^(1/(1-gamma)): below 1 the member
//! earns mortality credits, above 1 they pay premiums like a life
//! insurance buyer.  The neutral knife edge has the whole pot in the
//! bequest account.
//!
//! Run with: cargo run --example regimes

use tontine::annuity::QuadratureSettings;
use tontine::mortality::GompertzMakeham;
use tontine::strategy::{
    bequest_multiple, discount_rate, mcbr, regime, strategy_at, MarketParams, Preferences,
};

fn main() -> tontine::Result<()> {
    let market = MarketParams {
        risk_free: 0.02,
        risky_drift: 0.05,
        volatility: 0.2,
        time_preference: 0.02,
    };
    let mortality = GompertzMakeham::uk_male();
    let settings = QuadratureSettings::default();
    let gamma = 0.25;

    println!("gamma = {gamma}; sweeping the bequest weight b");
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>12} {:>10}",
        "b", "k", "MCBR", "k*beta", "alpha*(65)", "regime"
    );
    for &b in &[0.0, 1.0, 10.0, 100.0, 1000.0, 10000.0] {
        let prefs = Preferences::power(gamma, b)?;
        let beta = discount_rate(&market, &prefs);
        let k = bequest_multiple(&prefs);
        let row = strategy_at(&mortality, 65.0, &market, &prefs, &settings)?;
        let ratio = if b > 0.0 {
            format!("{:.4}", mcbr(&prefs)?)
        } else {
            "inf".to_string()
        };
        println!(
            "{b:>6} {k:>10.4} {ratio:>10} {:>10.4} {:>12.6} {:>10}",
            k * beta,
            row.tontine_fraction,
            regime(&prefs, beta)
        );
    }

    // The neutral weight solves k beta = 1 exactly.
    let probe = Preferences::power(gamma, 1.0)?;
    let beta = discount_rate(&market, &probe);
    let neutral_b = (1.0 / beta).powf(1.0 - gamma);
    let neutral = Preferences::power(gamma, neutral_b)?;
    let row = strategy_at(&mortality, 65.0, &market, &neutral, &settings)?;
    println!();
    println!(
        "neutral weight b = {neutral_b:.6}: alpha*(65) = {:.2e}, regime {}",
        row.tontine_fraction,
        regime(&neutral, beta)
    );
    Ok(())
}
