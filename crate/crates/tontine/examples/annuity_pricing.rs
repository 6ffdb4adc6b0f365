//! Prices life annuities off a Gompertz-Makeham mortality curve.
//!
//! Prints the hazard and survival profile, the annuity factor A(t, beta)
//! across ages and discount rates through two independent quadrature
//! routes, and a spot check of the derivative identity
//! dA/dt = (lambda(t) + beta) A(t) - 1.
//!
//! Run with: cargo run --example annuity_pricing

use tontine::annuity::{annuity_factor, annuity_factor_gauss, QuadratureSettings};
use tontine::mortality::{GompertzMakeham, HazardCurve};

fn main() -> tontine::Result<()> {
    let mortality = GompertzMakeham::uk_male();
    let settings = QuadratureSettings::default();

    println!("hazard and survival from age 65");
    println!("{:>5} {:>12} {:>12}", "age", "hazard", "survival");
    for age in [65.0, 75.0, 85.0, 95.0, 105.0] {
        println!(
            "{age:>5} {:>12.6} {:>12.6}",
            mortality.hazard(age),
            mortality.survival(65.0, age)
        );
    }

    println!();
    println!("annuity factor A(age, beta), adaptive vs Gauss quadrature");
    println!(
        "{:>5} {:>7} {:>14} {:>14} {:>10}",
        "age", "beta", "adaptive", "gauss", "rel diff"
    );
    for &age in &[65.0, 80.0, 95.0] {
        for &beta in &[-0.05, 0.0, 0.02, 0.05] {
            let adaptive = annuity_factor(&mortality, age, beta, &settings)?;
            let gauss = annuity_factor_gauss(&mortality, age, beta, &settings)?;
            println!(
                "{age:>5} {beta:>7.2} {adaptive:>14.8} {gauss:>14.8} {:>10.1e}",
                (adaptive - gauss).abs() / adaptive
            );
        }
    }

    println!();
    println!("derivative identity at age 75, beta 0.02");
    let beta = 0.02;
    let h = 1e-5;
    let up = annuity_factor(&mortality, 75.0 + h, beta, &settings)?;
    let down = annuity_factor(&mortality, 75.0 - h, beta, &settings)?;
    let value = annuity_factor(&mortality, 75.0, beta, &settings)?;
    let derivative = (up - down) / (2.0 * h);
    let identity = (mortality.hazard(75.0) + beta) * value - 1.0;
    println!("  finite difference dA/dt = {derivative:.10}");
    println!("  (lambda + beta) A - 1   = {identity:.10}");
    Ok(())
}
