//! Runs the verification suite: every closed form is rechecked through an
//! independent numerical route (ODE integration, finite differences, the
//! HJB residual, boundary classification, and the decumulation identities).
//!
//! The second run seeds a deliberate sign fault into the ODE algebra to
//! show the oracle actually bites.
//!
//! Run with: cargo run --example verify_closed_forms

use tontine::cli::base_scenario;
use tontine::oracle::{verification_report, FaultInjection};

fn main() -> tontine::Result<()> {
    let config = base_scenario();

    println!("clean run");
    let report = verification_report(&config, FaultInjection::None)?;
    for check in &report.checks {
        println!(
            "  {:<28} max error {:>12.3e}  tolerance {:>8.0e}  {}",
            check.name,
            check.max_error,
            check.tolerance,
            if check.passed { "ok" } else { "FAILED" }
        );
    }
    println!("  suite passed: {}", report.passed);

    println!();
    println!("with an injected discount-rate sign flip");
    let report = verification_report(&config, FaultInjection::FlipDiscountSign)?;
    for check in report.checks.iter().filter(|c| !c.passed) {
        println!(
            "  {:<28} max error {:>12.3e}  FAILED",
            check.name, check.max_error
        );
    }
    println!("  suite passed: {}", report.passed);
    Ok(())
}
