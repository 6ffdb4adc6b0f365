//! Simulates a mortality pool and checks actuarial fairness: over many
//! replications every member's expected net credit flow is zero, and the
//! received-credit rate matches lambda * alpha * X.
//!
//! Members with positive tontine fractions share each deceased member's
//! tontine account; members with negative fractions form an insurance
//! subset whose survivors fund the deceased's payout.  The footnote-style
//! margin report shows how far the insurance subset sits from an
//! unsettleable death.
//!
//! Run with: cargo run --example pool_fairness

use tontine::mortality::{GompertzMakeham, HazardCurve};
use tontine::pool::{
    fairness_report, footnote1_feasibility, run_replications, MemberSpec, PoolSpec, PoolState,
};

fn member(id: &str, age: f64, wealth: f64, alpha: f64) -> MemberSpec {
    MemberSpec {
        id: id.to_string(),
        age,
        wealth,
        mortality: GompertzMakeham::uk_male(),
        alpha: Some(alpha),
        strategy: None,
    }
}

fn main() -> tontine::Result<()> {
    let spec = PoolSpec {
        members: (0..20)
            .map(|i| member(&format!("m{i:02}"), 95.0, 100.0, 1.0))
            .collect(),
        dt: 1.0 / 12.0,
        steps: 1,
    };
    let outcomes = run_replications(&spec, 4000, 7)?;
    let report = fairness_report(&spec, &outcomes)?;
    let expected = GompertzMakeham::uk_male().hazard(95.0) * 100.0;

    println!(
        "homogeneous pool: 20 members aged 95, {} replications, {} deaths",
        report.replications, report.total_deaths
    );
    println!("expected credit rate per member: {expected:.4} per year");
    println!(
        "{:>5} {:>12} {:>10} {:>12} {:>8}",
        "id", "mean net", "SE", "received", "fair"
    );
    for member in report.members.iter().take(5) {
        println!(
            "{:>5} {:>12.4} {:>10.4} {:>12.4} {:>8}",
            member.id,
            member.mean_net_rate,
            member.se_net_rate,
            member.mean_received_rate,
            member.fair_within_3se
        );
    }
    println!("  ... all fair: {}", report.all_fair);

    // A mixed pool with an insurance subset.
    let mixed = PoolSpec {
        members: vec![
            member("saver", 90.0, 120.0, 1.0),
            member("spender", 92.0, 80.0, 0.4),
            member("insuree_a", 90.0, 100.0, -0.3),
            member("insuree_b", 95.0, 60.0, -0.2),
        ],
        dt: 1.0 / 12.0,
        steps: 1,
    };
    let state = PoolState::new(&mixed)?;
    let margins = footnote1_feasibility(&state)?;
    println!();
    println!("mixed pool settlement margins (insurance subset):");
    match margins.worst {
        Some(worst) => println!(
            "  tightest pair: settling {} asks {} for share {:.4} against bound {:.4} (margin {:.4})",
            worst.deceased, worst.payer, worst.share, worst.bound, worst.margin
        ),
        None => println!("  subset is a singleton; settlement is a self-transfer"),
    }
    println!("  feasible: {}", margins.feasible);
    Ok(())
}
