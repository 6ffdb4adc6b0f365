//! Lifecycle consumption, tontine allocation, and bequest engine.
//!
//! A retiree splits wealth `X(t)` between a tontine account, which earns
//! mortality credits at rate `alpha(t) lambda(t) X(t)` and is forfeited at
//! death, and a bequest account holding the remaining fraction
//! `1 - alpha(t)`, which passes to the estate. Under power utility with
//! constant relative risk aversion `1 - gamma`, a bequest weight `b`, and a
//! Black-Scholes market, the utility-maximising controls have closed forms:
//!
//! * fractional consumption `c*(t) = 1 / m(t)` with
//!   `m(t) = k + (1 - beta k) A(t, beta)`,
//! * bequest fraction `1 - alpha*(t) = k c*(t)` with bequest multiple
//!   `k = b^(1/(1-gamma))`,
//! * a constant risky-asset weight (the Merton ratio), and
//! * `A(t, beta)`, an annuity factor discounting survival at the
//!   preference-adjusted rate `beta`.
//!
//! The crate evaluates these closed forms, verifies them against independent
//! numerical routes (a Riccati-type consumption ODE, the dynamic-programming
//! residual, dual quadrature schemes), simulates wealth paths, and simulates
//! finite pools with the actuarially fair credit-sharing rule.
//!
//! Module map:
//!
//! * [`mortality`]: Gompertz-Makeham hazard with closed-form survival.
//! * [`annuity`]: annuity factor and price-of-consumption quadrature.
//! * [`strategy`]: optimal controls, regimes, schedules, time-varying
//!   extension.
//! * [`scenario`]: configuration bundle and validation.
//! * [`oracle`]: independent verification routes and the check suite.
//! * [`paths`]: closed-form wealth moments and Monte Carlo simulation.
//! * [`pool`]: finite-pool death processing and fairness experiments.
//! * [`figures`]: long-format tables for the standard plots.
//! * [`cli`]: the `tontine` command-line entry points.
//!
//! Each major capability has a runnable program under `examples/`; start
//! with `cargo run --example optimal_schedule`.

pub mod annuity;
pub mod cli;
pub mod error;
pub mod figures;
pub mod mortality;
pub mod oracle;
pub mod paths;
pub mod pool;
pub mod scenario;
pub mod strategy;

pub use error::{Error, Result};
pub use mortality::{ConstantHazard, GompertzMakeham, HazardCurve};
pub use scenario::ScenarioConfig;
