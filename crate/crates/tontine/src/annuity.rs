//! Annuity factor and price-of-consumption quadrature.
//!
//! The central object is the annuity factor
//!
//! ```text
//! A(t, beta) = integral_t^inf exp(-(H(t, u) + beta (u - t))) du
//! ```
//!
//! a survival-weighted present value at the preference-adjusted discount
//! rate `beta`, which may be negative. The price of a unit of fractional
//! consumption is `m(t) = k + (1 - beta k) A(t, beta)` for bequest multiple
//! `k`.
//!
//! Integrals run over `[t, max_age]` with the exact closed-form cumulative
//! hazard inside the exponent, so no quadrature is ever nested inside
//! another for the constant-parameter model. Truncation at `max_age` is
//! certified before integrating: with an increasing hazard the tail mass is
//! at most `integrand(max_age) / (hazard(max_age) + beta)`, and the factor
//! is refused (rather than silently truncated) when that bound exceeds the
//! absolute tolerance, which happens for strongly negative `beta` or for
//! light-tailed toy hazards at the default cap.
//!
//! Two independent quadrature routes are provided on purpose:
//! [`annuity_factor`] uses adaptive Simpson refinement, while
//! [`annuity_factor_gauss`] uses fixed yearly Gauss-Legendre panels. The
//! verification suite and the acceptance tests hold them against each other;
//! nothing in the crate ever substitutes one for the other.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mortality::HazardCurve;

/// Integration window and tolerances for every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    /// Upper truncation age for all integrals, in years.
    pub max_age: f64,
    /// Relative tolerance of the adaptive refinement.
    pub rel_tol: f64,
    /// Absolute tolerance; also the ceiling for certified tail mass.
    pub abs_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            max_age: 130.0,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_age.is_finite() && self.max_age > 0.0) {
            return Err(Error::Config(format!(
                "quadrature max_age must be positive and finite, got {}",
                self.max_age
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config(
                "quadrature tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Annuity factor `A(t, beta)` by adaptive Simpson quadrature.
///
/// Errors with [`Error::NegativeHazard`] if the hazard dips below zero on
/// the integration range, and with [`Error::Truncation`] if the certified
/// tail bound at `max_age` exceeds the absolute tolerance.
pub fn annuity_factor<H: HazardCurve + ?Sized>(
    hazard: &H,
    age: f64,
    discount: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let f = prepared_integrand(hazard, age, discount, settings)?;
    adaptive_simpson(
        &f,
        age,
        settings.max_age,
        settings.rel_tol,
        settings.abs_tol,
    )
}

/// Annuity factor by fixed yearly Gauss-Legendre panels.
///
/// Independent verification route for [`annuity_factor`]; accurate for the
/// moderate discount rates the strategy module produces, but it does not
/// chase boundary layers, so prefer the adaptive route for `|beta|` beyond
/// a few tenths.
pub fn annuity_factor_gauss<H: HazardCurve + ?Sized>(
    hazard: &H,
    age: f64,
    discount: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let f = prepared_integrand(hazard, age, discount, settings)?;
    Ok(gauss_panels(&f, age, settings.max_age, nodes_20()))
}

/// Price of a unit of fractional consumption,
/// `m(t) = k + (1 - beta k) A(t, beta)`.
///
/// `bequest_multiple` is `k = b^(1/(1-gamma))` (`k = b` under log utility);
/// pass 0 for no bequest motive, which reduces the price to the annuity
/// factor itself.
pub fn m_price<H: HazardCurve + ?Sized>(
    hazard: &H,
    age: f64,
    discount: f64,
    bequest_multiple: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    if !bequest_multiple.is_finite() || bequest_multiple < 0.0 {
        return Err(Error::Config(format!(
            "bequest multiple must be nonnegative, got {bequest_multiple}"
        )));
    }
    let annuity = annuity_factor(hazard, age, discount, settings)?;
    Ok(bequest_multiple + (1.0 - discount * bequest_multiple) * annuity)
}

/// Annuity factor under an age-dependent discount rate,
/// `A(t) = integral_t^max exp(-(H(t, u) + integral_t^u beta(y) dy)) du`.
///
/// The inner discount integral is evaluated with a 64-node Gauss-Legendre
/// rule, exact for polynomial curves up to degree 127; the curve is assumed
/// smooth. With a constant curve this reduces to [`annuity_factor`] to
/// machine precision.
pub fn annuity_factor_tv<H, F>(
    hazard: &H,
    age: f64,
    discount_curve: F,
    settings: &QuadratureSettings,
) -> Result<f64>
where
    H: HazardCurve + ?Sized,
    F: Fn(f64) -> f64,
{
    tv_quadrature(hazard, age, &discount_curve, 0.0, settings)
}

/// Price of a unit of fractional consumption under an age-dependent
/// discount rate, `m(t) = k + integral_t^max (1 - k beta(u)) exp(...) du`.
pub fn m_price_tv<H, F>(
    hazard: &H,
    age: f64,
    discount_curve: F,
    bequest_multiple: f64,
    settings: &QuadratureSettings,
) -> Result<f64>
where
    H: HazardCurve + ?Sized,
    F: Fn(f64) -> f64,
{
    if !bequest_multiple.is_finite() || bequest_multiple < 0.0 {
        return Err(Error::Config(format!(
            "bequest multiple must be nonnegative, got {bequest_multiple}"
        )));
    }
    let integral = tv_quadrature(hazard, age, &discount_curve, bequest_multiple, settings)?;
    Ok(bequest_multiple + integral)
}

/// Shared validation, domain scan, and tail certificate; returns the
/// constant-rate integrand.
fn prepared_integrand<'a, H: HazardCurve + ?Sized>(
    hazard: &'a H,
    age: f64,
    discount: f64,
    settings: &QuadratureSettings,
) -> Result<impl Fn(f64) -> f64 + 'a> {
    settings.validate()?;
    if !(age.is_finite() && age < settings.max_age) {
        return Err(Error::Config(format!(
            "age {age} must lie below max_age {}",
            settings.max_age
        )));
    }
    if !discount.is_finite() {
        return Err(Error::Config("discount rate must be finite".into()));
    }
    scan_hazard_nonnegative(hazard, age, settings.max_age)?;
    let log_tail =
        -(hazard.cumulative_hazard(age, settings.max_age) + discount * (settings.max_age - age));
    certify_tail(
        hazard.hazard(settings.max_age) + discount,
        log_tail,
        1.0,
        settings,
    )?;
    Ok(move |u: f64| (-(hazard.cumulative_hazard(age, u) + discount * (u - age))).exp())
}

fn tv_quadrature<H, F>(
    hazard: &H,
    age: f64,
    discount_curve: &F,
    bequest_multiple: f64,
    settings: &QuadratureSettings,
) -> Result<f64>
where
    H: HazardCurve + ?Sized,
    F: Fn(f64) -> f64,
{
    settings.validate()?;
    if !(age.is_finite() && age < settings.max_age) {
        return Err(Error::Config(format!(
            "age {age} must lie below max_age {}",
            settings.max_age
        )));
    }
    scan_hazard_nonnegative(hazard, age, settings.max_age)?;
    let discount_integral = |u: f64| gauss_on(discount_curve, age, u, nodes_64());
    let exponent = |u: f64| -(hazard.cumulative_hazard(age, u) + discount_integral(u));
    let weight = |u: f64| 1.0 - bequest_multiple * discount_curve(u);
    let end_rate = discount_curve(settings.max_age);
    // The certificate treats the curve as frozen at its max_age value
    // beyond the cap, consistent with smooth curves that have settled by
    // then.
    certify_tail(
        hazard.hazard(settings.max_age) + end_rate,
        exponent(settings.max_age),
        weight(settings.max_age).abs().max(1.0),
        settings,
    )?;
    let f = |u: f64| weight(u) * exponent(u).exp();
    adaptive_simpson(
        &f,
        age,
        settings.max_age,
        settings.rel_tol,
        settings.abs_tol,
    )
}

fn scan_hazard_nonnegative<H: HazardCurve + ?Sized>(hazard: &H, a: f64, b: f64) -> Result<()> {
    const SAMPLES: usize = 64;
    for i in 0..=SAMPLES {
        let t = a + (b - a) * i as f64 / SAMPLES as f64;
        if hazard.hazard(t) < 0.0 {
            return Err(Error::NegativeHazard {
                threshold: t,
                requested: a,
            });
        }
    }
    Ok(())
}

/// With an increasing hazard, tail mass beyond the cap is bounded by
/// `scale * integrand(max_age) / (hazard(max_age) + discount)`.
fn certify_tail(
    decay_rate: f64,
    log_integrand_at_max: f64,
    scale: f64,
    settings: &QuadratureSettings,
) -> Result<()> {
    let tail_bound = if decay_rate > 0.0 {
        scale * log_integrand_at_max.exp() / decay_rate
    } else {
        f64::INFINITY
    };
    if tail_bound.is_nan() || tail_bound > settings.abs_tol {
        return Err(Error::Truncation {
            max_age: settings.max_age,
            tail_bound,
            abs_tol: settings.abs_tol,
        });
    }
    Ok(())
}

fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    (f(a) + 4.0 * f(0.5 * (a + b)) + f(b)) * (b - a) / 6.0
}

fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if b - a <= f64::EPSILON * a.abs().max(1.0) {
        return Ok(0.0);
    }
    // A coarse composite pass pins the absolute error budget; the quarter
    // is a safety factor against the optimistic Richardson estimate below.
    const COARSE_PANELS: usize = 128;
    let h = (b - a) / COARSE_PANELS as f64;
    let mut coarse = 0.0;
    for i in 0..COARSE_PANELS {
        let x0 = a + i as f64 * h;
        coarse += simpson_panel(f, x0, x0 + h);
    }
    let tol = (rel_tol * coarse.abs()).max(abs_tol) * 0.25;

    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (fa + 4.0 * fm + fb) * (b - a) / 6.0;
    simpson_refine(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (fa + 4.0 * flm + fm) * (m - a) / 6.0;
    let right = (fm + 4.0 * frm + fb) * (b - m) / 6.0;
    let delta = left + right - whole;
    if depth >= 3 && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= 60 {
        return Err(Error::Numerical(format!(
            "adaptive quadrature failed to converge on [{a}, {b}]"
        )));
    }
    let left_val = simpson_refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
    let right_val = simpson_refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
    Ok(left_val + right_val)
}

/// Gauss-Legendre quadrature of `f` over `[a, b]` in yearly panels.
fn gauss_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, nodes: &[(f64, f64)]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = (b - a).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * width;
        total += gauss_on(f, x0, x0 + width, nodes);
    }
    total
}

fn gauss_on<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, nodes: &[(f64, f64)]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut total = 0.0;
    for &(x, w) in nodes {
        total += w * f(mid + half * x);
    }
    total * half
}

fn nodes_20() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| legendre_nodes(20))
}

fn nodes_64() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| legendre_nodes(64))
}

/// Legendre polynomial and derivative by the three-term recurrence.
fn legendre_p_dp(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut curr = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * curr - (kf - 1.0) * prev) / kf;
        prev = curr;
        curr = next;
    }
    let dp = n as f64 * (x * curr - prev) / (x * x - 1.0);
    (curr, dp)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], by
/// Newton iteration from the Chebyshev initial guess.
fn legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_p_dp(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_p_dp(n, x);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}
