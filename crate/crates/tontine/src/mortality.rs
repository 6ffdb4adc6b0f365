//! Force-of-mortality model and survival arithmetic.
//!
//! Longevity-linked quantities are priced off a Gompertz-Makeham hazard
//!
//! ```text
//! lambda(t) = v + exp((t - m) / q) / q
//! ```
//!
//! where `m` is the modal age at death of the Gompertz term, `q` its
//! dispersion in years, and `v` a constant Makeham offset. The cumulative
//! hazard has the closed form
//!
//! ```text
//! H(s, t) = v (t - s) + exp((t - m) / q) - exp((s - m) / q)
//! ```
//!
//! so survival probabilities never need quadrature.
//!
//! The fitted parameters shipped with [`GompertzMakeham::uk_male`] carry a
//! slightly negative `v`, which drives the hazard negative below roughly age
//! 52. Scenario validation calls [`validate_hazard_domain`] and rejects age
//! ranges on which the hazard dips below zero; nothing in the crate clamps a
//! negative hazard to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A force of mortality together with its exact integral.
///
/// Implementations must keep [`cumulative_hazard`](HazardCurve::cumulative_hazard)
/// consistent with [`hazard`](HazardCurve::hazard); the provided
/// [`survival`](HazardCurve::survival) assumes it is the exact integral.
pub trait HazardCurve: Sync {
    /// Force of mortality at `age`, per year.
    fn hazard(&self, age: f64) -> f64;

    /// Integrated hazard over `[from, to]`.
    fn cumulative_hazard(&self, from: f64, to: f64) -> f64;

    /// Probability that a life aged `from` is still alive at `to`.
    fn survival(&self, from: f64, to: f64) -> f64 {
        (-self.cumulative_hazard(from, to)).exp()
    }
}

/// Gompertz-Makeham mortality parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GompertzMakeham {
    /// Modal age at death of the Gompertz term, in years.
    #[serde(rename = "m")]
    pub modal_age: f64,
    /// Dispersion of the Gompertz term, in years. Must be positive.
    #[serde(rename = "q")]
    pub dispersion: f64,
    /// Age-independent Makeham offset, per year. May be negative.
    #[serde(rename = "v")]
    pub makeham: f64,
}

impl GompertzMakeham {
    pub fn new(modal_age: f64, dispersion: f64, makeham: f64) -> Result<Self> {
        let params = GompertzMakeham {
            modal_age,
            dispersion,
            makeham,
        };
        params.validate()?;
        Ok(params)
    }

    /// Fit to recent UK male population mortality, usable from the late 50s up.
    pub fn uk_male() -> Self {
        GompertzMakeham {
            modal_age: 83.43,
            dispersion: 10.94,
            makeham: -0.0052,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dispersion.is_finite() && self.dispersion > 0.0) {
            return Err(Error::Config(format!(
                "mortality dispersion q must be positive and finite, got {}",
                self.dispersion
            )));
        }
        if !self.modal_age.is_finite() || !self.makeham.is_finite() {
            return Err(Error::Config(
                "mortality parameters m and v must be finite".into(),
            ));
        }
        Ok(())
    }
}

impl HazardCurve for GompertzMakeham {
    fn hazard(&self, age: f64) -> f64 {
        self.makeham + ((age - self.modal_age) / self.dispersion).exp() / self.dispersion
    }

    fn cumulative_hazard(&self, from: f64, to: f64) -> f64 {
        self.makeham * (to - from) + ((to - self.modal_age) / self.dispersion).exp()
            - ((from - self.modal_age) / self.dispersion).exp()
    }
}

/// Constant-hazard curve, mainly useful as a test double: every integral
/// against it has an elementary closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantHazard(pub f64);

impl HazardCurve for ConstantHazard {
    fn hazard(&self, _age: f64) -> f64 {
        self.0
    }

    fn cumulative_hazard(&self, from: f64, to: f64) -> f64 {
        self.0 * (to - from)
    }
}

/// First age at or above `t_min` from which the hazard is nonnegative
/// onward.
///
/// The Gompertz-Makeham hazard is strictly increasing in age (for positive
/// dispersion), so the answer is `t_min` itself when `hazard(t_min) >= 0`
/// and otherwise the unique root of `hazard(t) = 0`, at
/// `m + q ln(-v q)`.
pub fn validate_hazard_domain(params: &GompertzMakeham, t_min: f64) -> f64 {
    if params.hazard(t_min) >= 0.0 {
        return t_min;
    }
    params.modal_age + params.dispersion * (-params.makeham * params.dispersion).ln()
}

/// Error unless the hazard is nonnegative on `[from, to]`.
pub fn require_nonnegative_hazard(params: &GompertzMakeham, from: f64) -> Result<()> {
    let threshold = validate_hazard_domain(params, from);
    if threshold > from {
        return Err(Error::NegativeHazard {
            threshold,
            requested: from,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Frozen against an independent 40-digit evaluation of the same
    // closed forms.
    const HAZARD_65: f64 = 0.011_757_088_922_884_73;
    const HAZARD_95: f64 = 0.258_000_557_940_234_9;
    const CUMHAZ_65_95: f64 = 2.537_903_551_049_811;
    const SURVIVAL_65_95: f64 = 0.07903191260568449;
    const ZERO_HAZARD_AGE: f64 = 52.068620830973933;

    /// Composite Simpson rule, used only as an in-test oracle for the
    /// closed-form cumulative hazard.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for i in 0..panels {
            let x0 = a + i as f64 * h;
            let x1 = x0 + h;
            total += (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1)) * h / 6.0;
        }
        total
    }

    #[test]
    fn hazard_matches_frozen_values() {
        let gm = GompertzMakeham::uk_male();
        assert_relative_eq!(gm.hazard(65.0), HAZARD_65, max_relative = 1e-13);
        assert_relative_eq!(gm.hazard(95.0), HAZARD_95, max_relative = 1e-13);
    }

    #[test]
    fn cumulative_hazard_matches_elementary_case() {
        // v = 0.01, q = 10, m = 80, over [70, 80]: 0.1 + 1 - e^{-1}.
        let gm = GompertzMakeham::new(80.0, 10.0, 0.01).unwrap();
        let expected = 0.1 + 1.0 - (-1.0f64).exp();
        assert_relative_eq!(
            gm.cumulative_hazard(70.0, 80.0),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, 0.7321205588285577, max_relative = 1e-15);
    }

    #[test]
    fn cumulative_hazard_matches_frozen_value() {
        let gm = GompertzMakeham::uk_male();
        assert_relative_eq!(
            gm.cumulative_hazard(65.0, 95.0),
            CUMHAZ_65_95,
            max_relative = 1e-13
        );
    }

    #[test]
    fn cumulative_hazard_agrees_with_quadrature() {
        let gm = GompertzMakeham::uk_male();
        for &(s, t) in &[(55.0, 65.0), (65.0, 95.0), (80.0, 130.0), (60.0, 61.0)] {
            let quad = simpson(|u| gm.hazard(u), s, t, 4096);
            assert_relative_eq!(gm.cumulative_hazard(s, t), quad, max_relative = 1e-10);
        }
    }

    #[test]
    fn survival_of_constant_hazard_is_exponential() {
        let flat = ConstantHazard(0.01);
        assert_relative_eq!(
            flat.survival(60.0, 70.0),
            (-0.1f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn survival_matches_frozen_value() {
        let gm = GompertzMakeham::uk_male();
        assert_relative_eq!(
            gm.survival(65.0, 95.0),
            SURVIVAL_65_95,
            max_relative = 1e-13
        );
    }

    #[test]
    fn hazard_domain_threshold_matches_bisection() {
        let gm = GompertzMakeham::uk_male();
        let threshold = validate_hazard_domain(&gm, 50.0);
        assert_relative_eq!(threshold, ZERO_HAZARD_AGE, max_relative = 1e-12);

        // Independent bisection on hazard(t) = 0.
        let (mut lo, mut hi) = (50.0f64, 60.0f64);
        assert!(gm.hazard(lo) < 0.0 && gm.hazard(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gm.hazard(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(threshold, lo, max_relative = 1e-12);
    }

    #[test]
    fn hazard_domain_trivial_when_makeham_nonnegative() {
        let gm = GompertzMakeham::new(80.0, 10.0, 0.001).unwrap();
        assert_eq!(validate_hazard_domain(&gm, 0.0), 0.0);
    }

    #[test]
    fn hazard_domain_returns_t_min_above_threshold() {
        let gm = GompertzMakeham::uk_male();
        assert_eq!(validate_hazard_domain(&gm, 65.0), 65.0);
        assert!(require_nonnegative_hazard(&gm, 65.0).is_ok());
        assert!(matches!(
            require_nonnegative_hazard(&gm, 50.0),
            Err(Error::NegativeHazard { .. })
        ));
    }

    #[test]
    fn rejects_nonpositive_dispersion() {
        assert!(GompertzMakeham::new(80.0, 0.0, 0.01).is_err());
        assert!(GompertzMakeham::new(80.0, -1.0, 0.01).is_err());
    }

    proptest! {
        #[test]
        fn cumulative_hazard_is_additive(
            s in 53.0f64..120.0,
            gap1 in 0.0f64..30.0,
            gap2 in 0.0f64..30.0,
        ) {
            let gm = GompertzMakeham::uk_male();
            let t = s + gap1;
            let u = t + gap2;
            let joined = gm.cumulative_hazard(s, u);
            let split = gm.cumulative_hazard(s, t) + gm.cumulative_hazard(t, u);
            prop_assert!((joined - split).abs() <= 1e-12 * (1.0 + joined.abs()));
        }

        #[test]
        fn survival_is_a_decreasing_probability(
            s in 53.0f64..115.0,
            gap1 in 0.01f64..30.0,
            gap2 in 0.01f64..30.0,
        ) {
            let gm = GompertzMakeham::uk_male();
            let near = gm.survival(s, s + gap1);
            let far = gm.survival(s, s + gap1 + gap2);
            prop_assert!(near > 0.0 && near <= 1.0);
            prop_assert!(far < near);
        }

        #[test]
        fn hazard_is_increasing_in_age(
            s in 0.0f64..125.0,
            gap in 0.01f64..40.0,
        ) {
            let gm = GompertzMakeham::uk_male();
            prop_assert!(gm.hazard(s + gap) > gm.hazard(s));
        }
    }
}
