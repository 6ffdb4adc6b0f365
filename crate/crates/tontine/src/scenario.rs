//! Scenario configuration: one JSON document bundling market, preference,
//! mortality, simulation, and quadrature settings.
//!
//! The on-disk schema has five top-level keys:
//!
//! ```json
//! {
//!   "market":     { "r": 0.02, "mu": 0.05, "sigma": 0.2, "rho": 0.02 },
//!   "prefs":      { "gamma": 0.25, "b": 3.0 },
//!   "mortality":  { "m": 83.43, "q": 10.94, "v": -0.0052 },
//!   "scenario":   { "entry_age": 65.0, "initial_wealth": 1.0 },
//!   "quadrature": { "max_age": 130.0, "rel_tol": 1e-10, "abs_tol": 1e-12 }
//! }
//! ```
//!
//! `prefs` takes either `"gamma": <f64>` for power utility or
//! `"log_utility": true` for the logarithmic branch, never both.  The
//! `scenario` block accepts optional `end_age`, `dt`, `paths`, and `seed`
//! keys with defaults of 105, 1/252, 10000, and 0.  `quadrature` may be
//! omitted entirely.
//!
//! Unknown keys anywhere in the document are rejected with a message naming
//! the offending key, so typos fail loudly instead of silently falling back
//! to a default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annuity::{annuity_factor, QuadratureSettings};
use crate::error::{Error, Result};
use crate::mortality::{require_nonnegative_hazard, GompertzMakeham};
use crate::strategy::{discount_rate, feasibility, MarketParams, Preferences};

/// Default simulation horizon in years of age.
const DEFAULT_END_AGE: f64 = 105.0;

/// Default Euler-Maruyama step, one trading day in years.
pub const DEFAULT_DT: f64 = 1.0 / 252.0;

/// Default Monte Carlo path count.
pub const DEFAULT_PATHS: usize = 10_000;

fn default_end_age() -> f64 {
    DEFAULT_END_AGE
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_paths() -> usize {
    DEFAULT_PATHS
}

/// Raw preference block as it appears in config files.
///
/// Exactly one of `gamma` (power utility exponent) or `log_utility: true`
/// must be present; [`PreferenceSpec::resolve`] enforces the exclusivity and
/// produces a checked [`Preferences`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_utility: Option<bool>,
    /// Bequest weight b >= 0.
    pub b: f64,
}

impl PreferenceSpec {
    /// Power-utility preferences with exponent `gamma` and bequest weight `b`.
    pub fn power(gamma: f64, b: f64) -> Self {
        Self {
            gamma: Some(gamma),
            log_utility: None,
            b,
        }
    }

    /// Log-utility preferences with bequest weight `b`.
    pub fn log(b: f64) -> Self {
        Self {
            gamma: None,
            log_utility: Some(true),
            b,
        }
    }

    /// Converts the raw block into validated [`Preferences`].
    pub fn resolve(&self) -> Result<Preferences> {
        let wants_log = self.log_utility.unwrap_or(false);
        match (self.gamma, wants_log) {
            (Some(_), true) => Err(Error::Config(
                "prefs sets both gamma and log_utility; choose one".into(),
            )),
            (Some(gamma), false) => Preferences::power(gamma, self.b),
            (None, true) => Preferences::log(self.b),
            (None, false) => Err(Error::Config(
                "prefs must set either gamma or log_utility: true".into(),
            )),
        }
    }
}

/// Simulation block: who enters when, with how much, and how the paths run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Age of entry in years.
    pub entry_age: f64,
    /// Wealth at entry; consumption and bequest figures scale linearly in it.
    pub initial_wealth: f64,
    /// Last age simulated or tabulated.
    #[serde(default = "default_end_age")]
    pub end_age: f64,
    /// Euler-Maruyama step in years.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Monte Carlo path count; zero requests analytic output only.
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Root seed for the path generator.
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioParams {
    /// Shorthand for a scenario with default horizon, step, paths, and seed.
    pub fn at_entry(entry_age: f64, initial_wealth: f64) -> Self {
        Self {
            entry_age,
            initial_wealth,
            end_age: DEFAULT_END_AGE,
            dt: DEFAULT_DT,
            paths: DEFAULT_PATHS,
            seed: 0,
        }
    }
}

/// Full scenario: everything needed to price, schedule, simulate, or verify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub market: MarketParams,
    pub prefs: PreferenceSpec,
    pub mortality: GompertzMakeham,
    pub scenario: ScenarioParams,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
}

impl ScenarioConfig {
    /// Parses a config from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|err| Error::Config(format!("invalid config: {err}")))?;
        Ok(config)
    }

    /// Reads and parses a config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|err| {
            Error::Config(format!("cannot read config {}: {err}", path.display()))
        })?;
        Self::from_json(&text)
    }

    /// Validated preferences from the raw block.
    pub fn preferences(&self) -> Result<Preferences> {
        self.prefs.resolve()
    }

    /// Effective utility discount rate beta for this market and preference
    /// pair.
    pub fn discount_rate(&self) -> Result<f64> {
        Ok(discount_rate(&self.market, &self.preferences()?))
    }

    /// Checks every block plus the cross-cutting invariants: positive initial
    /// wealth, positive step, horizon inside the quadrature cap, nonnegative
    /// hazard at entry, and feasibility of the optimal strategy at entry.
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        let prefs = self.preferences()?;
        self.mortality.validate()?;
        self.quadrature.validate()?;

        let s = &self.scenario;
        if !s.entry_age.is_finite() || !s.end_age.is_finite() {
            return Err(Error::Config("scenario ages must be finite".into()));
        }
        if s.end_age <= s.entry_age {
            return Err(Error::Config(format!(
                "scenario end_age {} must exceed entry_age {}",
                s.end_age, s.entry_age
            )));
        }
        if s.end_age > self.quadrature.max_age {
            return Err(Error::Config(format!(
                "scenario end_age {} exceeds quadrature max_age {}",
                s.end_age, self.quadrature.max_age
            )));
        }
        if !(s.initial_wealth.is_finite() && s.initial_wealth > 0.0) {
            return Err(Error::Config(format!(
                "scenario initial_wealth must be positive, got {}",
                s.initial_wealth
            )));
        }
        if !(s.dt.is_finite() && s.dt > 0.0) {
            return Err(Error::Config(format!(
                "scenario dt must be positive, got {}",
                s.dt
            )));
        }
        require_nonnegative_hazard(&self.mortality, s.entry_age)?;

        let beta = discount_rate(&self.market, &prefs);
        let annuity_at_entry =
            annuity_factor(&self.mortality, s.entry_age, beta, &self.quadrature)?;
        feasibility(&prefs, beta, annuity_at_entry).require(s.entry_age)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    ///
    /// The config is re-serialized from the typed representation with keys in
    /// sorted order, so two files that differ only in key order or whitespace
    /// hash identically.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self)
            .expect("scenario config serializes")
            .to_string();
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}
