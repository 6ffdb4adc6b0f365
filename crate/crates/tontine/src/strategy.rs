//! Optimal controls, regimes, and strategy schedules.
//!
//! Under power utility `x^gamma / gamma` (relative risk aversion
//! `1 - gamma`, logarithmic at `gamma = 0`), bequest weight `b`, and a
//! frictionless market with risk-free rate `r`, risky drift `mu`, and
//! volatility `sigma`, the value-maximising controls are deterministic
//! functions of age:
//!
//! ```text
//! beta  = r + (rho - r)/(1 - gamma)
//!           - (gamma/2) ((mu - r)/sigma)^2 (1/(1 - gamma))^2
//! w*    = (mu - r) / ((1 - gamma) sigma^2)
//! k     = b^(1/(1 - gamma))
//! m(t)  = k + (1 - beta k) A(t, beta)
//! c*(t) = 1 / m(t)
//! 1 - alpha*(t) = k c*(t)
//! ```
//!
//! `c*` is the fractional consumption rate, `alpha*` the tontine-account
//! fraction, `w*` the constant risky-asset weight, and `k` the bequest
//! multiple: the estate receives `k` times the yearly monetary consumption
//! rate at death. Its reciprocal, the consumption-bequest ratio, separates
//! three regimes by the sign of `alpha*`: Annuitant (positive tontine
//! position), Neutral (`beta k = 1`, everything in the bequest account),
//! and Insuree (negative position, paying mortality premiums).
//!
//! The log-utility branch is the exact `gamma = 0` limit of every formula
//! above, so both branches share one code path; the [`Preferences`]
//! constructor merely forces the choice to be explicit.

use serde::Serialize;
use std::fmt;
use std::io::Write;

use crate::annuity::{annuity_factor, annuity_factor_tv, m_price, m_price_tv, QuadratureSettings};
use crate::error::{Error, Result};
use crate::mortality::HazardCurve;

/// Market constants: risk-free rate, risky-asset drift and volatility,
/// and the subjective time-preference rate, all per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    #[serde(rename = "r")]
    pub risk_free: f64,
    #[serde(rename = "mu")]
    pub risky_drift: f64,
    #[serde(rename = "sigma")]
    pub volatility: f64,
    #[serde(rename = "rho")]
    pub time_preference: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r", self.risk_free),
            ("mu", self.risky_drift),
            ("sigma", self.volatility),
            ("rho", self.time_preference),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::Config(format!("market {name} must be finite")));
            }
        }
        if self.volatility <= 0.0 {
            return Err(Error::Config(format!(
                "volatility must be positive, got {}",
                self.volatility
            )));
        }
        Ok(())
    }

    /// Sharpe ratio of the risky asset, `(mu - r) / sigma`.
    pub fn sharpe(&self) -> f64 {
        (self.risky_drift - self.risk_free) / self.volatility
    }
}

/// Utility branch. Log utility is the `gamma = 0` limit of the power
/// branch; keeping it a separate variant forces that limit to be taken
/// deliberately rather than through a silent zero exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Utility {
    Power { gamma: f64 },
    Log,
}

/// Risk preferences and bequest weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preferences {
    pub utility: Utility,
    /// Weight `b >= 0` on the bequest term of the objective; 0 disables
    /// the bequest motive entirely.
    pub bequest_weight: f64,
}

impl Preferences {
    /// Power utility with exponent `gamma < 1`, `gamma != 0`.
    pub fn power(gamma: f64, bequest_weight: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma >= 1.0 {
            return Err(Error::Config(format!(
                "utility exponent must be finite and below 1, got {gamma}"
            )));
        }
        if gamma == 0.0 {
            return Err(Error::Config(
                "utility exponent 0 is the logarithmic branch; construct it explicitly".into(),
            ));
        }
        Self::checked(Utility::Power { gamma }, bequest_weight)
    }

    /// Logarithmic utility.
    pub fn log(bequest_weight: f64) -> Result<Self> {
        Self::checked(Utility::Log, bequest_weight)
    }

    fn checked(utility: Utility, bequest_weight: f64) -> Result<Self> {
        if !(bequest_weight.is_finite() && bequest_weight >= 0.0) {
            return Err(Error::Config(format!(
                "bequest weight must be finite and nonnegative, got {bequest_weight}"
            )));
        }
        Ok(Preferences {
            utility,
            bequest_weight,
        })
    }

    /// Utility exponent; 0 on the log branch.
    pub fn gamma(&self) -> f64 {
        match self.utility {
            Utility::Power { gamma } => gamma,
            Utility::Log => 0.0,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self.utility, Utility::Log)
    }
}

/// Preference-adjusted discount rate entering the annuity factor.
pub fn discount_rate(market: &MarketParams, prefs: &Preferences) -> f64 {
    let inv = 1.0 / (1.0 - prefs.gamma());
    let sharpe = market.sharpe();
    market.risk_free + (market.time_preference - market.risk_free) * inv
        - 0.5 * prefs.gamma() * sharpe * sharpe * inv * inv
}

/// Constant optimal risky-asset weight.
pub fn merton_weight(market: &MarketParams, prefs: &Preferences) -> f64 {
    (market.risky_drift - market.risk_free)
        / ((1.0 - prefs.gamma()) * market.volatility * market.volatility)
}

/// Bequest multiple `k = b^(1/(1 - gamma))`: desired bequest amount as a
/// multiple of the yearly monetary consumption rate.
pub fn bequest_multiple(prefs: &Preferences) -> f64 {
    prefs.bequest_weight.powf(1.0 / (1.0 - prefs.gamma()))
}

/// Monetary consumption-bequest ratio, the reciprocal of the bequest
/// multiple. Undefined without a bequest motive.
pub fn mcbr(prefs: &Preferences) -> Result<f64> {
    if prefs.bequest_weight == 0.0 {
        return Err(Error::Config(
            "consumption-bequest ratio is undefined for bequest weight 0".into(),
        ));
    }
    Ok(1.0 / bequest_multiple(prefs))
}

/// Outcome of the entry-age feasibility test `k beta < 1 + k / A(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    /// Product of bequest multiple and discount rate.
    pub kbeta: f64,
    /// Upper bound `1 + k / A(s)` the product must stay below.
    pub bound: f64,
    /// `bound - kbeta`; positive iff feasible, and `m(s) = A(s) * margin`.
    pub margin: f64,
}

impl FeasibilityCheck {
    pub fn require(&self, age: f64) -> Result<()> {
        if self.feasible {
            Ok(())
        } else {
            Err(Error::Infeasible {
                age,
                kbeta: self.kbeta,
                bound: self.bound,
                margin: self.margin,
            })
        }
    }
}

/// Tests `k beta < 1 + k / A(s)` given the annuity factor at entry age.
///
/// For any nonnegative hazard, `beta A(s, beta) < 1`, so every scenario
/// built on a proper mortality law passes; the check still guards direct
/// numeric inputs and reports the margin for diagnostics.
pub fn feasibility(prefs: &Preferences, discount: f64, annuity_at_entry: f64) -> FeasibilityCheck {
    let k = bequest_multiple(prefs);
    let kbeta = k * discount;
    let bound = 1.0 + k / annuity_at_entry;
    FeasibilityCheck {
        feasible: kbeta < bound,
        kbeta,
        bound,
        margin: bound - kbeta,
    }
}

/// Position regime implied by the sign of the optimal tontine fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `beta k < 1`: positive tontine position, earning mortality credits.
    Annuitant,
    /// `beta k = 1`: no tontine position, the whole pot sits in the
    /// bequest account.
    Neutral,
    /// `beta k > 1`: negative tontine position, paying mortality premiums
    /// like a life-insurance buyer.
    Insuree,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Regime::Annuitant => "Annuitant",
            Regime::Neutral => "Neutral",
            Regime::Insuree => "Insuree",
        };
        f.write_str(name)
    }
}

/// Width of the band around `beta k = 1` classified as Neutral, covering
/// rounding in inputs meant to hit the knife edge exactly.
const NEUTRAL_BAND: f64 = 1e-12;

/// Classifies the regime from the bequest multiple and discount rate.
pub fn regime(prefs: &Preferences, discount: f64) -> Regime {
    let kbeta = bequest_multiple(prefs) * discount;
    if (kbeta - 1.0).abs() <= NEUTRAL_BAND {
        Regime::Neutral
    } else if kbeta < 1.0 {
        Regime::Annuitant
    } else {
        Regime::Insuree
    }
}

/// Risk exponent at which the discount rate equals the risky excess
/// growth, `beta = (mu - r) w*`, making expected discounted consumption
/// and bequest constant in age.
///
/// For the reference market `r = rho = 0.02`, `mu = 0.05`, `sigma = 0.2`
/// the root is near -0.08225 (often quoted rounded to -0.0825). Found by
/// bisection on `(-50, 1)`; the level residual at the returned root is
/// below 1e-12.
pub fn level_gamma(market: &MarketParams) -> Result<f64> {
    market.validate()?;
    if market.risky_drift <= market.risk_free {
        return Err(Error::Config(
            "level condition needs a positive risk premium".into(),
        ));
    }
    let residual = |gamma: f64| {
        let prefs = Preferences {
            utility: Utility::Power { gamma },
            bequest_weight: 1.0,
        };
        discount_rate(market, &prefs)
            - (market.risky_drift - market.risk_free) * merton_weight(market, &prefs)
    };
    let mut lo = -50.0;
    let mut hi = 1.0 - 1e-9;
    let (mut f_lo, f_hi) = (residual(lo), residual(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(
            "level condition has no root for risk exponents in (-50, 1)".into(),
        ));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = residual(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    if residual(root).abs() > 1e-12 {
        return Err(Error::Numerical(format!(
            "level-condition residual {:e} at root {root} exceeds 1e-12",
            residual(root)
        )));
    }
    Ok(root)
}

/// Full set of optimal controls and pricing state at one age.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub age: f64,
    /// Force of mortality at this age.
    pub hazard: f64,
    /// Annuity factor `A(age, beta)`.
    pub annuity: f64,
    /// Price of a unit of fractional consumption, `m(age)`.
    pub price: f64,
    /// Optimal fractional consumption rate `c*(age) = 1/m(age)`.
    pub consumption: f64,
    /// Optimal tontine-account fraction `alpha*(age)`.
    pub tontine_fraction: f64,
    /// Optimal bequest-account fraction `1 - alpha*(age) = k c*(age)`.
    pub bequest_fraction: f64,
    /// Optimal risky-asset weight.
    pub risky_weight: f64,
    pub regime: Regime,
}

/// Evaluates every control at one age. Feasibility is implied for proper
/// mortality laws; the guard still reports any nonpositive price.
pub fn strategy_at<H: HazardCurve + ?Sized>(
    hazard: &H,
    age: f64,
    market: &MarketParams,
    prefs: &Preferences,
    settings: &QuadratureSettings,
) -> Result<ScheduleRow> {
    market.validate()?;
    let beta = discount_rate(market, prefs);
    let k = bequest_multiple(prefs);
    let annuity = annuity_factor(hazard, age, beta, settings)?;
    let price = m_price(hazard, age, beta, k, settings)?;
    if price.is_nan() || price <= 0.0 {
        feasibility(prefs, beta, annuity).require(age)?;
        return Err(Error::Numerical(format!(
            "consumption price {price} is not positive at age {age}"
        )));
    }
    let consumption = 1.0 / price;
    let bequest_fraction = k * consumption;
    Ok(ScheduleRow {
        age,
        hazard: hazard.hazard(age),
        annuity,
        price,
        consumption,
        tontine_fraction: 1.0 - bequest_fraction,
        bequest_fraction,
        risky_weight: merton_weight(market, prefs),
        regime: regime(prefs, beta),
    })
}

/// Optimal fractional consumption rate `c*(age)`.
pub fn consumption_rate<H: HazardCurve + ?Sized>(
    hazard: &H,
    age: f64,
    market: &MarketParams,
    prefs: &Preferences,
    settings: &QuadratureSettings,
) -> Result<f64> {
    Ok(strategy_at(hazard, age, market, prefs, settings)?.consumption)
}

/// Optimal bequest-account fraction `1 - alpha*(age)`.
pub fn bequest_proportion<H: HazardCurve + ?Sized>(
    hazard: &H,
    age: f64,
    market: &MarketParams,
    prefs: &Preferences,
    settings: &QuadratureSettings,
) -> Result<f64> {
    Ok(strategy_at(hazard, age, market, prefs, settings)?.bequest_fraction)
}

/// Inclusive arithmetic age grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct AgeGrid {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl AgeGrid {
    pub fn new(from: f64, to: f64, step: f64) -> Result<Self> {
        if !(from.is_finite() && to.is_finite() && step.is_finite()) {
            return Err(Error::Config("age grid must be finite".into()));
        }
        if step.is_nan() || step <= 0.0 {
            return Err(Error::Config(format!(
                "age grid step must be positive, got {step}"
            )));
        }
        if to < from {
            return Err(Error::Config(format!(
                "age grid end {to} lies before start {from}"
            )));
        }
        Ok(AgeGrid { from, to, step })
    }

    /// Grid ages, endpoint included when it lands on the lattice.
    pub fn ages(&self) -> Vec<f64> {
        let count = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| self.from + i as f64 * self.step)
            .collect()
    }
}

/// Deterministic control schedule over an age grid, with the entry-age
/// feasibility diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySchedule {
    pub rows: Vec<ScheduleRow>,
    /// Regime at the entry age (constant over the grid unless the market
    /// curves vary with age).
    pub regime: Regime,
    pub feasibility: FeasibilityCheck,
    /// True when produced by the age-varying extension, whose closed
    /// forms are stated without proof.
    pub conjectural: bool,
}

impl StrategySchedule {
    /// Writes the schedule as CSV with the fixed column contract.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "age,lambda,annuity_A,m_price,c_star,alpha_star,bequest_prop,w_star,regime"
        )?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.age,
                row.hazard,
                row.annuity,
                row.price,
                row.consumption,
                row.tontine_fraction,
                row.bequest_fraction,
                row.risky_weight,
                row.regime
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Builds the schedule on `grid` under constant market parameters.
///
/// Feasibility is checked once at the grid start (the entry age); when it
/// holds there, the price stays positive at all later ages.
pub fn schedule<H: HazardCurve + ?Sized>(
    hazard: &H,
    grid: &AgeGrid,
    market: &MarketParams,
    prefs: &Preferences,
    settings: &QuadratureSettings,
) -> Result<StrategySchedule> {
    market.validate()?;
    let beta = discount_rate(market, prefs);
    let entry_annuity = annuity_factor(hazard, grid.from, beta, settings)?;
    let check = feasibility(prefs, beta, entry_annuity);
    check.require(grid.from)?;
    let rows = grid
        .ages()
        .into_iter()
        .map(|age| strategy_at(hazard, age, market, prefs, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategySchedule {
        rows,
        regime: regime(prefs, beta),
        feasibility: check,
        conjectural: false,
    })
}

/// Builds the schedule under age-varying market parameters.
///
/// The controls generalise pointwise: `beta(t)` and `w*(t)` take the
/// market snapshot at `t`, while the price integrates the discount curve,
/// `m(t) = k + integral_t (1 - k beta(u)) exp(-(H(t,u) + int beta)) du`.
/// These forms are conjectural (the schedule is flagged accordingly), and
/// positivity of the price is verified at every grid age rather than only
/// at entry.
pub fn schedule_tv<H, F>(
    hazard: &H,
    grid: &AgeGrid,
    market_curve: F,
    prefs: &Preferences,
    settings: &QuadratureSettings,
) -> Result<StrategySchedule>
where
    H: HazardCurve + ?Sized,
    F: Fn(f64) -> MarketParams,
{
    let k = bequest_multiple(prefs);
    let discount_curve = |u: f64| discount_rate(&market_curve(u), prefs);
    let mut rows = Vec::new();
    for age in grid.ages() {
        let market_here = market_curve(age);
        market_here.validate()?;
        let beta_here = discount_curve(age);
        let annuity = annuity_factor_tv(hazard, age, discount_curve, settings)?;
        let price = m_price_tv(hazard, age, discount_curve, k, settings)?;
        if price.is_nan() || price <= 0.0 {
            return Err(Error::Infeasible {
                age,
                kbeta: k * beta_here,
                bound: 1.0 + k / annuity,
                margin: price / annuity,
            });
        }
        let consumption = 1.0 / price;
        let bequest_fraction = k * consumption;
        rows.push(ScheduleRow {
            age,
            hazard: hazard.hazard(age),
            annuity,
            price,
            consumption,
            tontine_fraction: 1.0 - bequest_fraction,
            bequest_fraction,
            risky_weight: merton_weight(&market_here, prefs),
            regime: regime(prefs, beta_here),
        });
    }
    let entry_beta = discount_curve(grid.from);
    let entry_annuity = rows
        .first()
        .map(|row| row.annuity)
        .ok_or_else(|| Error::Config("empty age grid".into()))?;
    Ok(StrategySchedule {
        regime: regime(prefs, entry_beta),
        feasibility: feasibility(prefs, entry_beta, entry_annuity),
        conjectural: true,
        rows,
    })
}
