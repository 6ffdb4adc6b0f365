//! Wealth evolution under the optimal strategy: closed forms, present-value
//! analytics, the bequest distribution, and Monte Carlo simulation.
//!
//! Wealth follows a geometric dynamic once the optimal controls are
//! substituted, so `X(t)` has the closed form
//!
//! ```text
//! X(t) = x_s (c*(s)/c*(t)) exp[(r - beta + (mu-r) w* - sigma^2 w*^2 / 2) (t-s)
//!                              + sigma w* (W(t) - W(s))]
//! ```
//!
//! and every present-value quantity reported here is discounted at the
//! risk-free rate and expressed as a fraction of entry wealth.  The Monte
//! Carlo simulator integrates `d ln X` with the deterministic controls frozen
//! at each step start; the noise term then telescopes exactly, so pathwise
//! disagreement with the closed form is purely the first-order Riemann error
//! of the control drift and shrinks linearly in the step.
//!
//! Simulation is reproducible by construction: each path draws from its own
//! counter-based substream selected by path index, and summary statistics
//! reduce in path order regardless of how many threads generated the paths.

use std::io::Write as IoWrite;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::annuity::m_price;
use crate::error::{Error, Result};
use crate::mortality::HazardCurve;
use crate::scenario::ScenarioConfig;
use crate::strategy::{bequest_multiple, discount_rate, merton_weight};

/// Exact CSV header for simulation summaries.
pub const SUMMARY_CSV_HEADER: &str = "age,mean_X,mean_C_pv,mean_B_pv,mean_I_pv,q05_B,q50_B,q95_B";

/// Closed-form wealth at age `t` given the Wiener increment `W(t) - W(s)`.
pub fn wealth_closed_form(config: &ScenarioConfig, t: f64, wiener_sum: f64) -> Result<f64> {
    let parts = ScenarioParts::new(config)?;
    parts.require_age(t)?;
    parts.wealth(t, wiener_sum)
}

/// Expected wealth `E[X(t)] = x_s (c*(s)/c*(t)) e^{(r - beta + (mu-r) w*)(t-s)}`.
pub fn expected_wealth(config: &ScenarioConfig, t: f64) -> Result<f64> {
    let parts = ScenarioParts::new(config)?;
    parts.require_age(t)?;
    let ratio = parts.consumption_at_entry / parts.consumption(t)?;
    let growth = parts.market_drift() * (t - parts.entry_age);
    Ok(parts.initial_wealth * ratio * growth.exp())
}

/// Expected present value of the monetary consumption rate, as a fraction of
/// entry wealth per year:
/// `E[e^{-r(t-s)} c*(t) X(t)] / x_s = c*(s) e^{(-beta + (mu-r) w*)(t-s)}`.
pub fn expected_consumption_pv(config: &ScenarioConfig, t: f64) -> Result<f64> {
    let parts = ScenarioParts::new(config)?;
    parts.require_age(t)?;
    Ok(parts.consumption_pv_mean(t))
}

/// Expected present value of the bequest amount, as a fraction of entry
/// wealth.  Equals expected consumption divided by the
/// mortality-credit-for-bequest ratio, i.e. multiplied by the bequest
/// multiple `k`.
pub fn expected_bequest_pv(config: &ScenarioConfig, t: f64) -> Result<f64> {
    let parts = ScenarioParts::new(config)?;
    parts.require_age(t)?;
    Ok(parts.bequest_multiple * parts.consumption_pv_mean(t))
}

/// Expected present value of the mortality credit rate, as a fraction of
/// entry wealth per year:
/// `alpha*(t) lambda(t) (c*(s)/c*(t)) e^{(-beta + (mu-r) w*)(t-s)}`.
///
/// The sign follows the sign of the tontine fraction: positive income for an
/// annuitant, zero in the neutral knife-edge, negative premiums for an
/// insuree.
pub fn expected_income_pv(config: &ScenarioConfig, t: f64) -> Result<f64> {
    let parts = ScenarioParts::new(config)?;
    parts.require_age(t)?;
    let consumption = parts.consumption(t)?;
    let tontine_fraction = 1.0 - parts.bequest_multiple * consumption;
    let lambda = config.mortality.hazard(t);
    let ratio = parts.consumption_at_entry / consumption;
    let growth = parts.pv_drift() * (t - parts.entry_age);
    Ok(tontine_fraction * lambda * ratio * growth.exp())
}

/// Analytic distribution of the present-valued bequest `B(t)`.
#[derive(Debug, Clone, Serialize)]
pub struct LognormalSummary {
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    /// Standard deviation of `ln B(t)`, `sigma w* sqrt(t-s)`.
    pub log_sd: f64,
    /// Requested (probability, value) pairs.
    pub quantiles: Vec<(f64, f64)>,
    /// True when the distribution collapses to a point mass (`w* = 0` or
    /// `t = s`).
    pub degenerate: bool,
}

/// Distribution of the present-valued bequest amount at age `t`.
///
/// `B(t)` is lognormal with mean `k c*(s) e^{(-beta + (mu-r) w*)(t-s)}` and
/// log-variance `sigma^2 w*^2 (t-s)`; the median is `mean e^{-lv/2}` and the
/// mode `mean e^{-3lv/2}`.  With no risky exposure the distribution is a
/// point mass and the summary is flagged degenerate.
pub fn bequest_distribution(
    config: &ScenarioConfig,
    t: f64,
    quantiles: &[f64],
) -> Result<LognormalSummary> {
    let parts = ScenarioParts::new(config)?;
    parts.require_age(t)?;
    for &p in quantiles {
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!(
                "quantile probabilities must lie in (0, 1), got {p}"
            )));
        }
    }
    let mean = parts.bequest_multiple * parts.consumption_pv_mean(t);
    let log_var = (parts.volatility * parts.risky_weight).powi(2) * (t - parts.entry_age);
    let log_sd = log_var.sqrt();
    if log_sd == 0.0 {
        return Ok(LognormalSummary {
            mean,
            median: mean,
            mode: mean,
            log_sd,
            quantiles: quantiles.iter().map(|&p| (p, mean)).collect(),
            degenerate: true,
        });
    }
    let median = mean * (-0.5 * log_var).exp();
    let mode = mean * (-1.5 * log_var).exp();
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let quantiles = quantiles
        .iter()
        .map(|&p| (p, median * (log_sd * standard.inverse_cdf(p)).exp()))
        .collect();
    Ok(LognormalSummary {
        mean,
        median,
        mode,
        log_sd,
        quantiles,
        degenerate: false,
    })
}

/// One simulated wealth path sampled at the yearly record ages.
#[derive(Debug, Clone)]
pub struct WealthPath {
    /// Record ages, entry first.
    pub ages: Vec<f64>,
    /// Accumulated Wiener increments `W(t) - W(s)` at the record ages.
    pub wiener: Vec<f64>,
    /// Wealth `X(t)`.
    pub wealth: Vec<f64>,
    /// Bequest account `(1 - alpha*(t)) X(t)`.
    pub bequest_account: Vec<f64>,
    /// Monetary consumption rate `c*(t) X(t)`.
    pub consumption: Vec<f64>,
    /// Mortality credit rate `alpha*(t) lambda(t) X(t)`.
    pub credit: Vec<f64>,
}

/// Per-age Monte Carlo summary row.
///
/// Means carry standard errors for the 3-standard-error acceptance bands;
/// quantiles are empirical with linear interpolation between order
/// statistics.  Present values are fractions of entry wealth.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub age: f64,
    pub mean_wealth: f64,
    pub se_wealth: f64,
    pub mean_consumption_pv: f64,
    pub se_consumption_pv: f64,
    pub q05_consumption_pv: f64,
    pub q50_consumption_pv: f64,
    pub q95_consumption_pv: f64,
    pub mean_bequest_pv: f64,
    pub se_bequest_pv: f64,
    pub q05_bequest_pv: f64,
    pub q50_bequest_pv: f64,
    pub q95_bequest_pv: f64,
    pub mean_income_pv: f64,
    pub se_income_pv: f64,
    pub q05_income_pv: f64,
    pub q50_income_pv: f64,
    pub q95_income_pv: f64,
}

/// Summary table over the record ages.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub rows: Vec<SummaryRow>,
}

impl SimulationSummary {
    /// Writes the fixed-format CSV
    /// (`age,mean_X,mean_C_pv,mean_B_pv,mean_I_pv,q05_B,q50_B,q95_B`).
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SUMMARY_CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                row.age,
                row.mean_wealth,
                row.mean_consumption_pv,
                row.mean_bequest_pv,
                row.mean_income_pv,
                row.q05_bequest_pv,
                row.q50_bequest_pv,
                row.q95_bequest_pv
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buffer = Vec::new();
        self.write_csv(&mut buffer).expect("writing to memory");
        String::from_utf8(buffer).expect("CSV is UTF-8")
    }
}

/// Full simulation output: the retained paths plus their summary.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub record_ages: Vec<f64>,
    pub paths: Vec<WealthPath>,
    pub summary: SimulationSummary,
}

/// Scenario quantities shared by all closed-form operations.
struct ScenarioParts<'a> {
    config: &'a ScenarioConfig,
    entry_age: f64,
    initial_wealth: f64,
    discount: f64,
    risky_weight: f64,
    volatility: f64,
    risk_free: f64,
    risk_premium: f64,
    bequest_multiple: f64,
    consumption_at_entry: f64,
}

impl<'a> ScenarioParts<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let prefs = config.preferences()?;
        let market = &config.market;
        let discount = discount_rate(market, &prefs);
        let k = bequest_multiple(&prefs);
        let entry_age = config.scenario.entry_age;
        let consumption_at_entry = 1.0
            / m_price(
                &config.mortality,
                entry_age,
                discount,
                k,
                &config.quadrature,
            )?;
        Ok(Self {
            config,
            entry_age,
            initial_wealth: config.scenario.initial_wealth,
            discount,
            risky_weight: merton_weight(market, &prefs),
            volatility: market.volatility,
            risk_free: market.risk_free,
            risk_premium: market.risky_drift - market.risk_free,
            bequest_multiple: k,
            consumption_at_entry,
        })
    }

    fn require_age(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < self.entry_age {
            return Err(Error::Config(format!(
                "age {t} precedes the entry age {}",
                self.entry_age
            )));
        }
        if t > self.config.quadrature.max_age {
            return Err(Error::Config(format!(
                "age {t} exceeds the quadrature max_age {}",
                self.config.quadrature.max_age
            )));
        }
        Ok(())
    }

    fn consumption(&self, t: f64) -> Result<f64> {
        Ok(1.0
            / m_price(
                &self.config.mortality,
                t,
                self.discount,
                self.bequest_multiple,
                &self.config.quadrature,
            )?)
    }

    /// Drift of expected wealth: `r - beta + (mu - r) w*`.
    fn market_drift(&self) -> f64 {
        self.risk_free - self.discount + self.risk_premium * self.risky_weight
    }

    /// Drift of discounted expectations: `-beta + (mu - r) w*`.
    fn pv_drift(&self) -> f64 {
        -self.discount + self.risk_premium * self.risky_weight
    }

    fn consumption_pv_mean(&self, t: f64) -> f64 {
        self.consumption_at_entry * (self.pv_drift() * (t - self.entry_age)).exp()
    }

    fn wealth(&self, t: f64, wiener_sum: f64) -> Result<f64> {
        let tau = t - self.entry_age;
        let vol_weight = self.volatility * self.risky_weight;
        let drift = self.market_drift() - 0.5 * vol_weight.powi(2);
        let ratio = self.consumption_at_entry / self.consumption(t)?;
        Ok(self.initial_wealth * ratio * (drift * tau + vol_weight * wiener_sum).exp())
    }
}

/// Deterministic per-step control schedule shared by every path.
struct StepGrid {
    entry_age: f64,
    dt: f64,
    steps_per_year: usize,
    years: usize,
    /// `(r + (mu-r) w* - sigma^2 w*^2 / 2 + alpha* lambda - c*) dt` at each
    /// step start.
    log_drift_dt: Vec<f64>,
    /// `sigma w* sqrt(dt)`.
    diffusion: f64,
    record_ages: Vec<f64>,
    record_consumption: Vec<f64>,
    record_bequest_fraction: Vec<f64>,
    record_hazard: Vec<f64>,
}

impl StepGrid {
    fn new(config: &ScenarioConfig, parts: &ScenarioParts) -> Result<Self> {
        let dt = config.scenario.dt;
        let steps_per_year = (1.0 / dt).round().max(1.0) as usize;
        if (steps_per_year as f64 * dt - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "dt {dt} must divide one year evenly (for example 1/252 or 1/12)"
            )));
        }
        let entry_age = config.scenario.entry_age;
        let years = ((config.scenario.end_age - entry_age) + 1e-9).floor() as usize;
        if years < 1 {
            return Err(Error::Config(format!(
                "simulation horizon must cover at least one year, got entry {} to end {}",
                entry_age, config.scenario.end_age
            )));
        }

        let hazard = &config.mortality;
        let k = parts.bequest_multiple;
        let base_drift = parts.market_drift() + parts.discount
            - 0.5 * (parts.volatility * parts.risky_weight).powi(2);

        let n_steps = years * steps_per_year;
        let mut log_drift_dt = Vec::with_capacity(n_steps);
        for j in 0..n_steps {
            let age = step_age(entry_age, j, steps_per_year, dt);
            let consumption = parts.consumption(age)?;
            let lambda = hazard.hazard(age);
            let credit = (1.0 - k * consumption) * lambda;
            log_drift_dt.push((base_drift + credit - consumption) * dt);
        }

        let mut record_ages = Vec::with_capacity(years + 1);
        let mut record_consumption = Vec::with_capacity(years + 1);
        let mut record_bequest_fraction = Vec::with_capacity(years + 1);
        let mut record_hazard = Vec::with_capacity(years + 1);
        for year in 0..=years {
            let age = entry_age + year as f64;
            let consumption = parts.consumption(age)?;
            record_ages.push(age);
            record_consumption.push(consumption);
            record_bequest_fraction.push(k * consumption);
            record_hazard.push(hazard.hazard(age));
        }

        Ok(Self {
            entry_age,
            dt,
            steps_per_year,
            years,
            log_drift_dt,
            diffusion: parts.volatility * parts.risky_weight * dt.sqrt(),
            record_ages,
            record_consumption,
            record_bequest_fraction,
            record_hazard,
        })
    }

    fn n_steps(&self) -> usize {
        self.years * self.steps_per_year
    }
}

/// Step-start age with record ages kept exactly on integer year marks.
fn step_age(entry_age: f64, step: usize, steps_per_year: usize, dt: f64) -> f64 {
    let year = step / steps_per_year;
    let sub = step % steps_per_year;
    entry_age + year as f64 + sub as f64 * dt
}

/// One path generated from its dedicated RNG substream.
fn generate_path(grid: &StepGrid, initial_wealth: f64, seed: u64, index: usize) -> WealthPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);

    let records = grid.years + 1;
    let mut wiener = Vec::with_capacity(records);
    let mut wealth = Vec::with_capacity(records);
    let mut log_wealth = initial_wealth.ln();
    let mut wiener_sum = 0.0;
    wiener.push(0.0);
    wealth.push(initial_wealth);

    let sqrt_dt = grid.dt.sqrt();
    for j in 0..grid.n_steps() {
        let z: f64 = StandardNormal.sample(&mut rng);
        let dw = sqrt_dt * z;
        wiener_sum += dw;
        log_wealth += grid.log_drift_dt[j] + grid.diffusion * z;
        if (j + 1) % grid.steps_per_year == 0 {
            wiener.push(wiener_sum);
            wealth.push(log_wealth.exp());
        }
    }

    let mut bequest_account = Vec::with_capacity(records);
    let mut consumption = Vec::with_capacity(records);
    let mut credit = Vec::with_capacity(records);
    for (i, &x) in wealth.iter().take(records).enumerate() {
        let bequest_fraction = grid.record_bequest_fraction[i];
        bequest_account.push(bequest_fraction * x);
        consumption.push(grid.record_consumption[i] * x);
        credit.push((1.0 - bequest_fraction) * grid.record_hazard[i] * x);
    }

    WealthPath {
        ages: grid.record_ages.clone(),
        wiener,
        wealth,
        bequest_account,
        consumption,
        credit,
    }
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let position = p * (sorted.len() - 1) as f64;
    let low = position.floor() as usize;
    let high = position.ceil() as usize;
    let fraction = position - low as f64;
    sorted[low] + fraction * (sorted[high] - sorted[low])
}

/// Mean and standard error accumulated in fixed order.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (variance / n).sqrt())
}

/// Simulates the configured number of paths and summarizes them.
///
/// Paths are generated in parallel but collected in index order, and every
/// summary statistic reduces over paths in that fixed order, so output is
/// bit-identical for a given seed regardless of thread count.  Requesting
/// zero paths yields the analytic summary from the closed forms instead.
pub fn simulate_paths(config: &ScenarioConfig) -> Result<Simulation> {
    let parts = ScenarioParts::new(config)?;
    let grid = StepGrid::new(config, &parts)?;
    if config.scenario.paths == 0 {
        return Ok(Simulation {
            record_ages: grid.record_ages.clone(),
            paths: Vec::new(),
            summary: analytic_summary_from(&parts, &grid)?,
        });
    }

    let seed = config.scenario.seed;
    let initial_wealth = config.scenario.initial_wealth;
    let paths: Vec<WealthPath> = (0..config.scenario.paths)
        .into_par_iter()
        .map(|index| generate_path(&grid, initial_wealth, seed, index))
        .collect();

    let summary = summarize(config, &grid, &paths);
    Ok(Simulation {
        record_ages: grid.record_ages.clone(),
        paths,
        summary,
    })
}

fn summarize(config: &ScenarioConfig, grid: &StepGrid, paths: &[WealthPath]) -> SimulationSummary {
    let x_s = config.scenario.initial_wealth;
    let r = config.market.risk_free;
    let records = grid.years + 1;
    let mut rows = Vec::with_capacity(records);
    let mut wealth_scratch = vec![0.0; paths.len()];
    let mut consumption_scratch = vec![0.0; paths.len()];
    let mut bequest_scratch = vec![0.0; paths.len()];
    let mut income_scratch = vec![0.0; paths.len()];
    let mut sorted = vec![0.0; paths.len()];

    for i in 0..records {
        let age = grid.record_ages[i];
        let discount = (-r * (age - grid.entry_age)).exp() / x_s;
        for (p, path) in paths.iter().enumerate() {
            wealth_scratch[p] = path.wealth[i];
            consumption_scratch[p] = discount * path.consumption[i];
            bequest_scratch[p] = discount * path.bequest_account[i];
            income_scratch[p] = discount * path.credit[i];
        }
        let (mean_wealth, se_wealth) = mean_and_se(&wealth_scratch);
        let (mean_consumption_pv, se_consumption_pv) = mean_and_se(&consumption_scratch);
        let (mean_bequest_pv, se_bequest_pv) = mean_and_se(&bequest_scratch);
        let (mean_income_pv, se_income_pv) = mean_and_se(&income_scratch);

        let quantiles = |values: &[f64], sorted: &mut [f64]| {
            sorted.copy_from_slice(values);
            sorted.sort_unstable_by(f64::total_cmp);
            (
                quantile_sorted(sorted, 0.05),
                quantile_sorted(sorted, 0.50),
                quantile_sorted(sorted, 0.95),
            )
        };
        let (q05_consumption_pv, q50_consumption_pv, q95_consumption_pv) =
            quantiles(&consumption_scratch, &mut sorted);
        let (q05_bequest_pv, q50_bequest_pv, q95_bequest_pv) =
            quantiles(&bequest_scratch, &mut sorted);
        let (q05_income_pv, q50_income_pv, q95_income_pv) = quantiles(&income_scratch, &mut sorted);

        rows.push(SummaryRow {
            age,
            mean_wealth,
            se_wealth,
            mean_consumption_pv,
            se_consumption_pv,
            q05_consumption_pv,
            q50_consumption_pv,
            q95_consumption_pv,
            mean_bequest_pv,
            se_bequest_pv,
            q05_bequest_pv,
            q50_bequest_pv,
            q95_bequest_pv,
            mean_income_pv,
            se_income_pv,
            q05_income_pv,
            q50_income_pv,
            q95_income_pv,
        });
    }
    SimulationSummary { rows }
}

/// Summary built entirely from the closed forms, with zero standard errors
/// and lognormal quantiles, used when no Monte Carlo paths are requested.
pub fn analytic_summary(config: &ScenarioConfig) -> Result<SimulationSummary> {
    let parts = ScenarioParts::new(config)?;
    let grid = StepGrid::new(config, &parts)?;
    analytic_summary_from(&parts, &grid)
}

fn analytic_summary_from(parts: &ScenarioParts, grid: &StepGrid) -> Result<SimulationSummary> {
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(grid.years + 1);
    for i in 0..=grid.years {
        let age = grid.record_ages[i];
        let tau = age - grid.entry_age;
        let mean_consumption_pv = parts.consumption_pv_mean(age);
        let mean_bequest_pv = parts.bequest_multiple * mean_consumption_pv;
        let consumption = grid.record_consumption[i];
        let tontine_fraction = 1.0 - grid.record_bequest_fraction[i];
        let mean_income_pv = tontine_fraction
            * grid.record_hazard[i]
            * (parts.consumption_at_entry / consumption)
            * (parts.pv_drift() * tau).exp();
        let mean_wealth = parts.initial_wealth
            * (parts.consumption_at_entry / consumption)
            * (parts.market_drift() * tau).exp();

        let log_var = (parts.volatility * parts.risky_weight).powi(2) * tau;
        let log_sd = log_var.sqrt();
        let lognormal_quantile = |mean: f64, p: f64| {
            if log_sd == 0.0 {
                mean
            } else {
                mean * (-0.5 * log_var + log_sd * standard.inverse_cdf(p)).exp()
            }
        };
        rows.push(SummaryRow {
            age,
            mean_wealth,
            se_wealth: 0.0,
            mean_consumption_pv,
            se_consumption_pv: 0.0,
            q05_consumption_pv: lognormal_quantile(mean_consumption_pv, 0.05),
            q50_consumption_pv: lognormal_quantile(mean_consumption_pv, 0.50),
            q95_consumption_pv: lognormal_quantile(mean_consumption_pv, 0.95),
            mean_bequest_pv,
            se_bequest_pv: 0.0,
            q05_bequest_pv: lognormal_quantile(mean_bequest_pv, 0.05),
            q50_bequest_pv: lognormal_quantile(mean_bequest_pv, 0.50),
            q95_bequest_pv: lognormal_quantile(mean_bequest_pv, 0.95),
            mean_income_pv,
            se_income_pv: 0.0,
            q05_income_pv: lognormal_quantile(mean_income_pv, 0.05),
            q50_income_pv: lognormal_quantile(mean_income_pv, 0.50),
            q95_income_pv: lognormal_quantile(mean_income_pv, 0.95),
        });
    }
    Ok(SimulationSummary { rows })
}
