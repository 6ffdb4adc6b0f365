//! Tabular data behind the headline figures: the bequest-proportion surface,
//! life-cycle profiles of the present-value quantities, and the analytic
//! bequest distribution at a fixed age.
//!
//! Output is long-format CSV (one row per grid point) with `#`-prefixed
//! metadata rows carrying the scenario parameters; plotting is external.
//! Cells that cannot be evaluated are emitted as explicit empty values with
//! the reason in the `note` column, never silently dropped.

use std::io::Write as IoWrite;

use serde::Serialize;

use crate::annuity::{annuity_factor, QuadratureSettings};
use crate::error::{Error, Result};
use crate::mortality::GompertzMakeham;
use crate::paths::{
    bequest_distribution, expected_bequest_pv, expected_consumption_pv, expected_income_pv,
};
use crate::scenario::{PreferenceSpec, ScenarioConfig, ScenarioParams};
use crate::strategy::{strategy_at, AgeGrid, MarketParams};

/// Grid description for one figure.  Only the grids the figure id uses are
/// consulted; `defaults` fills in the standard ranges.
#[derive(Debug, Clone, Serialize)]
pub struct FigureSpec {
    /// Figure id, 1 through 6.
    pub id: u8,
    /// Entry age for the profile and density figures; the age grid holds
    /// the evaluation ages and must not start before it.
    pub entry_age: f64,
    pub ages: AgeGrid,
    /// Mortality-credit-for-bequest ratios for the surface figure.
    pub mcbr_grid: Vec<f64>,
    /// Discount rates for the surface figure.
    pub discount_grid: Vec<f64>,
    /// Bequest weights `b` for the profile figures.
    pub bequest_grid: Vec<f64>,
    /// Risk-aversion parameters for the profile and density figures.
    pub gamma_grid: Vec<f64>,
    pub market: MarketParams,
    pub mortality: GompertzMakeham,
    pub quadrature: QuadratureSettings,
    /// Sample count for the analytic density curve.
    pub density_points: usize,
}

impl FigureSpec {
    /// Standard grids: ages 65 to 105 yearly; bequest weights
    /// {0, 1, 3, 10, 30, 60}; risk aversion {0.8, 0.25, -0.08225, -10};
    /// the density figure fixes b = 3 at age 95.
    pub fn defaults(id: u8) -> Result<Self> {
        let market = MarketParams {
            risk_free: 0.02,
            risky_drift: 0.05,
            volatility: 0.2,
            time_preference: 0.02,
        };
        let spec = match id {
            1..=5 => FigureSpec {
                id,
                entry_age: 65.0,
                ages: AgeGrid::new(65.0, 105.0, 1.0)?,
                mcbr_grid: vec![0.01, 0.05, 0.1, 0.25, 0.5, 1.0],
                discount_grid: vec![-0.05, -0.02, 0.0, 0.02, 0.05, 0.1],
                bequest_grid: vec![0.0, 1.0, 3.0, 10.0, 30.0, 60.0],
                gamma_grid: vec![0.8, 0.25, -0.08225, -10.0],
                market,
                mortality: GompertzMakeham::uk_male(),
                quadrature: QuadratureSettings::default(),
                density_points: 201,
            },
            6 => FigureSpec {
                id,
                entry_age: 65.0,
                ages: AgeGrid::new(95.0, 95.0, 1.0)?,
                mcbr_grid: Vec::new(),
                discount_grid: Vec::new(),
                bequest_grid: vec![3.0],
                gamma_grid: vec![-0.08225, 0.8],
                market,
                mortality: GompertzMakeham::uk_male(),
                quadrature: QuadratureSettings::default(),
                density_points: 201,
            },
            other => {
                return Err(Error::Config(format!(
                    "figure id must be between 1 and 6, got {other}"
                )))
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.id) {
            return Err(Error::Config(format!(
                "figure id must be between 1 and 6, got {}",
                self.id
            )));
        }
        self.mortality.validate()?;
        self.market.validate()?;
        self.quadrature.validate()?;
        if self.ages.ages().is_empty() {
            return Err(Error::Config("figure age grid is empty".into()));
        }
        if self.id != 1 && (!self.entry_age.is_finite() || self.ages.from < self.entry_age) {
            return Err(Error::Config(format!(
                "age grid starts at {} before the entry age {}",
                self.ages.from, self.entry_age
            )));
        }
        match self.id {
            1 => {
                if self.mcbr_grid.is_empty() || self.discount_grid.is_empty() {
                    return Err(Error::Config(
                        "the surface figure needs nonempty mcbr and beta grids".into(),
                    ));
                }
                for &value in self.mcbr_grid.iter().chain(&self.discount_grid) {
                    if !(value.is_finite() && value > -1.0) {
                        return Err(Error::Config(format!(
                            "surface grids must stay above -1, got {value}"
                        )));
                    }
                }
            }
            2..=5 => {
                if self.bequest_grid.is_empty() || self.gamma_grid.is_empty() {
                    return Err(Error::Config(
                        "the profile figures need nonempty b and gamma grids".into(),
                    ));
                }
                for &b in &self.bequest_grid {
                    if !(b.is_finite() && (0.0..=60.0).contains(&b)) {
                        return Err(Error::Config(format!(
                            "bequest weight grid must lie in [0, 60], got {b}"
                        )));
                    }
                }
                for &gamma in &self.gamma_grid {
                    let aversion = 1.0 - gamma;
                    if !(gamma.is_finite() && aversion > 0.0 && aversion <= 11.0) {
                        return Err(Error::Config(format!(
                            "risk aversion 1 - gamma must lie in (0, 11], got gamma {gamma}"
                        )));
                    }
                }
            }
            6 => {
                if self.bequest_grid.is_empty() || self.gamma_grid.is_empty() {
                    return Err(Error::Config(
                        "the density figure needs nonempty b and gamma grids".into(),
                    ));
                }
                if self.density_points < 2 {
                    return Err(Error::Config(format!(
                        "density curve needs at least 2 points, got {}",
                        self.density_points
                    )));
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    fn profile_config(&self, gamma: f64, b: f64) -> ScenarioConfig {
        let end = *self.ages.ages().last().expect("validated nonempty");
        let mut scenario = ScenarioParams::at_entry(self.entry_age, 1.0);
        scenario.end_age = end.max(self.entry_age + 1.0);
        ScenarioConfig {
            market: self.market,
            prefs: PreferenceSpec::power(gamma, b),
            mortality: self.mortality,
            scenario,
            quadrature: self.quadrature,
        }
    }
}

/// One cell of the bequest-proportion surface.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceRow {
    pub age: f64,
    pub mcbr: f64,
    pub discount: f64,
    /// Empty on infeasible or failed cells; see `note`.
    pub bequest_proportion: Option<f64>,
    pub note: String,
}

/// Bequest proportion over (age, MCBR, discount rate): with `k = 1/MCBR`,
/// the proportion is `k / (k + (1 - beta k) A(age, beta))`.
///
/// For positive MCBR the cell is always feasible, because
/// `beta A(age, beta) < 1` for every nonnegative hazard; nulls arise only
/// from nonpositive MCBR values or from quadrature failures at extreme
/// discount rates.
pub fn figure1(spec: &FigureSpec) -> Result<Vec<SurfaceRow>> {
    spec.validate()?;
    let ages = spec.ages.ages();

    let mut annuities = Vec::with_capacity(spec.discount_grid.len());
    for &beta in &spec.discount_grid {
        let column: Vec<Result<f64>> = ages
            .iter()
            .map(|&age| annuity_factor(&spec.mortality, age, beta, &spec.quadrature))
            .collect();
        annuities.push(column);
    }

    let mut rows = Vec::with_capacity(spec.mcbr_grid.len() * spec.discount_grid.len() * ages.len());
    for &mcbr in &spec.mcbr_grid {
        for (bi, &beta) in spec.discount_grid.iter().enumerate() {
            for (ai, &age) in ages.iter().enumerate() {
                let cell = surface_cell(mcbr, beta, &annuities[bi][ai]);
                let (bequest_proportion, note) = match cell {
                    Ok(value) => (Some(value), String::new()),
                    Err(reason) => (None, reason),
                };
                rows.push(SurfaceRow {
                    age,
                    mcbr,
                    discount: beta,
                    bequest_proportion,
                    note,
                });
            }
        }
    }
    Ok(rows)
}

fn surface_cell(mcbr: f64, beta: f64, annuity: &Result<f64>) -> std::result::Result<f64, String> {
    if mcbr <= 0.0 {
        return Err(format!("mcbr must be positive, got {mcbr}"));
    }
    let annuity = match annuity {
        Ok(value) => *value,
        Err(err) => return Err(err.to_string()),
    };
    let k = 1.0 / mcbr;
    let price = k + (1.0 - beta * k) * annuity;
    if price <= 0.0 {
        return Err(format!(
            "infeasible: k beta = {} is not below 1 + k/A = {}",
            k * beta,
            1.0 + k / annuity
        ));
    }
    Ok(k / price)
}

/// One cell of the life-cycle profile figures.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    pub age: f64,
    pub bequest_weight: f64,
    pub gamma: f64,
    pub bequest_proportion: Option<f64>,
    pub consumption_pv: Option<f64>,
    pub bequest_pv: Option<f64>,
    pub income_pv: Option<f64>,
    pub note: String,
}

/// Life-cycle profiles over (age, b, gamma): bequest proportion and the
/// expected present values of consumption, bequest, and mortality income,
/// normalized to unit entry wealth.  One table serves figure ids 2
/// through 5; they plot different columns of the same grid.
pub fn figures2to5(spec: &FigureSpec) -> Result<Vec<ProfileRow>> {
    spec.validate()?;
    let ages = spec.ages.ages();
    let mut rows = Vec::with_capacity(spec.bequest_grid.len() * spec.gamma_grid.len() * ages.len());
    for &b in &spec.bequest_grid {
        for &gamma in &spec.gamma_grid {
            let config = spec.profile_config(gamma, b);
            let prefs = config.preferences()?;
            let scenario_ok = config.validate();
            for &age in &ages {
                if let Err(err) = &scenario_ok {
                    rows.push(ProfileRow {
                        age,
                        bequest_weight: b,
                        gamma,
                        bequest_proportion: None,
                        consumption_pv: None,
                        bequest_pv: None,
                        income_pv: None,
                        note: err.to_string(),
                    });
                    continue;
                }
                let cell =
                    strategy_at(&spec.mortality, age, &spec.market, &prefs, &spec.quadrature)
                        .and_then(|row| {
                            Ok((
                                row.bequest_fraction,
                                expected_consumption_pv(&config, age)?,
                                expected_bequest_pv(&config, age)?,
                                expected_income_pv(&config, age)?,
                            ))
                        });
                match cell {
                    Ok((proportion, consumption, bequest, income)) => rows.push(ProfileRow {
                        age,
                        bequest_weight: b,
                        gamma,
                        bequest_proportion: Some(proportion),
                        consumption_pv: Some(consumption),
                        bequest_pv: Some(bequest),
                        income_pv: Some(income),
                        note: String::new(),
                    }),
                    Err(err) => rows.push(ProfileRow {
                        age,
                        bequest_weight: b,
                        gamma,
                        bequest_proportion: None,
                        consumption_pv: None,
                        bequest_pv: None,
                        income_pv: None,
                        note: err.to_string(),
                    }),
                }
            }
        }
    }
    Ok(rows)
}

/// One row of the bequest-distribution figure: either a density sample
/// (`series = "density"`, `x` the bequest level) or a summary statistic
/// (`series` in {mean, median, mode, p95}, `x` empty).
#[derive(Debug, Clone, Serialize)]
pub struct DensityRow {
    pub gamma: f64,
    pub bequest_weight: f64,
    pub age: f64,
    pub series: String,
    pub x: Option<f64>,
    pub value: f64,
}

/// Analytic distribution of the present-valued bequest at the last grid
/// age: lognormal density samples on a log-spaced grid between the 0.1% and
/// 99.9% quantiles, plus the summary statistics.
pub fn figure6(spec: &FigureSpec) -> Result<Vec<DensityRow>> {
    spec.validate()?;
    let ages = spec.ages.ages();
    let age = *ages.last().expect("validated nonempty");
    let mut rows = Vec::new();
    for &b in &spec.bequest_grid {
        for &gamma in &spec.gamma_grid {
            let config = spec.profile_config(gamma, b);
            let summary = bequest_distribution(&config, age, &[0.001, 0.95, 0.999])?;
            let push_stat = |rows: &mut Vec<DensityRow>, series: &str, value: f64| {
                rows.push(DensityRow {
                    gamma,
                    bequest_weight: b,
                    age,
                    series: series.into(),
                    x: None,
                    value,
                });
            };
            push_stat(&mut rows, "mean", summary.mean);
            push_stat(&mut rows, "median", summary.median);
            push_stat(&mut rows, "mode", summary.mode);
            push_stat(&mut rows, "p95", summary.quantiles[1].1);
            if summary.degenerate {
                continue;
            }
            let low = summary.quantiles[0].1;
            let high = summary.quantiles[2].1;
            let log_low = low.ln();
            let log_step = (high.ln() - log_low) / (spec.density_points - 1) as f64;
            let log_median = summary.median.ln();
            let sd = summary.log_sd;
            for i in 0..spec.density_points {
                let log_x = log_low + i as f64 * log_step;
                let x = log_x.exp();
                let z = (log_x - log_median) / sd;
                let density = (-0.5 * z * z).exp() / (x * sd * (2.0 * std::f64::consts::PI).sqrt());
                rows.push(DensityRow {
                    gamma,
                    bequest_weight: b,
                    age,
                    series: "density".into(),
                    x: Some(x),
                    value: density,
                });
            }
        }
    }
    Ok(rows)
}

fn optional(value: &Option<f64>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

fn write_metadata<W: IoWrite>(spec: &FigureSpec, out: &mut W) -> Result<()> {
    writeln!(out, "# figure,{}", spec.id)?;
    writeln!(
        out,
        "# mortality,m={},q={},v={}",
        spec.mortality.modal_age, spec.mortality.dispersion, spec.mortality.makeham
    )?;
    if spec.id != 1 {
        writeln!(
            out,
            "# market,r={},mu={},sigma={},rho={}",
            spec.market.risk_free,
            spec.market.risky_drift,
            spec.market.volatility,
            spec.market.time_preference
        )?;
    }
    writeln!(
        out,
        "# ages,from={},to={},step={}",
        spec.ages.from, spec.ages.to, spec.ages.step
    )?;
    if spec.id != 1 {
        writeln!(out, "# entry_age,{}", spec.entry_age)?;
    }
    Ok(())
}

/// Writes the CSV for the requested figure id, metadata rows first.
pub fn write_figure_csv<W: IoWrite>(spec: &FigureSpec, mut out: W) -> Result<()> {
    spec.validate()?;
    write_metadata(spec, &mut out)?;
    match spec.id {
        1 => {
            writeln!(out, "age,mcbr,beta,bequest_prop,note")?;
            for row in figure1(spec)? {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.age,
                    row.mcbr,
                    row.discount,
                    optional(&row.bequest_proportion),
                    row.note
                )?;
            }
        }
        2..=5 => {
            writeln!(
                out,
                "age,b,gamma,bequest_prop,consumption_pv,bequest_pv,income_pv,note"
            )?;
            for row in figures2to5(spec)? {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    row.age,
                    row.bequest_weight,
                    row.gamma,
                    optional(&row.bequest_proportion),
                    optional(&row.consumption_pv),
                    optional(&row.bequest_pv),
                    optional(&row.income_pv),
                    row.note
                )?;
            }
        }
        6 => {
            writeln!(out, "gamma,b,age,series,x,value")?;
            for row in figure6(spec)? {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    row.gamma,
                    row.bequest_weight,
                    row.age,
                    row.series,
                    optional(&row.x),
                    row.value
                )?;
            }
        }
        _ => unreachable!("validated id"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_accept_known_ids_and_reject_others() {
        for id in 1..=6 {
            let spec = FigureSpec::defaults(id).unwrap();
            spec.validate().unwrap();
        }
        assert!(FigureSpec::defaults(0).is_err());
        assert!(FigureSpec::defaults(7).is_err());
    }

    #[test]
    fn neutral_diagonal_pins_the_proportion_at_one() {
        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.mcbr_grid = vec![0.05];
        spec.discount_grid = vec![0.05];
        for row in figure1(&spec).unwrap() {
            let value = row.bequest_proportion.unwrap();
            assert!(
                (value - 1.0).abs() < 1e-12,
                "mcbr = beta should give proportion 1, got {value} at {}",
                row.age
            );
        }
    }

    #[test]
    fn insuree_cells_stay_above_one_and_fall_toward_it() {
        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.mcbr_grid = vec![0.01];
        spec.discount_grid = vec![0.05];
        let rows = figure1(&spec).unwrap();
        let values: Vec<f64> = rows.iter().map(|r| r.bequest_proportion.unwrap()).collect();
        for pair in values.windows(2) {
            assert!(pair[1] < pair[0], "proportion should fall with age");
        }
        assert!(values.iter().all(|&v| v > 1.0));
    }

    #[test]
    fn unit_mcbr_small_discount_gives_a_small_rising_proportion() {
        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.mcbr_grid = vec![1.0];
        spec.discount_grid = vec![0.02];
        let rows = figure1(&spec).unwrap();
        let values: Vec<f64> = rows.iter().map(|r| r.bequest_proportion.unwrap()).collect();
        assert!(values[0] < 0.1, "entry proportion should be small");
        for pair in values.windows(2) {
            assert!(pair[1] > pair[0], "proportion should rise with age");
        }
    }

    #[test]
    fn surface_monotonicity_follows_the_sign_of_mcbr_minus_beta() {
        let spec = FigureSpec::defaults(1).unwrap();
        let rows = figure1(&spec).unwrap();
        let ages = spec.ages.ages().len();
        for chunk in rows.chunks(ages) {
            let mcbr = chunk[0].mcbr;
            let beta = chunk[0].discount;
            let direction = (mcbr - beta).signum();
            for pair in chunk.windows(2) {
                let a = pair[0].bequest_proportion.unwrap();
                let b = pair[1].bequest_proportion.unwrap();
                if direction > 0.0 {
                    assert!(b >= a - 1e-15, "expected rise at mcbr {mcbr}, beta {beta}");
                } else if direction < 0.0 {
                    assert!(b <= a + 1e-15, "expected fall at mcbr {mcbr}, beta {beta}");
                } else {
                    assert!((b - a).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn surface_cells_match_direct_annuity_arithmetic() {
        let spec = FigureSpec::defaults(1).unwrap();
        let rows = figure1(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..100 {
            let row = &rows[rng.gen_range(0..rows.len())];
            let annuity =
                annuity_factor(&spec.mortality, row.age, row.discount, &spec.quadrature).unwrap();
            let k = 1.0 / row.mcbr;
            let expected = k / (k + (1.0 - row.discount * k) * annuity);
            assert_eq!(row.bequest_proportion.unwrap(), expected);
        }
    }

    #[test]
    fn nonpositive_mcbr_cells_are_nulled_with_a_reason() {
        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.mcbr_grid = vec![-0.5, 0.5];
        spec.discount_grid = vec![0.02];
        spec.ages = AgeGrid::new(65.0, 66.0, 1.0).unwrap();
        let rows = figure1(&spec).unwrap();
        let (null, filled): (Vec<_>, Vec<_>) =
            rows.iter().partition(|r| r.bequest_proportion.is_none());
        assert_eq!(null.len(), 2);
        assert_eq!(filled.len(), 2);
        assert!(null.iter().all(|r| r.note.contains("positive")));
        assert!(filled.iter().all(|r| r.note.is_empty()));
    }

    #[test]
    fn deep_negative_discount_truncation_is_reported_per_cell() {
        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.mcbr_grid = vec![0.5];
        spec.discount_grid = vec![-0.9];
        spec.ages = AgeGrid::new(65.0, 65.0, 1.0).unwrap();
        let rows = figure1(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].bequest_proportion.is_none());
        assert!(rows[0].note.contains("tail"), "note: {}", rows[0].note);
    }

    #[test]
    fn profile_rows_match_direct_operation_calls() {
        let mut spec = FigureSpec::defaults(2).unwrap();
        spec.ages = AgeGrid::new(65.0, 105.0, 5.0).unwrap();
        let rows = figures2to5(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let row = &rows[rng.gen_range(0..rows.len())];
            let config = spec.profile_config(row.gamma, row.bequest_weight);
            let prefs = config.preferences().unwrap();
            let direct = strategy_at(
                &spec.mortality,
                row.age,
                &spec.market,
                &prefs,
                &spec.quadrature,
            )
            .unwrap();
            assert_eq!(row.bequest_proportion.unwrap(), direct.bequest_fraction);
            assert_eq!(
                row.consumption_pv.unwrap(),
                expected_consumption_pv(&config, row.age).unwrap()
            );
            assert_eq!(
                row.bequest_pv.unwrap(),
                expected_bequest_pv(&config, row.age).unwrap()
            );
            assert_eq!(
                row.income_pv.unwrap(),
                expected_income_pv(&config, row.age).unwrap()
            );
        }
    }

    #[test]
    fn profile_examples_hold_on_the_default_grid() {
        let spec = FigureSpec::defaults(3).unwrap();
        let rows = figures2to5(&spec).unwrap();

        for &b in &spec.bequest_grid {
            let column: Vec<&ProfileRow> = rows
                .iter()
                .filter(|r| r.gamma == -10.0 && r.bequest_weight == b)
                .collect();
            assert!(!column.is_empty());
            for pair in column.windows(2) {
                let first = pair[0].consumption_pv.unwrap();
                let second = pair[1].consumption_pv.unwrap();
                assert!(
                    second < first,
                    "high risk aversion should spend down: b {b}, age {}",
                    pair[1].age
                );
            }
        }

        let insuree: Vec<&ProfileRow> = rows
            .iter()
            .filter(|r| r.gamma == 0.25 && r.bequest_weight == 60.0)
            .collect();
        assert!(!insuree.is_empty());
        for row in insuree {
            assert!(
                row.income_pv.unwrap() < 0.0,
                "strong bequest motive should pay premiums at age {}",
                row.age
            );
        }

        for row in rows.iter().filter(|r| r.bequest_weight == 0.0) {
            assert_eq!(row.bequest_proportion.unwrap(), 0.0);
            assert_eq!(row.bequest_pv.unwrap(), 0.0);
        }
    }

    #[test]
    fn density_figure_reproduces_the_reference_statistics() {
        let spec = FigureSpec::defaults(6).unwrap();
        let rows = figure6(&spec).unwrap();
        let stat = |gamma: f64, series: &str| -> f64 {
            rows.iter()
                .find(|r| r.gamma == gamma && r.series == series)
                .unwrap()
                .value
        };
        let close = |actual: f64, expected: f64| (actual - expected).abs() / expected < 1e-8;
        assert!(close(stat(0.8, "mean"), 88.6193124275));
        assert!(close(stat(0.8, "median"), 0.019194141189));
        assert!(close(stat(0.8, "p95"), 16.5068520696));
        assert!(close(stat(-0.08225, "mean"), 0.168753307649));
        assert!(close(stat(-0.08225, "median"), 0.126505774348));
        assert!(close(stat(-0.08225, "mode"), 0.0710929376135));

        let density: Vec<&DensityRow> = rows
            .iter()
            .filter(|r| r.gamma == -0.08225 && r.series == "density")
            .collect();
        assert_eq!(density.len(), spec.density_points);
        assert!(density.iter().all(|r| r.value >= 0.0));
        // Trapezoid mass over the 0.1%..99.9% window should be close to 1.
        let mut mass = 0.0;
        for pair in density.windows(2) {
            let dx = pair[1].x.unwrap() - pair[0].x.unwrap();
            mass += 0.5 * (pair[0].value + pair[1].value) * dx;
        }
        assert!((0.95..1.05).contains(&mass), "density mass {mass}");
    }

    #[test]
    fn grid_validation_enforces_the_documented_ranges() {
        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.mcbr_grid.clear();
        assert!(spec.validate().is_err());

        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.discount_grid.push(-1.2);
        assert!(spec.validate().is_err());

        let mut spec = FigureSpec::defaults(2).unwrap();
        spec.gamma_grid = vec![1.2];
        assert!(spec.validate().is_err());

        let mut spec = FigureSpec::defaults(2).unwrap();
        spec.gamma_grid = vec![-10.5];
        assert!(spec.validate().is_err());

        let mut spec = FigureSpec::defaults(2).unwrap();
        spec.bequest_grid = vec![70.0];
        assert!(spec.validate().is_err());

        let spec = FigureSpec::defaults(2).unwrap();
        assert!(spec.gamma_grid.contains(&-10.0));
        spec.validate().unwrap();
    }

    #[test]
    fn csv_output_carries_metadata_and_headers() {
        let mut spec = FigureSpec::defaults(1).unwrap();
        spec.ages = AgeGrid::new(65.0, 67.0, 1.0).unwrap();
        spec.mcbr_grid = vec![0.1];
        spec.discount_grid = vec![0.02];
        let mut buffer = Vec::new();
        write_figure_csv(&spec, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# figure,1");
        assert!(text.contains("age,mcbr,beta,bequest_prop,note"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);

        let mut spec = FigureSpec::defaults(4).unwrap();
        spec.ages = AgeGrid::new(65.0, 66.0, 1.0).unwrap();
        spec.bequest_grid = vec![3.0];
        spec.gamma_grid = vec![0.25];
        let mut buffer = Vec::new();
        write_figure_csv(&spec, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.contains("# market,r=0.02,mu=0.05,sigma=0.2,rho=0.02"));
        assert!(text.contains("age,b,gamma,bequest_prop,consumption_pv,bequest_pv,income_pv,note"));

        let spec = FigureSpec::defaults(6).unwrap();
        let mut buffer = Vec::new();
        write_figure_csv(&spec, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.contains("gamma,b,age,series,x,value"));
        assert!(text.contains("median"));
    }
}
