//! Finite-pool tontine simulation with mortality-credit sharing and
//! actuarial-fairness diagnostics.
//!
//! Members split into two dynamic subsets by the sign of their tontine
//! fraction: S1 (`alpha >= 0`, annuity-style) and S2 (`alpha < 0`,
//! insurance-style).  Credits never cross between subsets.
//!
//! When a member of S1 dies, their tontine account is shared across all of
//! S1, deceased included, in proportion to `lambda alpha X`; the deceased's
//! own share goes to their estate.  The expected net flow of every S1 member
//! is exactly zero under this rule, for any pool composition.
//!
//! When a member of S2 dies, the pool settles the deceased's short tontine
//! position so that the estate holds exactly `(1 - alpha) X`, all in the
//! bequest account.  The surviving members of S2 fund the full settlement in
//! proportion to their `lambda alpha X` weights renormalized over the
//! survivors.  Renormalizing is what keeps the terminal wealth exact and
//! every event conservative; the price is that expected S2 net flows vanish
//! exactly only for homogeneous subsets, with a bias of order `1/|S2|`
//! otherwise.  A subset with a single member degenerates to a flagged
//! self-transfer.
//!
//! Deaths are sampled per step as independent Bernoulli events with
//! probability `lambda dt`.  Multiple deaths in one step are processed in
//! random order, each against the post-previous-death state; the order
//! effects are of second order in the step.

use std::io::Write as IoWrite;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annuity::QuadratureSettings;
use crate::error::{Error, Result};
use crate::mortality::{GompertzMakeham, HazardCurve};
use crate::scenario::PreferenceSpec;
use crate::strategy::{strategy_at, MarketParams};

/// Largest per-step death probability before a warning is raised.
pub const LARGE_STEP_PROBABILITY: f64 = 0.1;

/// Default step between death draws, in years.
pub const DEFAULT_POOL_DT: f64 = 1.0 / 252.0;

/// How a member's tontine fraction evolves with age.
#[derive(Debug, Clone)]
pub enum AlphaPolicy {
    /// Fixed override for controlled experiments.
    Fixed(f64),
    /// Read from the member's own optimal schedule at their current age.
    Strategy {
        market: MarketParams,
        prefs: PreferenceSpec,
        settings: QuadratureSettings,
    },
}

/// One pool member as declared in a spec file.  Exactly one of `alpha`
/// (fixed override) and `strategy` (schedule-driven) must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub id: String,
    pub age: f64,
    pub wealth: f64,
    pub mortality: GompertzMakeham,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyRef>,
}

/// Preference and market inputs for a schedule-driven tontine fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyRef {
    pub market: MarketParams,
    pub prefs: PreferenceSpec,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
}

/// Pool description as read from a JSON spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub members: Vec<MemberSpec>,
    /// Step between death draws, in years.
    #[serde(default = "default_pool_dt")]
    pub dt: f64,
    /// Number of steps per run.
    #[serde(default = "default_pool_steps")]
    pub steps: usize,
}

fn default_pool_dt() -> f64 {
    DEFAULT_POOL_DT
}

fn default_pool_steps() -> usize {
    1
}

impl PoolSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|err| Error::Config(format!("invalid pool spec: {err}")))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Which sharing subset an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subset {
    S1,
    S2,
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subset::S1 => write!(f, "S1"),
            Subset::S2 => write!(f, "S2"),
        }
    }
}

/// A live pool member with their cumulative credit ledger.
#[derive(Debug, Clone)]
pub struct Member {
    pub id: String,
    pub age: f64,
    pub wealth: f64,
    /// Current tontine fraction `alpha`, refreshed from the policy.
    pub tontine_fraction: f64,
    pub mortality: GompertzMakeham,
    pub alive: bool,
    /// Cumulative credits received, including rebates of own shares.
    pub received: f64,
    /// Cumulative credits donated.
    pub donated: f64,
    policy: AlphaPolicy,
}

impl Member {
    fn hazard(&self) -> f64 {
        self.mortality.hazard(self.age)
    }

    /// Sharing weight `lambda alpha X` at the member's current state.
    fn weight(&self) -> f64 {
        self.hazard() * self.tontine_fraction * self.wealth
    }
}

/// One leg of a sharing event, for the CSV event log.  Positive amounts are
/// credits received, negative amounts are payments.
#[derive(Debug, Clone, Serialize)]
pub struct TransferRecord {
    pub time: f64,
    pub deceased: String,
    pub subset: Subset,
    pub member: String,
    pub amount: f64,
    pub degenerate: bool,
}

/// Pool simulation state.
#[derive(Debug, Clone)]
pub struct PoolState {
    pub members: Vec<Member>,
    pub clock: f64,
    pub events: Vec<TransferRecord>,
    pub deaths: usize,
    /// Set when any step saw a death probability at or above
    /// [`LARGE_STEP_PROBABILITY`].
    pub large_step_warning: bool,
    dt: f64,
}

/// Resolved transfers for a single death, before application.
#[derive(Debug, Clone)]
pub struct CreditShares {
    pub subset: Subset,
    /// Credit volume: the deceased's tontine account (S1) or the size of
    /// their short position (S2).
    pub pot: f64,
    /// `(member index, amount)` credited.
    pub receipts: Vec<(usize, f64)>,
    /// `(member index, amount)` debited.
    pub payments: Vec<(usize, f64)>,
    /// True when the subset had a single member and the rule collapses to a
    /// self-transfer.
    pub degenerate: bool,
}

impl PoolState {
    /// Builds the initial state from a spec, resolving every member's
    /// tontine fraction at their starting age.
    pub fn new(spec: &PoolSpec) -> Result<Self> {
        if spec.members.is_empty() {
            return Err(Error::Config("pool spec lists no members".into()));
        }
        if !(spec.dt.is_finite() && spec.dt > 0.0) {
            return Err(Error::Config(format!(
                "pool dt must be positive and finite, got {}",
                spec.dt
            )));
        }
        let mut members = Vec::with_capacity(spec.members.len());
        for entry in &spec.members {
            if !(entry.wealth.is_finite() && entry.wealth > 0.0) {
                return Err(Error::Config(format!(
                    "member {} must start with positive wealth, got {}",
                    entry.id, entry.wealth
                )));
            }
            entry.mortality.validate()?;
            let policy = match (&entry.alpha, &entry.strategy) {
                (Some(alpha), None) => {
                    if !(alpha.is_finite() && *alpha <= 1.0) {
                        return Err(Error::Config(format!(
                            "member {} has tontine fraction {alpha}, which must be finite and at most 1",
                            entry.id
                        )));
                    }
                    AlphaPolicy::Fixed(*alpha)
                }
                (None, Some(strategy)) => AlphaPolicy::Strategy {
                    market: strategy.market,
                    prefs: strategy.prefs.clone(),
                    settings: strategy.quadrature,
                },
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "member {} sets both alpha and strategy; choose one",
                        entry.id
                    )));
                }
                (None, None) => {
                    return Err(Error::Config(format!(
                        "member {} needs either a fixed alpha or a strategy",
                        entry.id
                    )));
                }
            };
            if members.iter().any(|m: &Member| m.id == entry.id) {
                return Err(Error::Config(format!("duplicate member id {}", entry.id)));
            }
            members.push(Member {
                id: entry.id.clone(),
                age: entry.age,
                wealth: entry.wealth,
                tontine_fraction: 0.0,
                mortality: entry.mortality,
                alive: true,
                received: 0.0,
                donated: 0.0,
                policy,
            });
        }
        let mut state = Self {
            members,
            clock: 0.0,
            events: Vec::new(),
            deaths: 0,
            large_step_warning: false,
            dt: spec.dt,
        };
        state.refresh_fractions()?;
        Ok(state)
    }

    /// Re-reads every living member's tontine fraction from their policy at
    /// their current age; this is what re-partitions S1 and S2 over time.
    fn refresh_fractions(&mut self) -> Result<()> {
        for member in self.members.iter_mut().filter(|m| m.alive) {
            member.tontine_fraction = match &member.policy {
                AlphaPolicy::Fixed(alpha) => *alpha,
                AlphaPolicy::Strategy {
                    market,
                    prefs,
                    settings,
                } => {
                    let prefs = prefs.resolve()?;
                    strategy_at(&member.mortality, member.age, market, &prefs, settings)?
                        .tontine_fraction
                }
            };
        }
        Ok(())
    }

    /// Living members of the given subset, by index.
    pub fn subset(&self, subset: Subset) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| {
                m.alive
                    && match subset {
                        Subset::S1 => m.tontine_fraction >= 0.0,
                        Subset::S2 => m.tontine_fraction < 0.0,
                    }
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn subset_of(&self, index: usize) -> Subset {
        if self.members[index].tontine_fraction >= 0.0 {
            Subset::S1
        } else {
            Subset::S2
        }
    }

    fn apply_shares(&mut self, deceased: usize, shares: &CreditShares) {
        for &(j, amount) in &shares.payments {
            self.members[j].wealth -= amount;
            self.members[j].donated += amount;
        }
        for &(j, amount) in &shares.receipts {
            self.members[j].wealth += amount;
            self.members[j].received += amount;
        }
        let deceased_id = self.members[deceased].id.clone();
        for &(j, amount) in &shares.payments {
            self.events.push(TransferRecord {
                time: self.clock,
                deceased: deceased_id.clone(),
                subset: shares.subset,
                member: self.members[j].id.clone(),
                amount: -amount,
                degenerate: shares.degenerate,
            });
        }
        for &(j, amount) in &shares.receipts {
            self.events.push(TransferRecord {
                time: self.clock,
                deceased: deceased_id.clone(),
                subset: shares.subset,
                member: self.members[j].id.clone(),
                amount,
                degenerate: shares.degenerate,
            });
        }
        self.members[deceased].alive = false;
        self.deaths += 1;
    }

    /// Advances the pool by one step: draws deaths, settles them in random
    /// order, ages the survivors, and refreshes their tontine fractions.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Result<Vec<String>> {
        let mut dying = Vec::new();
        for (i, member) in self.members.iter().enumerate() {
            if !member.alive {
                continue;
            }
            let probability = (member.hazard() * self.dt).min(1.0);
            if probability >= LARGE_STEP_PROBABILITY {
                self.large_step_warning = true;
            }
            if rng.gen::<f64>() < probability {
                dying.push(i);
            }
        }
        dying.shuffle(rng);

        let mut ids = Vec::with_capacity(dying.len());
        for index in dying {
            let shares = credit_shares_on_death(self, index)?;
            self.apply_shares(index, &shares);
            ids.push(self.members[index].id.clone());
        }

        self.clock += self.dt;
        for member in self.members.iter_mut().filter(|m| m.alive) {
            member.age += self.dt;
        }
        self.refresh_fractions()?;
        Ok(ids)
    }
}

/// Transfers triggered by the death of one member, against the current
/// state.  Nothing is applied; the caller decides.
pub fn credit_shares_on_death(state: &PoolState, deceased: usize) -> Result<CreditShares> {
    let member = state
        .members
        .get(deceased)
        .ok_or_else(|| Error::Config(format!("no member at index {deceased}")))?;
    if !member.alive {
        return Err(Error::Config(format!(
            "member {} is already dead",
            member.id
        )));
    }
    let subset = state.subset_of(deceased);
    let indices = state.subset(subset);
    let degenerate = indices.len() == 1;

    match subset {
        Subset::S1 => {
            let pot = member.tontine_fraction * member.wealth;
            if pot == 0.0 {
                return Ok(CreditShares {
                    subset,
                    pot,
                    receipts: Vec::new(),
                    payments: Vec::new(),
                    degenerate,
                });
            }
            let total: f64 = indices.iter().map(|&k| state.members[k].weight()).sum();
            if total <= 0.0 {
                return Err(Error::Numerical(format!(
                    "sharing weights sum to {total} in S1 on death of {}",
                    member.id
                )));
            }
            let receipts = indices
                .iter()
                .map(|&k| (k, pot * state.members[k].weight() / total))
                .filter(|&(_, amount)| amount != 0.0)
                .collect();
            Ok(CreditShares {
                subset,
                pot,
                receipts,
                payments: vec![(deceased, pot)],
                degenerate,
            })
        }
        Subset::S2 => {
            let pot = -member.tontine_fraction * member.wealth;
            if degenerate {
                return Ok(CreditShares {
                    subset,
                    pot,
                    receipts: vec![(deceased, pot)],
                    payments: vec![(deceased, pot)],
                    degenerate,
                });
            }
            let survivors: Vec<usize> =
                indices.iter().copied().filter(|&k| k != deceased).collect();
            let total: f64 = survivors.iter().map(|&k| state.members[k].weight()).sum();
            if total >= 0.0 {
                return Err(Error::Numerical(format!(
                    "sharing weights sum to {total} in S2 on death of {}",
                    member.id
                )));
            }
            let mut payments = Vec::with_capacity(survivors.len());
            for &j in &survivors {
                let share = state.members[j].weight() / total;
                let amount = pot * share;
                let bound = state.members[j].wealth / pot;
                if share >= bound {
                    return Err(Error::PoolInfeasible {
                        deceased: member.id.clone(),
                        payer: state.members[j].id.clone(),
                        share,
                        bound,
                    });
                }
                if amount != 0.0 {
                    payments.push((j, amount));
                }
            }
            Ok(CreditShares {
                subset,
                pot,
                receipts: vec![(deceased, pot)],
                payments,
                degenerate,
            })
        }
    }
}

/// Footnote-style feasibility: no single death may ask any survivor for
/// their whole wealth or more.
#[derive(Debug, Clone, Serialize)]
pub struct Footnote1Report {
    pub feasible: bool,
    /// True when S2 has a single member and the check is vacuous.
    pub degenerate: bool,
    /// The tightest (deceased, payer) pair.
    pub worst: Option<Footnote1Margin>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Footnote1Margin {
    pub deceased: String,
    pub payer: String,
    /// Payer's weight share of the deceased's settlement.
    pub share: f64,
    /// Feasibility bound `X_j / (-alpha_i X_i)`.
    pub bound: f64,
    /// `bound - share`; feasible while positive.
    pub margin: f64,
}

/// Checks `p_j < X_j / (-alpha_i X_i)` over every (deceased, payer) pair in
/// S2, with `p_j` the payment share the payer would owe.  Larger subsets
/// spread each settlement thinner, so the margin grows with subset size.
pub fn footnote1_feasibility(state: &PoolState) -> Result<Footnote1Report> {
    let indices = state.subset(Subset::S2);
    if indices.is_empty() {
        return Err(Error::Config(
            "footnote-1 feasibility needs at least one member with a negative tontine fraction"
                .into(),
        ));
    }
    if indices.len() == 1 {
        return Ok(Footnote1Report {
            feasible: true,
            degenerate: true,
            worst: None,
        });
    }
    let mut worst: Option<Footnote1Margin> = None;
    for &i in &indices {
        let pot = -state.members[i].tontine_fraction * state.members[i].wealth;
        let total: f64 = indices
            .iter()
            .filter(|&&k| k != i)
            .map(|&k| state.members[k].weight())
            .sum();
        if total >= 0.0 {
            return Err(Error::Numerical(format!(
                "sharing weights sum to {total} in S2 for hypothetical death of {}",
                state.members[i].id
            )));
        }
        for &j in &indices {
            if j == i {
                continue;
            }
            let share = state.members[j].weight() / total;
            let bound = state.members[j].wealth / pot;
            let margin = bound - share;
            if worst.as_ref().is_none_or(|w| margin < w.margin) {
                worst = Some(Footnote1Margin {
                    deceased: state.members[i].id.clone(),
                    payer: state.members[j].id.clone(),
                    share,
                    bound,
                    margin,
                });
            }
        }
    }
    let feasible = worst.as_ref().is_none_or(|w| w.margin > 0.0);
    Ok(Footnote1Report {
        feasible,
        degenerate: false,
        worst,
    })
}

/// Net and received credit-flow rates per member from one replication.
#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    /// `(received - donated) / elapsed` per member, in spec order.
    pub net_rates: Vec<f64>,
    /// `received / elapsed` per member, in spec order.
    pub received_rates: Vec<f64>,
    pub deaths: usize,
}

/// Runs independent replications of the pool, each over `spec.steps` steps,
/// on its own RNG substream.  Replications run in parallel and collect in
/// index order, so results are reproducible for a given seed.
pub fn run_replications(
    spec: &PoolSpec,
    replications: usize,
    seed: u64,
) -> Result<Vec<ReplicationOutcome>> {
    if replications < 2 {
        return Err(Error::Config(format!(
            "fairness needs at least 2 replications, got {replications}"
        )));
    }
    let template = PoolState::new(spec)?;
    let elapsed = spec.dt * spec.steps as f64;
    (0..replications)
        .into_par_iter()
        .map(|replication| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(replication as u64 + 1);
            let mut state = template.clone();
            for _ in 0..spec.steps {
                state.step(&mut rng)?;
            }
            let net_rates = state
                .members
                .iter()
                .map(|m| (m.received - m.donated) / elapsed)
                .collect();
            let received_rates = state.members.iter().map(|m| m.received / elapsed).collect();
            Ok(ReplicationOutcome {
                net_rates,
                received_rates,
                deaths: state.deaths,
            })
        })
        .collect()
}

/// Per-member fairness verdict across replications.
#[derive(Debug, Clone, Serialize)]
pub struct MemberFairness {
    pub id: String,
    /// Deterministic credit rate `lambda alpha X` at the initial state.
    pub expected_credit_rate: f64,
    pub mean_net_rate: f64,
    pub se_net_rate: f64,
    pub mean_received_rate: f64,
    pub se_received_rate: f64,
    /// True when the mean net flow sits within three standard errors of
    /// zero.
    pub fair_within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FairnessReport {
    pub replications: usize,
    pub steps: usize,
    pub dt: f64,
    pub total_deaths: usize,
    pub members: Vec<MemberFairness>,
    pub all_fair: bool,
}

/// Summarizes replication outcomes into per-member net-flow statistics.
pub fn fairness_report(spec: &PoolSpec, outcomes: &[ReplicationOutcome]) -> Result<FairnessReport> {
    if outcomes.len() < 2 {
        return Err(Error::Config(format!(
            "fairness needs at least 2 replications, got {}",
            outcomes.len()
        )));
    }
    let template = PoolState::new(spec)?;
    let n = outcomes.len() as f64;
    let mut members = Vec::with_capacity(template.members.len());
    for (index, member) in template.members.iter().enumerate() {
        let nets: Vec<f64> = outcomes.iter().map(|o| o.net_rates[index]).collect();
        let receiveds: Vec<f64> = outcomes.iter().map(|o| o.received_rates[index]).collect();
        let mean_net_rate = nets.iter().sum::<f64>() / n;
        let mean_received_rate = receiveds.iter().sum::<f64>() / n;
        let se = |values: &[f64], mean: f64| {
            let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (variance / n).sqrt()
        };
        let se_net_rate = se(&nets, mean_net_rate);
        let se_received_rate = se(&receiveds, mean_received_rate);
        members.push(MemberFairness {
            id: member.id.clone(),
            expected_credit_rate: member.weight(),
            mean_net_rate,
            se_net_rate,
            mean_received_rate,
            se_received_rate,
            fair_within_3se: mean_net_rate.abs() <= 3.0 * se_net_rate,
        });
    }
    let all_fair = members.iter().all(|m| m.fair_within_3se);
    Ok(FairnessReport {
        replications: outcomes.len(),
        steps: spec.steps,
        dt: spec.dt,
        total_deaths: outcomes.iter().map(|o| o.deaths).sum(),
        members,
        all_fair,
    })
}

/// Writes the event log as CSV
/// (`time,deceased,subset,member,amount,degenerate`).
pub fn write_event_log<W: IoWrite>(events: &[TransferRecord], mut out: W) -> Result<()> {
    writeln!(out, "time,deceased,subset,member,amount,degenerate")?;
    for event in events {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            event.time, event.deceased, event.subset, event.member, event.amount, event.degenerate
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_member(id: &str, age: f64, wealth: f64, alpha: f64) -> MemberSpec {
        MemberSpec {
            id: id.into(),
            age,
            wealth,
            mortality: GompertzMakeham::uk_male(),
            alpha: Some(alpha),
            strategy: None,
        }
    }

    fn spec_of(members: Vec<MemberSpec>) -> PoolSpec {
        PoolSpec {
            members,
            dt: DEFAULT_POOL_DT,
            steps: 1,
        }
    }

    #[test]
    fn two_identical_members_split_the_pot_evenly() {
        let spec = spec_of(vec![
            fixed_member("a", 75.0, 100.0, 1.0),
            fixed_member("b", 75.0, 100.0, 1.0),
        ]);
        let state = PoolState::new(&spec).unwrap();
        let shares = credit_shares_on_death(&state, 0).unwrap();
        assert_eq!(shares.subset, Subset::S1);
        assert_eq!(shares.pot, 100.0);
        assert!(!shares.degenerate);
        assert_eq!(shares.receipts.len(), 2);
        for &(_, amount) in &shares.receipts {
            assert!((amount - 50.0).abs() < 1e-12);
        }

        let mut state = state;
        state.apply_shares(0, &shares);
        // Estate keeps the bequest account (zero here) plus its own share.
        assert!((state.members[0].wealth - 50.0).abs() < 1e-12);
        assert!((state.members[1].wealth - 150.0).abs() < 1e-12);
        assert!(!state.members[0].alive);
    }

    #[test]
    fn s1_credits_sum_to_the_pot_exactly() {
        let spec = spec_of(vec![
            fixed_member("a", 70.0, 80.0, 0.9),
            fixed_member("b", 75.0, 120.0, 0.4),
            fixed_member("c", 82.0, 50.0, 0.0),
            fixed_member("d", 68.0, 200.0, 1.0),
            fixed_member("e", 91.0, 30.0, 0.7),
        ]);
        let state = PoolState::new(&spec).unwrap();
        for deceased in 0..state.members.len() {
            let shares = credit_shares_on_death(&state, deceased).unwrap();
            let received: f64 = shares.receipts.iter().map(|&(_, a)| a).sum();
            let donated: f64 = shares.payments.iter().map(|&(_, a)| a).sum();
            assert!(
                (received - shares.pot).abs() <= 1e-10 * shares.pot.max(1.0),
                "death of {deceased}: received {received} vs pot {}",
                shares.pot
            );
            assert!((donated - shares.pot).abs() <= 1e-10 * shares.pot.max(1.0));
        }
    }

    #[test]
    fn zero_alpha_member_neither_gives_nor_receives() {
        let spec = spec_of(vec![
            fixed_member("a", 70.0, 80.0, 0.9),
            fixed_member("zero", 75.0, 120.0, 0.0),
        ]);
        let state = PoolState::new(&spec).unwrap();
        let shares = credit_shares_on_death(&state, 0).unwrap();
        assert!(shares.receipts.iter().all(|&(j, _)| j != 1));

        let shares = credit_shares_on_death(&state, 1).unwrap();
        assert_eq!(shares.pot, 0.0);
        assert!(shares.receipts.is_empty());
        assert!(shares.payments.is_empty());
    }

    #[test]
    fn singleton_s1_member_gets_their_own_credit_back() {
        let spec = spec_of(vec![fixed_member("only", 80.0, 100.0, 0.8)]);
        let mut state = PoolState::new(&spec).unwrap();
        let shares = credit_shares_on_death(&state, 0).unwrap();
        assert!(shares.degenerate);
        assert_eq!(shares.receipts, vec![(0, 80.0)]);
        state.apply_shares(0, &shares);
        assert!((state.members[0].wealth - 100.0).abs() < 1e-12);
    }

    #[test]
    fn s2_death_settles_to_the_exact_terminal_wealth() {
        let spec = spec_of(vec![
            fixed_member("a", 75.0, 100.0, -0.5),
            fixed_member("b", 78.0, 80.0, -1.0),
            fixed_member("c", 81.0, 120.0, -2.0),
        ]);
        let mut state = PoolState::new(&spec).unwrap();
        let shares = credit_shares_on_death(&state, 1).unwrap();
        assert_eq!(shares.subset, Subset::S2);
        assert_eq!(shares.pot, 80.0);
        let paid: f64 = shares.payments.iter().map(|&(_, a)| a).sum();
        assert!((paid - shares.pot).abs() < 1e-10 * shares.pot);
        assert!(shares.payments.iter().all(|&(j, _)| j != 1));

        state.apply_shares(1, &shares);
        let terminal = state.members[1].wealth;
        assert!(
            (terminal - (1.0 - (-1.0)) * 80.0).abs() < 1e-10,
            "terminal wealth {terminal} should be exactly (1 - alpha) X = 160"
        );
    }

    #[test]
    fn singleton_s2_death_is_a_flagged_self_transfer() {
        let spec = spec_of(vec![
            fixed_member("only", 75.0, 100.0, -0.5),
            fixed_member("annuitant", 75.0, 100.0, 1.0),
        ]);
        let mut state = PoolState::new(&spec).unwrap();
        let shares = credit_shares_on_death(&state, 0).unwrap();
        assert!(shares.degenerate);
        assert_eq!(shares.receipts, vec![(0, 50.0)]);
        assert_eq!(shares.payments, vec![(0, 50.0)]);
        state.apply_shares(0, &shares);
        assert!((state.members[0].wealth - 100.0).abs() < 1e-12);
    }

    #[test]
    fn credits_never_cross_subsets() {
        let spec = spec_of(vec![
            fixed_member("s1a", 70.0, 80.0, 0.9),
            fixed_member("s1b", 75.0, 120.0, 0.5),
            fixed_member("s2a", 78.0, 100.0, -0.3),
            fixed_member("s2b", 81.0, 90.0, -0.4),
        ]);
        let state = PoolState::new(&spec).unwrap();
        for deceased in 0..2 {
            let shares = credit_shares_on_death(&state, deceased).unwrap();
            for &(j, _) in shares.receipts.iter().chain(&shares.payments) {
                assert!(j < 2, "S1 event touched member index {j}");
            }
        }
        for deceased in 2..4 {
            let shares = credit_shares_on_death(&state, deceased).unwrap();
            for &(j, _) in shares.receipts.iter().chain(&shares.payments) {
                assert!(j >= 2, "S2 event touched member index {j}");
            }
        }
    }

    #[test]
    fn infeasible_s2_settlement_names_the_pair() {
        let spec = spec_of(vec![
            fixed_member("whale", 75.0, 1.0, -10.0),
            fixed_member("minnow", 75.0, 0.5, -0.1),
        ]);
        let state = PoolState::new(&spec).unwrap();
        let err = credit_shares_on_death(&state, 0).unwrap_err();
        match err {
            Error::PoolInfeasible {
                deceased, payer, ..
            } => {
                assert_eq!(deceased, "whale");
                assert_eq!(payer, "minnow");
            }
            other => panic!("expected PoolInfeasible, got {other:?}"),
        }

        let report = footnote1_feasibility(&state).unwrap();
        assert!(!report.feasible);
        let worst = report.worst.unwrap();
        assert_eq!(worst.deceased, "whale");
        assert_eq!(worst.payer, "minnow");
        assert!(worst.margin < 0.0);
    }

    #[test]
    fn footnote1_margin_grows_with_subset_size() {
        let homogeneous = |n: usize| {
            let members = (0..n)
                .map(|i| fixed_member(&format!("m{i}"), 78.0, 100.0, -1.0))
                .collect();
            let state = PoolState::new(&spec_of(members)).unwrap();
            footnote1_feasibility(&state).unwrap()
        };
        let small = homogeneous(5);
        let large = homogeneous(50);
        assert!(small.feasible);
        assert!(large.feasible);
        let small_margin = small.worst.unwrap().margin;
        let large_margin = large.worst.unwrap().margin;
        assert!((small_margin - (1.0 - 0.25)).abs() < 1e-12);
        assert!((large_margin - (1.0 - 1.0 / 49.0)).abs() < 1e-12);
        assert!(large_margin > small_margin);
    }

    #[test]
    fn footnote1_requires_a_nonempty_s2() {
        let spec = spec_of(vec![fixed_member("a", 70.0, 80.0, 0.9)]);
        let state = PoolState::new(&spec).unwrap();
        assert!(matches!(
            footnote1_feasibility(&state),
            Err(Error::Config(_))
        ));

        let spec = spec_of(vec![
            fixed_member("a", 70.0, 80.0, 0.9),
            fixed_member("b", 70.0, 80.0, -0.5),
        ]);
        let state = PoolState::new(&spec).unwrap();
        let report = footnote1_feasibility(&state).unwrap();
        assert!(report.degenerate);
        assert!(report.feasible);
    }

    #[test]
    fn zero_hazard_pool_never_dies() {
        let deathless = GompertzMakeham {
            modal_age: 1.0e6,
            dispersion: 10.94,
            makeham: 0.0,
        };
        let members = (0..5)
            .map(|i| MemberSpec {
                id: format!("m{i}"),
                age: 70.0,
                wealth: 100.0,
                mortality: deathless,
                alpha: Some(1.0),
                strategy: None,
            })
            .collect();
        let mut spec = spec_of(members);
        spec.steps = 300;
        let mut state = PoolState::new(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..spec.steps {
            state.step(&mut rng).unwrap();
        }
        assert_eq!(state.deaths, 0);
        assert!(state.events.is_empty());
        assert!(state.members.iter().all(|m| m.alive));
    }

    #[test]
    fn seeded_runs_reproduce_the_event_log() {
        let members = (0..20)
            .map(|i| fixed_member(&format!("m{i}"), 92.0, 100.0, 1.0))
            .collect::<Vec<_>>();
        let mut spec = spec_of(members);
        spec.steps = 200;
        spec.dt = 1.0 / 52.0;
        let run = || {
            let mut state = PoolState::new(&spec).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            for _ in 0..spec.steps {
                state.step(&mut rng).unwrap();
            }
            let mut log = Vec::new();
            write_event_log(&state.events, &mut log).unwrap();
            (state.deaths, String::from_utf8(log).unwrap())
        };
        let (deaths_a, log_a) = run();
        let (deaths_b, log_b) = run();
        assert!(deaths_a > 0, "seeded run should see deaths at age 92");
        assert_eq!(deaths_a, deaths_b);
        assert_eq!(log_a, log_b);
    }

    #[test]
    fn large_step_probability_is_flagged() {
        let spec = PoolSpec {
            members: vec![fixed_member("old", 110.0, 100.0, 1.0)],
            dt: 0.25,
            steps: 1,
        };
        let mut state = PoolState::new(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        state.step(&mut rng).unwrap();
        assert!(state.large_step_warning);
    }

    #[test]
    fn conservation_holds_over_a_whole_run() {
        // Mild short positions keep settlements affordable even after the
        // insuree subset thins out to a single payer.
        let mut members = vec![
            fixed_member("s2a", 85.0, 100.0, -0.2),
            fixed_member("s2b", 88.0, 150.0, -0.15),
            fixed_member("s2c", 90.0, 120.0, -0.25),
        ];
        for i in 0..9 {
            members.push(fixed_member(&format!("s1{i}"), 88.0, 100.0, 0.9));
        }
        let mut spec = spec_of(members);
        spec.steps = 400;
        spec.dt = 1.0 / 52.0;
        let mut state = PoolState::new(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..spec.steps {
            state.step(&mut rng).unwrap();
        }
        assert!(state.deaths > 0);
        let received: f64 = state.members.iter().map(|m| m.received).sum();
        let donated: f64 = state.members.iter().map(|m| m.donated).sum();
        assert!(
            (received - donated).abs() <= 1e-10 * received.max(1.0),
            "ledger out of balance: received {received}, donated {donated}"
        );
        for member in &state.members {
            assert!(member.wealth > 0.0);
        }
        // Transfers stay inside their subsets in the log as well.
        for event in &state.events {
            let s2_ids = ["s2a", "s2b", "s2c"];
            let deceased_s2 = s2_ids.contains(&event.deceased.as_str());
            let member_s2 = s2_ids.contains(&event.member.as_str());
            assert_eq!(deceased_s2, member_s2, "cross-subset transfer logged");
        }
    }

    #[test]
    fn homogeneous_pool_is_actuarially_fair() {
        // The sample-SE bound only attains its nominal level once every
        // member sees plenty of death events, so use a monthly step at a
        // high-hazard age; the acceptance suite runs the full-size version.
        let members = (0..20)
            .map(|i| fixed_member(&format!("m{i}"), 95.0, 100.0, 1.0))
            .collect();
        let mut spec = spec_of(members);
        spec.dt = 1.0 / 12.0;
        let outcomes = run_replications(&spec, 2000, 17).unwrap();
        let report = fairness_report(&spec, &outcomes).unwrap();
        assert!(report.total_deaths > 0);
        assert!(
            report.all_fair,
            "unfair members: {:?}",
            report
                .members
                .iter()
                .filter(|m| !m.fair_within_3se)
                .map(|m| (&m.id, m.mean_net_rate, m.se_net_rate))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn asymmetric_two_member_pool_is_fair_in_expectation() {
        let spec = PoolSpec {
            members: vec![
                fixed_member("rich", 90.0, 100.0, 1.0),
                fixed_member("poor", 90.0, 10.0, 0.6),
            ],
            dt: 1.0 / 12.0,
            steps: 1,
        };
        let outcomes = run_replications(&spec, 6000, 3).unwrap();
        let report = fairness_report(&spec, &outcomes).unwrap();
        assert!(report.total_deaths > 0);
        assert!(report.all_fair);
    }

    #[test]
    fn homogeneous_s2_pool_is_fair_in_expectation() {
        let members = (0..10)
            .map(|i| fixed_member(&format!("m{i}"), 92.0, 100.0, -0.8))
            .collect();
        let mut spec = spec_of(members);
        spec.dt = 1.0 / 12.0;
        let outcomes = run_replications(&spec, 4000, 29).unwrap();
        let report = fairness_report(&spec, &outcomes).unwrap();
        assert!(report.total_deaths > 0);
        assert!(report.all_fair);
    }

    #[test]
    fn mean_received_rate_converges_to_the_deterministic_credit_rate() {
        for (n, replications) in [(10_usize, 12_000_usize), (100, 1_200), (1_000, 120)] {
            let members = (0..n)
                .map(|i| fixed_member(&format!("m{i}"), 95.0, 100.0, 1.0))
                .collect();
            let spec = spec_of(members);
            let state = PoolState::new(&spec).unwrap();
            let expected = state.members[0].weight();
            let outcomes = run_replications(&spec, replications, 31).unwrap();
            // Homogeneous pool: average the member rates within each
            // replication first (receipts are correlated through shared
            // events), then take mean and standard error across
            // replications; the error shrinks like 1/sqrt(n * replications).
            let pooled: Vec<f64> = outcomes
                .iter()
                .map(|o| o.received_rates.iter().sum::<f64>() / n as f64)
                .collect();
            let mean = pooled.iter().sum::<f64>() / replications as f64;
            let variance = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (replications as f64 - 1.0);
            let se = (variance / replications as f64).sqrt();
            assert!(
                (mean - expected).abs() <= 3.0 * se,
                "n = {n}: pooled mean {mean} vs expected {expected} (se {se})"
            );
        }
    }

    #[test]
    fn strategy_driven_alpha_tracks_the_schedule() {
        let strategy = StrategyRef {
            market: MarketParams {
                risk_free: 0.02,
                risky_drift: 0.05,
                volatility: 0.2,
                time_preference: 0.02,
            },
            prefs: PreferenceSpec::power(0.25, 3.0),
            quadrature: QuadratureSettings::default(),
        };
        let spec = PoolSpec {
            members: vec![MemberSpec {
                id: "planner".into(),
                age: 65.0,
                wealth: 100.0,
                mortality: GompertzMakeham::uk_male(),
                alpha: None,
                strategy: Some(strategy),
            }],
            dt: 1.0,
            steps: 1,
        };
        let mut state = PoolState::new(&spec).unwrap();
        let at_65 = state.members[0].tontine_fraction;
        assert!((at_65 - (1.0 - 0.232_446_235_171_946)).abs() < 1e-10);

        state.members[0].age = 75.0;
        state.refresh_fractions().unwrap();
        let at_75 = state.members[0].tontine_fraction;
        assert!((at_75 - (1.0 - 0.3196707433061684)).abs() < 1e-10);
        assert!(at_75 < at_65, "tontine fraction should fall with age");
    }

    #[test]
    fn pool_spec_json_round_trips_and_validates() {
        let text = r#"{
            "members": [
                {
                    "id": "a",
                    "age": 70.0,
                    "wealth": 100.0,
                    "mortality": {"m": 83.43, "q": 10.94, "v": -0.0052},
                    "alpha": 0.9
                }
            ],
            "dt": 0.004,
            "steps": 3
        }"#;
        let spec = PoolSpec::from_json(text).unwrap();
        assert_eq!(spec.members.len(), 1);
        assert_eq!(spec.steps, 3);
        let rendered = serde_json::to_string(&spec).unwrap();
        let back = PoolSpec::from_json(&rendered).unwrap();
        assert_eq!(back.members[0].id, "a");

        let empty = PoolSpec::from_json(r#"{"members": []}"#).unwrap();
        assert!(matches!(PoolState::new(&empty), Err(Error::Config(_))));

        let err = PoolSpec::from_json(r#"{"members": [], "step": 1}"#).unwrap_err();
        assert!(err.to_string().contains("step"), "unknown key not named");
    }

    #[test]
    fn member_spec_requires_exactly_one_alpha_source() {
        let mut both = fixed_member("x", 70.0, 100.0, 0.5);
        both.strategy = Some(StrategyRef {
            market: MarketParams {
                risk_free: 0.02,
                risky_drift: 0.05,
                volatility: 0.2,
                time_preference: 0.02,
            },
            prefs: PreferenceSpec::power(0.25, 3.0),
            quadrature: QuadratureSettings::default(),
        });
        let err = PoolState::new(&spec_of(vec![both])).unwrap_err();
        assert!(err.to_string().contains("both"));

        let mut neither = fixed_member("x", 70.0, 100.0, 0.5);
        neither.alpha = None;
        let err = PoolState::new(&spec_of(vec![neither])).unwrap_err();
        assert!(err.to_string().contains("either"));

        let overweight = fixed_member("x", 70.0, 100.0, 1.5);
        assert!(PoolState::new(&spec_of(vec![overweight])).is_err());

        let duplicated = vec![
            fixed_member("same", 70.0, 100.0, 0.5),
            fixed_member("same", 72.0, 90.0, 0.4),
        ];
        let err = PoolState::new(&spec_of(duplicated)).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn event_log_csv_has_the_expected_shape() {
        let spec = spec_of(vec![
            fixed_member("a", 75.0, 100.0, 1.0),
            fixed_member("b", 75.0, 100.0, 1.0),
        ]);
        let mut state = PoolState::new(&spec).unwrap();
        let shares = credit_shares_on_death(&state, 0).unwrap();
        state.apply_shares(0, &shares);
        let mut buffer = Vec::new();
        write_event_log(&state.events, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time,deceased,subset,member,amount,degenerate"
        );
        // One donation leg plus two receipt legs.
        assert_eq!(lines.count(), 3);
        assert!(text.contains("S1"));
    }
}
