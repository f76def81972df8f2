//! The interaction model's machinery: seeded classical sampling, emulated
//! quantum subroutines, empirical estimators, and the query ledger that
//! enforces per-phase generative budgets.
//!
//! The emulated subroutines are simulation-privileged: they read the exact
//! successor distribution, inject noise bounded by the subroutine's error
//! contract, and charge its theoretical query count to the ledger. Failure
//! probability `delta` never triggers injected catastrophic outputs; it only
//! enters the query charges.
//!
//! Charge formulas (constants configurable, defaults 1):
//!   mean estimation        ceil((c_mean / eps) * ln(1/delta))
//!   multivariate mean, dim m   ceil((c_multi / eps) * ln(m/delta))
//!   max finding over A     ceil(c_max * sqrt(A) * ln(1/delta))

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::env::{KernelRow, PlanEnv};
use crate::error::{Error, Result};
use crate::mdp::span;

/// Oracle kinds tracked by the ledger. `QMaxInner` counts queries made by
/// max-finding to its candidate unitary; the other three count uses of the
/// transition oracle itself and are the ones a generative budget constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OracleKind {
    ClassicalSample,
    QMean,
    QMeanMulti,
    QMaxInner,
}

impl OracleKind {
    pub fn counts_toward_budget(self) -> bool {
        !matches!(self, OracleKind::QMaxInner)
    }
}

/// How emulated subroutines fill their error allowance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    /// No injected error.
    Exact,
    /// Seeded uniform draw in the full allowed interval.
    Uniform,
    /// Full-magnitude error with a seeded sign, to stress one-sided shifts.
    SignedWorst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumEmulationConfig {
    pub noise_mode: NoiseMode,
    pub c_mean: f64,
    pub c_multi: f64,
    pub c_max: f64,
}

impl Default for QuantumEmulationConfig {
    fn default() -> Self {
        Self { noise_mode: NoiseMode::Uniform, c_mean: 1.0, c_multi: 1.0, c_max: 1.0 }
    }
}

impl QuantumEmulationConfig {
    pub fn exact() -> Self {
        Self { noise_mode: NoiseMode::Exact, ..Self::default() }
    }

    pub fn with_mode(mode: NoiseMode) -> Self {
        Self { noise_mode: mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_mean <= 0.0 || self.c_multi <= 0.0 || self.c_max <= 0.0 {
            return Err(Error::Invalid("query-charge constants must be positive".into()));
        }
        Ok(())
    }

    /// Noise within `[-bound, bound]` per the configured mode.
    pub(crate) fn noise(&self, bound: f64, rng: &mut impl Rng) -> f64 {
        if bound == 0.0 {
            return 0.0;
        }
        match self.noise_mode {
            NoiseMode::Exact => 0.0,
            NoiseMode::Uniform => (rng.gen::<f64>() * 2.0 - 1.0) * bound,
            NoiseMode::SignedWorst => {
                if rng.gen::<bool>() {
                    bound
                } else {
                    -bound
                }
            }
        }
    }
}

/// Seed plus stream id; identical pairs replay identically, distinct streams
/// are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub master_seed: u64,
    pub stream: u64,
}

impl SamplerConfig {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        Self { master_seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One serialized ledger row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub phase: u32,
    pub kind: OracleKind,
    pub count: u64,
    pub budget: Option<u64>,
    pub overflow: bool,
}

/// Per-phase, per-kind query accounting with optional budgets. Counts never
/// decrease; a phase's overflow flag is set the first time its budgeted
/// total exceeds the budget. In strict mode that is an error instead.
#[derive(Debug, Clone, Default)]
pub struct QueryLedger {
    counts: BTreeMap<(u32, OracleKind), u64>,
    budgets: BTreeMap<u32, u64>,
    overflowed: BTreeMap<u32, bool>,
    strict: bool,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn strict() -> Self {
        Self { strict: true, ..Self::default() }
    }

    /// Register a generative phase's budget (in transition-oracle queries).
    pub fn open_phase(&mut self, phase: u32, budget: u64) {
        self.budgets.insert(phase, budget);
        self.overflowed.entry(phase).or_insert(false);
    }

    pub fn charge(&mut self, kind: OracleKind, phase: u32, n: u64) -> Result<()> {
        *self.counts.entry((phase, kind)).or_insert(0) += n;
        if kind.counts_toward_budget() {
            if let Some(&budget) = self.budgets.get(&phase) {
                let total = self.phase_budgeted_total(phase);
                if total > budget {
                    self.overflowed.insert(phase, true);
                    if self.strict {
                        return Err(Error::BudgetOverflow { phase, charged: total, budget });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn count(&self, kind: OracleKind, phase: u32) -> u64 {
        self.counts.get(&(phase, kind)).copied().unwrap_or(0)
    }

    pub fn total_kind(&self, kind: OracleKind) -> u64 {
        self.counts.iter().filter(|((_, k), _)| *k == kind).map(|(_, n)| n).sum()
    }

    /// Transition-oracle queries charged to one phase.
    pub fn phase_budgeted_total(&self, phase: u32) -> u64 {
        self.counts
            .iter()
            .filter(|((p, k), _)| *p == phase && k.counts_toward_budget())
            .map(|(_, n)| n)
            .sum()
    }

    /// All transition-oracle queries across phases and kinds.
    pub fn total_budgeted(&self) -> u64 {
        self.counts
            .iter()
            .filter(|((_, k), _)| k.counts_toward_budget())
            .map(|(_, n)| n)
            .sum()
    }

    pub fn phase_overflowed(&self, phase: u32) -> bool {
        self.overflowed.get(&phase).copied().unwrap_or(false)
    }

    pub fn any_overflow(&self) -> bool {
        self.overflowed.values().any(|&b| b)
    }

    pub fn snapshot(&self) -> Vec<LedgerRecord> {
        self.counts
            .iter()
            .map(|(&(phase, kind), &count)| LedgerRecord {
                phase,
                kind,
                count,
                budget: self.budgets.get(&phase).copied(),
                overflow: self.phase_overflowed(phase),
            })
            .collect()
    }
}

/// Multinomial counts of `m` draws from `probs` via chained binomials; the
/// law is exactly that of `m` independent categorical draws, at O(k) cost.
pub fn multinomial_counts(m: u64, probs: &[f64], rng: &mut impl Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = m;
    let mut mass_left = 1.0f64;
    for (j, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j == probs.len() - 1 {
            counts[j] = remaining;
            break;
        }
        let cond = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let c = rand_distr::Binomial::new(remaining, cond).unwrap().sample(rng);
        counts[j] = c;
        remaining -= c;
        mass_left -= p;
    }
    counts
}

/// One classical generative query: draws a successor of `(s,a)` and charges
/// one `ClassicalSample` to the phase.
pub fn sample_next(
    env: &PlanEnv,
    s: usize,
    a: usize,
    ledger: &mut QueryLedger,
    phase: u32,
    rng: &mut impl Rng,
) -> Result<usize> {
    let row = env.row(s, a)?;
    ledger.charge(OracleKind::ClassicalSample, phase, 1)?;
    Ok(row.sample_one(rng))
}

/// Batched classical queries, returned as successor counts. Distributionally
/// identical to `m` calls of [`sample_next`]; charges `m`.
pub fn sample_batch(
    env: &PlanEnv,
    s: usize,
    a: usize,
    m: u64,
    ledger: &mut QueryLedger,
    phase: u32,
    rng: &mut impl Rng,
) -> Result<Vec<u64>> {
    let row = env.row(s, a)?;
    ledger.charge(OracleKind::ClassicalSample, phase, m)?;
    Ok(row.sample_counts(m, env.num_states(), rng))
}

/// Sample mean and the biased sample variance `mean(x^2) - mean(x)^2`.
pub fn empirical_mean_var(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Empty("empirical_mean_var of no samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_sq = samples.iter().map(|x| x * x).sum::<f64>() / n;
    Ok((mean, (mean_sq - mean * mean).max(0.0)))
}

pub(crate) fn q_mean_charge(eps: f64, delta: f64, c_mean: f64) -> u64 {
    ((c_mean / eps) * (1.0 / delta).ln()).ceil().max(1.0) as u64
}

pub(crate) fn q_mean_multi_charge(dim: usize, eps: f64, delta: f64, c_multi: f64) -> u64 {
    ((c_multi / eps) * (dim as f64 / delta).ln()).ceil().max(1.0) as u64
}

pub(crate) fn q_max_charge(num_candidates: usize, delta: f64, c_max: f64) -> u64 {
    (c_max * (num_candidates as f64).sqrt() * (1.0 / delta).ln())
        .ceil()
        .max(1.0) as u64
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if eps <= 0.0 {
        return Err(Error::Invalid("accuracy eps must be positive".into()));
    }
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::Invalid("delta must lie in (0,1)".into()));
    }
    Ok(())
}

/// Emulated quantum mean estimation: returns a value within
/// `sp(u) * eps` of the exact mean `E[u(X')]` under the row, and charges
/// `ceil((c_mean/eps) ln(1/delta))` `QMean` queries.
pub fn emulated_q_mean(
    u: &[f64],
    row: &KernelRow,
    eps: f64,
    delta: f64,
    ledger: &mut QueryLedger,
    phase: u32,
    cfg: &QuantumEmulationConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_eps_delta(eps, delta)?;
    cfg.validate()?;
    let avg = u.iter().sum::<f64>() / u.len() as f64;
    let exact = row.mean(u, avg);
    let bound = span(u)? * eps;
    ledger.charge(OracleKind::QMean, phase, q_mean_charge(eps, delta, cfg.c_mean))?;
    Ok(exact + cfg.noise(bound, rng))
}

/// Emulated multivariate quantum mean estimation: every coordinate is within
/// `sqrt(sum_i var_i) * eps` of its exact mean, where `var_i` is the exact
/// per-coordinate variance under the row. Charges
/// `ceil((c_multi/eps) ln(m/delta))` `QMeanMulti` queries.
pub fn emulated_q_mean_multi(
    us: &[Vec<f64>],
    row: &KernelRow,
    eps: f64,
    delta: f64,
    ledger: &mut QueryLedger,
    phase: u32,
    cfg: &QuantumEmulationConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    check_eps_delta(eps, delta)?;
    cfg.validate()?;
    if us.is_empty() {
        return Err(Error::Empty("no coordinate functions"));
    }
    let mut total_var = 0.0;
    let mut exact = Vec::with_capacity(us.len());
    for u in us {
        let avg = u.iter().sum::<f64>() / u.len() as f64;
        let avg_sq = u.iter().map(|x| x * x).sum::<f64>() / u.len() as f64;
        let mean = row.mean(u, avg);
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        let mean_sq = row.mean(&sq, avg_sq);
        total_var += (mean_sq - mean * mean).max(0.0);
        exact.push(mean);
    }
    let bound = total_var.sqrt() * eps;
    ledger.charge(
        OracleKind::QMeanMulti,
        phase,
        q_mean_multi_charge(us.len(), eps, delta, cfg.c_multi),
    )?;
    Ok(exact.into_iter().map(|m| m + cfg.noise(bound, rng)).collect())
}

/// Emulated quantum max-finding: the exact argmax (lowest index on ties) and
/// maximum of the given candidate values, charging
/// `ceil(c_max sqrt(A) ln(1/delta))` `QMaxInner` queries. When candidates are
/// produced by an emulated mean estimator, charge the composition with
/// [`charge_composed_q_max`] so each inner query forwards the candidate cost.
pub fn emulated_q_max(
    values: &[f64],
    delta: f64,
    ledger: &mut QueryLedger,
    phase: u32,
    cfg: &QuantumEmulationConfig,
) -> Result<(usize, f64)> {
    check_eps_delta(1.0, delta)?;
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Empty("max-finding over no candidates"));
    }
    ledger.charge(OracleKind::QMaxInner, phase, q_max_charge(values.len(), delta, cfg.c_max))?;
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok((best, values[best]))
}

/// Failure share given to each candidate-evaluation unitary inside
/// max-finding, so that the composed failure probability stays at `delta1`.
pub(crate) fn composed_eval_delta(num_candidates: usize, delta1: f64) -> f64 {
    let ln1 = (1.0 / delta1).ln().max(1.0);
    (delta1 * delta1 / (num_candidates as f64 * ln1 * ln1)).min(delta1)
}

/// Charge max-finding composed with a per-candidate estimator: `inner` outer
/// queries, each forwarding one estimator invocation of `per_eval` queries.
pub(crate) fn charge_composed_q_max(
    num_candidates: usize,
    delta1: f64,
    per_eval: u64,
    ledger: &mut QueryLedger,
    phase: u32,
    cfg: &QuantumEmulationConfig,
) -> Result<(u64, u64)> {
    let inner = q_max_charge(num_candidates, delta1, cfg.c_max);
    ledger.charge(OracleKind::QMaxInner, phase, inner)?;
    ledger.charge(OracleKind::QMean, phase, inner * per_eval)?;
    Ok((inner, inner * per_eval))
}
