//! Exploration/generative online loops and their regret ledgers.
//!
//! `run_online_finite` plays episodes of length H, refreshing its policy with
//! a doubling trick (a planner call at every power-of-two episode, budgeted
//! by the exploration steps since the previous refresh). `run_online_infinite`
//! uses doubling episodes: each episode plans under a budget proportional to
//! the previous episode's length, then explores until the step count doubles.
//!
//! Planner accuracy targets are derived by searching for the best accuracy
//! whose closed-form query count fits the phase budget, so budget compliance
//! holds by construction whenever the planner behaves as its guarantee says;
//! the ledger flags any overrun. A planner failure flags the episode and the
//! previous policy is retained.
//!
//! Regret accounting is oracle-anchored: in-path regret compares realized
//! rewards against the exact optimal gain, expected regret charges each step
//! the exact gain gap of its decision rule, and finite-horizon regret sums
//! exact per-episode value gaps.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::HolderParams;
use crate::env::{KernelRow, PlanEnv};
use crate::error::{Error, Result};
use crate::mdp::{
    ergodicity_coefficient, exact_backward_induction, exact_gain_bias_optimal,
    gain_bias_of_stationary, policy_value_finite, DecisionRule, FiniteMdp, HorizonSpec, Policy,
};
use crate::oracles::{LedgerRecord, QueryLedger, QuantumEmulationConfig, SamplerConfig};
use crate::plan_finite::{
    classical_backward_induction, classical_fh_cost, modern_fh_cost,
    quantum_modern_backward_induction, quantum_simple_backward_induction, simple_fh_cost,
};
use crate::plan_infinite::{
    classical_value_iteration, classical_vi_cost, quantum_value_iteration, quantum_vi_cost,
    VIConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiniteMode {
    Classical,
    QuantumModern,
    QuantumSimple,
    OracleExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfiniteMode {
    Classical,
    Quantum,
    OracleExact,
}

/// Initial-state law at episode starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitLaw {
    Uniform,
    Fixed(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub delta: f64,
    /// Generative budget per phase is `c_budget * tau`.
    pub c_budget: f64,
    /// Constant-scale multiplier on classical sample counts.
    pub scale: f64,
    pub qcfg: QuantumEmulationConfig,
    pub init_law: InitLaw,
    pub seed: u64,
}

impl OnlineConfig {
    pub fn new(delta: f64, seed: u64) -> Self {
        Self {
            delta,
            c_budget: 8.0,
            scale: 1.0,
            qcfg: QuantumEmulationConfig::default(),
            init_law: InitLaw::Uniform,
            seed,
        }
    }
}

/// One planner invocation at an episode boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefreshRecord {
    pub episode: u64,
    pub mode: String,
    pub eps_target: Option<f64>,
    pub delta_share: f64,
    pub budget: u64,
    pub planned_cost: u64,
    pub charged: u64,
    /// An accuracy fitting the budget existed.
    pub feasible: bool,
    /// The planner ran and replaced the policy.
    pub succeeded: bool,
    pub overflow: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub index: u64,
    pub t_start: u64,
    pub length: u64,
    pub policy_id: usize,
    pub refresh: Option<RefreshRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub episode: u64,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// Everything an online run logged, before regret accounting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawTrace {
    pub steps: Vec<StepRecord>,
    pub episodes: Vec<EpisodeLog>,
    pub horizon: Option<usize>,
    /// Finite-horizon policies by policy id.
    pub policies: Vec<Policy>,
    /// Infinite-horizon decision rules by policy id.
    pub rules: Vec<DecisionRule>,
    /// Initial state of each episode.
    pub initial_states: Vec<usize>,
}

/// Exact oracle values the regret ledgers compare against.
#[derive(Debug, Clone)]
pub struct OracleBundle {
    pub mdp: FiniteMdp,
    pub g_star: f64,
    pub opt_bias_span: f64,
    pub opt_rule: DecisionRule,
    /// Optimal finite-horizon values (when a horizon was given).
    pub v_star: Option<Vec<Vec<f64>>>,
    pub opt_policy: Option<Policy>,
    pub nu: f64,
}

impl OracleBundle {
    pub fn build(mdp: FiniteMdp, horizon: Option<HorizonSpec>) -> Result<Self> {
        let opt = exact_gain_bias_optimal(&mdp)?;
        let nu = ergodicity_coefficient(&mdp).nu;
        let (v_star, opt_policy) = match horizon {
            Some(h) => {
                let (v, p) = exact_backward_induction(&mdp, h)?;
                (Some(v), Some(p))
            }
            None => (None, None),
        };
        Ok(Self {
            mdp,
            g_star: opt.gain,
            opt_bias_span: opt.span,
            opt_rule: opt.rule,
            v_star,
            opt_policy,
            nu,
        })
    }
}

/// Full regret trace: the raw log plus the three cumulative regret series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretTrace {
    pub raw: RawTrace,
    pub cum_inpath: Vec<f64>,
    pub cum_expected: Vec<f64>,
    /// Defined only for finite-horizon runs.
    pub cum_finite_h: Option<Vec<f64>>,
    pub g_star: f64,
    pub ledger: Vec<LedgerRecord>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.raw.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.steps.is_empty()
    }

    /// Successful policy replacements after the initial episode.
    pub fn refresh_count(&self) -> u64 {
        self.raw
            .episodes
            .iter()
            .filter(|e| e.index >= 2)
            .filter_map(|e| e.refresh.as_ref())
            .filter(|r| r.succeeded)
            .count() as u64
    }

    pub fn any_overflow(&self) -> bool {
        self.raw
            .episodes
            .iter()
            .filter_map(|e| e.refresh.as_ref())
            .any(|r| r.overflow)
    }

    /// CSV with one row per step:
    /// `t,episode,state,action,reward,cum_inpath,cum_expected,cum_finiteH`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,episode,state,action,reward,cum_inpath,cum_expected,cum_finiteH")?;
        for (i, s) in self.raw.steps.iter().enumerate() {
            let fh = match &self.cum_finite_h {
                Some(v) => format!("{}", v[i]),
                None => String::new(),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.t, s.episode, s.state, s.action, s.reward, self.cum_inpath[i],
                self.cum_expected[i], fh
            )?;
        }
        Ok(())
    }
}

/// Fill the cumulative regret series from a raw log and exact oracles.
pub fn compute_regrets(
    raw: &RawTrace,
    bundle: &OracleBundle,
    ledger: Vec<LedgerRecord>,
) -> Result<RegretTrace> {
    let g_star = bundle.g_star;
    let n = raw.steps.len();
    let mut cum_inpath = Vec::with_capacity(n);
    let mut cum_expected = Vec::with_capacity(n);
    let mut reward_sum = 0.0;
    let mut expected_sum = 0.0;

    // exact min-gain per decision rule, memoized by the deterministic key
    let mut gain_cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut min_gain = |rule: &DecisionRule| -> Result<f64> {
        if let DecisionRule::Deterministic(key) = rule {
            if let Some(&g) = gain_cache.get(key) {
                return Ok(g);
            }
            let g = gain_bias_of_stationary(&bundle.mdp, rule)?.min_gain();
            gain_cache.insert(key.clone(), g);
            return Ok(g);
        }
        Ok(gain_bias_of_stationary(&bundle.mdp, rule)?.min_gain())
    };

    let episode_of: HashMap<u64, &EpisodeLog> =
        raw.episodes.iter().map(|e| (e.index, e)).collect();

    for step in &raw.steps {
        reward_sum += step.reward;
        cum_inpath.push(step.t as f64 * g_star - reward_sum);

        let ep = episode_of
            .get(&step.episode)
            .ok_or_else(|| Error::Invalid(format!("step references episode {}", step.episode)))?;
        let rule = match raw.horizon {
            Some(_) => {
                let off = (step.t - ep.t_start) as usize;
                raw.policies[ep.policy_id].rule(off)
            }
            None => &raw.rules[ep.policy_id],
        };
        expected_sum += g_star - min_gain(rule)?;
        cum_expected.push(expected_sum);
    }

    let cum_finite_h = match raw.horizon {
        Some(h) => {
            let hs = HorizonSpec(h);
            let v_star = bundle
                .v_star
                .as_ref()
                .ok_or_else(|| Error::Invalid("bundle lacks finite-horizon values".into()))?;
            // exact V_1 per policy id, computed once each
            let mut v1_cache: HashMap<usize, Vec<f64>> = HashMap::new();
            let mut series = vec![0.0; n];
            let mut cum = 0.0;
            let mut idx = 0usize;
            for (ep, &x1) in raw.episodes.iter().zip(&raw.initial_states) {
                let v1 = match v1_cache.get(&ep.policy_id) {
                    Some(v) => v.clone(),
                    None => {
                        let pv = policy_value_finite(&bundle.mdp, &raw.policies[ep.policy_id], hs)?;
                        let v = pv.values[0].clone();
                        v1_cache.insert(ep.policy_id, v.clone());
                        v
                    }
                };
                let increment = v_star[0][x1] - v1[x1];
                for j in 0..ep.length as usize {
                    // the episode's regret lands on its final step
                    series[idx + j] = cum + if j + 1 == ep.length as usize { increment } else { 0.0 };
                }
                cum += increment;
                idx += ep.length as usize;
            }
            Some(series)
        }
        None => None,
    };

    Ok(RegretTrace { raw: raw.clone(), cum_inpath, cum_expected, cum_finite_h, g_star, ledger })
}

fn draw_initial(law: InitLaw, s_n: usize, rng: &mut impl Rng) -> usize {
    match law {
        InitLaw::Uniform => rng.gen_range(0..s_n),
        InitLaw::Fixed(x) => x.min(s_n - 1),
    }
}

fn lowest_action_policy(s_n: usize, h: usize) -> Policy {
    Policy(vec![DecisionRule::Deterministic(vec![0; s_n]); h])
}

/// Largest epoch count whose closed-form cost fits the budget; the planner's
/// accuracy target is `H / 2^K`.
fn fit_epochs(budget: u64, cost: impl Fn(usize) -> u64) -> Option<usize> {
    let mut best = None;
    for k in 1..=48 {
        if cost(k) <= budget {
            best = Some(k);
        } else {
            break;
        }
    }
    best
}

/// Smallest accuracy whose closed-form cost fits the budget (cost must be
/// nonincreasing in eps). Returns None when even `eps_max` does not fit.
fn fit_eps(budget: u64, eps_max: f64, cost: impl Fn(f64) -> u64) -> Option<f64> {
    if cost(eps_max) > budget {
        return None;
    }
    let mut lo = 1e-9f64.ln();
    let mut hi = eps_max.ln();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cost(mid.exp()) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi.exp().min(eps_max))
}

/// Online learning for finite-horizon MDPs: H-step episodes, policy refresh
/// via the doubling trick, per-episode regret against the exact optimum.
pub fn run_online_finite(
    env: &PlanEnv,
    h: HorizonSpec,
    k_episodes: u64,
    mode: FiniteMode,
    holder: &HolderParams,
    cfg: &OnlineConfig,
) -> Result<RegretTrace> {
    if k_episodes == 0 {
        return Err(Error::Invalid("need at least one episode".into()));
    }
    let hn = h.0;
    let induced = env.induced_finite()?.into_owned();
    let bundle = OracleBundle::build(induced, Some(h))?;
    let s_n = bundle.mdp.num_states();
    let a_n = bundle.mdp.num_actions();
    let mut ledger = QueryLedger::new();
    let mut xrng = SamplerConfig::new(cfg.seed, 0).rng();
    let refresh_shares = (k_episodes.max(2) as f64).log2().ceil().max(1.0);
    let delta_share = cfg.delta / refresh_shares;

    let mut policies = vec![lowest_action_policy(s_n, hn)];
    let mut policy_id = 0usize;
    let mut steps = Vec::with_capacity((k_episodes * hn as u64) as usize);
    let mut episodes = Vec::with_capacity(k_episodes as usize);
    let mut initial_states = Vec::with_capacity(k_episodes as usize);
    let mut t: u64 = 1;

    for k in 1..=k_episodes {
        let mut refresh = None;
        if k.is_power_of_two() {
            let budget = (cfg.c_budget * hn as f64 * k as f64 / 2.0).ceil() as u64;
            let phase = k.min(u32::MAX as u64 - 1) as u32;
            ledger.open_phase(phase, budget);
            let mut rec = RefreshRecord {
                episode: k,
                mode: format!("{mode:?}"),
                eps_target: None,
                delta_share,
                budget,
                planned_cost: 0,
                charged: 0,
                feasible: false,
                succeeded: false,
                overflow: false,
            };
            let mut prng = SamplerConfig::new(cfg.seed, k).rng();
            let planned: Option<(f64, u64)> = match mode {
                FiniteMode::OracleExact => Some((0.0, 0)),
                FiniteMode::Classical => fit_epochs(budget, |kk| {
                    classical_fh_cost(hn, s_n, a_n, kk, delta_share, cfg.scale)
                })
                .map(|kk| {
                    let eps = hn as f64 / 2f64.powi(kk as i32);
                    (eps, classical_fh_cost(hn, s_n, a_n, kk, delta_share, cfg.scale))
                }),
                FiniteMode::QuantumModern => fit_epochs(budget, |kk| {
                    modern_fh_cost(hn, s_n, a_n, kk, delta_share, &cfg.qcfg)
                })
                .map(|kk| {
                    let eps = hn as f64 / 2f64.powi(kk as i32);
                    (eps, modern_fh_cost(hn, s_n, a_n, kk, delta_share, &cfg.qcfg))
                }),
                FiniteMode::QuantumSimple => fit_eps(budget, hn as f64, |e| {
                    simple_fh_cost(hn, s_n, a_n, e, delta_share, &cfg.qcfg)
                })
                .map(|eps| (eps, simple_fh_cost(hn, s_n, a_n, eps, delta_share, &cfg.qcfg))),
            };
            if let Some((eps, planned_cost)) = planned {
                rec.feasible = true;
                rec.eps_target = Some(eps);
                rec.planned_cost = planned_cost;
                let outcome = match mode {
                    FiniteMode::OracleExact => {
                        Ok(bundle.opt_policy.clone().expect("bundle built with horizon"))
                    }
                    FiniteMode::Classical => classical_backward_induction(
                        env, h, eps, delta_share, holder, cfg.scale, &mut ledger, phase, &mut prng,
                    )
                    .map(|o| o.policy),
                    FiniteMode::QuantumModern => quantum_modern_backward_induction(
                        env, h, eps, delta_share, holder, &cfg.qcfg, &mut ledger, phase, &mut prng,
                    )
                    .map(|o| o.policy),
                    FiniteMode::QuantumSimple => quantum_simple_backward_induction(
                        env, h, eps, delta_share, holder, &cfg.qcfg, &mut ledger, phase, &mut prng,
                    )
                    .map(|o| o.policy),
                };
                match outcome {
                    Ok(policy) => {
                        policies.push(policy);
                        policy_id = policies.len() - 1;
                        rec.succeeded = true;
                    }
                    Err(Error::NoConvergence { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            rec.charged = ledger.phase_budgeted_total(phase);
            rec.overflow = ledger.phase_overflowed(phase);
            refresh = Some(rec);
        }

        let x1 = draw_initial(cfg.init_law, s_n, &mut xrng);
        initial_states.push(x1);
        let t_start = t;
        let mut x = x1;
        for off in 0..hn {
            let a = policies[policy_id].rule(off).act(x, &mut xrng);
            let r = bundle.mdp.reward(x, a);
            steps.push(StepRecord { t, episode: k, state: x, action: a, reward: r });
            x = KernelRow::Dense(bundle.mdp.row(x, a)).sample_one(&mut xrng);
            t += 1;
        }
        episodes.push(EpisodeLog { index: k, t_start, length: hn as u64, policy_id, refresh });
    }

    let raw = RawTrace {
        steps,
        episodes,
        horizon: Some(hn),
        policies,
        rules: vec![],
        initial_states,
    };
    compute_regrets(&raw, &bundle, ledger.snapshot())
}

/// Online learning for infinite-horizon MDPs with doubling episodes.
///
/// `nu` and `bias_span` default to the exact oracle values of the induced
/// finite model when not supplied.
#[allow(clippy::too_many_arguments)]
pub fn run_online_infinite(
    env: &PlanEnv,
    t_steps: u64,
    mode: InfiniteMode,
    holder: &HolderParams,
    nu: Option<f64>,
    bias_span: Option<f64>,
    cfg: &OnlineConfig,
) -> Result<RegretTrace> {
    if t_steps == 0 {
        return Err(Error::Invalid("need at least one step".into()));
    }
    let induced = env.induced_finite()?.into_owned();
    let bundle = OracleBundle::build(induced, None)?;
    let s_n = bundle.mdp.num_states();
    let a_n = bundle.mdp.num_actions();
    let nu = nu.unwrap_or(bundle.nu);
    let bias_span = bias_span.unwrap_or(bundle.opt_bias_span);
    let slack = env.holder_slack(holder);
    let mut ledger = QueryLedger::new();
    let mut xrng = SamplerConfig::new(cfg.seed, 0).rng();

    let mut rules = vec![bundle.mdp.greedy_reward_rule()];
    let mut policy_id = 0usize;
    let mut steps = Vec::with_capacity(t_steps as usize);
    let mut episodes = Vec::new();
    let mut initial_states = Vec::new();

    let mut t: u64 = 1;
    let mut tau_prev: u64 = 1;
    let mut episode: u64 = 0;

    while t <= t_steps {
        episode += 1;
        let budget = (cfg.c_budget * tau_prev as f64).ceil() as u64;
        let phase = episode as u32;
        ledger.open_phase(phase, budget);
        let delta_share = cfg.delta / (8.0 * (t as f64).powf(1.25));
        let mut rec = RefreshRecord {
            episode,
            mode: format!("{mode:?}"),
            eps_target: None,
            delta_share,
            budget,
            planned_cost: 0,
            charged: 0,
            feasible: false,
            succeeded: false,
            overflow: false,
        };

        let make_cfg = |eps: f64| {
            let mut c = VIConfig::new(eps, bias_span, nu, delta_share);
            c.holder = *holder;
            c.scale = cfg.scale;
            c
        };
        let eps_max = if nu > 0.0 { 2.0 / nu } else { 2.0 };
        let planned: Option<(f64, u64)> = match mode {
            InfiniteMode::OracleExact => Some((0.0, 0)),
            InfiniteMode::Classical => fit_eps(budget, eps_max, |e| {
                let c = make_cfg(e);
                classical_vi_cost(&c, s_n, a_n, c.guarantee_sweep_bound(slack) + 3)
            })
            .map(|e| {
                let c = make_cfg(e);
                (e, classical_vi_cost(&c, s_n, a_n, c.guarantee_sweep_bound(slack) + 3))
            }),
            InfiniteMode::Quantum => fit_eps(budget, eps_max, |e| {
                let c = make_cfg(e);
                quantum_vi_cost(&c, s_n, a_n, c.guarantee_sweep_bound(slack) + 3, &cfg.qcfg)
            })
            .map(|e| {
                let c = make_cfg(e);
                (e, quantum_vi_cost(&c, s_n, a_n, c.guarantee_sweep_bound(slack) + 3, &cfg.qcfg))
            }),
        };
        if let Some((eps, planned_cost)) = planned {
            rec.feasible = true;
            rec.eps_target = Some(eps);
            rec.planned_cost = planned_cost;
            let mut prng = SamplerConfig::new(cfg.seed, episode).rng();
            let outcome = match mode {
                InfiniteMode::OracleExact => Ok(bundle.opt_rule.clone()),
                InfiniteMode::Classical => {
                    classical_value_iteration(env, &make_cfg(eps), &mut ledger, phase, &mut prng)
                        .map(|o| o.rule)
                }
                InfiniteMode::Quantum => quantum_value_iteration(
                    env, &make_cfg(eps), &cfg.qcfg, &mut ledger, phase, &mut prng,
                )
                .map(|o| o.rule),
            };
            match outcome {
                Ok(rule) => {
                    rules.push(rule);
                    policy_id = rules.len() - 1;
                    rec.succeeded = true;
                }
                Err(Error::NoConvergence { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        rec.charged = ledger.phase_budgeted_total(phase);
        rec.overflow = ledger.phase_overflowed(phase);

        // exploration: run while t < 2 tau, truncated at t_steps
        let tau_next = t;
        let t_start = t;
        let mut x = draw_initial(cfg.init_law, s_n, &mut xrng);
        initial_states.push(x);
        while t < 2 * tau_next && t <= t_steps {
            let a = rules[policy_id].act(x, &mut xrng);
            let r = bundle.mdp.reward(x, a);
            steps.push(StepRecord { t, episode, state: x, action: a, reward: r });
            x = KernelRow::Dense(bundle.mdp.row(x, a)).sample_one(&mut xrng);
            t += 1;
        }
        episodes.push(EpisodeLog {
            index: episode,
            t_start,
            length: t - t_start,
            policy_id,
            refresh: Some(rec),
        });
        tau_prev = tau_next;
    }

    let raw = RawTrace {
        steps,
        episodes,
        horizon: None,
        policies: vec![],
        rules,
        initial_states,
    };
    compute_regrets(&raw, &bundle, ledger.snapshot())
}

/// The two summation bounds the doubling-episode regret proofs consume.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DoublingCheck {
    pub sum_ratio: f64,
    pub bound_ratio: f64,
    pub sum_sqrt: f64,
    pub bound_sqrt: f64,
    pub ok: bool,
}

/// Verify `sum_k tau_k / t_k <= 4 log2(T/2)` and
/// `sum_k tau_k / sqrt(t_k) <= sqrt(T) / (sqrt(2) - 1)` with
/// `t_k = max(1, tau_1 + ... + tau_{k-1})` and `T = sum_k tau_k >= 4`.
pub fn doubling_bound_check(lengths: &[u64]) -> Result<DoublingCheck> {
    let total: u64 = lengths.iter().sum();
    if total < 4 {
        return Err(Error::Invalid(format!("total length {total} below 4")));
    }
    let mut prefix = 0u64;
    let mut sum_ratio = 0.0;
    let mut sum_sqrt = 0.0;
    for &tau in lengths {
        let t_k = prefix.max(1) as f64;
        sum_ratio += tau as f64 / t_k;
        sum_sqrt += tau as f64 / t_k.sqrt();
        prefix += tau;
    }
    let tf = total as f64;
    let bound_ratio = 4.0 * (tf / 2.0).log2();
    let bound_sqrt = tf.sqrt() / (2f64.sqrt() - 1.0);
    Ok(DoublingCheck {
        sum_ratio,
        bound_ratio,
        sum_sqrt,
        bound_sqrt,
        ok: sum_ratio <= bound_ratio && sum_sqrt <= bound_sqrt,
    })
}
