//! Finite-horizon generative planners.
//!
//! Three backward-induction planners share one output shape:
//!
//! * `classical_backward_induction` — epoch-doubling variance-reduced
//!   backward induction from batched classical samples, with Bernstein-shifted
//!   epoch means and Hoeffding-shifted per-step difference estimates.
//! * `quantum_modern_backward_induction` — the same epoch structure, with the
//!   epoch means and variances of all H levels estimated at once by emulated
//!   multivariate quantum mean estimation and the per-step differences by
//!   emulated univariate mean estimation.
//! * `quantum_simple_backward_induction` — plain backward induction with an
//!   emulated mean-estimation unitary composed inside emulated max-finding
//!   over actions, trading an extra horizon factor for a sqrt(A) dependence.
//!
//! All three maintain the monotonicity invariant (values never decrease, and
//! every accepted value lower-bounds the value of the returned policy), break
//! argmax ties toward the lowest action index, and initialize the horizon
//! level from the known rewards, `u_H(s) = max_a r(s,a)`, which only tightens
//! the lower sandwich.

use serde::{Deserialize, Serialize};

use crate::discretize::HolderParams;
use crate::env::PlanEnv;
use crate::error::{Error, Result};
use crate::mdp::{span, DecisionRule, HorizonSpec, Policy};
use crate::oracles::{
    charge_composed_q_max, composed_eval_delta, emulated_q_mean, emulated_q_mean_multi,
    q_max_charge, q_mean_charge, q_mean_multi_charge, sample_batch, LedgerRecord, QueryLedger,
    QuantumEmulationConfig,
};

/// Epoch count `K = ceil(log2(H / eps))`, zero when `eps >= H`.
pub fn epoch_count(h: usize, eps: f64) -> usize {
    let ratio = h as f64 / eps;
    if ratio <= 1.0 {
        return 0;
    }
    (ratio.log2() - 1e-9).ceil().max(1.0) as usize
}

/// Per-epoch constants of the classical planner. The guarantee's explicit
/// constants are kept verbatim; `scale` multiplies the sample counts only
/// (the confidence shifts adapt through `theta_k = ln(...) / m_k`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub eps_k: Vec<f64>,
    pub m_k: Vec<u64>,
    pub ell_k: Vec<u64>,
    pub theta_k: Vec<f64>,
}

impl EpochSchedule {
    pub fn classical(
        h: usize,
        s_n: usize,
        a: usize,
        k_epochs: usize,
        delta: f64,
        scale: f64,
    ) -> Self {
        let hf = h as f64;
        let ln16 = (16.0 * hf * s_n as f64 * a as f64 * k_epochs.max(1) as f64 / delta).ln();
        let ln4 = (4.0 * hf * s_n as f64 * a as f64 * k_epochs.max(1) as f64 / delta).ln();
        let mut out = Self { eps_k: vec![], m_k: vec![], ell_k: vec![], theta_k: vec![] };
        for k in 1..=k_epochs {
            let eps_k = hf / 2f64.powi(k as i32);
            let m_k = (scale * 128.0 * hf.powi(3) / eps_k.powi(2).min(1.0) * ln16)
                .ceil()
                .max(1.0) as u64;
            let ell_k = (scale * 512.0 * hf.powi(2) * ln4).ceil().max(1.0) as u64;
            out.eps_k.push(eps_k);
            out.m_k.push(m_k);
            out.ell_k.push(ell_k);
            out.theta_k.push(ln16 / m_k as f64);
        }
        out
    }
}

/// The suboptimality bound the run claims, with its failure probability.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GuaranteeRecord {
    pub suboptimality_bound: f64,
    pub delta: f64,
}

/// Per-epoch diagnostics: the accepted value tables and policy plus the
/// shifted estimates that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochDiag {
    pub eps_k: f64,
    pub m_k: Option<u64>,
    pub ell_k: Option<u64>,
    pub theta_k: f64,
    /// `u[t-1][s]` after this epoch.
    pub u: Vec<Vec<f64>>,
    pub policy: Policy,
    /// `mu_hat[t-1][s*A+a]`, the shifted epoch-start mean of level `t`.
    pub mu_hat: Vec<Vec<f64>>,
    /// `sigma_tilde[t-1][s*A+a]`.
    pub sigma_tilde: Vec<Vec<f64>>,
    /// `beta_hat[t-1][s*A+a]`, the shifted difference estimate used at step
    /// `t` (estimating level `t+1`); length `H-1`.
    pub beta_hat: Vec<Vec<f64>>,
    /// Emulated-quantum charges per (s,a) mean/variance vector call.
    pub multi_charge: Option<u64>,
    /// Emulated-quantum charge per (s,a,t) difference call.
    pub beta_charge: Option<u64>,
}

/// Per-time-step diagnostics of the simple quantum planner.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimpleStepDiag {
    pub t: usize,
    pub sp_u_next: f64,
    pub inner: u64,
    pub per_eval: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub mode: String,
    pub eps: f64,
    pub delta: f64,
    pub policy: Policy,
    /// Final value tables, `u[t-1][s]`.
    pub u: Vec<Vec<f64>>,
    pub epochs: Vec<EpochDiag>,
    pub steps: Vec<SimpleStepDiag>,
    pub guarantee: GuaranteeRecord,
    /// Ledger rows charged to this run's phase.
    pub ledger: Vec<LedgerRecord>,
}

fn check_common(eps: f64, delta: f64) -> Result<()> {
    if eps <= 0.0 {
        return Err(Error::Invalid("eps must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid("delta must lie in (0,1)".into()));
    }
    Ok(())
}

fn check_holder_hypothesis(slack: f64, h: usize) -> Result<()> {
    if slack > 1.0 / (16.0 * h as f64) + 1e-15 {
        return Err(Error::Hypothesis(format!(
            "L n^-alpha = {slack:.6} exceeds 1/(16H) = {:.6}",
            1.0 / (16.0 * h as f64)
        )));
    }
    Ok(())
}

/// Reward-greedy horizon level: `u_H(s) = max_a r(s,a) - slack` (clamped to
/// be nonnegative) with the argmax rule.
fn horizon_init(env: &PlanEnv, slack: f64) -> (Vec<f64>, Vec<usize>) {
    let (s_n, a_n) = (env.num_states(), env.num_actions());
    let mut u = vec![0.0; s_n];
    let mut act = vec![0usize; s_n];
    for s in 0..s_n {
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for a in 0..a_n {
            let r = env.reward(s, a);
            if r > best {
                best = r;
                best_a = a;
            }
        }
        u[s] = (best - slack).max(0.0);
        act[s] = best_a;
    }
    (u, act)
}

fn phase_snapshot(ledger: &QueryLedger, phase: u32) -> Vec<LedgerRecord> {
    ledger.snapshot().into_iter().filter(|r| r.phase == phase).collect()
}

/// Total classical samples the classical planner draws:
/// `sum_k (m_k + (H-1) ell_k) * S * A`.
pub fn classical_fh_cost(h: usize, s_n: usize, a: usize, k_epochs: usize, delta: f64, scale: f64) -> u64 {
    let sched = EpochSchedule::classical(h, s_n, a, k_epochs, delta, scale);
    let per: u64 = sched
        .m_k
        .iter()
        .zip(&sched.ell_k)
        .map(|(&m, &l)| m + (h as u64 - 1) * l)
        .sum();
    per * (s_n as u64) * (a as u64)
}

/// Algorithm: classical approximate backward induction.
#[allow(clippy::too_many_arguments)]
pub fn classical_backward_induction(
    env: &PlanEnv,
    h: HorizonSpec,
    eps: f64,
    delta: f64,
    holder: &HolderParams,
    scale: f64,
    ledger: &mut QueryLedger,
    phase: u32,
    rng: &mut impl rand::Rng,
) -> Result<PlannerOutput> {
    check_common(eps, delta)?;
    if scale <= 0.0 {
        return Err(Error::Invalid("constant-scale must be positive".into()));
    }
    let hn = h.0;
    let hf = hn as f64;
    let slack = env.holder_slack(holder);
    check_holder_hypothesis(slack, hn)?;
    let (s_n, a_n) = (env.num_states(), env.num_actions());
    let k_epochs = epoch_count(hn, eps);
    let sched = EpochSchedule::classical(hn, s_n, a_n, k_epochs, delta, scale);

    // u[t-1][s] for t in 1..=H; level H comes from the known rewards
    let (u_h, act_h) = horizon_init(env, slack);
    let mut u_prev: Vec<Vec<f64>> = vec![vec![0.0; s_n]; hn];
    u_prev[hn - 1] = u_h;
    let mut pi_prev: Vec<Vec<usize>> = vec![vec![0usize; s_n]; hn];
    pi_prev[hn - 1] = act_h;

    let mut epochs: Vec<EpochDiag> = Vec::with_capacity(k_epochs);

    for k in 0..k_epochs {
        let eps_k = sched.eps_k[k];
        let m_k = sched.m_k[k];
        let ell_k = sched.ell_k[k];
        let theta = sched.theta_k[k];
        let shift_const = (2.0 / 3.0 * theta + 2.0 * (2.0 * theta).powf(0.75) + slack) * hf;

        // one batch per (s,a), reused across all H levels
        let mut mu_hat = vec![vec![0.0; s_n * a_n]; hn];
        let mut sigma_tilde = vec![vec![0.0; s_n * a_n]; hn];
        for s in 0..s_n {
            for a in 0..a_n {
                let counts = sample_batch(env, s, a, m_k, ledger, phase, rng)?;
                for t in 0..hn {
                    let u_t = &u_prev[t];
                    let mut mean = 0.0;
                    let mut mean_sq = 0.0;
                    for (j, &c) in counts.iter().enumerate() {
                        if c == 0 {
                            continue;
                        }
                        let w = c as f64 / m_k as f64;
                        mean += w * u_t[j];
                        mean_sq += w * u_t[j] * u_t[j];
                    }
                    let var = (mean_sq - mean * mean).max(0.0);
                    sigma_tilde[t][s * a_n + a] = var;
                    mu_hat[t][s * a_n + a] =
                        mean - (2.0 * theta * var).sqrt() - shift_const;
                }
            }
        }

        let mut u_cur = u_prev.clone();
        let mut pi_cur = pi_prev.clone();
        let mut beta_hat = vec![vec![0.0; s_n * a_n]; hn - 1];
        for t in (1..hn).rev() {
            // 1-based step t; estimates level t+1 (index t)
            let diff: Vec<f64> = (0..s_n).map(|j| u_cur[t][j] - u_prev[t][j]).collect();
            for s in 0..s_n {
                for a in 0..a_n {
                    let counts = sample_batch(env, s, a, ell_k, ledger, phase, rng)?;
                    let mut mean = 0.0;
                    for (j, &c) in counts.iter().enumerate() {
                        if c > 0 {
                            mean += c as f64 / ell_k as f64 * diff[j];
                        }
                    }
                    beta_hat[t - 1][s * a_n + a] =
                        mean - eps_k / (4.0 * hf) - 1.5 * slack * hf;
                }
            }
            for s in 0..s_n {
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0usize;
                for a in 0..a_n {
                    let q = env.reward(s, a)
                        + mu_hat[t][s * a_n + a]
                        + beta_hat[t - 1][s * a_n + a];
                    if q > best {
                        best = q;
                        best_a = a;
                    }
                }
                let candidate = (best - slack).clamp(0.0, hf);
                if candidate <= u_prev[t - 1][s] {
                    u_cur[t - 1][s] = u_prev[t - 1][s];
                    pi_cur[t - 1][s] = pi_prev[t - 1][s];
                } else {
                    u_cur[t - 1][s] = candidate;
                    pi_cur[t - 1][s] = best_a;
                }
            }
        }

        epochs.push(EpochDiag {
            eps_k,
            m_k: Some(m_k),
            ell_k: Some(ell_k),
            theta_k: theta,
            u: u_cur.clone(),
            policy: Policy(pi_cur.iter().map(|v| DecisionRule::Deterministic(v.clone())).collect()),
            mu_hat,
            sigma_tilde,
            beta_hat,
            multi_charge: None,
            beta_charge: None,
        });
        u_prev = u_cur;
        pi_prev = pi_cur;
    }

    Ok(PlannerOutput {
        mode: "classical".into(),
        eps,
        delta,
        policy: Policy(pi_prev.into_iter().map(DecisionRule::Deterministic).collect()),
        u: u_prev,
        epochs,
        steps: vec![],
        guarantee: GuaranteeRecord {
            suboptimality_bound: eps + 12.0 * slack * hf * hf,
            delta,
        },
        ledger: phase_snapshot(ledger, phase),
    })
}

fn modern_multi_charge(h: usize, s_n: usize, a: usize, k_epochs: usize, delta: f64, theta: f64, qcfg: &QuantumEmulationConfig) -> u64 {
    let delta_call = delta / (4.0 * k_epochs.max(1) as f64 * s_n as f64 * a as f64);
    q_mean_multi_charge(h, theta / (h as f64).sqrt(), delta_call, qcfg.c_multi)
}

fn modern_beta_charge(h: usize, s_n: usize, a: usize, k_epochs: usize, delta: f64, qcfg: &QuantumEmulationConfig) -> u64 {
    let delta_call =
        delta / (2.0 * h as f64 * k_epochs.max(1) as f64 * s_n as f64 * a as f64);
    q_mean_charge(1.0 / (16.0 * h as f64), delta_call, qcfg.c_mean)
}

/// Transition-oracle queries the modern quantum planner charges
/// (2 multivariate calls per (s,a) per epoch, plus the per-step difference
/// estimates). Exact, so budget fits are identities.
pub fn modern_fh_cost(
    h: usize,
    s_n: usize,
    a: usize,
    k_epochs: usize,
    delta: f64,
    qcfg: &QuantumEmulationConfig,
) -> u64 {
    let hf = h as f64;
    let mut total = 0u64;
    for k in 1..=k_epochs {
        let eps_k = hf / 2f64.powi(k as i32);
        let theta = eps_k.min(1.0) / (20.0 * hf.powf(1.5));
        let multi = modern_multi_charge(h, s_n, a, k_epochs, delta, theta, qcfg);
        let beta = modern_beta_charge(h, s_n, a, k_epochs, delta, qcfg);
        total += (2 * multi + (h as u64 - 1) * beta) * s_n as u64 * a as u64;
    }
    total
}

/// Algorithm: modern quantum backward induction (emulated).
#[allow(clippy::too_many_arguments)]
pub fn quantum_modern_backward_induction(
    env: &PlanEnv,
    h: HorizonSpec,
    eps: f64,
    delta: f64,
    holder: &HolderParams,
    qcfg: &QuantumEmulationConfig,
    ledger: &mut QueryLedger,
    phase: u32,
    rng: &mut impl rand::Rng,
) -> Result<PlannerOutput> {
    check_common(eps, delta)?;
    qcfg.validate()?;
    let hn = h.0;
    let hf = hn as f64;
    let slack = env.holder_slack(holder);
    check_holder_hypothesis(slack, hn)?;
    let (s_n, a_n) = (env.num_states(), env.num_actions());
    let k_epochs = epoch_count(hn, eps);
    let delta_multi = delta / (4.0 * k_epochs.max(1) as f64 * s_n as f64 * a_n as f64);
    let delta_beta =
        delta / (2.0 * hf * k_epochs.max(1) as f64 * s_n as f64 * a_n as f64);

    let (u_h, act_h) = horizon_init(env, slack);
    let mut u_prev: Vec<Vec<f64>> = vec![vec![0.0; s_n]; hn];
    u_prev[hn - 1] = u_h;
    let mut pi_prev: Vec<Vec<usize>> = vec![vec![0usize; s_n]; hn];
    pi_prev[hn - 1] = act_h;

    let mut epochs: Vec<EpochDiag> = Vec::with_capacity(k_epochs);

    for k in 1..=k_epochs {
        let eps_k = hf / 2f64.powi(k as i32);
        let theta = eps_k.min(1.0) / (20.0 * hf.powf(1.5));
        let eps_call = theta / hf.sqrt();

        // coordinate functions shared by every (s,a) this epoch
        let u_vecs: Vec<Vec<f64>> = u_prev.clone();
        let usq_vecs: Vec<Vec<f64>> =
            u_prev.iter().map(|u| u.iter().map(|x| x * x).collect()).collect();

        let mut mu_hat = vec![vec![0.0; s_n * a_n]; hn];
        let mut sigma_tilde = vec![vec![0.0; s_n * a_n]; hn];
        for s in 0..s_n {
            for a in 0..a_n {
                let row = env.row(s, a)?;
                // variances of all H levels at once, then the means
                let sig =
                    emulated_q_mean_multi(&usq_vecs, &row, eps_call, delta_multi, ledger, phase, qcfg, rng)?;
                let mu =
                    emulated_q_mean_multi(&u_vecs, &row, eps_call, delta_multi, ledger, phase, qcfg, rng)?;
                // sig[t] currently estimates E[u_t^2]; subtract the exact mean
                // estimate's square is not available, so form the variance
                // estimate from the noisy second moment and noisy mean. The
                // contract |sigma_tilde - sigma| <= theta H^2 is preserved by
                // clamping against the contracted allowance below.
                let mut sum_sigma_tilde = 0.0;
                let mut sig_t = vec![0.0; hn];
                for t in 0..hn {
                    let avg = u_vecs[t].iter().sum::<f64>() / s_n as f64;
                    let exact_mean = row.mean(&u_vecs[t], avg);
                    let avg_sq = usq_vecs[t].iter().sum::<f64>() / s_n as f64;
                    let exact_sq = row.mean(&usq_vecs[t], avg_sq);
                    let exact_var = (exact_sq - exact_mean * exact_mean).max(0.0);
                    // noisy second moment minus exact first moment squared,
                    // clamped to the contracted band around the exact variance
                    let noisy = (sig[t] - exact_mean * exact_mean).max(0.0);
                    let band = theta * hf * hf;
                    sig_t[t] = noisy.clamp((exact_var - band).max(0.0), exact_var + band);
                    sum_sigma_tilde += sig_t[t];
                }
                for t in 0..hn {
                    sigma_tilde[t][s * a_n + a] = sig_t[t];
                    mu_hat[t][s * a_n + a] = mu[t]
                        - theta * (sum_sigma_tilde / hf).sqrt()
                        - (theta.powf(1.5) + slack) * hf;
                }
            }
        }

        let mut u_cur = u_prev.clone();
        let mut pi_cur = pi_prev.clone();
        let mut beta_hat = vec![vec![0.0; s_n * a_n]; hn - 1];
        for t in (1..hn).rev() {
            let diff: Vec<f64> = (0..s_n).map(|j| u_cur[t][j] - u_prev[t][j]).collect();
            for s in 0..s_n {
                for a in 0..a_n {
                    let row = env.row(s, a)?;
                    let beta_tilde = emulated_q_mean(
                        &diff,
                        &row,
                        1.0 / (16.0 * hf),
                        delta_beta,
                        ledger,
                        phase,
                        qcfg,
                        rng,
                    )?;
                    beta_hat[t - 1][s * a_n + a] =
                        beta_tilde - eps_k / (4.0 * hf) - slack * hf;
                }
            }
            for s in 0..s_n {
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0usize;
                for a in 0..a_n {
                    let q = env.reward(s, a)
                        + mu_hat[t][s * a_n + a]
                        + beta_hat[t - 1][s * a_n + a];
                    if q > best {
                        best = q;
                        best_a = a;
                    }
                }
                let candidate = (best - slack).clamp(0.0, hf);
                if candidate <= u_prev[t - 1][s] {
                    u_cur[t - 1][s] = u_prev[t - 1][s];
                    pi_cur[t - 1][s] = pi_prev[t - 1][s];
                } else {
                    u_cur[t - 1][s] = candidate;
                    pi_cur[t - 1][s] = best_a;
                }
            }
        }

        epochs.push(EpochDiag {
            eps_k,
            m_k: None,
            ell_k: None,
            theta_k: theta,
            u: u_cur.clone(),
            policy: Policy(pi_cur.iter().map(|v| DecisionRule::Deterministic(v.clone())).collect()),
            mu_hat,
            sigma_tilde,
            beta_hat,
            multi_charge: Some(modern_multi_charge(hn, s_n, a_n, k_epochs, delta, theta, qcfg)),
            beta_charge: Some(modern_beta_charge(hn, s_n, a_n, k_epochs, delta, qcfg)),
        });
        u_prev = u_cur;
        pi_prev = pi_cur;
    }

    Ok(PlannerOutput {
        mode: "quantum_modern".into(),
        eps,
        delta,
        policy: Policy(pi_prev.into_iter().map(DecisionRule::Deterministic).collect()),
        u: u_prev,
        epochs,
        steps: vec![],
        guarantee: GuaranteeRecord {
            suboptimality_bound: eps + 8.0 * slack * hf * hf,
            delta,
        },
        ledger: phase_snapshot(ledger, phase),
    })
}

/// Transition-oracle queries the simple quantum planner can charge, using the
/// a-priori bound `sp(u) <= H` per level; realized charges never exceed it.
pub fn simple_fh_cost(
    h: usize,
    s_n: usize,
    a: usize,
    eps: f64,
    delta: f64,
    qcfg: &QuantumEmulationConfig,
) -> u64 {
    if h <= 1 {
        return 0;
    }
    let hf = h as f64;
    let delta1 = delta / (hf * s_n as f64);
    let delta2 = composed_eval_delta(a, delta1);
    let inner = q_max_charge(a, delta1, qcfg.c_max);
    let per_eval = q_mean_charge(eps / (2.0 * hf * hf), delta2, qcfg.c_mean);
    (h as u64 - 1) * s_n as u64 * inner * per_eval
}

/// Algorithm: simple quantum backward induction (emulated).
#[allow(clippy::too_many_arguments)]
pub fn quantum_simple_backward_induction(
    env: &PlanEnv,
    h: HorizonSpec,
    eps: f64,
    delta: f64,
    holder: &HolderParams,
    qcfg: &QuantumEmulationConfig,
    ledger: &mut QueryLedger,
    phase: u32,
    rng: &mut impl rand::Rng,
) -> Result<PlannerOutput> {
    check_common(eps, delta)?;
    qcfg.validate()?;
    let hn = h.0;
    let hf = hn as f64;
    let slack = env.holder_slack(holder);
    let (s_n, a_n) = (env.num_states(), env.num_actions());
    let delta1 = delta / (hf * s_n as f64);

    let mut u: Vec<Vec<f64>> = vec![vec![0.0; s_n]; hn];
    let mut pi: Vec<Vec<usize>> = vec![vec![0usize; s_n]; hn];
    let (u_h, act_h) = horizon_init(env, slack);
    u[hn - 1] = u_h;
    pi[hn - 1] = act_h;
    // the horizon level is found by max-finding over the known rewards;
    // this charges no transition-oracle queries
    for _ in 0..s_n {
        ledger.charge(
            crate::oracles::OracleKind::QMaxInner,
            phase,
            q_max_charge(a_n, delta1, qcfg.c_max),
        )?;
    }

    let mut steps = Vec::with_capacity(hn.saturating_sub(1));
    for t in (1..hn).rev() {
        let u_next = u[t].clone();
        let sp_next = span(&u_next)?;
        let avg_next = u_next.iter().sum::<f64>() / s_n as f64;
        let delta2 = composed_eval_delta(a_n, delta1);
        let per_eval = if sp_next > 0.0 {
            q_mean_charge(eps / (2.0 * hf * sp_next), delta2, qcfg.c_mean)
        } else {
            1
        };
        let mut inner_used = 0;
        for s in 0..s_n {
            let mut values = vec![0.0; a_n];
            for (a, v) in values.iter_mut().enumerate() {
                let row = env.row(s, a)?;
                *v = env.reward(s, a)
                    + row.mean(&u_next, avg_next)
                    + qcfg.noise(eps / (2.0 * hf), rng);
            }
            let (inner, _) = charge_composed_q_max(a_n, delta1, per_eval, ledger, phase, qcfg)?;
            inner_used = inner;
            let mut best = 0usize;
            for (a, &v) in values.iter().enumerate() {
                if v > values[best] {
                    best = a;
                }
            }
            let candidate =
                (values[best] - eps / (2.0 * hf) - (1.0 + hf) * slack).clamp(0.0, hf);
            if candidate <= u[t][s] {
                u[t - 1][s] = u[t][s];
                pi[t - 1][s] = pi[t][s];
            } else {
                u[t - 1][s] = candidate;
                pi[t - 1][s] = best;
            }
        }
        steps.push(SimpleStepDiag { t, sp_u_next: sp_next, inner: inner_used, per_eval });
    }

    Ok(PlannerOutput {
        mode: "quantum_simple".into(),
        eps,
        delta,
        policy: Policy(pi.into_iter().map(DecisionRule::Deterministic).collect()),
        u,
        epochs: vec![],
        steps,
        guarantee: GuaranteeRecord {
            suboptimality_bound: eps + 2.0 * (1.0 + hf) * hf * slack,
            delta,
        },
        ledger: phase_snapshot(ledger, phase),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{fixture, FixtureKind};
    use crate::mdp::{exact_backward_induction, policy_value_finite, FiniteMdp};
    use crate::oracles::{NoiseMode, OracleKind, SamplerConfig};

    fn m2() -> FiniteMdp {
        match fixture("M2").unwrap() {
            FixtureKind::Finite(m) => m,
            _ => unreachable!(),
        }
    }

    fn run_classical(seed: u64, scale: f64) -> PlannerOutput {
        let m = m2();
        let env = PlanEnv::Finite(&m);
        let mut ledger = QueryLedger::new();
        let mut rng = SamplerConfig::new(seed, 0).rng();
        classical_backward_induction(
            &env,
            HorizonSpec(2),
            0.05,
            0.1,
            &HolderParams::zero(),
            scale,
            &mut ledger,
            0,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn epoch_count_examples() {
        assert_eq!(epoch_count(2, 0.05), 6); // ceil(log2 40)
        assert_eq!(epoch_count(2, 1.0), 1);
        assert_eq!(epoch_count(2, 2.0), 0);
        assert_eq!(epoch_count(4, 0.5), 3); // exact power of two
    }

    #[test]
    fn classical_m2_value_battery() {
        let m = m2();
        let mut ok = 0;
        let seeds = 200;
        for seed in 0..seeds {
            let out = run_classical(seed, 1.0 / 64.0);
            let pv = policy_value_finite(&m, &out.policy, HorizonSpec(2)).unwrap();
            if pv.values[0][0] >= 1.425 {
                ok += 1;
            }
        }
        assert!(ok >= 180, "V1(0) >= 1.425 in only {ok}/{seeds} runs");
    }

    #[test]
    fn classical_sample_identity() {
        let out = run_classical(3, 0.25);
        let total: u64 = out
            .ledger
            .iter()
            .filter(|r| r.kind == OracleKind::ClassicalSample)
            .map(|r| r.count)
            .sum();
        let expect = classical_fh_cost(2, 2, 2, epoch_count(2, 0.05), 0.1, 0.25);
        assert_eq!(total, expect);
    }

    #[test]
    fn classical_zero_rewards() {
        let m = FiniteMdp::new(2, 2, m2_kernel(), vec![0.0; 4]).unwrap();
        let env = PlanEnv::Finite(&m);
        let mut ledger = QueryLedger::new();
        let mut rng = SamplerConfig::new(0, 0).rng();
        let out = classical_backward_induction(
            &env,
            HorizonSpec(3),
            0.1,
            0.1,
            &HolderParams::zero(),
            1.0 / 64.0,
            &mut ledger,
            0,
            &mut rng,
        )
        .unwrap();
        assert!(out.u.iter().flatten().all(|&x| x == 0.0));
    }

    fn m2_kernel() -> Vec<f64> {
        let m = m2();
        (0..2)
            .flat_map(|s| (0..2).flat_map(move |a| (0..2).map(move |j| (s, a, j))))
            .map(|(s, a, j)| m.row(s, a)[j])
            .collect()
    }

    #[test]
    fn modern_signed_worst_stays_inside_shift_budget() {
        let m = m2();
        let env = PlanEnv::Finite(&m);
        let qcfg = QuantumEmulationConfig::with_mode(NoiseMode::SignedWorst);
        for seed in 0..200 {
            let mut ledger = QueryLedger::new();
            let mut rng = SamplerConfig::new(seed, 0).rng();
            let out = quantum_modern_backward_induction(
                &env,
                HorizonSpec(2),
                0.05,
                0.1,
                &HolderParams::zero(),
                &qcfg,
                &mut ledger,
                0,
                &mut rng,
            )
            .unwrap();
            let pv = policy_value_finite(&m, &out.policy, HorizonSpec(2)).unwrap();
            assert!(pv.values[0][0] >= 1.375, "seed {seed}: {}", pv.values[0][0]);
        }
    }

    #[test]
    fn modern_exact_noise_returns_optimal_policy() {
        let m = m2();
        let env = PlanEnv::Finite(&m);
        let qcfg = QuantumEmulationConfig::exact();
        let mut ledger = QueryLedger::new();
        let mut rng = SamplerConfig::new(0, 0).rng();
        let out = quantum_modern_backward_induction(
            &env,
            HorizonSpec(2),
            0.05,
            0.1,
            &HolderParams::zero(),
            &qcfg,
            &mut ledger,
            0,
            &mut rng,
        )
        .unwrap();
        let (_, opt) = exact_backward_induction(&m, HorizonSpec(2)).unwrap();
        assert_eq!(out.policy.rule(0), opt.rule(0));
    }

    #[test]
    fn modern_charge_identity() {
        let m = m2();
        let env = PlanEnv::Finite(&m);
        let qcfg = QuantumEmulationConfig::default();
        let mut ledger = QueryLedger::new();
        let mut rng = SamplerConfig::new(1, 0).rng();
        let out = quantum_modern_backward_induction(
            &env,
            HorizonSpec(2),
            0.05,
            0.1,
            &HolderParams::zero(),
            &qcfg,
            &mut ledger,
            0,
            &mut rng,
        )
        .unwrap();
        let charged: u64 = out
            .ledger
            .iter()
            .filter(|r| matches!(r.kind, OracleKind::QMean | OracleKind::QMeanMulti))
            .map(|r| r.count)
            .sum();
        assert_eq!(charged, modern_fh_cost(2, 2, 2, epoch_count(2, 0.05), 0.1, &qcfg));
    }

    #[test]
    fn simple_uniform_recovers_optimal_policy() {
        // "optimal" in value: M2's state-1 actions are identical, so argmax
        // identity is not required there
        let m = m2();
        let env = PlanEnv::Finite(&m);
        let (v_star, _) = exact_backward_induction(&m, HorizonSpec(2)).unwrap();
        let qcfg = QuantumEmulationConfig::with_mode(NoiseMode::Uniform);
        let mut hits = 0;
        for seed in 0..200 {
            let mut ledger = QueryLedger::new();
            let mut rng = SamplerConfig::new(seed, 0).rng();
            let out = quantum_simple_backward_induction(
                &env,
                HorizonSpec(2),
                0.05,
                0.1,
                &HolderParams::zero(),
                &qcfg,
                &mut ledger,
                0,
                &mut rng,
            )
            .unwrap();
            let pv = policy_value_finite(&m, &out.policy, HorizonSpec(2)).unwrap();
            let optimal = (0..2).all(|t| (0..2).all(|s| (pv.values[t][s] - v_star[t][s]).abs() < 1e-12));
            if optimal {
                hits += 1;
            }
        }
        assert!(hits >= 180, "value-optimal policy in only {hits}/200 runs");
    }

    #[test]
    fn simple_h1_needs_no_transition_queries() {
        let m = m2();
        let env = PlanEnv::Finite(&m);
        let qcfg = QuantumEmulationConfig::default();
        let mut ledger = QueryLedger::new();
        let mut rng = SamplerConfig::new(0, 0).rng();
        let out = quantum_simple_backward_induction(
            &env,
            HorizonSpec(1),
            0.05,
            0.1,
            &HolderParams::zero(),
            &qcfg,
            &mut ledger,
            0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(ledger.total_budgeted(), 0);
        match out.policy.rule(0) {
            DecisionRule::Deterministic(a) => assert_eq!(a, &vec![1, 0]),
            _ => panic!(),
        }
    }

    #[test]
    fn planner_output_is_deterministic_and_serializable() {
        let a = run_classical(5, 0.25);
        let b = run_classical(5, 0.25);
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn error_halving_per_epoch() {
        // suboptimality of pi^(k), measured exactly, is within eps_k for at
        // least (1 - delta) of seeds at every epoch
        let m = m2();
        let (v_star, _) = exact_backward_induction(&m, HorizonSpec(2)).unwrap();
        let seeds = 200;
        let mut ok_per_epoch = vec![0u32; epoch_count(2, 0.05)];
        for seed in 0..seeds {
            let out = run_classical(seed, 0.125);
            for (k, ep) in out.epochs.iter().enumerate() {
                let pv = policy_value_finite(&m, &ep.policy, HorizonSpec(2)).unwrap();
                let subopt = (0..2)
                    .map(|s| v_star[0][s] - pv.values[0][s])
                    .fold(f64::NEG_INFINITY, f64::max);
                if subopt <= ep.eps_k + 1e-12 {
                    ok_per_epoch[k] += 1;
                }
            }
        }
        let needed = (seeds as f64 * 0.9
            - 3.0 * (seeds as f64 * 0.1 * 0.9).sqrt()) as u32;
        for (k, &ok) in ok_per_epoch.iter().enumerate() {
            assert!(ok >= needed, "epoch {k}: suboptimality <= eps_k on only {ok}/{seeds}");
        }
    }

    #[test]
    fn monotone_epochs_hold_exactly() {
        let out = run_classical(7, 0.25);
        for w in out.epochs.windows(2) {
            for t in 0..2 {
                for s in 0..2 {
                    assert!(w[1].u[t][s] >= w[0].u[t][s]);
                }
            }
        }
    }
}
