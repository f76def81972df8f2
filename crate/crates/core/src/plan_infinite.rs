//! Average-reward planners under the generative model: sample-based and
//! emulated-quantum approximate value iteration with span-based stopping,
//! the shared clipping step, gain extraction, and the span-contraction
//! certificate that every sweep of a successful run must satisfy.
//!
//! Both planners iterate `u_{t+1} ~= clip(L u_t)` from `u_1 = max_a r`, stop
//! once `sp(u_{t+1} - u_t)` falls below the threshold
//! `3 eps / 2 + 18 (1+Lambda) L n^{-alpha} / (1-nu)`, and report
//! `g_eps = (max + min)(u_last - u_prev) / 2` together with the last greedy
//! rule. The clipping step pulls entries within `eps_u / 2` of the extremes
//! inward, so the iterate span never grows and per-entry perturbation stays
//! within `eps_u / 2`.

use serde::{Deserialize, Serialize};

use crate::discretize::HolderParams;
use crate::env::PlanEnv;
use crate::error::{Error, Result};
use crate::mdp::{span, DecisionRule};
use crate::oracles::{
    charge_composed_q_max, composed_eval_delta, q_max_charge, q_mean_charge, sample_batch,
    LedgerRecord, OracleKind, QueryLedger, QuantumEmulationConfig,
};

const PI_SQ: f64 = std::f64::consts::PI * std::f64::consts::PI;

/// Approximate value-iteration configuration. `eps_u` is derived as
/// `(1 - nu) eps / 4`; `bias_span` is the Lambda upper bound on `sp(h*)`
/// (an assumption of the guarantee, supplied by the caller or auto-filled
/// from the exact oracle on desk-scale models).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VIConfig {
    pub eps: f64,
    pub bias_span: f64,
    pub nu: f64,
    pub delta: f64,
    pub holder: HolderParams,
    /// Multiplier on the sample counts (classical planner only).
    pub scale: f64,
    /// Sweep cap = safety_factor * ceil(log(1/eps)/log(1/nu)).
    pub safety_factor: u64,
}

impl VIConfig {
    pub fn new(eps: f64, bias_span: f64, nu: f64, delta: f64) -> Self {
        Self {
            eps,
            bias_span,
            nu,
            delta,
            holder: HolderParams::zero(),
            scale: 1.0,
            safety_factor: 10,
        }
    }

    pub fn eps_u(&self) -> f64 {
        0.25 * (1.0 - self.nu) * self.eps
    }

    pub fn validate(&self, slack: f64) -> Result<()> {
        if self.eps <= 0.0 {
            return Err(Error::Invalid("eps must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Invalid("delta must lie in (0,1)".into()));
        }
        if !(0.0..1.0).contains(&self.nu) {
            return Err(Error::Invalid(format!("nu = {} outside [0,1)", self.nu)));
        }
        if self.bias_span < 0.0 {
            return Err(Error::Invalid("bias span bound must be nonnegative".into()));
        }
        if self.scale <= 0.0 {
            return Err(Error::Invalid("constant-scale must be positive".into()));
        }
        if self.nu > 0.0 {
            if self.eps > 2.0 / self.nu + 1e-12 {
                return Err(Error::Hypothesis(format!(
                    "eps = {} exceeds 2/nu = {}",
                    self.eps,
                    2.0 / self.nu
                )));
            }
            if slack > (1.0 - self.nu) / self.nu + 1e-12 {
                return Err(Error::Hypothesis(format!(
                    "L n^-alpha = {slack:.6} exceeds (1-nu)/nu = {:.6}",
                    (1.0 - self.nu) / self.nu
                )));
            }
        }
        Ok(())
    }

    pub fn stopping_threshold(&self, slack: f64) -> f64 {
        1.5 * self.eps + 18.0 * (1.0 + self.bias_span) * slack / (1.0 - self.nu)
    }

    pub fn sweep_cap(&self) -> u64 {
        let base = if self.nu > 0.0 {
            ((1.0 / self.eps).ln() / (1.0 / self.nu).ln()).ceil().max(1.0) as u64
        } else {
            1
        };
        self.safety_factor * base
    }

    /// The guarantee's sweep bound `t*`; actual runs stopping later than this
    /// (plus slack) are evidence against the contraction hypothesis.
    pub fn guarantee_sweep_bound(&self, slack: f64) -> u64 {
        if self.nu == 0.0 {
            return 1;
        }
        let eu = self.eps_u();
        let lb = (1.0 + self.bias_span) * slack;
        let num = (1.0 - self.nu) * (1.0 + 2.0 * eu + 8.0 * lb);
        let den = 2.0 * eu + 2.0 * lb;
        if num <= den {
            return 1;
        }
        ((num / den).ln() / (1.0 / self.nu).ln()).ceil().max(1.0) as u64
    }

    /// Per-(s,a) sample count of sweep `t` for the classical planner.
    pub fn m_t(&self, t: u64, s_n: usize, a: usize) -> u64 {
        let one_minus = 1.0 - self.nu;
        let cap = (4.0 * (1.0 + self.bias_span).powi(2))
            .min(self.bias_span.powi(2) / one_minus.powi(2));
        let ln_t = (PI_SQ * (t as f64).powi(2) * s_n as f64 * a as f64 / (6.0 * self.delta)).ln();
        (self.scale * 512.0 / (one_minus.powi(2) * self.eps.powi(2)) * cap * ln_t)
            .ceil()
            .max(1.0) as u64
    }
}

/// Per-sweep diagnostics: sample counts or emulated charges, the iterate
/// span, and the stopping span after the backup.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepDiag {
    pub t: u64,
    pub m_t: Option<u64>,
    pub inner: Option<u64>,
    pub per_eval: Option<u64>,
    pub sp_u: f64,
    pub sp_diff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VIOutput {
    pub mode: String,
    pub eps: f64,
    pub rule: DecisionRule,
    pub gain_estimate: f64,
    /// Backups executed.
    pub sweeps: u64,
    /// `sp(u_t - u_{t-1})` for t = 1, 2, ... (the stopping sequence; entry 0
    /// is checked before any sampling happens).
    pub span_history: Vec<f64>,
    pub diags: Vec<SweepDiag>,
    pub u_last: Vec<f64>,
    pub u_prev: Vec<f64>,
    pub ledger: Vec<LedgerRecord>,
}

/// Pull entries within `eps_u / 2` of the max down and entries within
/// `eps_u / 2` of the min up; the span never increases and no entry moves by
/// more than `eps_u / 2`.
pub fn clip_update(u_tilde: &[f64], eps_u: f64) -> Vec<f64> {
    let hi = u_tilde.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = u_tilde.iter().cloned().fold(f64::INFINITY, f64::min);
    u_tilde
        .iter()
        .map(|&v| {
            if v >= hi - eps_u / 2.0 {
                (hi - eps_u / 2.0).max(lo)
            } else if v <= lo + eps_u / 2.0 {
                (lo + eps_u / 2.0).min(hi)
            } else {
                v
            }
        })
        .collect()
}

/// Reward-greedy rule, the fallback when the loop stops before any backup.
fn greedy_reward_rule(env: &PlanEnv) -> Vec<usize> {
    (0..env.num_states())
        .map(|s| {
            let mut best = 0usize;
            for a in 1..env.num_actions() {
                if env.reward(s, a) > env.reward(s, best) {
                    best = a;
                }
            }
            best
        })
        .collect()
}

fn u1_init(env: &PlanEnv) -> Vec<f64> {
    (0..env.num_states())
        .map(|s| {
            (0..env.num_actions())
                .map(|a| env.reward(s, a))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn phase_snapshot(ledger: &QueryLedger, phase: u32) -> Vec<LedgerRecord> {
    ledger.snapshot().into_iter().filter(|r| r.phase == phase).collect()
}

/// Classical samples the classical planner would use if it ran for
/// `sweeps` backups.
pub fn classical_vi_cost(cfg: &VIConfig, s_n: usize, a: usize, sweeps: u64) -> u64 {
    (1..=sweeps).map(|t| cfg.m_t(t, s_n, a) * s_n as u64 * a as u64).sum()
}

/// Transition-oracle queries the quantum planner would charge over `sweeps`
/// backups, bounding the iterate span by `min{4 Lambda + 3, 2 Lambda/(1-nu)}`.
pub fn quantum_vi_cost(cfg: &VIConfig, s_n: usize, a: usize, sweeps: u64, qcfg: &QuantumEmulationConfig) -> u64 {
    let sp_bound = (4.0 * cfg.bias_span + 3.0).min(if cfg.nu < 1.0 {
        2.0 * cfg.bias_span / (1.0 - cfg.nu)
    } else {
        f64::INFINITY
    });
    let eps_u = cfg.eps_u();
    (1..=sweeps)
        .map(|t| {
            let delta1 = 6.0 * cfg.delta / (PI_SQ * (t as f64).powi(2) * s_n as f64);
            let delta2 = composed_eval_delta(a, delta1);
            let inner = q_max_charge(a, delta1, qcfg.c_max);
            let per_eval = if sp_bound > 0.0 {
                q_mean_charge(eps_u / (2.0 * sp_bound), delta2, qcfg.c_mean)
            } else {
                1
            };
            s_n as u64 * inner * per_eval
        })
        .sum()
}

/// Algorithm: classical approximate value iteration.
pub fn classical_value_iteration(
    env: &PlanEnv,
    cfg: &VIConfig,
    ledger: &mut QueryLedger,
    phase: u32,
    rng: &mut impl rand::Rng,
) -> Result<VIOutput> {
    let slack = env.holder_slack(&cfg.holder);
    cfg.validate(slack)?;
    let (s_n, a_n) = (env.num_states(), env.num_actions());
    let eps_u = cfg.eps_u();
    let threshold = cfg.stopping_threshold(slack);
    let cap = cfg.sweep_cap();

    let mut u_prev = vec![0.0; s_n];
    let mut u_cur = u1_init(env);
    let mut actions: Option<Vec<usize>> = None;
    let mut span_history = vec![diff_span(&u_cur, &u_prev)?];
    let mut diags = Vec::new();
    let mut t: u64 = 1;

    while *span_history.last().unwrap() > threshold {
        if t > cap {
            return Err(Error::NoConvergence {
                sweeps: t - 1,
                context: format!(
                    "span {:.4} still above stopping threshold {threshold:.4}; the contraction hypothesis (nu = {}) looks violated",
                    span_history.last().unwrap(),
                    cfg.nu
                ),
            });
        }
        let m_t = cfg.m_t(t, s_n, a_n);
        let sp_u = span(&u_cur)?;
        // subtract min(u) before averaging so the Hoeffding range is the span
        let min_u = u_cur.iter().cloned().fold(f64::INFINITY, f64::min);
        let u_shift: Vec<f64> = u_cur.iter().map(|v| v - min_u).collect();
        let mut u_tilde = vec![0.0; s_n];
        let mut acts = vec![0usize; s_n];
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0usize;
            for a in 0..a_n {
                let counts = sample_batch(env, s, a, m_t, ledger, phase, rng)?;
                let mut mean = 0.0;
                for (j, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        mean += c as f64 / m_t as f64 * u_shift[j];
                    }
                }
                let q = env.reward(s, a) + mean + min_u;
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            u_tilde[s] = best;
            acts[s] = best_a;
        }
        let u_next = clip_update(&u_tilde, eps_u);
        let sp_diff = diff_span(&u_next, &u_cur)?;
        diags.push(SweepDiag { t, m_t: Some(m_t), inner: None, per_eval: None, sp_u, sp_diff });
        span_history.push(sp_diff);
        u_prev = std::mem::replace(&mut u_cur, u_next);
        actions = Some(acts);
        t += 1;
    }

    let gain_estimate = half_max_plus_min(&u_cur, &u_prev);
    let rule = DecisionRule::Deterministic(actions.unwrap_or_else(|| greedy_reward_rule(env)));
    Ok(VIOutput {
        mode: "classical".into(),
        eps: cfg.eps,
        rule,
        gain_estimate,
        sweeps: t - 1,
        span_history,
        diags,
        u_last: u_cur,
        u_prev,
        ledger: phase_snapshot(ledger, phase),
    })
}

/// Algorithm: quantum value iteration (emulated): per state an emulated mean
/// unitary at accuracy `eps_u / 2` composed inside emulated max-finding over
/// actions.
pub fn quantum_value_iteration(
    env: &PlanEnv,
    cfg: &VIConfig,
    qcfg: &QuantumEmulationConfig,
    ledger: &mut QueryLedger,
    phase: u32,
    rng: &mut impl rand::Rng,
) -> Result<VIOutput> {
    let slack = env.holder_slack(&cfg.holder);
    cfg.validate(slack)?;
    qcfg.validate()?;
    let (s_n, a_n) = (env.num_states(), env.num_actions());
    let eps_u = cfg.eps_u();
    let threshold = cfg.stopping_threshold(slack);
    let cap = cfg.sweep_cap();

    let mut u_prev = vec![0.0; s_n];
    let mut u_cur = u1_init(env);
    // u_1 is found by max-finding over the known rewards (no p-oracle use)
    let delta_init = 6.0 * cfg.delta / (PI_SQ * s_n as f64);
    for _ in 0..s_n {
        ledger.charge(OracleKind::QMaxInner, phase, q_max_charge(a_n, delta_init, qcfg.c_max))?;
    }

    let mut actions: Option<Vec<usize>> = None;
    let mut span_history = vec![diff_span(&u_cur, &u_prev)?];
    let mut diags = Vec::new();
    let mut t: u64 = 1;

    while *span_history.last().unwrap() > threshold {
        if t > cap {
            return Err(Error::NoConvergence {
                sweeps: t - 1,
                context: format!(
                    "span {:.4} still above stopping threshold {threshold:.4}; the contraction hypothesis (nu = {}) looks violated",
                    span_history.last().unwrap(),
                    cfg.nu
                ),
            });
        }
        let sp_u = span(&u_cur)?;
        let avg_u = u_cur.iter().sum::<f64>() / s_n as f64;
        let delta1 = 6.0 * cfg.delta / (PI_SQ * (t as f64).powi(2) * s_n as f64);
        let delta2 = composed_eval_delta(a_n, delta1);
        let per_eval = if sp_u > 0.0 {
            q_mean_charge(eps_u / (2.0 * sp_u), delta2, qcfg.c_mean)
        } else {
            1
        };
        let mut u_tilde = vec![0.0; s_n];
        let mut acts = vec![0usize; s_n];
        let mut inner_used = 0;
        for s in 0..s_n {
            let mut values = vec![0.0; a_n];
            for (a, v) in values.iter_mut().enumerate() {
                let row = env.row(s, a)?;
                *v = env.reward(s, a) + row.mean(&u_cur, avg_u) + qcfg.noise(eps_u / 2.0, rng);
            }
            let (inner, _) = charge_composed_q_max(a_n, delta1, per_eval, ledger, phase, qcfg)?;
            inner_used = inner;
            let mut best = 0usize;
            for (a, &v) in values.iter().enumerate() {
                if v > values[best] {
                    best = a;
                }
            }
            u_tilde[s] = values[best];
            acts[s] = best;
        }
        let u_next = clip_update(&u_tilde, eps_u);
        let sp_diff = diff_span(&u_next, &u_cur)?;
        diags.push(SweepDiag {
            t,
            m_t: None,
            inner: Some(inner_used),
            per_eval: Some(per_eval),
            sp_u,
            sp_diff,
        });
        span_history.push(sp_diff);
        u_prev = std::mem::replace(&mut u_cur, u_next);
        actions = Some(acts);
        t += 1;
    }

    let gain_estimate = half_max_plus_min(&u_cur, &u_prev);
    let rule = DecisionRule::Deterministic(actions.unwrap_or_else(|| greedy_reward_rule(env)));
    Ok(VIOutput {
        mode: "quantum".into(),
        eps: cfg.eps,
        rule,
        gain_estimate,
        sweeps: t - 1,
        span_history,
        diags,
        u_last: u_cur,
        u_prev,
        ledger: phase_snapshot(ledger, phase),
    })
}

fn diff_span(a: &[f64], b: &[f64]) -> Result<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    span(&d)
}

fn half_max_plus_min(a: &[f64], b: &[f64]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (x, y) in a.iter().zip(b) {
        hi = hi.max(x - y);
        lo = lo.min(x - y);
    }
    0.5 * (hi + lo)
}

/// Per-sweep span bound of the contraction lemma:
/// `nu^t (sp0 + 2 eps_eff) + 4 eps_eff (1 - nu^t) / (1 - nu)`, paired with
/// the observed `sp(u_{t+1} - u_t)`.
pub fn robust_vi_span_certificate(
    span_history: &[f64],
    eps_eff: f64,
    nu: f64,
    sp0: f64,
) -> Vec<(f64, f64)> {
    span_history
        .iter()
        .enumerate()
        .map(|(t, &observed)| {
            let nu_t = nu.powi(t as i32);
            let geom = if nu < 1.0 { (1.0 - nu_t) / (1.0 - nu) } else { t as f64 };
            (observed, nu_t * (sp0 + 2.0 * eps_eff) + 4.0 * eps_eff * geom)
        })
        .collect()
}

/// True when every observed span is within its lemma bound (with a small
/// numerical allowance).
pub fn certificate_holds(pairs: &[(f64, f64)]) -> bool {
    pairs.iter().all(|&(obs, bound)| obs <= bound + 1e-12)
}
