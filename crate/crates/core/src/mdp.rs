//! Exact finite-MDP semantics: Bellman operators, backward induction, policy
//! evaluation with per-(s,a) variances, gains and biases of stationary
//! policies, the average-reward optimality pair (g*, h*), and the Doeblin
//! ergodicity coefficient certifying span contraction.
//!
//! Everything here is deterministic dense computation at `EXACT_TOL`; these
//! routines are the ground truth that every sample-based planner in this
//! workspace is measured against, so they must be far more accurate than any
//! tested epsilon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Convergence tolerance for the exact iterative oracles.
pub const EXACT_TOL: f64 = 1e-9;
/// Sweep cap for the exact iterative oracles.
pub const EXACT_SWEEP_CAP: u64 = 1_000_000;
/// Kernel rows must sum to one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Aperiodicity transform weight: P <- (1-lambda) I + lambda P.
const APERIODICITY_LAMBDA: f64 = 0.5;

/// Tabular MDP with kernel `p(s'|s,a)` and rewards `r(s,a)` in `[0,1]`.
///
/// Kernel is stored row-major as `S*A` rows of length `S`; immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    kernel: Vec<f64>,
    rewards: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteMdpJson {
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "A")]
    a: usize,
    kernel: Vec<f64>,
    rewards: Vec<f64>,
}

impl Serialize for FiniteMdp {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        FiniteMdpJson {
            s: self.num_states,
            a: self.num_actions,
            kernel: self.kernel.clone(),
            rewards: self.rewards.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FiniteMdp {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = FiniteMdpJson::deserialize(de)?;
        FiniteMdp::new(raw.s, raw.a, raw.kernel, raw.rewards).map_err(serde::de::Error::custom)
    }
}

impl FiniteMdp {
    /// Validates row stochasticity (within `ROW_SUM_TOL`) and reward range.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        kernel: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Invalid("state and action counts must be positive".into()));
        }
        if kernel.len() != num_states * num_actions * num_states {
            return Err(Error::Dimension(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                num_states * num_actions * num_states
            )));
        }
        if rewards.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "rewards has {} entries, expected {}",
                rewards.len(),
                num_states * num_actions
            )));
        }
        for (i, row) in kernel.chunks(num_states).enumerate() {
            let mut sum = 0.0;
            for &p in row {
                if !(p >= 0.0) {
                    return Err(Error::Invalid(format!("negative kernel entry in row {i}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Invalid(format!("kernel row {i} sums to {sum}")));
            }
        }
        for (i, &r) in rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Invalid(format!("reward {i} = {r} outside [0,1]")));
            }
        }
        Ok(Self { num_states, num_actions, kernel, rewards })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Kernel row `p(.|s,a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.kernel[base..base + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    /// `max_a r(s,a)` per state with the lowest-index argmax.
    pub fn greedy_reward_rule(&self) -> DecisionRule {
        let actions = (0..self.num_states)
            .map(|s| {
                let mut best = 0;
                for a in 1..self.num_actions {
                    if self.reward(s, a) > self.reward(s, best) {
                        best = a;
                    }
                }
                best
            })
            .collect();
        DecisionRule::Deterministic(actions)
    }
}

/// Number of decision steps of a finite-horizon problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonSpec(pub usize);

impl HorizonSpec {
    pub fn new(h: usize) -> Result<Self> {
        if h == 0 {
            return Err(Error::Invalid("horizon must be >= 1".into()));
        }
        Ok(Self(h))
    }
}

/// One decision rule: an action per state, or a distribution over actions
/// per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DecisionRule {
    Deterministic(Vec<usize>),
    Randomized(Vec<Vec<f64>>),
}

impl DecisionRule {
    pub fn validate(&self, mdp: &FiniteMdp) -> Result<()> {
        match self {
            DecisionRule::Deterministic(actions) => {
                if actions.len() != mdp.num_states() {
                    return Err(Error::Dimension("rule length != num_states".into()));
                }
                if let Some(&bad) = actions.iter().find(|&&a| a >= mdp.num_actions()) {
                    return Err(Error::Invalid(format!("action index {bad} out of range")));
                }
            }
            DecisionRule::Randomized(dists) => {
                if dists.len() != mdp.num_states() {
                    return Err(Error::Dimension("rule length != num_states".into()));
                }
                for (s, d) in dists.iter().enumerate() {
                    if d.len() != mdp.num_actions() {
                        return Err(Error::Dimension(format!("state {s} distribution length")));
                    }
                    let sum: f64 = d.iter().sum();
                    if d.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::Invalid(format!(
                            "state {s} action distribution sums to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Expected reward `r_d(s)` and row `p_d(.|s)` of the induced chain.
    pub fn induced_chain(&self, mdp: &FiniteMdp) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate(mdp)?;
        let n = mdp.num_states();
        let mut r = vec![0.0; n];
        let mut p = vec![0.0; n * n];
        for s in 0..n {
            match self {
                DecisionRule::Deterministic(actions) => {
                    let a = actions[s];
                    r[s] = mdp.reward(s, a);
                    p[s * n..(s + 1) * n].copy_from_slice(mdp.row(s, a));
                }
                DecisionRule::Randomized(dists) => {
                    for (a, &w) in dists[s].iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        r[s] += w * mdp.reward(s, a);
                        for (j, &pj) in mdp.row(s, a).iter().enumerate() {
                            p[s * n + j] += w * pj;
                        }
                    }
                }
            }
        }
        Ok((r, p))
    }

    /// Action chosen in `s`, sampling when randomized.
    pub fn act(&self, s: usize, rng: &mut impl rand::Rng) -> usize {
        match self {
            DecisionRule::Deterministic(actions) => actions[s],
            DecisionRule::Randomized(dists) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (a, &w) in dists[s].iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return a;
                    }
                }
                dists[s].len() - 1
            }
        }
    }
}

/// Finite-horizon policy: one decision rule per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy(pub Vec<DecisionRule>);

impl Policy {
    pub fn horizon(&self) -> usize {
        self.0.len()
    }

    pub fn rule(&self, t: usize) -> &DecisionRule {
        &self.0[t]
    }

    /// Constant policy repeating one rule for `h` steps.
    pub fn stationary(rule: DecisionRule, h: usize) -> Self {
        Policy(vec![rule; h])
    }
}

/// Gain and bias of a stationary policy. `gain` is per state (constant on
/// each recurrent class), `bias` is normalized so `min(bias) = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainBias {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    pub span: f64,
}

impl GainBias {
    pub fn min_gain(&self) -> f64 {
        self.gain.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Solution of the average-cost optimality equation `h* = L h* - g* e`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalAverage {
    pub gain: f64,
    pub bias: Vec<f64>,
    /// `sp(h*)`, the Lambda used as a bias-span bound by the planners.
    pub span: f64,
    pub rule: DecisionRule,
}

/// One-stage span-contraction coefficient estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContractionInfo {
    pub nu: f64,
}

/// Span seminorm `max(u) - min(u)`.
pub fn span(u: &[f64]) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::Empty("span of empty vector"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in u {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi - lo)
}

fn check_u_len(mdp: &FiniteMdp, u: &[f64]) -> Result<()> {
    if u.len() != mdp.num_states() {
        return Err(Error::Dimension(format!(
            "value table has {} entries for {} states",
            u.len(),
            mdp.num_states()
        )));
    }
    Ok(())
}

fn dot(row: &[f64], u: &[f64]) -> f64 {
    row.iter().zip(u).map(|(p, v)| p * v).sum()
}

/// Optimal Bellman operator `(L u)(s) = max_a { r(s,a) + p(.|s,a) . u }`,
/// with the greedy rule (ties to the lowest action index).
pub fn bellman_apply(mdp: &FiniteMdp, u: &[f64]) -> Result<(Vec<f64>, DecisionRule)> {
    check_u_len(mdp, u)?;
    let mut out = vec![0.0; mdp.num_states()];
    let mut greedy = vec![0usize; mdp.num_states()];
    for s in 0..mdp.num_states() {
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for a in 0..mdp.num_actions() {
            let q = mdp.reward(s, a) + dot(mdp.row(s, a), u);
            if q > best {
                best = q;
                best_a = a;
            }
        }
        out[s] = best;
        greedy[s] = best_a;
    }
    Ok((out, DecisionRule::Deterministic(greedy)))
}

/// Rule-specific Bellman operator `L_d u = r_d + P_d u`.
pub fn bellman_apply_rule(mdp: &FiniteMdp, u: &[f64], rule: &DecisionRule) -> Result<Vec<f64>> {
    check_u_len(mdp, u)?;
    let (r, p) = rule.induced_chain(mdp)?;
    let n = mdp.num_states();
    Ok((0..n).map(|s| r[s] + dot(&p[s * n..(s + 1) * n], u)).collect())
}

/// Exact dynamic program: `V*_t = L V*_{t+1}` with `V*_{H+1} = 0`, plus the
/// greedy optimal policy. Index `t` of the returned vec is time `t+1`.
pub fn exact_backward_induction(mdp: &FiniteMdp, h: HorizonSpec) -> Result<(Vec<Vec<f64>>, Policy)> {
    let mut values = vec![vec![0.0; mdp.num_states()]; h.0];
    let mut rules: Vec<DecisionRule> = Vec::with_capacity(h.0);
    let mut next = vec![0.0; mdp.num_states()];
    for t in (0..h.0).rev() {
        let (v, rule) = bellman_apply(mdp, &next)?;
        values[t] = v.clone();
        rules.push(rule);
        next = v;
    }
    rules.reverse();
    Ok((values, Policy(rules)))
}

/// Exact evaluation of a finite-horizon policy.
#[derive(Debug, Clone)]
pub struct PolicyValue {
    /// `values[t-1][s] = V^pi_t(s)` for `t in 1..=H`.
    pub values: Vec<Vec<f64>>,
    /// `sigma[t-1][s*A + a] = Var_{p(.|s,a)}( V^pi_t )` for `t in 1..=H`.
    pub sigma: Vec<Vec<f64>>,
}

/// `V^pi_t` by exact backward evaluation, with the per-(s,a) variances of
/// `V^pi_t` under each kernel row.
pub fn policy_value_finite(mdp: &FiniteMdp, pi: &Policy, h: HorizonSpec) -> Result<PolicyValue> {
    if pi.horizon() != h.0 {
        return Err(Error::Dimension(format!(
            "policy has {} rules for horizon {}",
            pi.horizon(),
            h.0
        )));
    }
    let n = mdp.num_states();
    let na = mdp.num_actions();
    let mut values = vec![vec![0.0; n]; h.0];
    let mut next = vec![0.0; n];
    for t in (0..h.0).rev() {
        let v = bellman_apply_rule(mdp, &next, pi.rule(t))?;
        values[t] = v.clone();
        next = v;
    }
    let mut sigma = vec![vec![0.0; n * na]; h.0];
    for t in 0..h.0 {
        let v = &values[t];
        for s in 0..n {
            for a in 0..na {
                let row = mdp.row(s, a);
                let mean = dot(row, v);
                let mean_sq: f64 = row.iter().zip(v).map(|(p, x)| p * x * x).sum();
                sigma[t][s * na + a] = (mean_sq - mean * mean).max(0.0);
            }
        }
    }
    Ok(PolicyValue { values, sigma })
}

/// State distribution at times `1..=H` following `pi` from `x0` at time 1.
pub fn forward_distributions(mdp: &FiniteMdp, pi: &Policy, x0: usize) -> Result<Vec<Vec<f64>>> {
    if x0 >= mdp.num_states() {
        return Err(Error::Invalid(format!("start state {x0} out of range")));
    }
    let n = mdp.num_states();
    let h = pi.horizon();
    let mut dists = Vec::with_capacity(h);
    let mut cur = vec![0.0; n];
    cur[x0] = 1.0;
    dists.push(cur.clone());
    for t in 0..h.saturating_sub(1) {
        let (_, p) = pi.rule(t).induced_chain(mdp)?;
        let mut next = vec![0.0; n];
        for s in 0..n {
            if cur[s] == 0.0 {
                continue;
            }
            for j in 0..n {
                next[j] += cur[s] * p[s * n + j];
            }
        }
        cur = next;
        dists.push(cur.clone());
    }
    Ok(dists)
}

/// Strongly connected components of the support digraph (iterative Tarjan),
/// flagged by whether the component is closed (no edge leaving it).
fn recurrent_classes(p: &[f64], n: usize) -> Vec<Vec<usize>> {
    // adjacency on the support of P
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|s| (0..n).filter(|&j| p[s * n + j] > 0.0).collect())
        .collect();

    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // explicit DFS stack: (node, next child position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut ci)) = call.last_mut() {
            if *ci < adj[v].len() {
                let w = adj[v][*ci];
                *ci += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp_of[w] = comps.len();
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
                call.pop();
                if let Some(&mut (parent, _)) = call.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }

    comps
        .into_iter()
        .filter(|comp| {
            comp.iter().all(|&s| {
                adj[s].iter().all(|&j| comp_of[j] == comp_of[comp[0]])
            })
        })
        .collect()
}

/// Stationary distribution of the chain restricted to a closed class.
fn class_stationary(p: &[f64], n: usize, class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    // (P_C^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (ri, &i) in class.iter().enumerate() {
        for (rj, &j) in class.iter().enumerate() {
            a[ri * m + rj] = p[j * n + i] - if ri == rj { 1.0 } else { 0.0 };
        }
    }
    for rj in 0..m {
        a[(m - 1) * m + rj] = 1.0;
    }
    b[m - 1] = 1.0;
    linalg::solve(&a, &b)
}

/// Gain and bias of the stationary policy `d^infinity` via the Cesaro-limit
/// projector: per-class stationary distributions, harmonic extension of the
/// gain to transient states, and the deviation solve
/// `(I - P + P*) h = (I - P*) r`.
pub fn gain_bias_of_stationary(mdp: &FiniteMdp, d: &DecisionRule) -> Result<GainBias> {
    let (r, p) = d.induced_chain(mdp)?;
    let n = mdp.num_states();

    let classes = recurrent_classes(&p, n);
    if classes.is_empty() {
        return Err(Error::NoConvergence {
            sweeps: 0,
            context: "no closed recurrent class found".into(),
        });
    }

    let mut in_class = vec![usize::MAX; n];
    let mut class_gain = vec![0.0; classes.len()];
    let mut stationary: Vec<Vec<f64>> = Vec::with_capacity(classes.len());
    for (c, class) in classes.iter().enumerate() {
        let pi_c = class_stationary(&p, n, class)?;
        class_gain[c] = class.iter().zip(&pi_c).map(|(&s, &w)| w * r[s]).sum();
        for &s in class {
            in_class[s] = c;
        }
        stationary.push(pi_c);
    }

    let transient: Vec<usize> = (0..n).filter(|&s| in_class[s] == usize::MAX).collect();

    // Absorption probabilities of transient states into each class:
    // (I - P_TT) B = P_TR 1_C, one rhs per class.
    let mut absorb = vec![vec![0.0; classes.len()]; n];
    for (c, class) in classes.iter().enumerate() {
        for &s in class {
            absorb[s][c] = 1.0;
        }
    }
    if !transient.is_empty() {
        let m = transient.len();
        let mut a = vec![0.0; m * m];
        for (ri, &i) in transient.iter().enumerate() {
            for (rj, &j) in transient.iter().enumerate() {
                a[ri * m + rj] = if ri == rj { 1.0 } else { 0.0 } - p[i * n + j];
            }
        }
        let rhs: Vec<Vec<f64>> = (0..classes.len())
            .map(|c| {
                transient
                    .iter()
                    .map(|&i| {
                        (0..n)
                            .filter(|&j| in_class[j] == c)
                            .map(|j| p[i * n + j])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let sols = linalg::solve_multi(&a, &rhs)?;
        for (c, sol) in sols.iter().enumerate() {
            for (ri, &s) in transient.iter().enumerate() {
                absorb[s][c] = sol[ri];
            }
        }
    }

    let gain: Vec<f64> = (0..n)
        .map(|s| (0..classes.len()).map(|c| absorb[s][c] * class_gain[c]).sum())
        .collect();

    // Cesaro projector P*(s, j) = sum_c absorb(s,c) pi_c(j)
    let mut proj = vec![0.0; n * n];
    for s in 0..n {
        for (c, class) in classes.iter().enumerate() {
            let w = absorb[s][c];
            if w == 0.0 {
                continue;
            }
            for (k, &j) in class.iter().enumerate() {
                proj[s * n + j] += w * stationary[c][k];
            }
        }
    }

    // (I - P + P*) h = (I - P*) r
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        for j in 0..n {
            a[s * n + j] =
                if s == j { 1.0 } else { 0.0 } - p[s * n + j] + proj[s * n + j];
        }
        b[s] = r[s] - dot(&proj[s * n..(s + 1) * n], &r);
    }
    let mut bias = linalg::solve(&a, &b)?;
    let min_h = bias.iter().cloned().fold(f64::INFINITY, f64::min);
    for v in &mut bias {
        *v -= min_h;
    }

    // evaluation-equation residual: h = r - g + P h
    let mut resid = 0.0f64;
    for s in 0..n {
        let lhs = r[s] - gain[s] + dot(&p[s * n..(s + 1) * n], &bias);
        resid = resid.max((lhs - bias[s]).abs());
    }
    if resid > 1e-7 {
        return Err(Error::NoConvergence {
            sweeps: 0,
            context: format!("evaluation equations residual {resid:.3e}"),
        });
    }

    let span = span(&bias)?;
    Ok(GainBias { gain, bias, span })
}

/// `(g*, h*)` by relative value iteration on the aperiodicity-transformed
/// operator `L~ v = (1-lambda) v + lambda L v`, which leaves both `g*` and
/// `sp(h*)` unchanged while handling periodic chains.
pub fn exact_gain_bias_optimal(mdp: &FiniteMdp) -> Result<OptimalAverage> {
    let n = mdp.num_states();
    let lam = APERIODICITY_LAMBDA;
    let mut v = vec![0.0; n];
    let mut sweeps = 0u64;
    loop {
        sweeps += 1;
        if sweeps > EXACT_SWEEP_CAP {
            return Err(Error::NoConvergence {
                sweeps,
                context: "relative value iteration for (g*, h*); the MDP may not be weakly communicating".into(),
            });
        }
        let (lv, rule) = bellman_apply(mdp, &v)?;
        let delta: Vec<f64> = (0..n).map(|s| (1.0 - lam) * v[s] + lam * lv[s] - v[s]).collect();
        let sp_delta = span(&delta)?;
        if sp_delta <= EXACT_TOL * lam * 0.01 {
            let max_d = delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min_d = delta.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut gain = 0.5 * (max_d + min_d) / lam;
            let min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut bias: Vec<f64> = v.iter().map(|x| x - min_v).collect();
            // polish with the direct evaluation solve of the greedy rule,
            // which is machine-accurate where value iteration carries its
            // stopping tolerance; accept it when it satisfies the optimality
            // equation at least as well
            if let Ok(polish) = gain_bias_of_stationary(mdp, &rule) {
                if span(&polish.gain)? <= EXACT_TOL && (polish.gain[0] - gain).abs() <= 1e-7 {
                    let resid_of = |g: f64, h: &[f64]| -> Result<f64> {
                        let (lh, _) = bellman_apply(mdp, h)?;
                        Ok((0..n)
                            .map(|s| (lh[s] - g - h[s]).abs())
                            .fold(0.0, f64::max))
                    };
                    if resid_of(polish.gain[0], &polish.bias)? <= resid_of(gain, &bias)? {
                        gain = polish.gain[0];
                        bias = polish.bias;
                    }
                }
            }
            // optimality-equation residual check
            let (lh, _) = bellman_apply(mdp, &bias)?;
            let mut resid = 0.0f64;
            for s in 0..n {
                resid = resid.max((lh[s] - gain - bias[s]).abs());
            }
            if resid > EXACT_TOL {
                return Err(Error::NoConvergence {
                    sweeps,
                    context: format!("optimality equation residual {resid:.3e}"),
                });
            }
            let span = span(&bias)?;
            return Ok(OptimalAverage { gain, bias, span, rule });
        }
        // subtract the reference entry to keep iterates bounded
        let shift = (1.0 - lam) * v[0] + lam * lv[0];
        for s in 0..n {
            v[s] = (1.0 - lam) * v[s] + lam * lv[s] - shift;
        }
    }
}

/// Doeblin ergodicity coefficient over all row pairs:
/// `nu = 1 - min_{(s,a),(s',a')} sum_j min{ p(j|s,a), p(j|s',a') }`.
///
/// The optimal Bellman operator is a 1-stage nu-span contraction for this nu.
pub fn ergodicity_coefficient(mdp: &FiniteMdp) -> ContractionInfo {
    let rows: Vec<&[f64]> = (0..mdp.num_states())
        .flat_map(|s| (0..mdp.num_actions()).map(move |a| (s, a)))
        .map(|(s, a)| mdp.row(s, a))
        .collect();
    let mut min_overlap = 1.0f64;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let overlap: f64 = rows[i]
                .iter()
                .zip(rows[j])
                .map(|(&x, &y)| x.min(y))
                .sum();
            min_overlap = min_overlap.min(overlap);
        }
    }
    ContractionInfo { nu: (1.0 - min_overlap).clamp(0.0, 1.0) }
}
