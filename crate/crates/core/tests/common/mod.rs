//! Shared test oracles: fully random MDPs (beyond the mixing family) and the
//! exact forward-propagation sums used to verify the total-variance bounds.
//! These are independent of the planner implementation paths they check.

#![allow(dead_code)]

use genmdp::*;
use rand::{Rng, SeedableRng};

/// Fully random row-stochastic MDP (normalized uniforms, strictly positive).
pub fn arbitrary_mdp(s: usize, a: usize, seed: u64) -> FiniteMdp {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = Vec::with_capacity(s * a * s);
    for _ in 0..s * a {
        let raw: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let sum: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        let err: f64 = 1.0 - row.iter().sum::<f64>();
        row[0] += err;
        kernel.extend(row);
    }
    let rewards: Vec<f64> = (0..s * a).map(|_| rng.gen()).collect();
    FiniteMdp::new(s, a, kernel, rewards).unwrap()
}

/// M2 fixture as a finite MDP.
pub fn m2() -> FiniteMdp {
    match fixture("M2").unwrap() {
        FixtureKind::Finite(m) => m,
        _ => unreachable!(),
    }
}

pub fn riverswim6() -> FiniteMdp {
    match fixture("riverswim6").unwrap() {
        FixtureKind::Finite(m) => m,
        _ => unreachable!(),
    }
}

/// Exact value of
/// `sum_{t'=t}^{H-1} E_pi[ sqrt(sigma^pi_{t'+1}(x_{t'}, pi(x_{t'}))) | x_t = x0 ]`
/// by forward distribution propagation.
pub fn propagated_sqrt_sigma_sum(
    mdp: &FiniteMdp,
    pi: &Policy,
    pv: &PolicyValue,
    x0: usize,
    t: usize,
) -> f64 {
    let h = pi.horizon();
    let a = mdp.num_actions();
    let tail = Policy(pi.0[t - 1..].to_vec());
    let dists = forward_distributions(mdp, &tail, x0).unwrap();
    let mut total = 0.0;
    for tp in t..=h.saturating_sub(1) {
        let dist = &dists[tp - t];
        for (st, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let act = match pi.rule(tp - 1) {
                DecisionRule::Deterministic(v) => v[st],
                _ => unreachable!("tests use deterministic policies"),
            };
            total += w * pv.sigma[tp][st * a + act].sqrt();
        }
    }
    total
}

/// Exact value of the doubly-summed variance
/// `sum_{k=1}^{H} sum_{t'=t}^{H-1} E_pi[ sigma^pi_k(x_{t'}, pi(x_{t'})) ]`.
pub fn propagated_double_sigma_sum(
    mdp: &FiniteMdp,
    pi: &Policy,
    pv: &PolicyValue,
    x0: usize,
    t: usize,
) -> f64 {
    let h = pi.horizon();
    let a = mdp.num_actions();
    let tail = Policy(pi.0[t - 1..].to_vec());
    let dists = forward_distributions(mdp, &tail, x0).unwrap();
    let mut total = 0.0;
    for k in 1..=h {
        for tp in t..=h.saturating_sub(1) {
            let dist = &dists[tp - t];
            for (st, &w) in dist.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let act = match pi.rule(tp - 1) {
                    DecisionRule::Deterministic(v) => v[st],
                    _ => unreachable!("tests use deterministic policies"),
                };
                total += w * pv.sigma[k - 1][st * a + act];
            }
        }
    }
    total
}

/// Random deterministic policy.
pub fn random_policy(s: usize, a: usize, h: usize, rng: &mut impl Rng) -> Policy {
    Policy(
        (0..h)
            .map(|_| DecisionRule::Deterministic((0..s).map(|_| rng.gen_range(0..a)).collect()))
            .collect(),
    )
}
