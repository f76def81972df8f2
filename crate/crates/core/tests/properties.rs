//! Property suites for the exact operators and the emulated oracles:
//! Bellman monotonicity / non-expansiveness / span contraction, the
//! total-variance bounds checked by exact forward propagation, optimal-gain
//! dominance over enumerated stationary policies, net covering, and the
//! emulation error contracts.

mod common;

use common::{arbitrary_mdp, propagated_double_sigma_sum, propagated_sqrt_sigma_sum, random_policy};
use proptest::prelude::*;

use genmdp::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_monotone(seed in 0u64..1000, s in 2usize..5, a in 1usize..4) {
        let m = arbitrary_mdp(s, a, seed);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
        let u: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let v: Vec<f64> = u.iter().map(|x| x + rng.gen::<f64>()).collect(); // v >= u
        let (lu, _) = bellman_apply(&m, &u).unwrap();
        let (lv, _) = bellman_apply(&m, &v).unwrap();
        for i in 0..s {
            prop_assert!(lu[i] <= lv[i] + 1e-12);
        }
    }

    #[test]
    fn bellman_nonexpansive(seed in 0u64..1000, s in 2usize..5, a in 1usize..4) {
        let m = arbitrary_mdp(s, a, seed);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 2);
        let u: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let v: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let (lu, _) = bellman_apply(&m, &u).unwrap();
        let (lv, _) = bellman_apply(&m, &v).unwrap();
        let d: Vec<f64> = lu.iter().zip(&lv).map(|(x, y)| x - y).collect();
        let dv: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x - y).collect();
        prop_assert!(span(&d).unwrap() <= span(&dv).unwrap() + 1e-12);
        let sup = |w: &[f64]| w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        prop_assert!(sup(&d) <= sup(&dv) + 1e-12);
    }

    #[test]
    fn bellman_span_contraction(seed in 0u64..1000, s in 2usize..5, a in 1usize..3) {
        // the mixing family has a usable Doeblin coefficient
        let m = generate_random_mdp(s, a, 0.3, seed).unwrap();
        let nu = ergodicity_coefficient(&m).nu;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 3);
        let u: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let v: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let (lu, _) = bellman_apply(&m, &u).unwrap();
        let (lv, _) = bellman_apply(&m, &v).unwrap();
        let d: Vec<f64> = lu.iter().zip(&lv).map(|(x, y)| x - y).collect();
        let dv: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x - y).collect();
        prop_assert!(span(&d).unwrap() <= nu * span(&dv).unwrap() + 1e-12);
    }

    #[test]
    fn quantizer_covering(seed in 0u64..500, d in 1usize..3, n in 1usize..9) {
        let net = build_uniform_net(d, n).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
            let i = net.quantize(&x).unwrap();
            let c = net.point(i);
            let dist: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(dist <= net.covering_radius() + 1e-12);
        }
    }

    #[test]
    fn emulation_contracts_randomized(seed in 0u64..300, s in 2usize..6) {
        let m = arbitrary_mdp(s, 1, seed);
        let env = PlanEnv::Finite(&m);
        let row = env.row(0, 0).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 7);
        let u: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 3.0).collect();
        let avg = u.iter().sum::<f64>() / s as f64;
        let exact = row.mean(&u, avg);
        let eps = 0.05 + rng.gen::<f64>() * 0.3;
        for mode in [NoiseMode::Exact, NoiseMode::Uniform, NoiseMode::SignedWorst] {
            let cfg = QuantumEmulationConfig::with_mode(mode);
            let mut ledger = QueryLedger::new();
            let out = emulated_q_mean(&u, &row, eps, 0.1, &mut ledger, 0, &cfg, &mut rng).unwrap();
            prop_assert!((out - exact).abs() <= span(&u).unwrap() * eps + 1e-12);
        }
    }
}

/// Exact total-variance bound: the summed standard deviations of the policy
/// values along the policy's own state distribution stay below H^{3/2}.
#[test]
fn fact_total_variance_sqrt_bound() {
    use rand::SeedableRng;
    let mut pick = rand_chacha::ChaCha8Rng::seed_from_u64(0x42);
    for inst in 0..50u64 {
        let s = 2 + (inst % 3) as usize;
        let a = 2 + (inst % 2) as usize;
        let h = 2 + (inst % 5) as usize;
        let m = arbitrary_mdp(s, a, 1000 + inst);
        let hf = h as f64;
        let (_, opt_pi) = exact_backward_induction(&m, HorizonSpec(h)).unwrap();
        for pi in [random_policy(s, a, h, &mut pick), opt_pi] {
            let pv = policy_value_finite(&m, &pi, HorizonSpec(h)).unwrap();
            for x0 in 0..s {
                for t in 1..=h {
                    let total = propagated_sqrt_sigma_sum(&m, &pi, &pv, x0, t);
                    assert!(
                        total <= hf.powf(1.5) + 1e-9,
                        "instance {inst} x0={x0} t={t}: {total} > H^1.5"
                    );
                }
            }
        }
    }
}

/// Exact doubly-summed variance bound (<= 4 H^3) on the same instances.
#[test]
fn fact_total_variance_cubed_bound() {
    use rand::SeedableRng;
    let mut pick = rand_chacha::ChaCha8Rng::seed_from_u64(0x43);
    for inst in 0..50u64 {
        let s = 2 + (inst % 3) as usize;
        let a = 2 + (inst % 2) as usize;
        let h = 2 + (inst % 5) as usize;
        let m = arbitrary_mdp(s, a, 2000 + inst);
        let hf = h as f64;
        let pi = random_policy(s, a, h, &mut pick);
        let pv = policy_value_finite(&m, &pi, HorizonSpec(h)).unwrap();
        for x0 in 0..s {
            for t in 1..=h {
                let total = propagated_double_sigma_sum(&m, &pi, &pv, x0, t);
                assert!(
                    total <= 4.0 * hf.powi(3) + 1e-9,
                    "instance {inst} x0={x0} t={t}: {total} > 4H^3"
                );
            }
        }
    }
}

/// g* dominates every deterministic stationary policy (full enumeration).
#[test]
fn optimal_gain_dominates_enumeration() {
    for seed in 0..12u64 {
        let s = 2 + (seed % 3) as usize; // up to 4 states
        let a = 2 + (seed % 2) as usize; // up to 3 actions
        if (a as u64).pow(s as u32) > 1024 {
            continue;
        }
        let m = generate_random_mdp(s, a, 0.2 + 0.1 * (seed % 5) as f64, 77 + seed).unwrap();
        let opt = exact_gain_bias_optimal(&m).unwrap();
        let mut best = f64::NEG_INFINITY;
        let total = (a as u64).pow(s as u32);
        for code in 0..total {
            let mut c = code;
            let actions: Vec<usize> = (0..s)
                .map(|_| {
                    let x = (c % a as u64) as usize;
                    c /= a as u64;
                    x
                })
                .collect();
            let gb = gain_bias_of_stationary(&m, &DecisionRule::Deterministic(actions)).unwrap();
            best = best.max(gb.gain.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        assert!(
            opt.gain >= best - 1e-8,
            "seed {seed}: g* = {} < best enumerated {best}",
            opt.gain
        );
        assert!((opt.gain - best).abs() < 1e-7, "g* should be attained by some stationary policy");
    }
}

/// Same seed and configuration replay to bit-identical planner output.
#[test]
fn planner_determinism_bit_identical() {
    let m = generate_random_mdp(4, 3, 0.4, 5).unwrap();
    let env = PlanEnv::Finite(&m);
    let run = |seed: u64| {
        let mut ledger = QueryLedger::new();
        let mut rng = SamplerConfig::new(seed, 9).rng();
        let out = classical_backward_induction(
            &env,
            HorizonSpec(3),
            0.1,
            0.1,
            &HolderParams::zero(),
            0.125,
            &mut ledger,
            0,
            &mut rng,
        )
        .unwrap();
        serde_json::to_string(&out).unwrap()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}
