//! Code-defined fixtures and the random mixing-MDP generator used by tests,
//! benchmarks and the CLI. Fixtures live in code so the hand-derived values
//! asserted elsewhere (gains, ergodicity coefficients, kernel rows) are
//! reproducible from the constructors alone.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::discretize::{make_holder_family, CompactMdpSpec};
use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;

/// Random tabular MDP with kernel rows
/// `(1-mixing) * point_mass(random target) + mixing * uniform` and uniform
/// rewards. Its ergodicity coefficient is at most `1 - mixing`.
pub fn generate_random_mdp(
    num_states: usize,
    num_actions: usize,
    mixing: f64,
    seed: u64,
) -> Result<FiniteMdp> {
    if !(0.0..=1.0).contains(&mixing) {
        return Err(Error::Invalid(format!("mixing {mixing} outside [0,1]")));
    }
    if num_states == 0 || num_actions == 0 {
        return Err(Error::Invalid("state and action counts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d64_7067_656e);
    let s = num_states;
    let mut kernel = vec![0.0; s * num_actions * s];
    let mut rewards = vec![0.0; s * num_actions];
    for row in 0..s * num_actions {
        let target = rng.gen_range(0..s);
        let base = row * s;
        for j in 0..s {
            kernel[base + j] = mixing / s as f64;
        }
        kernel[base + target] += 1.0 - mixing;
        rewards[row] = rng.gen::<f64>();
    }
    FiniteMdp::new(s, num_actions, kernel, rewards)
}

/// A named fixture instance.
#[derive(Debug, Clone)]
pub enum FixtureKind {
    Finite(FiniteMdp),
    Compact(CompactMdpSpec),
}

/// The fixtures used throughout: `M2`, `riverswim6`, `compactD1`.
///
/// M2 is the two-state mixing MDP with actions `{stay, go}` (`go` targets
/// state 1), rewards `r(0,stay)=0, r(0,go)=0.5, r(1,.)=1`, and kernel
/// `0.9 * deterministic + 0.1 * uniform`; its optimal gain is 0.975 and its
/// ergodicity coefficient 0.9. riverswim6 is the 6-state chain (left/right
/// drift, reward 0.2 at the left bank and 1.0 at the right bank) with the
/// same 0.9/0.1 mixing. compactD1 is `make_holder_family(1, 2, 1.0, 0)`.
pub fn fixture(name: &str) -> Result<FixtureKind> {
    match name {
        "M2" => Ok(FixtureKind::Finite(m2())),
        "riverswim6" => Ok(FixtureKind::Finite(riverswim6())),
        "compactD1" => Ok(FixtureKind::Compact(make_holder_family(1, 2, 1.0, 0)?)),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

fn mix_rows(s: usize, targets: &[usize], mixing: f64) -> Vec<f64> {
    let mut kernel = Vec::with_capacity(targets.len() * s);
    for &t in targets {
        for j in 0..s {
            let mut p = mixing / s as f64;
            if j == t {
                p += 1.0 - mixing;
            }
            kernel.push(p);
        }
    }
    kernel
}

fn m2() -> FiniteMdp {
    // rows ordered (s=0,a=stay), (0,go), (1,stay), (1,go); written as exact
    // literals so the hand-derived row values hold bit-for-bit
    let kernel = vec![
        0.95, 0.05, //
        0.05, 0.95, //
        0.05, 0.95, //
        0.05, 0.95,
    ];
    let rewards = vec![0.0, 0.5, 1.0, 1.0];
    FiniteMdp::new(2, 2, kernel, rewards).expect("M2 fixture is valid")
}

fn riverswim6() -> FiniteMdp {
    let s = 6;
    // action 0 = left (towards state 0), action 1 = right (towards state 5)
    let mut targets = Vec::with_capacity(2 * s);
    for st in 0..s {
        targets.push(st.saturating_sub(1));
        targets.push((st + 1).min(s - 1));
    }
    let kernel = mix_rows(s, &targets, 0.1);
    let mut rewards = vec![0.0; 2 * s];
    rewards[0] = 0.2; // left at the left bank
    rewards[2 * s - 1] = 1.0; // right at the right bank
    FiniteMdp::new(s, 2, kernel, rewards).expect("riverswim6 fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ergodicity_coefficient, exact_gain_bias_optimal};

    #[test]
    fn m2_row_and_oracle_values() {
        let m = match fixture("M2").unwrap() {
            FixtureKind::Finite(m) => m,
            _ => unreachable!(),
        };
        assert_eq!(m.row(0, 1), &[0.05, 0.95]);
        assert!((exact_gain_bias_optimal(&m).unwrap().gain - 0.975).abs() < 1e-9);
        assert!((ergodicity_coefficient(&m).nu - 0.9).abs() < 1e-12);
    }

    #[test]
    fn riverswim_shape() {
        let m = match fixture("riverswim6").unwrap() {
            FixtureKind::Finite(m) => m,
            _ => unreachable!(),
        };
        assert_eq!(m.num_states(), 6);
        // right at state 0 drifts to state 1 with the 0.9/0.1 mixing
        assert!((m.row(0, 1)[1] - (0.9 + 0.1 / 6.0)).abs() < 1e-12);
        let opt = exact_gain_bias_optimal(&m).unwrap();
        assert!(opt.gain > 0.5, "always-right should beat the left bank");
    }

    #[test]
    fn unknown_fixture_errors() {
        assert!(matches!(fixture("nope"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn random_mdp_mixing_bounds_nu() {
        for seed in 0..20 {
            let m = generate_random_mdp(5, 3, 0.3, seed).unwrap();
            assert!(ergodicity_coefficient(&m).nu <= 0.7 + 1e-12);
        }
        let m = generate_random_mdp(4, 2, 1.0, 0).unwrap();
        assert!(ergodicity_coefficient(&m).nu < 1e-12);
    }

    #[test]
    fn random_mdp_deterministic_in_seed() {
        let a = generate_random_mdp(6, 3, 0.25, 9).unwrap();
        let b = generate_random_mdp(6, 3, 0.25, 9).unwrap();
        assert_eq!(a, b);
        let single = generate_random_mdp(1, 1, 0.0, 0).unwrap();
        assert_eq!(single.num_states(), 1);
    }
}
