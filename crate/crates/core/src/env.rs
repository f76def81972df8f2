//! Generative-model view shared by all planners: a finite tabular MDP, or a
//! compact-state spec seen through a net. For compact inputs the planners
//! sample the continuous kernel at net points and apply value tables at
//! quantized successors, which is distributionally identical to sampling the
//! net-induced finite MDP; `KernelRow` exposes the exact induced row either
//! way so the emulated quantum subroutines can read true means and variances.

use std::borrow::Cow;

use rand::Rng;

use crate::discretize::{CompactMdpSpec, Net};
use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;
use crate::oracles::multinomial_counts;

#[derive(Debug, Clone, Copy)]
pub enum PlanEnv<'a> {
    Finite(&'a FiniteMdp),
    Compact { spec: &'a CompactMdpSpec, net: &'a Net },
}

/// Exact successor distribution over net states for one (s,a).
#[derive(Debug, Clone)]
pub enum KernelRow<'a> {
    Dense(&'a [f64]),
    /// Mixture of a point mass on `mode_cell` and the uniform law over all
    /// `cells` cells.
    Mixture { weight: f64, mode_cell: usize, cells: usize },
}

impl KernelRow<'_> {
    /// `E[u(X')]`; `avg_u` must be `mean(u)` (used only by the mixture arm,
    /// callers precompute it once per sweep).
    pub fn mean(&self, u: &[f64], avg_u: f64) -> f64 {
        match self {
            KernelRow::Dense(row) => row.iter().zip(u).map(|(p, v)| p * v).sum(),
            KernelRow::Mixture { weight, mode_cell, .. } => {
                weight * u[*mode_cell] + (1.0 - weight) * avg_u
            }
        }
    }

    /// Probability of successor cell `j`.
    pub fn prob(&self, j: usize) -> f64 {
        match self {
            KernelRow::Dense(row) => row[j],
            KernelRow::Mixture { weight, mode_cell, cells } => {
                let base = (1.0 - weight) / *cells as f64;
                if j == *mode_cell {
                    base + weight
                } else {
                    base
                }
            }
        }
    }

    /// Multinomial counts of `m` draws.
    pub fn sample_counts(&self, m: u64, states: usize, rng: &mut impl Rng) -> Vec<u64> {
        match self {
            KernelRow::Dense(row) => multinomial_counts(m, row, rng),
            KernelRow::Mixture { weight, mode_cell, cells } => {
                let mode_hits = rand_distr::Distribution::sample(
                    &rand_distr::Binomial::new(m, weight.clamp(0.0, 1.0)).unwrap(),
                    rng,
                );
                let uniform = vec![1.0 / *cells as f64; *cells];
                let mut counts = multinomial_counts(m - mode_hits, &uniform, rng);
                counts[*mode_cell] += mode_hits;
                debug_assert_eq!(counts.len(), states);
                counts
            }
        }
    }

    pub fn sample_one(&self, rng: &mut impl Rng) -> usize {
        match self {
            KernelRow::Dense(row) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (j, &p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j;
                    }
                }
                row.len() - 1
            }
            KernelRow::Mixture { weight, mode_cell, cells } => {
                if rng.gen::<f64>() < *weight {
                    *mode_cell
                } else {
                    rng.gen_range(0..*cells)
                }
            }
        }
    }
}

impl<'a> PlanEnv<'a> {
    pub fn num_states(&self) -> usize {
        match self {
            PlanEnv::Finite(m) => m.num_states(),
            PlanEnv::Compact { net, .. } => net.len(),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            PlanEnv::Finite(m) => m.num_actions(),
            PlanEnv::Compact { spec, .. } => spec.num_actions(),
        }
    }

    /// Reward at state `s` (net center for compact inputs).
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        match self {
            PlanEnv::Finite(m) => m.reward(s, a),
            PlanEnv::Compact { spec, net } => spec.reward(&net.point(s), a),
        }
    }

    pub fn row(&self, s: usize, a: usize) -> Result<KernelRow<'_>> {
        if s >= self.num_states() || a >= self.num_actions() {
            return Err(Error::Invalid(format!("state {s} / action {a} out of range")));
        }
        Ok(match self {
            PlanEnv::Finite(m) => KernelRow::Dense(m.row(s, a)),
            PlanEnv::Compact { spec, net } => {
                let center = net.point(s);
                KernelRow::Mixture {
                    weight: spec.mixture_weight(&center, a),
                    mode_cell: net.quantize(spec.mode(a))?,
                    cells: net.len(),
                }
            }
        })
    }

    /// Discretization slack `L n^{-alpha}`; exactly 0 for finite inputs.
    pub fn holder_slack(&self, holder: &crate::discretize::HolderParams) -> f64 {
        match self {
            PlanEnv::Finite(_) => 0.0,
            PlanEnv::Compact { net, .. } => holder.slack(net.resolution()),
        }
    }

    /// The finite model this environment plans over: the MDP itself, or the
    /// net-induced tabular model for compact inputs.
    pub fn induced_finite(&self) -> Result<Cow<'a, FiniteMdp>> {
        match self {
            PlanEnv::Finite(m) => Ok(Cow::Borrowed(*m)),
            PlanEnv::Compact { spec, net } => Ok(Cow::Owned(spec.induced_mdp(net)?)),
        }
    }
}
