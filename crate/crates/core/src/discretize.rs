//! 1/n-nets over [0,1]^D, the nearest-neighbour quantizer, and a parametric
//! family of Holder-continuous compact-state MDPs that can be sampled exactly
//! and collapsed onto a net in closed form.
//!
//! The built-in kernel family is the mixture
//!
//! ```text
//! p(.|x,a) = w(x,a) * delta_{mode(a)} + (1 - w(x,a)) * Uniform([0,1]^D)
//! ```
//!
//! with `w(x,a)` a clamped cosine field of bounded Lipschitz constant. Both
//! mixture components are shared across `x`, so the total-variation distance
//! between kernels at `x` and `x'` is exactly `|w(x,a) - w(x',a)|` and the
//! Holder certificate (alpha = 1) can be computed, not just bounded.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;

/// Default cap on the number of net points.
pub const DEFAULT_NET_CAP: u64 = 1_000_000;

/// Uniform grid of cell centers over [0,1]^D. Cells are half-open boxes
/// `[i/n, (i+1)/n)` per axis with the last cell closed; axis 0 is the
/// slowest-varying index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    dim: usize,
    resolution: usize,
}

/// Build the uniform 1/n-net with centers `((i_1+1/2)/n, ..., (i_D+1/2)/n)`.
pub fn build_uniform_net(dim: usize, resolution: usize) -> Result<Net> {
    build_uniform_net_capped(dim, resolution, DEFAULT_NET_CAP)
}

pub fn build_uniform_net_capped(dim: usize, resolution: usize, cap: u64) -> Result<Net> {
    if dim == 0 || resolution == 0 {
        return Err(Error::Invalid("net dimension and resolution must be positive".into()));
    }
    let size = (resolution as u64).checked_pow(dim as u32).unwrap_or(u64::MAX);
    if size > cap {
        return Err(Error::NetCap { size, cap });
    }
    Ok(Net { dim, resolution })
}

impl Net {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of net points `k_n = n^D`.
    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell center of net point `i`.
    pub fn point(&self, index: usize) -> Vec<f64> {
        let n = self.resolution;
        let mut rem = index;
        let mut coords = vec![0.0; self.dim];
        for d in (0..self.dim).rev() {
            coords[d] = ((rem % n) as f64 + 0.5) / n as f64;
            rem /= n;
        }
        coords
    }

    /// Every `x` is within this l2 distance of its net point.
    pub fn covering_radius(&self) -> f64 {
        (self.dim as f64).sqrt() / (2.0 * self.resolution as f64)
    }

    /// Index of the cell containing `x`; boundaries resolve to the higher
    /// cell by the half-open convention, the last cell is closed.
    pub fn quantize(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, net has dimension {}",
                x.len(),
                self.dim
            )));
        }
        let n = self.resolution;
        let mut index = 0usize;
        for &c in x {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Invalid(format!("coordinate {c} outside [0,1]")));
            }
            let cell = ((c * n as f64).floor() as usize).min(n - 1);
            index = index * n + cell;
        }
        Ok(index)
    }
}

/// Holder continuity certificate: `|f(x) - f(x')| <= L ||x - x'||_2^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub l: f64,
    pub alpha: f64,
}

impl HolderParams {
    pub fn new(l: f64, alpha: f64) -> Result<Self> {
        if l < 0.0 || alpha < 0.0 {
            return Err(Error::Invalid("Holder parameters must be nonnegative".into()));
        }
        Ok(Self { l, alpha })
    }

    /// Certificate for exactly-known finite models.
    pub fn zero() -> Self {
        Self { l: 0.0, alpha: 1.0 }
    }

    /// Discretization slack `L n^{-alpha}` for a given net resolution.
    pub fn slack(&self, resolution: usize) -> f64 {
        self.l * (resolution as f64).powf(-self.alpha)
    }
}

/// Per-action parameters of one cosine field `base + amp*cos(freq*(dir.x) + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CosineField {
    base: f64,
    amp: f64,
    freq: f64,
    phase: f64,
    dir: Vec<f64>, // unit vector
    lo: f64,
    hi: f64,
}

impl CosineField {
    fn eval(&self, x: &[f64]) -> f64 {
        let proj: f64 = self.dir.iter().zip(x).map(|(d, c)| d * c).sum();
        (self.base + self.amp * (self.freq * proj + self.phase).cos()).clamp(self.lo, self.hi)
    }

    /// Lipschitz constant in l2 (clamping only shrinks it).
    fn lipschitz(&self) -> f64 {
        self.amp * self.freq
    }
}

/// Analytic compact-state MDP on [0,1]^D with the mixture kernel described in
/// the module docs. Rewards and mixture weights are cosine fields; `holder`
/// stores the certificate computed from the realized field parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactMdpSpec {
    dim: usize,
    num_actions: usize,
    modes: Vec<Vec<f64>>,
    weight: Vec<CosineField>,
    reward: Vec<CosineField>,
    pub holder: HolderParams,
    pub seed: u64,
}

impl CompactMdpSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn mode(&self, a: usize) -> &[f64] {
        &self.modes[a]
    }

    /// Mixture weight `w(x,a)` on the mode component.
    pub fn mixture_weight(&self, x: &[f64], a: usize) -> f64 {
        self.weight[a].eval(x)
    }

    pub fn reward(&self, x: &[f64], a: usize) -> f64 {
        self.reward[a].eval(x)
    }

    /// Closed-form total variation distance between `p(.|x,a)` and `p(.|x',a)`:
    /// the components are shared, so it is exactly `|w(x,a) - w(x',a)|`.
    pub fn kernel_tvd(&self, x: &[f64], x2: &[f64], a: usize) -> f64 {
        (self.mixture_weight(x, a) - self.mixture_weight(x2, a)).abs()
    }

    /// Degenerate all-mode spec: the kernel is a point mass at `modes[a]`.
    pub fn point_mass(dim: usize, modes: Vec<Vec<f64>>) -> Result<Self> {
        if modes.is_empty() || modes.iter().any(|m| m.len() != dim) {
            return Err(Error::Dimension("mode dimensions".into()));
        }
        let num_actions = modes.len();
        let one = CosineField { base: 1.0, amp: 0.0, freq: 1.0, phase: 0.0, dir: vec![0.0; dim], lo: 1.0, hi: 1.0 };
        let half = CosineField { base: 0.5, amp: 0.0, freq: 1.0, phase: 0.0, dir: vec![0.0; dim], lo: 0.5, hi: 0.5 };
        Ok(Self {
            dim,
            num_actions,
            modes,
            weight: vec![one; num_actions],
            reward: vec![half; num_actions],
            holder: HolderParams::zero(),
            seed: 0,
        })
    }

    /// Finite MDP induced on a net: state `i` is cell center `s_i`, the kernel
    /// is the exact law of `quantize(x')` for `x' ~ p(.|s_i, a)`, computable in
    /// closed form for the mixture family.
    pub fn induced_mdp(&self, net: &Net) -> Result<FiniteMdp> {
        if net.dim() != self.dim {
            return Err(Error::Dimension("net dimension != spec dimension".into()));
        }
        let k = net.len();
        let a_n = self.num_actions;
        let uniform_cell = 1.0 / k as f64;
        let mode_cells: Vec<usize> = (0..a_n)
            .map(|a| net.quantize(&self.modes[a]))
            .collect::<Result<_>>()?;
        let mut kernel = vec![0.0; k * a_n * k];
        let mut rewards = vec![0.0; k * a_n];
        for i in 0..k {
            let center = net.point(i);
            for a in 0..a_n {
                let w = self.mixture_weight(&center, a);
                let row = &mut kernel[(i * a_n + a) * k..(i * a_n + a + 1) * k];
                for p in row.iter_mut() {
                    *p = (1.0 - w) * uniform_cell;
                }
                row[mode_cells[a]] += w;
                rewards[i * a_n + a] = self.reward(&center, a);
            }
        }
        FiniteMdp::new(k, a_n, kernel, rewards)
    }
}

/// Draw `x' ~ p(.|x,a)`: with probability `w(x,a)` the action's mode point,
/// otherwise uniform on the cube. Deterministic given the stream state.
pub fn sample_compact(spec: &CompactMdpSpec, x: &[f64], a: usize, rng: &mut impl Rng) -> Vec<f64> {
    let w = spec.mixture_weight(x, a);
    if rng.gen::<f64>() < w {
        spec.modes[a].clone()
    } else {
        (0..spec.dim).map(|_| rng.gen::<f64>()).collect()
    }
}

/// Generate a Holder family with smoothness knob `beta`: all cosine fields
/// have Lipschitz constant at most `0.9 * beta`, and the stored certificate
/// is the realized maximum (alpha = 1). `beta = 0` yields kernels and rewards
/// independent of `x`.
pub fn make_holder_family(dim: usize, num_actions: usize, beta: f64, seed: u64) -> Result<CompactMdpSpec> {
    if dim == 0 || num_actions == 0 {
        return Err(Error::Invalid("dimension and action count must be positive".into()));
    }
    if beta < 0.0 {
        return Err(Error::Invalid("smoothness knob must be nonnegative".into()));
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x686f_6c64_6572);

    let unit_dir = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-3 {
                return v.into_iter().map(|c| c / norm).collect();
            }
        }
    };

    let mut modes = Vec::with_capacity(num_actions);
    let mut weight = Vec::with_capacity(num_actions);
    let mut reward = Vec::with_capacity(num_actions);
    let mut l_realized = 0.0f64;
    for _ in 0..num_actions {
        modes.push((0..dim).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>());

        // weights stay in [0.05, 0.65] so the uniform component keeps every
        // induced chain well mixing
        let w_freq = 0.8 + 1.2 * rng.gen::<f64>();
        let w_amp = (0.9 * beta / w_freq).min(0.2) * (0.5 + 0.5 * rng.gen::<f64>());
        let w_base = 0.25 + 0.2 * rng.gen::<f64>();
        let wf = CosineField {
            base: w_base,
            amp: w_amp,
            freq: w_freq,
            phase: rng.gen::<f64>() * std::f64::consts::TAU,
            dir: unit_dir(&mut rng),
            lo: 0.05,
            hi: 0.65,
        };

        let r_freq = 0.8 + 1.2 * rng.gen::<f64>();
        let r_amp = (0.9 * beta / r_freq).min(0.3) * (0.5 + 0.5 * rng.gen::<f64>());
        let r_base = 0.35 + 0.3 * rng.gen::<f64>();
        let rf = CosineField {
            base: r_base,
            amp: r_amp,
            freq: r_freq,
            phase: rng.gen::<f64>() * std::f64::consts::TAU,
            dir: unit_dir(&mut rng),
            lo: 0.0,
            hi: 1.0,
        };

        l_realized = l_realized.max(wf.lipschitz()).max(rf.lipschitz());
        weight.push(wf);
        reward.push(rf);
    }

    Ok(CompactMdpSpec {
        dim,
        num_actions,
        modes,
        weight,
        reward,
        holder: HolderParams::new(l_realized, 1.0)?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn net_d1_n4_centers() {
        let net = build_uniform_net(1, 4).unwrap();
        let centers: Vec<f64> = (0..4).map(|i| net.point(i)[0]).collect();
        assert_eq!(centers, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn net_d1_n1_single_point() {
        let net = build_uniform_net(1, 1).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.point(0), vec![0.5]);
        assert!((net.covering_radius() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn net_d2_n2_covering() {
        let net = build_uniform_net(2, 2).unwrap();
        assert_eq!(net.len(), 4);
        let r = net.covering_radius();
        assert!((r - 2.0f64.sqrt() / 4.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let i = net.quantize(&x).unwrap();
            let c = net.point(i);
            let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
            assert!(d <= r + 1e-12);
        }
    }

    #[test]
    fn net_cap_enforced() {
        assert!(matches!(
            build_uniform_net(4, 100),
            Err(crate::Error::NetCap { .. })
        ));
    }

    #[test]
    fn quantize_examples() {
        let net = build_uniform_net(1, 4).unwrap();
        assert_eq!(net.quantize(&[0.3]).unwrap(), 1);
        // boundary resolves upward
        assert_eq!(net.quantize(&[0.25]).unwrap(), 1);
        assert_eq!(net.quantize(&[1.0]).unwrap(), 3);
        assert!(net.quantize(&[1.5]).is_err());
    }

    #[test]
    fn quantize_idempotent_on_centers() {
        for (d, n) in [(1, 7), (2, 5), (3, 3)] {
            let net = build_uniform_net(d, n).unwrap();
            for i in 0..net.len() {
                assert_eq!(net.quantize(&net.point(i)).unwrap(), i);
            }
        }
    }

    #[test]
    fn beta_zero_kernel_constant() {
        let spec = make_holder_family(2, 3, 0.0, 7).unwrap();
        assert_eq!(spec.holder.l, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let y = [rng.gen::<f64>(), rng.gen::<f64>()];
            for a in 0..3 {
                assert_eq!(spec.kernel_tvd(&x, &y, a), 0.0);
                assert_eq!(spec.reward(&x, a), spec.reward(&y, a));
            }
        }
    }

    #[test]
    fn holder_certificate_holds_on_random_pairs() {
        let spec = make_holder_family(2, 2, 1.0, 3).unwrap();
        let l = spec.holder.l;
        assert!(l <= 0.9 + 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let y = [rng.gen::<f64>(), rng.gen::<f64>()];
            let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            for a in 0..2 {
                assert!(spec.kernel_tvd(&x, &y, a) <= l * dist + 1e-12);
                assert!((spec.reward(&x, a) - spec.reward(&y, a)).abs() <= l * dist + 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_same_spec() {
        let a = make_holder_family(1, 2, 1.0, 0).unwrap();
        let b = make_holder_family(1, 2, 1.0, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn point_mass_sampling_returns_mode() {
        let spec = CompactMdpSpec::point_mass(2, vec![vec![0.3, 0.7]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            assert_eq!(sample_compact(&spec, &[0.1, 0.9], 0, &mut rng), vec![0.3, 0.7]);
        }
    }

    #[test]
    fn sampling_replays_identically() {
        let spec = make_holder_family(1, 2, 1.0, 0).unwrap();
        let draws = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_compact(&spec, &[0.4], 1, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draws(5), draws(5));
    }

    #[test]
    fn uniform_only_spec_monte_carlo_mean() {
        // beta = 0 and weights forced to the floor 0.05 is still mostly
        // uniform; use a spec with zero weight instead for the clean check.
        let mut spec = make_holder_family(2, 1, 0.0, 11).unwrap();
        spec.weight[0] = CosineField {
            base: 0.0,
            amp: 0.0,
            freq: 1.0,
            phase: 0.0,
            dir: vec![0.0, 0.0],
            lo: 0.0,
            hi: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut sums = [0.0f64; 2];
        let n = 10_000;
        for _ in 0..n {
            let x = sample_compact(&spec, &[0.5, 0.5], 0, &mut rng);
            sums[0] += x[0];
            sums[1] += x[1];
        }
        for s in sums {
            assert!((s / n as f64 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn induced_mdp_rows_match_closed_form() {
        let spec = make_holder_family(1, 2, 1.0, 0).unwrap();
        let net = build_uniform_net(1, 8).unwrap();
        let m = spec.induced_mdp(&net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        // empirical law of quantize(x') matches the induced row
        let (s, a) = (3usize, 1usize);
        let mut counts = vec![0u32; 8];
        let n = 20_000;
        for _ in 0..n {
            let x = sample_compact(&spec, &net.point(s), a, &mut rng);
            counts[net.quantize(&x).unwrap()] += 1;
        }
        for j in 0..8 {
            let emp = counts[j] as f64 / n as f64;
            assert!(
                (emp - m.row(s, a)[j]).abs() < 0.015,
                "cell {j}: emp {emp} vs exact {}",
                m.row(s, a)[j]
            );
        }
    }
}
