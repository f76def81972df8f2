//! Planning and online learning for finite-horizon and average-reward MDPs
//! under a generative model.
//!
//! The crate is organized around exact tabular oracles (`mdp`), 1/n-net
//! discretization of compact state spaces (`discretize`), the generative
//! interaction machinery with query accounting and emulated quantum
//! subroutines (`oracles`, `env`), sample-based and emulated-quantum planners
//! for both criteria (`plan_finite`, `plan_infinite`), doubling-episode
//! online loops with oracle-anchored regret traces (`online`), and trace
//! post-processing (`analysis`). Fixtures and generators live in `instances`.

pub mod analysis;
pub mod discretize;
pub mod env;
mod error;
pub mod instances;
mod linalg;
pub mod mdp;
pub mod online;
pub mod oracles;
pub mod plan_finite;
pub mod plan_infinite;

pub use analysis::{fit_loglog_slope, log_grid, SlopeFit};
pub use discretize::{
    build_uniform_net, make_holder_family, sample_compact, CompactMdpSpec, HolderParams, Net,
};
pub use env::{KernelRow, PlanEnv};
pub use error::{Error, Result};
pub use instances::{fixture, generate_random_mdp, FixtureKind};
pub use mdp::{
    bellman_apply, bellman_apply_rule, ergodicity_coefficient, exact_backward_induction,
    exact_gain_bias_optimal, forward_distributions, gain_bias_of_stationary, policy_value_finite,
    span, ContractionInfo, DecisionRule, FiniteMdp, GainBias, HorizonSpec, OptimalAverage, Policy,
    PolicyValue,
};
pub use online::{
    compute_regrets, doubling_bound_check, run_online_finite, run_online_infinite, DoublingCheck,
    EpisodeLog, FiniteMode, InfiniteMode, InitLaw, OnlineConfig, OracleBundle, RawTrace,
    RefreshRecord, RegretTrace, StepRecord,
};
pub use oracles::{
    empirical_mean_var, emulated_q_max, emulated_q_mean, emulated_q_mean_multi, sample_batch,
    sample_next, LedgerRecord, NoiseMode, OracleKind, QuantumEmulationConfig, QueryLedger,
    SamplerConfig,
};
pub use plan_finite::{
    classical_backward_induction, classical_fh_cost, epoch_count, modern_fh_cost,
    quantum_modern_backward_induction, quantum_simple_backward_induction, simple_fh_cost,
    EpochDiag, EpochSchedule, GuaranteeRecord, PlannerOutput, SimpleStepDiag,
};
pub use plan_infinite::{
    certificate_holds, classical_value_iteration, classical_vi_cost, clip_update,
    quantum_value_iteration, quantum_vi_cost, robust_vi_span_certificate, SweepDiag, VIConfig,
    VIOutput,
};
