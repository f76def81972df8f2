//! Benchmark-only crate; see `benches/planners.rs`.
