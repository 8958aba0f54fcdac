//! Benchmark-only crate; see `benches/hot_paths.rs`.
//!
//! Shared fixtures for the benchmarks live here so they stay in one place.

use invstop_core::{Barrier, McConfig, Problem};

/// Standard benchmark problem: driftless unit-volatility Brownian motion
/// with payoff `g = x (T - t)` (gain rate `-x`).
pub fn bench_problem() -> Problem {
    invstop_core::model::bm_product_payoff(1.0)
}

/// Constant barrier used across benchmarks.
pub fn bench_barrier() -> Barrier {
    Barrier::constant(0.8, 1.0).expect("valid barrier")
}

/// Small but realistic Monte Carlo configuration.
pub fn bench_mc(n_paths: usize) -> McConfig {
    McConfig::new(n_paths, 7, 1e-3).expect("valid config")
}
