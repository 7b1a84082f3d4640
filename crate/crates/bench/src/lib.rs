//! Fixtures shared by the criterion benchmarks.

use invpde::experiment::{build_case, Case, RunConfig};
use invpde::{Benchmark, SolverKind};

/// Single-domain case of `bench` with a `q × q` grid and width `m`.
pub fn fixture(bench: Benchmark, q: usize, m: usize) -> Case {
    let mut cfg = RunConfig::new(bench, SolverKind::Nllsq);
    cfg.discretization.q = [q, q];
    cfg.network.layers = vec![2, m, 1];
    build_case(&cfg).expect("fixture config is valid")
}

/// A deterministic parameter vector of length `n`.
pub fn theta(n: usize) -> Vec<f64> {
    (0..n).map(|k| ((k as f64) * 0.37).sin() * 0.1).collect()
}
