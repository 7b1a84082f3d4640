//! Recovers the two Burgers coefficients with each solver on a small grid.
//!
//! cargo run --release -p invpde-core --example burgers

use invpde::experiment::build_case;
use invpde::solvers::{preset, search_dim, solve};
use invpde::{compute_errors, Benchmark, RunConfig, SolverKind, TrustRegionConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> invpde::Result<()> {
    for kind in SolverKind::ALL {
        let mut cfg = RunConfig::new(Benchmark::Burgers, kind);
        cfg.discretization.q = [15, 15];
        cfg.discretization.q_s = 50;
        cfg.network.layers = vec![2, 200, 1];
        let case = build_case(&cfg)?;

        let p = preset(Benchmark::Burgers, kind);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.perturbation);
        let pcfg = p.perturb_config(search_dim(&case.tables, kind), &mut rng)?;
        let sol = solve(&case.tables, &p.choice(kind), &pcfg, &TrustRegionConfig::default(), &mut rng)?;
        let rep = compute_errors(&sol, &case.problem, &case.disc, &case.basis, (51, 51))?;

        println!(
            "{:<10} alpha = [{:.10}, {:.10}]  e_alpha = [{:.2e}, {:.2e}]  l2_u = {:.2e}  nfev = {}",
            kind.name(),
            sol.alpha[0],
            sol.alpha[1],
            rep.e_alpha[0],
            rep.e_alpha[1],
            rep.l2_u,
            sol.diagnostics.nfev
        );
    }
    Ok(())
}
