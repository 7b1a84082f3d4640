//! Configuration-driven runs and parameter sweeps with CSV output.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblyOptions, SystemTables};
use crate::basis::{Activation, Architecture, BasisConfig, EnsembleBasis, StreamMode};
use crate::error::{Error, Result};
use crate::geometry::{build_discretization, Discretization};
use crate::linalg::DEFAULT_RCOND;
use crate::metrics::{compute_errors, ErrorReport};
use crate::problem::{make_benchmark, Benchmark, InverseProblem, NoiseSpec};
use crate::solvers::{preset, search_dim, solve, InitialGuess, InverseSolution, NewtonOptions, SolverKind};
use crate::trsolver::TrustRegionConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub n_sub: [usize; 2],
    /// Benchmark default when absent.
    pub cont_order: Option<[u8; 2]>,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection {
            n_sub: [1, 1],
            cont_order: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSection {
    pub q: [usize; 2],
    pub q_s: usize,
    pub q_eval: [usize; 2],
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        DiscretizationSection {
            q: [20, 20],
            q_s: 100,
            q_eval: [101, 101],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub layers: Vec<usize>,
    /// Benchmark and solver default when absent.
    pub r_m: Option<f64>,
    pub activation: Activation,
    pub streams: StreamMode,
    pub normalize_inputs: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            layers: vec![2, 400, 1],
            r_m: None,
            activation: Activation::Gaussian,
            streams: StreamMode::Distinct,
            normalize_inputs: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub lambda_mea: f64,
    pub noise: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            lambda_mea: 1.0,
            noise: 0.0,
            lambda_1: 0.0,
            lambda_2: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    pub basis: u64,
    pub measurement: u64,
    pub noise: u64,
    pub perturbation: u64,
}

impl Default for SeedSection {
    fn default() -> Self {
        SeedSection {
            basis: 1,
            measurement: 2,
            noise: 3,
            perturbation: 4,
        }
    }
}

/// Overrides of the benchmark's restart preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbSection {
    pub max_nllsq_iterations: Option<usize>,
    pub max_sub_iterations: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub eta: Option<u8>,
    pub initial: Option<InitialGuess>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustRegionSection {
    pub ftol: f64,
    pub xtol: f64,
    pub gtol: f64,
    pub rcond: f64,
}

impl Default for TrustRegionSection {
    fn default() -> Self {
        let d = TrustRegionConfig::default();
        TrustRegionSection {
            ftol: d.ftol,
            xtol: d.xtol,
            gtol: d.gtol,
            rcond: DEFAULT_RCOND,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSection {
    /// Preset default when absent.
    pub max_newton_iterations: Option<usize>,
    pub newton_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    /// `Q₁ = Q₂ = value`.
    Q,
    /// Width of the last hidden layer.
    M,
    QS,
    Noise,
    LambdaMea,
    RM,
}

impl SweepAxis {
    fn is_count(self) -> bool {
        matches!(self, SweepAxis::Q | SweepAxis::M | SweepAxis::QS)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// When false, `wall_ms` is written as 0 so repeated runs give identical files.
    pub timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { timing: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: Benchmark,
    pub solver: SolverKind,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub seeds: SeedSection,
    #[serde(default)]
    pub perturb: PerturbSection,
    #[serde(default)]
    pub trust_region: TrustRegionSection,
    #[serde(default)]
    pub newton: NewtonSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Single-domain defaults for `benchmark` and `solver`.
    pub fn new(benchmark: Benchmark, solver: SolverKind) -> Self {
        RunConfig {
            benchmark,
            solver,
            domain: DomainSection::default(),
            discretization: DiscretizationSection::default(),
            network: NetworkSection::default(),
            data: DataSection::default(),
            seeds: SeedSection::default(),
            perturb: PerturbSection::default(),
            trust_region: TrustRegionSection::default(),
            newton: NewtonSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let d = &self.discretization;
        if self.domain.n_sub.contains(&0) || d.q.iter().any(|&q| q < 2) || d.q_eval.contains(&0) {
            return bad("subdomain counts, grid sizes and q_eval must be positive (grids at least 2)");
        }
        if let Some(c) = self.domain.cont_order {
            if c.iter().any(|&k| k > 1) {
                return bad("cont_order entries must be 0 or 1");
            }
        }
        Architecture::new(self.network.layers.clone()).map_err(|e| Error::Config(e.to_string()))?;
        if self.network.r_m.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("r_m must be positive");
        }
        let data = &self.data;
        if !(data.lambda_mea > 0.0) || !(data.noise >= 0.0) || !(data.lambda_1 >= 0.0) || !(data.lambda_2 >= 0.0) {
            return bad("lambda_mea must be positive; noise, lambda_1 and lambda_2 non-negative");
        }
        let v = &self.sweep.values;
        if self.sweep.axis != SweepAxis::None {
            if v.is_empty() {
                return bad("sweep.values must not be empty");
            }
            if v.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("sweep.values must be strictly increasing");
            }
            if self.sweep.axis.is_count() && v.iter().any(|&x| !(x >= 1.0 && x.fract() == 0.0)) {
                return bad("count sweeps need positive integer values");
            }
            if self.sweep.axis == SweepAxis::Q && v.iter().any(|&x| x < 2.0) {
                return bad("grid sweeps need values of at least 2");
            }
            if !matches!(self.sweep.axis, SweepAxis::Noise) && v.iter().any(|&x| !(x > 0.0)) {
                return bad("sweep values must be positive");
            }
        } else if !v.is_empty() {
            return bad("sweep.values given without a sweep axis");
        }
        if !(0.0..1.0).contains(&self.trust_region.rcond) {
            return bad("rcond must lie in [0, 1)");
        }
        Ok(())
    }

    /// The configurations of the individual sweep points.
    pub fn points(&self) -> Vec<(f64, RunConfig)> {
        if self.sweep.axis == SweepAxis::None {
            let mut c = self.clone();
            c.sweep = SweepSection::default();
            return vec![(f64::NAN, c)];
        }
        self.sweep
            .values
            .iter()
            .map(|&v| {
                let mut c = self.clone();
                c.sweep = SweepSection::default();
                match self.sweep.axis {
                    SweepAxis::None => {}
                    SweepAxis::Q => c.discretization.q = [v as usize; 2],
                    SweepAxis::M => {
                        let k = c.network.layers.len() - 2;
                        c.network.layers[k] = v as usize;
                    }
                    SweepAxis::QS => c.discretization.q_s = v as usize,
                    SweepAxis::Noise => c.data.noise = v,
                    SweepAxis::LambdaMea => c.data.lambda_mea = v,
                    SweepAxis::RM => c.network.r_m = Some(v),
                }
                (v, c)
            })
            .collect()
    }
}

/// Everything needed to run one solve.
pub struct Case {
    pub problem: InverseProblem,
    pub disc: Discretization,
    pub basis: EnsembleBasis,
    pub tables: SystemTables,
}

/// Builds the discretization, basis, problem and assembly tables of `cfg`
/// (ignoring its sweep section).
pub fn build_case(cfg: &RunConfig) -> Result<Case> {
    let bench = cfg.benchmark;
    let n_sub = (cfg.domain.n_sub[0], cfg.domain.n_sub[1]);
    let mut spec = bench.domain(n_sub)?;
    if let Some([a, b]) = cfg.domain.cont_order {
        spec.cont_order = (a, b);
    }
    let q = (cfg.discretization.q[0], cfg.discretization.q[1]);
    let mut mrng = ChaCha8Rng::seed_from_u64(cfg.seeds.measurement);
    let disc = build_discretization(&spec, q, cfg.discretization.q_s, &mut mrng)?;
    let noise = NoiseSpec {
        epsilon: cfg.data.noise,
        seed: cfg.seeds.noise,
    };
    let problem = make_benchmark(bench, &disc, &noise)?;
    let pre = preset(bench, cfg.solver);
    let arch = Architecture::new(cfg.network.layers.clone())?;
    let basis_cfg = BasisConfig {
        arch,
        r_m: cfg.network.r_m.unwrap_or(pre.r_m),
        seed: cfg.seeds.basis,
        activation: cfg.network.activation,
        streams: cfg.network.streams,
        normalize_inputs: cfg.network.normalize_inputs,
    };
    let boxes: Vec<_> = disc.subs.iter().map(|s| (s.lo, s.hi)).collect();
    let basis = EnsembleBasis::new(basis_cfg, &boxes)?;
    let opts = AssemblyOptions {
        lambda_mea: cfg.data.lambda_mea,
        lambda_1: cfg.data.lambda_1,
        lambda_2: cfg.data.lambda_2,
        rcond: cfg.trust_region.rcond,
    };
    let tables = SystemTables::new(problem.clone(), &disc, &basis, opts)?;
    Ok(Case {
        problem,
        disc,
        basis,
        tables,
    })
}

/// Result of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub solution: Option<InverseSolution>,
    pub report: Option<ErrorReport>,
    pub status: String,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.solution.is_none()
    }
}

/// Solves `cfg` once and measures it. `stream` selects the perturbation substream.
pub fn run_single(cfg: &RunConfig, stream: u64) -> Result<(InverseSolution, ErrorReport)> {
    let start = Instant::now();
    let case = build_case(cfg)?;
    let pre = preset(cfg.benchmark, cfg.solver);
    let mut pre = pre;
    let p = &cfg.perturb;
    if let Some(v) = p.max_nllsq_iterations {
        pre.max_nllsq_iterations = v;
    }
    if let Some(v) = p.max_sub_iterations {
        pre.max_sub_iterations = v;
    }
    if let Some(v) = p.epsilon {
        pre.epsilon = v;
    }
    if let Some(v) = p.delta {
        pre.delta = v;
    }
    if let Some(v) = p.eta {
        pre.eta = v;
    }
    if let Some(v) = &p.initial {
        pre.initial = v.clone();
    }
    let mut choice = pre.choice(cfg.solver);
    if let Some(n) = choice.newton.as_mut() {
        let defaults = NewtonOptions::default();
        n.max_newton_iterations = cfg.newton.max_newton_iterations.unwrap_or(n.max_newton_iterations);
        n.newton_tol = cfg.newton.newton_tol.unwrap_or(defaults.newton_tol);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.perturbation);
    rng.set_stream(stream);
    let pcfg = pre.perturb_config(search_dim(&case.tables, cfg.solver), &mut rng)?;
    let trcfg = TrustRegionConfig {
        max_nfev: pcfg.max_nllsq_iterations,
        ftol: cfg.trust_region.ftol,
        xtol: cfg.trust_region.xtol,
        gtol: cfg.trust_region.gtol,
        initial_radius: None,
    };
    let sol = solve(&case.tables, &choice, &pcfg, &trcfg, &mut rng)?;
    let q_eval = (cfg.discretization.q_eval[0], cfg.discretization.q_eval[1]);
    let mut report = compute_errors(&sol, &case.problem, &case.disc, &case.basis, q_eval)?;
    report.wall_ms = if cfg.output.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok((sol, report))
}

fn run_point(value: f64, cfg: &RunConfig, stream: u64) -> SweepRow {
    match run_single(cfg, stream) {
        Ok((sol, report)) => SweepRow {
            value,
            status: if sol.diagnostics.converged { "ok" } else { "not_converged" }.to_string(),
            solution: Some(sol),
            report: Some(report),
        },
        Err(e) => SweepRow {
            value,
            solution: None,
            report: None,
            status: format!("error: {e}"),
        },
    }
}

/// One solve per sweep value. Failures are recorded in the row's status.
pub fn run_sweep(cfg: &RunConfig, parallel: bool) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points = cfg.points();
    if !parallel || points.len() < 2 {
        return Ok(points
            .iter()
            .enumerate()
            .map(|(k, (v, c))| run_point(*v, c, k as u64))
            .collect());
    }
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(k, (v, c))| s.spawn(move || run_point(*v, c, k as u64)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| Error::numeric("sweep worker panicked")))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(rows)
}

fn n_alpha_columns(cfg: &RunConfig) -> usize {
    cfg.benchmark.alpha_ex().len()
}

/// Writes the sweep table with a header row; floats carry 15 significant digits.
pub fn write_csv<W: Write>(cfg: &RunConfig, rows: &[SweepRow], out: W) -> Result<()> {
    let field = cfg.benchmark.gamma_ex(0.0, 0.0).is_some();
    let n = n_alpha_columns(cfg);
    let io = |e: csv::Error| Error::Config(format!("csv output: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sweep_value".to_string()];
    if field {
        header.push("linf_gamma".into());
        header.push("l2_gamma".into());
    } else {
        header.extend((1..=n).map(|i| format!("e_alpha_{i}")));
    }
    for h in ["linf_u", "l2_u", "cost", "nfev", "restarts", "wall_ms", "status"] {
        header.push(h.into());
    }
    w.write_record(&header).map_err(io)?;

    let f = |v: f64| format!("{v:.14e}");
    let blank = |k: usize| vec![String::new(); k];
    for row in rows {
        let mut rec = vec![if row.value.is_nan() { String::new() } else { f(row.value) }];
        match (&row.solution, &row.report) {
            (Some(sol), Some(rep)) => {
                if field {
                    rec.push(rep.linf_gamma.map(f).unwrap_or_default());
                    rec.push(rep.l2_gamma.map(f).unwrap_or_default());
                } else {
                    rec.extend(rep.e_alpha.iter().map(|&v| f(v)));
                }
                rec.push(f(rep.linf_u));
                rec.push(f(rep.l2_u));
                rec.push(f(sol.cost));
                rec.push(sol.diagnostics.nfev.to_string());
                rec.push(sol.diagnostics.restarts.to_string());
                rec.push(f(rep.wall_ms));
            }
            _ => {
                rec.extend(blank(if field { 2 } else { n } + 6));
            }
        }
        rec.push(row.status.clone());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv output: {e}")))?;
    Ok(())
}
