//! NLLSQ, VarPro-F1 and VarPro-F2 (with an optional Newton outer loop).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{Linearization, SystemTables};
use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseMatrix, ThinSvd};
use crate::problem::Benchmark;
use crate::trsolver::{
    nllsq_perturb, perturbation_vector, NllsqProblem, PerturbConfig, SolveOutcome, Termination,
    TrustRegionConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Nllsq,
    #[serde(alias = "varpro_f1")]
    VarproF1,
    #[serde(alias = "varpro_f2")]
    VarproF2,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Nllsq, SolverKind::VarproF1, SolverKind::VarproF2];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Nllsq => "nllsq",
            SolverKind::VarproF1 => "varpro_f1",
            SolverKind::VarproF2 => "varpro_f2",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    pub max_newton_iterations: usize,
    /// Stop when `max_p |u^{k+1}(x_p) − u^k(x_p)|` falls below this.
    pub newton_tol: f64,
    /// `β⁰`; zero when absent.
    #[serde(skip)]
    pub initial_beta: Option<Vec<f64>>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_newton_iterations: 15,
            newton_tol: 1e-12,
            initial_beta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverChoice {
    pub kind: SolverKind,
    pub newton: Option<NewtonOptions>,
}

impl SolverChoice {
    pub fn plain(kind: SolverKind) -> Self {
        SolverChoice { kind, newton: None }
    }

    pub fn newton(opts: NewtonOptions) -> Self {
        SolverChoice {
            kind: SolverKind::VarproF2,
            newton: Some(opts),
        }
    }

    pub fn validate(&self, tables: &SystemTables) -> Result<()> {
        let linear = tables.problem.is_linear();
        match (&self.kind, &self.newton) {
            (SolverKind::VarproF2, None) if !linear => Err(Error::invalid(
                "VarPro-F2 on a nonlinear operator needs the Newton outer loop",
            )),
            (SolverKind::VarproF2, Some(_)) if linear => {
                Err(Error::invalid("Newton iterations apply only to nonlinear operators"))
            }
            (SolverKind::VarproF2, Some(n)) if !(n.newton_tol >= 0.0) => {
                Err(Error::invalid("newton_tol must be non-negative"))
            }
            (SolverKind::Nllsq | SolverKind::VarproF1, Some(_)) => {
                Err(Error::invalid("Newton iterations apply only to VarPro-F2"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub restarts: usize,
    pub nfev: usize,
    pub njev: usize,
    pub failed_attempts: usize,
    pub newton_iterations: usize,
    /// `‖Δu‖∞` at the collocation points, one entry per Newton step.
    pub newton_increments: Vec<f64>,
    pub converged: bool,
    pub termination: Option<Termination>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseSolution {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `½‖R(α, β)‖²` of the full, unreduced system.
    pub cost: f64,
    pub diagnostics: Diagnostics,
}

/// How the first initial guess is produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    #[default]
    Zero,
    /// A perturbation vector drawn with the configured `δ`.
    Perturbation,
    /// Uniform on `[−1, 1]` componentwise.
    UniformUnit,
    #[serde(skip)]
    Given(Vec<f64>),
}

impl InitialGuess {
    pub fn resolve<R: Rng + ?Sized>(&self, dim: usize, delta: f64, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            InitialGuess::Zero => Ok(vec![0.0; dim]),
            InitialGuess::Perturbation => Ok(perturbation_vector(rng, dim, delta)),
            InitialGuess::UniformUnit => Ok((0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()),
            InitialGuess::Given(v) if v.len() == dim => Ok(v.clone()),
            InitialGuess::Given(v) => Err(Error::invalid(format!(
                "initial guess has length {}, expected {dim}",
                v.len()
            ))),
        }
    }
}

/// Per-benchmark restart settings and basis scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub max_nllsq_iterations: usize,
    pub max_sub_iterations: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: u8,
    pub initial: InitialGuess,
    pub newton_iterations: Option<usize>,
    pub r_m: f64,
}

impl Preset {
    /// Builds the restart configuration, drawing `θ₀` from `rng` when needed.
    pub fn perturb_config<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<PerturbConfig> {
        Ok(PerturbConfig {
            delta: self.delta,
            eta: self.eta,
            epsilon: self.epsilon,
            max_nllsq_iterations: self.max_nllsq_iterations,
            max_sub_iterations: self.max_sub_iterations,
            theta0: self.initial.resolve(dim, self.delta, rng)?,
        })
    }

    pub fn choice(&self, kind: SolverKind) -> SolverChoice {
        SolverChoice {
            kind,
            newton: self.newton_iterations.map(|n| NewtonOptions {
                max_newton_iterations: n,
                ..NewtonOptions::default()
            }),
        }
    }
}

/// Default settings for each benchmark and solver.
pub fn preset(bench: Benchmark, kind: SolverKind) -> Preset {
    use Benchmark as B;
    use InitialGuess::{Perturbation, UniformUnit, Zero};
    use SolverKind as S;
    let p = |it, sub, eps, delta, eta, initial, newton, r_m| Preset {
        max_nllsq_iterations: it,
        max_sub_iterations: sub,
        epsilon: eps,
        delta,
        eta,
        initial,
        newton_iterations: newton,
        r_m,
    };
    match (bench, kind) {
        (B::Poisson, S::Nllsq) => p(80, 2, 1e-8, 1.0, 1, Zero, None, 3.0),
        (B::Poisson, S::VarproF1) => p(80, 2, 1e-8, 1.0, 1, Zero, None, 2.8),
        (B::Poisson, S::VarproF2) => p(80, 2, 1e-8, 1.0, 1, Zero, None, 2.0),
        (B::Advection, S::Nllsq) => p(80, 10, 1e-8, 10.0, 0, Perturbation, None, 2.5),
        (B::Advection, S::VarproF1) => p(80, 2, 1e-8, 5.0, 0, Perturbation, None, 2.5),
        (B::Advection, S::VarproF2) => p(80, 2, 1e-8, 5.0, 0, UniformUnit, None, 2.0),
        (B::NonlinearHelmholtz, S::Nllsq) => p(80, 2, 1e-8, 0.5, 1, Zero, None, 2.25),
        (B::NonlinearHelmholtz, S::VarproF1) => p(80, 2, 1e-8, 0.5, 1, Zero, None, 2.25),
        (B::NonlinearHelmholtz, S::VarproF2) => p(80, 0, 1e-8, 0.5, 1, Zero, Some(15), 2.5),
        (B::Burgers, S::Nllsq) => p(80, 2, 1e-8, 0.5, 1, Zero, None, 1.9),
        (B::Burgers, S::VarproF1) => p(80, 2, 1e-8, 1.0, 1, Zero, None, 1.9),
        (B::Burgers, S::VarproF2) => p(80, 2, 1e-12, 1.0, 0, UniformUnit, Some(15), 2.0),
        (B::SineGordan, S::Nllsq) => p(80, 5, 1e-8, 5.0, 0, Zero, None, 1.5),
        (B::SineGordan, S::VarproF1) => p(80, 5, 1e-8, 5.0, 0, Zero, None, 1.3),
        (B::SineGordan, S::VarproF2) => p(80, 5, 1e-8, 1.0, 0, Zero, Some(15), 1.3),
        (B::VarCoeffHelmholtz, S::Nllsq) => p(80, 2, 1e-8, 1.0, 1, Zero, None, 1.5),
        (B::VarCoeffHelmholtz, S::VarproF1) => p(80, 2, 1e-8, 0.01, 1, Zero, None, 1.5),
        (B::VarCoeffHelmholtz, S::VarproF2) => p(50, 2, 1e-8, 0.5, 1, Zero, None, 1.5),
    }
}

fn check_outcome_dim(pcfg: &PerturbConfig, dim: usize, what: &str) -> Result<()> {
    if pcfg.theta0.len() != dim {
        return Err(Error::invalid(format!(
            "{what}: theta0 has length {}, expected {dim}",
            pcfg.theta0.len()
        )));
    }
    Ok(())
}

/// `½‖R(α, β)‖²` of the full system.
pub fn full_cost(tables: &SystemTables, alpha: &[f64], beta: &[f64]) -> Result<f64> {
    let theta: Vec<f64> = alpha.iter().chain(beta).copied().collect();
    let r = tables.residual_with(&theta, None)?;
    Ok(0.5 * norm2(&r).powi(2))
}

fn diagnostics_from(out: &SolveOutcome) -> Diagnostics {
    Diagnostics {
        restarts: out.n_restarts,
        nfev: out.nfev,
        njev: out.njev,
        failed_attempts: out.failed_attempts,
        newton_iterations: 0,
        newton_increments: Vec::new(),
        converged: out.converged,
        termination: Some(out.termination),
    }
}

struct FullSystem<'a> {
    tables: &'a SystemTables,
}

impl NllsqProblem for FullSystem<'_> {
    fn dim_theta(&self) -> usize {
        self.tables.n_theta()
    }

    fn dim_residual(&self) -> usize {
        self.tables.n_rows()
    }

    fn residual(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        self.tables.residual_with(theta, None)
    }

    fn jacobian(&mut self, theta: &[f64]) -> Result<DenseMatrix> {
        self.tables.jacobian_with(theta, None)
    }
}

/// Joint minimization over `θ = [α | β]`.
pub fn solve_nllsq<R: Rng + ?Sized>(
    tables: &SystemTables,
    pcfg: &PerturbConfig,
    trcfg: &TrustRegionConfig,
    rng: &mut R,
) -> Result<InverseSolution> {
    check_outcome_dim(pcfg, tables.n_theta(), "NLLSQ")?;
    let out = nllsq_perturb(&mut FullSystem { tables }, pcfg, trcfg, rng)?;
    let (alpha, beta) = out.theta.split_at(tables.n_alpha);
    Ok(InverseSolution {
        alpha: alpha.to_vec(),
        beta: beta.to_vec(),
        cost: full_cost(tables, alpha, beta)?,
        diagnostics: diagnostics_from(&out),
    })
}

struct F1Eval {
    key: Vec<f64>,
    h: DenseMatrix,
    svd: Option<ThinSvd>,
    alpha: Vec<f64>,
    residual: Vec<f64>,
}

/// The problem in `β` alone, with `α` eliminated by linear least squares.
pub struct VarPro1Reduced<'a> {
    tables: &'a SystemTables,
    last: Option<F1Eval>,
}

impl<'a> VarPro1Reduced<'a> {
    pub fn new(tables: &'a SystemTables) -> Self {
        VarPro1Reduced { tables, last: None }
    }

    fn evaluate(&mut self, beta: &[f64]) -> Result<&F1Eval> {
        if self.last.as_ref().is_none_or(|l| l.key.as_slice() != beta) {
            let (h, b) = self.tables.varpro1_system_with(beta, None)?;
            let (svd, alpha, residual) = if h.cols() == 0 {
                (None, Vec::new(), b.iter().map(|v| -v).collect())
            } else {
                let svd = ThinSvd::new(&h).map_err(|e| attach(e, beta))?;
                let alpha = svd.solve(&DenseMatrix::column(&b), self.tables.opts.rcond).into_vec();
                let hb = h.matvec(&alpha);
                let r = hb.iter().zip(&b).map(|(x, y)| x - y).collect();
                (Some(svd), alpha, r)
            };
            self.last = Some(F1Eval {
                key: beta.to_vec(),
                h,
                svd,
                alpha,
                residual,
            });
        }
        Ok(self.last.as_ref().expect("evaluated above"))
    }

    /// `α_LS(β)`.
    pub fn alpha_ls(&mut self, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(beta)?.alpha.clone())
    }
}

fn attach(e: Error, theta: &[f64]) -> Error {
    match e {
        Error::NumericFailure { message, theta: None } => Error::NumericFailure {
            message,
            theta: Some(theta.to_vec()),
        },
        other => other,
    }
}

impl NllsqProblem for VarPro1Reduced<'_> {
    fn dim_theta(&self) -> usize {
        self.tables.n_beta()
    }

    fn dim_residual(&self) -> usize {
        self.tables.n_rows()
    }

    fn residual(&mut self, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(beta)?.residual.clone())
    }

    fn jacobian(&mut self, beta: &[f64]) -> Result<DenseMatrix> {
        let tables = self.tables;
        let ev = self.evaluate(beta)?;
        tables.varpro1_reduced_jacobian_from(&ev.h, ev.svd.as_ref(), beta, &ev.alpha, None)
    }
}

/// Minimization over `β` with `α` eliminated, then `α` by least squares.
pub fn solve_varpro_f1<R: Rng + ?Sized>(
    tables: &SystemTables,
    pcfg: &PerturbConfig,
    trcfg: &TrustRegionConfig,
    rng: &mut R,
) -> Result<InverseSolution> {
    check_outcome_dim(pcfg, tables.n_beta(), "VarPro-F1")?;
    let mut reduced = VarPro1Reduced::new(tables);
    let out = nllsq_perturb(&mut reduced, pcfg, trcfg, rng)?;
    let alpha = reduced.alpha_ls(&out.theta)?;
    let beta = out.theta.clone();
    Ok(InverseSolution {
        cost: full_cost(tables, &alpha, &beta)?,
        alpha,
        beta,
        diagnostics: diagnostics_from(&out),
    })
}

struct F2Eval {
    key: Vec<f64>,
    h: DenseMatrix,
    svd: ThinSvd,
    beta: Vec<f64>,
    residual: Vec<f64>,
}

/// The problem in `α` alone, with `β` eliminated by linear least squares.
/// With a linearization, nonlinear kernels use their affine model.
pub struct VarPro2Reduced<'a> {
    tables: &'a SystemTables,
    lin: Option<&'a Linearization>,
    last: Option<F2Eval>,
}

impl<'a> VarPro2Reduced<'a> {
    pub fn new(tables: &'a SystemTables, lin: Option<&'a Linearization>) -> Self {
        VarPro2Reduced { tables, lin, last: None }
    }

    fn evaluate(&mut self, alpha: &[f64]) -> Result<&F2Eval> {
        if self.last.as_ref().is_none_or(|l| l.key.as_slice() != alpha) {
            let (h, b) = self.tables.varpro2_system_with(alpha, self.lin)?;
            let svd = ThinSvd::new(&h).map_err(|e| attach(e, alpha))?;
            let beta = svd.solve(&DenseMatrix::column(&b), self.tables.opts.rcond).into_vec();
            let hb = h.matvec(&beta);
            let residual = hb.iter().zip(&b).map(|(x, y)| x - y).collect();
            self.last = Some(F2Eval {
                key: alpha.to_vec(),
                h,
                svd,
                beta,
                residual,
            });
        }
        Ok(self.last.as_ref().expect("evaluated above"))
    }

    /// `β_LS(α)`.
    pub fn beta_ls(&mut self, alpha: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(alpha)?.beta.clone())
    }
}

impl NllsqProblem for VarPro2Reduced<'_> {
    fn dim_theta(&self) -> usize {
        self.tables.n_alpha
    }

    fn dim_residual(&self) -> usize {
        self.tables.n_rows()
    }

    fn residual(&mut self, alpha: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(alpha)?.residual.clone())
    }

    fn jacobian(&mut self, alpha: &[f64]) -> Result<DenseMatrix> {
        let (tables, lin) = (self.tables, self.lin);
        let ev = self.evaluate(alpha)?;
        tables.varpro2_reduced_jacobian_from(&ev.h, &ev.svd, alpha, &ev.beta, lin)
    }
}

/// Minimization over `α` with `β` eliminated, then `β` by least squares.
/// Nonlinear operators go through the Newton loop in `choice`.
pub fn solve_varpro_f2<R: Rng + ?Sized>(
    tables: &SystemTables,
    pcfg: &PerturbConfig,
    trcfg: &TrustRegionConfig,
    choice: &SolverChoice,
    rng: &mut R,
) -> Result<InverseSolution> {
    if choice.kind != SolverKind::VarproF2 {
        return Err(Error::invalid("solver choice is not VarPro-F2"));
    }
    choice.validate(tables)?;
    check_outcome_dim(pcfg, tables.n_alpha, "VarPro-F2")?;
    match &choice.newton {
        None => {
            let mut reduced = VarPro2Reduced::new(tables, None);
            let out = nllsq_perturb(&mut reduced, pcfg, trcfg, rng)?;
            let beta = reduced.beta_ls(&out.theta)?;
            let alpha = out.theta.clone();
            Ok(InverseSolution {
                cost: full_cost(tables, &alpha, &beta)?,
                alpha,
                beta,
                diagnostics: diagnostics_from(&out),
            })
        }
        Some(newton) => solve_newton(tables, pcfg, trcfg, newton, rng),
    }
}

fn solve_newton<R: Rng + ?Sized>(
    tables: &SystemTables,
    pcfg: &PerturbConfig,
    trcfg: &TrustRegionConfig,
    newton: &NewtonOptions,
    rng: &mut R,
) -> Result<InverseSolution> {
    let mut beta_k = match &newton.initial_beta {
        Some(b) if b.len() == tables.n_beta() => b.clone(),
        Some(_) => return Err(Error::invalid("initial_beta has the wrong length")),
        None => vec![0.0; tables.n_beta()],
    };
    let mut u_k = flatten(tables.u_at_colloc(&beta_k)?);
    let mut cfg = pcfg.clone();
    let mut diag = Diagnostics::default();
    let mut best: Option<InverseSolution> = None;

    for _ in 0..newton.max_newton_iterations {
        let lin = tables.linearize_at(&beta_k)?;
        let mut reduced = VarPro2Reduced::new(tables, Some(&lin));
        let out = nllsq_perturb(&mut reduced, &cfg, trcfg, rng)?;
        let beta = reduced.beta_ls(&out.theta)?;
        let alpha = out.theta.clone();

        diag.newton_iterations += 1;
        diag.restarts += out.n_restarts;
        diag.nfev += out.nfev;
        diag.njev += out.njev;
        diag.failed_attempts += out.failed_attempts;
        diag.termination = Some(out.termination);

        let u = flatten(tables.u_at_colloc(&beta)?);
        let incr = u.iter().zip(&u_k).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        diag.newton_increments.push(incr);
        let cost = full_cost(tables, &alpha, &beta)?;
        let done = incr < newton.newton_tol;
        let candidate = InverseSolution {
            alpha: alpha.clone(),
            beta: beta.clone(),
            cost,
            diagnostics: Diagnostics::default(),
        };
        if done || best.as_ref().is_none_or(|b| cost < b.cost || !b.cost.is_finite()) {
            best = Some(candidate);
        }
        if done {
            diag.converged = true;
            break;
        }
        beta_k = beta;
        u_k = u;
        cfg.theta0 = alpha;
    }

    let mut sol = best.ok_or_else(|| Error::invalid("max_newton_iterations must be positive"))?;
    sol.diagnostics = diag;
    Ok(sol)
}

fn flatten(v: Vec<Vec<f64>>) -> Vec<f64> {
    v.into_iter().flatten().collect()
}

/// Dispatches on `choice.kind`.
pub fn solve<R: Rng + ?Sized>(
    tables: &SystemTables,
    choice: &SolverChoice,
    pcfg: &PerturbConfig,
    trcfg: &TrustRegionConfig,
    rng: &mut R,
) -> Result<InverseSolution> {
    choice.validate(tables)?;
    match choice.kind {
        SolverKind::Nllsq => solve_nllsq(tables, pcfg, trcfg, rng),
        SolverKind::VarproF1 => solve_varpro_f1(tables, pcfg, trcfg, rng),
        SolverKind::VarproF2 => solve_varpro_f2(tables, pcfg, trcfg, choice, rng),
    }
}

/// Dimension of the unknown searched by the trust-region loop.
pub fn search_dim(tables: &SystemTables, kind: SolverKind) -> usize {
    match kind {
        SolverKind::Nllsq => tables.n_theta(),
        SolverKind::VarproF1 => tables.n_beta(),
        SolverKind::VarproF2 => tables.n_alpha,
    }
}
