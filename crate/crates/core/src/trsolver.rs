//! Trust-region Gauss–Newton least squares and the perturbation-restart wrapper.
//!
//! [`trust_region_solve`] follows the unbounded trust-region-reflective
//! iteration with an exact SVD-based subproblem solve: the step is the
//! Levenberg–Marquardt minimizer on the sphere of radius Δ, with the
//! damping found by a safeguarded Newton iteration.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, norm_inf, DenseMatrix, ThinSvd};

/// A residual/Jacobian pair over a parameter vector θ.
///
/// Callbacks take `&mut self` so implementations may cache work shared
/// between a residual evaluation and the Jacobian at the same θ.
pub trait NllsqProblem {
    fn dim_theta(&self) -> usize;
    fn dim_residual(&self) -> usize;
    fn residual(&mut self, theta: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&mut self, theta: &[f64]) -> Result<DenseMatrix>;
}

/// Closure-backed [`NllsqProblem`].
pub struct FnProblem<R, J> {
    pub dim_theta: usize,
    pub dim_residual: usize,
    pub residual_fn: R,
    pub jacobian_fn: J,
}

impl<R, J> FnProblem<R, J>
where
    R: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> DenseMatrix,
{
    pub fn new(dim_theta: usize, dim_residual: usize, residual_fn: R, jacobian_fn: J) -> Self {
        FnProblem {
            dim_theta,
            dim_residual,
            residual_fn,
            jacobian_fn,
        }
    }
}

impl<R, J> NllsqProblem for FnProblem<R, J>
where
    R: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> DenseMatrix,
{
    fn dim_theta(&self) -> usize {
        self.dim_theta
    }
    fn dim_residual(&self) -> usize {
        self.dim_residual
    }
    fn residual(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok((self.residual_fn)(theta))
    }
    fn jacobian(&mut self, theta: &[f64]) -> Result<DenseMatrix> {
        Ok((self.jacobian_fn)(theta))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegionConfig {
    pub max_nfev: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub gtol: f64,
    /// Starting radius; `None` uses ‖θ₀‖, or 1 when θ₀ = 0.
    pub initial_radius: Option<f64>,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            max_nfev: 80,
            ftol: 1e-14,
            xtol: 1e-14,
            gtol: 1e-14,
            initial_radius: None,
        }
    }
}

impl TrustRegionConfig {
    fn validate(&self) -> Result<()> {
        if self.max_nfev == 0 {
            return Err(Error::invalid("max_nfev must be at least 1"));
        }
        for (name, v) in [("ftol", self.ftol), ("xtol", self.xtol), ("gtol", self.gtol)] {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        if let Some(r) = self.initial_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("initial_radius must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbConfig {
    pub delta: f64,
    pub eta: u8,
    pub epsilon: f64,
    /// Residual-evaluation budget of every inner trust-region solve.
    pub max_nllsq_iterations: usize,
    pub max_sub_iterations: usize,
    pub theta0: Vec<f64>,
}

impl PerturbConfig {
    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta must be positive"));
        }
        if self.eta > 1 {
            return Err(Error::invalid("eta must be 0 or 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.max_nllsq_iterations == 0 {
            return Err(Error::invalid("max_nllsq_iterations must be at least 1"));
        }
        if self.theta0.len() != dim {
            return Err(Error::invalid(format!(
                "theta0 has length {}, problem has {dim} unknowns",
                self.theta0.len()
            )));
        }
        Ok(())
    }
}

/// Why a trust-region solve stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    MaxNfev,
    Gtol,
    Ftol,
    Xtol,
    FtolXtol,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub theta: Vec<f64>,
    /// `½‖r(θ)‖²`.
    pub cost: f64,
    pub nfev: usize,
    pub njev: usize,
    pub n_restarts: usize,
    pub failed_attempts: usize,
    pub converged: bool,
    pub termination: Termination,
}

fn check_residual(f: &[f64], m: usize, theta: &[f64]) -> Result<()> {
    if f.len() != m {
        return Err(Error::invalid(format!(
            "residual has length {}, expected {m}",
            f.len()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric_at("non-finite residual", theta));
    }
    Ok(())
}

fn check_jacobian(j: &DenseMatrix, m: usize, n: usize, theta: &[f64]) -> Result<()> {
    if j.shape() != (m, n) {
        return Err(Error::invalid(format!(
            "jacobian has shape {:?}, expected ({m}, {n})",
            j.shape()
        )));
    }
    if !j.is_finite() {
        return Err(Error::numeric_at("non-finite jacobian", theta));
    }
    Ok(())
}

/// Levenberg–Marquardt step of norm at most Δ from a thin SVD of J.
///
/// Returns the step and the damping parameter that produced it.
fn lsq_trust_region_step(
    m: usize,
    n: usize,
    uf: &[f64],
    s: &[f64],
    svd: &ThinSvd,
    delta: f64,
    initial_alpha: f64,
) -> (Vec<f64>, f64) {
    const RTOL: f64 = 0.01;
    const MAX_ITER: usize = 10;

    let suf: Vec<f64> = s.iter().zip(uf).map(|(a, b)| a * b).collect();
    let phi_and_derivative = |alpha: f64| -> (f64, f64) {
        let mut p2 = 0.0;
        let mut d = 0.0;
        for (&si, &sufi) in s.iter().zip(&suf) {
            let denom = si * si + alpha;
            p2 += (sufi / denom).powi(2);
            d += sufi * sufi / (denom * denom * denom);
        }
        let p_norm = p2.sqrt();
        if p_norm == 0.0 {
            return (-delta, 0.0);
        }
        (p_norm - delta, -d / p_norm)
    };

    let full_rank = m >= n && s.last().copied().unwrap_or(0.0) > f64::EPSILON * m as f64 * s[0];
    if full_rank {
        let w: Vec<f64> = uf.iter().zip(s).map(|(u, si)| -u / si).collect();
        let p = svd.v_vec(&w);
        if norm2(&p) <= delta {
            return (p, 0.0);
        }
    }

    let mut alpha_upper = norm2(&suf) / delta;
    let mut alpha_lower = if full_rank {
        let (phi, phi_prime) = phi_and_derivative(0.0);
        -phi / phi_prime
    } else {
        0.0
    };
    let reset = |lo: f64, hi: f64| (0.001 * hi).max((lo * hi).sqrt());
    let mut alpha = if !full_rank && initial_alpha == 0.0 {
        reset(alpha_lower, alpha_upper)
    } else {
        initial_alpha
    };
    for _ in 0..MAX_ITER {
        if alpha < alpha_lower || alpha > alpha_upper {
            alpha = reset(alpha_lower, alpha_upper);
        }
        let (phi, phi_prime) = phi_and_derivative(alpha);
        if phi_prime == 0.0 {
            break;
        }
        if phi < 0.0 {
            alpha_upper = alpha;
        }
        let ratio = phi / phi_prime;
        alpha_lower = alpha_lower.max(alpha - ratio);
        alpha -= (phi + delta) * ratio / delta;
        if phi.abs() < RTOL * delta {
            break;
        }
    }
    let w: Vec<f64> = suf
        .iter()
        .zip(s)
        .map(|(sufi, si)| -sufi / (si * si + alpha))
        .collect();
    let mut p = svd.v_vec(&w);
    let pn = norm2(&p);
    if pn > 0.0 {
        let c = delta / pn;
        p.iter_mut().for_each(|v| *v *= c);
    }
    (p, alpha)
}

fn update_tr_radius(
    delta: f64,
    actual: f64,
    predicted: f64,
    step_norm: f64,
    bound_hit: bool,
) -> (f64, f64) {
    let ratio = if predicted > 0.0 {
        actual / predicted
    } else if predicted == 0.0 && actual == 0.0 {
        1.0
    } else {
        0.0
    };
    let delta = if ratio < 0.25 {
        0.25 * step_norm
    } else if ratio > 0.75 && bound_hit {
        2.0 * delta
    } else {
        delta
    };
    (delta, ratio)
}

fn check_termination(
    d_f: f64,
    f: f64,
    dx_norm: f64,
    x_norm: f64,
    ratio: f64,
    ftol: f64,
    xtol: f64,
) -> Option<Termination> {
    let ftol_ok = d_f < ftol * f && ratio > 0.25;
    let xtol_ok = dx_norm < xtol * (xtol + x_norm);
    match (ftol_ok, xtol_ok) {
        (true, true) => Some(Termination::FtolXtol),
        (true, false) => Some(Termination::Ftol),
        (false, true) => Some(Termination::Xtol),
        _ => None,
    }
}

/// Minimize `½‖r(θ)‖²` from `theta0` by a trust-region Gauss–Newton iteration.
pub fn trust_region_solve<P: NllsqProblem + ?Sized>(
    problem: &mut P,
    theta0: &[f64],
    cfg: &TrustRegionConfig,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    let n = problem.dim_theta();
    let m = problem.dim_residual();
    if theta0.len() != n {
        return Err(Error::invalid(format!(
            "theta0 has length {}, expected {n}",
            theta0.len()
        )));
    }
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("theta0 is not finite"));
    }

    let mut x = theta0.to_vec();
    let mut f = problem.residual(&x)?;
    check_residual(&f, m, &x)?;
    let mut nfev = 1;
    let mut jac = problem.jacobian(&x)?;
    check_jacobian(&jac, m, n, &x)?;
    let mut njev = 1;
    let mut cost = 0.5 * dot(&f, &f);
    let mut g = jac.tr_matvec(&f);

    let mut delta = cfg.initial_radius.unwrap_or_else(|| {
        let d = norm2(&x);
        if d == 0.0 {
            1.0
        } else {
            d
        }
    });
    let mut alpha = 0.0;
    let mut termination = None;

    loop {
        if norm_inf(&g) < cfg.gtol {
            termination = Some(Termination::Gtol);
        }
        if termination.is_some() || nfev >= cfg.max_nfev {
            break;
        }
        let svd = ThinSvd::new(&jac).map_err(|e| match e {
            Error::NumericFailure { message, .. } => Error::numeric_at(message, &x),
            other => other,
        })?;
        let uf = svd.ut_vec(&f);
        let s = svd.singular_values().to_vec();

        let mut actual_reduction = -1.0;
        let mut accepted: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        while actual_reduction <= 0.0 && nfev < cfg.max_nfev {
            let (step, a) = lsq_trust_region_step(m, n, &uf, &s, &svd, delta, alpha);
            alpha = a;
            let js = jac.matvec(&step);
            let predicted = -(0.5 * dot(&js, &js) + dot(&g, &step));
            let x_new: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let f_new = problem.residual(&x_new)?;
            nfev += 1;
            if f_new.len() != m {
                return Err(Error::invalid("residual length changed between calls"));
            }
            let step_norm = norm2(&step);
            if f_new.iter().any(|v| !v.is_finite()) {
                delta = 0.25 * step_norm;
                continue;
            }
            let cost_new = 0.5 * dot(&f_new, &f_new);
            actual_reduction = cost - cost_new;
            let (delta_new, ratio) = update_tr_radius(
                delta,
                actual_reduction,
                predicted,
                step_norm,
                step_norm > 0.95 * delta,
            );
            termination = check_termination(
                actual_reduction,
                cost,
                step_norm,
                norm2(&x),
                ratio,
                cfg.ftol,
                cfg.xtol,
            );
            if actual_reduction > 0.0 {
                accepted = Some((x_new, f_new, cost_new));
            }
            if termination.is_some() {
                break;
            }
            if delta_new <= 0.0 {
                termination = Some(Termination::Xtol);
                break;
            }
            alpha *= delta / delta_new;
            delta = delta_new;
        }

        if let Some((x_new, f_new, cost_new)) = accepted.filter(|_| actual_reduction > 0.0) {
            x = x_new;
            f = f_new;
            cost = cost_new;
            jac = problem.jacobian(&x)?;
            check_jacobian(&jac, m, n, &x)?;
            njev += 1;
            g = jac.tr_matvec(&f);
        }
    }

    Ok(SolveOutcome {
        theta: x,
        cost,
        nfev,
        njev,
        n_restarts: 0,
        failed_attempts: 0,
        converged: termination.is_some(),
        termination: termination.unwrap_or(Termination::MaxNfev),
    })
}

/// Uniform vector on `[−δ₁, δ₁]^dim` with `δ₁ = ξδ`, `ξ ~ U[0, 1]`.
pub fn perturbation_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, delta: f64) -> Vec<f64> {
    let xi: f64 = rng.random();
    let d1 = xi * delta;
    (0..dim)
        .map(|_| {
            let u: f64 = rng.random();
            d1 * (2.0 * u - 1.0)
        })
        .collect()
}

/// Nonlinear least squares with random restarts around the origin (`eta = 0`)
/// or the best solution so far (`eta = 1`).
///
/// The inner budget `pcfg.max_nllsq_iterations` overrides `trcfg.max_nfev`.
/// A restart whose inner solve fails numerically is skipped but still counts
/// toward `max_sub_iterations`.
pub fn nllsq_perturb<P: NllsqProblem + ?Sized, R: Rng + ?Sized>(
    problem: &mut P,
    pcfg: &PerturbConfig,
    trcfg: &TrustRegionConfig,
    rng: &mut R,
) -> Result<SolveOutcome> {
    pcfg.validate(problem.dim_theta())?;
    let cfg = TrustRegionConfig {
        max_nfev: pcfg.max_nllsq_iterations,
        ..trcfg.clone()
    };

    let mut total_nfev = 0;
    let mut total_njev = 0;
    let mut failed = 0;
    let mut last_error = None;
    let mut best: Option<SolveOutcome> = None;

    match trust_region_solve(problem, &pcfg.theta0, &cfg) {
        Ok(out) => {
            total_nfev += out.nfev;
            total_njev += out.njev;
            best = Some(out);
        }
        Err(e @ Error::NumericFailure { .. }) => {
            failed += 1;
            last_error = Some(e);
        }
        Err(e) => return Err(e),
    }

    let done = |b: &Option<SolveOutcome>| b.as_ref().is_some_and(|o| o.cost < pcfg.epsilon);
    let mut restarts = 0;
    if !done(&best) {
        for _ in 0..pcfg.max_sub_iterations {
            restarts += 1;
            let dtheta = perturbation_vector(rng, pcfg.theta0.len(), pcfg.delta);
            let start: Vec<f64> = if pcfg.eta == 0 {
                dtheta
            } else {
                let centre = best.as_ref().map_or(&pcfg.theta0, |b| &b.theta);
                centre.iter().zip(&dtheta).map(|(a, b)| a + b).collect()
            };
            match trust_region_solve(problem, &start, &cfg) {
                Ok(out) => {
                    total_nfev += out.nfev;
                    total_njev += out.njev;
                    if best.as_ref().is_none_or(|b| out.cost < b.cost) {
                        best = Some(out);
                        if done(&best) {
                            break;
                        }
                    }
                }
                Err(e @ Error::NumericFailure { .. }) => {
                    failed += 1;
                    last_error = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
    }

    match best {
        Some(mut out) => {
            out.converged = out.converged || out.cost < pcfg.epsilon;
            out.nfev = total_nfev;
            out.njev = total_njev;
            out.n_restarts = restarts;
            out.failed_attempts = failed;
            Ok(out)
        }
        None => Err(last_error.unwrap_or_else(|| Error::numeric("every attempt failed"))),
    }
}
