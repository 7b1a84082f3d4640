//! Relative errors of the recovered coefficients and solution field.

use serde::Serialize;

use crate::basis::EnsembleBasis;
use crate::error::{Error, Result};
use crate::geometry::Discretization;
use crate::problem::InverseProblem;
use crate::solvers::InverseSolution;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `|α_i − α_i,ex| / |α_i,ex|` per scalar coefficient.
    pub e_alpha: Vec<f64>,
    pub linf_u: f64,
    pub l2_u: f64,
    pub linf_gamma: Option<f64>,
    pub l2_gamma: Option<f64>,
    pub wall_ms: f64,
}

/// Uniform `q₀ × q₁` grid on a box, corners included.
pub fn eval_grid(lo: [f64; 2], hi: [f64; 2], q: (usize, usize)) -> Vec<[f64; 2]> {
    let coord = |l: f64, h: f64, i: usize, n: usize| {
        if n == 1 {
            0.5 * (l + h)
        } else if i + 1 == n {
            h
        } else {
            l + i as f64 * (h - l) / (n - 1) as f64
        }
    };
    let mut pts = Vec::with_capacity(q.0 * q.1);
    for i in 0..q.0 {
        for j in 0..q.1 {
            pts.push([coord(lo[0], hi[0], i, q.0), coord(lo[1], hi[1], j, q.1)]);
        }
    }
    pts
}

/// Max and RMS of `approx − exact`, both divided by the RMS of `exact`.
pub fn relative_field_errors(approx: &[f64], exact: &[f64]) -> (f64, f64) {
    let n = exact.len() as f64;
    let rms_ex = (exact.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let mut max = 0.0_f64;
    let mut sq = 0.0;
    for (a, e) in approx.iter().zip(exact) {
        let d = a - e;
        max = max.max(d.abs());
        sq += d * d;
    }
    (max / rms_ex, (sq / n).sqrt() / rms_ex)
}

fn expand(basis: &EnsembleBasis, e: usize, pts: &[[f64; 2]], coef: &[f64]) -> Vec<f64> {
    let m = basis.width();
    let phi = basis.values(e, pts);
    phi.chunks_exact(m)
        .map(|row| row.iter().zip(coef).map(|(a, b)| a * b).sum())
        .collect()
}

/// Errors against the problem's reference solution on a `q_eval` grid per
/// subdomain.
pub fn compute_errors(
    solution: &InverseSolution,
    problem: &InverseProblem,
    disc: &Discretization,
    basis: &EnsembleBasis,
    q_eval: (usize, usize),
) -> Result<ErrorReport> {
    let reference = problem
        .reference
        .as_ref()
        .ok_or_else(|| Error::Unsupported("problem has no reference solution".into()))?;
    if q_eval.0 == 0 || q_eval.1 == 0 {
        return Err(Error::invalid("q_eval must be positive"));
    }
    let m = basis.width();
    if solution.beta.len() != disc.n_sub() * m || basis.n_sub() != disc.n_sub() {
        return Err(Error::invalid("solution does not match the discretization"));
    }

    let mut u = Vec::new();
    let mut u_ex = Vec::new();
    let mut gamma = Vec::new();
    let mut gamma_ex = Vec::new();
    for (e, s) in disc.subs.iter().enumerate() {
        let pts = eval_grid(s.lo, s.hi, q_eval);
        u.extend(expand(basis, e, &pts, &solution.beta[e * m..(e + 1) * m]));
        u_ex.extend(pts.iter().map(|&[x, y]| (reference.u)(x, y)));
        if let Some(g) = &reference.gamma {
            if problem.is_field() {
                gamma.extend(expand(basis, e, &pts, &solution.alpha[e * m..(e + 1) * m]));
                gamma_ex.extend(pts.iter().map(|&[x, y]| g(x, y)));
            }
        }
    }
    let (linf_u, l2_u) = relative_field_errors(&u, &u_ex);
    let (linf_gamma, l2_gamma) = if gamma.is_empty() {
        (None, None)
    } else {
        let (a, b) = relative_field_errors(&gamma, &gamma_ex);
        (Some(a), Some(b))
    };
    let e_alpha = if problem.is_field() {
        Vec::new()
    } else {
        solution
            .alpha
            .iter()
            .zip(&reference.alpha)
            .map(|(a, ex)| (a - ex).abs() / ex.abs())
            .collect()
    };
    Ok(ErrorReport {
        e_alpha,
        linf_u,
        l2_u,
        linf_gamma,
        l2_gamma,
        wall_ms: 0.0,
    })
}
