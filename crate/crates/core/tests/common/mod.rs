//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use invpde::basis::EnsembleBasis;
use invpde::experiment::{build_case, Case, RunConfig};
use invpde::geometry::Edge;
use invpde::{Benchmark, DenseMatrix, Jet2, SolverKind, SystemTables};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| r.random::<f64>() * 2.0 - 1.0).collect())
        .collect()
}

pub fn to_dense(a: &[Vec<f64>]) -> DenseMatrix {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    DenseMatrix::from_fn(rows, cols, |i, j| a[i][j])
}

pub fn from_dense(a: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b[0].len();
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| {
                    let mut s = 0.0;
                    for (k, v) in row.iter().enumerate() {
                        s += v * b[k][j];
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = a.first().map_or(0, |r| r.len());
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn frob(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frob_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One-sided Jacobi SVD: returns `(U, σ, V)` with `A = U diag(σ) Vᵀ`,
/// `U` of shape `m × n`, for `m ≥ n`.
pub fn jacobi_svd(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let m = a.len();
    let n = a[0].len();
    assert!(m >= n, "jacobi_svd expects a tall matrix");
    let mut u: Vec<Vec<f64>> = transpose(a); // columns of A as rows
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (u[p][k], u[q][k]);
                    u[p][k] = c * x - s * y;
                    u[q][k] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (v[p][k], v[q][k]);
                    v[p][k] = c * x - s * y;
                    v[q][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = u.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let ucols: Vec<Vec<f64>> = u
        .iter()
        .zip(&sigma)
        .map(|(c, &s)| c.iter().map(|x| if s > 0.0 { x / s } else { 0.0 }).collect())
        .collect();
    // ucols[j] is column j of U; v[j] is column j of V.
    (transpose(&ucols), sigma, transpose(&v))
}

/// `A⁺` with singular values below `rcond · σ_max` dropped.
pub fn pinv(a: &[Vec<f64>], rcond: f64) -> Vec<Vec<f64>> {
    let m = a.len();
    let n = a[0].len();
    if m < n {
        return transpose(&pinv(&transpose(a), rcond));
    }
    let (u, s, v) = jacobi_svd(a);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let mut out = vec![vec![0.0; m]; n];
    for (k, &sk) in s.iter().enumerate() {
        if sk <= rcond * smax || sk == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..m {
                out[i][j] += v[i][k] * u[j][k] / sk;
            }
        }
    }
    out
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Random rank-`r` matrix as a product of random factors.
pub fn random_low_rank(g: &mut ChaCha8Rng, rows: usize, cols: usize, r: usize) -> Vec<Vec<f64>> {
    let a = random_matrix(g, rows, r);
    let b = random_matrix(g, r, cols);
    naive_matmul(&a, &b)
}

/// Fourth-order central differences of a scalar function of two variables.
pub fn fd_jet(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> Jet2 {
    let d1 = |g: &dyn Fn(f64) -> f64| (-g(2.0 * h) + 8.0 * g(h) - 8.0 * g(-h) + g(-2.0 * h)) / (12.0 * h);
    let d2 = |g: &dyn Fn(f64) -> f64| {
        (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
    };
    let gx = |s: f64| f(x + s, y);
    let gy = |s: f64| f(x, y + s);
    Jet2 {
        value: f(x, y),
        dx: d1(&gx),
        dy: d1(&gy),
        dxx: d2(&gx),
        dyy: d2(&gy),
    }
}

pub fn random_jet(g: &mut ChaCha8Rng, scale: f64) -> Jet2 {
    let mut d = || scale * (2.0 * g.random::<f64>() - 1.0);
    Jet2 {
        value: d(),
        dx: d(),
        dy: d(),
        dxx: d(),
        dyy: d(),
    }
}

/// Small configuration used by the structural tests.
pub fn small_config(bench: Benchmark, n_sub: [usize; 2], q: usize, m: usize, q_s: usize) -> RunConfig {
    let mut cfg = RunConfig::new(bench, SolverKind::Nllsq);
    cfg.domain.n_sub = n_sub;
    cfg.discretization.q = [q, q];
    cfg.discretization.q_s = q_s;
    cfg.network.layers = vec![2, m, 1];
    cfg
}

pub fn small_case(bench: Benchmark, n_sub: [usize; 2], q: usize, m: usize, q_s: usize) -> Case {
    build_case(&small_config(bench, n_sub, q, m, q_s)).expect("case")
}

pub fn random_theta(g: &mut ChaCha8Rng, tables: &SystemTables, scale: f64) -> Vec<f64> {
    (0..tables.n_theta())
        .map(|_| scale * (2.0 * g.random::<f64>() - 1.0))
        .collect()
}

/// Jets of `u = Σ_j β_j φ_j` by explicit summation over freshly evaluated basis jets.
pub fn u_jet(basis: &EnsembleBasis, e: usize, pt: [f64; 2], beta_e: &[f64]) -> Jet2 {
    let t = basis.jets(e, &[pt]);
    let mut u = Jet2::default();
    for (j, b) in beta_e.iter().enumerate() {
        let p = t.jet(0, j);
        u.value += b * p.value;
        u.dx += b * p.dx;
        u.dy += b * p.dy;
        u.dxx += b * p.dxx;
        u.dyy += b * p.dyy;
    }
    u
}

/// PDE residual `Σ α_i L_i(u) + F(u) − f` written out by hand per benchmark.
pub fn pde_lhs(bench: Benchmark, alpha: &[f64], gamma: f64, u: &Jet2) -> f64 {
    match bench {
        Benchmark::Poisson => u.dxx + alpha[0] * u.dyy,
        Benchmark::Advection => u.dy - alpha[0] * u.dx,
        Benchmark::NonlinearHelmholtz => {
            u.dxx + u.dyy - alpha[0] * u.value + alpha[1] * (2.0 * u.value).cos()
        }
        Benchmark::Burgers => u.dy + alpha[0] * u.value * u.dx - alpha[1] * u.dxx,
        Benchmark::SineGordan => {
            u.dyy - alpha[0] * u.dxx + alpha[1] * u.value + alpha[2] * u.value.sin()
        }
        Benchmark::VarCoeffHelmholtz => u.dxx + u.dyy - gamma * u.value,
    }
}

fn on_edge(bench: Benchmark, pt: [f64; 2], edge: Edge) -> bool {
    let [(a1, b1), (a2, b2)] = bench.bounds();
    match edge {
        Edge::Left => pt[0] == a1,
        Edge::Right => pt[0] == b1,
        Edge::Bottom => pt[1] == a2,
        Edge::Top => pt[1] == b2,
    }
}

/// Residual blocks of the whole system rebuilt from scratch, keyed by block label.
/// Boundary and continuity blocks are returned sorted, so only the multiset of
/// row values is compared against the library.
pub struct NaiveResidual {
    pub pde: Vec<f64>,
    pub bc: Vec<(String, Vec<f64>)>,
    pub mea: Vec<f64>,
    pub ck: Vec<f64>,
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn naive_residual(bench: Benchmark, case: &Case, theta: &[f64], lambda_mea: f64) -> NaiveResidual {
    let disc = &case.disc;
    let basis = &case.basis;
    let m = basis.width();
    let n_alpha = case.tables.n_alpha;
    let (alpha, beta) = theta.split_at(n_alpha);
    let field = bench == Benchmark::VarCoeffHelmholtz;
    let be = |e: usize| &beta[e * m..(e + 1) * m];
    let gamma_at = |e: usize, pt: [f64; 2]| -> f64 {
        if !field {
            return 0.0;
        }
        let v = basis.values(e, &[pt]);
        v.iter().zip(&alpha[e * m..(e + 1) * m]).map(|(a, b)| a * b).sum()
    };

    let mut pde = Vec::new();
    for (e, s) in disc.subs.iter().enumerate() {
        for &pt in &s.colloc {
            let u = u_jet(basis, e, pt, be(e));
            pde.push(pde_lhs(bench, alpha, gamma_at(e, pt), &u) - bench.source(pt[0], pt[1]));
        }
    }

    let value_rows = |edge: Edge| -> Vec<f64> {
        let mut rows = Vec::new();
        for (e, s) in disc.subs.iter().enumerate() {
            for &pt in &s.colloc {
                if on_edge(bench, pt, edge) {
                    rows.push(u_jet(basis, e, pt, be(e)).value - bench.exact_u(pt[0], pt[1]));
                }
            }
        }
        sorted(rows)
    };
    let bc = match bench {
        Benchmark::Advection => {
            let mut periodic = Vec::new();
            for (e, s) in disc.subs.iter().enumerate() {
                for &pt in &s.colloc {
                    if on_edge(bench, pt, Edge::Left) {
                        let partner = [bench.bounds()[0].1, pt[1]];
                        let (e2, _) = disc
                            .subs
                            .iter()
                            .enumerate()
                            .find(|(_, t)| t.ij.1 == s.ij.1 && t.colloc.contains(&partner))
                            .expect("periodic partner");
                        periodic.push(u_jet(basis, e, pt, be(e)).value - u_jet(basis, e2, partner, be(e2)).value);
                    }
                }
            }
            vec![("periodic".to_string(), sorted(periodic)), ("initial".into(), value_rows(Edge::Bottom))]
        }
        Benchmark::Burgers => vec![
            ("bc1".into(), value_rows(Edge::Left)),
            ("bc2".into(), value_rows(Edge::Right)),
            ("initial".into(), value_rows(Edge::Bottom)),
        ],
        Benchmark::SineGordan => {
            let mut vel = Vec::new();
            for (e, s) in disc.subs.iter().enumerate() {
                for &pt in &s.colloc {
                    if on_edge(bench, pt, Edge::Bottom) {
                        vel.push(u_jet(basis, e, pt, be(e)).dy - bench.exact_jet(pt[0], pt[1]).dy);
                    }
                }
            }
            vec![
                ("bc1".into(), value_rows(Edge::Left)),
                ("bc2".into(), value_rows(Edge::Right)),
                ("initial".into(), value_rows(Edge::Bottom)),
                ("initial_velocity".into(), sorted(vel)),
            ]
        }
        _ => vec![
            ("bc1".into(), value_rows(Edge::Left)),
            ("bc2".into(), value_rows(Edge::Right)),
            ("bc3".into(), value_rows(Edge::Bottom)),
            ("bc4".into(), value_rows(Edge::Top)),
        ],
    };

    let mut mea = Vec::new();
    for (e, s) in disc.subs.iter().enumerate() {
        for &pt in &s.meas {
            let u = u_jet(basis, e, pt, be(e)).value;
            mea.push(lambda_mea * u - lambda_mea * bench.exact_u(pt[0], pt[1]));
        }
    }

    // Continuity: every pair of distinct subdomains sharing a collocation point
    // on an interior vertical (x) or horizontal (y) interface.
    let (k1, k2) = disc.spec.cont_order;
    let mut ck = Vec::new();
    for (e1, s1) in disc.subs.iter().enumerate() {
        for (e2, s2) in disc.subs.iter().enumerate() {
            let vertical = s1.hi[0] == s2.lo[0] && s1.lo[1] == s2.lo[1];
            let horizontal = s1.hi[1] == s2.lo[1] && s1.lo[0] == s2.lo[0];
            if !vertical && !horizontal {
                continue;
            }
            for &pt in &s1.colloc {
                let shared = if vertical { pt[0] == s1.hi[0] } else { pt[1] == s1.hi[1] };
                if !shared || !s2.colloc.contains(&pt) {
                    continue;
                }
                let a = u_jet(basis, e1, pt, be(e1));
                let b = u_jet(basis, e2, pt, be(e2));
                ck.push(a.value - b.value);
                if vertical && k1 == 1 {
                    ck.push(a.dx - b.dx);
                }
                if horizontal && k2 == 1 {
                    ck.push(a.dy - b.dy);
                }
            }
        }
    }
    NaiveResidual {
        pde,
        bc,
        mea,
        ck: sorted(ck),
    }
}

/// Central-difference Jacobian with a step relative to each coordinate.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, theta: &[f64], rel: f64) -> Vec<Vec<f64>> {
    let m = f(theta).len();
    let mut out = vec![vec![0.0; theta.len()]; m];
    let mut t = theta.to_vec();
    for k in 0..theta.len() {
        let h = rel * theta[k].abs().max(1.0);
        t[k] = theta[k] + h;
        let fp = f(&t);
        t[k] = theta[k] - h;
        let fm = f(&t);
        t[k] = theta[k];
        for i in 0..m {
            out[i][k] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

/// Global minimizer of a 1-D cost by dense grid search followed by golden-section refinement.
pub fn grid_min(cost: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, cost(lo));
    for i in 1..n {
        let x = lo + i as f64 * step;
        let c = cost(x);
        if c < best.1 {
            best = (x, c);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    (x, cost(x))
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Shifts the data of `t` so that `theta` has an exactly zero residual.
pub fn make_consistent(t: &mut SystemTables, theta: &[f64]) {
    let r = invpde::assembly::full_residual(theta, t).unwrap();
    let lay = t.layout.clone();
    let q = t.disc.n_colloc();
    for (e, src) in t.source.iter_mut().enumerate() {
        for (p, f) in src.iter_mut().enumerate() {
            *f += r[lay.pde.offset + e * q + p];
        }
    }
    for (block, bb) in lay.bc.iter().zip(&mut t.problem.boundary) {
        for (k, row) in bb.rows.iter_mut().enumerate() {
            row.rhs += r[block.offset + k];
        }
    }
    let lm = t.opts.lambda_mea;
    for (k, m) in t.problem.measurements.iter_mut().enumerate() {
        m.datum += r[lay.mea.offset + k] / lm;
    }
}
