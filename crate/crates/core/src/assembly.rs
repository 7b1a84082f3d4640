//! Residual vectors, Jacobians and the variable-projection systems.
//!
//! Rows are laid out as `[pde | boundary blocks | mea | ck1..ck4 | reg]` and
//! columns as `θ = [α | β]`, with `β` stacked subdomain by subdomain.
//! The continuity blocks are C⁰ and C¹ (in x) across vertical interfaces,
//! then C⁰ and C¹ (in y) across horizontal ones.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::basis::{BasisTable, EnsembleBasis, Jet2, JetComponent};
use crate::error::{Error, Result};
use crate::geometry::{Discretization, InterfacePair};
use crate::linalg::{matmul, DenseMatrix, ThinSvd, DEFAULT_RCOND};
use crate::problem::{Coefficients, InverseProblem, OperatorKernel};

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub label: String,
    pub offset: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualLayout {
    pub pde: Block,
    pub bc: Vec<Block>,
    pub mea: Block,
    /// Always four blocks; absent conditions have length 0.
    pub ck: Vec<Block>,
    pub reg_alpha: Option<Block>,
    pub reg_beta: Option<Block>,
    pub total: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub lambda_mea: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub rcond: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            lambda_mea: 1.0,
            lambda_1: 0.0,
            lambda_2: 0.0,
            rcond: DEFAULT_RCOND,
        }
    }
}

/// Jets of `u` at the collocation and measurement points of every subdomain.
#[derive(Clone, Debug, PartialEq)]
pub struct UJets {
    pub colloc: Vec<Vec<Jet2>>,
    pub meas: Vec<Vec<Jet2>>,
}

/// Newton linearization point: the jets of `u_k` at the collocation points.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub u_k: Vec<Vec<Jet2>>,
}

/// A nonlinear kernel replaced by its affine model around `at`.
#[derive(Clone, Copy, Debug)]
pub struct LinearizedKernel {
    pub kernel: OperatorKernel,
    pub at: Jet2,
}

impl LinearizedKernel {
    /// `L(u_k) + L'(u_k)(u − u_k)`.
    pub fn eval(&self, u: &Jet2) -> f64 {
        self.kernel.eval(&self.at) + self.kernel.gateaux(&self.at, &(*u - self.at))
    }

    /// The linear part `φ ↦ L'(u_k)φ`.
    pub fn linear_part(&self, phi: &Jet2) -> f64 {
        self.kernel.gateaux(&self.at, phi)
    }

    /// The constant moved to the right-hand side: `L(u_k) − L'(u_k)u_k`.
    pub fn offset(&self) -> f64 {
        self.kernel.eval(&self.at) - self.kernel.gateaux(&self.at, &self.at)
    }
}

/// Linearization of `problem`'s kernels around the collocation jets `u_k`.
pub fn newton_linearize(u_k: Vec<Vec<Jet2>>) -> Linearization {
    Linearization { u_k }
}

/// Precomputed basis data and row layout for one inverse problem.
///
/// Holds a single-entry cache of `u` jets keyed by the exact `β` of the last
/// evaluation, so a residual followed by a Jacobian at the same point does
/// not recombine the basis twice.
pub struct SystemTables {
    pub problem: InverseProblem,
    pub disc: Discretization,
    pub width: usize,
    pub n_alpha: usize,
    pub colloc: Vec<BasisTable>,
    pub meas: Vec<BasisTable>,
    /// `f` at the collocation points.
    pub source: Vec<Vec<f64>>,
    pub layout: ResidualLayout,
    pub opts: AssemblyOptions,
    /// Coefficient kernels followed by `F`.
    kernels: Vec<OperatorKernel>,
    /// For linear kernels, `L(φ_ej)(x_p)` as `Q × M` per subdomain.
    linear_mats: Vec<Option<Vec<Vec<f64>>>>,
    cache: RefCell<Option<(Vec<f64>, Rc<UJets>)>>,
    cache_enabled: Cell<bool>,
}

impl std::fmt::Debug for SystemTables {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemTables")
            .field("problem", &self.problem.name)
            .field("width", &self.width)
            .field("n_alpha", &self.n_alpha)
            .field("layout", &self.layout)
            .finish()
    }
}

impl SystemTables {
    pub fn new(
        problem: InverseProblem,
        disc: &Discretization,
        basis: &EnsembleBasis,
        opts: AssemblyOptions,
    ) -> Result<Self> {
        if basis.n_sub() != disc.n_sub() {
            return Err(Error::invalid(format!(
                "basis has {} subdomains, discretization {}",
                basis.n_sub(),
                disc.n_sub()
            )));
        }
        if !(opts.lambda_mea > 0.0) || !(opts.lambda_1 >= 0.0) || !(opts.lambda_2 >= 0.0) {
            return Err(Error::invalid("lambda_mea must be positive, lambda_1/2 non-negative"));
        }
        if !(0.0..1.0).contains(&opts.rcond) {
            return Err(Error::invalid("rcond must lie in [0, 1)"));
        }
        let n_sub = disc.n_sub();
        let q = disc.n_colloc();
        for row in problem.boundary.iter().flat_map(|b| &b.rows) {
            if row.terms.is_empty() {
                return Err(Error::invalid("boundary row without terms"));
            }
            if row.terms.iter().any(|t| t.sub >= n_sub || t.point >= q) {
                return Err(Error::invalid("boundary term references a missing point"));
            }
        }
        for m in &problem.measurements {
            if m.sub >= n_sub || m.point >= disc.subs[m.sub].meas.len() {
                return Err(Error::invalid("measurement references a missing point"));
            }
        }

        let width = basis.width();
        let n_alpha = problem.n_alpha(n_sub, width);
        let colloc: Vec<BasisTable> = (0..n_sub).map(|e| basis.jets(e, &disc.subs[e].colloc)).collect();
        let meas: Vec<BasisTable> = (0..n_sub).map(|e| basis.jets(e, &disc.subs[e].meas)).collect();
        let source = disc
            .subs
            .iter()
            .map(|s| s.colloc.iter().map(|&[x, y]| (problem.source)(x, y)).collect())
            .collect();

        let mut kernels = match &problem.coefficients {
            Coefficients::Scalar { kernels } => kernels.clone(),
            Coefficients::Field { kernel } => vec![*kernel],
        };
        kernels.push(problem.forcing);
        let linear_mats = kernels
            .iter()
            .map(|k| {
                k.is_linear.then(|| {
                    colloc
                        .iter()
                        .map(|t| {
                            let mut v = Vec::with_capacity(t.n_points * t.width);
                            for p in 0..t.n_points {
                                for j in 0..t.width {
                                    v.push(k.eval(&t.jet(p, j)));
                                }
                            }
                            v
                        })
                        .collect()
                })
            })
            .collect();

        let layout = build_layout(&problem, disc, n_alpha, width, &opts);
        Ok(SystemTables {
            problem,
            disc: disc.clone(),
            width,
            n_alpha,
            colloc,
            meas,
            source,
            layout,
            opts,
            kernels,
            linear_mats,
            cache: RefCell::new(None),
            cache_enabled: Cell::new(true),
        })
    }

    pub fn n_sub(&self) -> usize {
        self.disc.n_sub()
    }

    /// `N·M`.
    pub fn n_beta(&self) -> usize {
        self.n_sub() * self.width
    }

    pub fn n_theta(&self) -> usize {
        self.n_alpha + self.n_beta()
    }

    pub fn n_rows(&self) -> usize {
        self.layout.total
    }

    pub fn set_cache_enabled(&self, on: bool) {
        self.cache_enabled.set(on);
        if !on {
            self.cache.borrow_mut().take();
        }
    }

    fn n_coef_kernels(&self) -> usize {
        self.kernels.len() - 1
    }

    fn forcing_index(&self) -> usize {
        self.kernels.len() - 1
    }

    pub fn split_theta<'t>(&self, theta: &'t [f64]) -> Result<(&'t [f64], &'t [f64])> {
        if theta.len() != self.n_theta() {
            return Err(Error::invalid(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.n_theta()
            )));
        }
        Ok(theta.split_at(self.n_alpha))
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.n_alpha {
            return Err(Error::invalid(format!(
                "alpha has length {}, expected {}",
                alpha.len(),
                self.n_alpha
            )));
        }
        Ok(())
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.n_beta() {
            return Err(Error::invalid(format!(
                "beta has length {}, expected {}",
                beta.len(),
                self.n_beta()
            )));
        }
        Ok(())
    }

    fn check_lin(&self, lin: Option<&Linearization>) -> Result<()> {
        if let Some(l) = lin {
            let ok = l.u_k.len() == self.n_sub()
                && l.u_k.iter().all(|v| v.len() == self.disc.n_colloc());
            if !ok {
                return Err(Error::invalid("linearization does not match the discretization"));
            }
        }
        Ok(())
    }

    /// Jets of `u = Σ β_ej φ_ej` at every collocation and measurement point.
    pub fn u_jets(&self, beta: &[f64]) -> Result<Rc<UJets>> {
        self.check_beta(beta)?;
        if self.cache_enabled.get() {
            if let Some((key, jets)) = self.cache.borrow().as_ref() {
                if key.as_slice() == beta {
                    return Ok(Rc::clone(jets));
                }
            }
        }
        let m = self.width;
        let combine = |tables: &[BasisTable]| -> Vec<Vec<Jet2>> {
            tables
                .iter()
                .enumerate()
                .map(|(e, t)| {
                    let b = &beta[e * m..(e + 1) * m];
                    (0..t.n_points).map(|p| t.combine(p, b)).collect()
                })
                .collect()
        };
        let jets = Rc::new(UJets {
            colloc: combine(&self.colloc),
            meas: combine(&self.meas),
        });
        if self.cache_enabled.get() {
            *self.cache.borrow_mut() = Some((beta.to_vec(), Rc::clone(&jets)));
        }
        Ok(jets)
    }

    /// Collocation jets of `u` for building a [`Linearization`].
    pub fn linearize_at(&self, beta: &[f64]) -> Result<Linearization> {
        Ok(newton_linearize(self.u_jets(beta)?.colloc.clone()))
    }

    #[inline]
    fn k_eval(&self, k: usize, lin: Option<&Linearization>, e: usize, p: usize, u: &Jet2) -> f64 {
        let ker = &self.kernels[k];
        match lin {
            Some(l) if !ker.is_linear => LinearizedKernel {
                kernel: *ker,
                at: l.u_k[e][p],
            }
            .eval(u),
            _ => ker.eval(u),
        }
    }

    /// Row `p` of `φ ↦ L_k'(u)φ` over the basis of subdomain `e`, scaled by `c`
    /// and accumulated into `out`.
    fn k_gateaux_row(
        &self,
        k: usize,
        lin: Option<&Linearization>,
        e: usize,
        p: usize,
        u: &Jet2,
        c: f64,
        out: &mut [f64],
    ) {
        if c == 0.0 {
            return;
        }
        let m = self.width;
        if let Some(mats) = &self.linear_mats[k] {
            let row = &mats[e][p * m..(p + 1) * m];
            for (o, v) in out.iter_mut().zip(row) {
                *o += c * v;
            }
            return;
        }
        let ker = &self.kernels[k];
        let at = match lin {
            Some(l) => l.u_k[e][p],
            None => *u,
        };
        // The derivative is linear in φ, so it is a fixed combination of the
        // jet components of each basis function.
        let t = &self.colloc[e];
        for comp in JetComponent::ALL {
            let w = c * ker.gateaux(&at, &Jet2::unit(comp));
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(t.row(comp, p)) {
                *o += w * v;
            }
        }
    }

    /// `γ` at collocation point `p` of subdomain `e` (field mode).
    fn gamma_at(&self, alpha: &[f64], e: usize, p: usize) -> f64 {
        let m = self.width;
        self.colloc[e].combine_value(p, &alpha[e * m..(e + 1) * m])
    }

    fn pde_row_value(&self, alpha: &[f64], lin: Option<&Linearization>, e: usize, p: usize, u: &Jet2) -> f64 {
        let mut v = self.k_eval(self.forcing_index(), lin, e, p, u) - self.source[e][p];
        if self.problem.is_field() {
            v += self.gamma_at(alpha, e, p) * self.k_eval(0, lin, e, p, u);
        } else {
            for (i, a) in alpha.iter().enumerate() {
                v += a * self.k_eval(i, lin, e, p, u);
            }
        }
        v
    }

    fn jet_component(jets: &[Jet2], p: usize, c: JetComponent) -> f64 {
        jets[p].component(c)
    }

    fn residual_impl(&self, alpha: &[f64], beta: &[f64], lin: Option<&Linearization>) -> Result<Vec<f64>> {
        self.check_alpha(alpha)?;
        self.check_lin(lin)?;
        let u = self.u_jets(beta)?;
        let lay = &self.layout;
        let mut r = vec![0.0; lay.total];
        let q = self.disc.n_colloc();
        for e in 0..self.n_sub() {
            for p in 0..q {
                r[lay.pde.offset + e * q + p] = self.pde_row_value(alpha, lin, e, p, &u.colloc[e][p]);
            }
        }
        for (block, bb) in lay.bc.iter().zip(&self.problem.boundary) {
            for (k, row) in bb.rows.iter().enumerate() {
                let s: f64 = row
                    .terms
                    .iter()
                    .map(|t| t.coef * Self::jet_component(&u.colloc[t.sub], t.point, t.component))
                    .sum();
                r[block.offset + k] = s - row.rhs;
            }
        }
        let lm = self.opts.lambda_mea;
        for (k, mrow) in self.problem.measurements.iter().enumerate() {
            let v = Self::jet_component(&u.meas[mrow.sub], mrow.point, mrow.component);
            r[lay.mea.offset + k] = lm * v - lm * mrow.datum;
        }
        for (block, pairs, comp) in self.ck_blocks() {
            for (k, pr) in pairs.iter().enumerate() {
                r[block.offset + k] = Self::jet_component(&u.colloc[pr.e1], pr.p1, comp)
                    - Self::jet_component(&u.colloc[pr.e2], pr.p2, comp);
            }
        }
        if let Some(b) = &lay.reg_alpha {
            for (k, a) in alpha.iter().enumerate() {
                r[b.offset + k] = self.opts.lambda_1 * a;
            }
        }
        if let Some(b) = &lay.reg_beta {
            for (k, v) in beta.iter().enumerate() {
                r[b.offset + k] = self.opts.lambda_2 * v;
            }
        }
        Ok(r)
    }

    fn ck_blocks(&self) -> Vec<(&Block, &[InterfacePair], JetComponent)> {
        let v = self.disc.vertical.as_slice();
        let h = self.disc.horizontal.as_slice();
        let comps = [
            (v, JetComponent::Value),
            (v, JetComponent::Dx),
            (h, JetComponent::Value),
            (h, JetComponent::Dy),
        ];
        self.layout
            .ck
            .iter()
            .zip(comps)
            .filter(|(b, _)| b.len > 0)
            .map(|(b, (pairs, c))| (b, pairs, c))
            .collect()
    }

    /// `∂R/∂α`, shape `rows × n`.
    fn jacobian_alpha_impl(&self, alpha: &[f64], beta: &[f64], lin: Option<&Linearization>) -> Result<DenseMatrix> {
        self.check_alpha(alpha)?;
        self.check_lin(lin)?;
        let u = self.u_jets(beta)?;
        let lay = &self.layout;
        let q = self.disc.n_colloc();
        let m = self.width;
        let mut j = DenseMatrix::zeros(lay.total, self.n_alpha);
        for e in 0..self.n_sub() {
            for p in 0..q {
                let row = j.row_mut(lay.pde.offset + e * q + p);
                let uj = &u.colloc[e][p];
                if self.problem.is_field() {
                    let lval = self.k_eval(0, lin, e, p, uj);
                    let phi = self.colloc[e].row(JetComponent::Value, p);
                    for (o, f) in row[e * m..(e + 1) * m].iter_mut().zip(phi) {
                        *o = f * lval;
                    }
                } else {
                    for (i, o) in row.iter_mut().enumerate() {
                        *o = self.k_eval(i, lin, e, p, uj);
                    }
                }
            }
        }
        if let Some(b) = &lay.reg_alpha {
            for k in 0..self.n_alpha {
                j[(b.offset + k, k)] = self.opts.lambda_1;
            }
        }
        Ok(j)
    }

    /// `∂R/∂β`, shape `rows × NM`.
    fn jacobian_beta_impl(&self, alpha: &[f64], beta: &[f64], lin: Option<&Linearization>) -> Result<DenseMatrix> {
        self.check_alpha(alpha)?;
        self.check_lin(lin)?;
        let u = self.u_jets(beta)?;
        let mut j = DenseMatrix::zeros(self.layout.total, self.n_beta());
        self.fill_beta_block(&mut j, 0, alpha, &u.colloc, lin);
        Ok(j)
    }

    /// Writes `∂R/∂β` into columns `[col0, col0 + NM)` of `j`.
    fn fill_beta_block(
        &self,
        j: &mut DenseMatrix,
        col0: usize,
        alpha: &[f64],
        u_colloc: &[Vec<Jet2>],
        lin: Option<&Linearization>,
    ) {
        let lay = &self.layout;
        let q = self.disc.n_colloc();
        let m = self.width;
        let fi = self.forcing_index();
        for e in 0..self.n_sub() {
            let c0 = col0 + e * m;
            for p in 0..q {
                let uj = u_colloc[e][p];
                let row = &mut j.row_mut(lay.pde.offset + e * q + p)[c0..c0 + m];
                self.k_gateaux_row(fi, lin, e, p, &uj, 1.0, row);
                if self.problem.is_field() {
                    let g = self.gamma_at(alpha, e, p);
                    self.k_gateaux_row(0, lin, e, p, &uj, g, row);
                } else {
                    for (i, &a) in alpha.iter().enumerate().take(self.n_coef_kernels()) {
                        self.k_gateaux_row(i, lin, e, p, &uj, a, row);
                    }
                }
            }
        }
        for (block, bb) in lay.bc.iter().zip(&self.problem.boundary) {
            for (k, brow) in bb.rows.iter().enumerate() {
                let row = j.row_mut(block.offset + k);
                for t in &brow.terms {
                    let phi = self.colloc[t.sub].row(t.component, t.point);
                    let c = col0 + t.sub * m;
                    for (o, f) in row[c..c + m].iter_mut().zip(phi) {
                        *o += t.coef * f;
                    }
                }
            }
        }
        let lm = self.opts.lambda_mea;
        for (k, mrow) in self.problem.measurements.iter().enumerate() {
            let row = j.row_mut(lay.mea.offset + k);
            let phi = self.meas[mrow.sub].row(mrow.component, mrow.point);
            let c = col0 + mrow.sub * m;
            for (o, f) in row[c..c + m].iter_mut().zip(phi) {
                *o = lm * f;
            }
        }
        for (block, pairs, comp) in self.ck_blocks() {
            for (k, pr) in pairs.iter().enumerate() {
                let row = j.row_mut(block.offset + k);
                let a = self.colloc[pr.e1].row(comp, pr.p1);
                let c1 = col0 + pr.e1 * m;
                for (o, f) in row[c1..c1 + m].iter_mut().zip(a) {
                    *o += f;
                }
                let b = self.colloc[pr.e2].row(comp, pr.p2);
                let c2 = col0 + pr.e2 * m;
                for (o, f) in row[c2..c2 + m].iter_mut().zip(b) {
                    *o -= f;
                }
            }
        }
        if let Some(b) = &lay.reg_beta {
            for k in 0..self.n_beta() {
                j[(b.offset + k, col0 + k)] = self.opts.lambda_2;
            }
        }
    }

    /// Residual with the nonlinear kernels optionally replaced by their
    /// linearization.
    pub fn residual_with(&self, theta: &[f64], lin: Option<&Linearization>) -> Result<Vec<f64>> {
        let (a, b) = self.split_theta(theta)?;
        self.residual_impl(a, b, lin)
    }

    pub fn jacobian_with(&self, theta: &[f64], lin: Option<&Linearization>) -> Result<DenseMatrix> {
        let (alpha, beta) = self.split_theta(theta)?;
        let ja = self.jacobian_alpha_impl(alpha, beta, lin)?;
        let u = self.u_jets(beta)?;
        let mut j = DenseMatrix::zeros(self.layout.total, self.n_theta());
        for r in 0..self.layout.total {
            j.row_mut(r)[..self.n_alpha].copy_from_slice(ja.row(r));
        }
        self.fill_beta_block(&mut j, self.n_alpha, alpha, &u.colloc, lin);
        Ok(j)
    }

    /// `(H(β), b(β))` with `H α − b = R(α, β)` for every α.
    pub fn varpro1_system_with(&self, beta: &[f64], lin: Option<&Linearization>) -> Result<(DenseMatrix, Vec<f64>)> {
        let zero = vec![0.0; self.n_alpha];
        let h = self.jacobian_alpha_impl(&zero, beta, lin)?;
        let r0 = self.residual_impl(&zero, beta, lin)?;
        Ok((h, r0.into_iter().map(|v| -v).collect()))
    }

    /// `(H(α), b(α))` with `H β − b = R(α, β)` for every β.
    pub fn varpro2_system_with(&self, alpha: &[f64], lin: Option<&Linearization>) -> Result<(DenseMatrix, Vec<f64>)> {
        if lin.is_none() && !self.problem.is_linear() {
            return Err(Error::invalid(
                "the operator is nonlinear in u; supply a Newton linearization",
            ));
        }
        let zero = vec![0.0; self.n_beta()];
        let h = self.jacobian_beta_impl(alpha, &zero, lin)?;
        let r0 = self.residual_impl(alpha, &zero, lin)?;
        Ok((h, r0.into_iter().map(|v| -v).collect()))
    }

    /// `(I − H H⁺) ∂R/∂β` at `(α_LS, β)` from a factorization of `H(β)`.
    pub fn varpro1_reduced_jacobian_from(
        &self,
        h: &DenseMatrix,
        h_svd: Option<&ThinSvd>,
        beta: &[f64],
        alpha_ls: &[f64],
        lin: Option<&Linearization>,
    ) -> Result<DenseMatrix> {
        let j1 = self.jacobian_beta_impl(alpha_ls, beta, lin)?;
        match h_svd {
            Some(svd) => {
                let k = svd.solve(&j1, self.opts.rcond);
                let j2 = matmul(h, &k)?;
                j1.sub(&j2)
            }
            None => Ok(j1),
        }
    }

    /// `(I − H H⁺) ∂R/∂α` at `(α, β_LS)` from a factorization of `H(α)`.
    pub fn varpro2_reduced_jacobian_from(
        &self,
        h: &DenseMatrix,
        h_svd: &ThinSvd,
        alpha: &[f64],
        beta_ls: &[f64],
        lin: Option<&Linearization>,
    ) -> Result<DenseMatrix> {
        let j0 = self.jacobian_alpha_impl(alpha, beta_ls, lin)?;
        let k = h_svd.solve(&j0, self.opts.rcond);
        let j1 = matmul(h, &k)?;
        j0.sub(&j1)
    }

    /// `u` at arbitrary points of subdomain `e` is not tabulated; this evaluates
    /// the collocation-grid values `u(x_p)` for all subdomains.
    pub fn u_at_colloc(&self, beta: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .u_jets(beta)?
            .colloc
            .iter()
            .map(|v| v.iter().map(|j| j.value).collect())
            .collect())
    }
}

fn build_layout(
    problem: &InverseProblem,
    disc: &Discretization,
    n_alpha: usize,
    width: usize,
    opts: &AssemblyOptions,
) -> ResidualLayout {
    let mut offset = 0;
    let mut take = |label: &str, len: usize| {
        let b = Block {
            label: label.to_string(),
            offset,
            len,
        };
        offset += len;
        b
    };
    let pde = take("pde", disc.n_sub() * disc.n_colloc());
    let bc = problem
        .boundary
        .iter()
        .map(|b| take(&b.label, b.rows.len()))
        .collect();
    let mea = take("mea", problem.measurements.len());
    let (k1, k2) = disc.spec.cont_order;
    let nv = disc.vertical.len();
    let nh = disc.horizontal.len();
    let ck = vec![
        take("ck1", nv),
        take("ck2", if k1 >= 1 { nv } else { 0 }),
        take("ck3", nh),
        take("ck4", if k2 >= 1 { nh } else { 0 }),
    ];
    let reg_alpha = (opts.lambda_1 > 0.0).then(|| take("reg_alpha", n_alpha));
    let reg_beta = (opts.lambda_2 > 0.0).then(|| take("reg_beta", disc.n_sub() * width));
    ResidualLayout {
        pde,
        bc,
        mea,
        ck,
        reg_alpha,
        reg_beta,
        total: offset,
    }
}

/// `R(θ)` for `θ = [α | β]`.
pub fn full_residual(theta: &[f64], tables: &SystemTables) -> Result<Vec<f64>> {
    tables.residual_with(theta, None)
}

/// `∂R/∂θ`, shape `rows × (n + NM)`.
pub fn full_jacobian(theta: &[f64], tables: &SystemTables) -> Result<DenseMatrix> {
    tables.jacobian_with(theta, None)
}

/// `(H(β), b(β))` of the α-eliminating projection: `H α − b = R(α, β)`.
pub fn varpro1_system(beta: &[f64], tables: &SystemTables) -> Result<(DenseMatrix, Vec<f64>)> {
    tables.varpro1_system_with(beta, None)
}

/// `J₁ − H K` with `J₁ = ∂R/∂β` at `(α_LS, β)` and `K` the least-squares
/// solution of `H K = J₁`.
pub fn varpro1_reduced_jacobian(beta: &[f64], alpha_ls: &[f64], tables: &SystemTables) -> Result<DenseMatrix> {
    let (h, _) = tables.varpro1_system_with(beta, None)?;
    if h.cols() == 0 {
        return tables.varpro1_reduced_jacobian_from(&h, None, beta, alpha_ls, None);
    }
    let svd = ThinSvd::new(&h)?;
    tables.varpro1_reduced_jacobian_from(&h, Some(&svd), beta, alpha_ls, None)
}

/// `(H(α), b)` of the β-eliminating projection: `H β − b = R(α, β)`.
pub fn varpro2_system(alpha: &[f64], tables: &SystemTables) -> Result<(DenseMatrix, Vec<f64>)> {
    tables.varpro2_system_with(alpha, None)
}

/// `J₀ − H K` with `J₀ = ∂R/∂α` at `(α, β_LS)` and `K` the least-squares
/// solution of `H K = J₀`.
pub fn varpro2_reduced_jacobian(alpha: &[f64], beta_ls: &[f64], tables: &SystemTables) -> Result<DenseMatrix> {
    let (h, _) = tables.varpro2_system_with(alpha, None)?;
    let svd = ThinSvd::new(&h)?;
    tables.varpro2_reduced_jacobian_from(&h, &svd, alpha, beta_ls, None)
}
