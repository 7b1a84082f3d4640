//! Inverse problem definitions, manufactured benchmarks and the noise model.
//!
//! Every problem is written as `Σᵢ αᵢ Lᵢ(u) + F(u) = f` in the interior, with
//! linear boundary rows and point measurements of `u`. In field-coefficient
//! mode a single kernel `L` is multiplied by an unknown field `γ(x, y)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Jet2, JetComponent};
use crate::error::{Error, Result};
use crate::geometry::{edge_points, Discretization, DomainSpec, Edge};

pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A pointwise operator acting on the jet of `u`, with its Gateaux derivative.
#[derive(Clone, Copy)]
pub struct OperatorKernel {
    pub name: &'static str,
    pub eval_fn: fn(&Jet2) -> f64,
    /// `(u, φ) ↦ d/dh L(u + hφ)` at `h = 0`.
    pub gateaux_fn: fn(&Jet2, &Jet2) -> f64,
    pub is_linear: bool,
}

impl OperatorKernel {
    #[inline]
    pub fn eval(&self, u: &Jet2) -> f64 {
        (self.eval_fn)(u)
    }

    #[inline]
    pub fn gateaux(&self, u: &Jet2, phi: &Jet2) -> f64 {
        (self.gateaux_fn)(u, phi)
    }
}

impl fmt::Debug for OperatorKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorKernel")
            .field("name", &self.name)
            .field("is_linear", &self.is_linear)
            .finish()
    }
}

macro_rules! linear_kernel {
    ($name:ident, $label:expr, |$u:ident| $body:expr) => {
        pub const $name: OperatorKernel = OperatorKernel {
            name: $label,
            eval_fn: {
                fn f($u: &Jet2) -> f64 {
                    $body
                }
                f
            },
            gateaux_fn: {
                fn g(_: &Jet2, $u: &Jet2) -> f64 {
                    $body
                }
                g
            },
            is_linear: true,
        };
    };
}

/// Kernel library used by the benchmarks.
pub mod kernels {
    use super::*;

    linear_kernel!(ZERO, "0", |u| {
        let _ = u;
        0.0
    });
    linear_kernel!(VALUE, "u", |u| u.value);
    linear_kernel!(NEG_VALUE, "-u", |u| -u.value);
    linear_kernel!(DX, "u_x", |u| u.dx);
    linear_kernel!(NEG_DX, "-u_x", |u| -u.dx);
    linear_kernel!(DY, "u_y", |u| u.dy);
    linear_kernel!(DXX, "u_xx", |u| u.dxx);
    linear_kernel!(NEG_DXX, "-u_xx", |u| -u.dxx);
    linear_kernel!(DYY, "u_yy", |u| u.dyy);
    linear_kernel!(LAPLACIAN, "u_xx+u_yy", |u| u.dxx + u.dyy);

    pub const COS_2U: OperatorKernel = OperatorKernel {
        name: "cos(2u)",
        eval_fn: |u| (2.0 * u.value).cos(),
        gateaux_fn: |u, p| -2.0 * (2.0 * u.value).sin() * p.value,
        is_linear: false,
    };

    pub const SIN_U: OperatorKernel = OperatorKernel {
        name: "sin(u)",
        eval_fn: |u| u.value.sin(),
        gateaux_fn: |u, p| u.value.cos() * p.value,
        is_linear: false,
    };

    pub const U_UX: OperatorKernel = OperatorKernel {
        name: "u*u_x",
        eval_fn: |u| u.value * u.dx,
        gateaux_fn: |u, p| u.value * p.dx + u.dx * p.value,
        is_linear: false,
    };
}

/// `coef · component(u_sub(x_point))` for a collocation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcTerm {
    pub sub: usize,
    pub point: usize,
    pub component: JetComponent,
    pub coef: f64,
}

/// A linear functional of the solution jets equated to `rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryRow {
    pub terms: Vec<BcTerm>,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryBlock {
    pub label: String,
    pub rows: Vec<BoundaryRow>,
}

/// Observation of one jet component at measurement point `point` of `sub`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementRow {
    pub sub: usize,
    pub point: usize,
    pub component: JetComponent,
    pub datum: f64,
}

#[derive(Clone, Debug)]
pub enum Coefficients {
    /// `n` unknown constants, one per kernel.
    Scalar { kernels: Vec<OperatorKernel> },
    /// An unknown field `γ` expanded in the subdomain basis, multiplying `kernel`.
    Field { kernel: OperatorKernel },
}

#[derive(Clone)]
pub struct Reference {
    pub alpha: Vec<f64>,
    pub u: ScalarField,
    pub gamma: Option<ScalarField>,
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reference")
            .field("alpha", &self.alpha)
            .field("gamma", &self.gamma.is_some())
            .finish()
    }
}

#[derive(Clone)]
pub struct InverseProblem {
    pub name: String,
    pub coefficients: Coefficients,
    /// The α-free part `F`.
    pub forcing: OperatorKernel,
    pub source: ScalarField,
    pub boundary: Vec<BoundaryBlock>,
    pub measurements: Vec<MeasurementRow>,
    pub reference: Option<Reference>,
}

impl fmt::Debug for InverseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InverseProblem")
            .field("name", &self.name)
            .field("coefficients", &self.coefficients)
            .field("forcing", &self.forcing)
            .field("boundary_blocks", &self.boundary.len())
            .field("measurements", &self.measurements.len())
            .field("reference", &self.reference)
            .finish()
    }
}

impl InverseProblem {
    /// Number of inverse unknowns for a basis of width `m` on `n_sub` subdomains.
    pub fn n_alpha(&self, n_sub: usize, m: usize) -> usize {
        match &self.coefficients {
            Coefficients::Scalar { kernels } => kernels.len(),
            Coefficients::Field { .. } => n_sub * m,
        }
    }

    pub fn is_field(&self) -> bool {
        matches!(self.coefficients, Coefficients::Field { .. })
    }

    /// True when every kernel, including `F`, is linear in `u`.
    pub fn is_linear(&self) -> bool {
        let ks = match &self.coefficients {
            Coefficients::Scalar { kernels } => kernels.iter().all(|k| k.is_linear),
            Coefficients::Field { kernel } => kernel.is_linear,
        };
        ks && self.forcing.is_linear
    }

    pub fn n_boundary_rows(&self) -> usize {
        self.boundary.iter().map(|b| b.rows.len()).sum()
    }
}

/// Multiplicative uniform noise of relative level `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            epsilon: 0.0,
            seed: 0,
        }
    }
}

/// `Sᵢ = uᵢ (1 + ε ζᵢ)` with `ζᵢ` i.i.d. uniform on `[−1, 1]`.
pub fn apply_noise(exact: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>> {
    if !(spec.epsilon >= 0.0 && spec.epsilon.is_finite()) {
        return Err(Error::invalid("noise level must be non-negative"));
    }
    if exact.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite measurement value"));
    }
    if spec.epsilon == 0.0 {
        return Ok(exact.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(exact
        .iter()
        .map(|&u| {
            let zeta = 2.0 * rng.random::<f64>() - 1.0;
            u * (1.0 + spec.epsilon * zeta)
        })
        .collect())
}

/// Value, first and second derivative of a function of one variable.
#[derive(Clone, Copy, Debug)]
struct Curve {
    f: f64,
    d1: f64,
    d2: f64,
}

fn product(x: Curve, y: Curve) -> Jet2 {
    Jet2 {
        value: x.f * y.f,
        dx: x.d1 * y.f,
        dy: x.f * y.d1,
        dxx: x.d2 * y.f,
        dyy: x.f * y.d2,
    }
}

fn sin_sq(s: f64) -> Curve {
    let a = PI * s * s;
    Curve {
        f: a.sin(),
        d1: 2.0 * PI * s * a.cos(),
        d2: 2.0 * PI * a.cos() - 4.0 * PI * PI * s * s * a.sin(),
    }
}

fn cos_sq(s: f64) -> Curve {
    let a = PI * s * s;
    Curve {
        f: a.cos(),
        d1: -2.0 * PI * s * a.sin(),
        d2: -2.0 * PI * a.sin() - 4.0 * PI * PI * s * s * a.cos(),
    }
}

fn burgers_factor(s: f64) -> Curve {
    let (a, b) = (PI * s + 7.0 * PI / 20.0, 2.0 * PI * s - 3.0 * PI / 5.0);
    let p = 1.5 * a.cos() + 1.35 * b.cos();
    let p1 = -1.5 * PI * a.sin() - 2.7 * PI * b.sin();
    let p2 = -1.5 * PI * PI * a.cos() - 5.4 * PI * PI * b.cos();
    let w = 1.0 + s / 20.0;
    Curve {
        f: w * p,
        d1: p / 20.0 + w * p1,
        d2: p1 / 10.0 + w * p2,
    }
}

fn sine_gordan_factor(s: f64) -> Curve {
    let (a, b) = (PI * s - 2.0 * PI / 5.0, 2.0 * PI * s + 3.0 * PI / 10.0);
    Curve {
        f: 2.5 * a.cos() + 1.5 * b.cos(),
        d1: -2.5 * PI * a.sin() - 3.0 * PI * b.sin(),
        d2: -2.5 * PI * PI * a.cos() - 6.0 * PI * PI * b.cos(),
    }
}

fn var_helmholtz_factor(s: f64) -> Curve {
    let (a, b) = (PI * s - 2.0 * PI / 5.0, 2.0 * PI * s + 3.0 * PI / 10.0);
    Curve {
        f: 2.5 * a.sin() + 1.5 * b.cos(),
        d1: 2.5 * PI * a.cos() - 3.0 * PI * b.sin(),
        d2: -2.5 * PI * PI * a.sin() - 6.0 * PI * PI * b.cos(),
    }
}

fn advection_jet(x: f64, t: f64) -> Jet2 {
    let k = 2.0 * PI / 3.0;
    let s = k * (x + 3.0 * t - 2.5);
    let w = 0.1 * s.sin();
    let g = 10.0 * w.sinh();
    let g1 = k * s.cos() * w.cosh();
    let g2 = k * k * (-s.sin() * w.cosh() + 0.1 * s.cos().powi(2) * w.sinh());
    Jet2 {
        value: g,
        dx: g1,
        dy: 3.0 * g1,
        dxx: g2,
        dyy: 9.0 * g2,
    }
}

fn var_helmholtz_gamma(x: f64, y: f64) -> f64 {
    100.0 * (1.0 + 0.25 * (2.0 * PI * x).sin() + 0.25 * (2.0 * PI * y).sin())
}

/// The six manufactured test problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Poisson,
    Advection,
    NonlinearHelmholtz,
    Burgers,
    #[serde(alias = "sine_gordon")]
    SineGordan,
    VarCoeffHelmholtz,
}

impl Benchmark {
    pub const ALL: [Benchmark; 6] = [
        Benchmark::Poisson,
        Benchmark::Advection,
        Benchmark::NonlinearHelmholtz,
        Benchmark::Burgers,
        Benchmark::SineGordan,
        Benchmark::VarCoeffHelmholtz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Poisson => "poisson",
            Benchmark::Advection => "advection",
            Benchmark::NonlinearHelmholtz => "nonlinear_helmholtz",
            Benchmark::Burgers => "burgers",
            Benchmark::SineGordan => "sine_gordan",
            Benchmark::VarCoeffHelmholtz => "var_coeff_helmholtz",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Benchmark::Poisson => "u_xx + a u_yy = f on [0,1.4]^2, Dirichlet",
            Benchmark::Advection => "u_t - c u_x = 0 on [0,3]x[0,1], periodic in x",
            Benchmark::NonlinearHelmholtz => {
                "u_xx + u_yy - a1 u + a2 cos(2u) = f on [0,1.4]^2, Dirichlet"
            }
            Benchmark::Burgers => "u_t + a1 u u_x = a2 u_xx + f on [0,2]x[0,1.5]",
            Benchmark::SineGordan => "u_tt - a1 u_xx + a2 u + a3 sin(u) = f on [0,1]^2",
            Benchmark::VarCoeffHelmholtz => "u_xx + u_yy - gamma(x,y) u = f on [0,1.5]^2",
        }
    }

    pub fn bounds(self) -> [(f64, f64); 2] {
        match self {
            Benchmark::Poisson | Benchmark::NonlinearHelmholtz => [(0.0, 1.4), (0.0, 1.4)],
            Benchmark::Advection => [(0.0, 3.0), (0.0, 1.0)],
            Benchmark::Burgers => [(0.0, 2.0), (0.0, 1.5)],
            Benchmark::SineGordan => [(0.0, 1.0), (0.0, 1.0)],
            Benchmark::VarCoeffHelmholtz => [(0.0, 1.5), (0.0, 1.5)],
        }
    }

    /// One less than the PDE order in each direction.
    pub fn default_cont_order(self) -> (u8, u8) {
        match self {
            Benchmark::Advection => (0, 0),
            Benchmark::Burgers => (1, 0),
            _ => (1, 1),
        }
    }

    pub fn domain(self, n_sub: (usize, usize)) -> Result<DomainSpec> {
        DomainSpec::new(self.bounds(), n_sub, self.default_cont_order())
    }

    pub fn exact_jet(self, x: f64, y: f64) -> Jet2 {
        match self {
            Benchmark::Poisson => product(sin_sq(x), sin_sq(y)),
            Benchmark::Advection => advection_jet(x, y),
            Benchmark::NonlinearHelmholtz => product(cos_sq(x), cos_sq(y)),
            Benchmark::Burgers => product(burgers_factor(x), burgers_factor(y)),
            Benchmark::SineGordan => product(sine_gordan_factor(x), sine_gordan_factor(y)),
            Benchmark::VarCoeffHelmholtz => {
                product(var_helmholtz_factor(x), var_helmholtz_factor(y))
            }
        }
    }

    pub fn exact_u(self, x: f64, y: f64) -> f64 {
        self.exact_jet(x, y).value
    }

    /// Reference inverse constants; empty in field-coefficient mode.
    pub fn alpha_ex(self) -> Vec<f64> {
        match self {
            Benchmark::Poisson => vec![1.0],
            Benchmark::Advection => vec![3.0],
            Benchmark::NonlinearHelmholtz => vec![100.0, 5.0],
            Benchmark::Burgers => vec![0.1, 0.01],
            Benchmark::SineGordan => vec![1.0, 1.0, 1.0],
            Benchmark::VarCoeffHelmholtz => vec![],
        }
    }

    pub fn gamma_ex(self, x: f64, y: f64) -> Option<f64> {
        (self == Benchmark::VarCoeffHelmholtz).then(|| var_helmholtz_gamma(x, y))
    }

    pub fn coefficients(self) -> Coefficients {
        use kernels::*;
        match self {
            Benchmark::Poisson => Coefficients::Scalar {
                kernels: vec![DYY],
            },
            Benchmark::Advection => Coefficients::Scalar {
                kernels: vec![NEG_DX],
            },
            Benchmark::NonlinearHelmholtz => Coefficients::Scalar {
                kernels: vec![NEG_VALUE, COS_2U],
            },
            Benchmark::Burgers => Coefficients::Scalar {
                kernels: vec![U_UX, NEG_DXX],
            },
            Benchmark::SineGordan => Coefficients::Scalar {
                kernels: vec![NEG_DXX, VALUE, SIN_U],
            },
            Benchmark::VarCoeffHelmholtz => Coefficients::Field { kernel: NEG_VALUE },
        }
    }

    pub fn forcing(self) -> OperatorKernel {
        use kernels::*;
        match self {
            Benchmark::Poisson => DXX,
            Benchmark::Advection | Benchmark::Burgers => DY,
            Benchmark::NonlinearHelmholtz | Benchmark::VarCoeffHelmholtz => LAPLACIAN,
            Benchmark::SineGordan => DYY,
        }
    }

    /// `f` obtained by substituting the reference solution into the operator.
    pub fn source(self, x: f64, y: f64) -> f64 {
        let u = self.exact_jet(x, y);
        let lhs = match self.coefficients() {
            Coefficients::Scalar { kernels } => kernels
                .iter()
                .zip(self.alpha_ex())
                .map(|(k, a)| a * k.eval(&u))
                .sum::<f64>(),
            Coefficients::Field { kernel } => var_helmholtz_gamma(x, y) * kernel.eval(&u),
        };
        lhs + self.forcing().eval(&u)
    }

    /// Boundary row blocks, in residual order.
    pub fn boundary_blocks(self, disc: &Discretization) -> Vec<BoundaryBlock> {
        let spec = &disc.spec;
        let dirichlet = |edge: Edge, label: &str| BoundaryBlock {
            label: label.to_string(),
            rows: edge_points(spec, disc, edge)
                .into_iter()
                .map(|bp| {
                    let [x, y] = disc.coord(bp.sub, bp.point);
                    BoundaryRow {
                        terms: vec![BcTerm {
                            sub: bp.sub,
                            point: bp.point,
                            component: JetComponent::Value,
                            coef: 1.0,
                        }],
                        rhs: self.exact_u(x, y),
                    }
                })
                .collect(),
        };
        match self {
            Benchmark::Poisson | Benchmark::NonlinearHelmholtz | Benchmark::VarCoeffHelmholtz => {
                vec![
                    dirichlet(Edge::Left, "bc1"),
                    dirichlet(Edge::Right, "bc2"),
                    dirichlet(Edge::Bottom, "bc3"),
                    dirichlet(Edge::Top, "bc4"),
                ]
            }
            Benchmark::Advection => {
                let left = edge_points(spec, disc, Edge::Left);
                let right = edge_points(spec, disc, Edge::Right);
                let periodic = left
                    .iter()
                    .zip(&right)
                    .map(|(l, r)| BoundaryRow {
                        terms: vec![
                            BcTerm {
                                sub: l.sub,
                                point: l.point,
                                component: JetComponent::Value,
                                coef: 1.0,
                            },
                            BcTerm {
                                sub: r.sub,
                                point: r.point,
                                component: JetComponent::Value,
                                coef: -1.0,
                            },
                        ],
                        rhs: 0.0,
                    })
                    .collect();
                vec![
                    BoundaryBlock {
                        label: "periodic".into(),
                        rows: periodic,
                    },
                    dirichlet(Edge::Bottom, "initial"),
                ]
            }
            Benchmark::Burgers => vec![
                dirichlet(Edge::Left, "bc1"),
                dirichlet(Edge::Right, "bc2"),
                dirichlet(Edge::Bottom, "initial"),
            ],
            Benchmark::SineGordan => {
                let velocity = BoundaryBlock {
                    label: "initial_velocity".into(),
                    rows: edge_points(spec, disc, Edge::Bottom)
                        .into_iter()
                        .map(|bp| {
                            let [x, y] = disc.coord(bp.sub, bp.point);
                            BoundaryRow {
                                terms: vec![BcTerm {
                                    sub: bp.sub,
                                    point: bp.point,
                                    component: JetComponent::Dy,
                                    coef: 1.0,
                                }],
                                rhs: self.exact_jet(x, y).dy,
                            }
                        })
                        .collect(),
                };
                vec![
                    dirichlet(Edge::Left, "bc1"),
                    dirichlet(Edge::Right, "bc2"),
                    dirichlet(Edge::Bottom, "initial"),
                    velocity,
                ]
            }
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "sine_gordon" => return Ok(Benchmark::SineGordan),
            "var_coeff" | "variable_coefficient_helmholtz" => {
                return Ok(Benchmark::VarCoeffHelmholtz)
            }
            _ => {}
        }
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown benchmark '{s}'")))
    }
}

/// Builds the inverse problem of `bench` on `disc`, with measurement data
/// perturbed according to `noise`.
pub fn make_benchmark(bench: Benchmark, disc: &Discretization, noise: &NoiseSpec) -> Result<InverseProblem> {
    if disc.spec.bounds != bench.bounds() {
        return Err(Error::invalid(format!(
            "discretization bounds {:?} do not match the {} domain {:?}",
            disc.spec.bounds,
            bench,
            bench.bounds()
        )));
    }
    let mut rows = Vec::with_capacity(disc.n_sub() * disc.q_s);
    let mut exact = Vec::with_capacity(rows.capacity());
    for s in &disc.subs {
        for (p, &[x, y]) in s.meas.iter().enumerate() {
            rows.push((s.index, p));
            exact.push(bench.exact_u(x, y));
        }
    }
    let data = apply_noise(&exact, noise)?;
    let measurements = rows
        .into_iter()
        .zip(data)
        .map(|((sub, point), datum)| MeasurementRow {
            sub,
            point,
            component: JetComponent::Value,
            datum,
        })
        .collect();

    let gamma: Option<ScalarField> = (bench == Benchmark::VarCoeffHelmholtz)
        .then(|| Arc::new(var_helmholtz_gamma) as ScalarField);
    Ok(InverseProblem {
        name: bench.name().to_string(),
        coefficients: bench.coefficients(),
        forcing: bench.forcing(),
        source: Arc::new(move |x, y| bench.source(x, y)),
        boundary: bench.boundary_blocks(disc),
        measurements,
        reference: Some(Reference {
            alpha: bench.alpha_ex(),
            u: Arc::new(move |x, y| bench.exact_u(x, y)),
            gamma,
        }),
    })
}
