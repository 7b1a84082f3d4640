//! Random-feature bases: fixed random hidden layers and their derivative jets.
//!
//! The basis functions of a subdomain are the outputs of the last hidden
//! layer of a feed-forward network whose weights and biases are drawn once,
//! uniformly on `[−R_m, R_m]`, and never trained. Derivatives are carried
//! forward through the layers as second-order jets, one direction at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value and first/second pure partial derivatives at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JetComponent {
    Value,
    Dx,
    Dy,
    Dxx,
    Dyy,
}

impl JetComponent {
    pub const ALL: [JetComponent; 5] = [
        JetComponent::Value,
        JetComponent::Dx,
        JetComponent::Dy,
        JetComponent::Dxx,
        JetComponent::Dyy,
    ];
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Jet2 {
            value: v,
            ..Default::default()
        }
    }

    /// The jet with a single 1 in component `c`.
    pub fn unit(c: JetComponent) -> Self {
        let mut j = Jet2::default();
        match c {
            JetComponent::Value => j.value = 1.0,
            JetComponent::Dx => j.dx = 1.0,
            JetComponent::Dy => j.dy = 1.0,
            JetComponent::Dxx => j.dxx = 1.0,
            JetComponent::Dyy => j.dyy = 1.0,
        }
        j
    }

    pub fn component(&self, c: JetComponent) -> f64 {
        match c {
            JetComponent::Value => self.value,
            JetComponent::Dx => self.dx,
            JetComponent::Dy => self.dy,
            JetComponent::Dxx => self.dxx,
            JetComponent::Dyy => self.dyy,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Jet2 {
            value: c * self.value,
            dx: c * self.dx,
            dy: c * self.dy,
            dxx: c * self.dxx,
            dyy: c * self.dyy,
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Jet2) -> Self {
        Jet2 {
            value: self.value + c * other.value,
            dx: self.dx + c * other.dx,
            dy: self.dy + c * other.dy,
            dxx: self.dxx + c * other.dxx,
            dyy: self.dyy + c * other.dyy,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.dx.is_finite()
            && self.dy.is_finite()
            && self.dxx.is_finite()
            && self.dyy.is_finite()
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        self.axpy(1.0, &o)
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self.axpy(-1.0, &o)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Gaussian,
    Tanh,
    /// `σ(z) = z²`; exact under second-order jet propagation.
    Square,
}

impl Activation {
    /// `(σ(z), σ'(z), σ''(z))`.
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Gaussian => {
                let s = (-z * z).exp();
                (s, -2.0 * z * s, (4.0 * z * z - 2.0) * s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
            Activation::Square => (z * z, 2.0 * z, 2.0),
        }
    }
}

/// Layer widths `[m₀, m₁, …, m_L]`; the basis width is `m_{L−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        let a = Architecture { layer_sizes };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.layer_sizes;
        if l.len() < 3 {
            return Err(Error::invalid("architecture needs input, hidden and output layers"));
        }
        if l.iter().any(|&m| m == 0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        if l[0] != 2 {
            return Err(Error::invalid("input dimension must be 2"));
        }
        Ok(())
    }

    /// Width `M` of the last hidden layer.
    pub fn basis_width(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HiddenParams {
    pub layers: Vec<HiddenLayer>,
    pub r_m: f64,
    pub seed: u64,
    pub stream: u64,
    pub activation: Activation,
}

impl HiddenParams {
    pub fn width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }
}

/// Hidden parameters drawn from stream 0 of `seed`.
pub fn init_hidden(arch: &Architecture, r_m: f64, seed: u64) -> Result<HiddenParams> {
    init_hidden_stream(arch, r_m, seed, 0, Activation::Gaussian)
}

/// Hidden parameters drawn from substream `stream` of `seed`.
pub fn init_hidden_stream(
    arch: &Architecture,
    r_m: f64,
    seed: u64,
    stream: u64,
    activation: Activation,
) -> Result<HiddenParams> {
    arch.validate()?;
    if !(r_m > 0.0 && r_m.is_finite()) {
        return Err(Error::invalid("r_m must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sizes = &arch.layer_sizes;
    let mut layers = Vec::with_capacity(sizes.len() - 2);
    for w in sizes[..sizes.len() - 1].windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| r_m * (2.0 * rng.random::<f64>() - 1.0))
                .collect()
        };
        let weights = draw(inputs * outputs);
        let bias = draw(outputs);
        layers.push(HiddenLayer {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    Ok(HiddenParams {
        layers,
        r_m,
        seed,
        stream,
        activation,
    })
}

/// Per-point, per-basis-function jets stored component-wise, row-major
/// `points × width`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisTable {
    pub n_points: usize,
    pub width: usize,
    pub value: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dyy: Vec<f64>,
}

impl BasisTable {
    fn zeros(n_points: usize, width: usize) -> Self {
        let z = vec![0.0; n_points * width];
        BasisTable {
            n_points,
            width,
            value: z.clone(),
            dx: z.clone(),
            dy: z.clone(),
            dxx: z.clone(),
            dyy: z,
        }
    }

    pub fn component(&self, c: JetComponent) -> &[f64] {
        match c {
            JetComponent::Value => &self.value,
            JetComponent::Dx => &self.dx,
            JetComponent::Dy => &self.dy,
            JetComponent::Dxx => &self.dxx,
            JetComponent::Dyy => &self.dyy,
        }
    }

    /// Row of component `c` at point `p`: the values of `c` for every basis function.
    pub fn row(&self, c: JetComponent, p: usize) -> &[f64] {
        &self.component(c)[p * self.width..(p + 1) * self.width]
    }

    pub fn jet(&self, p: usize, j: usize) -> Jet2 {
        let k = p * self.width + j;
        Jet2 {
            value: self.value[k],
            dx: self.dx[k],
            dy: self.dy[k],
            dxx: self.dxx[k],
            dyy: self.dyy[k],
        }
    }

    /// Jet of `Σ_j β_j φ_j` at point `p`.
    pub fn combine(&self, p: usize, beta: &[f64]) -> Jet2 {
        let r = p * self.width..(p + 1) * self.width;
        let d = |v: &[f64]| -> f64 { v[r.clone()].iter().zip(beta).map(|(a, b)| a * b).sum() };
        Jet2 {
            value: d(&self.value),
            dx: d(&self.dx),
            dy: d(&self.dy),
            dxx: d(&self.dxx),
            dyy: d(&self.dyy),
        }
    }

    /// Value of `Σ_j β_j φ_j` at point `p`.
    pub fn combine_value(&self, p: usize, beta: &[f64]) -> f64 {
        self.row(JetComponent::Value, p)
            .iter()
            .zip(beta)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Affine input map `ξ = scale ⊙ (x − center)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputMap {
    pub center: [f64; 2],
    pub scale: [f64; 2],
}

impl InputMap {
    pub const IDENTITY: InputMap = InputMap {
        center: [0.0, 0.0],
        scale: [1.0, 1.0],
    };

    /// Maps the box `[lo, hi]` onto `[−1, 1]²`.
    pub fn onto_unit_box(lo: [f64; 2], hi: [f64; 2]) -> Self {
        InputMap {
            center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
            scale: [2.0 / (hi[0] - lo[0]), 2.0 / (hi[1] - lo[1])],
        }
    }
}

struct LayerJets {
    v: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    vxx: Vec<f64>,
    vyy: Vec<f64>,
}

fn propagate(params: &HiddenParams, map: &InputMap, pt: [f64; 2]) -> LayerJets {
    let mut cur = LayerJets {
        v: vec![
            map.scale[0] * (pt[0] - map.center[0]),
            map.scale[1] * (pt[1] - map.center[1]),
        ],
        vx: vec![map.scale[0], 0.0],
        vy: vec![0.0, map.scale[1]],
        vxx: vec![0.0, 0.0],
        vyy: vec![0.0, 0.0],
    };
    for layer in &params.layers {
        let n = layer.outputs;
        let mut next = LayerJets {
            v: vec![0.0; n],
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            vxx: vec![0.0; n],
            vyy: vec![0.0; n],
        };
        for k in 0..n {
            let w = &layer.weights[k * layer.inputs..(k + 1) * layer.inputs];
            let mut z = layer.bias[k];
            let (mut zx, mut zy, mut zxx, mut zyy) = (0.0, 0.0, 0.0, 0.0);
            for (i, &wi) in w.iter().enumerate() {
                z += wi * cur.v[i];
                zx += wi * cur.vx[i];
                zy += wi * cur.vy[i];
                zxx += wi * cur.vxx[i];
                zyy += wi * cur.vyy[i];
            }
            let (s, s1, s2) = params.activation.eval(z);
            next.v[k] = s;
            next.vx[k] = s1 * zx;
            next.vy[k] = s1 * zy;
            next.vxx[k] = s2 * zx * zx + s1 * zxx;
            next.vyy[k] = s2 * zy * zy + s1 * zyy;
        }
        cur = next;
    }
    cur
}

/// Jets of every last-hidden-layer output at every point, in raw coordinates.
pub fn eval_basis_jets(params: &HiddenParams, points: &[[f64; 2]]) -> BasisTable {
    eval_basis_jets_mapped(params, &InputMap::IDENTITY, points)
}

/// As [`eval_basis_jets`], with the network fed `map(x)` and derivatives
/// taken with respect to `x`.
pub fn eval_basis_jets_mapped(
    params: &HiddenParams,
    map: &InputMap,
    points: &[[f64; 2]],
) -> BasisTable {
    let width = params.width();
    let mut t = BasisTable::zeros(points.len(), width);
    for (p, &pt) in points.iter().enumerate() {
        let j = propagate(params, map, pt);
        let r = p * width..(p + 1) * width;
        t.value[r.clone()].copy_from_slice(&j.v);
        t.dx[r.clone()].copy_from_slice(&j.vx);
        t.dy[r.clone()].copy_from_slice(&j.vy);
        t.dxx[r.clone()].copy_from_slice(&j.vxx);
        t.dyy[r].copy_from_slice(&j.vyy);
    }
    t
}

/// Basis values only, row-major `points × width`.
pub fn eval_basis_values(params: &HiddenParams, map: &InputMap, points: &[[f64; 2]]) -> Vec<f64> {
    let width = params.width();
    let mut out = Vec::with_capacity(points.len() * width);
    let mut cur = Vec::new();
    let mut next = Vec::new();
    for &pt in points {
        cur.clear();
        cur.push(map.scale[0] * (pt[0] - map.center[0]));
        cur.push(map.scale[1] * (pt[1] - map.center[1]));
        for layer in &params.layers {
            next.clear();
            for k in 0..layer.outputs {
                let w = &layer.weights[k * layer.inputs..(k + 1) * layer.inputs];
                let z = layer.bias[k] + w.iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>();
                next.push(params.activation.eval(z).0);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        out.extend_from_slice(&cur);
    }
    out
}

/// How the subdomain networks share the random stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamMode {
    /// Subdomain `e` draws from substream `e` of the seed.
    #[default]
    Distinct,
    /// Every subdomain receives the same draw.
    IdenticalCopies,
}

/// Settings shared by every local network of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisConfig {
    pub arch: Architecture,
    pub r_m: f64,
    pub seed: u64,
    pub activation: Activation,
    pub streams: StreamMode,
    /// Feed each network coordinates rescaled onto `[−1, 1]²` over its subdomain.
    pub normalize_inputs: bool,
}

impl BasisConfig {
    pub fn new(arch: Architecture, r_m: f64, seed: u64) -> Self {
        BasisConfig {
            arch,
            r_m,
            seed,
            activation: Activation::Gaussian,
            streams: StreamMode::Distinct,
            normalize_inputs: true,
        }
    }
}

/// One local network per subdomain.
#[derive(Clone, Debug)]
pub struct EnsembleBasis {
    pub config: BasisConfig,
    pub nets: Vec<HiddenParams>,
    pub maps: Vec<InputMap>,
}

impl EnsembleBasis {
    /// Builds the networks for subdomain boxes `(lo, hi)` in subdomain order.
    pub fn new(config: BasisConfig, boxes: &[([f64; 2], [f64; 2])]) -> Result<Self> {
        let mut nets = Vec::with_capacity(boxes.len());
        let mut maps = Vec::with_capacity(boxes.len());
        for (e, &(lo, hi)) in boxes.iter().enumerate() {
            let stream = match config.streams {
                StreamMode::Distinct => e as u64,
                StreamMode::IdenticalCopies => 0,
            };
            nets.push(init_hidden_stream(
                &config.arch,
                config.r_m,
                config.seed,
                stream,
                config.activation,
            )?);
            maps.push(if config.normalize_inputs {
                InputMap::onto_unit_box(lo, hi)
            } else {
                InputMap::IDENTITY
            });
        }
        Ok(EnsembleBasis { config, nets, maps })
    }

    pub fn width(&self) -> usize {
        self.config.arch.basis_width()
    }

    pub fn n_sub(&self) -> usize {
        self.nets.len()
    }

    pub fn jets(&self, e: usize, points: &[[f64; 2]]) -> BasisTable {
        eval_basis_jets_mapped(&self.nets[e], &self.maps[e], points)
    }

    pub fn values(&self, e: usize, points: &[[f64; 2]]) -> Vec<f64> {
        eval_basis_values(&self.nets[e], &self.maps[e], points)
    }
}
