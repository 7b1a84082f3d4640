//! Rectangular domain decomposition and point sets.
//!
//! Subdomain `(i, j)` (0-based, `i` along x) has index `e = i·N₂ + j`, and
//! collocation point `(i, j)` of a `Q₁ × Q₂` grid has index `p = i·Q₂ + j`.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    /// `[(a₁, b₁), (a₂, b₂)]`.
    pub bounds: [(f64, f64); 2],
    /// `(N₁, N₂)`.
    pub n_sub: (usize, usize),
    /// Continuity order across vertical and horizontal interfaces, each 0 or 1.
    pub cont_order: (u8, u8),
}

impl DomainSpec {
    pub fn new(bounds: [(f64, f64); 2], n_sub: (usize, usize), cont_order: (u8, u8)) -> Result<Self> {
        let s = DomainSpec {
            bounds,
            n_sub,
            cont_order,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (a, b) in self.bounds {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid(format!("degenerate interval [{a}, {b}]")));
            }
        }
        if self.n_sub.0 == 0 || self.n_sub.1 == 0 {
            return Err(Error::invalid("subdomain counts must be positive"));
        }
        if self.cont_order.0 > 1 || self.cont_order.1 > 1 {
            return Err(Error::invalid("continuity order must be 0 or 1"));
        }
        Ok(())
    }

    pub fn n_subdomains(&self) -> usize {
        self.n_sub.0 * self.n_sub.1
    }

    pub fn sub_index(&self, i: usize, j: usize) -> usize {
        i * self.n_sub.1 + j
    }

    fn breaks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|k| if k == n { hi } else { lo + k as f64 * h })
            .collect()
    }

    /// Subdomain boundaries along x: `X₀ = a₁ < … < X_{N₁} = b₁`.
    pub fn x_breaks(&self) -> Vec<f64> {
        Self::breaks(self.bounds[0].0, self.bounds[0].1, self.n_sub.0)
    }

    pub fn y_breaks(&self) -> Vec<f64> {
        Self::breaks(self.bounds[1].0, self.bounds[1].1, self.n_sub.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdomain {
    pub index: usize,
    pub ij: (usize, usize),
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub colloc: Vec<[f64; 2]>,
    pub meas: Vec<[f64; 2]>,
}

/// Outer edges: `Left` is x = a₁, `Right` x = b₁, `Bottom` y = a₂, `Top` y = b₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryPoint {
    pub edge: Edge,
    pub sub: usize,
    pub point: usize,
}

/// Collocation point `p1` of subdomain `e1` coincides with `p2` of `e2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterfacePair {
    pub e1: usize,
    pub p1: usize,
    pub e2: usize,
    pub p2: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    pub spec: DomainSpec,
    pub q: (usize, usize),
    pub q_s: usize,
    pub subs: Vec<Subdomain>,
    /// Pairs across interfaces `x = X_m`, ordered by (m, l, k).
    pub vertical: Vec<InterfacePair>,
    /// Pairs across interfaces `y = Y_l`, ordered by (l, m, k).
    pub horizontal: Vec<InterfacePair>,
}

impl Discretization {
    pub fn grid_index(&self, i: usize, j: usize) -> usize {
        i * self.q.1 + j
    }

    pub fn n_colloc(&self) -> usize {
        self.q.0 * self.q.1
    }

    pub fn n_sub(&self) -> usize {
        self.subs.len()
    }

    pub fn coord(&self, e: usize, p: usize) -> [f64; 2] {
        self.subs[e].colloc[p]
    }

    /// `N(Q + Q_s + 2Q₁ + 2Q₂)`: row count with boundary rows on every edge and
    /// C¹ continuity in both directions on a uniform partition.
    pub fn standard_row_count(&self) -> usize {
        let (q1, q2) = self.q;
        self.n_sub() * (q1 * q2 + self.q_s + 2 * q1 + 2 * q2)
    }
}

fn grid_coord(lo: f64, hi: f64, i: usize, q: usize) -> f64 {
    if i == 0 {
        lo
    } else if i == q - 1 {
        hi
    } else {
        lo + i as f64 * (hi - lo) / (q - 1) as f64
    }
}

fn sample_open(rng: &mut (impl Rng + ?Sized), lo: f64, hi: f64) -> f64 {
    loop {
        let u: f64 = rng.random();
        let v = lo + u * (hi - lo);
        if v > lo && v < hi {
            return v;
        }
    }
}

/// Uniform `Q₁ × Q₂` grids on every subdomain plus `q_s` uniformly random
/// measurement points per subdomain.
pub fn build_discretization<R: Rng + ?Sized>(
    spec: &DomainSpec,
    q: (usize, usize),
    q_s: usize,
    rng: &mut R,
) -> Result<Discretization> {
    spec.validate()?;
    if q.0 < 2 || q.1 < 2 {
        return Err(Error::invalid("each grid direction needs at least 2 points"));
    }
    let xb = spec.x_breaks();
    let yb = spec.y_breaks();
    let (n1, n2) = spec.n_sub;
    let mut subs = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let lo = [xb[i], yb[j]];
            let hi = [xb[i + 1], yb[j + 1]];
            if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                return Err(Error::invalid("zero-width subdomain"));
            }
            let mut colloc = Vec::with_capacity(q.0 * q.1);
            for a in 0..q.0 {
                let x = grid_coord(lo[0], hi[0], a, q.0);
                for b in 0..q.1 {
                    colloc.push([x, grid_coord(lo[1], hi[1], b, q.1)]);
                }
            }
            subs.push(Subdomain {
                index: spec.sub_index(i, j),
                ij: (i, j),
                lo,
                hi,
                colloc,
                meas: Vec::new(),
            });
        }
    }
    for s in subs.iter_mut() {
        s.meas = (0..q_s)
            .map(|_| {
                let x = sample_open(rng, s.lo[0], s.hi[0]);
                let y = sample_open(rng, s.lo[1], s.hi[1]);
                [x, y]
            })
            .collect();
    }

    let g = |i: usize, j: usize| i * q.1 + j;
    let mut vertical = Vec::new();
    for m in 0..n1.saturating_sub(1) {
        for l in 0..n2 {
            for k in 0..q.1 {
                vertical.push(InterfacePair {
                    e1: spec.sub_index(m, l),
                    p1: g(q.0 - 1, k),
                    e2: spec.sub_index(m + 1, l),
                    p2: g(0, k),
                });
            }
        }
    }
    let mut horizontal = Vec::new();
    for l in 0..n2.saturating_sub(1) {
        for m in 0..n1 {
            for k in 0..q.0 {
                horizontal.push(InterfacePair {
                    e1: spec.sub_index(m, l),
                    p1: g(k, q.1 - 1),
                    e2: spec.sub_index(m, l + 1),
                    p2: g(k, 0),
                });
            }
        }
    }

    Ok(Discretization {
        spec: spec.clone(),
        q,
        q_s,
        subs,
        vertical,
        horizontal,
    })
}

/// Collocation points on the outer boundary, edge by edge (left, right,
/// bottom, top). Corner points appear once for each incident edge.
pub fn locate_outer_boundary(spec: &DomainSpec, disc: &Discretization) -> Vec<BoundaryPoint> {
    let (n1, n2) = spec.n_sub;
    let (q1, q2) = disc.q;
    let mut out = Vec::with_capacity(2 * n2 * q2 + 2 * n1 * q1);
    for edge in Edge::ALL {
        out.extend(edge_points(spec, disc, edge));
    }
    debug_assert_eq!(out.len(), 2 * n2 * q2 + 2 * n1 * q1);
    out
}

/// Boundary points of one outer edge, in the order used for residual rows.
pub fn edge_points(spec: &DomainSpec, disc: &Discretization, edge: Edge) -> Vec<BoundaryPoint> {
    let (n1, n2) = spec.n_sub;
    let (q1, q2) = disc.q;
    let mut out = Vec::new();
    match edge {
        Edge::Left | Edge::Right => {
            let (i, gi) = if edge == Edge::Left { (0, 0) } else { (n1 - 1, q1 - 1) };
            for l in 0..n2 {
                for j in 0..q2 {
                    out.push(BoundaryPoint {
                        edge,
                        sub: spec.sub_index(i, l),
                        point: disc.grid_index(gi, j),
                    });
                }
            }
        }
        Edge::Bottom | Edge::Top => {
            let (l, gj) = if edge == Edge::Bottom { (0, 0) } else { (n2 - 1, q2 - 1) };
            for m in 0..n1 {
                for i in 0..q1 {
                    out.push(BoundaryPoint {
                        edge,
                        sub: spec.sub_index(m, l),
                        point: disc.grid_index(i, gj),
                    });
                }
            }
        }
    }
    out
}
