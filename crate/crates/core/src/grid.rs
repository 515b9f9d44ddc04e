//! Uniform node grids on a centred disk or an axis-aligned rectangle, with
//! Shortley–Weller arms where the disk boundary cuts a stencil.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
}

/// Domain geometry. The disk is centred at the origin; the rectangle is
/// `[0, lx] × [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk { radius: f64 },
    Rect { lx: f64, ly: f64 },
}

impl Shape {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match *self {
            Shape::Disk { radius } => x[0].hypot(x[1]) < radius,
            Shape::Rect { lx, ly } => x[0] > 0.0 && x[0] < lx && x[1] > 0.0 && x[1] < ly,
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        match *self {
            Shape::Disk { radius } => radius - x[0].hypot(x[1]),
            Shape::Rect { lx, ly } => x[0].min(lx - x[0]).min(x[1]).min(ly - x[1]),
        }
    }

    /// Length scale used to size grids: the radius or the shorter side.
    pub fn reference_length(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => radius,
            Shape::Rect { lx, ly } => lx.min(ly),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => std::f64::consts::PI * radius * radius,
            Shape::Rect { lx, ly } => lx * ly,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let ok = match *self {
            Shape::Disk { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Rect { lx, ly } => lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(GridError::Invalid(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// Stencil of one interior node: `Δ_h u = diag·u + Σ coeff·u_nb` with
/// boundary neighbours (value 0) dropped.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub diag: f64,
    pub neighbours: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct GridDomain {
    pub shape: Shape,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    /// Coordinates of node `(0, 0)`.
    pub x0: f64,
    pub y0: f64,
    pub kind: Vec<NodeKind>,
    /// Node index of each unknown.
    pub interior: Vec<usize>,
    /// Unknown index of each node, if interior.
    pub unknown_of: Vec<Option<usize>>,
}

impl GridDomain {
    /// Disk of the given radius with `n` cells per radius; the centre is a node.
    pub fn disk(radius: f64, n: usize) -> Result<Self, GridError> {
        let shape = Shape::Disk { radius };
        shape.validate()?;
        if n < 2 {
            return Err(GridError::Invalid(format!("need at least 2 cells per radius, got {n}")));
        }
        let h = radius / n as f64;
        let m = 2 * n + 1;
        let x0 = -(n as f64) * h;
        let mut kind = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                let x = x0 + i as f64 * h;
                let y = x0 + j as f64 * h;
                let d = radius - x.hypot(y);
                kind.push(if d > 1e-4 * h {
                    NodeKind::Interior
                } else if d >= -1e-4 * h {
                    NodeKind::Boundary
                } else {
                    NodeKind::Exterior
                });
            }
        }
        Ok(Self::assemble(shape, h, m, m, x0, x0, kind))
    }

    /// Rectangle `[0, lx] × [0, ly]` with `n` cells along the shorter side.
    /// Both side lengths must be integer multiples of the spacing.
    pub fn rect(lx: f64, ly: f64, n: usize) -> Result<Self, GridError> {
        let shape = Shape::Rect { lx, ly };
        shape.validate()?;
        if n < 2 {
            return Err(GridError::Invalid(format!("need at least 2 cells, got {n}")));
        }
        let h = lx.min(ly) / n as f64;
        let cx = (lx / h).round();
        let cy = (ly / h).round();
        if (cx * h - lx).abs() > 1e-9 * lx || (cy * h - ly).abs() > 1e-9 * ly {
            return Err(GridError::Invalid(format!("side lengths {lx} x {ly} are not multiples of h = {h}")));
        }
        let (nx, ny) = (cx as usize + 1, cy as usize + 1);
        let mut kind = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let edge = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
                kind.push(if edge { NodeKind::Boundary } else { NodeKind::Interior });
            }
        }
        Ok(Self::assemble(shape, h, nx, ny, 0.0, 0.0, kind))
    }

    /// Grid for `shape` with `n` cells along its reference length.
    pub fn new(shape: Shape, n: usize) -> Result<Self, GridError> {
        match shape {
            Shape::Disk { radius } => Self::disk(radius, n),
            Shape::Rect { lx, ly } => Self::rect(lx, ly, n),
        }
    }

    fn assemble(shape: Shape, h: f64, nx: usize, ny: usize, x0: f64, y0: f64, kind: Vec<NodeKind>) -> Self {
        let mut interior = Vec::new();
        let mut unknown_of = vec![None; kind.len()];
        for (k, kd) in kind.iter().enumerate() {
            if *kd == NodeKind::Interior {
                unknown_of[k] = Some(interior.len());
                interior.push(k);
            }
        }
        Self { shape, h, nx, ny, x0, y0, kind, interior, unknown_of }
    }

    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }

    pub fn n_unknowns(&self) -> usize {
        self.interior.len()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h]
    }

    /// Number of cells along the reference length.
    pub fn cells_per_length(&self) -> usize {
        (self.shape.reference_length() / self.h).round() as usize
    }

    /// Arm length from node `(x, y)` in direction `dir` (0:+x, 1:−x, 2:+y,
    /// 3:−y), shortened where the disk boundary is crossed.
    fn arm(&self, k: usize, dir: usize) -> (Option<usize>, f64) {
        let (i, j) = self.ij(k);
        let (ni, nj) = match dir {
            0 => (i as isize + 1, j as isize),
            1 => (i as isize - 1, j as isize),
            2 => (i as isize, j as isize + 1),
            _ => (i as isize, j as isize - 1),
        };
        let nb = self.index(ni as usize, nj as usize);
        match self.kind[nb] {
            NodeKind::Interior => (Some(nb), self.h),
            NodeKind::Boundary => (None, self.h),
            NodeKind::Exterior => {
                let Shape::Disk { radius } = self.shape else {
                    unreachable!("rectangles have no exterior nodes");
                };
                let [x, y] = self.coords(k);
                let (along, across) = if dir < 2 { (x, y) } else { (y, x) };
                let reach = (radius * radius - across * across).max(0.0).sqrt();
                let arm = if dir.is_multiple_of(2) { reach - along } else { along + reach };
                (None, arm.clamp(1e-12 * self.h, self.h))
            }
        }
    }

    /// Five-point (Shortley–Weller near the disk boundary) stencil of the
    /// Laplacian at interior unknown `u`.
    pub fn stencil(&self, u: usize) -> Stencil {
        let k = self.interior[u];
        let arms: Vec<(Option<usize>, f64)> = (0..4).map(|d| self.arm(k, d)).collect();
        let mut diag = 0.0;
        let mut neighbours = Vec::with_capacity(4);
        for axis in 0..2 {
            let (pa, ha) = arms[2 * axis];
            let (ma, hb) = arms[2 * axis + 1];
            let cp = 2.0 / (ha * (ha + hb));
            let cm = 2.0 / (hb * (ha + hb));
            diag -= cp + cm;
            if let Some(nb) = pa {
                neighbours.push((self.unknown_of[nb].expect("interior"), cp));
            }
            if let Some(nb) = ma {
                neighbours.push((self.unknown_of[nb].expect("interior"), cm));
            }
        }
        Stencil { diag, neighbours }
    }

    /// Discrete Laplacian of a full-grid field (zero outside the unknowns),
    /// returned per unknown.
    pub fn laplacian(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_unknowns())
            .map(|u| {
                let st = self.stencil(u);
                let k = self.interior[u];
                let mut acc = st.diag * v[k];
                for (nb, c) in st.neighbours {
                    acc += c * v[self.interior[nb]];
                }
                acc
            })
            .collect()
    }

    /// Bilinear interpolation of a full-grid field; `None` outside the grid box.
    pub fn interpolate(&self, v: &[f64], x: [f64; 2]) -> Option<f64> {
        let fx = (x[0] - self.x0) / self.h;
        let fy = (x[1] - self.y0) / self.h;
        let max_x = (self.nx - 1) as f64;
        let max_y = (self.ny - 1) as f64;
        if !(fx >= -1e-9 && fy >= -1e-9 && fx <= max_x + 1e-9 && fy <= max_y + 1e-9) {
            return None;
        }
        let fx = fx.clamp(0.0, max_x);
        let fy = fy.clamp(0.0, max_y);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let at = |a: usize, b: usize| v[self.index(a, b)];
        Some(
            (1.0 - tx) * (1.0 - ty) * at(i, j)
                + tx * (1.0 - ty) * at(i + 1, j)
                + (1.0 - tx) * ty * at(i, j + 1)
                + tx * ty * at(i + 1, j + 1),
        )
    }

    /// Midpoint-rule integral of `f(v)` over all nodes, each weighted by `h²`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, v: &[f64], f: F) -> f64 {
        let w = self.h * self.h;
        self.interior.iter().map(|&k| f(v[k])).sum::<f64>() * w
    }

    /// As [`GridDomain::integrate`], restricted to nodes within `radius` of `c`.
    pub fn integrate_ball<F: Fn(f64) -> f64>(&self, v: &[f64], c: [f64; 2], radius: f64, f: F) -> f64 {
        let w = self.h * self.h;
        let r2 = radius * radius;
        let (i_lo, i_hi, j_lo, j_hi) = self.box_range(c, radius);
        let mut acc = 0.0;
        for j in j_lo..=j_hi {
            for i in i_lo..=i_hi {
                let k = self.index(i, j);
                if self.kind[k] != NodeKind::Interior {
                    continue;
                }
                let [x, y] = self.coords(k);
                if (x - c[0]).powi(2) + (y - c[1]).powi(2) <= r2 {
                    acc += f(v[k]);
                }
            }
        }
        acc * w
    }

    /// Index range of nodes in the bounding box of a ball, clipped to the grid.
    pub fn box_range(&self, c: [f64; 2], radius: f64) -> (usize, usize, usize, usize) {
        let clip = |t: f64, n: usize| t.max(0.0).min((n - 1) as f64);
        let i_lo = clip(((c[0] - radius - self.x0) / self.h).floor(), self.nx) as usize;
        let i_hi = clip(((c[0] + radius - self.x0) / self.h).ceil(), self.nx) as usize;
        let j_lo = clip(((c[1] - radius - self.y0) / self.h).floor(), self.ny) as usize;
        let j_hi = clip(((c[1] + radius - self.y0) / self.h).ceil(), self.ny) as usize;
        (i_lo, i_hi, j_lo, j_hi)
    }

    /// Field sampled from `f` at interior nodes, zero elsewhere.
    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for &k in &self.interior {
            v[k] = f(self.coords(k));
        }
        v
    }
}
