//! Structured two-dimensional grids and the fields that live on them.
//!
//! Rectangular grids index nodes x-fastest. Polar grids index nodes
//! angle-fastest, so that the periodic seam and the radial coupling both stay
//! within a band of width `n_theta` in the assembled operators.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridKind {
    Rectangular { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// Tensor (r, θ) grid on `inner <= r <= outer`, θ periodic on [0, 2π).
    PolarAnnulus { inner: f64, outer: f64 },
    /// Disk of the given radius. Radial nodes sit at `(i + 1/2) h`, so the
    /// origin is never a node and the last ring lies on the boundary circle.
    PolarDisk { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid2D {
    kind: GridKind,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    pub fn rectangular(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        check_resolution(nx, ny)?;
        ensure_finite(&[x0, x1, y0, y1], "grid extents")?;
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::invalid("rectangular grid needs x0 < x1 and y0 < y1"));
        }
        Ok(Self {
            kind: GridKind::Rectangular { x0, x1, y0, y1 },
            nx,
            ny,
            hx: (x1 - x0) / (nx - 1) as f64,
            hy: (y1 - y0) / (ny - 1) as f64,
        })
    }

    /// Square `[lo, hi]^2` with `n` nodes per side.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::rectangular(lo, hi, lo, hi, n, n)
    }

    pub fn polar_annulus(inner: f64, outer: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        check_resolution(n_r, n_theta)?;
        ensure_finite(&[inner, outer], "annulus radii")?;
        if !(inner > 0.0 && outer > inner) {
            return Err(Error::invalid("polar annulus needs 0 < inner < outer"));
        }
        Ok(Self {
            kind: GridKind::PolarAnnulus { inner, outer },
            nx: n_r,
            ny: n_theta,
            hx: (outer - inner) / (n_r - 1) as f64,
            hy: 2.0 * PI / n_theta as f64,
        })
    }

    pub fn polar_disk(radius: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        check_resolution(n_r, n_theta)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("polar disk needs a positive radius"));
        }
        Ok(Self {
            kind: GridKind::PolarDisk { radius },
            nx: n_r,
            ny: n_theta,
            hx: radius / (n_r as f64 - 0.5),
            hy: 2.0 * PI / n_theta as f64,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn is_polar(&self) -> bool {
        !matches!(self.kind, GridKind::Rectangular { .. })
    }

    /// Node counts along the first (x or r) and second (y or θ) axis.
    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Spacing along the first and second axis (θ spacing in radians for polar grids).
    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.is_polar() {
            i * self.ny + j
        } else {
            j * self.nx + i
        }
    }

    #[inline]
    pub fn split_index(&self, k: usize) -> (usize, usize) {
        if self.is_polar() {
            (k / self.ny, k % self.ny)
        } else {
            (k % self.nx, k / self.nx)
        }
    }

    /// First-axis coordinate: x for rectangular grids, r for polar ones.
    #[inline]
    pub fn axis1(&self, i: usize) -> f64 {
        match self.kind {
            GridKind::Rectangular { x0, .. } => x0 + i as f64 * self.hx,
            GridKind::PolarAnnulus { inner, .. } => inner + i as f64 * self.hx,
            GridKind::PolarDisk { .. } => (i as f64 + 0.5) * self.hx,
        }
    }

    /// Second-axis coordinate: y for rectangular grids, θ for polar ones.
    #[inline]
    pub fn axis2(&self, j: usize) -> f64 {
        match self.kind {
            GridKind::Rectangular { y0, .. } => y0 + j as f64 * self.hy,
            _ => j as f64 * self.hy,
        }
    }

    /// Cartesian position of node (i, j).
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        let a = self.axis1(i);
        let b = self.axis2(j);
        if self.is_polar() {
            (a * b.cos(), a * b.sin())
        } else {
            (a, b)
        }
    }

    pub fn position_of(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.split_index(k);
        self.position(i, j)
    }

    /// Whether node (i, j) lies on ∂Ω.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        match self.kind {
            GridKind::Rectangular { .. } => i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny,
            GridKind::PolarAnnulus { .. } => i == 0 || i + 1 == self.nx,
            GridKind::PolarDisk { .. } => i + 1 == self.nx,
        }
    }

    /// Whether every ray from the origin meets ∂Ω once (x·ν ≥ 0 on the boundary).
    pub fn is_star_shaped_about_origin(&self) -> bool {
        match self.kind {
            GridKind::Rectangular { x0, x1, y0, y1 } => x0 <= 0.0 && x1 >= 0.0 && y0 <= 0.0 && y1 >= 0.0,
            GridKind::PolarAnnulus { .. } => false,
            GridKind::PolarDisk { .. } => true,
        }
    }

    /// Polar grids: radial index range of the rings carrying unknowns under
    /// homogeneous Dirichlet conditions.
    pub(crate) fn free_rings(&self) -> std::ops::Range<usize> {
        match self.kind {
            GridKind::PolarAnnulus { .. } => 1..self.nx - 1,
            GridKind::PolarDisk { .. } => 0..self.nx - 1,
            GridKind::Rectangular { .. } => 0..0,
        }
    }

    /// Radius of the cell face between rings `i` and `i + 1` (`i = -1` for the
    /// inner face of ring 0).
    pub(crate) fn face_radius(&self, i: isize) -> f64 {
        match self.kind {
            GridKind::PolarDisk { .. } if i < 0 => 0.0,
            _ => self.axis1(0) + (i as f64 + 0.5) * self.hx,
        }
    }
}

fn check_resolution(n1: usize, n2: usize) -> Result<()> {
    if n1 < 3 || n2 < 3 {
        return Err(Error::invalid(format!(
            "grid resolution must be at least 3 per axis, got {n1}x{n2}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        ensure_finite(&values, "scalar field")?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    /// Samples `f(x, y)` at every node (Cartesian coordinates).
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|k| {
                let (x, y) = grid.position_of(k);
                f(x, y)
            })
            .collect();
        Self::new(grid, values)
    }

    /// Samples `f(r, θ)` on a polar grid.
    pub fn from_polar_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !grid.is_polar() {
            return Err(Error::invalid("from_polar_fn needs a polar grid"));
        }
        let values = (0..grid.node_count())
            .map(|k| {
                let (i, j) = grid.split_index(k);
                f(grid.axis1(i), grid.axis2(j))
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `alpha * self + beta * other` on a shared grid.
    pub fn combine(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("fields live on different grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Self::new(self.grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Two scalar fields on one grid, e.g. a gradient or a planar map.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField2 {
    first: ScalarField,
    second: ScalarField,
}

impl VectorField2 {
    pub fn new(first: ScalarField, second: ScalarField) -> Result<Self> {
        if first.grid() != second.grid() {
            return Err(Error::invalid("vector field components must share one grid"));
        }
        Ok(Self { first, second })
    }

    pub fn grid(&self) -> &Grid2D {
        self.first.grid()
    }

    pub fn first(&self) -> &ScalarField {
        &self.first
    }

    pub fn second(&self) -> &ScalarField {
        &self.second
    }

    #[inline]
    pub fn at_index(&self, k: usize) -> (f64, f64) {
        (self.first.values()[k], self.second.values()[k])
    }

    /// Pointwise squared Euclidean norm.
    pub fn norm_squared(&self) -> ScalarField {
        let values = self
            .first
            .values()
            .iter()
            .zip(self.second.values())
            .map(|(a, b)| a * a + b * b)
            .collect();
        ScalarField {
            grid: *self.grid(),
            values,
        }
    }
}
