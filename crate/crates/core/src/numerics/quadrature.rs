//! Area and boundary integrals of sampled fields, plus 1-D rules.

use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};

use super::grid::{Grid2D, GridKind, ScalarField};

/// Quadrature weight of each node for the area integral over the grid's domain.
///
/// Rectangular grids use the tensor trapezoid rule. Polar grids use the
/// periodic rectangle rule in θ and an r-weighted trapezoid in r; on the disk
/// each ring owns the annular cell around it and the boundary ring owns a
/// half cell.
pub fn area_weights(grid: &Grid2D) -> Vec<f64> {
    let (n1, n2) = grid.resolution();
    let (h1, h2) = grid.spacing();
    let w1: Vec<f64> = match grid.kind() {
        GridKind::Rectangular { .. } => trapezoid_weights(n1, h1),
        GridKind::PolarAnnulus { .. } => trapezoid_weights(n1, h1)
            .into_iter()
            .enumerate()
            .map(|(i, w)| w * grid.axis1(i))
            .collect(),
        GridKind::PolarDisk { radius } => (0..n1)
            .map(|i| {
                if i + 1 == n1 {
                    0.5 * h1 * (radius - 0.25 * h1)
                } else {
                    h1 * grid.axis1(i)
                }
            })
            .collect(),
    };
    let w2: Vec<f64> = if grid.is_polar() {
        vec![h2; n2]
    } else {
        trapezoid_weights(n2, h2)
    };
    let mut w = vec![0.0; grid.node_count()];
    for (i, a) in w1.iter().enumerate() {
        for (j, b) in w2.iter().enumerate() {
            w[grid.index(i, j)] = a * b;
        }
    }
    w
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// `∫_Ω u · weight(x, y) dA`.
pub fn integrate(u: &ScalarField, weight: Option<&dyn Fn(f64, f64) -> f64>) -> Result<f64> {
    ensure_finite(u.values(), "integrand")?;
    let grid = u.grid();
    let w = area_weights(grid);
    let mut total = 0.0;
    for (k, (&v, &wk)) in u.values().iter().zip(&w).enumerate() {
        let extra = match weight {
            Some(f) => {
                let (x, y) = grid.position_of(k);
                let e = f(x, y);
                if !e.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("integration weight at ({x}, {y})"),
                    });
                }
                e
            }
            None => 1.0,
        };
        total += v * wk * extra;
    }
    Ok(total)
}

/// One boundary node with its arc-length weight and outward unit normal.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryNode {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub ds: f64,
    pub normal: (f64, f64),
}

/// Boundary nodes of the grid with trapezoid arc-length weights.
/// Rectangle corners appear once per adjacent side.
pub fn boundary_nodes(grid: &Grid2D) -> Vec<BoundaryNode> {
    let (n1, n2) = grid.resolution();
    let (h1, h2) = grid.spacing();
    let mut out = Vec::new();
    let mut push = |i: usize, j: usize, ds: f64, normal: (f64, f64)| {
        let (x, y) = grid.position(i, j);
        out.push(BoundaryNode {
            index: grid.index(i, j),
            x,
            y,
            ds,
            normal,
        });
    };
    match grid.kind() {
        GridKind::Rectangular { .. } => {
            let wx = trapezoid_weights(n1, h1);
            let wy = trapezoid_weights(n2, h2);
            for (i, &w) in wx.iter().enumerate() {
                push(i, 0, w, (0.0, -1.0));
                push(i, n2 - 1, w, (0.0, 1.0));
            }
            for (j, &w) in wy.iter().enumerate() {
                push(0, j, w, (-1.0, 0.0));
                push(n1 - 1, j, w, (1.0, 0.0));
            }
        }
        GridKind::PolarAnnulus { inner, outer } => {
            for j in 0..n2 {
                let (s, c) = grid.axis2(j).sin_cos();
                push(0, j, inner * h2, (-c, -s));
                push(n1 - 1, j, outer * h2, (c, s));
            }
        }
        GridKind::PolarDisk { radius } => {
            for j in 0..n2 {
                let (s, c) = grid.axis2(j).sin_cos();
                push(n1 - 1, j, radius * h2, (c, s));
            }
        }
    }
    out
}

/// `∮_∂Ω u · [x·ν] · weight ds`, with the `x·ν` factor included when
/// `position_dot_normal` is set.
pub fn integrate_boundary(
    u: &ScalarField,
    position_dot_normal: bool,
    weight: Option<&dyn Fn(f64, f64) -> f64>,
) -> Result<f64> {
    ensure_finite(u.values(), "boundary integrand")?;
    let mut total = 0.0;
    for node in boundary_nodes(u.grid()) {
        let mut w = node.ds;
        if position_dot_normal {
            w *= node.x * node.normal.0 + node.y * node.normal.1;
        }
        if let Some(f) = weight {
            let e = f(node.x, node.y);
            if !e.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("boundary weight at ({}, {})", node.x, node.y),
                });
            }
            w *= e;
        }
        total += u.values()[node.index] * w;
    }
    Ok(total)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first cut into panels of length at most 1/2 so that
/// oscillatory integrands cannot fool the coarsest error estimate.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = ((b - a).abs() / 0.5).ceil().max(4.0) as usize;
    let h = (b - a) / panels as f64;
    let panel_tol = tol / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            let (fa, fb) = (f(lo), f(hi));
            let fm = f(0.5 * (lo + hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, lo, hi, fa, fm, fb, whole, panel_tol, 50)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
