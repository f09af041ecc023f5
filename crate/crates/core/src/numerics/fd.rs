//! Finite-difference derivatives on structured grids.

use crate::error::{ensure_finite, Result};

use super::grid::{ScalarField, VectorField2};
#[cfg(test)]
use super::grid::Grid2D;

/// Derivative along a non-periodic uniform line: central inside,
/// second-order one-sided at both ends.
#[inline]
fn line_derivative(v: &[f64], k: usize, h: f64) -> f64 {
    let n = v.len();
    if k == 0 {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    } else if k + 1 == n {
        (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
    } else {
        (v[k + 1] - v[k - 1]) / (2.0 * h)
    }
}

/// Cartesian gradient of a sampled field.
///
/// On polar grids the radial and angular derivatives are combined into
/// `(∂x, ∂y)`; the angular direction is periodic so it is always central.
pub fn fd_gradient(u: &ScalarField) -> Result<VectorField2> {
    ensure_finite(u.values(), "fd_gradient input")?;
    let grid = *u.grid();
    let (n1, n2) = grid.resolution();
    let (h1, h2) = grid.spacing();
    let mut gx = vec![0.0; grid.node_count()];
    let mut gy = vec![0.0; grid.node_count()];

    let mut line1 = vec![0.0; n1];
    let mut d1 = vec![0.0; grid.node_count()];
    for j in 0..n2 {
        for (i, slot) in line1.iter_mut().enumerate() {
            *slot = u.at(i, j);
        }
        for i in 0..n1 {
            d1[grid.index(i, j)] = line_derivative(&line1, i, h1);
        }
    }

    if grid.is_polar() {
        for i in 0..n1 {
            let r = grid.axis1(i);
            for j in 0..n2 {
                let up = u.at(i, (j + 1) % n2);
                let down = u.at(i, (j + n2 - 1) % n2);
                let d_theta = (up - down) / (2.0 * h2);
                let theta = grid.axis2(j);
                let (s, c) = theta.sin_cos();
                let k = grid.index(i, j);
                gx[k] = c * d1[k] - s * d_theta / r;
                gy[k] = s * d1[k] + c * d_theta / r;
            }
        }
    } else {
        let mut line2 = vec![0.0; n2];
        for i in 0..n1 {
            for (j, slot) in line2.iter_mut().enumerate() {
                *slot = u.at(i, j);
            }
            for j in 0..n2 {
                let k = grid.index(i, j);
                gx[k] = d1[k];
                gy[k] = line_derivative(&line2, j, h2);
            }
        }
    }

    VectorField2::new(ScalarField::new(grid, gx)?, ScalarField::new(grid, gy)?)
}

/// Entries of the 5-point Laplacian row for interior rectangular node (i, j):
/// `(node index, coefficient)` including the centre.
#[cfg(test)]
pub(crate) fn rect_laplacian_stencil(grid: &Grid2D, i: usize, j: usize) -> [(usize, f64); 5] {
    let (hx, hy) = grid.spacing();
    let cx = 1.0 / (hx * hx);
    let cy = 1.0 / (hy * hy);
    [
        (grid.index(i, j), -2.0 * (cx + cy)),
        (grid.index(i - 1, j), cx),
        (grid.index(i + 1, j), cx),
        (grid.index(i, j - 1), cy),
        (grid.index(i, j + 1), cy),
    ]
}
