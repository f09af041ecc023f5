//! Two-dimensional Monge–Ampère solves `det D²u = h` by Newton on the central
//! nine-point Hessian, gradient hull checks, and the quadratic-in-λ expansion
//! of `det J(g + λf)`.
//!
//! The central scheme is not monotone, so the solver is only meant for smooth
//! convex solutions; nonconvex discrete critical points are filtered by the
//! convexity margin.

use std::io::Write;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::hull::Point2;
use crate::hull_property::{check_hull_property, HullReport, TaggedImage};
use crate::numerics::{fd_gradient, newton_solve, Grid2D, NewtonOptions, ScalarField, SparseSystem};

/// Solved region inside a rectangular grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MaRegion {
    /// The whole grid rectangle.
    Full,
    /// Grid nodes with `|x - c| <= radius`: a staircase polygon inscribed in the disk.
    Disk { cx: f64, cy: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    /// Unknown: the full nine-point stencil lies in the region.
    Interior,
    /// Dirichlet node inside the region.
    Boundary,
    /// Outside the region. Holds boundary data so the field extends smoothly.
    Outside,
}

pub fn node_roles(grid: &Grid2D, region: MaRegion) -> Result<Vec<NodeRole>> {
    if grid.is_polar() {
        return Err(Error::invalid("Monge–Ampère solves need a rectangular grid"));
    }
    let (nx, ny) = grid.resolution();
    let inside = |i: isize, j: isize| {
        if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
            return false;
        }
        match region {
            MaRegion::Full => true,
            MaRegion::Disk { cx, cy, radius } => {
                let (x, y) = grid.position(i as usize, j as usize);
                (x - cx).hypot(y - cy) <= radius * (1.0 + 1e-12)
            }
        }
    };
    let mut roles = vec![NodeRole::Outside; grid.node_count()];
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            if !inside(i, j) {
                continue;
            }
            let full = (-1..=1).all(|di| (-1..=1).all(|dj| inside(i + di, j + dj)));
            roles[grid.index(i as usize, j as usize)] = if full { NodeRole::Interior } else { NodeRole::Boundary };
        }
    }
    if !roles.contains(&NodeRole::Interior) {
        return Err(Error::invalid("region has no interior nodes"));
    }
    Ok(roles)
}

#[derive(Clone, Debug, Serialize)]
pub struct MaSolution {
    #[serde(skip)]
    pub u: ScalarField,
    #[serde(skip)]
    pub roles: Vec<NodeRole>,
    pub region: MaRegion,
    pub residual_norm: f64,
    /// Smallest eigenvalue of the discrete Hessian over interior nodes.
    pub convexity_margin: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub boundary: String,
}

/// Hessian entries `(Dxx, Dyy, Dxy)` at interior node (i, j).
#[inline]
fn hessian(grid: &Grid2D, v: &[f64], i: usize, j: usize) -> (f64, f64, f64) {
    let (hx, hy) = grid.spacing();
    let at = |a: usize, b: usize| v[grid.index(a, b)];
    let c = at(i, j);
    let dxx = (at(i + 1, j) - 2.0 * c + at(i - 1, j)) / (hx * hx);
    let dyy = (at(i, j + 1) - 2.0 * c + at(i, j - 1)) / (hy * hy);
    let dxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * hx * hy);
    (dxx, dyy, dxy)
}

fn min_eigenvalue(a: f64, c: f64, b: f64) -> f64 {
    0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

struct Layout {
    grid: Grid2D,
    /// Interior node indices in grid order.
    nodes: Vec<usize>,
    /// Node → unknown.
    unknown: Vec<Option<usize>>,
}

impl Layout {
    fn new(grid: Grid2D, roles: &[NodeRole]) -> Self {
        let nodes: Vec<usize> = (0..roles.len()).filter(|&k| roles[k] == NodeRole::Interior).collect();
        let mut unknown = vec![None; roles.len()];
        for (q, &k) in nodes.iter().enumerate() {
            unknown[k] = Some(q);
        }
        Self { grid, nodes, unknown }
    }

    fn scatter(&self, base: &[f64], x: &[f64]) -> Vec<f64> {
        let mut v = base.to_vec();
        for (q, &k) in self.nodes.iter().enumerate() {
            v[k] = x[q];
        }
        v
    }
}

/// Solves `u_xx u_yy − u_xy² = h` in the region with `u = boundary` on
/// boundary nodes.
///
/// Newton starts from the five-point solution of `Δu = 2√h`. The result is
/// accepted only if the residual reaches `tol` and the convexity margin is
/// at least `-10·tol`.
pub fn solve_ma(
    grid: &Grid2D,
    region: MaRegion,
    h: &ScalarField,
    boundary: &dyn Fn(f64, f64) -> f64,
    tol: f64,
) -> Result<MaSolution> {
    if h.grid() != grid {
        return Err(Error::invalid("h lives on a different grid"));
    }
    if let Some(k) = h.values().iter().position(|&v| v < 0.0) {
        return Err(Error::invalid(format!("h is negative at node {k}")));
    }
    let roles = node_roles(grid, region)?;
    let layout = Layout::new(*grid, &roles);
    let mut base = vec![0.0; grid.node_count()];
    for (k, slot) in base.iter_mut().enumerate() {
        if roles[k] != NodeRole::Interior {
            let (x, y) = grid.position_of(k);
            *slot = boundary(x, y);
        }
    }
    ensure_finite(&base, "boundary data")?;

    let u0 = poisson_initializer(&layout, &base, h)?;
    let hv = h.values();
    let residual = |x: &[f64]| -> Vec<f64> {
        let v = layout.scatter(&base, x);
        layout
            .nodes
            .iter()
            .map(|&k| {
                let (i, j) = grid.split_index(k);
                let (a, c, b) = hessian(grid, &v, i, j);
                a * c - b * b - hv[k]
            })
            .collect()
    };
    let jacobian = |x: &[f64]| -> SparseSystem {
        let v = layout.scatter(&base, x);
        let (hx, hy) = grid.spacing();
        let (cx, cy, cxy) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (4.0 * hx * hy));
        let mut s = SparseSystem::with_capacity(layout.nodes.len(), 9 * layout.nodes.len());
        for (q, &k) in layout.nodes.iter().enumerate() {
            let (i, j) = grid.split_index(k);
            let (dxx, dyy, dxy) = hessian(grid, &v, i, j);
            let entries = [
                (i, j, -2.0 * cx * dyy - 2.0 * cy * dxx),
                (i + 1, j, cx * dyy),
                (i - 1, j, cx * dyy),
                (i, j + 1, cy * dxx),
                (i, j - 1, cy * dxx),
                (i + 1, j + 1, -2.0 * dxy * cxy),
                (i - 1, j - 1, -2.0 * dxy * cxy),
                (i + 1, j - 1, 2.0 * dxy * cxy),
                (i - 1, j + 1, 2.0 * dxy * cxy),
            ];
            for (a, b, val) in entries {
                if let Some(col) = layout.unknown[grid.index(a, b)] {
                    s.add(q, col, val);
                }
            }
        }
        s
    };
    let opts = NewtonOptions {
        tol,
        ..NewtonOptions::default()
    };
    let rep = newton_solve(residual, jacobian, u0, &opts)?;
    let values = layout.scatter(&base, &rep.solution);
    let margin = layout
        .nodes
        .iter()
        .map(|&k| {
            let (i, j) = grid.split_index(k);
            let (a, c, b) = hessian(grid, &values, i, j);
            min_eigenvalue(a, c, b)
        })
        .fold(f64::INFINITY, f64::min);
    if margin < -10.0 * tol {
        return Err(Error::Rejected(format!("discrete solution is not convex (margin {margin:.3e})")));
    }
    Ok(MaSolution {
        u: ScalarField::new(*grid, values)?,
        roles,
        region,
        residual_norm: rep.residual_norm,
        convexity_margin: margin,
        iterations: rep.iterations,
        residual_history: rep.history,
        boundary: "dirichlet from callable".into(),
    })
}

fn poisson_initializer(layout: &Layout, base: &[f64], h: &ScalarField) -> Result<Vec<f64>> {
    let grid = &layout.grid;
    let (hx, hy) = grid.spacing();
    let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let n = layout.nodes.len();
    let mut s = SparseSystem::with_capacity(n, 5 * n);
    for (q, &k) in layout.nodes.iter().enumerate() {
        let (i, j) = grid.split_index(k);
        let mut rhs = 2.0 * h.values()[k].sqrt();
        s.add(q, q, -2.0 * (cx + cy));
        for (a, b, c) in [(i + 1, j, cx), (i - 1, j, cx), (i, j + 1, cy), (i, j - 1, cy)] {
            let node = grid.index(a, b);
            match layout.unknown[node] {
                Some(col) => s.add(q, col, c),
                None => rhs -= c * base[node],
            }
        }
        s.rhs_mut()[q] = rhs;
    }
    s.solve()
}

/// Hull check of finite-difference gradients: interior-node gradients against
/// the hull of boundary-node gradients.
pub fn gradient_hull_check(u: &ScalarField, roles: &[NodeRole], tol: f64) -> Result<HullReport> {
    if roles.len() != u.grid().node_count() {
        return Err(Error::invalid("role count does not match the grid"));
    }
    let grad = fd_gradient(u)?;
    let grid = u.grid();
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for (k, role) in roles.iter().enumerate() {
        let (gx, gy) = grad.at_index(k);
        match role {
            NodeRole::Interior => {
                let (x, y) = grid.position_of(k);
                interior.push(TaggedImage::new(vec![x, y], Point2::new(gx, gy)));
            }
            NodeRole::Boundary => boundary.push(Point2::new(gx, gy)),
            NodeRole::Outside => {}
        }
    }
    check_hull_property(&interior, &boundary, tol)
}

pub fn verify_gradient_hull(sol: &MaSolution, tol: f64) -> Result<HullReport> {
    gradient_hull_check(&sol.u, &sol.roles, tol)
}

impl MaSolution {
    /// Grid spacing (the larger of the two).
    pub fn spacing(&self) -> f64 {
        let (hx, hy) = self.u.grid().spacing();
        hx.max(hy)
    }

    /// Largest nodal error against `exact` over interior nodes.
    pub fn max_error(&self, exact: &dyn Fn(f64, f64) -> f64) -> f64 {
        let grid = self.u.grid();
        (0..grid.node_count())
            .filter(|&k| self.roles[k] == NodeRole::Interior)
            .map(|k| {
                let (x, y) = grid.position_of(k);
                (self.u.values()[k] - exact(x, y)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Region nodes as CSV: `node,x,y,u,u_x,u_y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let grad = fd_gradient(&self.u)?;
        writeln!(w, "node,x,y,u,u_x,u_y")?;
        let grid = self.u.grid();
        for k in 0..grid.node_count() {
            if self.roles[k] == NodeRole::Outside {
                continue;
            }
            let (x, y) = grid.position_of(k);
            let (gx, gy) = grad.at_index(k);
            writeln!(w, "{k},{x},{y},{},{gx},{gy}", self.u.values()[k])?;
        }
        Ok(())
    }
}

/// A rectangular grid on the bounding square of the given region.
pub fn grid_for_disk(cx: f64, cy: f64, radius: f64, n: usize) -> Result<(Grid2D, MaRegion)> {
    let g = Grid2D::rectangular(cx - radius, cx + radius, cy - radius, cy + radius, n, n)?;
    Ok((g, MaRegion::Disk { cx, cy, radius }))
}

// ---------------------------------------------------------------------------
// Determinant expansion
// ---------------------------------------------------------------------------

/// Gradient callable `(x, y) ↦ (∂x, ∂y)`.
pub type GradFn<'a> = &'a dyn Fn(f64, f64) -> (f64, f64);

/// First derivatives of `f = (u, v)` and `g = (α, β)`, plus an optional
/// right-hand side `h` for the hypothesis fields.
pub struct ExpansionInputs<'a> {
    pub u: GradFn<'a>,
    pub v: GradFn<'a>,
    pub alpha: GradFn<'a>,
    pub beta: GradFn<'a>,
    pub h: Option<&'a dyn Fn(f64, f64) -> f64>,
}

/// Coefficients of `det J(g + λf) = Aλ² + Bλ + C` at (x, y).
pub fn expansion_coefficients(inp: &ExpansionInputs, x: f64, y: f64) -> (f64, f64, f64) {
    let (ux, uy) = (inp.u)(x, y);
    let (vx, vy) = (inp.v)(x, y);
    let (ax, ay) = (inp.alpha)(x, y);
    let (bx, by) = (inp.beta)(x, y);
    let a = ux * vy - uy * vx;
    let b = by * ux - bx * uy - ay * vx + ax * vy;
    let c = ax * by - ay * bx;
    (a, b, c)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub max_discrepancy: f64,
    pub nodes: usize,
    pub lambdas: Vec<f64>,
    /// `min (|C| + |h|)` over nodes, when `h` is given.
    pub min_nondegeneracy: Option<f64>,
    /// `min C·h` over nodes, when `h` is given.
    pub min_sign_product: Option<f64>,
}

pub fn jacobian_expansion_check(inp: &ExpansionInputs, grid: &Grid2D, lambdas: &[f64]) -> Result<ExpansionReport> {
    ensure_finite(lambdas, "lambda list")?;
    let mut worst: f64 = 0.0;
    let mut nondeg = f64::INFINITY;
    let mut sign = f64::INFINITY;
    for k in 0..grid.node_count() {
        let (x, y) = grid.position_of(k);
        let (a, b, c) = expansion_coefficients(inp, x, y);
        let (ux, uy) = (inp.u)(x, y);
        let (vx, vy) = (inp.v)(x, y);
        let (ax, ay) = (inp.alpha)(x, y);
        let (bx, by) = (inp.beta)(x, y);
        for &l in lambdas {
            let direct = (ax + l * ux) * (by + l * vy) - (ay + l * uy) * (bx + l * vx);
            let expanded = a * l * l + b * l + c;
            worst = worst.max((direct - expanded).abs());
        }
        if let Some(h) = inp.h {
            let hv = h(x, y);
            nondeg = nondeg.min(c.abs() + hv.abs());
            sign = sign.min(c * hv);
        }
    }
    Ok(ExpansionReport {
        max_discrepancy: worst,
        nodes: grid.node_count(),
        lambdas: lambdas.to_vec(),
        min_nondegeneracy: inp.h.map(|_| nondeg),
        min_sign_product: inp.h.map(|_| sign),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn solve_exact(grid: Grid2D, region: MaRegion, u: fn(f64, f64) -> f64, h: f64) -> MaSolution {
        let hf = ScalarField::from_fn(grid, |_, _| h).unwrap();
        solve_ma(&grid, region, &hf, &u, 1e-10).unwrap()
    }

    #[test]
    fn recovers_quadratics() {
        let g = Grid2D::square(0.0, 1.0, 33).unwrap();
        let s = solve_exact(g, MaRegion::Full, |x, y| 0.5 * (x * x + y * y), 1.0);
        assert!(s.max_error(&|x, y| 0.5 * (x * x + y * y)) <= 1e-8);
        let s = solve_exact(g, MaRegion::Full, |x, y| 0.5 * (x * x + 4.0 * y * y), 4.0);
        assert!(s.max_error(&|x, y| 0.5 * (x * x + 4.0 * y * y)) <= 1e-8);
        let s = solve_exact(g, MaRegion::Full, |x, y| x * x + x * y + y * y, 3.0);
        assert!(s.max_error(&|x, y| x * x + x * y + y * y) <= 1e-8);
        assert!(s.convexity_margin > 0.9);
    }

    fn exp_u(x: f64, y: f64) -> f64 {
        (0.5 * (x * x + y * y)).exp()
    }

    fn exp_h(x: f64, y: f64) -> f64 {
        (1.0 + x * x + y * y) * (x * x + y * y).exp()
    }

    #[test]
    fn manufactured_exponential_is_second_order() {
        // Hessian of e^{r²/2} is e^{r²/2}(I + x xᵀ), whose determinant is exp_h.
        let (x, y) = (0.3, -0.2);
        let e = exp_u(x, y);
        let det = (e * (1.0 + x * x)) * (e * (1.0 + y * y)) - (e * x * y).powi(2);
        assert!((det - exp_h(x, y)).abs() < 1e-14);

        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| {
                let g = Grid2D::square(-0.5, 0.5, n).unwrap();
                let h = ScalarField::from_fn(g, exp_h).unwrap();
                let s = solve_ma(&g, MaRegion::Full, &h, &exp_u, 1e-10).unwrap();
                s.max_error(&exp_u)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.2, "{errs:?}");
        }
    }

    #[test]
    fn negative_h_rejected() {
        let g = Grid2D::square(0.0, 1.0, 9).unwrap();
        let h = ScalarField::from_fn(g, |x, _| x - 0.5).unwrap();
        assert!(solve_ma(&g, MaRegion::Full, &h, &|_, _| 0.0, 1e-8).is_err());
    }

    #[test]
    fn disk_gradient_hull() {
        let (g, region) = grid_for_disk(0.0, 0.0, 1.0, 41).unwrap();
        let s = solve_exact(g, region, |x, y| 0.5 * (x * x + y * y), 1.0);
        let rep = verify_gradient_hull(&s, 2.0 * s.spacing()).unwrap();
        assert!(rep.satisfied, "{}", rep.max_violation);
    }

    #[test]
    fn corrupted_field_leaves_hull() {
        let g = Grid2D::square(-0.5, 0.5, 65).unwrap();
        let s = solve_exact(g, MaRegion::Full, |x, y| 0.5 * (x * x + y * y), 1.0);
        let tol = 4.0 * s.spacing();
        assert!(verify_gradient_hull(&s, tol).unwrap().satisfied);
        let bad = ScalarField::from_fn(g, |x, y| 0.5 * (x * x + y * y) + 0.5 * (3.0 * PI * x).sin() * (3.0 * PI * y).sin())
            .unwrap();
        let rep = gradient_hull_check(&bad, &s.roles, tol).unwrap();
        assert!(!rep.satisfied);
        assert!(rep.max_violation > 0.1);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid2D::square(0.0, 1.0, 5).unwrap();
        let s = solve_exact(g, MaRegion::Full, |x, y| 0.5 * (x * x + y * y), 1.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 26);
        assert!(text.starts_with("node,x,y,u,u_x,u_y\n"));
    }

    fn rotation_inputs() -> (impl Fn(f64, f64) -> (f64, f64), impl Fn(f64, f64) -> (f64, f64)) {
        (|_: f64, _: f64| (0.0, -1.0), |_: f64, _: f64| (1.0, 0.0))
    }

    #[test]
    fn hand_checked_determinant() {
        let (alpha, beta) = rotation_inputs();
        let u = |_: f64, _: f64| (1.0, 0.0);
        let v = |_: f64, _: f64| (0.0, 1.0);
        let inp = ExpansionInputs {
            u: &u,
            v: &v,
            alpha: &alpha,
            beta: &beta,
            h: None,
        };
        assert_eq!(expansion_coefficients(&inp, 0.3, 0.7), (1.0, 0.0, 1.0));
        let g = Grid2D::square(-1.0, 1.0, 5).unwrap();
        let rep = jacobian_expansion_check(&inp, &g, &[0.0, 2.0]).unwrap();
        assert_eq!(rep.max_discrepancy, 0.0);
    }

    #[test]
    fn gradient_pair_reduction_has_b_zero_c_one() {
        // f = ∇(|x|²/2) = (x, y), so u_x-row is (1, 0) and v-row is (0, 1).
        let (alpha, beta) = rotation_inputs();
        let u = |_: f64, _: f64| (1.0, 0.0);
        let v = |_: f64, _: f64| (0.0, 1.0);
        let h = |_: f64, _: f64| 1.0;
        let inp = ExpansionInputs {
            u: &u,
            v: &v,
            alpha: &alpha,
            beta: &beta,
            h: Some(&h),
        };
        let g = Grid2D::square(-1.0, 1.0, 7).unwrap();
        for k in 0..g.node_count() {
            let (x, y) = g.position_of(k);
            let (_, b, c) = expansion_coefficients(&inp, x, y);
            assert_eq!((b, c), (0.0, 1.0));
        }
        let rep = jacobian_expansion_check(&inp, &g, &[0.0, 0.5, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!(rep.min_sign_product, Some(1.0));
        assert_eq!(rep.min_nondegeneracy, Some(2.0));
    }

    #[test]
    fn lambda_zero_gives_det_of_g() {
        let u = |x: f64, y: f64| (2.0 * x, y);
        let v = |x: f64, y: f64| (x * y, 3.0);
        let alpha = |x: f64, y: f64| (y * y, 2.0 * x * y);
        let beta = |x: f64, _: f64| (1.0, x);
        let inp = ExpansionInputs {
            u: &u,
            v: &v,
            alpha: &alpha,
            beta: &beta,
            h: None,
        };
        let g = Grid2D::square(-1.0, 1.0, 9).unwrap();
        let rep = jacobian_expansion_check(&inp, &g, &[0.0]).unwrap();
        assert!(rep.max_discrepancy <= 1e-14);
    }
}
