//! Five-point Laplacian on polar grids in conservative (flux) form, and a
//! fast Dirichlet solver that diagonalises the periodic angular direction.
//!
//! Radial part at ring i:
//! `[r_{i+1/2}(u_{i+1} - u_i) - r_{i-1/2}(u_i - u_{i-1})] / (r_i h^2)`,
//! angular part `(u_{j+1} - 2u_j + u_{j-1}) / (r_i^2 hθ^2)`. With the ring
//! weights `r_i` the operator is symmetric.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

use super::grid::{Grid2D, ScalarField};
use super::sparse::SparseSystem;

/// Numbering of the free (non-Dirichlet) nodes of a polar grid.
#[derive(Clone, Copy, Debug)]
pub struct PolarUnknowns {
    grid: Grid2D,
    first_ring: usize,
    rings: usize,
}

impl PolarUnknowns {
    pub fn new(grid: &Grid2D) -> Result<Self> {
        if !grid.is_polar() {
            return Err(Error::invalid("polar operator needs a polar grid"));
        }
        let free = grid.free_rings();
        Ok(Self {
            grid: *grid,
            first_ring: free.start,
            rings: free.len(),
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.rings * self.grid.resolution().1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node index of unknown `q`.
    #[inline]
    pub fn node(&self, q: usize) -> usize {
        q + self.first_ring * self.grid.resolution().1
    }

    /// Scatter unknowns into a full field with zero Dirichlet rings.
    pub fn to_field(&self, unknowns: &[f64]) -> Result<ScalarField> {
        let mut v = vec![0.0; self.grid.node_count()];
        for (q, &x) in unknowns.iter().enumerate() {
            v[self.node(q)] = x;
        }
        ScalarField::new(self.grid, v)
    }

    pub fn from_field(&self, u: &ScalarField) -> Vec<f64> {
        (0..self.len()).map(|q| u.values()[self.node(q)]).collect()
    }

    /// Couplings of ring `i` (global radial index) to rings i-1, i, i+1 and the
    /// angular coefficient, for the Laplacian (not its negative).
    fn ring_coefficients(&self, i: usize) -> (f64, f64, f64, f64) {
        let g = &self.grid;
        let (h, ht) = g.spacing();
        let r = g.axis1(i);
        let outer = g.face_radius(i as isize);
        let inner = g.face_radius(i as isize - 1);
        let lower = inner / (r * h * h);
        let upper = outer / (r * h * h);
        let ang = 1.0 / (r * r * ht * ht);
        (lower, -(lower + upper), upper, ang)
    }

    /// `Δ_h u` at every unknown, with zero values on Dirichlet rings.
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let nt = self.grid.resolution().1;
        let mut out = vec![0.0; self.len()];
        for ring in 0..self.rings {
            let i = ring + self.first_ring;
            let (lo, mid, hi, ang) = self.ring_coefficients(i);
            for j in 0..nt {
                let q = ring * nt + j;
                let c = u[q];
                let below = if ring > 0 { u[q - nt] } else { 0.0 };
                let above = if ring + 1 < self.rings { u[q + nt] } else { 0.0 };
                let left = u[ring * nt + (j + nt - 1) % nt];
                let right = u[ring * nt + (j + 1) % nt];
                out[q] = lo * below + mid * c + hi * above + ang * (left - 2.0 * c + right);
            }
        }
        out
    }

    /// Sparse `Δ_h` on the unknowns plus `diag` on the diagonal.
    pub fn laplacian_system(&self, diag: &[f64]) -> SparseSystem {
        let nt = self.grid.resolution().1;
        let mut s = SparseSystem::with_capacity(self.len(), 5 * self.len());
        for ring in 0..self.rings {
            let i = ring + self.first_ring;
            let (lo, mid, hi, ang) = self.ring_coefficients(i);
            for j in 0..nt {
                let q = ring * nt + j;
                s.add(q, q, mid - 2.0 * ang + diag[q]);
                if ring > 0 {
                    s.add(q, q - nt, lo);
                }
                if ring + 1 < self.rings {
                    s.add(q, q + nt, hi);
                }
                s.add(q, ring * nt + (j + nt - 1) % nt, ang);
                s.add(q, ring * nt + (j + 1) % nt, ang);
            }
        }
        s
    }

    /// Ring weights `r_i` making the operator symmetric (up to a constant factor).
    pub fn weights(&self) -> Vec<f64> {
        let nt = self.grid.resolution().1;
        (0..self.len())
            .map(|q| self.grid.axis1(q / nt + self.first_ring))
            .collect()
    }
}

/// Direct solver for `-Δ_h w = f` with homogeneous Dirichlet rings: a DFT in θ
/// turns the problem into one tridiagonal radial system per angular mode.
pub struct PolarPoissonSolver {
    unknowns: PolarUnknowns,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Per ring: (lower, diag without angular part, upper) of -Δ_r.
    radial: Vec<(f64, f64, f64)>,
    /// Per ring: 1 / r^2.
    inv_r2: Vec<f64>,
    /// Angular eigenvalues of the negative periodic second difference.
    mode_eigs: Vec<f64>,
}

impl PolarPoissonSolver {
    pub fn new(grid: &Grid2D) -> Result<Self> {
        let unknowns = PolarUnknowns::new(grid)?;
        let nt = grid.resolution().1;
        let ht = grid.spacing().1;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nt);
        let inverse = planner.plan_fft_inverse(nt);
        let mut radial = Vec::with_capacity(unknowns.rings);
        let mut inv_r2 = Vec::with_capacity(unknowns.rings);
        for ring in 0..unknowns.rings {
            let i = ring + unknowns.first_ring;
            let (lo, mid, hi, _) = unknowns.ring_coefficients(i);
            radial.push((-lo, -mid, -hi));
            let r = grid.axis1(i);
            inv_r2.push(1.0 / (r * r));
        }
        let mode_eigs = (0..nt)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / nt as f64).sin();
                4.0 * s * s / (ht * ht)
            })
            .collect();
        Ok(Self {
            unknowns,
            forward,
            inverse,
            radial,
            inv_r2,
            mode_eigs,
        })
    }

    pub fn unknowns(&self) -> &PolarUnknowns {
        &self.unknowns
    }

    /// Solves `-Δ_h w = rhs` on the unknowns.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let nt = self.unknowns.grid.resolution().1;
        let rings = self.unknowns.rings;
        if rhs.len() != rings * nt {
            return Err(Error::invalid("rhs length does not match polar unknowns"));
        }
        let mut spec: Vec<Complex<f64>> = rhs.iter().map(|&v| Complex::new(v, 0.0)).collect();
        for row in spec.chunks_mut(nt) {
            self.forward.process(row);
        }
        let mut c_prime = vec![0.0; rings];
        let mut d_prime = vec![Complex::new(0.0, 0.0); rings];
        for k in 0..nt {
            let mu = self.mode_eigs[k];
            // Thomas algorithm on the radial tridiagonal system of mode k.
            for ring in 0..rings {
                let (a, b0, c) = self.radial[ring];
                let b = b0 + mu * self.inv_r2[ring];
                let d = spec[ring * nt + k];
                if ring == 0 {
                    c_prime[0] = c / b;
                    d_prime[0] = d / b;
                } else {
                    let denom = b - a * c_prime[ring - 1];
                    c_prime[ring] = c / denom;
                    d_prime[ring] = (d - d_prime[ring - 1] * a) / denom;
                }
            }
            let mut next = d_prime[rings - 1];
            spec[(rings - 1) * nt + k] = next;
            for ring in (0..rings - 1).rev() {
                next = d_prime[ring] - next * c_prime[ring];
                spec[ring * nt + k] = next;
            }
        }
        let scale = 1.0 / nt as f64;
        let mut out = Vec::with_capacity(rings * nt);
        for row in spec.chunks_mut(nt) {
            self.inverse.process(row);
            out.extend(row.iter().map(|z| z.re * scale));
        }
        Ok(out)
    }
}

/// First Dirichlet eigenpair of `-Δ_h` by inverse power iteration.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    /// Eigenvector on the unknowns, positive, unit norm in the ring-weighted inner product.
    pub vector: Vec<f64>,
    /// Rayleigh quotient after each iteration.
    pub trace: Vec<f64>,
}

/// Iterates until the Rayleigh quotient changes by at most `rel_tol`
/// (relative) and the eigen-residual `‖-Δw - λw‖ / (λ‖w‖)` is at most
/// `100·rel_tol`. The start vector is positive but not radial, so a radial
/// limit is a property of the operator, not of the seed.
pub fn first_dirichlet_eigenpair(grid: &Grid2D, rel_tol: f64, max_iter: usize) -> Result<Eigenpair> {
    let solver = PolarPoissonSolver::new(grid)?;
    let unk = *solver.unknowns();
    let w = unk.weights();
    let nt = grid.resolution().1;
    let (lo, hi) = match grid.kind() {
        super::GridKind::PolarAnnulus { inner, outer } => (inner, outer),
        super::GridKind::PolarDisk { radius } => (0.0, radius),
        super::GridKind::Rectangular { .. } => unreachable!("checked by PolarUnknowns"),
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&w).map(|((x, y), c)| x * y * c).sum::<f64>();
    let mut v: Vec<f64> = (0..unk.len())
        .map(|q| {
            let r = grid.axis1(q / nt + unk.first_ring);
            let t = grid.axis2(q % nt);
            let bump = (std::f64::consts::PI * (r - lo) / (hi - lo)).sin().max(1e-3);
            bump * (1.0 + 0.3 * t.cos())
        })
        .collect();
    let mut trace = Vec::new();
    let mut last = f64::NAN;
    for _ in 0..max_iter {
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let av: Vec<f64> = unk.apply_laplacian(&v).iter().map(|x| -x).collect();
        let lambda = dot(&v, &av);
        trace.push(lambda);
        let resid: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a - lambda * x).collect();
        let eig_resid = dot(&resid, &resid).sqrt() / lambda.abs();
        if (lambda - last).abs() <= rel_tol * lambda.abs() && eig_resid <= 100.0 * rel_tol {
            if v.iter().sum::<f64>() < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok(Eigenpair {
                value: lambda,
                vector: v,
                trace,
            });
        }
        last = lambda;
        v = solver.solve(&v)?;
    }
    Err(Error::Divergence {
        reason: "inverse power iteration stagnated".into(),
        iterate: v,
        history: trace,
    })
}
