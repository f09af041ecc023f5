//! Triplet assembly, CSR storage and a banded LU with partial pivoting.
//!
//! Grid operators in this crate are banded once nodes are numbered along the
//! fastest axis, so a band solver is all the direct linear algebra needed at
//! desk scale.

use crate::error::{ensure_finite, Error, Result};

/// Square sparse system assembled from `(row, col, value)` triplets.
/// Duplicate triplets are summed during assembly.
#[derive(Clone, Debug, Default)]
pub struct SparseSystem {
    dim: usize,
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            triplets: Vec::new(),
            rhs: vec![0.0; dim],
        }
    }

    pub fn with_capacity(dim: usize, nnz: usize) -> Self {
        Self {
            dim,
            triplets: Vec::with_capacity(nnz),
            rhs: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.triplets.push((row, col, value));
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn rhs_mut(&mut self) -> &mut [f64] {
        &mut self.rhs
    }

    pub fn set_rhs(&mut self, rhs: Vec<f64>) -> Result<()> {
        if rhs.len() != self.dim {
            return Err(Error::invalid("right-hand side length mismatch"));
        }
        self.rhs = rhs;
        Ok(())
    }

    /// Multiplies every matrix entry and the right-hand side by `c`.
    pub fn scale(&mut self, c: f64) {
        for t in &mut self.triplets {
            t.2 *= c;
        }
        for b in &mut self.rhs {
            *b *= c;
        }
    }

    pub fn assemble(&self) -> Result<CsrMatrix> {
        CsrMatrix::from_triplets(self.dim, &self.triplets)
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let lu = BandLu::factor(&self.assemble()?)?;
        lu.solve(&self.rhs)
    }
}

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, v) in &sorted {
            if r >= n || c >= n {
                return Err(Error::invalid(format!("triplet ({r}, {c}) out of range for dim {n}")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("matrix entry ({r}, {c})"),
                });
            }
        }
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.n {
            for (c, _) in self.row(r) {
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factors of a banded matrix, stored column-major in the LAPACK `gbtrf`
/// layout: entry (i, j) lives at row `kl + ku + i - j` of column `j`.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
            pivots: vec![0; n],
        };
        for r in 0..n {
            for (c, v) in a.row(r) {
                let at = lu.at(r, c);
                lu.ab[at] = v;
            }
        }

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = lu.ab[lu.at(j, j)].abs();
            for t in 1..=km {
                let v = lu.ab[lu.at(j + t, j)].abs();
                if v > best {
                    best = v;
                    p = t;
                }
            }
            lu.pivots[j] = j + p;
            if best == 0.0 {
                return Err(Error::Singular { pivot: j });
            }
            let last_col = (j + kv).min(n - 1);
            if p != 0 {
                for c in j..=last_col {
                    let a1 = lu.at(j, c);
                    let a2 = lu.at(j + p, c);
                    lu.ab.swap(a1, a2);
                }
            }
            let pivot = lu.ab[lu.at(j, j)];
            let col_start = lu.at(j, j);
            for t in 1..=km {
                lu.ab[col_start + t] /= pivot;
            }
            for c in j + 1..=last_col {
                let ujc = lu.ab[lu.at(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                let target = lu.at(j, c);
                for t in 1..=km {
                    let m = lu.ab[col_start + t];
                    lu.ab[target + t] -= m * ujc;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::invalid("right-hand side length mismatch"));
        }
        ensure_finite(b, "right-hand side")?;
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.pivots[j]);
            let km = self.kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                let base = self.at(j, j);
                for t in 1..=km {
                    x[j + t] -= self.ab[base + t] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[self.at(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    x[i] -= self.ab[self.at(i, j)] * xj;
                }
            }
        }
        ensure_finite(&x, "band LU solution")?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(n: usize, trips: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for &(r, c, v) in trips {
            y[r] += v * x[c];
        }
        y
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(CsrMatrix::from_triplets(2, &[(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn banded_solve_needs_pivoting() {
        // Zero on the diagonal forces a row swap.
        let mut s = SparseSystem::new(3);
        for &(r, c, v) in &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0), (1, 2, 2.0), (2, 1, 3.0), (2, 2, 1.0)] {
            s.add(r, c, v);
        }
        s.set_rhs(vec![1.0, 2.0, 3.0]).unwrap();
        let x = s.solve().unwrap();
        let m = s.assemble().unwrap();
        let back = m.mul_vec(&x);
        for (a, b) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn random_banded_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n: usize = rng.gen_range(5..60);
            let kl: usize = rng.gen_range(0..4);
            let ku = rng.gen_range(0..4);
            let mut trips = Vec::new();
            for r in 0..n {
                for c in r.saturating_sub(kl)..(r + ku + 1).min(n) {
                    trips.push((r, c, rng.gen_range(-1.0..1.0)));
                }
            }
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = dense_mul(n, &trips, &x_true);
            let m = CsrMatrix::from_triplets(n, &trips).unwrap();
            let x = BandLu::factor(&m).unwrap().solve(&b).unwrap();
            let resid = dense_mul(n, &trips, &x);
            let err = resid.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "residual {err}");
        }
    }

    #[test]
    fn singular_detected() {
        let mut s = SparseSystem::new(2);
        s.add(0, 0, 1.0);
        s.add(1, 0, 1.0);
        assert!(matches!(s.solve(), Err(Error::Singular { .. })));
    }
}
