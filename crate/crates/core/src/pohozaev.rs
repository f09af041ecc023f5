//! Pohozaev identity residuals for sampled solutions of `-Δu = λ f(u)`,
//! radial shooting on annuli with the conserved energy, and shooting scans.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::quadrature::{adaptive_simpson, gauss_legendre, boundary_nodes, integrate, integrate_boundary};
use crate::numerics::{fd_gradient, ScalarField};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nonlinearity `f` with primitive `F(ξ) = ∫₀^ξ f`.
#[derive(Clone)]
pub struct Nonlinearity {
    label: String,
    f: RealFn,
    df: RealFn,
    primitive: RealFn,
    /// `sup F` when known in closed form.
    sup_primitive: Option<f64>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("Nonlinearity").field("label", &self.label).finish()
    }
}

impl Nonlinearity {
    /// `f = −sin`, `F = cos − 1 <= 0`. This is `Δu = λ sin u` in the form `-Δu = λ f(u)`.
    pub fn neg_sine() -> Self {
        Self::closed("-sin(u)", |u: f64| -u.sin(), |u: f64| -u.cos(), |u: f64| u.cos() - 1.0, Some(0.0))
    }

    pub fn linear() -> Self {
        Self::closed("u", |u| u, |_| 1.0, |u| 0.5 * u * u, Some(f64::INFINITY))
    }

    /// `f = u^p` for a positive integer `p`.
    pub fn power(p: i32) -> Self {
        Self::closed(
            &format!("u^{p}"),
            move |u: f64| u.powi(p),
            move |u: f64| p as f64 * u.powi(p - 1),
            move |u: f64| u.powi(p + 1) / (p + 1) as f64,
            Some(f64::INFINITY),
        )
    }

    /// `f = u − u³`, `F = u²/2 − u⁴/4` with `sup F = 1/4`.
    pub fn logistic() -> Self {
        Self::closed("u-u^3", |u| u - u * u * u, |u| 1.0 - 3.0 * u * u, |u| 0.5 * u * u - 0.25 * u.powi(4), Some(0.25))
    }

    fn closed(
        label: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        primitive: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_primitive: Option<f64>,
    ) -> Self {
        Self {
            label: label.to_string(),
            f: Arc::new(f),
            df: Arc::new(df),
            primitive: Arc::new(primitive),
            sup_primitive,
        }
    }

    /// Caller-defined `f`; `F` by adaptive Simpson from 0 to tolerance 1e-10
    /// and `f'` by central differences.
    pub fn from_fn(label: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let f: RealFn = Arc::new(f);
        let g = f.clone();
        let d = f.clone();
        Self {
            label: label.to_string(),
            f,
            df: Arc::new(move |x| {
                let h = 1e-6 * (1.0 + x.abs());
                (d(x + h) - d(x - h)) / (2.0 * h)
            }),
            primitive: Arc::new(move |x| adaptive_simpson(&*g, 0.0, x, 1e-10)),
            sup_primitive: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        (self.df)(u)
    }

    #[inline]
    pub fn primitive(&self, u: f64) -> f64 {
        (self.primitive)(u)
    }

    /// `sup F`, in closed form when registered, else sampled on [−50, 50].
    pub fn sup_primitive(&self) -> f64 {
        self.sup_primitive.unwrap_or_else(|| {
            (0..=10_000)
                .map(|k| self.primitive(-50.0 + 0.01 * k as f64))
                .fold(f64::NEG_INFINITY, f64::max)
        })
    }

    /// Checks `F(0) = 0` and `F' = f` at 100 points of `[lo, hi]`: the
    /// increment of F over `[x − d, x + d]` must match a Gauss–Legendre
    /// integral of f to `2d · 1e-8 · (1 + |f(x)|)`.
    pub fn check_primitive(&self, lo: f64, hi: f64) -> Result<()> {
        if self.primitive(0.0).abs() > 1e-14 {
            return Err(Error::Rejected(format!("{}: F(0) != 0", self.label)));
        }
        let d = 0.05;
        let (nodes, weights) = gauss_legendre(12);
        for k in 0..100 {
            let x = lo + (hi - lo) * (k as f64 + 0.5) / 100.0;
            let increment = self.primitive(x + d) - self.primitive(x - d);
            let exact: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * d * self.f(x + d * t)).sum();
            let fx = self.f(x);
            if (increment - exact).abs() > 2.0 * d * 1e-8 * (1.0 + fx.abs()) {
                return Err(Error::Rejected(format!("{}: F' != f near {x}", self.label)));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Pohozaev identity
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PohozaevReport {
    /// `((2−n)/2)∫|∇u|² + nλ∫F(u)`.
    pub lhs: f64,
    /// `½∮|∇u|² x·ν ds`.
    pub rhs: f64,
    /// `|lhs − rhs| / (|lhs| + |rhs| + ε)`.
    pub residual: f64,
    pub boundary_max: f64,
    /// Boundary trace exceeds the tolerance.
    pub boundary_warning: bool,
    pub star_shaped: bool,
    /// `sup F <= 0` on a star-shaped domain: the identity leaves no room for a
    /// nonzero solution.
    pub case_b_obstruction: bool,
}

const POHOZAEV_EPS: f64 = 1e-300;

/// Pohozaev sides of a sampled `u` for `-Δu = λ f(u)` on a planar domain.
/// `boundary_tol` bounds `max |u|` on the boundary relative to `max |u|`.
pub fn pohozaev_residual(u: &ScalarField, lambda: f64, nl: &Nonlinearity, n: usize, boundary_tol: f64) -> Result<PohozaevReport> {
    if n != 2 {
        return Err(Error::invalid("sampled fields are planar, so n must be 2"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let grid = u.grid();
    let grad = fd_gradient(u)?;
    let g2 = grad.norm_squared();
    let fu = u.map(|v| nl.primitive(v))?;
    let nf = n as f64;
    let lhs = (2.0 - nf) / 2.0 * integrate(&g2, None)? + nf * lambda * integrate(&fu, None)?;
    let rhs = 0.5 * integrate_boundary(&g2, true, None)?;
    let residual = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + POHOZAEV_EPS)
    };
    let boundary_max = boundary_nodes(grid)
        .iter()
        .map(|b| u.values()[b.index].abs())
        .fold(0.0, f64::max);
    let star_shaped = grid.is_star_shaped_about_origin();
    Ok(PohozaevReport {
        lhs,
        rhs,
        residual,
        boundary_max,
        boundary_warning: boundary_max > boundary_tol * u.max_abs().max(f64::MIN_POSITIVE),
        star_shaped,
        case_b_obstruction: star_shaped && nl.sup_primitive() <= 0.0,
    })
}

// ---------------------------------------------------------------------------
// Radial shooting
// ---------------------------------------------------------------------------

/// `u'' + (n−1)/r u' + λ f(u) = 0` on `a < r < b` with `u(a) = 0`.
#[derive(Clone, Debug)]
pub struct RadialProblem {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub nl: Nonlinearity,
    pub steps: usize,
}

pub const BLOW_UP: f64 = 1e8;

#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub s: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `I(r) = ½u'² + (n−1)∫_{r₁}^r u'²/t dt + λF(u)`.
    pub energy: Vec<f64>,
    /// First interior zero of u', or a.
    pub r1: f64,
    pub drift: f64,
    /// |u| exceeded the blow-up threshold; the profile stops there.
    pub blown_up: bool,
}

impl RadialProfile {
    /// `u(b)`, or `None` if the integration blew up.
    pub fn end_value(&self) -> Option<f64> {
        if self.blown_up {
            None
        } else {
            self.u.last().copied()
        }
    }

    /// CSV with header `r,u,du,energy`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,u,du,energy")?;
        for i in 0..self.r.len() {
            writeln!(w, "{},{},{},{}", self.r[i], self.u[i], self.du[i], self.energy[i])?;
        }
        Ok(())
    }
}

/// State (u, u', q) with `q = ∫_a^r u'²/t dt`.
type State = [f64; 3];

impl RadialProblem {
    pub fn new(n: usize, a: f64, b: f64, lambda: f64, nl: Nonlinearity, steps: usize) -> Result<Self> {
        ensure_finite(&[a, b, lambda], "radial problem")?;
        if n < 2 {
            return Err(Error::invalid("dimension must be at least 2"));
        }
        if !(a > 0.0 && b > a) {
            return Err(Error::invalid("radial problem needs 0 < a < b"));
        }
        if steps < 100 {
            return Err(Error::invalid("at least 100 steps"));
        }
        Ok(Self {
            n,
            a,
            b,
            lambda,
            nl,
            steps,
        })
    }

    #[inline]
    fn rhs(&self, r: f64, y: &State) -> State {
        let k = (self.n - 1) as f64;
        [y[1], -k / r * y[1] - self.lambda * self.nl.f(y[0]), y[1] * y[1] / r]
    }

    #[inline]
    fn rk4(&self, r: f64, y: &State, h: f64) -> State {
        let add = |y: &State, k: &State, c: f64| [y[0] + c * k[0], y[1] + c * k[1], y[2] + c * k[2]];
        let k1 = self.rhs(r, y);
        let k2 = self.rhs(r + 0.5 * h, &add(y, &k1, 0.5 * h));
        let k3 = self.rhs(r + 0.5 * h, &add(y, &k2, 0.5 * h));
        let k4 = self.rhs(r + h, &add(y, &k3, h));
        let mut out = *y;
        for i in 0..3 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// `u(b; s)` without storing the trajectory. `None` on blow-up.
    pub fn end_value(&self, s: f64) -> Option<f64> {
        let h = (self.b - self.a) / self.steps as f64;
        let mut y = [0.0, s, 0.0];
        for i in 0..self.steps {
            y = self.rk4(self.a + i as f64 * h, &y, h);
            if !(y[0].abs() <= BLOW_UP) || !y[1].is_finite() {
                return None;
            }
        }
        Some(y[0])
    }

    /// Classical RK4 from `u(a) = 0, u'(a) = s` with the energy trace.
    pub fn shoot(&self, s: f64) -> Result<RadialProfile> {
        ensure_finite(&[s], "initial slope")?;
        let h = (self.b - self.a) / self.steps as f64;
        let mut r = vec![self.a];
        let mut ys = vec![[0.0, s, 0.0]];
        let mut blown_up = false;
        for i in 0..self.steps {
            let y = self.rk4(self.a + i as f64 * h, ys.last().expect("non-empty"), h);
            if !(y[0].abs() <= BLOW_UP) || !y[1].is_finite() {
                blown_up = true;
                break;
            }
            ys.push(y);
            r.push(if i + 1 == self.steps { self.b } else { self.a + (i + 1) as f64 * h });
        }

        // r₁ and q(r₁): bisect the sub-step that brackets the first zero of u'.
        let mut r1 = self.a;
        let mut q1 = 0.0;
        let mut y1 = ys[0];
        for i in 1..ys.len().saturating_sub(1) {
            if ys[i][1] == 0.0 {
                r1 = r[i];
                q1 = ys[i][2];
                y1 = ys[i];
                break;
            }
            if ys[i - 1][1].signum() != ys[i][1].signum() {
                let (mut lo, mut hi) = (0.0, r[i] - r[i - 1]);
                let base = ys[i - 1];
                let sign0 = base[1].signum();
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.rk4(r[i - 1], &base, mid)[1].signum() == sign0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let yy = self.rk4(r[i - 1], &base, lo);
                r1 = r[i - 1] + lo;
                q1 = yy[2];
                y1 = yy;
                break;
            }
        }
        let k = (self.n - 1) as f64;
        let energy_at = |y: &State| 0.5 * y[1] * y[1] + k * (y[2] - q1) + self.lambda * self.nl.primitive(y[0]);
        let e1 = energy_at(&y1);
        let energy: Vec<f64> = ys.iter().map(energy_at).collect();
        let drift = energy.iter().map(|e| (e - e1).abs()).fold(0.0, f64::max);
        Ok(RadialProfile {
            n: self.n,
            a: self.a,
            b: self.b,
            lambda: self.lambda,
            s,
            u: ys.iter().map(|y| y[0]).collect(),
            du: ys.iter().map(|y| y[1]).collect(),
            r,
            energy,
            r1,
            drift,
            blown_up,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShootingRoot {
    pub s: f64,
    /// `|u(b; s)|`.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub lambda: f64,
    pub s_range: (f64, f64),
    pub samples: usize,
    pub roots: Vec<ShootingRoot>,
    pub blown_up_samples: usize,
}

impl ScanResult {
    pub fn nonzero_roots(&self) -> impl Iterator<Item = &ShootingRoot> {
        self.roots.iter().filter(|r| r.s != 0.0)
    }
}

/// Samples `s_k = (s_min (N−1−k) + s_max k)/(N−1)`, so a symmetric range
/// with odd N hits 0 exactly.
pub fn scan_samples(s_range: (f64, f64), count: usize) -> Vec<f64> {
    let m = (count - 1) as f64;
    (0..count)
        .map(|k| (s_range.0 * (m - k as f64) + s_range.1 * k as f64) / m)
        .collect()
}

/// Roots of `S(s) = u(b; s)`: exact zeros among the samples, plus every sign
/// change between finite neighbours bisected down to the float resolution.
pub fn shooting_scan(problem: &RadialProblem, s_range: (f64, f64), s_count: usize) -> Result<ScanResult> {
    if s_count < 3 {
        return Err(Error::invalid("at least 3 samples"));
    }
    ensure_finite(&[s_range.0, s_range.1], "slope range")?;
    if s_range.0 >= s_range.1 {
        return Err(Error::invalid("empty slope range"));
    }
    let ss = scan_samples(s_range, s_count);
    let vals: Vec<Option<f64>> = ss.par_iter().map(|&s| problem.end_value(s)).collect();
    let blown = vals.iter().filter(|v| v.is_none()).count();
    if blown == vals.len() {
        return Err(Error::Rejected("every shooting sample blew up".into()));
    }
    let mut brackets = Vec::new();
    let mut roots = Vec::new();
    for k in 0..ss.len() {
        if vals[k] == Some(0.0) {
            roots.push(ShootingRoot { s: ss[k], residual: 0.0 });
        }
        if k + 1 < ss.len() {
            if let (Some(x), Some(y)) = (vals[k], vals[k + 1]) {
                if x != 0.0 && y != 0.0 && x.signum() != y.signum() {
                    brackets.push((ss[k], x, ss[k + 1]));
                }
            }
        }
    }
    let refined: Vec<Option<ShootingRoot>> = brackets
        .par_iter()
        .map(|&(lo, flo, hi)| bisect(problem, lo, flo, hi))
        .collect();
    roots.extend(refined.into_iter().flatten());
    roots.sort_by(|a, b| a.s.total_cmp(&b.s));
    Ok(ScanResult {
        lambda: problem.lambda,
        s_range,
        samples: s_count,
        roots,
        blown_up_samples: blown,
    })
}

fn bisect(problem: &RadialProblem, mut lo: f64, flo: f64, mut hi: f64) -> Option<ShootingRoot> {
    let sign = flo.signum();
    let mut best = (lo, flo.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = problem.end_value(mid)?;
        if v.abs() < best.1 {
            best = (mid, v.abs());
        }
        if v == 0.0 {
            break;
        }
        if v.signum() == sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(ShootingRoot { s: best.0, residual: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Grid2D;

    #[test]
    fn primitives_check_out() {
        for nl in [
            Nonlinearity::neg_sine(),
            Nonlinearity::linear(),
            Nonlinearity::power(5),
            Nonlinearity::logistic(),
            Nonlinearity::from_fn("tanh", |u: f64| u.tanh()),
        ] {
            nl.check_primitive(-3.0, 3.0).unwrap();
        }
        let bad = Nonlinearity::closed("bad", |u| u, |_| 1.0, |u| u * u, None);
        assert!(bad.check_primitive(-1.0, 1.0).is_err());
        assert_eq!(Nonlinearity::neg_sine().sup_primitive(), 0.0);
        let sampled = Nonlinearity::from_fn("-sin", |u: f64| -u.sin()).sup_primitive();
        assert!(sampled.abs() < 1e-9, "{sampled}");
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let g = Grid2D::polar_disk(1.0, 17, 16).unwrap();
        let u = ScalarField::zeros(g);
        let rep = pohozaev_residual(&u, 1.0, &Nonlinearity::neg_sine(), 2, 1e-6).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.residual), (0.0, 0.0, 0.0));
        assert!(rep.case_b_obstruction);
    }

    #[test]
    fn zero_slope_stays_zero() {
        let p = RadialProblem::new(2, 1.0, 2.0, 3.0, Nonlinearity::neg_sine(), 200).unwrap();
        let prof = p.shoot(0.0).unwrap();
        assert!(prof.u.iter().all(|&v| v == 0.0));
        assert!(prof.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn energy_drift_is_fourth_order() {
        let drift = |steps| {
            RadialProblem::new(2, 1.0, 2.0, 50.0, Nonlinearity::neg_sine(), steps)
                .unwrap()
                .shoot(5.0)
                .unwrap()
                .drift
        };
        let (d1, d2) = (drift(400), drift(800));
        assert!((d1 / d2).log2() >= 3.5, "{d1} {d2}");
        assert!(drift(100_000) <= 1e-8);
    }

    #[test]
    fn linear_problem_hits_annulus_eigenvalue() {
        // λ₁ for 1 < r < 2 is about 9.75: the ground state with s = 1 ends near 0.
        let p = RadialProblem::new(2, 1.0, 2.0, 9.75, Nonlinearity::linear(), 2000).unwrap();
        let end = p.end_value(1.0).unwrap();
        assert!(end.abs() < 5e-3, "{end}");
        let below = RadialProblem::new(2, 1.0, 2.0, 9.0, Nonlinearity::linear(), 2000).unwrap();
        let above = RadialProblem::new(2, 1.0, 2.0, 10.5, Nonlinearity::linear(), 2000).unwrap();
        assert!(below.end_value(1.0).unwrap() > 0.0 && above.end_value(1.0).unwrap() < 0.0);
    }

    #[test]
    fn odd_nonlinearity_gives_odd_end_map() {
        let p = RadialProblem::new(2, 1.0, 2.0, 10.0, Nonlinearity::neg_sine(), 500).unwrap();
        for s in [0.3, 2.0, 7.5, 19.0] {
            let (a, b) = (p.end_value(s).unwrap(), p.end_value(-s).unwrap());
            assert!((a + b).abs() <= 1e-10);
        }
    }

    #[test]
    fn blow_up_is_flagged() {
        let p = RadialProblem::new(2, 1.0, 2.0, 1.0, Nonlinearity::from_fn("-u^3", |u: f64| -u * u * u), 1000).unwrap();
        let prof = p.shoot(50.0).unwrap();
        assert!(prof.blown_up);
        assert!(prof.end_value().is_none());
        assert!(prof.u.iter().all(|v| v.abs() <= BLOW_UP));
    }

    #[test]
    fn samples_hit_zero() {
        let s = scan_samples((-20.0, 20.0), 401);
        assert_eq!(s[200], 0.0);
        assert_eq!((s[0], s[400]), (-20.0, 20.0));
    }
}
