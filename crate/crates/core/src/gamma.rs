//! Scalar fixed points `x = λ I'(x)` for concave-at-the-top functions `I <= 0`
//! with `I'` Lipschitz below 1, and the piecewise-quadratic extremal family
//! showing the constant 3 cannot be improved.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::adaptive_simpson;

/// Breakpoint `x₀ > 0` and scaling `μ >= 1` of the extremal function `g`.
/// The family member is `I = g/μ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtremalG {
    pub x0: f64,
    pub mu: f64,
}

impl ExtremalG {
    pub fn new(x0: f64, mu: f64) -> Result<Self> {
        ensure_finite(&[x0, mu], "extremal parameters")?;
        if !(x0 > 0.0 && mu >= 1.0) {
            return Err(Error::invalid("extremal g needs x0 > 0 and mu >= 1"));
        }
        Ok(Self { x0, mu })
    }
}

// Branches in completed-square form; one-sided values at the breakpoints
// then agree to a few ulps instead of cancelling large expanded terms.
fn left_branch(_x0: f64, x: f64) -> (f64, f64) {
    (-0.5 * x * x, -x)
}

fn mid_branch(x0: f64, x: f64) -> (f64, f64) {
    let d = x - 2.0 * x0 / 3.0;
    (0.5 * d * d - x0 * x0 / 9.0, d)
}

fn right_branch(x0: f64, x: f64) -> (f64, f64) {
    let d = 4.0 * x0 / 3.0 - x;
    (-0.5 * d * d, d)
}

/// `(g(x), g'(x))`:
/// `−x²/2` below `x₀/3`, `x²/2 − 2x₀x/3 + x₀²/9` on `[x₀/3, x₀]`,
/// `−x²/2 + 4x₀x/3 − 8x₀²/9` above `x₀`. C¹ with `g'` 1-Lipschitz, `g <= 0`,
/// `g(0) = g(4x₀/3) = 0` and `g'(x₀) = x₀/3`.
pub fn g_eval(p: &ExtremalG, x: f64) -> (f64, f64) {
    let x0 = p.x0;
    if x < x0 / 3.0 {
        left_branch(x0, x)
    } else if x <= x0 {
        mid_branch(x0, x)
    } else {
        right_branch(x0, x)
    }
}

/// `|left − right|` of g and g' at `x₀/3` and at `x₀`.
pub fn breakpoint_jumps(p: &ExtremalG) -> [(f64, f64); 2] {
    let x0 = p.x0;
    let jump = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).abs(), (a.1 - b.1).abs());
    [
        jump(left_branch(x0, x0 / 3.0), mid_branch(x0, x0 / 3.0)),
        jump(mid_branch(x0, x0), right_branch(x0, x0)),
    ]
}

/// `∫₀^{4x₀/3} g'`, which vanishes because `g(4x₀/3) = g(0)`.
pub fn closing_integral(p: &ExtremalG) -> f64 {
    let d = |x: f64| g_eval(p, x).1;
    let x0 = p.x0;
    // Integrate piecewise so the kinks sit on panel ends.
    adaptive_simpson(&d, 0.0, x0 / 3.0, 1e-13) + adaptive_simpson(&d, x0 / 3.0, x0, 1e-13) + adaptive_simpson(&d, x0, 4.0 * x0 / 3.0, 1e-13)
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar `I` with derivative `I'` and claimed Lipschitz constant `L` of `I'`.
#[derive(Clone)]
pub struct AdmissibleScalar {
    pub id: String,
    pub value: RealFn,
    pub derivative: RealFn,
    pub lipschitz: f64,
}

impl fmt::Debug for AdmissibleScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdmissibleScalar")
            .field("id", &self.id)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub samples: usize,
    pub max_value: f64,
    pub lipschitz_quotient: f64,
}

impl AdmissibleScalar {
    pub fn new(
        id: &str,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Self {
        Self {
            id: id.to_string(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            lipschitz,
        }
    }

    pub fn extremal(p: ExtremalG) -> Self {
        Self::new(
            &format!("extremal(x0={},mu={})", p.x0, p.mu),
            move |x| g_eval(&p, x).0 / p.mu,
            move |x| g_eval(&p, x).1 / p.mu,
            1.0 / p.mu,
        )
    }

    /// Sampled class membership on `samples` points of `range`: `L < 1`,
    /// `I(0) = 0 = I'(0)`, `I <= 1e-12`, and consecutive Lipschitz quotients
    /// of `I'` at most `L + 1e-9`.
    pub fn certify(&self, range: (f64, f64), samples: usize) -> Result<Certificate> {
        if !(self.lipschitz < 1.0) {
            return Err(Error::Rejected(format!("{}: Lipschitz constant {} is not below 1", self.id, self.lipschitz)));
        }
        let (i0, d0) = ((self.value)(0.0), (self.derivative)(0.0));
        if i0 != 0.0 || d0 != 0.0 {
            return Err(Error::Rejected(format!("{}: I(0) = {i0}, I'(0) = {d0}", self.id)));
        }
        let xs: Vec<f64> = (0..samples)
            .map(|k| range.0 + (range.1 - range.0) * k as f64 / (samples - 1) as f64)
            .collect();
        let mut max_value = f64::NEG_INFINITY;
        let mut quotient: f64 = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for &x in &xs {
            let (v, d) = ((self.value)(x), (self.derivative)(x));
            ensure_finite(&[v, d], &self.id)?;
            max_value = max_value.max(v);
            if let Some((px, pd)) = prev {
                quotient = quotient.max((d - pd).abs() / (x - px));
            }
            prev = Some((x, d));
        }
        if max_value > 1e-12 {
            return Err(Error::Rejected(format!("{}: I reaches {max_value} > 0", self.id)));
        }
        if quotient > self.lipschitz + 1e-9 {
            return Err(Error::Rejected(format!(
                "{}: sampled Lipschitz quotient {quotient} exceeds {}",
                self.id, self.lipschitz
            )));
        }
        Ok(Certificate {
            samples,
            max_value,
            lipschitz_quotient: quotient,
        })
    }
}

/// Smooth members of the class: scaled wells with `I'` Lipschitz below 1.
pub fn bump_members() -> Vec<AdmissibleScalar> {
    vec![
        AdmissibleScalar::new(
            "gaussian-well(0.9)",
            |x| -0.9 * (1.0 - (-0.5 * x * x).exp()),
            |x| -0.9 * x * (-0.5 * x * x).exp(),
            0.9,
        ),
        AdmissibleScalar::new("log-cosh(0.95)", |x| -0.95 * x.cosh().ln(), |x| -0.95 * x.tanh(), 0.95),
        AdmissibleScalar::new(
            "sqrt(0.8)",
            |x| -0.8 * ((1.0 + x * x).sqrt() - 1.0),
            |x| -0.8 * x / (1.0 + x * x).sqrt(),
            0.8,
        ),
        AdmissibleScalar::new("quadratic(0.99)", |x| -0.495 * x * x, |x| -0.99 * x, 0.99),
        AdmissibleScalar::new("cosine(0.9)", |x| -0.9 * (1.0 - x.cos()), |x| -0.9 * x.sin(), 0.9),
    ]
}

/// The nine extremal members `μ ∈ {1.01, 1.1, 2}`, `x₀ ∈ {1, 3, 10}`.
pub fn extremal_family() -> Vec<ExtremalG> {
    let mut out = Vec::new();
    for mu in [1.01, 1.1, 2.0] {
        for x0 in [1.0, 3.0, 10.0] {
            out.push(ExtremalG { x0, mu });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootKind {
    /// `r` changes sign.
    Crossing,
    /// `r` touches zero without changing sign.
    Tangential,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FixedPoint {
    pub x: f64,
    pub residual: f64,
    pub kind: RootKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointScan {
    pub lambda: f64,
    /// `r(0)`; zero whenever `I'(0) = 0`.
    pub origin_residual: f64,
    pub nonzero: Vec<FixedPoint>,
}

/// Tangential zeros must reach this `|r|`.
pub const TANGENT_TOL: f64 = 1e-10;

/// Zeros of `r(x) = x − λ I'(x)` on `range`: sign changes bisected to the
/// float resolution, plus sampled local minima of `|r|` refined by golden
/// section and kept when `|r| <= 1e-10`.
pub fn fixed_point_scan(member: &AdmissibleScalar, lambda: f64, range: (f64, f64), samples: usize) -> Result<FixedPointScan> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    if samples < 3 || !(range.0 < range.1) {
        return Err(Error::invalid("need at least 3 samples on a non-empty range"));
    }
    let d = member.derivative.clone();
    let r = move |x: f64| x - lambda * d(x);
    let m = (samples - 1) as f64;
    let xs: Vec<f64> = (0..samples)
        .map(|k| (range.0 * (m - k as f64) + range.1 * k as f64) / m)
        .collect();
    let rs: Vec<f64> = xs.iter().map(|&x| r(x)).collect();
    ensure_finite(&rs, "fixed-point residual")?;
    let mut found: Vec<FixedPoint> = Vec::new();
    for k in 0..samples {
        if rs[k] == 0.0 {
            found.push(FixedPoint {
                x: xs[k],
                residual: 0.0,
                kind: if k > 0 && k + 1 < samples && rs[k - 1].signum() == rs[k + 1].signum() {
                    RootKind::Tangential
                } else {
                    RootKind::Crossing
                },
            });
            continue;
        }
        if k + 1 < samples && rs[k + 1] != 0.0 && rs[k].signum() != rs[k + 1].signum() {
            let (x, res) = bisect(&r, xs[k], rs[k], xs[k + 1]);
            found.push(FixedPoint {
                x,
                residual: res,
                kind: RootKind::Crossing,
            });
            continue;
        }
        if k > 0 && k + 1 < samples {
            let (a, b, c) = (rs[k - 1].abs(), rs[k].abs(), rs[k + 1].abs());
            let same_sign = rs[k - 1].signum() == rs[k].signum() && rs[k].signum() == rs[k + 1].signum();
            if same_sign && b <= a && b <= c {
                let x = golden_min(&|x| r(x).abs(), xs[k - 1], xs[k + 1]);
                let res = r(x).abs();
                if res <= TANGENT_TOL {
                    found.push(FixedPoint {
                        x,
                        residual: res,
                        kind: RootKind::Tangential,
                    });
                }
            }
        }
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x));
    found.dedup_by(|a, b| (a.x - b.x).abs() <= 1e-9 * (1.0 + b.x.abs()));
    let origin_residual = r(0.0);
    // Zero is reported separately; a root within resolution of 0 is the origin.
    let nonzero = found.into_iter().filter(|p| p.x.abs() > 1e-9).collect();
    Ok(FixedPointScan {
        lambda,
        origin_residual,
        nonzero,
    })
}

fn bisect(r: &dyn Fn(f64) -> f64, mut lo: f64, rlo: f64, mut hi: f64) -> (f64, f64) {
    let sign = rlo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = r(mid);
        if v == 0.0 {
            return (mid, 0.0);
        }
        if v.signum() == sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (r(lo).abs(), r(hi).abs());
    if a <= b {
        (lo, a)
    } else {
        (hi, b)
    }
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Largest `|f(x) − f(y)|/|x − y|` over `pairs` seeded uniform pairs in `range`.
pub fn lipschitz_estimate(f: &(dyn Fn(f64) -> f64 + Sync), range: (f64, f64), pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<(f64, f64)> = (0..pairs)
        .map(|_| (rng.gen_range(range.0..range.1), rng.gen_range(range.0..range.1)))
        .collect();
    xs.par_iter()
        .filter(|(x, y)| x != y)
        .map(|&(x, y)| (f(x) - f(y)).abs() / (x - y).abs())
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberReport {
    pub id: String,
    pub certificate: Option<Certificate>,
    pub rejected: Option<String>,
    /// `(λ, nonzero fixed points)` for λ in the lower-bound grid.
    pub rows: Vec<(f64, Vec<FixedPoint>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UpperWitness {
    pub x0: f64,
    pub mu: f64,
    pub lambda: f64,
    pub roots: Vec<FixedPoint>,
    /// A nonzero root within 1e-8 of x₀.
    pub hit: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaReport {
    pub members: Vec<MemberReport>,
    pub lower_bound_holds: bool,
    pub upper_witnesses: Vec<UpperWitness>,
    pub upper_bound_holds: bool,
    pub warning: Option<String>,
    pub certificate_samples: usize,
}

/// Lower bound: no certified member has a nonzero fixed point for any λ in
/// `lambdas` (all at most 3). Upper bound: each extremal member `g/μ` has a
/// nonzero fixed point at x₀ when λ = 3μ.
pub fn verify_gamma_three(
    family: &[AdmissibleScalar],
    extremal: &[ExtremalG],
    lambdas: &[f64],
    range: (f64, f64),
    samples: usize,
    certificate_samples: usize,
) -> Result<GammaReport> {
    if lambdas.iter().any(|&l| !(l > 0.0 && l <= 3.0)) {
        return Err(Error::invalid("lower-bound lambdas must lie in (0, 3]"));
    }
    let members: Vec<MemberReport> = family
        .par_iter()
        .map(|m| {
            let cert = m.certify(range, certificate_samples);
            match cert {
                Err(e) => Ok(MemberReport {
                    id: m.id.clone(),
                    certificate: None,
                    rejected: Some(e.to_string()),
                    rows: Vec::new(),
                }),
                Ok(c) => {
                    let rows = lambdas
                        .iter()
                        .map(|&l| Ok((l, fixed_point_scan(m, l, range, samples)?.nonzero)))
                        .collect::<Result<_>>()?;
                    Ok(MemberReport {
                        id: m.id.clone(),
                        certificate: Some(c),
                        rejected: None,
                        rows,
                    })
                }
            }
        })
        .collect::<Result<_>>()?;
    let lower_bound_holds = members
        .iter()
        .filter(|m| m.rejected.is_none())
        .all(|m| m.rows.iter().all(|(_, roots)| roots.is_empty()));
    let upper_witnesses: Vec<UpperWitness> = extremal
        .iter()
        .map(|&p| {
            let lambda = 3.0 * p.mu;
            let roots = fixed_point_scan(&AdmissibleScalar::extremal(p), lambda, range, samples)?.nonzero;
            let hit = roots.iter().any(|r| (r.x - p.x0).abs() <= 1e-8);
            Ok(UpperWitness {
                x0: p.x0,
                mu: p.mu,
                lambda,
                roots,
                hit,
            })
        })
        .collect::<Result<_>>()?;
    let upper_bound_holds = upper_witnesses.iter().all(|w| w.hit);
    let warning = if family.is_empty() {
        Some("empty family: the lower bound holds vacuously".into())
    } else {
        None
    };
    Ok(GammaReport {
        members,
        lower_bound_holds,
        upper_witnesses,
        upper_bound_holds,
        warning,
        certificate_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_values_for_x0_three() {
        let p = ExtremalG::new(3.0, 1.0).unwrap();
        assert_eq!(g_eval(&p, 1.0).0, -0.5);
        assert_eq!(g_eval(&p, 3.0).0, -0.5);
        assert_eq!(g_eval(&p, 4.0).0, 0.0);
        assert_eq!(g_eval(&p, 3.0).1, 1.0);
        assert_eq!(g_eval(&p, 0.0), (0.0, 0.0));
        for x0 in [1.0, 3.0, 10.0] {
            for (dv, dd) in breakpoint_jumps(&ExtremalG::new(x0, 1.0).unwrap()) {
                assert!(dv <= 1e-14 && dd <= 1e-14, "{x0}: {dv} {dd}");
            }
        }
    }

    #[test]
    fn closing_integral_vanishes() {
        for x0 in [1.0, 3.0, 10.0] {
            assert!(closing_integral(&ExtremalG::new(x0, 1.0).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn tangential_root_at_three_mu() {
        let p = ExtremalG::new(3.0, 1.1).unwrap();
        let m = AdmissibleScalar::extremal(p);
        let scan = fixed_point_scan(&m, 3.3, (-100.0, 100.0), 20_001).unwrap();
        assert_eq!(scan.origin_residual, 0.0);
        assert_eq!(scan.nonzero.len(), 1);
        assert!((scan.nonzero[0].x - 3.0).abs() <= 1e-8);
        assert_eq!(scan.nonzero[0].kind, RootKind::Tangential);
        // Off the sample lattice too.
        let scan = fixed_point_scan(&m, 3.3, (-100.0, 100.0), 1_234).unwrap();
        assert!((scan.nonzero[0].x - 3.0).abs() <= 1e-8);
        let below = fixed_point_scan(&m, 2.9, (-100.0, 100.0), 20_001).unwrap();
        assert!(below.nonzero.is_empty());
    }

    #[test]
    fn pure_quadratic_has_only_origin() {
        let m = AdmissibleScalar::new("q", |x| -0.25 * x * x, |x| -0.5 * x, 0.5);
        for l in [0.1, 1.0, 3.0] {
            assert!(fixed_point_scan(&m, l, (-50.0, 50.0), 1001).unwrap().nonzero.is_empty());
        }
    }

    #[test]
    fn certificate_rejects_lipschitz_one() {
        let m = AdmissibleScalar::new("edge", |x| -0.5 * x * x, |x| -x, 1.0);
        assert!(m.certify((-10.0, 10.0), 10_000).is_err());
        let lying = AdmissibleScalar::new("lying", |x| -x * x, |x| -2.0 * x, 0.5);
        assert!(lying.certify((-10.0, 10.0), 10_000).is_err());
        let positive = AdmissibleScalar::new("pos", |x| 0.1 * x * x, |x| 0.2 * x, 0.2);
        assert!(positive.certify((-10.0, 10.0), 10_000).is_err());
        for m in bump_members() {
            m.certify((-100.0, 100.0), 10_000).unwrap();
        }
    }

    #[test]
    fn lipschitz_of_g_prime_is_one() {
        let p = ExtremalG::new(3.0, 1.0).unwrap();
        let est = lipschitz_estimate(&|x| g_eval(&p, x).1, (-10.0, 10.0), 100_000, 7);
        assert!((est - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn empty_family_is_vacuous() {
        let rep = verify_gamma_three(&[], &[], &[1.0], (-10.0, 10.0), 101, 100).unwrap();
        assert!(rep.lower_bound_holds && rep.warning.is_some());
    }

    #[test]
    fn full_family() {
        let mut fam: Vec<AdmissibleScalar> = extremal_family().into_iter().map(AdmissibleScalar::extremal).collect();
        fam.extend(bump_members());
        let rep = verify_gamma_three(&fam, &extremal_family(), &[0.5, 1.0, 2.0, 2.9, 3.0], (-100.0, 100.0), 20_001, 10_000).unwrap();
        assert!(rep.members.iter().all(|m| m.rejected.is_none()));
        assert!(rep.lower_bound_holds);
        assert!(rep.upper_bound_holds);
    }
}
