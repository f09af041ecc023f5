//! Convex hull-like property of sampled planar maps: hull containment of
//! interior images, quasi-convex sup comparisons and support points.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hull::{convex_hull_2d, hull_distance, ConvexPolygon, HullKind, Point2};

/// Image point together with the domain point it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaggedImage {
    pub domain: Vec<f64>,
    pub image: Point2,
}

impl TaggedImage {
    pub fn new(domain: Vec<f64>, image: Point2) -> Self {
        Self { domain, image }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub domain: Vec<f64>,
    pub image: Point2,
    pub distance: f64,
    pub witness: Point2,
}

#[derive(Clone, Debug, Serialize)]
pub struct HullReport {
    pub satisfied: bool,
    /// Largest positive hull distance of an interior image, 0 if none.
    pub max_violation: f64,
    /// Violations above tolerance, by decreasing distance.
    pub violations: Vec<Violation>,
    pub tolerance: f64,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    pub hull_vertices: usize,
}

pub fn check_hull_property(interior: &[TaggedImage], boundary: &[Point2], tol: f64) -> Result<HullReport> {
    if boundary.is_empty() {
        return Err(Error::Empty("boundary image set".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let hull = convex_hull_2d(boundary)?;
    let mut max_violation: f64 = 0.0;
    let mut violations = Vec::new();
    for t in interior {
        let d = hull_distance(t.image, &hull)?;
        max_violation = max_violation.max(d.distance);
        if d.distance > tol {
            violations.push(Violation {
                domain: t.domain.clone(),
                image: t.image,
                distance: d.distance,
                witness: d.witness,
            });
        }
    }
    // Stable sort keeps input order among equal distances.
    violations.sort_by(|a, b| b.distance.total_cmp(&a.distance));
    Ok(HullReport {
        satisfied: max_violation <= tol,
        max_violation,
        violations,
        tolerance: tol,
        interior_samples: interior.len(),
        boundary_samples: boundary.len(),
        hull_vertices: hull.vertices().len(),
    })
}

/// A quasi-convex test function `ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuasiConvexTest {
    /// `ψ(y) = φ·y`, φ a unit vector at the given angle.
    Linear { angle: f64 },
    /// `ψ(y) = max(φ₁·y + c₁, φ₂·y + c₂)` with unit φᵢ.
    PairMax { angles: [f64; 2], offsets: [f64; 2] },
}

impl QuasiConvexTest {
    pub fn eval(&self, y: Point2) -> f64 {
        let lin = |a: f64| a.cos() * y.x + a.sin() * y.y;
        match *self {
            QuasiConvexTest::Linear { angle } => lin(angle),
            QuasiConvexTest::PairMax { angles, offsets } => {
                (lin(angles[0]) + offsets[0]).max(lin(angles[1]) + offsets[1])
            }
        }
    }
}

/// Deterministic test family: `family_size` linear functionals on a uniform
/// angle fan plus `family_size` seeded pairwise maxima.
pub fn quasiconvex_family(family_size: usize, seed: u64) -> Vec<QuasiConvexTest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fam: Vec<QuasiConvexTest> = (0..family_size)
        .map(|k| QuasiConvexTest::Linear {
            angle: 2.0 * PI * k as f64 / family_size as f64,
        })
        .collect();
    for _ in 0..family_size {
        fam.push(QuasiConvexTest::PairMax {
            angles: [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)],
            offsets: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        });
    }
    fam
}

#[derive(Clone, Debug, Serialize)]
pub struct SupGap {
    /// Largest `sup_A ψ − sup_B ψ` over the family, floored at 0.
    pub gap: f64,
    /// The test function attaining it, if the gap is positive.
    pub attained_by: Option<QuasiConvexTest>,
    pub family_size: usize,
}

pub fn quasiconvex_sup_check(interior: &[Point2], boundary: &[Point2], family_size: usize, seed: u64) -> Result<SupGap> {
    if family_size == 0 {
        return Err(Error::invalid("family_size must be at least 1"));
    }
    if boundary.is_empty() {
        return Err(Error::Empty("boundary image set".into()));
    }
    let sup = |set: &[Point2], psi: &QuasiConvexTest| set.iter().map(|&y| psi.eval(y)).fold(f64::NEG_INFINITY, f64::max);
    let mut out = SupGap {
        gap: 0.0,
        attained_by: None,
        family_size,
    };
    if interior.is_empty() {
        return Ok(out);
    }
    for psi in quasiconvex_family(family_size, seed) {
        let g = sup(interior, &psi) - sup(boundary, &psi);
        if g > out.gap {
            out.gap = g;
            out.attained_by = Some(psi);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportedPoint {
    pub domain: Vec<f64>,
    pub image: Point2,
    /// Unit φ with `φ·image <= φ·y` for every y in the cloud.
    pub direction: Point2,
}

/// Image points lying on the boundary of the cloud's hull, each with an
/// inward-normal support direction.
pub fn support_probe(images: &[TaggedImage]) -> Result<Vec<SupportedPoint>> {
    if images.len() < 3 {
        return Err(Error::invalid("support probe needs at least 3 points"));
    }
    let pts: Vec<Point2> = images.iter().map(|t| t.image).collect();
    let hull = convex_hull_2d(&pts)?;
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
    let eps = 1e-12 * scale;
    let mut out = Vec::new();
    for t in images {
        let d = hull_distance(t.image, &hull)?;
        if d.distance < -eps {
            continue;
        }
        let direction = support_direction(&hull, t.image, d.witness);
        out.push(SupportedPoint {
            domain: t.domain.clone(),
            image: t.image,
            direction,
        });
    }
    Ok(out)
}

/// Inward normal at a boundary point. At a vertex the two adjacent outward
/// edge normals are averaged so the direction supports the whole hull.
fn support_direction(hull: &ConvexPolygon, p: Point2, witness: Point2) -> Point2 {
    let v = hull.vertices();
    if hull.kind() != HullKind::Polygon {
        return witness.scale(-1.0);
    }
    let n = v.len();
    let normal = |i: usize| {
        let e = v[(i + 1) % n].sub(v[i]);
        let len = e.norm();
        Point2::new(e.y / len, -e.x / len)
    };
    if let Some(i) = v.iter().position(|&q| q == p) {
        let a = normal((i + n - 1) % n);
        let b = normal(i);
        let s = Point2::new(a.x + b.x, a.y + b.y);
        return s.scale(-1.0 / s.norm());
    }
    witness.scale(-1.0)
}

/// Planar circle-arc map `θ ↦ (cos θ, sin θ)` on `(0, π)`: interior samples at
/// `kπ/n`, `k = 1..n−1`, boundary images at θ = 0 and θ = π. The arc leaves
/// the hull of its two boundary images, the chord `[-1, 1] × {0}`.
pub fn arc_counterexample(n: usize) -> (Vec<TaggedImage>, Vec<Point2>) {
    let interior = (1..n)
        .map(|k| {
            let t = PI * k as f64 / n as f64;
            TaggedImage::new(vec![t], Point2::new(t.cos(), t.sin()))
        })
        .collect();
    let boundary = vec![Point2::new(1.0, 0.0), Point2::new(-1.0, 0.0)];
    (interior, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arc_violates_hull_at_top() {
        let (interior, boundary) = arc_counterexample(100);
        let rep = check_hull_property(&interior, &boundary, 1e-12).unwrap();
        assert!(!rep.satisfied);
        assert!((rep.max_violation - 1.0).abs() < 1e-9);
        assert!((rep.violations[0].domain[0] - PI / 2.0).abs() < 1e-12);
        let imgs: Vec<Point2> = interior.iter().map(|t| t.image).collect();
        let gap = quasiconvex_sup_check(&imgs, &boundary, 64, 1).unwrap();
        assert!((gap.gap - 1.0).abs() < 1e-6);
        match gap.attained_by {
            Some(QuasiConvexTest::Linear { angle }) => assert!((angle - PI / 2.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn affine_map_on_square() {
        let f = |x: f64, y: f64| Point2::new(x + y, x - y);
        let n = 21;
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 / 20.0, j as f64 / 20.0);
                if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    boundary.push(f(x, y));
                } else {
                    interior.push(TaggedImage::new(vec![x, y], f(x, y)));
                }
            }
        }
        let rep = check_hull_property(&interior, &boundary, 1e-12).unwrap();
        assert!(rep.satisfied);
    }

    #[test]
    fn subset_and_equal_sets_have_zero_gap() {
        let b = vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(0.0, 2.0)];
        let a = vec![Point2::new(0.5, 0.5), Point2::new(1.0, 1.0)];
        assert_eq!(quasiconvex_sup_check(&a, &b, 32, 9).unwrap().gap, 0.0);
        assert_eq!(quasiconvex_sup_check(&b, &b, 32, 9).unwrap().gap, 0.0);
    }

    #[test]
    fn empty_boundary_rejected() {
        assert!(check_hull_property(&[], &[], 0.0).is_err());
    }

    #[test]
    fn scaled_arc_is_fully_supported() {
        // (g + λf)(x, y) with g = 0, f = (cos x, sin x), λ = 2 on (0, π) × (0, 1).
        let mut imgs = Vec::new();
        for i in 1..60 {
            for j in 1..5 {
                let x = PI * i as f64 / 60.0;
                let y = j as f64 / 5.0;
                imgs.push(TaggedImage::new(vec![x, y], Point2::new(2.0 * x.cos(), 2.0 * x.sin())));
            }
        }
        let sup = support_probe(&imgs).unwrap();
        assert_eq!(sup.len(), imgs.len());
        for s in &sup {
            assert!((s.image.norm() - 2.0).abs() < 1e-9);
            for t in &imgs {
                assert!(s.direction.dot(s.image) <= s.direction.dot(t.image) + 1e-12);
            }
        }
    }

    #[test]
    fn open_disk_only_outer_ring_supported() {
        let mut imgs = Vec::new();
        for i in 1..10 {
            for j in 0..32 {
                let r = i as f64 / 10.0;
                let t = 2.0 * PI * j as f64 / 32.0;
                imgs.push(TaggedImage::new(vec![r, t], Point2::new(r * t.cos(), r * t.sin())));
            }
        }
        let sup = support_probe(&imgs).unwrap();
        assert_eq!(sup.len(), 32);
        assert!(sup.iter().all(|s| (s.domain[0] - 0.9).abs() < 1e-12));
    }

    fn cloud(len: usize) -> impl Strategy<Value = Vec<Point2>> {
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Point2::new(x, y)), 1..len)
    }

    fn tag(pts: &[Point2]) -> Vec<TaggedImage> {
        pts.iter().map(|&p| TaggedImage::new(vec![], p)).collect()
    }

    proptest! {
        #[test]
        fn report_is_consistent_with_sup_gap(a in cloud(30), b in cloud(30)) {
            let rep = check_hull_property(&tag(&a), &b, 1e-9).unwrap();
            let k = 256;
            let gap = quasiconvex_sup_check(&a, &b, k, 3).unwrap().gap;
            // Unit-norm tests never see more than the hull distance.
            prop_assert!(gap <= rep.max_violation + 1e-12);
            // A fan direction within π/k of the witness loses at most |p| + R times the angle.
            let radius = a.iter().chain(&b).map(|p| p.norm()).fold(0.0, f64::max);
            prop_assert!(gap >= rep.max_violation - 2.0 * radius * PI / k as f64 - 1e-12);
            prop_assert_eq!(rep.satisfied, rep.violations.is_empty());
            for v in &rep.violations {
                prop_assert!(v.distance > rep.tolerance);
            }
        }

        #[test]
        fn more_boundary_never_increases_violation(a in cloud(20), b in cloud(20), extra in cloud(10)) {
            let base = check_hull_property(&tag(&a), &b, 0.0).unwrap().max_violation;
            let mut bigger = b.clone();
            bigger.extend(extra);
            let more = check_hull_property(&tag(&a), &bigger, 0.0).unwrap().max_violation;
            prop_assert!(more <= base + 1e-12);
        }

        #[test]
        fn violation_scales_with_images(a in cloud(20), b in cloud(20), c in 0.1..10.0f64) {
            let base = check_hull_property(&tag(&a), &b, 0.0).unwrap().max_violation;
            let sa: Vec<Point2> = a.iter().map(|p| p.scale(c)).collect();
            let sb: Vec<Point2> = b.iter().map(|p| p.scale(c)).collect();
            let scaled = check_hull_property(&tag(&sa), &sb, 0.0).unwrap().max_violation;
            prop_assert!((scaled - c * base).abs() <= 1e-12 * (1.0 + c * base) * 10.0);
        }
    }
}
