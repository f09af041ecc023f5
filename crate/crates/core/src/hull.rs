//! Planar convex hulls with a robust orientation predicate, and signed
//! point-to-hull distance with a separating direction.

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, c: f64) -> Point2 {
        Point2::new(c * self.x, c * self.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

// ---------------------------------------------------------------------------
// Orientation predicate
// ---------------------------------------------------------------------------

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

#[inline]
fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Adds `b` to a nonoverlapping expansion (increasing magnitude), dropping zeros.
fn grow_expansion(e: &mut Vec<f64>, b: f64) {
    let mut q = b;
    let mut out = Vec::with_capacity(e.len() + 1);
    for &c in e.iter() {
        let (s, err) = two_sum(q, c);
        if err != 0.0 {
            out.push(err);
        }
        q = s;
    }
    if q != 0.0 {
        out.push(q);
    }
    *e = out;
}

/// Twice the signed area of triangle (a, b, c): positive when counter-clockwise.
/// The sign is exact for all finite inputs; the magnitude is the float estimate.
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> f64 {
    let left = (a.x - c.x) * (b.y - c.y);
    let right = (a.y - c.y) * (b.x - c.x);
    let det = left - right;
    let bound = 3.330_669_073_875_472e-16 * (left.abs() + right.abs());
    if det > bound || -det > bound {
        return det;
    }
    // Exact: ax·by − ax·cy − cx·by − ay·bx + ay·cx + cy·bx as an expansion.
    let terms = [
        two_product(a.x, b.y),
        two_product(-a.x, c.y),
        two_product(-c.x, b.y),
        two_product(-a.y, b.x),
        two_product(a.y, c.x),
        two_product(c.y, b.x),
    ];
    let mut e = Vec::with_capacity(12);
    for (hi, lo) in terms {
        grow_expansion(&mut e, lo);
        grow_expansion(&mut e, hi);
    }
    match e.last() {
        Some(&top) if top != 0.0 => {
            if det != 0.0 && det.signum() == top.signum() {
                det
            } else {
                top
            }
        }
        _ => 0.0,
    }
}

// ---------------------------------------------------------------------------
// Hulls
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HullKind {
    Point,
    Segment,
    Polygon,
}

/// Extreme points of a planar convex hull, counter-clockwise with strictly
/// convex turns. Segments hold their two endpoints, points a single vertex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn kind(&self) -> HullKind {
        match self.vertices.len() {
            1 => HullKind::Point,
            2 => HullKind::Segment,
            _ => HullKind::Polygon,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.kind() != HullKind::Polygon
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        if v.len() < 3 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..v.len() {
            let (p, q) = (v[i], v[(i + 1) % v.len()]);
            s += p.x * q.y - p.y * q.x;
        }
        0.5 * s
    }

    /// Largest `φ·y` over the hull.
    pub fn support(&self, phi: Point2) -> f64 {
        self.vertices
            .iter()
            .map(|v| phi.dot(*v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        let count = match n {
            1 => 0,
            2 => 1,
            _ => n,
        };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

/// Andrew's monotone chain. Collinear and repeated points collapse to the
/// segment or point they span.
pub fn convex_hull_2d(points: &[Point2]) -> Result<ConvexPolygon> {
    if points.is_empty() {
        return Err(Error::Empty("convex hull of no points".into()));
    }
    for p in points {
        ensure_finite(&[p.x, p.y], "hull input point")?;
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(ConvexPolygon { vertices: pts });
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && orient2d(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && orient2d(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.truncate(1);
    }
    Ok(ConvexPolygon { vertices: hull })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HullDistance {
    /// Euclidean distance outside the hull, minus the distance to the boundary inside.
    pub distance: f64,
    /// Unit vector. Outside: `(p - q)/|p - q|` for the nearest hull point q,
    /// so `φ·p - max_hull φ·y` equals the distance. Inside: outward normal of
    /// the nearest edge.
    pub witness: Point2,
}

fn closest_on_segment(p: Point2, a: Point2, b: Point2) -> Point2 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    Point2::new(a.x + t * ab.x, a.y + t * ab.y)
}

fn contains(hull: &ConvexPolygon, p: Point2) -> bool {
    hull.kind() == HullKind::Polygon && hull.edges().all(|(a, b)| orient2d(a, b, p) >= 0.0)
}

pub fn hull_distance(p: Point2, hull: &ConvexPolygon) -> Result<HullDistance> {
    ensure_finite(&[p.x, p.y], "query point")?;
    if hull.vertices.is_empty() {
        return Err(Error::invalid("empty hull"));
    }
    if contains(hull, p) {
        let mut best = f64::INFINITY;
        let mut normal = Point2::new(1.0, 0.0);
        for (a, b) in hull.edges() {
            let e = b.sub(a);
            let len = e.norm();
            let out = Point2::new(e.y / len, -e.x / len);
            let d = out.dot(a.sub(p));
            if d < best {
                best = d;
                normal = out;
            }
        }
        return Ok(HullDistance {
            distance: -best.max(0.0),
            witness: normal,
        });
    }
    let mut nearest = hull.vertices[0];
    let mut best = p.sub(nearest).norm();
    for (a, b) in hull.edges() {
        let q = closest_on_segment(p, a, b);
        let d = p.sub(q).norm();
        if d < best {
            best = d;
            nearest = q;
        }
    }
    let witness = if best > 0.0 {
        p.sub(nearest).scale(1.0 / best)
    } else {
        // On a degenerate hull: any normal of the segment, or e1 for a point.
        match hull.kind() {
            HullKind::Segment => {
                let e = hull.vertices[1].sub(hull.vertices[0]);
                let len = e.norm();
                Point2::new(-e.y / len, e.x / len)
            }
            _ => Point2::new(1.0, 0.0),
        }
    };
    Ok(HullDistance { distance: best, witness })
}
