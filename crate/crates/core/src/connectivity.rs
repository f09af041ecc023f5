//! Grid-sampled connectivity of `Γ = {(x, y) : ⟨A(x), y⟩ = α(x)}` against
//! connectivity of `X ∖ A⁻¹(0)`, for an interval `X` and `A: X → Rᵐ`.
//!
//! A node enters the sample when the residual `g = ⟨A(x), y⟩ − α(x)` is
//! within the relative band, or changes strict sign towards an axis
//! neighbour. The second rule keeps a continuous level curve a chain of
//! nodes at any band thickness.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

type VecFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct OperatorSpec {
    pub label: String,
    pub x_range: (f64, f64),
    a: VecFn,
    alpha: Option<ScalarFn>,
    m: usize,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("label", &self.label)
            .field("x_range", &self.x_range)
            .field("m", &self.m)
            .finish()
    }
}

impl OperatorSpec {
    pub fn new(label: &str, x_range: (f64, f64), a: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Result<Self> {
        if !(x_range.0 < x_range.1) || !x_range.0.is_finite() || !x_range.1.is_finite() {
            return Err(Error::invalid("x range must be a finite non-empty interval"));
        }
        let m = a(x_range.0).len();
        if m == 0 {
            return Err(Error::invalid("A must take values in a space of positive dimension"));
        }
        Ok(Self {
            label: label.to_string(),
            x_range,
            a: Arc::new(a),
            alpha: None,
            m,
        })
    }

    /// Scalar operator `A: X → R`.
    pub fn scalar(label: &str, x_range: (f64, f64), a: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::new(label, x_range, move |x| vec![a(x)])
    }

    pub fn with_level(mut self, alpha: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.alpha = Some(Arc::new(alpha));
        self
    }

    pub fn codim(&self) -> usize {
        self.m
    }

    pub fn has_unit_level(&self) -> bool {
        self.alpha.is_none()
    }

    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let v = (self.a)(x);
        if v.len() != self.m {
            return Err(Error::invalid(format!("A changes dimension at x = {x}")));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("A({x}) for {}", self.label),
            });
        }
        Ok(v)
    }

    fn level(&self, x: f64) -> f64 {
        self.alpha.as_ref().map_or(1.0, |f| f(x))
    }

    fn x_nodes(&self, resolution: usize) -> Vec<f64> {
        axis(self.x_range.0, self.x_range.1, resolution)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n).map(|i| (lo * (m - i as f64) + hi * i as f64) / m).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledSet {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub radius: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub warning: Option<String>,
}

impl SampledSet {
    pub fn new(points: Vec<Vec<f64>>, radius: f64, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("adjacency radius must be positive"));
        }
        let dim = lo.len();
        if hi.len() != dim {
            return Err(Error::invalid("box corners differ in dimension"));
        }
        for p in &points {
            if p.len() != dim || p.iter().zip(lo.iter().zip(&hi)).any(|(c, (l, h))| c < l || c > h) {
                return Err(Error::invalid("sample point outside the box"));
            }
        }
        Ok(Self {
            dim,
            points,
            radius,
            lo,
            hi,
            warning: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sample `Γ` (or `Λ` for a non-unit level) on a `resolution`-per-axis grid
/// over `X × y_box`, with band `|g| <= ε(1 + |A(x)||y|)`. Adjacency radius is
/// 1.5 grid diagonals.
pub fn level_set_sample(spec: &OperatorSpec, y_box: &[(f64, f64)], resolution: usize, eps: f64) -> Result<SampledSet> {
    if !(eps > 0.0) {
        return Err(Error::invalid("band thickness must be positive"));
    }
    if resolution < 16 {
        return Err(Error::invalid("resolution must be at least 16 per axis"));
    }
    if y_box.len() != spec.m || y_box.iter().any(|(l, h)| !(l < h)) {
        return Err(Error::invalid("y box must give one non-empty interval per component of A"));
    }
    let dim = 1 + spec.m;
    let xs = spec.x_nodes(resolution);
    let ys: Vec<Vec<f64>> = y_box.iter().map(|&(l, h)| axis(l, h, resolution)).collect();
    let a_vals: Vec<Vec<f64>> = xs.iter().map(|&x| spec.eval(x)).collect::<Result<_>>()?;
    let levels: Vec<f64> = xs.iter().map(|&x| spec.level(x)).collect();
    let total = resolution.pow(dim as u32);
    let coords = |mut idx: usize| -> Vec<usize> {
        let mut c = vec![0; dim];
        for slot in c.iter_mut().rev() {
            *slot = idx % resolution;
            idx /= resolution;
        }
        c
    };
    let residual = |c: &[usize]| -> (f64, f64) {
        let a = &a_vals[c[0]];
        let mut dot = 0.0;
        let mut y2 = 0.0;
        for k in 0..spec.m {
            let y = ys[k][c[k + 1]];
            dot += a[k] * y;
            y2 += y * y;
        }
        let a_norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        (dot - levels[c[0]], 1.0 + a_norm * y2.sqrt())
    };
    let g: Vec<(f64, f64)> = (0..total).into_par_iter().map(|i| residual(&coords(i))).collect();
    let stride = |axis: usize| resolution.pow((dim - 1 - axis) as u32);
    let keep: Vec<bool> = (0..total)
        .into_par_iter()
        .map(|i| {
            let (gi, scale) = g[i];
            if gi.abs() <= eps * scale {
                return true;
            }
            let c = coords(i);
            (0..dim).any(|ax| {
                let s = stride(ax);
                (c[ax] > 0 && gi * g[i - s].0 < 0.0) || (c[ax] + 1 < resolution && gi * g[i + s].0 < 0.0)
            })
        })
        .collect();
    let points: Vec<Vec<f64>> = (0..total)
        .filter(|&i| keep[i])
        .map(|i| {
            let c = coords(i);
            let mut p = vec![xs[c[0]]];
            p.extend((0..spec.m).map(|k| ys[k][c[k + 1]]));
            p
        })
        .collect();
    let mut lo = vec![spec.x_range.0];
    let mut hi = vec![spec.x_range.1];
    let mut diag2 = ((spec.x_range.1 - spec.x_range.0) / (resolution - 1) as f64).powi(2);
    for &(l, h) in y_box {
        lo.push(l);
        hi.push(h);
        diag2 += ((h - l) / (resolution - 1) as f64).powi(2);
    }
    let mut set = SampledSet::new(points, 1.5 * diag2.sqrt(), lo, hi)?;
    if set.is_empty() {
        set.warning = Some("empty sample: raise the resolution or widen the box".into());
    }
    Ok(set)
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Components {
    pub count: usize,
    /// Label per point; labels are numbered by the lexicographically smallest
    /// point of each component.
    pub labels: Vec<usize>,
}

/// Components of the radius-`r` adjacency graph via spatial hashing into
/// cells of side `r` and union-find.
pub fn connected_components(set: &SampledSet) -> Result<Components> {
    if set.is_empty() {
        return Err(Error::Empty("sampled set".into()));
    }
    let r = set.radius;
    let cell_of = |p: &[f64]| -> Vec<i64> { p.iter().zip(&set.lo).map(|(c, l)| ((c - l) / r).floor() as i64).collect() };
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in set.points.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(set.dim as u32))
        .map(|mut k| {
            (0..set.dim)
                .map(|_| {
                    let o = (k % 3) as i64 - 1;
                    k /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let r2 = r * r;
    let mut ds = DisjointSets::new(set.len());
    for (i, p) in set.points.iter().enumerate() {
        let c = cell_of(p);
        for off in &offsets {
            let key: Vec<i64> = c.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(members) = cells.get(&key) {
                for &j in members {
                    if j > i {
                        let d2: f64 = p.iter().zip(&set.points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                        if d2 <= r2 {
                            ds.union(i, j);
                        }
                    }
                }
            }
        }
    }
    let roots: Vec<usize> = (0..set.len()).map(|i| ds.find(i)).collect();
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| {
        set.points[a]
            .iter()
            .zip(&set.points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut label_of_root: HashMap<usize, usize> = HashMap::new();
    for &i in &order {
        let next = label_of_root.len();
        label_of_root.entry(roots[i]).or_insert(next);
    }
    Ok(Components {
        count: label_of_root.len(),
        labels: roots.iter().map(|r| label_of_root[r]).collect(),
    })
}

/// CSV with header `x,y,label` (extra `y` components as `y2, y3, …`).
pub fn write_components_csv(set: &SampledSet, comps: &Components, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend((3..=set.dim).map(|k| format!("y{}", k - 1)));
    header.truncate(set.dim.max(1));
    header.push("label".into());
    writeln!(out, "{}", header.join(","))?;
    for (p, l) in set.points.iter().zip(&comps.labels) {
        let row: Vec<String> = p.iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(out, "{},{l}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct DomainSplit {
    pub components: usize,
    /// Approximate zeros of `A`: zero nodes and crossing points by linear
    /// interpolation along grid edges.
    pub zeros: Vec<f64>,
}

/// Components of `X ∖ A⁻¹(0)` on the x grid: nodes with `|A| > ε` joined to
/// their successor unless the segment between the two values of `A`
/// passes within `ε` of the origin.
pub fn domain_minus_zeros(spec: &OperatorSpec, resolution: usize, eps: f64) -> Result<DomainSplit> {
    let xs = spec.x_nodes(resolution);
    let a: Vec<Vec<f64>> = xs.iter().map(|&x| spec.eval(x)).collect::<Result<_>>()?;
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let alive: Vec<bool> = a.iter().map(|v| norm(v) > eps).collect();
    let mut zeros = Vec::new();
    let mut components = 0;
    let mut open = false;
    for i in 0..xs.len() {
        if !alive[i] {
            zeros.push(xs[i]);
            open = false;
            continue;
        }
        if !open {
            components += 1;
            open = true;
        }
        if i + 1 < xs.len() && alive[i + 1] {
            // Closest point of the segment a[i] + t (a[i+1] − a[i]) to 0.
            let d: Vec<f64> = a[i + 1].iter().zip(&a[i]).map(|(p, q)| p - q).collect();
            let dd: f64 = d.iter().map(|c| c * c).sum();
            let t = if dd > 0.0 {
                (-a[i].iter().zip(&d).map(|(p, q)| p * q).sum::<f64>() / dd).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let closest: Vec<f64> = a[i].iter().zip(&d).map(|(p, q)| p + t * q).collect();
            if norm(&closest) <= eps {
                zeros.push(xs[i] + t * (xs[i + 1] - xs[i]));
                open = false;
            }
        }
    }
    Ok(DomainSplit { components, zeros })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    pub box_scale: f64,
    pub resolution: usize,
    pub gamma_components: usize,
    pub domain_components: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub label: String,
    pub gamma_components: usize,
    pub domain_components: usize,
    pub zeros: Vec<f64>,
    /// Both counts at least 2, or both exactly 1.
    pub equivalent: bool,
    pub stability: Vec<StabilityRow>,
    /// Counts unchanged under 2× and 4× box growth and 2× refinement.
    pub stable: bool,
}

fn counts_at(spec: &OperatorSpec, y_box: &[(f64, f64)], resolution: usize, eps: f64) -> Result<(usize, usize, Vec<f64>)> {
    let set = level_set_sample(spec, y_box, resolution, eps)?;
    let gamma = if set.is_empty() { 0 } else { connected_components(&set)?.count };
    let dom = domain_minus_zeros(spec, resolution, eps)?;
    Ok((gamma, dom.components, dom.zeros))
}

/// Disconnectedness of `Γ` against disconnectedness of `X ∖ A⁻¹(0)`, with
/// the verdict re-derived on boxes scaled 2× and 4× and on a grid refined 2×.
pub fn zero_set_equivalence_check(spec: &OperatorSpec, y_box: &[(f64, f64)], resolution: usize, eps: f64) -> Result<EquivalenceReport> {
    if !spec.has_unit_level() {
        return Err(Error::invalid("the equivalence is stated for the unit level"));
    }
    let scaled = |s: f64| -> Vec<(f64, f64)> { y_box.iter().map(|&(l, h)| (s * l, s * h)).collect() };
    let runs = [(1.0, resolution), (2.0, resolution), (4.0, resolution), (1.0, 2 * resolution - 1)];
    let results: Vec<(f64, usize, (usize, usize, Vec<f64>))> = runs
        .par_iter()
        .map(|&(s, n)| Ok((s, n, counts_at(spec, &scaled(s), n, eps)?)))
        .collect::<Result<_>>()?;
    let (gamma, dom, zeros) = results[0].2.clone();
    let stability: Vec<StabilityRow> = results
        .iter()
        .map(|(s, n, (g, d, _))| StabilityRow {
            box_scale: *s,
            resolution: *n,
            gamma_components: *g,
            domain_components: *d,
        })
        .collect();
    let stable = stability.iter().all(|r| r.gamma_components == gamma && r.domain_components == dom);
    Ok(EquivalenceReport {
        label: spec.label.clone(),
        gamma_components: gamma,
        domain_components: dom,
        zeros,
        equivalent: (gamma >= 2 && dom >= 2) || (gamma == 1 && dom == 1),
        stability,
        stable,
    })
}

/// The three regression operators on `[−1, 1]`: `x`, `1`, `x² + 0.1`.
pub fn regression_corpus() -> Vec<OperatorSpec> {
    vec![
        OperatorSpec::scalar("identity", (-1.0, 1.0), |x| x).expect("valid range"),
        OperatorSpec::scalar("constant", (-1.0, 1.0), |_| 1.0).expect("valid range"),
        OperatorSpec::scalar("shifted-square", (-1.0, 1.0), |x| x * x + 0.1).expect("valid range"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_clusters_and_chains() {
        let mut pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1, 0.0]).collect();
        pts.extend((0..5).map(|i| vec![5.0 + i as f64 * 0.1, 0.0]));
        let set = SampledSet::new(pts, 0.11, vec![0.0, 0.0], vec![6.0, 1.0]).unwrap();
        let c = connected_components(&set).unwrap();
        assert_eq!(c.count, 2);
        assert_eq!(&c.labels[..5], &[0; 5]);
        assert_eq!(&c.labels[5..], &[1; 5]);
        let chain: Vec<Vec<f64>> = (0..100).map(|i| vec![0.05 * i as f64, 0.5]).collect();
        let set = SampledSet::new(chain, 0.06, vec![0.0, 0.0], vec![5.0, 1.0]).unwrap();
        assert_eq!(connected_components(&set).unwrap().count, 1);
        assert!(SampledSet::new(vec![vec![2.0, 0.0]], 0.1, vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn hyperbola_has_two_branches() {
        let spec = OperatorSpec::scalar("x", (-1.0, 1.0), |x| x).unwrap();
        let set = level_set_sample(&spec, &[(-10.0, 10.0)], 129, 1e-3).unwrap();
        let c = connected_components(&set).unwrap();
        assert_eq!(c.count, 2);
        for (p, l) in set.points.iter().zip(&c.labels) {
            assert_eq!(*l, usize::from(p[0] > 0.0));
        }
    }

    #[test]
    fn cross_is_connected() {
        let spec = OperatorSpec::scalar("x", (-1.0, 1.0), |x| x).unwrap().with_level(|x| x * x);
        let set = level_set_sample(&spec, &[(-2.0, 2.0)], 65, 1e-3).unwrap();
        assert_eq!(connected_components(&set).unwrap().count, 1);
        // Both the diagonal and the fiber over 0 are present.
        assert!(set.points.iter().any(|p| p[0] == 0.0 && p[1] == -2.0));
        assert!(set.points.iter().any(|p| p[0] == 1.0 && p[1] == 1.0));
    }

    #[test]
    fn corpus_counts() {
        let expect = [(2, 2), (1, 1), (1, 1)];
        for (spec, want) in regression_corpus().iter().zip(expect) {
            let rep = zero_set_equivalence_check(spec, &[(-10.0, 10.0)], 129, 1e-3).unwrap();
            assert_eq!((rep.gamma_components, rep.domain_components), want, "{}", spec.label);
            assert!(rep.equivalent && rep.stable, "{rep:?}");
        }
    }

    #[test]
    fn interpolated_zero_splits_domain() {
        // Even node count: 0 is not a node.
        let spec = OperatorSpec::scalar("x", (-1.0, 1.0), |x| x).unwrap();
        let d = domain_minus_zeros(&spec, 64, 1e-9).unwrap();
        assert_eq!(d.components, 2);
        assert!(d.zeros[0].abs() <= 1e-12);
        let plane = OperatorSpec::new("curve", (-1.0, 1.0), |x| vec![x, x * x + 0.5]).unwrap();
        assert_eq!(domain_minus_zeros(&plane, 64, 1e-9).unwrap().components, 1);
    }
}
