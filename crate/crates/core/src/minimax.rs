//! Strict minimax inequality on finite state sets, and a Galerkin model of the
//! nonlocal (Kirchhoff-type) energy on the unit square.
//!
//! A finite instance has states `x` with values `J(x)` and points `v_x ∈ Rᵐ`;
//! the perturbation is `φ(v_x − v)`. Above the threshold `θ` the
//! sup-inf over `v` is strictly below the inf-sup over states, and the
//! maximising `v` ties at least two states.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::gauss_legendre;

type PhiFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct FiniteInstance {
    j: Vec<f64>,
    v_map: Vec<Vec<f64>>,
    phi: PhiFn,
    phi_label: String,
}

impl fmt::Debug for FiniteInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteInstance")
            .field("j", &self.j)
            .field("v_map", &self.v_map)
            .field("phi", &self.phi_label)
            .finish()
    }
}

impl Serialize for FiniteInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FiniteInstance", 3)?;
        st.serialize_field("j", &self.j)?;
        st.serialize_field("v_map", &self.v_map)?;
        st.serialize_field("phi", &self.phi_label)?;
        st.end()
    }
}

pub fn half_square(w: &[f64]) -> f64 {
    0.5 * w.iter().map(|x| x * x).sum::<f64>()
}

impl FiniteInstance {
    /// Instance with `φ(w) = |w|²/2`.
    pub fn new(j: Vec<f64>, v_map: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_phi(j, v_map, "half-square", half_square)
    }

    /// `φ` is checked on the state differences and a few probe points:
    /// nonnegative, zero at the origin, positive elsewhere.
    pub fn with_phi(
        j: Vec<f64>,
        v_map: Vec<Vec<f64>>,
        label: &str,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if j.is_empty() || j.len() != v_map.len() {
            return Err(Error::invalid("J and v_map need the same non-zero length"));
        }
        let m = v_map[0].len();
        if m == 0 || v_map.iter().any(|v| v.len() != m) {
            return Err(Error::invalid("v_map points need one common positive dimension"));
        }
        ensure_finite(&j, "J")?;
        for v in &v_map {
            ensure_finite(v, "v_map")?;
        }
        if v_map.iter().all(|v| v == &v_map[0]) {
            return Err(Error::invalid("v_map is constant"));
        }
        if phi(&vec![0.0; m]) != 0.0 {
            return Err(Error::invalid("phi(0) must be 0"));
        }
        let mut probes: Vec<Vec<f64>> = Vec::new();
        for a in &v_map {
            for b in &v_map {
                if a != b {
                    probes.push(a.iter().zip(b).map(|(x, y)| x - y).collect());
                }
            }
        }
        for k in 0..m {
            for s in [-1.0, -1e-3, 1e-3, 1.0] {
                let mut e = vec![0.0; m];
                e[k] = s;
                probes.push(e);
            }
        }
        if probes.iter().any(|w| !(phi(w) > 0.0)) {
            return Err(Error::invalid("phi must be positive away from the origin"));
        }
        Ok(Self {
            j,
            v_map,
            phi: Arc::new(phi),
            phi_label: label.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.v_map[0].len()
    }

    pub fn values(&self) -> &[f64] {
        &self.j
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.v_map
    }

    /// Same states with `J` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            j: self.j.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }

    fn phi_between(&self, x: usize, v: &[f64]) -> f64 {
        let w: Vec<f64> = self.v_map[x].iter().zip(v).map(|(a, b)| a - b).collect();
        (self.phi)(&w)
    }

    /// `J(x) − λ φ(v_x − v)` for every state.
    pub fn perturbed(&self, lambda: f64, v: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|x| self.j[x] - lambda * self.phi_between(x, v)).collect()
    }

    fn minimisers(&self) -> Vec<usize> {
        let min = self.j.iter().copied().fold(f64::INFINITY, f64::min);
        (0..self.len()).filter(|&x| self.j[x] == min).collect()
    }
}

/// `inf (J(x) − J(u)) / φ(v_x − v_u)` over global minimisers `u` and states
/// `x` with `v_x ≠ v_u`, by enumeration.
pub fn theta(inst: &FiniteInstance) -> Result<f64> {
    let mut best = f64::INFINITY;
    for u in inst.minimisers() {
        for x in 0..inst.len() {
            if inst.v_map[x] == inst.v_map[u] {
                continue;
            }
            let q = (inst.j[x] - inst.j[u]) / inst.phi_between(x, &inst.v_map[u]);
            best = best.min(q);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::invalid("no admissible pair: every minimiser shares its point with all states"))
    }
}

/// Tensor grid over a box in `Rᵐ` with `counts[k] >= 1` points per axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl VGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::invalid("grid bounds and counts must share one dimension"));
        }
        if counts.contains(&0) {
            return Err(Error::Empty("v grid has an empty axis".into()));
        }
        ensure_finite(&lo, "v grid")?;
        ensure_finite(&hi, "v grid")?;
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::invalid("grid lower corner exceeds upper corner"));
        }
        Ok(Self { lo, hi, counts })
    }

    /// `[lo, hi]` in one dimension with spacing `step`.
    pub fn interval(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::invalid("step must be positive"));
        }
        let n = ((hi - lo) / step).round() as usize + 1;
        Self::new(vec![lo], vec![hi], vec![n])
    }

    /// Box containing every `v_x`, padded by a quarter of its extent.
    pub fn around(inst: &FiniteInstance, per_axis: usize) -> Result<Self> {
        let m = inst.dim();
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for v in inst.points() {
            for k in 0..m {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        for k in 0..m {
            let pad = 0.25 * (hi[k] - lo[k]).max(1e-3);
            lo[k] -= pad;
            hi[k] += pad;
        }
        Self::new(lo, hi, vec![per_axis; m])
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, k: usize) -> f64 {
        if self.counts[k] > 1 {
            (self.hi[k] - self.lo[k]) / (self.counts[k] - 1) as f64
        } else {
            0.0
        }
    }

    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.lo.len());
        for k in 0..self.lo.len() {
            let i = idx % self.counts[k];
            idx /= self.counts[k];
            let n = self.counts[k];
            p.push(if n == 1 {
                self.lo[k]
            } else {
                (self.lo[k] * (n - 1 - i) as f64 + self.hi[k] * i as f64) / (n - 1) as f64
            });
        }
        p
    }

    fn zoom(&self, centre: &[f64], per_axis: usize) -> Self {
        let m = centre.len();
        let mut lo = Vec::with_capacity(m);
        let mut hi = Vec::with_capacity(m);
        for k in 0..m {
            let s = self.step(k);
            lo.push(centre[k] - s);
            hi.push(centre[k] + s);
        }
        let counts = self.counts.iter().map(|&c| if c > 1 { per_axis } else { 1 }).collect();
        Self { lo, hi, counts }
    }
}

/// Maximise `score` over the grid, then re-grid `zoom_levels` times around
/// the best point, each box spanning one step either side of it.
fn zoom_argmax(grid: &VGrid, zoom_levels: usize, score: &(dyn Fn(&[f64]) -> f64 + Sync)) -> (Vec<f64>, f64, f64) {
    let scan = |g: &VGrid| -> (Vec<f64>, f64) {
        (0..g.len())
            .into_par_iter()
            .map(|i| {
                let p = g.point(i);
                let s = score(&p);
                (p, s)
            })
            .reduce(
                || (Vec::new(), f64::NEG_INFINITY),
                |a, b| if b.1 > a.1 || (b.1 == a.1 && !b.0.is_empty() && (a.0.is_empty() || b.0 < a.0)) { b } else { a },
            )
    };
    let (mut best, mut value) = scan(grid);
    let mut g = grid.clone();
    for _ in 0..zoom_levels {
        if g.counts.iter().all(|&c| c == 1) {
            break;
        }
        g = g.zoom(&best, 21);
        let (p, s) = scan(&g);
        if s > value {
            best = p;
            value = s;
        }
    }
    let step = (0..g.lo.len()).map(|k| g.step(k)).fold(0.0, f64::max);
    (best, value, step)
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimaxGap {
    pub lambda: f64,
    /// `max_v min_x (J(x) − λ φ(v_x − v))` over the zoomed grid.
    pub lhs: f64,
    pub lhs_argmax: Vec<f64>,
    /// `min_x max_z (J(x) − λ φ(v_x − v_z))`, exact.
    pub rhs: f64,
    pub strict: bool,
    pub zoom_levels: usize,
    pub final_step: f64,
}

pub const STRICT_MARGIN: f64 = 1e-12;

/// Grid values under-estimate the sup-inf, so a strict verdict is never an
/// artefact of the grid.
pub fn minimax_gap(inst: &FiniteInstance, lambda: f64, grid: &VGrid, zoom_levels: usize) -> Result<MinimaxGap> {
    if grid.is_empty() {
        return Err(Error::Empty("v grid".into()));
    }
    if grid.lo.len() != inst.dim() {
        return Err(Error::invalid("grid dimension differs from the instance"));
    }
    let inner = |v: &[f64]| inst.perturbed(lambda, v).into_iter().fold(f64::INFINITY, f64::min);
    let (lhs_argmax, lhs, final_step) = zoom_argmax(grid, zoom_levels, &inner);
    let rhs = (0..inst.len())
        .map(|x| {
            (0..inst.len())
                .map(|z| inst.j[x] - lambda * inst.phi_between(x, &inst.v_map[z]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(MinimaxGap {
        lambda,
        lhs,
        lhs_argmax,
        rhs,
        strict: lhs < rhs - STRICT_MARGIN,
        zoom_levels,
        final_step,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VStar {
    pub v: Vec<f64>,
    pub min_value: f64,
    /// States within `TIE_TOL` of the minimum of `J − λ φ(Ψ(·, v))`.
    pub minimisers: Vec<usize>,
    /// Distance between the two smallest perturbed values.
    pub tie_gap: f64,
    pub tie: bool,
}

pub const TIE_TOL: f64 = 1e-9;

/// A `v` at which the perturbed functional has two or more global minimisers.
/// Candidates: the sup-inf maximiser and the zoomed minimiser of the gap
/// between the two lowest values; the tighter tie wins.
pub fn find_vstar(inst: &FiniteInstance, lambda: f64, grid: &VGrid, zoom_levels: usize) -> Result<VStar> {
    if inst.len() < 2 {
        return Err(Error::invalid("a tie needs at least two states"));
    }
    let gap = minimax_gap(inst, lambda, grid, zoom_levels)?;
    let two_lowest = |v: &[f64]| {
        let mut vals = inst.perturbed(lambda, v);
        vals.sort_by(f64::total_cmp);
        vals[1] - vals[0]
    };
    let (v_gap, _, _) = zoom_argmax(grid, zoom_levels, &|v| -two_lowest(v));
    let candidates = [gap.lhs_argmax, v_gap];
    let v = candidates
        .into_iter()
        .min_by(|a, b| two_lowest(a).total_cmp(&two_lowest(b)))
        .expect("two candidates");
    Ok(evaluate_tie(inst, lambda, v))
}

/// Full enumeration of the perturbed values at `v`.
pub fn evaluate_tie(inst: &FiniteInstance, lambda: f64, v: Vec<f64>) -> VStar {
    let vals = inst.perturbed(lambda, &v);
    let min_value = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let minimisers: Vec<usize> = (0..vals.len()).filter(|&x| vals[x] - min_value <= TIE_TOL).collect();
    let mut sorted = vals.clone();
    sorted.sort_by(f64::total_cmp);
    VStar {
        tie: minimisers.len() >= 2,
        tie_gap: sorted[1] - sorted[0],
        v,
        min_value,
        minimisers,
    }
}

/// Seeded instance with 3 to 6 states in dimension 1 or 2; `J` on `[0, 1]`,
/// points in `[−1, 1]ᵐ`.
pub fn random_instance(seed: u64) -> FiniteInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=6);
    let m = rng.gen_range(1..=2);
    loop {
        let j: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let v: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if let Ok(inst) = FiniteInstance::new(j, v) {
            return inst;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusRow {
    pub seed: u64,
    pub states: usize,
    pub dim: usize,
    pub theta: f64,
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub homogeneity_error: f64,
    pub tie_gap: f64,
}

/// Strict gap at `λ = factor·θ` and `θ(2J) = 2θ(J)` on `count` seeded instances.
pub fn corpus_check(base_seed: u64, count: usize, factor: f64) -> Result<Vec<CorpusRow>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(k);
            let inst = random_instance(seed);
            let th = theta(&inst)?;
            let lambda = factor * th;
            let grid = VGrid::around(&inst, if inst.dim() == 1 { 201 } else { 41 })?;
            let gap = minimax_gap(&inst, lambda, &grid, 8)?;
            let th2 = theta(&inst.scaled(2.0))?;
            let vs = find_vstar(&inst, lambda, &grid, 8)?;
            Ok(CorpusRow {
                seed,
                states: inst.len(),
                dim: inst.dim(),
                theta: th,
                lambda,
                lhs: gap.lhs,
                rhs: gap.rhs,
                strict: gap.strict,
                homogeneity_error: (th2 - 2.0 * th).abs() / (1.0 + th.abs()),
                tie_gap: vs.tie_gap,
            })
        })
        .collect()
}

/// Galerkin model on `(0,1)²` in the first `d` Dirichlet modes
/// `e_{jk} = 2 sin(jπx) sin(kπy) / (π√(j²+k²))`, orthonormal for `∫∇u·∇w`.
/// With `u = Σ cᵢ eᵢ` the energy is
/// `a|c|²/2 + b|c|⁴/4 − ν/(p+1) ∫|u|^{p+1} − (λ/2) ∫|u − v*|²`.
#[derive(Clone, Debug, Serialize)]
pub struct KirchhoffEnergy {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
    pub p: f64,
    pub lambda: f64,
    pub modes: Vec<(u32, u32)>,
    /// Shift field given by its basis coefficients.
    pub vstar: Vec<f64>,
    pub quadrature: usize,
    #[serde(skip)]
    cache: QuadCache,
}

#[derive(Clone, Debug, Default)]
struct QuadCache {
    n: usize,
    weights: Vec<f64>,
    /// `basis[i * nodes + q]`
    basis: Vec<f64>,
    vstar: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Set when the default quadrature was too coarse and a refined one was used.
    pub warning: Option<String>,
}

/// The `d` lowest modes ordered by `j² + k²`, then `(j, k)`.
pub fn lowest_modes(d: usize) -> Vec<(u32, u32)> {
    let side = (d as f64).sqrt().ceil() as u32 + 2;
    let mut all: Vec<(u32, u32)> = (1..=side).flat_map(|j| (1..=side).map(move |k| (j, k))).collect();
    all.sort_by_key(|&(j, k)| (j * j + k * k, j, k));
    all.truncate(d);
    all
}

fn mode_value(j: u32, k: u32, x: f64, y: f64) -> f64 {
    let (j, k) = (j as f64, k as f64);
    2.0 * (j * PI * x).sin() * (k * PI * y).sin() / (PI * (j * j + k * k).sqrt())
}

impl KirchhoffEnergy {
    /// `d` lowest modes, zero shift, 64² Gauss–Legendre quadrature.
    pub fn new(a: f64, b: f64, nu: f64, p: f64, lambda: f64, d: usize) -> Result<Self> {
        ensure_finite(&[a, b, nu, p, lambda], "energy parameters")?;
        if !(b > 0.0 && a >= 0.0 && p > 0.0 && lambda >= 0.0) || d == 0 {
            return Err(Error::invalid("need a >= 0, b > 0, p > 0, lambda >= 0 and d >= 1"));
        }
        let modes = lowest_modes(d);
        let mut ke = Self {
            a,
            b,
            nu,
            p,
            lambda,
            vstar: vec![0.0; d],
            modes,
            quadrature: 64,
            cache: QuadCache::default(),
        };
        ke.cache = ke.build_cache(ke.quadrature);
        Ok(ke)
    }

    pub fn with_vstar(mut self, vstar: Vec<f64>) -> Result<Self> {
        if vstar.len() != self.modes.len() {
            return Err(Error::invalid("shift coefficients must match the basis size"));
        }
        ensure_finite(&vstar, "shift coefficients")?;
        self.vstar = vstar;
        self.cache = self.build_cache(self.quadrature);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    fn build_cache(&self, n: usize) -> QuadCache {
        let (z, w) = gauss_legendre(n);
        let x: Vec<f64> = z.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let nodes = n * n;
        let mut weights = Vec::with_capacity(nodes);
        for wi in &w {
            for wj in &w {
                weights.push(0.25 * wi * wj);
            }
        }
        let mut basis = Vec::with_capacity(self.modes.len() * nodes);
        for &(j, k) in &self.modes {
            for xi in &x {
                for yj in &x {
                    basis.push(mode_value(j, k, *xi, *yj));
                }
            }
        }
        let mut vstar = vec![0.0; nodes];
        for (i, c) in self.vstar.iter().enumerate() {
            for q in 0..nodes {
                vstar[q] += c * basis[i * nodes + q];
            }
        }
        QuadCache {
            n,
            weights,
            basis,
            vstar,
        }
    }

    /// Gauss points per axis needed for `|u|^{p+1}`: the top frequency times
    /// the power, at four points per wavelength.
    pub fn required_quadrature(&self) -> usize {
        let kmax = self.modes.iter().map(|&(j, k)| j.max(k)).max().unwrap_or(1) as f64;
        ((self.p + 1.0).max(2.0) * kmax * 2.0).ceil() as usize
    }

    fn eval_with(&self, cache: &QuadCache, coeffs: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let nodes = cache.n * cache.n;
        let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
        let mut value = 0.5 * self.a * norm2 + 0.25 * self.b * norm2 * norm2;
        let mut grad: Vec<f64> = coeffs.iter().map(|c| (self.a + self.b * norm2) * c).collect();
        let mut power = 0.0;
        let mut shift = 0.0;
        let mut g_nl = vec![0.0; d];
        let mut g_sh = vec![0.0; d];
        for q in 0..nodes {
            let mut u = 0.0;
            for i in 0..d {
                u += coeffs[i] * cache.basis[i * nodes + q];
            }
            let w = cache.weights[q];
            let au = u.abs();
            power += w * au.powf(self.p + 1.0);
            let diff = u - cache.vstar[q];
            shift += w * diff * diff;
            let dnl = w * au.powf(self.p - 1.0) * u;
            let dsh = w * diff;
            for i in 0..d {
                let e = cache.basis[i * nodes + q];
                g_nl[i] += dnl * e;
                g_sh[i] += dsh * e;
            }
        }
        value -= self.nu / (self.p + 1.0) * power + 0.5 * self.lambda * shift;
        for i in 0..d {
            grad[i] -= self.nu * g_nl[i] + self.lambda * g_sh[i];
        }
        (value, grad)
    }

    /// Value and analytic gradient in the coefficients.
    pub fn evaluate(&self, coeffs: &[f64]) -> Result<EnergyEval> {
        if coeffs.len() != self.dim() {
            return Err(Error::invalid("coefficient vector has the wrong length"));
        }
        ensure_finite(coeffs, "coefficients")?;
        let need = self.required_quadrature();
        let (value, gradient, warning) = if need > self.cache.n {
            let refined = self.build_cache(need);
            let (v, g) = self.eval_with(&refined, coeffs);
            (
                v,
                g,
                Some(format!("quadrature {}² under-resolves |u|^{}; re-evaluated at {need}²", self.cache.n, self.p + 1.0)),
            )
        } else {
            let (v, g) = self.eval_with(&self.cache, coeffs);
            (v, g, None)
        };
        Ok(EnergyEval { value, gradient, warning })
    }

    /// `(t, E(t·dir))` for each `t`.
    pub fn ray(&self, dir: &[f64], ts: &[f64]) -> Result<Vec<(f64, f64)>> {
        ts.iter()
            .map(|&t| {
                let c: Vec<f64> = dir.iter().map(|x| t * x).collect();
                Ok((t, self.evaluate(&c)?.value))
            })
            .collect()
    }

    /// Smallest `t = t0·2ᵏ` (k < 64) with `E(t·dir)` beyond `threshold`:
    /// above it when `threshold > 0`, below it otherwise.
    pub fn ray_escape(&self, dir: &[f64], t0: f64, threshold: f64) -> Result<Option<(f64, f64)>> {
        let mut t = t0;
        for _ in 0..64 {
            let c: Vec<f64> = dir.iter().map(|x| t * x).collect();
            let v = self.evaluate(&c)?.value;
            if (threshold > 0.0 && v > threshold) || (threshold <= 0.0 && v < threshold) {
                return Ok(Some((t, v)));
            }
            t *= 2.0;
        }
        Ok(None)
    }

    /// `∫ eᵢ eⱼ` Gram matrix entry, for basis checks.
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        let nodes = self.cache.n * self.cache.n;
        (0..nodes)
            .map(|q| self.cache.weights[q] * self.cache.basis[i * nodes + q] * self.cache.basis[j * nodes + q])
            .sum()
    }
}

/// `∫∇eᵢ·∇eⱼ` by the same quadrature; the identity for an orthonormal basis.
pub fn gradient_gram(modes: &[(u32, u32)], n: usize) -> Vec<Vec<f64>> {
    let (z, w) = gauss_legendre(n);
    let x: Vec<f64> = z.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let grad = |(j, k): (u32, u32), x: f64, y: f64| {
        let (jf, kf) = (j as f64, k as f64);
        let c = 2.0 / (PI * (jf * jf + kf * kf).sqrt());
        (
            c * jf * PI * (jf * PI * x).cos() * (kf * PI * y).sin(),
            c * kf * PI * (jf * PI * x).sin() * (kf * PI * y).cos(),
        )
    };
    modes
        .iter()
        .map(|&a| {
            modes
                .iter()
                .map(|&b| {
                    let mut s = 0.0;
                    for (xi, wi) in x.iter().zip(&w) {
                        for (yj, wj) in x.iter().zip(&w) {
                            let (ax, ay) = grad(a, *xi, *yj);
                            let (bx, by) = grad(b, *xi, *yj);
                            s += 0.25 * wi * wj * (ax * bx + ay * by);
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> FiniteInstance {
        FiniteInstance::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn theta_two_state() {
        assert_eq!(theta(&two_state()).unwrap(), 2.0);
        let flat = FiniteInstance::new(vec![0.5, 0.5], vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(theta(&flat).unwrap(), 0.0);
        assert!(FiniteInstance::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn gap_two_state() {
        let grid = VGrid::interval(-1.0, 2.0, 1e-4).unwrap();
        let g = minimax_gap(&two_state(), 3.0, &grid, 6).unwrap();
        assert!((g.lhs + 1.0 / 24.0).abs() <= 1e-6, "{}", g.lhs);
        assert!((g.lhs_argmax[0] - 1.0 / 6.0).abs() <= 1e-4);
        assert_eq!(g.rhs, 0.0);
        assert!(g.strict);
        let zero = minimax_gap(&two_state(), 0.0, &grid, 6).unwrap();
        assert_eq!((zero.lhs, zero.rhs, zero.strict), (0.0, 0.0, false));
        assert!(minimax_gap(&two_state(), 3.0, &VGrid { lo: vec![0.0], hi: vec![1.0], counts: vec![0] }, 0).is_err());
    }

    #[test]
    fn vstar_two_state_and_symmetric() {
        let grid = VGrid::interval(-1.0, 2.0, 1e-4).unwrap();
        let v = find_vstar(&two_state(), 3.0, &grid, 6).unwrap();
        assert!((v.v[0] - 1.0 / 6.0).abs() <= 1e-4);
        assert!(v.tie && v.tie_gap <= 1e-9);
        assert!((v.min_value + 1.0 / 24.0).abs() <= 1e-6);
        let sym = FiniteInstance::new(vec![0.3, 0.3], vec![vec![-1.0], vec![1.0]]).unwrap();
        let grid = VGrid::interval(-2.0, 2.0, 0.01).unwrap();
        let v = find_vstar(&sym, 1.0, &grid, 4).unwrap();
        assert!(v.v[0].abs() <= 1e-12 && v.tie);
    }

    #[test]
    fn vstar_random_five_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = FiniteInstance::new(
            (0..5).map(|_| rng.gen_range(0.0..1.0)).collect(),
            (0..5).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect(),
        )
        .unwrap();
        let lambda = 2.0 * theta(&inst).unwrap();
        let v = find_vstar(&inst, lambda, &VGrid::around(&inst, 401).unwrap(), 10).unwrap();
        assert!(v.tie_gap <= 1e-9, "{}", v.tie_gap);
        // Independent enumeration.
        let vals: Vec<f64> = (0..5)
            .map(|x| inst.values()[x] - lambda * 0.5 * (inst.points()[x][0] - v.v[0]).powi(2))
            .collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(vals.iter().filter(|&&y| y - min <= 1e-9).count() >= 2);
    }

    #[test]
    fn basis_is_gradient_orthonormal() {
        let gram = gradient_gram(&lowest_modes(8), 64);
        for (i, row) in gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() <= 1e-10, "{i} {j} {g}");
            }
        }
    }

    #[test]
    fn energy_at_origin() {
        let v = vec![0.5, -0.25, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0];
        let ke = KirchhoffEnergy::new(1.0, 1.0, 1.0, 2.0, 3.0, 8).unwrap().with_vstar(v.clone()).unwrap();
        let e = ke.evaluate(&[0.0; 8]).unwrap();
        // ∫|v*|² is the mass form, and ∫ v* eᵢ = Σⱼ vⱼ ∫eⱼeᵢ.
        let mut mass = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                mass += v[i] * v[j] * ke.mass(i, j);
            }
        }
        assert!((e.value + 1.5 * mass).abs() <= 1e-12);
        for i in 0..8 {
            let proj: f64 = (0..8).map(|j| v[j] * ke.mass(i, j)).sum();
            assert!((e.gradient[i] - 3.0 * proj).abs() <= 1e-12);
        }
    }
}
