//! Nonzero-solution search for `Δu = λ sin u` on planar annuli with zero
//! Dirichlet data: λ₁, Newton from a fixed seed corpus, and λ sweeps.
//!
//! Everything is stored in the form `-Δu = λ f(u)`; the sine problem is
//! `f = −sin`, whose primitive `cos − 1` never exceeds 0.
//!
//! A discrete bound applies: the map `u ↦ λ(-Δ_h)⁻¹ f(u)` has Lipschitz
//! constant `λ/λ₁^h` in the discrete energy norm and `∫F(u) <= 0` peaks at 0,
//! so no nonzero discrete solution exists for `λ <= 3λ₁^h`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quadrature::integrate;
use crate::numerics::{
    first_dirichlet_eigenpair, newton_solve, Grid2D, GridKind, NewtonOptions, PolarUnknowns, ScalarField,
};
use crate::pohozaev::{pohozaev_residual, Nonlinearity, PohozaevReport};

#[derive(Clone, Debug, Serialize)]
pub struct Lambda1 {
    pub value: f64,
    #[serde(skip)]
    pub eigenfunction: ScalarField,
    pub iterations: usize,
    pub radiality: f64,
}

/// First Dirichlet eigenvalue of `-Δ_h` on a polar grid, with the positive
/// eigenfunction normalised to unit L² norm.
pub fn lambda1(grid: &Grid2D) -> Result<Lambda1> {
    let pair = first_dirichlet_eigenpair(grid, 1e-10, 20_000)?;
    let unk = PolarUnknowns::new(grid)?;
    let field = unk.to_field(&pair.vector)?;
    let norm = integrate(&field.map(|v| v * v)?, None)?.sqrt();
    let eigenfunction = field.map(|v| v / norm)?;
    Ok(Lambda1 {
        value: pair.value,
        radiality: radiality_measure(&eigenfunction)?,
        eigenfunction,
        iterations: pair.trace.len(),
    })
}

/// Relative L² distance between `u` and its angular average; 0 for u = 0.
pub fn radiality_measure(u: &ScalarField) -> Result<f64> {
    let grid = *u.grid();
    if !grid.is_polar() {
        return Err(Error::invalid("radiality needs a polar grid"));
    }
    let (nr, nt) = grid.resolution();
    let mut avg = vec![0.0; nr];
    for (i, slot) in avg.iter_mut().enumerate() {
        *slot = (0..nt).map(|j| u.at(i, j)).sum::<f64>() / nt as f64;
    }
    let diff = ScalarField::new(grid, (0..grid.node_count()).map(|k| u.values()[k] - avg[k / nt]).collect())?;
    let num = integrate(&diff.map(|v| v * v)?, None)?;
    let den = integrate(&u.map(|v| v * v)?, None)?;
    Ok(if den == 0.0 { 0.0 } else { (num / den).sqrt() })
}

pub fn l2_norm(u: &ScalarField) -> Result<f64> {
    Ok(integrate(&u.map(|v| v * v)?, None)?.sqrt())
}

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// Newton starting field. Text form: `zero`, `radial:A`, `mode:k:A`,
/// `random:seed:A`, where `A` is a number or a multiple of `pi` (`2pi`, `0.5pi`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeedSpec {
    Zero,
    /// `A β(r)` with the radial bump `β(r) = sin(π (r − a)/(b − a))`.
    Radial { amp: f64 },
    /// `A β(r) cos(kθ)`.
    Mode { k: u32, amp: f64 },
    /// `A β(r) Σ_{k<=6} (c_k cos kθ + d_k sin kθ)` with seeded `c, d ∈ [−1, 1]`,
    /// scaled so the angular factor peaks at 1.
    Random { seed: u64, amp: f64 },
}

fn parse_amplitude(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::invalid(format!("bad amplitude '{text}'"));
    let v = if let Some(prefix) = t.strip_suffix("pi") {
        let c = if prefix.is_empty() {
            1.0
        } else {
            prefix.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?
        };
        c * PI
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn format_amplitude(a: f64) -> String {
    let c = a / PI;
    let rounded = (c * 1e6).round() / 1e6;
    if rounded != 0.0 && (rounded * PI - a).abs() <= 1e-12 * a.abs() {
        if rounded == 1.0 {
            "pi".into()
        } else {
            format!("{rounded}pi")
        }
    } else {
        format!("{a}")
    }
}

impl FromStr for SeedSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::invalid(format!("bad seed spec '{s}'"));
        match parts.as_slice() {
            ["zero"] => Ok(SeedSpec::Zero),
            ["radial", a] => Ok(SeedSpec::Radial { amp: parse_amplitude(a)? }),
            ["mode", k, a] => {
                let k: u32 = k.parse().map_err(|_| bad())?;
                if !(1..=64).contains(&k) {
                    return Err(Error::invalid("mode number must be in 1..=64"));
                }
                Ok(SeedSpec::Mode {
                    k,
                    amp: parse_amplitude(a)?,
                })
            }
            ["random", seed, a] => Ok(SeedSpec::Random {
                seed: seed.parse().map_err(|_| bad())?,
                amp: parse_amplitude(a)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SeedSpec::Zero => write!(f, "zero"),
            SeedSpec::Radial { amp } => write!(f, "radial:{}", format_amplitude(amp)),
            SeedSpec::Mode { k, amp } => write!(f, "mode:{k}:{}", format_amplitude(amp)),
            SeedSpec::Random { seed, amp } => write!(f, "random:{seed}:{}", format_amplitude(amp)),
        }
    }
}

/// The versioned default corpus.
pub const DEFAULT_SEEDS: &[&str] = &[
    "zero",
    "radial:1",
    "radial:pi",
    "radial:2pi",
    "radial:4pi",
    "mode:1:2pi",
    "mode:2:2pi",
    "mode:3:2pi",
    "mode:4:2pi",
    "mode:5:2pi",
    "mode:6:2pi",
    "random:1:pi",
    "random:2:2pi",
    "random:3:4pi",
];

pub const SEED_CORPUS_VERSION: u32 = 1;

pub fn default_seeds() -> Vec<SeedSpec> {
    DEFAULT_SEEDS
        .iter()
        .map(|s| s.parse().expect("default corpus parses"))
        .collect()
}

impl SeedSpec {
    pub fn field(&self, grid: &Grid2D) -> Result<ScalarField> {
        let (a, b) = match grid.kind() {
            GridKind::PolarAnnulus { inner, outer } => (inner, outer),
            _ => return Err(Error::invalid("seeds are defined on annulus grids")),
        };
        let bump = move |r: f64| (PI * (r - a) / (b - a)).sin();
        match *self {
            SeedSpec::Zero => Ok(ScalarField::zeros(*grid)),
            SeedSpec::Radial { amp } => ScalarField::from_polar_fn(*grid, |r, _| amp * bump(r)),
            SeedSpec::Mode { k, amp } => ScalarField::from_polar_fn(*grid, |r, t| amp * bump(r) * (k as f64 * t).cos()),
            SeedSpec::Random { seed, amp } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coef: Vec<(f64, f64)> = (0..=6).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let angular = |t: f64| {
                    coef.iter()
                        .enumerate()
                        .map(|(k, (c, d))| c * (k as f64 * t).cos() + d * (k as f64 * t).sin())
                        .sum::<f64>()
                };
                let nt = grid.resolution().1;
                let peak = (0..nt).map(|j| angular(grid.axis2(j)).abs()).fold(0.0, f64::max).max(1e-12);
                ScalarField::from_polar_fn(*grid, |r, t| amp * bump(r) * angular(t) / peak)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Newton search
// ---------------------------------------------------------------------------

/// Below this L² norm a converged solution counts as the trivial one.
pub const TRIVIAL_NORM: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome {
    pub lambda: f64,
    pub seed: String,
    pub converged: bool,
    #[serde(skip)]
    pub solution: Option<ScalarField>,
    pub residual_norm: f64,
    pub solution_norm: f64,
    pub nonzero: bool,
    pub iterations: usize,
    pub pohozaev_residual: Option<f64>,
    pub pohozaev: Option<PohozaevReport>,
    pub radiality_measure: f64,
    /// Set when a converged nonzero outcome contradicts a proved statement.
    pub anomaly: Option<String>,
    pub failure: Option<String>,
}

/// Damped Newton on `-Δ_h u − λ f(u) = 0` with zero Dirichlet rings.
/// Divergence is an outcome, not an error.
pub fn newton_search(grid: &Grid2D, lambda: f64, nl: &Nonlinearity, start: &ScalarField, label: &str, tol: f64) -> Result<SearchOutcome> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    if start.grid() != grid {
        return Err(Error::invalid("seed lives on a different grid"));
    }
    let unk = PolarUnknowns::new(grid)?;
    let u0 = unk.from_field(start);
    let residual = |u: &[f64]| -> Vec<f64> {
        unk.apply_laplacian(u)
            .iter()
            .zip(u)
            .map(|(l, &v)| -l - lambda * nl.f(v))
            .collect()
    };
    let jacobian = |u: &[f64]| {
        let diag: Vec<f64> = u.iter().map(|&v| lambda * nl.derivative(v)).collect();
        let mut s = unk.laplacian_system(&diag);
        s.scale(-1.0);
        s
    };
    let opts = NewtonOptions {
        tol,
        ..NewtonOptions::default()
    };
    let mut out = SearchOutcome {
        lambda,
        seed: label.to_string(),
        converged: false,
        solution: None,
        residual_norm: f64::NAN,
        solution_norm: f64::NAN,
        nonzero: false,
        iterations: 0,
        pohozaev_residual: None,
        pohozaev: None,
        radiality_measure: f64::NAN,
        anomaly: None,
        failure: None,
    };
    match newton_solve(residual, jacobian, u0, &opts) {
        Ok(rep) => {
            let field = unk.to_field(&rep.solution)?;
            out.converged = true;
            out.residual_norm = rep.residual_norm;
            out.iterations = rep.iterations;
            out.solution_norm = l2_norm(&field)?;
            out.nonzero = out.solution_norm > TRIVIAL_NORM;
            out.radiality_measure = radiality_measure(&field)?;
            let poh = pohozaev_residual(&field, lambda, nl, 2, 1e-6)?;
            out.pohozaev_residual = Some(poh.residual);
            if out.nonzero && poh.case_b_obstruction {
                out.anomaly = Some("nonzero solution on a domain where the Pohozaev identity forbids one".into());
            }
            out.pohozaev = Some(poh);
            out.solution = Some(field);
        }
        Err(Error::Divergence { reason, iterate, history }) => {
            out.residual_norm = history.last().copied().unwrap_or(f64::NAN);
            out.iterations = history.len().saturating_sub(1);
            out.failure = Some(reason);
            if let Ok(field) = unk.to_field(&iterate) {
                out.solution_norm = l2_norm(&field)?;
                out.radiality_measure = radiality_measure(&field)?;
                // Diagnostic only: the identity need not hold off a solution.
                if let Ok(poh) = pohozaev_residual(&field, lambda, nl, 2, 1e-6) {
                    out.pohozaev_residual = Some(poh.residual);
                    out.pohozaev = Some(poh);
                }
            }
        }
        Err(e) => {
            out.failure = Some(e.to_string());
        }
    }
    Ok(out)
}

/// Flags nonzero radial finds for nonlinearities whose primitive never
/// exceeds 0: those contradict radial nonexistence on annuli.
fn flag_radial(out: &mut SearchOutcome, nl: &Nonlinearity, radial_threshold: f64) {
    if out.converged && out.nonzero && nl.sup_primitive() <= 0.0 && out.radiality_measure <= radial_threshold {
        out.anomaly = Some(format!(
            "radial nonzero solution (radiality {:.3e}) contradicts radial nonexistence",
            out.radiality_measure
        ));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVerdict {
    NonzeroSolutionFound,
    NoNonzeroFoundInProtocol,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub lambda1: f64,
    pub threshold: f64,
    pub lambdas: Vec<f64>,
    pub seed_corpus_version: u32,
    pub seeds: Vec<String>,
    pub outcomes: Vec<SearchOutcome>,
    pub nonzero_finds: usize,
    pub anomalies: usize,
    pub verdict: SweepVerdict,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub tol: f64,
    /// Radiality at or below this value counts as radial.
    pub radial_threshold: f64,
    /// Keep solution fields in the outcomes (memory heavy on long sweeps).
    pub keep_solutions: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            radial_threshold: 1e-3,
            keep_solutions: false,
        }
    }
}

/// Evenly spaced λ from `start` to `end` inclusive. At each λ every seed runs
/// (concurrently), then every nonzero find from the previous λ is continued.
/// The verdict never claims nonexistence.
pub fn continuation_sweep(
    grid: &Grid2D,
    nl: &Nonlinearity,
    lambda_start: f64,
    lambda_end: f64,
    steps: usize,
    seeds: &[SeedSpec],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if !(lambda_start < lambda_end) || lambda_start <= 0.0 {
        return Err(Error::invalid("need 0 < lambda_start < lambda_end"));
    }
    if steps < 2 {
        return Err(Error::invalid("at least 2 sweep steps"));
    }
    let l1 = lambda1(grid)?;
    let fields: Vec<(String, ScalarField)> = seeds
        .iter()
        .map(|s| Ok((s.to_string(), s.field(grid)?)))
        .collect::<Result<_>>()?;
    let lambdas: Vec<f64> = (0..steps)
        .map(|k| lambda_start + (lambda_end - lambda_start) * k as f64 / (steps - 1) as f64)
        .collect();
    let mut outcomes = Vec::new();
    let mut carried: Vec<(String, ScalarField)> = Vec::new();
    for &lambda in &lambdas {
        let mut row: Vec<SearchOutcome> = fields
            .par_iter()
            .chain(carried.par_iter())
            .map(|(label, f)| newton_search(grid, lambda, nl, f, label, opts.tol))
            .collect::<Result<_>>()?;
        carried.clear();
        for out in &mut row {
            flag_radial(out, nl, opts.radial_threshold);
            if out.converged && out.nonzero {
                if let Some(sol) = &out.solution {
                    let label = if out.seed.starts_with("continued:") {
                        out.seed.clone()
                    } else {
                        format!("continued:{}", out.seed)
                    };
                    carried.push((label, sol.clone()));
                }
            }
            if !opts.keep_solutions {
                out.solution = None;
            }
        }
        outcomes.extend(row);
    }
    let nonzero_finds = outcomes.iter().filter(|o| o.converged && o.nonzero).count();
    let anomalies = outcomes.iter().filter(|o| o.anomaly.is_some()).count();
    Ok(SweepReport {
        lambda1: l1.value,
        threshold: 3.0 * l1.value,
        lambdas,
        seed_corpus_version: SEED_CORPUS_VERSION,
        seeds: seeds.iter().map(|s| s.to_string()).collect(),
        outcomes,
        nonzero_finds,
        anomalies,
        verdict: if nonzero_finds > 0 {
            SweepVerdict::NonzeroSolutionFound
        } else {
            SweepVerdict::NoNonzeroFoundInProtocol
        },
    })
}

/// Follows one solution through `lambdas`, each step seeded by the last.
pub fn continue_branch(grid: &Grid2D, nl: &Nonlinearity, lambdas: &[f64], start: &ScalarField, tol: f64) -> Result<Vec<SearchOutcome>> {
    let mut current = start.clone();
    let mut out = Vec::with_capacity(lambdas.len());
    for (k, &lambda) in lambdas.iter().enumerate() {
        let o = newton_search(grid, lambda, nl, &current, &format!("branch:{k}"), tol)?;
        match &o.solution {
            Some(s) if o.converged => current = s.clone(),
            _ => {
                out.push(o);
                break;
            }
        }
        out.push(o);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_grid() -> Grid2D {
        Grid2D::polar_annulus(1.0, 2.0, 17, 32).unwrap()
    }

    #[test]
    fn seed_specs_round_trip() {
        for s in DEFAULT_SEEDS {
            let spec: SeedSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), *s);
        }
        assert_eq!("radial:0.5pi".parse::<SeedSpec>().unwrap(), SeedSpec::Radial { amp: 0.5 * PI });
        for bad in ["", "mode:0:1", "mode:x:1", "radial", "radial:abc", "random:-1:1", "radial:inf", "zero:1"] {
            assert!(bad.parse::<SeedSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn zero_seed_stays_trivial() {
        let g = small_grid();
        let o = newton_search(&g, 20.0, &Nonlinearity::neg_sine(), &ScalarField::zeros(g), "zero", 1e-8).unwrap();
        assert!(o.converged && !o.nonzero);
        assert_eq!(o.solution_norm, 0.0);
    }

    #[test]
    fn logistic_control_finds_positive_solution() {
        let g = small_grid();
        let l1 = lambda1(&g).unwrap().value;
        let nl = Nonlinearity::logistic();
        let seed = SeedSpec::Radial { amp: 1.0 }.field(&g).unwrap();
        let o = newton_search(&g, 4.0 * l1, &nl, &seed, "radial:1", 1e-8).unwrap();
        assert!(o.converged && o.nonzero);
        assert!(o.residual_norm <= 1e-8);
        assert!(o.pohozaev_residual.unwrap() < 0.1);
    }

    #[test]
    fn below_three_lambda1_only_trivial() {
        let g = small_grid();
        let l1 = lambda1(&g).unwrap().value;
        let rep = continuation_sweep(&g, &Nonlinearity::neg_sine(), 1.0, 2.9 * l1, 3, &default_seeds(), &SweepOptions::default())
            .unwrap();
        assert_eq!(rep.verdict, SweepVerdict::NoNonzeroFoundInProtocol);
        for o in rep.outcomes.iter().filter(|o| o.converged) {
            assert!(o.solution_norm <= 1e-8);
        }
    }

    #[test]
    fn branch_is_tracked() {
        let g = small_grid();
        let l1 = lambda1(&g).unwrap().value;
        let nl = Nonlinearity::logistic();
        let seed = SeedSpec::Radial { amp: 1.0 }.field(&g).unwrap();
        let planted = newton_search(&g, 3.0 * l1, &nl, &seed, "plant", 1e-10).unwrap().solution.unwrap();
        let lambdas: Vec<f64> = (0..10).map(|k| (3.0 + 0.2 * k as f64) * l1).collect();
        let branch = continue_branch(&g, &nl, &lambdas, &planted, 1e-8).unwrap();
        assert_eq!(branch.len(), 10);
        assert!(branch.iter().all(|o| o.converged && o.nonzero));
        let norms: Vec<f64> = branch.iter().map(|o| o.solution_norm).collect();
        assert!(norms.windows(2).all(|w| w[1] > w[0]), "{norms:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn seed_display_parses_back(k in 1u32..=64, seed in 0u64..1000, c in -8.0..8.0f64) {
            for spec in [SeedSpec::Radial { amp: c }, SeedSpec::Mode { k, amp: c }, SeedSpec::Random { seed, amp: c * PI }] {
                let back: SeedSpec = spec.to_string().parse().unwrap();
                let (SeedSpec::Radial { amp: x } | SeedSpec::Mode { amp: x, .. } | SeedSpec::Random { amp: x, .. }) = back else {
                    unreachable!()
                };
                let (SeedSpec::Radial { amp: y } | SeedSpec::Mode { amp: y, .. } | SeedSpec::Random { amp: y, .. }) = spec else {
                    unreachable!()
                };
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
