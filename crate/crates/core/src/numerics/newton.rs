//! Damped Newton iteration for square nonlinear systems.

use serde::Serialize;

use crate::error::{Error, Result};

use super::sparse::{BandLu, SparseSystem};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NewtonOptions {
    /// Stop once `‖F(u)‖∞ <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried before giving up on a direction.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            min_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonReport {
    #[serde(skip)]
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// Residual norm before the first step and after every accepted step.
    pub history: Vec<f64>,
    /// Damping factor accepted at each step.
    pub steps: Vec<f64>,
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solves `residual(u) = 0` from `u0`.
///
/// `jacobian(u)` returns the matrix part of a [`SparseSystem`]; its
/// right-hand side is ignored. A step is halved until the residual norm
/// strictly decreases; if that needs a factor below `min_step` the iteration
/// stops with [`Error::Divergence`], as it does when `max_iter` runs out.
pub fn newton_solve<R, J>(mut residual: R, mut jacobian: J, u0: Vec<f64>, opts: &NewtonOptions) -> Result<NewtonReport>
where
    R: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> SparseSystem,
{
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("Newton tolerance must be positive"));
    }
    let mut u = u0;
    let mut f = residual(&u);
    if f.len() != u.len() {
        return Err(Error::invalid(format!(
            "residual has {} components for {} unknowns",
            f.len(),
            u.len()
        )));
    }
    let mut norm = max_norm(&f);
    if !norm.is_finite() {
        return Err(Error::NonFinite {
            context: "initial residual".into(),
        });
    }
    let mut history = vec![norm];
    let mut steps = Vec::new();

    for iter in 0..=opts.max_iter {
        if norm <= opts.tol {
            return Ok(NewtonReport {
                solution: u,
                iterations: iter,
                residual_norm: norm,
                history,
                steps,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = jacobian(&u);
        if jac.dim() != u.len() {
            return Err(Error::invalid("Jacobian dimension mismatch"));
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = match BandLu::factor(&jac.assemble()?).and_then(|lu| lu.solve(&rhs)) {
            Ok(d) => d,
            Err(e) => {
                return Err(Error::Divergence {
                    reason: format!("linear solve failed ({e})"),
                    iterate: u,
                    history,
                })
            }
        };

        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let f_trial = residual(&trial);
            let n_trial = max_norm(&f_trial);
            if n_trial.is_finite() && n_trial < norm {
                u = trial;
                f = f_trial;
                norm = n_trial;
                history.push(norm);
                steps.push(t);
                break;
            }
            t *= 0.5;
            if t < opts.min_step {
                return Err(Error::Divergence {
                    reason: "damping floor reached without residual decrease".into(),
                    iterate: u,
                    history,
                });
            }
        }
    }
    Err(Error::Divergence {
        reason: "iteration limit exceeded".into(),
        iterate: u,
        history,
    })
}
