use serde::{Deserialize, Serialize};

use super::marginal::{log_marginal_grad_unchecked, log_marginal_unchecked};
use super::{HyperParams, ObservationSet, PriorFamily, BOX_HIGH, BOX_LOW};
use crate::error::{Error, Result};

/// Stop when the projected gradient norm (log coordinates) falls below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Stop when an accepted step changes the objective by less than this.
pub const VALUE_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 500;
const HESSIAN_STEP: f64 = 1e-5;
const MAX_STEP: f64 = 3.0;
const BOUND_EPS: f64 = 1e-9;

/// Method-of-moments starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentsInit {
    pub params: HyperParams,
    /// Moments were degenerate (zero variance, infeasible) and `(1, 1)` was used.
    pub fallback: bool,
}

/// Matches the mean and unbiased sample variance of the per-unit empirical
/// rates to the prior's moments. Units without information (zero trials)
/// are skipped.
pub fn moments_init(obs: &ObservationSet) -> Result<MomentsInit> {
    if obs.len() < 2 {
        return Err(Error::InsufficientUnits(obs.len()));
    }
    let rates: Vec<f64> = obs
        .units()
        .iter()
        .filter_map(|u| u.counts.empirical_rate())
        .collect();
    let fallback = MomentsInit {
        params: HyperParams { a: 1.0, b: 1.0 },
        fallback: true,
    };
    if rates.len() < 2 {
        return Ok(fallback);
    }
    let j = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / j;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (j - 1.0);
    if var.is_nan() || var <= 0.0 || mean <= 0.0 {
        return Ok(fallback);
    }
    let (a, b) = match obs.family() {
        PriorFamily::BetaBinomial => {
            if mean >= 1.0 {
                return Ok(fallback);
            }
            let concentration = mean * (1.0 - mean) / var - 1.0;
            if concentration <= 0.0 {
                return Ok(fallback);
            }
            (mean * concentration, (1.0 - mean) * concentration)
        }
        PriorFamily::GammaPoisson | PriorFamily::GammaExponential => {
            (mean * mean / var, mean / var)
        }
    };
    if !(a.is_finite() && b.is_finite()) {
        return Ok(fallback);
    }
    Ok(MomentsInit {
        params: HyperParams::clamped(a, b),
        fallback: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: PriorFamily,
    pub estimate: HyperParams,
    /// Log marginal likelihood at `estimate`.
    pub log_marginal: f64,
    pub init: HyperParams,
    pub init_fallback: bool,
    pub converged: bool,
    /// Some coordinate of `estimate` sits on the working-box boundary.
    pub at_bound: bool,
    pub iterations: usize,
    /// Norm of the projected gradient at `estimate`, log coordinates.
    pub gradient_norm: f64,
}

struct Objective<'a> {
    obs: &'a ObservationSet,
}

impl Objective<'_> {
    fn value(&self, z: [f64; 2]) -> f64 {
        log_marginal_unchecked(self.obs, z[0].exp(), z[1].exp())
    }

    fn grad(&self, z: [f64; 2]) -> [f64; 2] {
        log_marginal_grad_unchecked(self.obs, z[0].exp(), z[1].exp())
    }

    /// Central differences of the analytic gradient, symmetrized.
    fn hessian(&self, z: [f64; 2]) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            let mut up = z;
            let mut dn = z;
            up[i] += HESSIAN_STEP;
            dn[i] -= HESSIAN_STEP;
            let (gu, gd) = (self.grad(up), self.grad(dn));
            for j in 0..2 {
                h[j][i] = (gu[j] - gd[j]) / (2.0 * HESSIAN_STEP);
            }
        }
        let off = 0.5 * (h[0][1] + h[1][0]);
        h[0][1] = off;
        h[1][0] = off;
        h
    }
}

/// Type-II maximum likelihood: maximizes the log marginal likelihood over the
/// working box in log-parameter coordinates, starting from [`moments_init`].
///
/// A projected Newton iteration with backtracking; coordinates pinned at a
/// bound with the gradient pointing outward are held fixed.
pub fn fit_hyperparams(obs: &ObservationSet) -> Result<FitResult> {
    let init = moments_init(obs)?;
    let (lo, hi) = (BOX_LOW.ln(), BOX_HIGH.ln());
    let clamp = |z: [f64; 2]| [z[0].clamp(lo, hi), z[1].clamp(lo, hi)];
    let objective = Objective { obs };

    let mut z = clamp([init.params.a.ln(), init.params.b.ln()]);
    let mut f = objective.value(z);
    if !f.is_finite() {
        return Err(Error::NonFinite(format!(
            "log marginal is {f} at the moments estimate"
        )));
    }

    let mut converged = false;
    let mut iterations = 0;
    let mut pg_norm;
    loop {
        let g = objective.grad(z);
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient {g:?}")));
        }
        let free = [0, 1].map(|i| {
            !((z[i] <= lo + BOUND_EPS && g[i] < 0.0) || (z[i] >= hi - BOUND_EPS && g[i] > 0.0))
        });
        pg_norm = (0..2)
            .filter(|&i| free[i])
            .map(|i| g[i] * g[i])
            .sum::<f64>()
            .sqrt();
        if pg_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let direction = newton_direction(&objective.hessian(z), &g, free);
        let Some((z_new, f_new)) = line_search(&objective, z, f, &g, direction, clamp) else {
            // No ascent is numerically possible from here.
            converged = true;
            break;
        };
        let change = f_new - f;
        z = z_new;
        f = f_new;
        if change.abs() < VALUE_TOLERANCE {
            let g = objective.grad(z);
            pg_norm = projected_norm(&g, z, lo, hi);
            converged = true;
            break;
        }
    }

    let at_bound = z
        .iter()
        .any(|&x| x <= lo + BOUND_EPS || x >= hi - BOUND_EPS);
    Ok(FitResult {
        family: obs.family(),
        estimate: HyperParams::clamped(z[0].exp(), z[1].exp()),
        log_marginal: f,
        init: init.params,
        init_fallback: init.fallback,
        converged,
        at_bound,
        iterations,
        gradient_norm: pg_norm,
    })
}

fn projected_norm(g: &[f64; 2], z: [f64; 2], lo: f64, hi: f64) -> f64 {
    (0..2)
        .filter(|&i| {
            !((z[i] <= lo + BOUND_EPS && g[i] < 0.0) || (z[i] >= hi - BOUND_EPS && g[i] > 0.0))
        })
        .map(|i| g[i] * g[i])
        .sum::<f64>()
        .sqrt()
}

/// Newton step on the free coordinates when the Hessian block is negative
/// definite, otherwise plain gradient ascent. Capped in length.
fn newton_direction(h: &[[f64; 2]; 2], g: &[f64; 2], free: [bool; 2]) -> [f64; 2] {
    let mut d = match free {
        [true, true] => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if h[0][0] < 0.0 && det > 0.0 {
                // Solve H d = -g.
                [
                    -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                    -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
                ]
            } else {
                *g
            }
        }
        [true, false] if h[0][0] < 0.0 => [-g[0] / h[0][0], 0.0],
        [false, true] if h[1][1] < 0.0 => [0.0, -g[1] / h[1][1]],
        _ => [
            if free[0] { g[0] } else { 0.0 },
            if free[1] { g[1] } else { 0.0 },
        ],
    };
    // A Newton step may point downhill if the Hessian estimate is poor.
    if d[0] * g[0] + d[1] * g[1] <= 0.0 {
        d = [
            if free[0] { g[0] } else { 0.0 },
            if free[1] { g[1] } else { 0.0 },
        ];
    }
    let len = d[0].hypot(d[1]);
    if len > MAX_STEP {
        d = [d[0] * MAX_STEP / len, d[1] * MAX_STEP / len];
    }
    d
}

fn line_search(
    objective: &Objective<'_>,
    z: [f64; 2],
    f: f64,
    g: &[f64; 2],
    d: [f64; 2],
    clamp: impl Fn([f64; 2]) -> [f64; 2],
) -> Option<([f64; 2], f64)> {
    let mut t = 1.0;
    for _ in 0..60 {
        let candidate = clamp([z[0] + t * d[0], z[1] + t * d[1]]);
        let f_new = objective.value(candidate);
        let predicted = g[0] * (candidate[0] - z[0]) + g[1] * (candidate[1] - z[1]);
        if f_new.is_finite() && f_new > f && f_new - f >= 1e-4 * predicted {
            return Some((candidate, f_new));
        }
        t *= 0.5;
    }
    None
}
