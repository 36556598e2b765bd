use statrs::function::gamma::{digamma, ln_gamma};

use super::{HyperParams, ObservationSet, UnitCounts};
use crate::error::{Error, Result};

fn ln_beta(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Log marginal probability of one unit's data with Θ integrated out.
pub(crate) fn unit_log_marginal(counts: &UnitCounts, a: f64, b: f64) -> f64 {
    match *counts {
        UnitCounts::Demands { trials, successes } => {
            let n = trials as f64;
            let s = successes as f64;
            ln_choose(trials, successes) + ln_beta(a + s, b + n - s) - ln_beta(a, b)
        }
        UnitCounts::Exposure { exposure, events } => {
            // Negative binomial pmf.
            let k = events as f64;
            let mut v = ln_gamma(a + k) - ln_gamma(a) - ln_gamma(k + 1.0) + a * b.ln()
                - (a + k) * (b + exposure).ln();
            if events > 0 {
                v += k * exposure.ln();
            }
            v
        }
        UnitCounts::Lifetimes {
            failures,
            total_time,
        } => {
            let n = failures as f64;
            a * b.ln() + ln_gamma(a + n) - ln_gamma(a) - (a + n) * (b + total_time).ln()
        }
    }
}

/// Gradient of [`unit_log_marginal`] with respect to `(ln a, ln b)`.
fn unit_log_marginal_grad(counts: &UnitCounts, a: f64, b: f64) -> [f64; 2] {
    match *counts {
        UnitCounts::Demands { trials, successes } => {
            let n = trials as f64;
            let s = successes as f64;
            let shared = digamma(a + b) - digamma(a + b + n);
            [
                a * (digamma(a + s) - digamma(a) + shared),
                b * (digamma(b + n - s) - digamma(b) + shared),
            ]
        }
        UnitCounts::Exposure {
            exposure: t,
            events,
        } => {
            let k = events as f64;
            [
                a * (digamma(a + k) - digamma(a) + b.ln() - (b + t).ln()),
                b * (a / b - (a + k) / (b + t)),
            ]
        }
        UnitCounts::Lifetimes {
            failures,
            total_time: t,
        } => {
            let n = failures as f64;
            [
                a * (digamma(a + n) - digamma(a) + b.ln() - (b + t).ln()),
                b * (a / b - (a + n) / (b + t)),
            ]
        }
    }
}

/// Sum over units in id order, no box check.
pub(crate) fn log_marginal_unchecked(obs: &ObservationSet, a: f64, b: f64) -> f64 {
    obs.units()
        .iter()
        .map(|u| unit_log_marginal(&u.counts, a, b))
        .sum()
}

pub(crate) fn log_marginal_grad_unchecked(obs: &ObservationSet, a: f64, b: f64) -> [f64; 2] {
    obs.units().iter().fold([0.0, 0.0], |acc, u| {
        let g = unit_log_marginal_grad(&u.counts, a, b);
        [acc[0] + g[0], acc[1] + g[1]]
    })
}

/// Log marginal likelihood of the whole observation set at `phi`.
pub fn log_marginal(obs: &ObservationSet, phi: &HyperParams) -> Result<f64> {
    phi.check_box()?;
    let v = log_marginal_unchecked(obs, phi.a, phi.b);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!(
            "log marginal is {v} at ({}, {})",
            phi.a, phi.b
        )));
    }
    Ok(v)
}

/// Gradient of [`log_marginal`] in log-parameter coordinates.
pub fn log_marginal_grad(obs: &ObservationSet, phi: &HyperParams) -> Result<[f64; 2]> {
    phi.check_box()?;
    let g = log_marginal_grad_unchecked(obs, phi.a, phi.b);
    if !g.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite(format!("gradient is {g:?}")));
    }
    Ok(g)
}
