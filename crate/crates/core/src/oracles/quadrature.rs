//! Quadrature references for the conjugate posterior, mission survival and
//! the full hierarchical posterior with a hyperprior.
//!
//! The code here works from the likelihood and prior densities directly and
//! never calls the closed-form conjugate update.

use serde::{Deserialize, Serialize};

use super::grid::HyperPrior;
use super::{grouped_counts, grouped_log_marginal};
use crate::eb::{
    unit_log_marginal, HyperParams, ObservationSet, PosteriorParams, PriorFamily, UnitCounts,
    UnitData,
};
use crate::error::{Error, Result};

/// Quadrature nodes used for posterior moments.
pub const QUADRATURE_POINTS: usize = 1000;
/// Points on the Θ grid of a discretized posterior.
pub const THETA_POINTS: usize = 1000;
/// Cells whose log weight is this far below the best cell are dropped.
const LOG_WEIGHT_CUTOFF: f64 = 50.0;

/// Log of p(x|Θ) p(Θ|Φ) up to a constant, in the unconstrained coordinate
/// `z` (logit of `p` or log of `λ`), Jacobian included.
fn log_integrand(counts: &UnitCounts, phi: &HyperParams, z: f64) -> f64 {
    match *counts {
        UnitCounts::Demands { trials, successes } => {
            // ln p and ln(1-p) for p = logistic(z), computed without cancellation.
            let ln_p = -(-z).exp().ln_1p();
            let ln_q = -z.exp().ln_1p();
            let s = successes as f64;
            let f = (trials - successes) as f64;
            (phi.a - 1.0) * ln_p + (phi.b - 1.0) * ln_q + s * ln_p + f * ln_q + ln_p + ln_q
        }
        UnitCounts::Exposure { exposure, events } => {
            let lambda = z.exp();
            (phi.a - 1.0) * z - phi.b * lambda + events as f64 * z - lambda * exposure + z
        }
        UnitCounts::Lifetimes {
            failures,
            total_time,
        } => {
            let lambda = z.exp();
            (phi.a - 1.0) * z - phi.b * lambda + failures as f64 * z - lambda * total_time + z
        }
    }
}

fn theta_of(family: PriorFamily, z: f64) -> f64 {
    match family {
        PriorFamily::BetaBinomial => 1.0 / (1.0 + (-z).exp()),
        _ => z.exp(),
    }
}

/// Nodes and normalized weights of a trapezoid rule in `z`, placed over the
/// region where the integrand is within `e^-50` of its peak.
fn adaptive_nodes(log_f: impl Fn(f64) -> f64, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    const SPAN: f64 = 40.0;
    let coarse: Vec<(f64, f64)> = (0..=4000)
        .map(|i| {
            let z = -SPAN + 2.0 * SPAN * i as f64 / 4000.0;
            (z, log_f(z))
        })
        .collect();
    let peak = coarse
        .iter()
        .map(|p| p.1)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Quadrature(
            "integrand vanishes on the search range".into(),
        ));
    }
    let keep: Vec<usize> = (0..coarse.len())
        .filter(|&i| coarse[i].1 > peak - LOG_WEIGHT_CUTOFF)
        .collect();
    let h_coarse = 2.0 * SPAN / 4000.0;
    let lo = coarse[keep[0]].0 - h_coarse;
    let hi = coarse[*keep.last().unwrap()].0 + h_coarse;

    let h = (hi - lo) / (points - 1) as f64;
    let z: Vec<f64> = (0..points).map(|i| lo + i as f64 * h).collect();
    let log_w: Vec<f64> = z.iter().map(|&z| log_f(z)).collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_w
        .iter()
        .enumerate()
        .map(|(i, lw)| {
            let end = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            end * (lw - top).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok((z, w))
}

/// Posterior mean and variance of Θ for one unit under prior `phi`, by
/// quadrature of likelihood times prior.
pub fn posterior_moments_quadrature(
    family: PriorFamily,
    phi: &HyperParams,
    unit: &UnitData,
    points: usize,
) -> Result<(f64, f64)> {
    if unit.family() != family {
        return Err(Error::FamilyMismatch(format!("unit {:?}", unit.id)));
    }
    let (z, w) = adaptive_nodes(|z| log_integrand(&unit.counts, phi, z), points)?;
    let theta: Vec<f64> = z.iter().map(|&z| theta_of(family, z)).collect();
    let mean: f64 = theta.iter().zip(&w).map(|(t, w)| t * w).sum();
    let var: f64 = theta
        .iter()
        .zip(&w)
        .map(|(t, w)| (t - mean).powi(2) * w)
        .sum();
    Ok((mean, var))
}

/// `E[exp(-λ t)]` for `λ ~ Gamma(shape, rate)` by quadrature.
pub fn mission_survival_quadrature(shape: f64, rate: f64, mission_time: f64) -> Result<f64> {
    let log_f = |z: f64| shape * z - rate * z.exp();
    let (z, w) = adaptive_nodes(log_f, QUADRATURE_POINTS)?;
    Ok(z.iter()
        .zip(&w)
        .map(|(z, w)| (-z.exp() * mission_time).exp() * w)
        .sum())
}

/// A posterior over Θ discretized on equally spaced grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePosterior {
    pub theta: Vec<f64>,
    /// Probability of each grid cell; sums to one.
    pub mass: Vec<f64>,
}

impl DiscretePosterior {
    pub fn spacing(&self) -> f64 {
        if self.theta.len() < 2 {
            return 1.0;
        }
        self.theta[1] - self.theta[0]
    }

    /// Density values at the grid points.
    pub fn density(&self) -> Vec<f64> {
        let h = self.spacing();
        self.mass.iter().map(|m| m / h).collect()
    }

    pub fn total_variation(&self, other: &DiscretePosterior) -> f64 {
        0.5 * self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }
}

/// Θ grid of cell midpoints on `(0, upper)`.
fn midpoints(upper: f64) -> Vec<f64> {
    let h = upper / THETA_POINTS as f64;
    (0..THETA_POINTS).map(|i| (i as f64 + 0.5) * h).collect()
}

/// Beta or Gamma log density (unnormalized) over a grid, normalized to sum 1.
fn discretize(family: PriorFamily, params: [f64; 2], theta: &[f64], out: &mut [f64]) {
    let [a, b] = params;
    for (o, &t) in out.iter_mut().zip(theta) {
        *o = match family {
            PriorFamily::BetaBinomial => (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p(),
            _ => (a - 1.0) * t.ln() - b * t,
        };
    }
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - top).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Discretizes a conjugate posterior on the given Θ grid.
pub fn discretize_conjugate(post: &PosteriorParams, theta: &[f64]) -> DiscretePosterior {
    let mut mass = vec![0.0; theta.len()];
    discretize(post.family, post.params, theta, &mut mass);
    DiscretePosterior {
        theta: theta.to_vec(),
        mass,
    }
}

/// Posterior weights over the hyperprior grid, `∝ p(x|Φ) p(Φ)`.
#[derive(Debug, Clone)]
pub struct HierarchicalMixture {
    family: PriorFamily,
    obs: ObservationSet,
    /// Retained cells with normalized weights, in grid order.
    cells: Vec<(HyperParams, f64)>,
    log_weights: Vec<f64>,
}

impl HierarchicalMixture {
    pub fn new(obs: &ObservationSet, hyperprior: &HyperPrior) -> Result<Self> {
        let all = hyperprior.cells();
        // Flat in log-parameters: every cell carries the same prior mass.
        let groups = grouped_counts(obs);
        let log_w: Vec<f64> = all
            .iter()
            .map(|phi| grouped_log_marginal(&groups, phi))
            .collect();
        let top = log_w
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Quadrature(
                "every hyperprior cell has zero marginal likelihood".into(),
            ));
        }
        let mut cells = Vec::new();
        let mut kept_log = Vec::new();
        for (phi, lw) in all.into_iter().zip(log_w) {
            if lw.is_finite() && lw > top - LOG_WEIGHT_CUTOFF {
                cells.push((phi, (lw - top).exp()));
                kept_log.push(lw);
            }
        }
        let total: f64 = cells.iter().map(|c| c.1).sum();
        cells.iter_mut().for_each(|c| c.1 /= total);
        Ok(Self {
            family: obs.family(),
            obs: obs.clone(),
            cells,
            log_weights: kept_log,
        })
    }

    pub fn cells(&self) -> &[(HyperParams, f64)] {
        &self.cells
    }

    /// Posterior mean of each hyperparameter over the retained cells.
    pub fn hyperparameter_mean(&self) -> [f64; 2] {
        self.cells.iter().fold([0.0, 0.0], |acc, (phi, w)| {
            [acc[0] + w * phi.a, acc[1] + w * phi.b]
        })
    }

    /// Θ grid for `unit`: `(0, 1)` for probabilities; for rates, up to twelve
    /// posterior standard deviations past the largest component mean.
    pub fn theta_grid(&self, unit: &UnitData) -> Vec<f64> {
        match self.family {
            PriorFamily::BetaBinomial => midpoints(1.0),
            _ => {
                let (k, t) = match unit.counts {
                    UnitCounts::Exposure { exposure, events } => (events as f64, exposure),
                    UnitCounts::Lifetimes {
                        failures,
                        total_time,
                    } => (failures as f64, total_time),
                    UnitCounts::Demands { .. } => unreachable!("checked by caller"),
                };
                let upper = self
                    .cells
                    .iter()
                    .map(|(phi, _)| {
                        let (shape, rate) = (phi.a + k, phi.b + t);
                        shape / rate + 12.0 * shape.sqrt() / rate
                    })
                    .fold(0.0, f64::max);
                midpoints(upper)
            }
        }
    }

    /// Mixture of per-cell posteriors for `unit` on `theta`. If `unit` is not
    /// part of the fitted data its own marginal joins the cell weights.
    pub fn posterior_on(&self, unit: &UnitData, theta: &[f64]) -> Result<DiscretePosterior> {
        if unit.family() != self.family {
            return Err(Error::FamilyMismatch(format!("unit {:?}", unit.id)));
        }
        let weights: Vec<f64> = match self.obs.unit(&unit.id) {
            Some(u) if u == unit => self.cells.iter().map(|c| c.1).collect(),
            Some(_) => {
                return Err(Error::InvalidObservation(format!(
                    "unit {:?} differs from the fitted unit with the same id",
                    unit.id
                )))
            }
            None => {
                let lw: Vec<f64> = self
                    .cells
                    .iter()
                    .zip(&self.log_weights)
                    .map(|((phi, _), lw)| lw + unit_log_marginal(&unit.counts, phi.a, phi.b))
                    .collect();
                let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = lw.iter().map(|v| (v - top).exp()).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect()
            }
        };

        let mut mass = vec![0.0; theta.len()];
        let mut component = vec![0.0; theta.len()];
        for ((phi, _), w) in self.cells.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let params = match unit.counts {
                UnitCounts::Demands { trials, successes } => [
                    phi.a + successes as f64,
                    phi.b + (trials - successes) as f64,
                ],
                UnitCounts::Exposure { exposure, events } => {
                    [phi.a + events as f64, phi.b + exposure]
                }
                UnitCounts::Lifetimes {
                    failures,
                    total_time,
                } => [phi.a + failures as f64, phi.b + total_time],
            };
            discretize(self.family, params, theta, &mut component);
            for (m, c) in mass.iter_mut().zip(&component) {
                *m += w * c;
            }
        }
        let total: f64 = mass.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Quadrature("mixture underflowed".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(DiscretePosterior {
            theta: theta.to_vec(),
            mass,
        })
    }

    pub fn posterior(&self, unit: &UnitData) -> Result<DiscretePosterior> {
        let theta = self.theta_grid(unit);
        self.posterior_on(unit, &theta)
    }
}

/// Full hierarchical posterior of one unit's Θ: the conjugate posteriors at
/// each hyperprior cell, mixed with weights `p(x|Φ) p(Φ)`.
pub fn hierarchical_posterior_quadrature(
    obs: &ObservationSet,
    unit: &UnitData,
    hyperprior: &HyperPrior,
) -> Result<DiscretePosterior> {
    HierarchicalMixture::new(obs, hyperprior)?.posterior(unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eb::posterior;

    #[test]
    fn beta_moments_match_closed_form() {
        let phi = HyperParams::new(2.0, 3.0).unwrap();
        let unit = UnitData::demands("u", 12, 4).unwrap();
        let (m, v) =
            posterior_moments_quadrature(PriorFamily::BetaBinomial, &phi, &unit, 1000).unwrap();
        let (a, b) = (6.0, 11.0);
        assert!((m - a / (a + b)).abs() < 1e-12);
        assert!((v - a * b / ((a + b) * (a + b) * (a + b + 1.0))).abs() < 1e-13);
    }

    #[test]
    fn sharp_posteriors_are_resolved() {
        let phi = HyperParams::new(900.0, 900.0).unwrap();
        let unit = UnitData::demands("u", 5000, 2500).unwrap();
        let (m, v) =
            posterior_moments_quadrature(PriorFamily::BetaBinomial, &phi, &unit, 1000).unwrap();
        let (a, b) = (3400.0f64, 3400.0f64);
        assert!((m - 0.5).abs() < 1e-12);
        let exact = a * b / ((a + b).powi(2) * (a + b + 1.0));
        assert!(((v - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn gamma_mission_survival() {
        let q = mission_survival_quadrature(5.0, 250.0, 100.0).unwrap();
        let exact = (250.0f64 / 350.0).powi(5);
        assert!((q - exact).abs() < 1e-12);
        assert!((mission_survival_quadrature(5.0, 250.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
    }

    fn toy_set() -> ObservationSet {
        ObservationSet::new(
            PriorFamily::BetaBinomial,
            [(20, 3), (20, 9), (20, 6), (20, 14), (20, 5)]
                .iter()
                .enumerate()
                .map(|(i, &(n, s))| UnitData::demands(format!("u{i}"), n, s).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn point_hyperprior_collapses_to_conjugate() {
        let obs = toy_set();
        let unit = obs.units()[1].clone();
        let phi = HyperParams::new(2.0, 5.0).unwrap();
        let hier =
            hierarchical_posterior_quadrature(&obs, &unit, &HyperPrior::point(&phi).unwrap())
                .unwrap();
        let eb = discretize_conjugate(
            &posterior(PriorFamily::BetaBinomial, &phi, &unit).unwrap(),
            &hier.theta,
        );
        let max_diff = hier
            .density()
            .iter()
            .zip(eb.density())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-8, "{max_diff}");
    }

    #[test]
    fn single_cell_matches_point_at_center() {
        let obs = toy_set();
        let unit = obs.units()[0].clone();
        let cell = HyperPrior::single_cell([1.0, 4.0], [4.0, 16.0]).unwrap();
        let point = HyperPrior::point(&HyperParams::new(2.0, 8.0).unwrap()).unwrap();
        let a = hierarchical_posterior_quadrature(&obs, &unit, &cell).unwrap();
        let b = hierarchical_posterior_quadrature(&obs, &unit, &point).unwrap();
        assert!(a.total_variation(&b) < 1e-12);
    }

    #[test]
    fn mixture_is_normalized_and_handles_new_units() {
        let obs = toy_set();
        let grid = HyperPrior::working_box(40).unwrap();
        let mix = HierarchicalMixture::new(&obs, &grid).unwrap();
        let fresh = UnitData::demands("new", 10, 10).unwrap();
        for unit in [obs.units()[2].clone(), fresh] {
            let p = mix.posterior(&unit).unwrap();
            assert!((p.mass.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        let clash = UnitData::demands("u0", 20, 4).unwrap();
        assert!(mix.posterior(&clash).is_err());
    }

    #[test]
    fn gamma_grid_covers_posterior() {
        let obs = ObservationSet::new(
            PriorFamily::GammaExponential,
            vec![
                UnitData::lifetimes("a", 3, 100.0).unwrap(),
                UnitData::lifetimes("b", 7, 120.0).unwrap(),
                UnitData::lifetimes("c", 1, 80.0).unwrap(),
            ],
        )
        .unwrap();
        let phi = HyperParams::new(3.0, 60.0).unwrap();
        let unit = obs.units()[1].clone();
        let hier =
            hierarchical_posterior_quadrature(&obs, &unit, &HyperPrior::point(&phi).unwrap())
                .unwrap();
        let eb = discretize_conjugate(
            &posterior(PriorFamily::GammaExponential, &phi, &unit).unwrap(),
            &hier.theta,
        );
        assert!(hier.total_variation(&eb) < 1e-12);
        // Grid mean agrees with the closed form posterior mean.
        let mean: f64 = hier.theta.iter().zip(&hier.mass).map(|(t, m)| t * m).sum();
        assert!((mean - 10.0 / 180.0).abs() < 1e-6, "{mean}");
    }
}
