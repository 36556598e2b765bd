use serde::{Deserialize, Serialize};

use super::{grouped_counts, grouped_log_marginal};
use crate::eb::{HyperParams, ObservationSet, BOX_HIGH, BOX_LOW};
use crate::error::{Error, Result};

/// Default grid resolution per hyperparameter.
pub const DEFAULT_RESOLUTION: usize = 200;

/// A box over the two hyperparameters with a log-spaced grid of cells and a
/// prior density that is flat in log-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub low: [f64; 2],
    pub high: [f64; 2],
    pub resolution: [usize; 2],
}

impl HyperPrior {
    pub fn new(low: [f64; 2], high: [f64; 2], resolution: [usize; 2]) -> Result<Self> {
        for i in 0..2 {
            if !(BOX_LOW <= low[i] && low[i] < high[i] && high[i] <= BOX_HIGH) {
                return Err(Error::OutOfBox {
                    name: ["a", "b"][i],
                    value: if low[i] < BOX_LOW { low[i] } else { high[i] },
                    low: BOX_LOW,
                    high: BOX_HIGH,
                });
            }
            if resolution[i] < 10 {
                return Err(Error::Quadrature(format!(
                    "grid resolution {} below 10",
                    resolution[i]
                )));
            }
        }
        Ok(Self {
            low,
            high,
            resolution,
        })
    }

    /// The whole working box at `resolution` cells per dimension.
    pub fn working_box(resolution: usize) -> Result<Self> {
        Self::new([BOX_LOW; 2], [BOX_HIGH; 2], [resolution; 2])
    }

    /// A single cell spanning `[low, high]`; its center is the geometric midpoint.
    pub fn single_cell(low: [f64; 2], high: [f64; 2]) -> Result<Self> {
        let mut p = Self::new(low, high, [10, 10])?;
        p.resolution = [1, 1];
        Ok(p)
    }

    /// All prior mass on one point.
    pub fn point(phi: &HyperParams) -> Result<Self> {
        phi.check_box()?;
        Ok(Self {
            low: phi.as_array(),
            high: phi.as_array(),
            resolution: [1, 1],
        })
    }

    /// Cell centers along dimension `dim`, equally spaced in log scale.
    pub fn centers(&self, dim: usize) -> Vec<f64> {
        let (lo, hi) = (self.low[dim].ln(), self.high[dim].ln());
        let r = self.resolution[dim];
        let step = (hi - lo) / r as f64;
        (0..r)
            .map(|i| {
                (lo + (i as f64 + 0.5) * step)
                    .exp()
                    .clamp(self.low[dim], self.high[dim])
            })
            .collect()
    }

    /// Every cell center, row-major in `(a, b)`.
    pub fn cells(&self) -> Vec<HyperParams> {
        let (xs, ys) = (self.centers(0), self.centers(1));
        xs.iter()
            .flat_map(|&a| ys.iter().map(move |&b| HyperParams { a, b }))
            .collect()
    }
}

impl Default for HyperPrior {
    fn default() -> Self {
        Self {
            low: [BOX_LOW; 2],
            high: [BOX_HIGH; 2],
            resolution: [DEFAULT_RESOLUTION; 2],
        }
    }
}

/// Brute-force maximizer of the log marginal likelihood over the grid's
/// cell centers. Ties go to the first cell in row-major order.
pub fn grid_marginal_argmax(obs: &ObservationSet, grid: &HyperPrior) -> Result<(HyperParams, f64)> {
    let groups = grouped_counts(obs);
    let mut best: Option<(HyperParams, f64)> = None;
    for phi in grid.cells() {
        let v = grouped_log_marginal(&groups, &phi);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((phi, v));
        }
    }
    best.ok_or_else(|| Error::Quadrature("empty grid".into()))
}
