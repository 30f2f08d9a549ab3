//! Physical system description and the parameter pieces derived from it.

use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{ModelShape, BUSY, CHANNEL_STATES, IDLE, ROW_SUM_TOL};
use crate::error::{HimmError, Result};

/// Physical parameters of the PU link and its energy source.
///
/// All powers are linear. `power_of_level[e]` is the per-sample transmit
/// signal variance when the PU holds energy level index `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PhysicalConfig {
    /// Lowest level value that supports a reliable transmission.
    pub E_h: u32,
    /// Probability that the PU has no data in a slot.
    pub P_0: f64,
    /// Samples per slot.
    pub N: usize,
    pub noise_var: f64,
    pub channel_gain: f64,
    pub power_of_level: Vec<f64>,
    /// Optional Markov matrix of the data-availability process, indexed
    /// `[previous activity][next activity]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_persistence: Option<[[f64; 2]; 2]>,
}

impl PhysicalConfig {
    pub fn validate(&self, shape: &ModelShape) -> Result<()> {
        let bad = |msg: String| Err(HimmError::Config(msg));
        if !(0.0..=1.0).contains(&self.P_0) {
            return bad(format!("P_0 = {} outside [0, 1]", self.P_0));
        }
        if self.N == 0 {
            return bad("N must be at least 1".into());
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return bad(format!("noise_var = {} must be positive", self.noise_var));
        }
        if !self.channel_gain.is_finite() {
            return bad("channel_gain must be finite".into());
        }
        if self.power_of_level.len() != shape.levels {
            return Err(HimmError::dim("power_of_level", shape.levels, self.power_of_level.len()));
        }
        if self.power_of_level.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return bad("power_of_level entries must be nonnegative".into());
        }
        if self.power_of_level.windows(2).any(|w| w[1] < w[0]) {
            return bad("power_of_level must be nondecreasing in the level".into());
        }
        if self.E_h < shape.base || (self.E_h - shape.base) as usize != shape.insufficient {
            return bad(format!("E_h = {} inconsistent with L0 = {:?}", self.E_h, shape.insufficient_values()));
        }
        if let Some(p) = &self.data_persistence {
            for row in p {
                if row.iter().any(|v| !(0.0..=1.0).contains(v)) || (row[0] + row[1] - 1.0).abs() > ROW_SUM_TOL {
                    return bad(format!("data_persistence row {row:?} is not a distribution"));
                }
            }
        }
        Ok(())
    }

    /// Received per-sample signal power at level index `e`.
    pub fn received_power(&self, e: usize) -> f64 {
        self.channel_gain * self.channel_gain * self.power_of_level[e]
    }

    /// Long-run probability that data is available.
    pub fn data_availability(&self) -> f64 {
        match &self.data_persistence {
            Some(p) => {
                let (up, down) = (p[0][1], p[1][0]);
                if up + down > 0.0 {
                    up / (up + down)
                } else {
                    1.0 - self.P_0
                }
            }
            None => 1.0 - self.P_0,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HimmError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HimmError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Channel transition family `B` and initial channel law `pi_C` implied by
/// the energy threshold and the data-availability process.
///
/// Insufficient levels force the channel idle. Above the threshold the PU is
/// busy exactly when it has data; without a persistence matrix data arrives
/// independently per slot with probability `1 - P_0`.
pub fn build_b_from_scheme(shape: &ModelShape, phys: &PhysicalConfig) -> Result<(Array3<f64>, Array2<f64>)> {
    if !(0.0..=1.0).contains(&phys.P_0) {
        return Err(HimmError::Config(format!("P_0 = {} outside [0, 1]", phys.P_0)));
    }
    phys.validate(shape)?;
    let l = shape.levels;
    let m = CHANNEL_STATES;
    let mut b = Array3::zeros((l, m, m));
    let mut pi_c = Array2::zeros((l, m));
    let busy_stat = phys.data_availability();
    for q in 0..l {
        if shape.is_insufficient(q) {
            for i in 0..m {
                b[[q, i, IDLE]] = 1.0;
            }
            pi_c[[q, IDLE]] = 1.0;
            continue;
        }
        for i in 0..m {
            let busy = match &phys.data_persistence {
                Some(p) => p[i][BUSY],
                None => 1.0 - phys.P_0,
            };
            b[[q, i, BUSY]] = busy;
            b[[q, i, IDLE]] = 1.0 - busy;
        }
        pi_c[[q, BUSY]] = busy_stat;
        pi_c[[q, IDLE]] = 1.0 - busy_stat;
    }
    Ok((b, pi_c))
}

/// Gaussian moments `(mu, sigma2)` of the slot energy statistic.
///
/// `Y` is a sum of `N` squared zero-mean Gaussians of variance `v`, whose mean
/// is `N v` and variance `2 N v^2`; `v` is the noise variance when idle and
/// noise plus received signal power when busy.
pub fn emission_moments_from_physical(phys: &PhysicalConfig, shape: &ModelShape) -> (Array2<f64>, Array2<f64>) {
    let l = shape.levels;
    let n = phys.N as f64;
    let mut mu = Array2::zeros((CHANNEL_STATES, l));
    let mut sigma2 = Array2::zeros((CHANNEL_STATES, l));
    for e in 0..l {
        let idle = phys.noise_var;
        let busy = phys.noise_var + phys.received_power(e);
        mu[[IDLE, e]] = n * idle;
        sigma2[[IDLE, e]] = 2.0 * n * idle * idle;
        mu[[BUSY, e]] = n * busy;
        sigma2[[BUSY, e]] = 2.0 * n * busy * busy;
    }
    (mu, sigma2)
}
