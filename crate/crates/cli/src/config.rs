//! Run configuration file (TOML).
//!
//! Powers are given in dB in the file and converted to linear units when the
//! scenario is built.

use std::path::{Path, PathBuf};

use himm::em::{EmOptions, WeightingMode};
use himm::eval::{banded_matrix, db_to_linear, Scenario};
use himm::model::PhysicalConfig;
use himm::{HimmError, ModelShape, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    StreamSplit,
    Joint,
}

impl From<FitMode> for WeightingMode {
    fn from(m: FitMode) -> Self {
        match m {
            FitMode::StreamSplit => WeightingMode::StreamSplit,
            FitMode::Joint => WeightingMode::Joint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ModelSection {
    pub levels: usize,
    /// Value of the lowest energy level.
    pub base: u32,
    /// Lowest level value that supports transmission.
    pub E_h: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_E: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub A: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub D: Option<Vec<Vec<f64>>>,
    /// Diagonal of the default tridiagonal `A` and `D`.
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct PhysicalSection {
    pub P_0: f64,
    pub N: usize,
    pub noise_dbw: f64,
    pub path_loss_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_persistence: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub t_train: usize,
    pub t_test: usize,
    /// SNR used by `generate`, `track` and `mi` when no parameter file is given.
    pub snr_db: f64,
    pub snr_grid_db: Vec<f64>,
    pub n_starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub fit_mode: FitMode,
    pub tau: f64,
    pub pfa_targets: Vec<f64>,
    /// Fit parameters on training data before each benchmark point.
    pub learn: bool,
    pub mi_horizon: usize,
    pub mi_trials: usize,
    pub model: ModelSection,
    pub physical: PhysicalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            t_train: 5000,
            t_test: 20_000,
            snr_db: 0.0,
            snr_grid_db: (0..9).map(|k| -10.0 + 2.5 * k as f64).collect(),
            n_starts: 15,
            tol: 1e-6,
            max_iter: 500,
            fit_mode: FitMode::StreamSplit,
            tau: 0.5,
            pfa_targets: vec![0.05, 0.1, 0.2],
            learn: false,
            mi_horizon: 10,
            mi_trials: 10_000,
            model: ModelSection { levels: 4, base: 1, E_h: 2, pi_E: None, A: None, D: None, persistence: 0.8 },
            physical: PhysicalSection { P_0: 0.3, N: 100, noise_dbw: 3.0, path_loss_db: -4.0, data_persistence: None },
        }
    }
}

fn matrix(name: &str, rows: &[Vec<f64>], n: usize) -> Result<Array2<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(HimmError::Config(format!("{name} must be {n}x{n}")));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HimmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HimmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HimmError::Config(m.to_string()));
        if self.t_train == 0 || self.t_test == 0 || self.n_starts == 0 || self.max_iter == 0 {
            return bad("t_train, t_test, n_starts and max_iter must be positive");
        }
        if self.mi_horizon == 0 || self.mi_trials < 2 {
            return bad("mi_horizon must be positive and mi_trials at least 2");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if !self.snr_db.is_finite() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite");
        }
        if self.snr_grid_db.is_empty() || self.pfa_targets.is_empty() {
            return bad("snr_grid_db and pfa_targets must be nonempty");
        }
        if self.pfa_targets.iter().any(|p| !(0.0..=1.0).contains(p)) || !(0.0..=1.0).contains(&self.tau) {
            return bad("pfa_targets and tau must lie in [0, 1]");
        }
        if !(self.physical.noise_dbw.is_finite() && self.physical.path_loss_db.is_finite()) {
            return bad("noise_dbw and path_loss_db must be finite");
        }
        if !(0.0..=1.0).contains(&self.model.persistence) {
            return bad("model.persistence must lie in [0, 1]");
        }
        self.scenario()?.params()?;
        Ok(())
    }

    pub fn shape(&self) -> Result<ModelShape> {
        ModelShape::with_threshold(self.model.levels, self.model.base, self.model.E_h)
    }

    /// Scenario with linear powers, at `snr_db`.
    pub fn scenario(&self) -> Result<Scenario> {
        let shape = self.shape()?;
        let l = shape.levels;
        let m = &self.model;
        let pi_e = match &m.pi_E {
            Some(v) if v.len() == l => Array1::from(v.clone()),
            Some(_) => return Err(HimmError::Config(format!("pi_E must have {l} entries"))),
            None => Array1::from_elem(l, 1.0 / l as f64),
        };
        let a = match &m.A {
            Some(rows) => matrix("A", rows, l)?,
            None => banded_matrix(l, m.persistence),
        };
        let d = match &m.D {
            Some(rows) => matrix("D", rows, l)?,
            None => banded_matrix(l, m.persistence),
        };
        let p = &self.physical;
        let phys = PhysicalConfig {
            E_h: m.E_h,
            P_0: p.P_0,
            N: p.N,
            noise_var: db_to_linear(p.noise_dbw),
            channel_gain: db_to_linear(p.path_loss_db).sqrt(),
            power_of_level: vec![0.0; l],
            data_persistence: p.data_persistence,
        };
        Scenario { shape, phys, pi_e, a, d }.at_snr(self.snr_db)
    }

    pub fn em_options(&self) -> EmOptions {
        EmOptions { tol: self.tol, max_iter: self.max_iter, mode: self.fit_mode.into() }
    }
}
