//! Model shape, the HIMM parameter set and its invariants.
//!
//! Energy levels are stored by index `0..L`; the level *value* is
//! `base + index`. Channel states are `0` (idle) and `1` (busy). The set of
//! insufficient energy levels is always a prefix `0..insufficient` of the
//! index range: the PU can only occupy the channel when its harvested energy
//! reaches the transmission threshold.

mod io;
mod random;
mod scheme;

use std::fmt;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{HimmError, Result};

pub use io::{load_params, load_params_file, save_params, save_params_file};
pub use random::{perturb_params, random_params, RandomParamsConfig};
pub use scheme::{build_b_from_scheme, emission_moments_from_physical, PhysicalConfig};

/// Number of channel states (idle, busy).
pub const CHANNEL_STATES: usize = 2;
pub const IDLE: usize = 0;
pub const BUSY: usize = 1;

/// Tolerance on probability-vector sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Lower bound applied to variances read from disk.
pub const LOAD_VARIANCE_FLOOR: f64 = 1e-12;

/// State spaces of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Number of energy levels `L`.
    pub levels: usize,
    /// Value of the lowest energy level.
    pub base: u32,
    /// Number of low levels that cannot support a transmission (`|L0|`).
    pub insufficient: usize,
}

impl ModelShape {
    pub fn new(levels: usize, base: u32, insufficient: usize) -> Result<Self> {
        if levels == 0 {
            return Err(HimmError::Config("model needs at least one energy level".into()));
        }
        if insufficient > levels {
            return Err(HimmError::Config(format!(
                "{insufficient} insufficient levels exceeds the {levels} available"
            )));
        }
        Ok(Self { levels, base, insufficient })
    }

    /// Shape whose threshold is given as a level value `e_h`: levels below it
    /// form `L0`.
    pub fn with_threshold(levels: usize, base: u32, e_h: u32) -> Result<Self> {
        let insufficient = e_h.saturating_sub(base) as usize;
        Self::new(levels, base, insufficient.min(levels))
    }

    #[inline]
    pub fn channel_states(&self) -> usize {
        CHANNEL_STATES
    }

    /// Size of the joint (channel, energy) state space.
    #[inline]
    pub fn joint_states(&self) -> usize {
        CHANNEL_STATES * self.levels
    }

    #[inline]
    pub fn is_insufficient(&self, level: usize) -> bool {
        level < self.insufficient
    }

    /// Whether the pair (channel state, energy level) can occur.
    #[inline]
    pub fn is_allowed(&self, channel: usize, level: usize) -> bool {
        !(channel == BUSY && self.is_insufficient(level))
    }

    pub fn level_value(&self, level: usize) -> u32 {
        self.base + level as u32
    }

    pub fn level_index(&self, value: u32) -> Option<usize> {
        let idx = value.checked_sub(self.base)? as usize;
        (idx < self.levels).then_some(idx)
    }

    /// Level values in `L0`.
    pub fn insufficient_values(&self) -> Vec<u32> {
        (0..self.insufficient).map(|l| self.level_value(l)).collect()
    }

    /// The threshold `E_h` as a level value.
    pub fn threshold_value(&self) -> u32 {
        self.level_value(self.insufficient)
    }
}

/// Full parameter set of the hidden input Markov model.
///
/// * `pi_e[i]` = P(E1 = i)
/// * `pi_c[[i, c]]` = P(C1 = c | E1 = i)
/// * `a[[i, j]]` = P(Et = j | Et-1 = i)
/// * `b[[q, i, j]]` = P(Ct = j | Ct-1 = i, Et = q)
/// * `d[[i, j]]` = P(Ut = j | Et = i)
/// * `mu[[c, e]]`, `sigma2[[c, e]]`: Gaussian law of Yt given (Ct, Et)
#[derive(Debug, Clone, PartialEq)]
pub struct HimmParams {
    pub shape: ModelShape,
    pub pi_e: Array1<f64>,
    pub pi_c: Array2<f64>,
    pub a: Array2<f64>,
    pub b: Array3<f64>,
    pub d: Array2<f64>,
    pub mu: Array2<f64>,
    pub sigma2: Array2<f64>,
}

impl HimmParams {
    /// Checks dimensions, then every invariant. Returns `Err(Dimension)` for
    /// structural problems and `Err(Invalid)` for invariant violations.
    pub fn validate(&self) -> Result<()> {
        validate_params(self, &self.shape)
    }

    pub fn check_dimensions(&self, shape: &ModelShape) -> Result<()> {
        let l = shape.levels;
        let m = CHANNEL_STATES;
        let checks: [(&str, &[usize], Vec<usize>); 7] = [
            ("pi_E", self.pi_e.shape(), vec![l]),
            ("pi_C", self.pi_c.shape(), vec![l, m]),
            ("A", self.a.shape(), vec![l, l]),
            ("B", self.b.shape(), vec![l, m, m]),
            ("D", self.d.shape(), vec![l, l]),
            ("mu", self.mu.shape(), vec![m, l]),
            ("sigma2", self.sigma2.shape(), vec![m, l]),
        ];
        for (name, found, expected) in checks {
            if found != expected.as_slice() {
                return Err(HimmError::dim(name, format!("{expected:?}"), format!("{found:?}")));
            }
        }
        Ok(())
    }

    /// Gaussian log-density of `y` under the emission law of (channel, level).
    #[inline]
    pub fn y_log_density(&self, channel: usize, level: usize, y: f64) -> f64 {
        normal_log_pdf(y, self.mu[[channel, level]], self.sigma2[[channel, level]])
    }

    /// Stationary distribution of the energy chain, by power iteration.
    pub fn energy_stationary(&self) -> Array1<f64> {
        let l = self.shape.levels;
        let mut p = Array1::from_elem(l, 1.0 / l as f64);
        for _ in 0..10_000 {
            let next = p.dot(&self.a);
            let diff: f64 = (&next - &p).iter().map(|x| x.abs()).sum();
            p = next;
            if diff < 1e-15 {
                break;
            }
        }
        p
    }
}

#[inline]
pub fn normal_log_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let z = y - mean;
    -0.5 * (z * z / var + (2.0 * std::f64::consts::PI * var).ln())
}

/// One broken invariant, located by matrix name and indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub matrix: String,
    pub row: Option<usize>,
    pub col: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.matrix)?;
        match (self.row, self.col) {
            (Some(r), Some(c)) => write!(f, "[{r}][{c}]")?,
            (Some(r), None) => write!(f, " row {r}")?,
            _ => {}
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, matrix: impl Into<String>, row: Option<usize>, col: Option<usize>, message: String) {
        self.violations.push(Violation { matrix: matrix.into(), row, col, message });
    }

    fn check_distribution<'a>(&mut self, matrix: &str, row: Option<usize>, values: impl IntoIterator<Item = &'a f64>) {
        let mut sum = 0.0;
        for (j, &v) in values.into_iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                self.push(matrix, row, Some(j), format!("entry {v} outside [0, 1]"));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL || !sum.is_finite() {
            self.push(matrix, row, None, format!("sums to {sum}, expected 1"));
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Lists every invariant violation of `params` against `shape`.
///
/// Dimension mismatches are reported as an error rather than in the report.
pub fn check_params(params: &HimmParams, shape: &ModelShape) -> Result<ValidationReport> {
    if params.shape != *shape {
        return Err(HimmError::dim("shape", format!("{shape:?}"), format!("{:?}", params.shape)));
    }
    params.check_dimensions(shape)?;
    let mut report = ValidationReport::default();
    let l = shape.levels;

    report.check_distribution("pi_E", None, params.pi_e.iter());
    for i in 0..l {
        report.check_distribution("pi_C", Some(i), params.pi_c.row(i).iter());
        report.check_distribution("A", Some(i), params.a.row(i).iter());
        report.check_distribution("D", Some(i), params.d.row(i).iter());
        for c in 0..CHANNEL_STATES {
            report.check_distribution(&format!("B({i})"), Some(c), params.b.slice(ndarray::s![i, c, ..]).iter());
        }
    }

    for q in 0..shape.insufficient {
        if params.pi_c[[q, BUSY]] != 0.0 {
            report.push("pi_C", Some(q), Some(BUSY), "structural zero: busy with insufficient energy".into());
        }
        for c in 0..CHANNEL_STATES {
            if params.b[[q, c, BUSY]] != 0.0 {
                report.push(
                    format!("B({q})"),
                    Some(c),
                    Some(BUSY),
                    format!(
                        "structural zero: busy with insufficient energy has probability {}",
                        params.b[[q, c, BUSY]]
                    ),
                );
            }
        }
    }

    for c in 0..CHANNEL_STATES {
        for e in 0..l {
            let v = params.sigma2[[c, e]];
            if !(v > 0.0 && v.is_finite()) {
                report.push("sigma2", Some(c), Some(e), format!("variance {v} must be positive"));
            }
            if !params.mu[[c, e]].is_finite() {
                report.push("mu", Some(c), Some(e), "mean must be finite".into());
            }
        }
    }
    for e in 1..l {
        if params.mu[[IDLE, e]] != params.mu[[IDLE, 0]] {
            report.push("mu", Some(IDLE), Some(e), "idle row must be identical across energy levels".into());
        }
        if params.sigma2[[IDLE, e]] != params.sigma2[[IDLE, 0]] {
            report.push("sigma2", Some(IDLE), Some(e), "idle row must be identical across energy levels".into());
        }
    }
    Ok(report)
}

/// `Ok(())` iff every invariant holds.
pub fn validate_params(params: &HimmParams, shape: &ModelShape) -> Result<()> {
    let report = check_params(params, shape)?;
    if report.is_ok() {
        Ok(())
    } else {
        Err(HimmError::Invalid(report))
    }
}
