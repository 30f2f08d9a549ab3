//! Closed-form re-estimation of the parameter set from E-step statistics.

use ndarray::{s, Array1, Array2, Array3};

use super::stats::{level_marginal, SufficientStats};
use crate::error::{HimmError, Result};
use crate::model::{HimmParams, BUSY, CHANNEL_STATES, IDLE};
use crate::simgen::ObservationSequence;

/// Which statistics weight each sub-problem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WeightingMode {
    /// `D` from the `U` stream; `pi_E`, `A` from the joint stream; `pi_C`,
    /// `B`, `mu`, `sigma2` from the `Y` stream.
    #[default]
    StreamSplit,
    /// Every update weighted by the joint-stream posteriors (standard EM).
    Joint,
}

/// Relative variance floor: `sigma2 >= VARIANCE_FLOOR_FACTOR * Var(Y)`.
pub const VARIANCE_FLOOR_FACTOR: f64 = 1e-9;

const MIN_MASS: f64 = 1e-300;

/// A row whose weights summed to zero and was kept at its previous value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroMassRow {
    pub matrix: &'static str,
    pub row: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MStepReport {
    pub kept_rows: Vec<ZeroMassRow>,
}

fn normalize_or_keep(
    mut num: Array1<f64>,
    prev: ndarray::ArrayView1<f64>,
    matrix: &'static str,
    row: usize,
    report: &mut MStepReport,
) -> Array1<f64> {
    let denom: f64 = num.sum();
    if denom > MIN_MASS && denom.is_finite() {
        num.mapv_inplace(|v| v / denom);
        num
    } else {
        report.kept_rows.push(ZeroMassRow { matrix, row });
        prev.to_owned()
    }
}

fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Weighted mean and variance of `y`; `None` when the weights carry no mass.
fn weighted_moments(weights: impl Fn(usize) -> f64, y: &[f64]) -> Option<(f64, f64)> {
    let mut w_sum = 0.0;
    let mut wy = 0.0;
    for (t, &v) in y.iter().enumerate() {
        let w = weights(t);
        w_sum += w;
        wy += w * v;
    }
    if w_sum.is_nan() || w_sum <= MIN_MASS {
        return None;
    }
    let mean = wy / w_sum;
    let var = y.iter().enumerate().map(|(t, &v)| weights(t) * (v - mean).powi(2)).sum::<f64>() / w_sum;
    Some((mean, var))
}

/// One M-step. Rows with no posterior mass keep their values from `prev`.
pub fn m_step(
    stats: &SufficientStats,
    obs: &ObservationSequence,
    prev: &HimmParams,
    mode: WeightingMode,
) -> Result<(HimmParams, MStepReport)> {
    let shape = prev.shape;
    let l = shape.levels;
    let len = obs.len();
    if stats.len() != len || stats.levels != l {
        return Err(HimmError::dim(
            "stats",
            format!("{len} slots x {l} levels"),
            format!("{} x {}", stats.len(), stats.levels),
        ));
    }
    let mut report = MStepReport::default();

    // Channel/emission statistics and energy-chain statistics.
    let (gamma_ch, eps_ch) = match mode {
        WeightingMode::StreamSplit => (stats.gamma_y_grid(), stats.eps_y_grid()),
        WeightingMode::Joint => (stats.gamma_uy_grid(), stats.eps_uy_grid()),
    };
    let gamma_en = stats.gamma_uy_grid();
    let eps_en = stats.eps_uy_grid();

    // D
    let gamma_d = match mode {
        WeightingMode::StreamSplit => stats.gamma_u.clone(),
        WeightingMode::Joint => level_marginal(&stats.gamma_uy, l),
    };
    let mut d = Array2::zeros((l, l));
    for i in 0..l {
        let mut num = Array1::zeros(l);
        for t in 0..len {
            num[obs.u[t]] += gamma_d[[t, i]];
        }
        d.row_mut(i).assign(&normalize_or_keep(num, prev.d.row(i), "D", i, &mut report));
    }

    // pi_E and A
    let pi_num = Array1::from_shape_fn(l, |i| gamma_en[[0, IDLE, i]] + gamma_en[[0, BUSY, i]]);
    let pi_e = normalize_or_keep(pi_num, prev.pi_e.view(), "pi_E", 0, &mut report);

    let mut a = Array2::zeros((l, l));
    for i in 0..l {
        let mut num = Array1::zeros(l);
        for t in 0..len - 1 {
            for m in 0..CHANNEL_STATES {
                for c in 0..CHANNEL_STATES {
                    for j in 0..l {
                        num[j] += eps_en[[t, m, i, c, j]];
                    }
                }
            }
        }
        a.row_mut(i).assign(&normalize_or_keep(num, prev.a.row(i), "A", i, &mut report));
    }

    // pi_C and B
    let mut pi_c = Array2::zeros((l, CHANNEL_STATES));
    for e in 0..l {
        let mut num = Array1::from_shape_fn(CHANNEL_STATES, |c| gamma_ch[[0, c, e]]);
        if shape.is_insufficient(e) {
            num[BUSY] = 0.0;
        }
        pi_c.row_mut(e).assign(&normalize_or_keep(num, prev.pi_c.row(e), "pi_C", e, &mut report));
    }

    let mut b = Array3::zeros((l, CHANNEL_STATES, CHANNEL_STATES));
    for q in 0..l {
        for i in 0..CHANNEL_STATES {
            let mut num = Array1::<f64>::zeros(CHANNEL_STATES);
            for t in 0..len - 1 {
                for k in 0..l {
                    for j in 0..CHANNEL_STATES {
                        num[j] += eps_ch[[t, i, k, j, q]];
                    }
                }
            }
            if shape.is_insufficient(q) {
                num[BUSY] = 0.0;
            }
            let row = normalize_or_keep(num, prev.b.slice(s![q, i, ..]), "B", q * CHANNEL_STATES + i, &mut report);
            b.slice_mut(s![q, i, ..]).assign(&row);
        }
    }

    // mu and sigma2
    let floor = VARIANCE_FLOOR_FACTOR * sample_variance(&obs.y);
    let mut mu = prev.mu.clone();
    let mut sigma2 = prev.sigma2.clone();
    let idle_weight = |t: usize| (0..l).map(|e| gamma_ch[[t, IDLE, e]]).sum::<f64>();
    match weighted_moments(idle_weight, &obs.y) {
        Some((m, v)) => {
            mu.row_mut(IDLE).fill(m);
            sigma2.row_mut(IDLE).fill(v.max(floor));
        }
        None => report.kept_rows.push(ZeroMassRow { matrix: "mu", row: IDLE }),
    }
    for e in 0..l {
        if shape.is_insufficient(e) {
            continue;
        }
        match weighted_moments(|t| gamma_ch[[t, BUSY, e]], &obs.y) {
            Some((m, v)) => {
                mu[[BUSY, e]] = m;
                sigma2[[BUSY, e]] = v.max(floor);
            }
            None => report.kept_rows.push(ZeroMassRow { matrix: "mu", row: CHANNEL_STATES + e }),
        }
    }

    let params = HimmParams { shape, pi_e, pi_c, a, b, d, mu, sigma2 };
    Ok((params, report))
}
