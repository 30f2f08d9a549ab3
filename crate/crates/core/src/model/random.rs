use ndarray::{Array1, Array2, Array3, ArrayViewMut1, Axis};
use rand::Rng;
use rand_distr::Open01;

use super::{HimmParams, ModelShape, BUSY, CHANNEL_STATES, IDLE};
use crate::seed::{rng_from, SimRng};

/// Ranges for the Gaussian emission parameters of a random draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomParamsConfig {
    pub mu_range: (f64, f64),
    pub sigma2_range: (f64, f64),
}

impl Default for RandomParamsConfig {
    fn default() -> Self {
        Self { mu_range: (0.0, 1.0), sigma2_range: (0.1, 1.0) }
    }
}

impl RandomParamsConfig {
    /// Ranges covering the spread of an observed `Y` sequence.
    pub fn from_observations(y: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if !(lo.is_finite() && hi.is_finite() && hi > lo && var > 0.0) {
            return Self::default();
        }
        Self { mu_range: (lo, hi), sigma2_range: (0.05 * var, var) }
    }
}

fn fill_row(row: ArrayViewMut1<f64>, rng: &mut SimRng) {
    fill_row_masked(row, rng, |_| true);
}

/// Independent uniforms on (0, 1) on the allowed entries, zeros elsewhere,
/// normalized to sum to one.
fn fill_row_masked(mut row: ArrayViewMut1<f64>, rng: &mut SimRng, allowed: impl Fn(usize) -> bool) {
    for (j, v) in row.iter_mut().enumerate() {
        *v = if allowed(j) { rng.sample::<f64, _>(Open01) } else { 0.0 };
    }
    let s = row.sum();
    row.mapv_inplace(|v| v / s);
}

/// Draws a valid parameter set: uniform rows with structural zeros imposed
/// before normalization and a tied idle emission row.
pub fn random_params(shape: &ModelShape, seed: u64, cfg: &RandomParamsConfig) -> HimmParams {
    let mut rng = rng_from(seed);
    let l = shape.levels;
    let m = CHANNEL_STATES;

    let mut pi_e = Array1::zeros(l);
    fill_row(pi_e.view_mut(), &mut rng);

    let mut pi_c = Array2::zeros((l, m));
    for (q, row) in pi_c.axis_iter_mut(Axis(0)).enumerate() {
        fill_row_masked(row, &mut rng, |c| shape.is_allowed(c, q));
    }

    let mut a = Array2::zeros((l, l));
    for row in a.axis_iter_mut(Axis(0)) {
        fill_row(row, &mut rng);
    }

    let mut b = Array3::zeros((l, m, m));
    for q in 0..l {
        for i in 0..m {
            fill_row_masked(b.slice_mut(ndarray::s![q, i, ..]), &mut rng, |c| shape.is_allowed(c, q));
        }
    }

    let mut d = Array2::zeros((l, l));
    for row in d.axis_iter_mut(Axis(0)) {
        fill_row(row, &mut rng);
    }

    let (mu_lo, mu_hi) = cfg.mu_range;
    let (s_lo, s_hi) = cfg.sigma2_range;
    let mut mu = Array2::zeros((m, l));
    let mut sigma2 = Array2::zeros((m, l));
    let idle_mu = mu_lo + (mu_hi - mu_lo) * rng.sample::<f64, _>(Open01);
    let idle_s2 = s_lo + (s_hi - s_lo) * rng.sample::<f64, _>(Open01);
    for e in 0..l {
        mu[[IDLE, e]] = idle_mu;
        sigma2[[IDLE, e]] = idle_s2;
        mu[[BUSY, e]] = mu_lo + (mu_hi - mu_lo) * rng.sample::<f64, _>(Open01);
        sigma2[[BUSY, e]] = s_lo + (s_hi - s_lo) * rng.sample::<f64, _>(Open01);
    }

    HimmParams { shape: *shape, pi_e, pi_c, a, b, d, mu, sigma2 }
}

/// Adds independent uniform noise in `[-amount, amount]` to every allowed
/// probability entry (clamped at a small positive value, then renormalized)
/// and scales each emission mean/variance by `1 + noise`.
pub fn perturb_params(params: &HimmParams, amount: f64, seed: u64) -> HimmParams {
    let mut rng = rng_from(seed);
    let shape = params.shape;
    let mut out = params.clone();
    let jitter = |rng: &mut SimRng| rng.random_range(-amount..=amount);

    let perturb_row = |mut row: ArrayViewMut1<f64>, rng: &mut SimRng, allowed: &dyn Fn(usize) -> bool| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if allowed(j) { (*v + jitter(rng)).max(1e-3) } else { 0.0 };
        }
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    };
    let any = |_: usize| true;

    perturb_row(out.pi_e.view_mut(), &mut rng, &any);
    for q in 0..shape.levels {
        perturb_row(out.pi_c.row_mut(q), &mut rng, &|c| shape.is_allowed(c, q));
        perturb_row(out.a.row_mut(q), &mut rng, &any);
        perturb_row(out.d.row_mut(q), &mut rng, &any);
        for i in 0..CHANNEL_STATES {
            perturb_row(out.b.slice_mut(ndarray::s![q, i, ..]), &mut rng, &|c| shape.is_allowed(c, q));
        }
    }
    let scale = |rng: &mut SimRng| 1.0 + rng.random_range(-amount..=amount);
    let (idle_mu, idle_s2) = (scale(&mut rng), scale(&mut rng));
    for e in 0..shape.levels {
        out.mu[[IDLE, e]] = params.mu[[IDLE, 0]] * idle_mu;
        out.sigma2[[IDLE, e]] = params.sigma2[[IDLE, 0]] * idle_s2;
        out.mu[[BUSY, e]] *= scale(&mut rng);
        out.sigma2[[BUSY, e]] *= scale(&mut rng);
    }
    out
}
