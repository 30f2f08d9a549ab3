use rayon::prelude::*;

use super::mstep::{m_step, WeightingMode};
use super::stats::compute_stats;
use crate::error::{HimmError, Result};
use crate::model::{random_params, HimmParams, ModelShape, RandomParamsConfig};
use crate::seed::derive_seed;
use crate::simgen::ObservationSequence;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Stop once the log-likelihood improves by no more than this.
    pub tol: f64,
    pub max_iter: usize,
    pub mode: WeightingMode,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOLERANCE, max_iter: 500, mode: WeightingMode::StreamSplit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: HimmParams,
    /// `log P(U, Y)` under the initial parameters, then after each M-step.
    pub loglik_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance_used: f64,
    /// Number of rows left unchanged because they carried no posterior mass.
    pub kept_rows: usize,
}

impl FitReport {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_history.last().expect("history holds the initial likelihood")
    }

    /// Iterations (1-based) whose log-likelihood dropped by more than `slack`.
    pub fn decreases(&self, slack: f64) -> Vec<(usize, f64)> {
        self.loglik_history
            .windows(2)
            .enumerate()
            .filter_map(|(k, w)| (w[1] < w[0] - slack).then_some((k + 1, w[1] - w[0])))
            .collect()
    }
}

/// Alternates E- and M-steps from `init`.
pub fn em_fit(obs: &ObservationSequence, init: &HimmParams, opts: &EmOptions) -> Result<FitReport> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(HimmError::Config(format!("tolerance {} must be positive", opts.tol)));
    }
    init.validate()?;
    let mut params = init.clone();
    let mut stats = compute_stats(&params, obs)?;
    let mut history = vec![stats.log_likelihood];
    let mut converged = false;
    let mut iterations = 0;
    let mut kept_rows = 0;

    while iterations < opts.max_iter {
        let (next, report) = m_step(&stats, obs, &params, opts.mode)?;
        kept_rows += report.kept_rows.len();
        let next_stats = compute_stats(&next, obs)?;
        let improvement = next_stats.log_likelihood - stats.log_likelihood;
        params = next;
        stats = next_stats;
        history.push(stats.log_likelihood);
        iterations += 1;
        if improvement <= opts.tol {
            converged = true;
            break;
        }
    }

    Ok(FitReport { params, loglik_history: history, iterations, converged, tolerance_used: opts.tol, kept_rows })
}

#[derive(Debug)]
pub struct StartOutcome {
    pub seed: u64,
    pub result: Result<FitReport>,
}

#[derive(Debug)]
pub struct MultiStartReport {
    pub best_index: usize,
    pub starts: Vec<StartOutcome>,
}

impl MultiStartReport {
    pub fn best(&self) -> &FitReport {
        self.starts[self.best_index].result.as_ref().expect("best start succeeded")
    }

    pub fn into_best(mut self) -> FitReport {
        self.starts.swap_remove(self.best_index).result.expect("best start succeeded")
    }

    pub fn successful(&self) -> impl Iterator<Item = &FitReport> {
        self.starts.iter().filter_map(|s| s.result.as_ref().ok())
    }
}

/// Seed of the `index`-th random start of a run seeded with `seed`.
pub fn start_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, "em-start", index as u64)
}

/// Runs EM from `n_starts` random initializations (in parallel) and keeps
/// the one with the largest final log-likelihood; ties go to the lower start.
pub fn multi_start_fit(
    obs: &ObservationSequence,
    shape: &ModelShape,
    n_starts: usize,
    opts: &EmOptions,
    seed: u64,
) -> Result<MultiStartReport> {
    if n_starts == 0 {
        return Err(HimmError::Config("need at least one EM start".into()));
    }
    obs.check_shape(shape)?;
    let ranges = RandomParamsConfig::from_observations(&obs.y);
    let starts: Vec<StartOutcome> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let seed = start_seed(seed, k);
            let init = random_params(shape, seed, &ranges);
            StartOutcome { seed, result: em_fit(obs, &init, opts) }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (k, s) in starts.iter().enumerate() {
        if let Ok(r) = &s.result {
            let ll = r.final_loglik();
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((k, ll));
            }
        }
    }
    match best {
        Some((best_index, _)) => Ok(MultiStartReport { best_index, starts }),
        None => {
            let first = starts.into_iter().next().and_then(|s| s.result.err()).expect("at least one start");
            Err(HimmError::AllStartsFailed(n_starts, Box::new(first)))
        }
    }
}
