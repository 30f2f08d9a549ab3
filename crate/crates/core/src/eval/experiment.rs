//! End-to-end experiment pipelines: detection benchmark over an SNR grid and
//! energy-state tracking.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::roc::{compare_at_matched_pfa, roc_points, threshold_grid, RocCurve};
use super::tracking::{tracking_report, TrackingReport};
use crate::em::{multi_start_fit, EmOptions};
use crate::error::{HimmError, Result};
use crate::filter::{sense_1d, sense_2d, SenseDecision};
use crate::model::{build_b_from_scheme, emission_moments_from_physical, HimmParams, ModelShape, PhysicalConfig, BUSY};
use crate::seed::derive_seed;
use crate::simgen::{emit_parametric, emit_physical, generate_hidden, HiddenTrajectory, ObservationSequence};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Everything needed to build a parameter set except the PU signal power,
/// which is set per SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub shape: ModelShape,
    pub phys: PhysicalConfig,
    pub pi_e: Array1<f64>,
    pub a: Array2<f64>,
    pub d: Array2<f64>,
}

/// Tridiagonal stochastic matrix with `stay` on the diagonal and the rest
/// split evenly between the neighbouring levels (all of it to the single
/// neighbour at the ends).
pub fn banded_matrix(levels: usize, stay: f64) -> Array2<f64> {
    let mut m = Array2::zeros((levels, levels));
    for i in 0..levels {
        if levels == 1 {
            m[[i, i]] = 1.0;
            continue;
        }
        m[[i, i]] = stay;
        let move_mass = 1.0 - stay;
        match (i > 0, i + 1 < levels) {
            (true, true) => {
                m[[i, i - 1]] = move_mass / 2.0;
                m[[i, i + 1]] = move_mass / 2.0;
            }
            (true, false) => m[[i, i - 1]] = move_mass,
            (false, _) => m[[i, i + 1]] = move_mass,
        }
    }
    m
}

impl Scenario {
    /// Levels {1, 2, 3, 4} with L0 = {1}, noise 3 dBw, path loss -4 dB,
    /// `N = 100` samples per slot, 0 dB SNR.
    pub fn demo() -> Self {
        let shape = ModelShape::with_threshold(4, 1, 2).expect("demo shape");
        let phys = PhysicalConfig {
            E_h: 2,
            P_0: 0.3,
            N: 100,
            noise_var: db_to_linear(3.0),
            channel_gain: db_to_linear(-4.0).sqrt(),
            power_of_level: vec![0.0; 4],
            data_persistence: None,
        };
        let mut s = Scenario {
            shape,
            phys,
            pi_e: Array1::from_elem(4, 0.25),
            a: banded_matrix(4, 0.8),
            d: banded_matrix(4, 0.8),
        };
        s.phys.power_of_level = s.power_profile(0.0);
        s
    }

    /// Per-level transmit power proportional to the level value, scaled so
    /// the mean received power over sufficient levels divided by the noise
    /// power equals `snr_db`.
    pub fn power_profile(&self, snr_db: f64) -> Vec<f64> {
        let values: Vec<f64> = (0..self.shape.levels).map(|e| self.shape.level_value(e) as f64).collect();
        let sufficient: Vec<f64> = values[self.shape.insufficient..].to_vec();
        let mean_value =
            if sufficient.is_empty() { 1.0 } else { sufficient.iter().sum::<f64>() / sufficient.len() as f64 };
        let gain2 = self.phys.channel_gain * self.phys.channel_gain;
        let scale = if gain2 > 0.0 && mean_value > 0.0 {
            db_to_linear(snr_db) * self.phys.noise_var / (gain2 * mean_value)
        } else {
            0.0
        };
        values.iter().map(|v| scale * v).collect()
    }

    /// Realized SNR (dB) of the current power profile.
    pub fn snr_db(&self) -> f64 {
        let l1 = self.shape.insufficient..self.shape.levels;
        let n = l1.len() as f64;
        let mean: f64 = l1.map(|e| self.phys.received_power(e)).sum::<f64>() / n;
        linear_to_db(mean / self.phys.noise_var)
    }

    /// Parameter set for the current physical configuration.
    pub fn params(&self) -> Result<HimmParams> {
        self.phys.validate(&self.shape)?;
        let (b, pi_c) = build_b_from_scheme(&self.shape, &self.phys)?;
        let (mu, sigma2) = emission_moments_from_physical(&self.phys, &self.shape);
        let params = HimmParams {
            shape: self.shape,
            pi_e: self.pi_e.clone(),
            pi_c,
            a: self.a.clone(),
            b,
            d: self.d.clone(),
            mu,
            sigma2,
        };
        params.validate()?;
        Ok(params)
    }

    /// Copy of the scenario with the PU power set for `snr_db`.
    pub fn at_snr(&self, snr_db: f64) -> Result<Scenario> {
        if !snr_db.is_finite() {
            return Err(HimmError::Config(format!("SNR {snr_db} dB is not finite")));
        }
        let mut s = self.clone();
        s.phys.power_of_level = self.power_profile(snr_db);
        Ok(s)
    }
}

/// EM settings when the detectors should run on learned rather than true
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnSettings {
    pub t_train: usize,
    pub n_starts: usize,
    pub em: EmOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSettings {
    pub t_test: usize,
    pub pfa_targets: Vec<f64>,
    pub learn: Option<LearnSettings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub snr_db: f64,
    pub pfa_target: f64,
    pub pd_2d: Option<f64>,
    pub pd_1d: Option<f64>,
    pub pd_memoryless: Option<f64>,
}

impl BenchmarkRow {
    pub fn gap(&self) -> Option<f64> {
        Some(self.pd_2d? - self.pd_1d?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPoint {
    pub snr_db: f64,
    pub rows: Vec<BenchmarkRow>,
    pub roc_2d: RocCurve,
    pub roc_1d: RocCurve,
    pub roc_memoryless: RocCurve,
    /// Decisions of (busy, insufficient level) per detector.
    pub forbidden_2d: usize,
    pub forbidden_1d: usize,
}

fn forbidden(shape: &ModelShape, decisions: &[SenseDecision]) -> usize {
    decisions.iter().filter(|d| d.channel == BUSY && shape.is_insufficient(d.level)).count()
}

fn physical_run(
    scenario: &Scenario,
    params: &HimmParams,
    len: usize,
    seed: u64,
    tag: &str,
) -> Result<(HiddenTrajectory, ObservationSequence)> {
    let traj = generate_hidden(params, len, derive_seed(seed, tag, 0))?;
    let obs = emit_physical(&scenario.phys, &scenario.d, &traj, derive_seed(seed, tag, 1))?;
    Ok((traj, obs))
}

/// One SNR point: test data from the physical generator, the 2-D, 1-D and
/// memoryless detectors, and their detection rates at matched false alarm.
pub fn benchmark_point(
    scenario: &Scenario,
    snr_db: f64,
    settings: &BenchmarkSettings,
    seed: u64,
) -> Result<BenchmarkPoint> {
    if settings.t_test == 0 {
        return Err(HimmError::Config("t_test must be positive".into()));
    }
    let scenario = scenario.at_snr(snr_db)?;
    let truth_params = scenario.params()?;
    let params = match &settings.learn {
        None => truth_params.clone(),
        Some(learn) => {
            let (_, train) = physical_run(&scenario, &truth_params, learn.t_train, seed, "benchmark-train")?;
            multi_start_fit(&train, &scenario.shape, learn.n_starts, &learn.em, derive_seed(seed, "benchmark-em", 0))?
                .into_best()
                .params
        }
    };
    let (traj, obs) = physical_run(&scenario, &truth_params, settings.t_test, seed, "benchmark-test")?;

    let d2 = sense_2d(&params, &obs)?;
    let d1 = sense_1d(&params, &obs.y)?;
    let s2: Vec<f64> = d2.iter().map(|d| d.busy_posterior).collect();
    let s1: Vec<f64> = d1.iter().map(|d| d.busy_posterior).collect();
    let roc_2d = roc_points(&s2, &traj.channel, &threshold_grid(&s2))?;
    let roc_1d = roc_points(&s1, &traj.channel, &threshold_grid(&s1))?;
    let roc_memoryless = roc_points(&obs.y, &traj.channel, &threshold_grid(&obs.y))?;

    let main = compare_at_matched_pfa(&roc_2d, &roc_1d, &settings.pfa_targets)?;
    let rows = main
        .into_iter()
        .map(|m| BenchmarkRow {
            snr_db,
            pfa_target: m.p_fa,
            pd_2d: m.p_d_first,
            pd_1d: m.p_d_second,
            pd_memoryless: roc_memoryless.p_d_at(m.p_fa),
        })
        .collect();
    Ok(BenchmarkPoint {
        snr_db,
        rows,
        forbidden_2d: forbidden(&params.shape, &d2),
        forbidden_1d: forbidden(&params.shape, &d1),
        roc_2d,
        roc_1d,
        roc_memoryless,
    })
}

/// Runs every SNR point in parallel; results keep the grid order.
pub fn run_benchmark(
    scenario: &Scenario,
    snr_grid: &[f64],
    settings: &BenchmarkSettings,
    seed: u64,
) -> Result<Vec<BenchmarkPoint>> {
    snr_grid
        .par_iter()
        .enumerate()
        .map(|(k, &snr)| benchmark_point(scenario, snr, settings, derive_seed(seed, "benchmark", k as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    pub truth: HiddenTrajectory,
    pub observations: ObservationSequence,
    pub decisions: Vec<SenseDecision>,
    pub report: TrackingReport,
}

/// Generates a fresh trajectory from `params`, runs 2-D sensing and scores
/// the energy estimates.
pub fn run_tracking(params: &HimmParams, len: usize, seed: u64) -> Result<TrackingRun> {
    let truth = generate_hidden(params, len, derive_seed(seed, "track", 0))?;
    let observations = emit_parametric(params, &truth, derive_seed(seed, "track", 1))?;
    let decisions = sense_2d(params, &observations)?;
    let e_hat: Vec<usize> = decisions.iter().map(|d| d.level).collect();
    let report = tracking_report(&e_hat, &truth.energy, params.shape.levels)?;
    Ok(TrackingRun { truth, observations, decisions, report })
}
