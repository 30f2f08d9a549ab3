use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use himm::em::{em_fit, multi_start_fit, FitReport};
use himm::eval::{mi_gain_mc, run_benchmark, run_tracking, BenchmarkSettings, LearnSettings};
use himm::filter::{detect_with_threshold, sense_1d, sense_2d};
use himm::model::{load_params_file, save_params_file};
use himm::seed::derive_seed;
use himm::simgen::{emit_parametric, emit_physical, generate_hidden};
use himm::table::{fmt_num, read_trajectory, write_decisions, write_loglik, write_table, write_trajectory};
use himm::{HimmError, HimmParams, Result};

use crate::config::RunConfig;
use crate::{Command, Common, SenseMode};

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &common.out {
            cfg.output_dir = out.clone();
        }
        let out = cfg.output_dir.clone();
        fs::create_dir_all(&out)?;
        Ok(Ctx { cfg, out })
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    /// Parameters from a file, or from the configured physical model.
    fn params(&self, path: Option<&Path>) -> Result<HimmParams> {
        match path {
            Some(p) => load_params_file(p),
            None => self.cfg.scenario()?.params(),
        }
    }
}

fn read_obs(path: &Path, params_shape: &himm::ModelShape) -> Result<himm::simgen::ObservationSequence> {
    let (obs, _) = read_trajectory(BufReader::new(File::open(path)?), params_shape)?;
    Ok(obs)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { common, params, len } => generate(&Ctx::new(&common)?, params.as_deref(), len),
        Command::Fit { common, obs, init, mode, starts, max_iter, tol } => {
            let mut ctx = Ctx::new(&common)?;
            if let Some(m) = mode {
                ctx.cfg.fit_mode = m;
            }
            if let Some(s) = starts {
                ctx.cfg.n_starts = s;
            }
            if let Some(m) = max_iter {
                ctx.cfg.max_iter = m;
            }
            if let Some(t) = tol {
                ctx.cfg.tol = t;
            }
            ctx.cfg.validate()?;
            fit(&ctx, &obs, init.as_deref())
        }
        Command::Sense { common, params, obs, mode, tau } => sense(&Ctx::new(&common)?, &params, &obs, mode, tau),
        Command::Benchmark { common, learn } => {
            let mut ctx = Ctx::new(&common)?;
            ctx.cfg.learn |= learn;
            benchmark(&ctx)
        }
        Command::Track { common, params, len } => track(&Ctx::new(&common)?, params.as_deref(), len),
        Command::Mi { common, params, horizon, trials } => mi(&Ctx::new(&common)?, params.as_deref(), horizon, trials),
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

fn generate(ctx: &Ctx, params_path: Option<&Path>, len: Option<usize>) -> Result<()> {
    let len = len.unwrap_or(ctx.cfg.t_train);
    let seed = ctx.cfg.seed;
    let params = ctx.params(params_path)?;
    let traj = generate_hidden(&params, len, derive_seed(seed, "generate", 0))?;
    let obs = match params_path {
        Some(_) => emit_parametric(&params, &traj, derive_seed(seed, "generate", 1))?,
        None => {
            let scenario = ctx.cfg.scenario()?;
            emit_physical(&scenario.phys, &scenario.d, &traj, derive_seed(seed, "generate", 1))?
        }
    };
    write_trajectory(ctx.file("trajectory.csv")?, &params.shape, Some(&traj), &obs)?;
    save_params_file(&params, ctx.out.join("params.json"))?;
    println!("generated {len} slots into {}", ctx.out.display());
    Ok(())
}

fn fit(ctx: &Ctx, obs_path: &Path, init: Option<&Path>) -> Result<()> {
    let opts = ctx.cfg.em_options();
    let (report, starts): (FitReport, Vec<Vec<String>>) = match init {
        Some(path) => {
            let init = load_params_file(path)?;
            let obs = read_obs(obs_path, &init.shape)?;
            let r = em_fit(&obs, &init, &opts)?;
            let row = vec![
                "0".into(),
                String::new(),
                fmt_num(r.final_loglik()),
                r.iterations.to_string(),
                r.converged.to_string(),
            ];
            (r, vec![row])
        }
        None => {
            let shape = ctx.cfg.shape()?;
            let obs = read_obs(obs_path, &shape)?;
            let multi = multi_start_fit(&obs, &shape, ctx.cfg.n_starts, &opts, derive_seed(ctx.cfg.seed, "fit", 0))?;
            let rows = multi
                .starts
                .iter()
                .enumerate()
                .map(|(k, s)| match &s.result {
                    Ok(r) => vec![
                        k.to_string(),
                        s.seed.to_string(),
                        fmt_num(r.final_loglik()),
                        r.iterations.to_string(),
                        r.converged.to_string(),
                    ],
                    Err(_) => vec![k.to_string(), s.seed.to_string(), String::new(), String::new(), "failed".into()],
                })
                .collect();
            (multi.into_best(), rows)
        }
    };
    save_params_file(&report.params, ctx.out.join("params.json"))?;
    write_loglik(ctx.file("loglik.csv")?, &report.loglik_history)?;
    write_table(ctx.file("starts.csv")?, &["start", "seed", "final_loglik", "iterations", "converged"], starts)?;
    println!(
        "loglik {} after {} iterations (converged: {}, rows kept: {})",
        fmt_num(report.final_loglik()),
        report.iterations,
        report.converged,
        report.kept_rows
    );
    Ok(())
}

fn sense(ctx: &Ctx, params_path: &Path, obs_path: &Path, mode: SenseMode, tau: Option<f64>) -> Result<()> {
    let params = load_params_file(params_path)?;
    let obs = read_obs(obs_path, &params.shape)?;
    let decisions = match mode {
        SenseMode::TwoD => sense_2d(&params, &obs)?,
        SenseMode::OneD => sense_1d(&params, &obs.y)?,
    };
    let detections = detect_with_threshold(&decisions, tau.unwrap_or(ctx.cfg.tau))?;
    write_decisions(ctx.file("decisions.csv")?, &params.shape, &decisions, Some(&detections))?;
    let busy = decisions.iter().filter(|d| d.channel == himm::BUSY).count();
    println!("{} slots, {busy} sensed busy", decisions.len());
    Ok(())
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn benchmark(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let settings = BenchmarkSettings {
        t_test: cfg.t_test,
        pfa_targets: cfg.pfa_targets.clone(),
        learn: cfg.learn.then(|| LearnSettings { t_train: cfg.t_train, n_starts: cfg.n_starts, em: cfg.em_options() }),
    };
    let points = run_benchmark(&cfg.scenario()?, &cfg.snr_grid_db, &settings, cfg.seed)?;
    let rows = points.iter().flat_map(|p| {
        p.rows.iter().map(|r| {
            vec![fmt_num(r.snr_db), fmt_num(r.pfa_target), opt_num(r.pd_2d), opt_num(r.pd_1d), opt_num(r.pd_memoryless)]
        })
    });
    write_table(ctx.file("benchmark.csv")?, &["snr_db", "pfa_target", "pd_2d", "pd_1d", "pd_memoryless"], rows)?;
    let forbidden: usize = points.iter().map(|p| p.forbidden_2d + p.forbidden_1d).sum();
    println!("{} SNR points, {forbidden} forbidden (busy, insufficient) decisions", points.len());
    Ok(())
}

fn track(ctx: &Ctx, params_path: Option<&Path>, len: Option<usize>) -> Result<()> {
    let params = ctx.params(params_path)?;
    let run = run_tracking(&params, len.unwrap_or(ctx.cfg.t_test), ctx.cfg.seed)?;
    let shape = params.shape;
    let rows = run.truth.energy.iter().zip(&run.decisions).enumerate().map(|(t, (&e, d))| {
        vec![(t + 1).to_string(), shape.level_value(e).to_string(), shape.level_value(d.level).to_string()]
    });
    write_table(ctx.file("tracking.csv")?, &["t", "E_true", "e_hat"], rows)?;

    let mut header = vec!["true_level".to_string()];
    header.extend((0..shape.levels).map(|e| format!("est_{}", shape.level_value(e))));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let conf = &run.report.per_level_confusion;
    let rows = (0..shape.levels).map(|i| {
        let mut row = vec![shape.level_value(i).to_string()];
        row.extend(conf.row(i).iter().map(|c| c.to_string()));
        row
    });
    write_table(ctx.file("confusion.csv")?, &header_refs, rows)?;
    println!("accuracy {} mae {}", fmt_num(run.report.accuracy), fmt_num(run.report.mae));
    Ok(())
}

fn mi(ctx: &Ctx, params_path: Option<&Path>, horizon: Option<usize>, trials: Option<usize>) -> Result<()> {
    let params = ctx.params(params_path)?;
    let horizon = horizon.unwrap_or(ctx.cfg.mi_horizon);
    let trials = trials.unwrap_or(ctx.cfg.mi_trials);
    let est = mi_gain_mc(&params, horizon, trials, derive_seed(ctx.cfg.seed, "mi", 0))?;
    let row = vec![horizon.to_string(), trials.to_string(), fmt_num(est.estimate), fmt_num(est.standard_error)];
    write_table(ctx.file("mi.csv")?, &["horizon", "trials", "mi_nats", "standard_error"], [row])?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "mi {} +- {} nats", fmt_num(est.estimate), fmt_num(est.standard_error)).map_err(HimmError::Io)?;
    Ok(())
}
