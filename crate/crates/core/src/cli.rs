//! Command-line front end: `train`, `convexlab`, `report`, `retrain-ticket`
//! and `finetune`.
//!
//! Exit codes: 0 on success, 1 for configuration, input and I/O errors, 2 when
//! training hits a numerical failure.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::checkpoint::Checkpoint;
use crate::config::{ExperimentConfig, LabConfig, LabTheorem};
use crate::convex::{
    fit_loglog_slope, make_quadratic, median, one_shot_compare, run_theorem1, run_theorem2, ConvexCompressor, DoubleWell,
    LabOptions, QuadraticProblem,
};
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::metrics::{emit, last_change_curve, RecordFormat};
use crate::nn::{LayerSpec, Mlp};
use crate::train::{lottery_retrain, TrainOutcome, Trainer};

#[derive(Debug, Parser)]
#[command(name = "dpflab", version, about = "Sparse training with dynamic pruning and error feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output root; each run writes to `<out>/<run_id>/`.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON array of configs to run in parallel (capped by DPFLAB_THREADS).
    #[arg(long, conflicts_with = "config")]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model with one of the pruning strategies.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the convex and nonconvex rate experiments.
    Convexlab {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Aggregate run summaries under a directory.
    Report {
        dir: PathBuf,
        /// Where to write report files (defaults to DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain a mask from a fresh initialization.
    RetrainTicket {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint whose mask is retrained.
        #[arg(long)]
        mask: PathBuf,
    },
    /// Fine-tune a checkpoint with its mask held fixed.
    Finetune {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint to start from.
        #[arg(long)]
        from: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericalFailure(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                1
            } else {
                0
            }
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Train { run, resume } => cmd_train(&run, resume.as_deref()),
        Command::Convexlab { run } => cmd_convexlab(&run),
        Command::Report { dir, out } => cmd_report(&dir, out.as_deref().unwrap_or(&dir)),
        Command::RetrainTicket { run, mask } => with_config(&run, |cfg, out| retrain_ticket(cfg, out, &mask)),
        Command::Finetune { run, from } => with_config(&run, |cfg, out| finetune_run(cfg, out, &from)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn with_config(run: &RunArgs, f: impl FnOnce(&ExperimentConfig, &Path) -> Result<()>) -> Result<()> {
    if run.grid.is_some() {
        return Err(Error::Config("--grid is only supported by train and convexlab".into()));
    }
    let cfg = load_experiment(run)?;
    f(&cfg, &run.out)
}

fn load_experiment(run: &RunArgs) -> Result<ExperimentConfig> {
    let path = run.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn read_grid(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Array(items)) if !items.is_empty() => Ok(items),
        Ok(_) => Err(Error::Config("grid file must be a non-empty JSON array of configs".into())),
        Err(e) => Err(Error::Config(format!("invalid grid JSON: {e}"))),
    }
}

/// Worker count for grid mode from `DPFLAB_THREADS`; 0 lets rayon decide.
fn grid_threads() -> Result<usize> {
    match std::env::var("DPFLAB_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("DPFLAB_THREADS must be a positive integer, got {v:?}"))),
    }
}

/// Runs `jobs` on a bounded pool; returns the first failure after all jobs finish.
fn run_grid<C: Sync>(jobs: &[C], f: impl Fn(&C) -> Result<()> + Sync) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid_threads()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<()>> = pool.install(|| jobs.par_iter().map(&f).collect());
    let mut first_err = None;
    for r in results {
        if let Err(e) = r {
            eprintln!("error: {e}");
            let worse = match &first_err {
                None => true,
                Some(prev) => exit_code(&e) > exit_code(prev),
            };
            if worse {
                first_err = Some(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn unique_ids(ids: impl Iterator<Item = String>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.clone()) {
            return Err(Error::Config(format!("grid contains run_id `{id}` twice")));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------- train

/// Everything a training command needs, prepared before any file is written.
struct Prepared {
    data: DataSplit,
    model: Mlp,
    specs: Vec<LayerSpec>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let data = cfg.data.load()?;
    let specs = cfg.layer_specs(data.train.dim());
    let model = Mlp::new(specs.clone(), cfg.init_seed())?;
    Ok(Prepared { data, model, specs })
}

fn cmd_train(run: &RunArgs, resume: Option<&Path>) -> Result<()> {
    if let Some(grid) = &run.grid {
        if resume.is_some() {
            return Err(Error::Config("--resume cannot be combined with --grid".into()));
        }
        let mut cfgs = read_grid(grid)?
            .into_iter()
            .map(ExperimentConfig::from_value)
            .collect::<Result<Vec<_>>>()?;
        if let Some(seed) = run.seed {
            cfgs.iter_mut().for_each(|c| c.seed = seed);
        }
        unique_ids(cfgs.iter().map(|c| c.run_id()))?;
        return run_grid(&cfgs, |cfg| train_one(cfg, &run.out, None));
    }
    let cfg = load_experiment(run)?;
    train_one(&cfg, &run.out, resume)
}

fn train_one(cfg: &ExperimentConfig, out: &Path, resume: Option<&Path>) -> Result<()> {
    let p = prepare(cfg)?;
    let tc = cfg.train_config(p.data.train.len())?;
    let ckpt = resume.map(Checkpoint::load).transpose()?;
    let mut trainer = match &ckpt {
        Some(c) => Trainer::resume(&p.model, &p.data, tc, c)?,
        None => Trainer::new(&p.model, &p.data, tc)?,
    };
    let run_dir = out.join(cfg.run_id());
    create_dir(&run_dir)?;
    write_json(&run_dir.join("config.json"), &cfg.to_json())?;
    drive(&mut trainer, cfg.checkpoint_every, &run_dir)?;
    let resume_state = trainer.checkpoint();
    let outcome = trainer.finish();
    write_outputs(&run_dir, cfg, cfg.strategy.as_str(), &p, &outcome, &resume_state)?;
    log::info!("wrote {}", run_dir.display());
    Ok(())
}

fn drive(trainer: &mut Trainer<'_>, checkpoint_every: usize, run_dir: &Path) -> Result<()> {
    while !trainer.is_done() {
        trainer.run_epoch()?;
        if checkpoint_every > 0 && trainer.epoch() % checkpoint_every as u64 == 0 && !trainer.is_done() {
            let dir = run_dir.join("checkpoints");
            create_dir(&dir)?;
            trainer.checkpoint().save(&dir.join(format!("epoch_{:04}.ckpt", trainer.epoch())))?;
        }
    }
    Ok(())
}

fn write_outputs(
    run_dir: &Path,
    cfg: &ExperimentConfig,
    strategy: &str,
    p: &Prepared,
    outcome: &TrainOutcome,
    final_state: &Checkpoint,
) -> Result<()> {
    emit(&outcome.records, &run_dir.join("metrics.csv"), RecordFormat::Csv)?;
    emit(&outcome.records, &run_dir.join("metrics.json"), RecordFormat::Json)?;
    let masks = run_dir.join("masks.bin");
    fs::write(&masks, outcome.history.to_bytes()).map_err(|e| Error::io(&masks, e))?;

    let mut dense = final_state.clone();
    dense.params = outcome.final_dense.clone();
    dense.save(&run_dir.join("dense.ckpt"))?;
    let mut sparse = final_state.clone();
    sparse.params = outcome.final_sparse.clone();
    sparse.save(&run_dir.join("sparse.ckpt"))?;

    let last = outcome.records.last();
    let get = |f: fn(&crate::metrics::StepRecord) -> f64| last.map(f).unwrap_or(f64::NAN);
    let layout = p.model.layout();
    let epochs = (cfg.epochs + cfg.finetune_epochs) as usize;
    let summary = json!({
        "kind": "train",
        "run_id": run_dir.file_name().map(|s| s.to_string_lossy().into_owned()),
        "strategy": strategy,
        "seed": cfg.seed,
        "init_seed": cfg.init_seed(),
        "train_loss": get(|r| r.train_loss),
        "train_acc": get(|r| r.train_acc),
        "test_loss": get(|r| r.test_loss),
        "test_acc": get(|r| r.test_acc),
        "sparsity_target": get(|r| r.sparsity_target),
        "sparsity_achieved": outcome.mask.sparsity(),
        "params_total": layout.len(),
        "params_prunable": layout.n_prunable(),
        "params_nonzero": outcome.final_sparse.iter().filter(|v| **v != 0.0).count(),
        "steps": outcome.steps,
        "steps_per_epoch": outcome.steps_per_epoch,
        "max_grad_norm": outcome.max_grad_norm,
        "mask_events": outcome.history.len(),
        "reactivations": outcome.history.reactivations(),
        "last_change_curve": last_change_curve(&outcome.history, epochs),
        "layers": p.specs.iter().map(|s| json!([s.in_dim, s.out_dim])).collect::<Vec<_>>(),
    });
    write_json(&run_dir.join("summary.json"), &summary)
}

fn retrain_ticket(cfg: &ExperimentConfig, out: &Path, mask_from: &Path) -> Result<()> {
    let p = prepare(cfg)?;
    let ckpt = Checkpoint::load(mask_from)?;
    if ckpt.specs != p.specs {
        return Err(Error::Config(format!(
            "{} was trained with a different architecture",
            mask_from.display()
        )));
    }
    let tc = cfg.train_config(p.data.train.len())?;
    let outcome = lottery_retrain(&p.specs, &ckpt.mask, cfg.init_seed(), &p.data, &tc)?;
    let run_dir = out.join(format!("{}_ticket", cfg.run_id()));
    create_dir(&run_dir)?;
    write_json(&run_dir.join("config.json"), &cfg.to_json())?;
    let mut final_state = ckpt.clone();
    final_state.momentum = vec![0.0; final_state.params.len()];
    final_state.step = outcome.steps;
    write_outputs(&run_dir, cfg, "lottery_ticket", &p, &outcome, &final_state)?;

    let origin = mask_from.parent().map(|d| d.join("summary.json")).filter(|p| p.exists());
    let origin_summary = origin.as_deref().map(read_json).transpose()?;
    let ticket_acc = outcome.records.last().map(|r| r.test_acc);
    let comparison = json!({
        "mask_source": mask_from.to_string_lossy(),
        "sparsity": ckpt.mask.sparsity(),
        "ticket_test_acc": ticket_acc,
        "origin_strategy": origin_summary.as_ref().and_then(|s| s.get("strategy").cloned()),
        "origin_test_acc": origin_summary.as_ref().and_then(|s| s.get("test_acc").cloned()),
    });
    write_json(&run_dir.join("comparison.json"), &comparison)
}

fn finetune_run(cfg: &ExperimentConfig, out: &Path, from: &Path) -> Result<()> {
    if cfg.finetune_epochs == 0 {
        return Err(Error::Config("`train.finetune_epochs` must be positive for finetune".into()));
    }
    let p = prepare(cfg)?;
    let ckpt = Checkpoint::load(from)?;
    if ckpt.specs != p.specs {
        return Err(Error::Config(format!("{} was trained with a different architecture", from.display())));
    }
    let tc = cfg.train_config(p.data.train.len())?;
    let mut trainer = Trainer::for_finetune(&p.model, &p.data, tc, ckpt.params.clone(), ckpt.mask.clone())?;
    let run_dir = out.join(format!("{}_finetune", cfg.run_id()));
    create_dir(&run_dir)?;
    write_json(&run_dir.join("config.json"), &cfg.to_json())?;
    drive(&mut trainer, cfg.checkpoint_every, &run_dir)?;
    let state = trainer.checkpoint();
    let outcome = trainer.finish();
    write_outputs(&run_dir, cfg, &format!("{}_finetuned", cfg.strategy), &p, &outcome, &state)
}

// ---------------------------------------------------------------- convexlab

fn cmd_convexlab(run: &RunArgs) -> Result<()> {
    if let Some(grid) = &run.grid {
        let mut cfgs = read_grid(grid)?
            .into_iter()
            .map(LabConfig::from_value)
            .collect::<Result<Vec<_>>>()?;
        if let Some(seed) = run.seed {
            cfgs.iter_mut().for_each(|c| c.seed = seed);
        }
        unique_ids(cfgs.iter().map(|c| c.run_id()))?;
        return run_grid(&cfgs, |cfg| lab_one(cfg, &run.out));
    }
    let path = run.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = LabConfig::from_path(path)?;
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    lab_one(&cfg, &run.out)
}

/// Quadratic for one lab seed, with the aligned sparse minimizer if requested.
pub fn lab_quadratic(cfg: &LabConfig, seed: u64) -> Result<(QuadraticProblem, ConvexCompressor)> {
    if cfg.aligned {
        let keep_n = cfg.dim - ((cfg.sparsity * cfg.dim as f64).round() as usize).min(cfg.dim);
        let dense = make_quadratic(cfg.dim, cfg.mu, cfg.l, seed, cfg.noise)?;
        let x_star: Vec<f64> = dense
            .x_star()
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < keep_n { v } else { 0.0 })
            .collect();
        let p = QuadraticProblem::with_minimizer(cfg.dim, cfg.mu, cfg.l, seed, cfg.noise, x_star)?;
        let keep = (0..cfg.dim).map(|i| i < keep_n).collect();
        Ok((p, ConvexCompressor::Fixed { keep }))
    } else {
        let p = make_quadratic(cfg.dim, cfg.mu, cfg.l, seed, cfg.noise)?;
        Ok((p, ConvexCompressor::Magnitude { sparsity: cfg.sparsity }))
    }
}

/// Harness options for a quadratic: ball of radius `scale·‖x*‖` (at least 1).
pub fn lab_options(cfg: &LabConfig, problem: Option<&QuadraticProblem>) -> LabOptions {
    let mut opts = LabOptions {
        period: cfg.period,
        ..LabOptions::default()
    };
    if let (Some(p), true) = (problem, cfg.projection_scale > 0.0) {
        let norm = p.x_star().iter().map(|v| v * v).sum::<f64>().sqrt();
        opts.projection_radius = Some((cfg.projection_scale * norm).max(1.0));
    }
    opts
}

fn lab_one(cfg: &LabConfig, out: &Path) -> Result<()> {
    let seeds = cfg.seed_list();
    let jobs: Vec<(u64, u64)> = cfg.horizons.iter().flat_map(|&h| seeds.iter().map(move |&s| (h, s))).collect();
    let records: Vec<Value> = jobs
        .par_iter()
        .map(|&(h, s)| lab_record(cfg, h, s))
        .collect::<Result<Vec<_>>>()?;

    let mut slope_inputs = Vec::new();
    let mut medians = Vec::new();
    let mut one_shot_medians = Vec::new();
    for &h in &cfg.horizons {
        let at_h: Vec<&Value> = records.iter().filter(|r| r["T"] == json!(h)).collect();
        let vals: Vec<f64> = at_h.iter().filter_map(|r| r["result"].as_f64()).collect();
        let m = median(&vals).unwrap_or(f64::NAN);
        medians.push(m);
        slope_inputs.push((h as f64, m));
        if cfg.theorem == LabTheorem::OneShot {
            let os: Vec<f64> = at_h.iter().filter_map(|r| r["one_shot"]["one_shot_final"].as_f64()).collect();
            one_shot_medians.push(median(&os).unwrap_or(f64::NAN));
        }
    }
    let slope = fit_loglog_slope(&slope_inputs);
    let mut summary = json!({
        "kind": "convexlab",
        "theorem": cfg.theorem.as_str(),
        "config": cfg.to_json(),
        "horizons": cfg.horizons,
        "seeds": seeds,
        "medians": medians,
        "slope_inputs": slope_inputs.iter().map(|&(t, v)| json!([t, v])).collect::<Vec<_>>(),
        "slope": slope,
    });
    if cfg.theorem == LabTheorem::OneShot {
        summary["dpf_seeds"] = json!(seeds);
        summary["one_shot_seeds"] = json!(seeds);
        summary["dpf_medians"] = json!(medians);
        summary["one_shot_medians"] = json!(one_shot_medians);
    }
    let run_dir = out.join(cfg.run_id());
    create_dir(&run_dir)?;
    write_json(&run_dir.join("runs.json"), &Value::Array(records))?;
    write_json(&run_dir.join("summary.json"), &summary)?;
    match slope {
        Some(s) => log::info!("{}: fitted slope {s:.3}", cfg.theorem.as_str()),
        None => log::info!("{}: slope undetermined", cfg.theorem.as_str()),
    }
    Ok(())
}

fn lab_record(cfg: &LabConfig, horizon: u64, seed: u64) -> Result<Value> {
    match cfg.theorem {
        LabTheorem::Thm1 => {
            let (p, comp) = lab_quadratic(cfg, seed)?;
            let r = run_theorem1(&p, &comp, horizon, seed, &lab_options(cfg, Some(&p)))?;
            Ok(json!({
                "T": horizon,
                "seed": seed,
                "sparsity": r.sparsity,
                "result": r.result,
                "pruning_term": r.avg_pruning_term,
                "details": to_value(&r)?,
            }))
        }
        LabTheorem::Thm2 => {
            let toy = DoubleWell::new(cfg.dim, cfg.coupling, cfg.noise, cfg.radius)?;
            let comp = ConvexCompressor::Magnitude { sparsity: cfg.sparsity };
            let r = run_theorem2(&toy, &comp, horizon, seed, &lab_options(cfg, None))?;
            Ok(json!({
                "T": horizon,
                "seed": seed,
                "sparsity": r.sparsity,
                "result": r.result,
                "pruning_term": r.avg_pruning_term,
                "details": to_value(&r)?,
            }))
        }
        LabTheorem::OneShot => {
            let p = make_quadratic(cfg.dim, cfg.mu, cfg.l, seed, cfg.noise)?;
            let c = one_shot_compare(&p, cfg.sparsity, horizon, seed, &lab_options(cfg, Some(&p)))?;
            Ok(json!({
                "T": horizon,
                "seed": seed,
                "sparsity": c.sparsity,
                "result": c.dpf_final,
                "pruning_term": c.dpf_avg_pruning_term,
                "one_shot": to_value(&c)?,
            }))
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

// ---------------------------------------------------------------- report

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn collect_summaries(dir: &Path, found: &mut Vec<(PathBuf, Value)>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_summaries(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == "summary.json") {
            let v = read_json(&path)?;
            if v["kind"] == "train" {
                found.push((path, v));
            }
        }
    }
    Ok(())
}

fn cmd_report(dir: &Path, out: &Path) -> Result<()> {
    let mut found = Vec::new();
    collect_summaries(dir, &mut found)?;
    if found.is_empty() {
        return Err(Error::Config(format!("no training summaries under {}", dir.display())));
    }
    let mut groups: BTreeMap<String, Vec<&Value>> = BTreeMap::new();
    for (_, v) in &found {
        let strategy = v["strategy"].as_str().unwrap_or("unknown").to_string();
        groups.entry(strategy).or_default().push(v);
    }

    let field = |runs: &[&Value], key: &str| -> Vec<f64> { runs.iter().filter_map(|r| r[key].as_f64()).collect() };
    let mut csv = String::from("strategy,runs,test_acc_mean,test_acc_std,train_acc_mean,train_acc_std,sparsity_mean\n");
    let mut curves = String::from("strategy,epoch,still_changing\n");
    let mut json_rows = Vec::new();
    for (strategy, runs) in &groups {
        let (test_m, test_s) = mean_std(&field(runs, "test_acc"));
        let (train_m, train_s) = mean_std(&field(runs, "train_acc"));
        let (sp_m, _) = mean_std(&field(runs, "sparsity_achieved"));
        csv.push_str(&format!(
            "{strategy},{},{test_m:.6},{test_s:.6},{train_m:.6},{train_s:.6},{sp_m:.6}\n",
            runs.len()
        ));
        let all: Vec<Vec<f64>> = runs
            .iter()
            .filter_map(|r| r["last_change_curve"].as_array())
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .collect();
        let len = all.iter().map(Vec::len).max().unwrap_or(0);
        let mut merged = Vec::with_capacity(len);
        for e in 0..len {
            let at: Vec<f64> = all.iter().filter_map(|c| c.get(e).copied()).collect();
            let m = mean_std(&at).0;
            curves.push_str(&format!("{strategy},{e},{m:.6}\n"));
            merged.push(m);
        }
        println!("{strategy:<28} n={:<3} test acc {test_m:.4} ± {test_s:.4}  sparsity {sp_m:.3}", runs.len());
        json_rows.push(json!({
            "strategy": strategy,
            "runs": runs.len(),
            "test_acc_mean": test_m,
            "test_acc_std": test_s,
            "train_acc_mean": train_m,
            "train_acc_std": train_s,
            "sparsity_mean": sp_m,
            "last_change_curve": merged,
        }));
    }
    create_dir(out)?;
    for (name, text) in [("report.csv", &csv), ("last_change.csv", &curves)] {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    write_json(&out.join("report.json"), &Value::Array(json_rows))
}
