//! Command-line driver: config-file experiments from dataset to results.
//!
//! Four subcommands cover the pipeline. `generate` integrates the true
//! system once per sampling grid and writes trajectory CSVs. `train` fits
//! one model per (grid, tableau, seed) combination, in parallel, writing a
//! checkpoint, a training report, and a loss log per run. `evaluate` rolls
//! the trained models out on the fine test grid and assembles the combined
//! results table. `orders` measures empirical convergence orders of the
//! built-in tableaus and checks them against their nominal values.
//!
//! All artifacts live under the config's `output_dir`:
//! `data/` (datasets), `checkpoints/`, `reports/` (train/eval reports and
//! loss logs), `results.csv`, `orders.csv`.

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSystem, SystemName};
use crate::integrators::{
    builtin_tableaus, estimate_order, forward_certification_plan, reference_solve, rk4,
    theorem_probe, theorem_step_sizes, ErrorTarget, OrderProbe, Trajectory, REFERENCE_TOL,
};
use crate::metrics::evaluate_model;
use crate::model::Checkpoint;
use crate::training::train;

#[derive(Debug, Parser)]
#[command(
    name = "mirk-hnn",
    version,
    about = "Learn Hamiltonians from sparse trajectories by implicit Runge-Kutta interpolation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the true system and write one dataset per sampling grid.
    Generate(CommonArgs),
    /// Train one model per (grid, tableau, seed) on the generated datasets.
    Train(TrainArgs),
    /// Evaluate trained models and write the combined results table.
    Evaluate(CommonArgs),
    /// Verify empirical convergence orders of the built-in tableaus.
    Orders(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads for independent runs (default: one per CPU).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Escalate skipped runs and failed checks to errors.
    #[arg(long)]
    pub strict: bool,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    pub seed_override: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Skip runs whose checkpoint already exists.
    #[arg(long)]
    pub resume: bool,
}

/// One cell of the experiment matrix.
#[derive(Debug, Clone)]
struct Run {
    system: SystemName,
    tableau: String,
    h: f64,
    n: usize,
    seed: u64,
}

impl Run {
    /// Stable file stem, e.g. `dp_mirk4_h0.5_n40_seed2`.
    fn stem(&self) -> String {
        format!(
            "{}_{}_h{}_n{}_seed{}",
            self.system, self.tableau, self.h, self.n, self.seed
        )
    }
}

fn dataset_stem(system: SystemName, h: f64, n: usize) -> String {
    format!("{system}_h{h}_n{n}")
}

fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("data")
}

fn checkpoint_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("checkpoints")
}

fn report_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("reports")
}

fn run_matrix(cfg: &ExperimentConfig) -> Vec<Run> {
    let mut runs = Vec::new();
    for &(h, n) in &cfg.grid {
        for tableau in &cfg.tableaus {
            for &seed in &cfg.seeds {
                runs.push(Run {
                    system: cfg.system,
                    tableau: tableau.clone(),
                    h,
                    n,
                    seed,
                });
            }
        }
    }
    runs
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    for warning in cfg.validate()? {
        eprintln!("warning: {warning}");
    }
    if let Some(seed) = args.seed_override {
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

fn worker_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = load_config(&args)?;
            cmd_generate(&cfg)?;
            Ok(0)
        }
        Command::Train(args) => {
            let cfg = load_config(&args.common)?;
            cmd_train(&cfg, args.common.jobs, args.resume)?;
            Ok(0)
        }
        Command::Evaluate(args) => {
            let cfg = load_config(&args)?;
            cmd_evaluate(&cfg, args.jobs, args.strict)?;
            Ok(0)
        }
        Command::Orders(args) => {
            let cfg = load_config(&args)?;
            let all_passed = cmd_orders(&cfg)?;
            if !all_passed && args.strict {
                eprintln!("order verification failed under --strict");
                return Ok(2);
            }
            Ok(0)
        }
    }
}

/// Integrate the true field over each grid's training horizon and write the
/// dataset CSV plus its metadata sidecar.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    let system = HamiltonianSystem::new(cfg.system);
    let dir = data_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    for &(h, n) in &cfg.grid {
        let traj = reference_solve(&system, &cfg.initial_value, h * n as f64, h)?;
        let stem = dataset_stem(cfg.system, h, n);
        let csv_path = dir.join(format!("{stem}.csv"));
        traj.write_csv(&csv_path)?;
        traj.write_meta(&dir.join(format!("{stem}.meta.json")), REFERENCE_TOL)?;
        let energy0 = system.hamiltonian(&traj.states[0])?;
        let drift = traj
            .states
            .iter()
            .map(|y| (system.hamiltonian(y).unwrap_or(f64::NAN) - energy0).abs())
            .fold(0.0_f64, f64::max);
        println!(
            "wrote {} ({} samples, energy drift {drift:.2e})",
            csv_path.display(),
            traj.states.len()
        );
    }
    Ok(())
}

enum TrainOutcome {
    Trained,
    Skipped,
}

fn train_one(cfg: &ExperimentConfig, run: &Run, resume: bool) -> Result<TrainOutcome> {
    let ckpt_path = checkpoint_dir(cfg).join(format!("{}.json", run.stem()));
    if resume && ckpt_path.exists() {
        println!("{}: checkpoint exists, skipped", run.stem());
        return Ok(TrainOutcome::Skipped);
    }

    let stem = dataset_stem(run.system, run.h, run.n);
    let csv_path = data_dir(cfg).join(format!("{stem}.csv"));
    if !csv_path.exists() {
        return Err(Error::InvalidArgument(format!(
            "dataset {} not found; run `mirk-hnn generate --config <config>` first",
            csv_path.display()
        )));
    }
    let mut traj = Trajectory::read_csv(&csv_path)?;
    let meta = Trajectory::read_meta(&data_dir(cfg).join(format!("{stem}.meta.json")))?;
    if meta.system != run.system.to_string()
        || meta.n != run.n
        || (meta.h - run.h).abs() > 1e-9 * run.h
    {
        return Err(Error::InvalidArgument(format!(
            "dataset {} does not match the configured grid; regenerate it",
            csv_path.display()
        )));
    }
    traj.system_name = run.system.to_string();

    let train_cfg = cfg.train_config(run.h, run.n, &run.tableau, run.seed);
    let (model, report) = train(&train_cfg, &traj)?;

    let ckpt = model.to_checkpoint(&run.tableau, &train_cfg.hash());
    ckpt.save(&ckpt_path)?;

    let reports = report_dir(cfg);
    let report_file = std::fs::File::create(reports.join(format!("{}_train.json", run.stem())))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(report_file), &report)?;
    let mut loss_csv = String::from("epoch,loss,grad_norm\n");
    for (epoch, (loss, grad)) in report
        .loss_history
        .iter()
        .zip(&report.grad_norm_history)
        .enumerate()
    {
        let _ = writeln!(loss_csv, "{epoch},{loss:.16e},{grad:.16e}");
    }
    std::fs::write(reports.join(format!("{}_loss.csv", run.stem())), loss_csv)?;

    println!(
        "{}: loss {:.3e} -> {:.3e} in {} epochs ({:?}, {:.1}s)",
        run.stem(),
        report.loss_history.first().unwrap(),
        report.loss_history.last().unwrap(),
        report.loss_history.len() - 1,
        report.termination_reason,
        report.wall_time
    );
    Ok(TrainOutcome::Trained)
}

/// Train every cell of the experiment matrix, one worker per run.
pub fn cmd_train(cfg: &ExperimentConfig, jobs: Option<usize>, resume: bool) -> Result<()> {
    std::fs::create_dir_all(checkpoint_dir(cfg))?;
    std::fs::create_dir_all(report_dir(cfg))?;
    let runs = run_matrix(cfg);
    let pool = worker_pool(jobs)?;
    let outcomes: Result<Vec<TrainOutcome>> =
        pool.install(|| runs.par_iter().map(|run| train_one(cfg, run, resume)).collect());
    let outcomes = outcomes?;
    let trained = outcomes
        .iter()
        .filter(|o| matches!(o, TrainOutcome::Trained))
        .count();
    println!("trained {trained} models ({} skipped)", outcomes.len() - trained);
    Ok(())
}

struct ResultRow {
    run: Run,
    e_interp: f64,
    e_extrap: f64,
    e_hamiltonian: f64,
}

fn format_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("system,tableau,h,N,seed,e_interp,e_extrap,e_H\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
            row.run.system,
            row.run.tableau,
            row.run.h,
            row.run.n,
            row.run.seed,
            row.e_interp,
            row.e_extrap,
            row.e_hamiltonian
        );
    }
    out
}

fn evaluate_one(cfg: &ExperimentConfig, run: &Run, strict: bool) -> Result<Option<ResultRow>> {
    let ckpt_path = checkpoint_dir(cfg).join(format!("{}.json", run.stem()));
    if !ckpt_path.exists() {
        let message = format!(
            "checkpoint {} not found; run `mirk-hnn train --config <config>` first",
            ckpt_path.display()
        );
        if strict {
            return Err(Error::InvalidArgument(message));
        }
        eprintln!("warning: {message}; row skipped");
        return Ok(None);
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let train_cfg = cfg.train_config(run.h, run.n, &run.tableau, run.seed);
    if ckpt.train_config_hash != train_cfg.hash() {
        let message = format!(
            "checkpoint {} was trained with different settings than the current config",
            ckpt_path.display()
        );
        if strict {
            return Err(Error::InvalidArgument(message));
        }
        eprintln!("warning: {message}");
    }
    let model = ckpt.into_model()?;
    let system = HamiltonianSystem::new(run.system);
    let report = evaluate_model(
        &model,
        &system,
        &cfg.initial_value,
        run.h,
        run.n,
        cfg.extrap_horizon_ratio,
    )?;
    let eval_file =
        std::fs::File::create(report_dir(cfg).join(format!("{}_eval.json", run.stem())))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(eval_file), &report)?;
    println!(
        "{}: e_interp {:.3e}  e_extrap {:.3e}  e_H {:.3e}",
        run.stem(),
        report.e_interp,
        report.e_extrap,
        report.e_hamiltonian
    );
    Ok(Some(ResultRow {
        run: run.clone(),
        e_interp: report.e_interp,
        e_extrap: report.e_extrap,
        e_hamiltonian: report.e_hamiltonian,
    }))
}

/// Evaluate every checkpoint of the matrix and write `results.csv`.
///
/// Rows keep the deterministic matrix order (grid, then tableau, then
/// seed), so repeated evaluations produce identical bytes. Missing
/// checkpoints are skipped with a warning unless `strict`.
pub fn cmd_evaluate(cfg: &ExperimentConfig, jobs: Option<usize>, strict: bool) -> Result<()> {
    std::fs::create_dir_all(report_dir(cfg))?;
    let runs = run_matrix(cfg);
    let pool = worker_pool(jobs)?;
    let rows: Result<Vec<Option<ResultRow>>> = pool.install(|| {
        runs.par_iter()
            .map(|run| evaluate_one(cfg, run, strict))
            .collect()
    });
    let rows: Vec<ResultRow> = rows?.into_iter().flatten().collect();
    let table_path = cfg.output_dir.join("results.csv");
    std::fs::write(&table_path, format_results_csv(&rows))?;
    println!("wrote {} ({} rows)", table_path.display(), rows.len());
    Ok(())
}

struct OrderRow {
    system: String,
    tableau: String,
    measurement: &'static str,
    nominal: usize,
    lower: f64,
    upper: f64,
    outcome: std::result::Result<f64, String>,
}

impl OrderRow {
    fn status(&self) -> String {
        match &self.outcome {
            Ok(slope) if *slope >= self.lower && *slope <= self.upper => "pass".into(),
            Ok(_) => "FAIL".into(),
            Err(reason) => reason.clone(),
        }
    }

    fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(s) if *s >= self.lower && *s <= self.upper)
    }
}

fn format_orders_csv(rows: &[OrderRow]) -> String {
    let mut out = String::from("system,tableau,measurement,nominal,slope,lower,upper,status\n");
    for row in rows {
        let slope = match &row.outcome {
            Ok(s) => format!("{s:.6}"),
            Err(_) => String::new(),
        };
        let upper = if row.upper.is_finite() {
            format!("{:.2}", row.upper)
        } else {
            "inf".into()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.2},{},{}",
            row.system,
            row.tableau,
            row.measurement,
            row.nominal,
            slope,
            row.lower,
            upper,
            row.status()
        );
    }
    out
}

/// Turn an order estimate into a table outcome: noisy fits become a status
/// instead of aborting the whole table.
fn capture(estimate: Result<f64>) -> std::result::Result<f64, String> {
    match estimate {
        Ok(slope) => Ok(slope),
        Err(Error::UnreliableFit { .. }) => Err("unreliable-fit".into()),
        Err(other) => Err(format!("error: {other}")),
    }
}

/// Measure forward, injected-vs-flow, and injected-vs-forward convergence
/// orders for every configured tableau; returns whether all checks passed.
///
/// Forward certification always runs on the double-pendulum probe (the
/// calibrated plan), while the single-step measurements use the configured
/// system. The explicit rk4 baseline has no injected variant, so it only
/// appears in the forward block.
pub fn cmd_orders(cfg: &ExperimentConfig) -> Result<bool> {
    let plan = forward_certification_plan();
    let dp = HamiltonianSystem::new(SystemName::DoublePendulum);
    let tabs = builtin_tableaus();
    let mut rows = Vec::new();

    for name in &cfg.tableaus {
        if name == "rk4" {
            let tab = rk4();
            let probe = OrderProbe::ExplicitGlobal {
                tab: &tab,
                t_end: plan.t_end,
                sample_dt: plan.sample_dt,
            };
            let estimate =
                estimate_order(&probe, &dp, &plan.y0, &plan.h_list, ErrorTarget::VsExactFlow);
            rows.push(OrderRow {
                system: "dp".into(),
                tableau: name.clone(),
                measurement: "forward",
                nominal: tab.p,
                lower: tab.p as f64 - 0.3,
                upper: tab.p as f64 + 0.5,
                outcome: capture(estimate),
            });
            continue;
        }
        let tab = tabs
            .iter()
            .find(|t| &t.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown tableau '{name}'")))?;
        let probe = OrderProbe::MirkGlobal {
            tab,
            t_end: plan.t_end,
            sample_dt: plan.sample_dt,
        };
        let estimate =
            estimate_order(&probe, &dp, &plan.y0, &plan.h_list, ErrorTarget::VsExactFlow);
        rows.push(OrderRow {
            system: "dp".into(),
            tableau: name.clone(),
            measurement: "forward",
            nominal: tab.p,
            lower: tab.p as f64 - 0.3,
            upper: tab.p as f64 + 0.5,
            outcome: capture(estimate),
        });
    }

    let system = HamiltonianSystem::new(cfg.system);
    let y0 = theorem_probe(cfg.system);
    for name in &cfg.tableaus {
        let Some(tab) = tabs.iter().find(|t| &t.name == name) else {
            continue; // rk4: no injected variant
        };
        let (flow_h, fwd_h) = theorem_step_sizes(cfg.system, name)?;
        let probe = OrderProbe::MirkLocal { tab };
        let p = tab.p as f64;
        let flow = estimate_order(&probe, &system, &y0, flow_h, ErrorTarget::VsExactFlow);
        rows.push(OrderRow {
            system: cfg.system.to_string(),
            tableau: name.clone(),
            measurement: "injected-vs-flow",
            nominal: tab.p + 1,
            lower: p + 0.7,
            upper: p + 1.5,
            outcome: capture(flow),
        });
        let fwd = estimate_order(&probe, &system, &y0, fwd_h, ErrorTarget::VsForwardStep);
        rows.push(OrderRow {
            system: cfg.system.to_string(),
            tableau: name.clone(),
            measurement: "injected-vs-forward",
            nominal: tab.p + 2,
            lower: p + 1.5,
            upper: f64::INFINITY,
            outcome: capture(fwd),
        });
    }

    println!(
        "{:<6} {:<8} {:<21} {:>8} {:>9} {:>14} {:>8}",
        "system", "tableau", "measurement", "nominal", "slope", "window", "status"
    );
    for row in &rows {
        let slope = match &row.outcome {
            Ok(s) => format!("{s:.3}"),
            Err(_) => "-".into(),
        };
        let window = if row.upper.is_finite() {
            format!("[{:.2}, {:.2}]", row.lower, row.upper)
        } else {
            format!(">= {:.2}", row.lower)
        };
        println!(
            "{:<6} {:<8} {:<21} {:>8} {:>9} {:>14} {:>8}",
            row.system, row.tableau, row.measurement, row.nominal, slope, window,
            row.status()
        );
    }

    std::fs::create_dir_all(&cfg.output_dir)?;
    let csv_path = cfg.output_dir.join("orders.csv");
    std::fs::write(&csv_path, format_orders_csv(&rows))?;
    println!("wrote {}", csv_path.display());
    Ok(rows.iter().all(OrderRow::passed))
}
