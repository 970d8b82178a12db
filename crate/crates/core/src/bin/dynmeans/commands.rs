use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use dynmeans::eval::{accuracy_report, summarize, AccuracyReport};
use dynmeans::io::{self, BatchRecord, FormatError, ResultFile, ResultHeader, TruthRecord};
use dynmeans::pipeline::{run_sequence, RunConfig};
use dynmeans::synth::{generate as synthesize, SynthConfig, SynthError};

use crate::{CliError, ClusterArgs, EvalArgs, GenerateArgs, Outcome, SynthFlags};

impl SynthFlags {
    pub fn config(&self, seed: u64) -> Result<SynthConfig, CliError> {
        let cfg = SynthConfig {
            n_clusters: self.clusters,
            points_per_cluster: self.points_per_cluster,
            point_std: self.point_std,
            motion_std: self.motion_std,
            death_prob: self.death_prob,
            n_steps: self.steps,
            seed,
        };
        cfg.validate().map_err(
            |SynthError::Invalid {
                 name,
                 requirement,
                 value,
             }| {
                CliError::usage(format!(
                    "--{}: must be {requirement}, got {value}",
                    name.replace('_', "-")
                ))
            },
        )?;
        Ok(cfg)
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn format_err(path: &Path) -> impl Fn(FormatError) -> CliError + '_ {
    move |e| CliError::input(format!("{}: {e}", path.display()))
}

pub fn read_batches(path: &Path) -> Result<Vec<BatchRecord>, CliError> {
    io::read_batches(open(path)?).map_err(format_err(path))
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>, CliError> {
    io::read_truth(open(path)?).map_err(format_err(path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn generate(args: GenerateArgs) -> Result<Outcome, CliError> {
    let cfg = args.synth.config(args.seed)?;
    let data = synthesize(&cfg).map_err(|e| CliError::usage(e.to_string()))?;
    let (batches, truth) = io::synthetic_records(&data);

    let mut w = create(&args.output)?;
    io::write_batches(&mut w, &batches).map_err(format_err(&args.output))?;
    finish(w, &args.output)?;
    let mut w = create(&args.truth)?;
    io::write_truth(&mut w, &truth).map_err(format_err(&args.truth))?;
    finish(w, &args.truth)?;

    println!(
        "generated {} steps, {} clusters per step, {} points, {} cluster deaths",
        batches.len(),
        cfg.n_clusters,
        data.n_points(),
        data.deaths
    );
    Ok(Outcome::Done)
}

/// Cluster parsed batches and package the run as a result file.
pub fn cluster_records(
    batches: &[BatchRecord],
    cfg: &RunConfig,
    timing: bool,
) -> Result<ResultFile, CliError> {
    let resolved = cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let points: Vec<Vec<Vec<f64>>> = batches.iter().map(|b| b.points.clone()).collect();
    let timesteps: Vec<u64> = batches.iter().map(|b| b.t).collect();
    let result = run_sequence(&points, cfg).map_err(|e| CliError::input(e.to_string()))?;
    Ok(ResultFile::from_sequence(
        ResultHeader::new(cfg, &resolved),
        &result,
        &timesteps,
        timing,
    ))
}

pub fn cluster(args: ClusterArgs, timing: bool) -> Result<Outcome, CliError> {
    let cfg = RunConfig::new(args.params.spec()?)
        .with_restarts(args.restarts)
        .with_max_iters(args.max_iters)
        .with_seed(args.seed);
    cfg.validate()
        .map_err(|e| CliError::usage(format!("--restarts/--max-iters: {e}")))?;
    let batches = read_batches(&args.input)?;
    let result = cluster_records(&batches, &cfg, timing)?;

    let mut w = create(&args.output)?;
    io::write_result(&mut w, &result).map_err(format_err(&args.output))?;
    finish(w, &args.output)?;
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        io::write_result_csv(&mut w, &result).map_err(format_err(path))?;
        finish(w, path)?;
    }
    if let Some(path) = &args.steps_csv {
        let mut w = create(path)?;
        io::write_steps_csv(&mut w, &result).map_err(format_err(path))?;
        finish(w, path)?;
    }

    let points: usize = result.steps.iter().map(|s| s.labels.len()).sum();
    let clusters: std::collections::BTreeSet<u64> = result
        .steps
        .iter()
        .flat_map(|s| s.labels.iter().copied())
        .collect();
    println!(
        "clustered {} steps, {} points into {} distinct clusters",
        result.steps.len(),
        points,
        clusters.len()
    );
    if result.steps.iter().all(|s| s.converged) {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::Unconverged)
    }
}

/// Accuracy of a result against truth, checking that both cover the same points.
pub fn score(result: &ResultFile, truth: &[TruthRecord]) -> Result<AccuracyReport, CliError> {
    if result.steps.len() != truth.len() {
        return Err(CliError::input(format!(
            "result has {} timesteps, truth has {}",
            result.steps.len(),
            truth.len()
        )));
    }
    for (s, tr) in result.steps.iter().zip(truth) {
        if s.t != tr.t {
            return Err(CliError::input(format!(
                "result timestep {} lines up with truth timestep {}",
                s.t, tr.t
            )));
        }
    }
    let learned = result.labels();
    let truth: Vec<Vec<u64>> = truth.iter().map(|r| r.labels.clone()).collect();
    accuracy_report(&learned, &truth).map_err(|e| CliError::input(e.to_string()))
}

pub fn eval(args: EvalArgs) -> Result<Outcome, CliError> {
    let truth = read_truth(&args.truth)?;
    let mut rows = Vec::new();
    for path in &args.result {
        let result = io::read_result(open(path)?).map_err(format_err(path))?;
        let report = score(&result, &truth)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let secs: Vec<f64> = result.steps.iter().map(|s| s.wall_time_s).collect();
        let time = summarize(&secs);
        if args.per_step {
            println!("# {}", path.display());
            println!(
                "{:>6} {:>7} {:>9} {:>10} {:>9} {:>12}",
                "t", "points", "tracked", "untracked", "clusters", "wall_ms"
            );
            for (s, acc) in result.steps.iter().zip(&report.steps) {
                println!(
                    "{:>6} {:>7} {:>9.4} {:>10.4} {:>9} {:>12.4}",
                    s.t,
                    acc.points,
                    acc.tracked,
                    acc.untracked,
                    s.clusters.len(),
                    s.wall_time_s * 1e3
                );
            }
        }
        rows.push(EvalRow {
            name: path.display().to_string(),
            restarts: result.header.restarts,
            report,
            total_s: time.total,
            mean_step_ms: time.mean * 1e3,
        });
    }

    println!(
        "{:<32} {:>8} {:>9} {:>10} {:>15} {:>7} {:>12} {:>13}",
        "result",
        "restarts",
        "tracked",
        "untracked",
        "untracked_mean",
        "steps",
        "total_time_s",
        "mean_step_ms"
    );
    for r in &rows {
        println!(
            "{:<32} {:>8} {:>9.4} {:>10.4} {:>15.4} {:>7} {:>12.6} {:>13.4}",
            r.name,
            r.restarts,
            r.report.tracked_accuracy,
            r.report.untracked_accuracy,
            r.report.untracked_step_mean,
            r.report.steps.len(),
            r.total_s,
            r.mean_step_ms
        );
    }
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        write_eval_csv(&mut w, &rows)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        finish(w, path)?;
    }
    Ok(Outcome::Done)
}

struct EvalRow {
    name: String,
    restarts: usize,
    report: AccuracyReport,
    total_s: f64,
    mean_step_ms: f64,
}

fn write_eval_csv<W: Write>(mut w: W, rows: &[EvalRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "result,restarts,tracked,untracked,untracked_step_mean,steps,total_time_s,mean_step_ms"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:?},{:?},{:?},{},{:?},{:?}",
            r.name,
            r.restarts,
            r.report.tracked_accuracy,
            r.report.untracked_accuracy,
            r.report.untracked_step_mean,
            r.report.steps.len(),
            r.total_s,
            r.mean_step_ms
        )?;
    }
    Ok(())
}
