use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use dynmeans::eval::summarize;
use dynmeans::io::{self, BatchRecord, TruthRecord};
use dynmeans::pipeline::{reparameterize, ReparamConfig, RunConfig};
use dynmeans::synth::generate;

use crate::commands::{cluster_records, read_batches, read_truth, score};
use crate::{CliError, Outcome, SynthFlags};

/// Grid axis: `a,b,c` or an inclusive linear range `start:stop:count`.
#[derive(Debug, Clone)]
pub struct Axis(Vec<f64>);

fn parse_axis(s: &str) -> Result<Axis, String> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    let values = if let [start, stop, count] = s.split(':').collect::<Vec<_>>()[..] {
        let (start, stop) = (num(start)?, num(stop)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|e| format!("'{count}': {e}"))?;
        match count {
            0 => return Err("range count must be at least 1".into()),
            1 => vec![start],
            _ => (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(format!("'{s}' is not a list of finite numbers"));
    }
    Ok(Axis(values))
}

/// Comma-separated restart counts.
#[derive(Debug, Clone)]
pub struct Counts(Vec<usize>);

fn parse_counts(s: &str) -> Result<Counts, String> {
    let v = s
        .split(',')
        .map(|c| c.trim().parse::<usize>().map_err(|e| format!("'{c}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.contains(&0) {
        return Err("restart counts must be at least 1".into());
    }
    Ok(Counts(v))
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Batch-sequence file; when omitted every trial clusters freshly generated data
    #[arg(long, short, requires = "truth")]
    input: Option<PathBuf>,
    /// Ground truth for --input
    #[arg(long, requires = "input")]
    truth: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthFlags,
    /// lambda values, e.g. 0.02,0.04 or 0.02:0.06:5
    #[arg(long, value_parser = parse_axis)]
    lambda: Axis,
    /// N_Q values
    #[arg(long, value_parser = parse_axis)]
    n_q: Axis,
    /// k_tau values
    #[arg(long, value_parser = parse_axis)]
    k_tau: Axis,
    /// Restart counts, e.g. 1,3,5
    #[arg(long, value_parser = parse_counts, default_value = "3")]
    restarts: Counts,
    /// Seeded trials per grid point
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = dynmeans::cluster::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Base seed; trial i uses seed + i for data generation and scan orders
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Line-delimited JSON rows
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Comma-separated table
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub n_q: f64,
    pub k_tau: f64,
    pub q: f64,
    pub tau: f64,
    pub restarts: usize,
    pub trials: usize,
    pub tracked_mean: f64,
    pub tracked_std: f64,
    pub untracked_mean: f64,
    pub untracked_std: f64,
    pub step_ms_mean: f64,
    pub step_ms_std: f64,
    pub unconverged_steps: usize,
}

struct TrialScore {
    tracked: f64,
    untracked: f64,
    step_ms: f64,
    unconverged: usize,
}

enum Data {
    Fixed(Vec<BatchRecord>, Vec<TruthRecord>),
    Generated(SynthFlags),
}

fn run_trial(
    data: &Data,
    reparam: ReparamConfig,
    restarts: usize,
    max_iters: usize,
    seed: u64,
    timing: bool,
) -> Result<TrialScore, CliError> {
    let generated;
    let (batches, truth) = match data {
        Data::Fixed(b, t) => (b, t),
        Data::Generated(flags) => {
            let sequence =
                generate(&flags.config(seed)?).map_err(|e| CliError::usage(e.to_string()))?;
            generated = io::synthetic_records(&sequence);
            (&generated.0, &generated.1)
        }
    };
    let cfg = RunConfig::new(reparam)
        .with_restarts(restarts)
        .with_max_iters(max_iters)
        .with_seed(seed);
    let result = cluster_records(batches, &cfg, timing)?;
    let report = score(&result, truth)?;
    let secs: Vec<f64> = result.steps.iter().map(|s| s.wall_time_s).collect();
    Ok(TrialScore {
        tracked: report.tracked_accuracy,
        untracked: report.untracked_accuracy,
        step_ms: summarize(&secs).mean * 1e3,
        unconverged: result.steps.iter().filter(|s| !s.converged).count(),
    })
}

pub fn run(args: SweepArgs, timing: bool) -> Result<Outcome, CliError> {
    if args.trials == 0 {
        return Err(CliError::usage("--trials: must be at least 1"));
    }
    if args.max_iters == 0 {
        return Err(CliError::usage("--max-iters: must be at least 1"));
    }
    let mut grid = Vec::new();
    for &lambda in &args.lambda.0 {
        for &n_q in &args.n_q.0 {
            for &k_tau in &args.k_tau.0 {
                let cfg = ReparamConfig { lambda, n_q, k_tau };
                reparameterize(&cfg)
                    .map_err(|e| CliError::usage(format!("--lambda/--n-q/--k-tau: {e}")))?;
                for &restarts in &args.restarts.0 {
                    grid.push((cfg, restarts));
                }
            }
        }
    }
    // validate generator flags once up front
    args.synth.config(args.seed)?;

    let data = match (&args.input, &args.truth) {
        (Some(input), Some(truth)) => Data::Fixed(read_batches(input)?, read_truth(truth)?),
        _ => Data::Generated(args.synth.clone()),
    };

    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|g| (0..args.trials as u64).map(move |i| (g, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    let scores: Vec<TrialScore> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, i)| {
                let (cfg, restarts) = grid[g];
                run_trial(
                    &data,
                    cfg,
                    restarts,
                    args.max_iters,
                    args.seed.wrapping_add(i),
                    timing,
                )
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let rows: Vec<SweepRow> = grid
        .iter()
        .zip(scores.chunks(args.trials))
        .map(|(&(cfg, restarts), trials)| {
            let params = reparameterize(&cfg).expect("validated above");
            let pick =
                |f: fn(&TrialScore) -> f64| summarize(&trials.iter().map(f).collect::<Vec<_>>());
            let tracked = pick(|s| s.tracked);
            let untracked = pick(|s| s.untracked);
            let ms = pick(|s| s.step_ms);
            SweepRow {
                lambda: cfg.lambda,
                n_q: cfg.n_q,
                k_tau: cfg.k_tau,
                q: params.q_penalty(),
                tau: params.tau(),
                restarts,
                trials: trials.len(),
                tracked_mean: tracked.mean,
                tracked_std: tracked.std,
                untracked_mean: untracked.mean,
                untracked_std: untracked.std,
                step_ms_mean: ms.mean,
                step_ms_std: ms.std,
                unconverged_steps: trials.iter().map(|s| s.unconverged).sum(),
            }
        })
        .collect();

    print_table(&rows);
    if let Some(path) = &args.output {
        write_to(path, |w| {
            for r in &rows {
                serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })?;
    }
    if let Some(path) = &args.csv {
        write_to(path, |w| write_csv(w, &rows))?;
    }

    if rows.iter().any(|r| r.unconverged_steps > 0) {
        Ok(Outcome::Unconverged)
    } else {
        Ok(Outcome::Done)
    }
}

fn write_to(
    path: &PathBuf,
    body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(err)?);
    body(&mut w).map_err(err)?;
    w.flush().map_err(err)
}

fn write_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "lambda,n_q,k_tau,q,tau,restarts,trials,tracked_mean,tracked_std,untracked_mean,untracked_std,step_ms_mean,step_ms_std,unconverged_steps"
    )?;
    for r in rows {
        writeln!(
            w,
            "{:?},{:?},{:?},{:?},{:?},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            r.lambda,
            r.n_q,
            r.k_tau,
            r.q,
            r.tau,
            r.restarts,
            r.trials,
            r.tracked_mean,
            r.tracked_std,
            r.untracked_mean,
            r.untracked_std,
            r.step_ms_mean,
            r.step_ms_std,
            r.unconverged_steps
        )?;
    }
    Ok(())
}

fn print_table(rows: &[SweepRow]) {
    println!(
        "{:>9} {:>7} {:>7} {:>8} {:>13} {:>15} {:>12}",
        "lambda", "n_q", "k_tau", "restarts", "tracked", "untracked", "step_ms"
    );
    for r in rows {
        println!(
            "{:>9.4} {:>7.3} {:>7.3} {:>8} {:>6.4}±{:<6.4} {:>7.4}±{:<7.4} {:>12.4}",
            r.lambda,
            r.n_q,
            r.k_tau,
            r.restarts,
            r.tracked_mean,
            r.tracked_std,
            r.untracked_mean,
            r.untracked_std,
            r.step_ms_mean
        );
    }
}
