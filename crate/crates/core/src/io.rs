//! Line-delimited JSON file formats and CSV exports.
//!
//! * batch file: one `{"t": .., "points": [[..], ..]}` record per timestep
//! * truth file: one `{"t": .., "labels": [..], "clusters": [..]}` record per timestep
//! * result file: a `{"kind": "header", ..}` record followed by one
//!   `{"kind": "step", ..}` record per timestep
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so reading a file back reproduces the written values bit for bit.

use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ActiveCluster, ClusterId};
use crate::pipeline::{ReparamConfig, RunConfig, SequenceResult};
use crate::synth::LabeledBatchSequence;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchRecord {
    pub t: u64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthCluster {
    pub id: u64,
    pub center: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub t: u64,
    pub labels: Vec<u64>,
    #[serde(default)]
    pub clusters: Vec<TruthCluster>,
}

/// Fully resolved configuration written at the top of a result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultHeader {
    pub lambda: f64,
    pub q: f64,
    pub tau: f64,
    pub n_q: Option<f64>,
    pub k_tau: Option<f64>,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub version: String,
}

impl ResultHeader {
    pub fn new(cfg: &RunConfig, resolved: &crate::cluster::DynMeansParams) -> Self {
        let reparam: Option<ReparamConfig> = match cfg.params {
            crate::pipeline::ParamSpec::Reparam(r) => Some(r),
            crate::pipeline::ParamSpec::Direct(_) => None,
        };
        Self {
            lambda: resolved.lambda(),
            q: resolved.q_penalty(),
            tau: resolved.tau(),
            n_q: reparam.map(|r| r.n_q),
            k_tau: reparam.map(|r| r.k_tau),
            restarts: cfg.restarts,
            max_iters: cfg.max_iters,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub id: u64,
    pub center: Vec<f64>,
    pub weight: f64,
    pub age: u32,
}

impl From<&ActiveCluster> for ClusterSnapshot {
    fn from(c: &ActiveCluster) -> Self {
        Self {
            id: c.id.0,
            center: c.center.clone(),
            weight: c.weight,
            age: c.age,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub labels: Vec<u64>,
    pub clusters: Vec<ClusterSnapshot>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultLine {
    Header(ResultHeader),
    Step(StepRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultFile {
    pub header: ResultHeader,
    pub steps: Vec<StepRecord>,
}

impl ResultFile {
    /// Build from an in-memory run. `timesteps` are the input record indices;
    /// when `record_timing` is false every wall time is written as 0.
    pub fn from_sequence(
        header: ResultHeader,
        result: &SequenceResult,
        timesteps: &[u64],
        record_timing: bool,
    ) -> Self {
        let steps = result
            .steps
            .iter()
            .zip(timesteps)
            .map(|(s, &t)| StepRecord {
                t,
                labels: s.labels.labels.iter().map(|id| id.0).collect(),
                clusters: s.clusters.iter().map(ClusterSnapshot::from).collect(),
                cost: s.cost,
                iterations: s.iterations,
                converged: s.converged,
                wall_time_s: if record_timing {
                    s.wall_time.as_secs_f64()
                } else {
                    0.0
                },
            })
            .collect();
        Self { header, steps }
    }

    pub fn labels(&self) -> Vec<Vec<u64>> {
        self.steps.iter().map(|s| s.labels.clone()).collect()
    }

    pub fn wall_times(&self) -> Vec<Duration> {
        self.steps
            .iter()
            .map(|s| Duration::from_secs_f64(s.wall_time_s.max(0.0)))
            .collect()
    }
}

/// Iterate non-blank lines with 1-based line numbers.
fn records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), FormatError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(FormatError::Io(e))),
        })
}

/// Parse a batch file, checking that timestep indices strictly increase and
/// all points share one dimension.
pub fn read_batches<R: BufRead>(reader: R) -> Result<Vec<BatchRecord>, FormatError> {
    let mut out: Vec<BatchRecord> = Vec::new();
    let mut dim: Option<usize> = None;
    for item in records(reader) {
        let (line, text) = item?;
        let rec: BatchRecord =
            serde_json::from_str(&text).map_err(|e| malformed(line, e.to_string()))?;
        if let Some(prev) = out.last() {
            if rec.t <= prev.t {
                return Err(malformed(
                    line,
                    format!("timestep {} does not follow {}", rec.t, prev.t),
                ));
            }
        }
        for (i, p) in rec.points.iter().enumerate() {
            let expected = *dim.get_or_insert(p.len());
            if p.is_empty() || p.len() != expected {
                return Err(malformed(
                    line,
                    format!("point {i} has dimension {}, expected {expected}", p.len()),
                ));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_batches<W: Write>(mut w: W, batches: &[BatchRecord]) -> Result<(), FormatError> {
    for b in batches {
        serde_json::to_writer(&mut w, b).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_truth<R: BufRead>(reader: R) -> Result<Vec<TruthRecord>, FormatError> {
    let mut out: Vec<TruthRecord> = Vec::new();
    for item in records(reader) {
        let (line, text) = item?;
        let rec: TruthRecord =
            serde_json::from_str(&text).map_err(|e| malformed(line, e.to_string()))?;
        if let Some(prev) = out.last() {
            if rec.t <= prev.t {
                return Err(malformed(
                    line,
                    format!("timestep {} does not follow {}", rec.t, prev.t),
                ));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_truth<W: Write>(mut w: W, truth: &[TruthRecord]) -> Result<(), FormatError> {
    for r in truth {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Split generated data into batch and truth records.
pub fn synthetic_records(data: &LabeledBatchSequence) -> (Vec<BatchRecord>, Vec<TruthRecord>) {
    let batches = data
        .batches
        .iter()
        .enumerate()
        .map(|(t, points)| BatchRecord {
            t: t as u64,
            points: points.clone(),
        })
        .collect();
    let truth = data
        .labels
        .iter()
        .enumerate()
        .map(|(t, labels)| TruthRecord {
            t: t as u64,
            labels: labels.clone(),
            clusters: data
                .centers_at(t)
                .into_iter()
                .map(|(id, center)| TruthCluster { id, center })
                .collect(),
        })
        .collect();
    (batches, truth)
}

pub fn write_result<W: Write>(mut w: W, result: &ResultFile) -> Result<(), FormatError> {
    serde_json::to_writer(&mut w, &ResultLine::Header(result.header.clone()))
        .map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for s in &result.steps {
        serde_json::to_writer(&mut w, &ResultLine::Step(s.clone()))
            .map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_result<R: BufRead>(reader: R) -> Result<ResultFile, FormatError> {
    let mut header = None;
    let mut steps = Vec::new();
    for item in records(reader) {
        let (line, text) = item?;
        let parsed: ResultLine =
            serde_json::from_str(&text).map_err(|e| malformed(line, e.to_string()))?;
        match parsed {
            ResultLine::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
            ResultLine::Header(_) => return Err(malformed(line, "unexpected header record")),
            ResultLine::Step(_) if header.is_none() => {
                return Err(malformed(line, "step record before header"))
            }
            ResultLine::Step(s) => {
                let known = s
                    .labels
                    .iter()
                    .all(|id| s.clusters.iter().any(|c| c.id == *id));
                if !known {
                    return Err(malformed(
                        line,
                        "label refers to a cluster missing from the snapshot",
                    ));
                }
                steps.push(s);
            }
        }
    }
    let header = header.ok_or_else(|| malformed(1, "missing header record"))?;
    Ok(ResultFile { header, steps })
}

/// Flat per-point table: `t,point,label`.
pub fn write_result_csv<W: Write>(mut w: W, result: &ResultFile) -> Result<(), FormatError> {
    writeln!(w, "t,point,label")?;
    for s in &result.steps {
        for (i, l) in s.labels.iter().enumerate() {
            writeln!(w, "{},{},{}", s.t, i, l)?;
        }
    }
    Ok(())
}

/// Per-timestep table: `t,points,clusters,cost,iterations,converged,wall_time_s`.
pub fn write_steps_csv<W: Write>(mut w: W, result: &ResultFile) -> Result<(), FormatError> {
    writeln!(w, "t,points,clusters,cost,iterations,converged,wall_time_s")?;
    for s in &result.steps {
        writeln!(
            w,
            "{},{},{},{:?},{},{},{:?}",
            s.t,
            s.labels.len(),
            s.clusters.len(),
            s.cost,
            s.iterations,
            s.converged,
            s.wall_time_s
        )?;
    }
    Ok(())
}

pub fn labels_as_ids(labels: &[u64]) -> Vec<ClusterId> {
    labels.iter().copied().map(ClusterId).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_file_line_numbers_in_errors() {
        let text = "{\"t\":0,\"points\":[[1.0,2.0]]}\n\n{\"t\":1,\"points\":[[1.0]]}\n";
        match read_batches(text.as_bytes()) {
            Err(FormatError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "{\"t\":0,\"points\":[]}\n{\"t\":0,\"points\":[]}\n";
        assert!(matches!(
            read_batches(text.as_bytes()),
            Err(FormatError::Malformed { line: 2, .. })
        ));
        let text = "{\"t\":0,\"points\":[[1.0,]]}\n";
        assert!(matches!(
            read_batches(text.as_bytes()),
            Err(FormatError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn empty_batch_file() {
        assert!(read_batches("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn result_requires_header_first() {
        let step = r#"{"kind":"step","t":0,"labels":[],"clusters":[],"cost":0.0,"iterations":1,"converged":true,"wall_time_s":0.0}"#;
        assert!(matches!(
            read_result(step.as_bytes()),
            Err(FormatError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn floats_round_trip_exactly() {
        let vals = [
            0.1,
            1.0 / 3.0,
            2.0f64.sqrt(),
            1e-300,
            123456.789e10,
            -0.000_012_5,
        ];
        let rec = BatchRecord {
            t: 0,
            points: vals.iter().map(|&v| vec![v]).collect(),
        };
        let mut buf = Vec::new();
        write_batches(&mut buf, std::slice::from_ref(&rec)).unwrap();
        let back = read_batches(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
    }
}
