use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{ExperimentSummary, TrialRecord};
use crate::error::{Error, Result};
use crate::solver::TraceRow;

pub const SUMMARY_HEADER: &str = "problem,dims,solver,trials,rate,grad_gm,time_gm_s,seed_base";
pub const TRACE_HEADER: &str = "iter,elapsed_s,grad_unscaled,r_norm,f,step_norm,theta,alpha,delta";

/// Output locations under one directory.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub summary: PathBuf,
    pub trials: PathBuf,
    pub traces: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        OutputPaths {
            summary: dir.join("summary.csv"),
            trials: dir.join("trials.jsonl"),
            traces: dir.join("traces"),
        }
    }

    pub fn trace_file(&self, trial: usize) -> PathBuf {
        self.traces.join(format!("trial_{trial:03}.csv"))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Shortest round-trip text for a float, in scientific form outside
/// `[1e-4, 1e6)`.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn trace_fields(r: &TraceRow) -> [String; 9] {
    [
        r.iter.to_string(),
        fmt_f64(r.elapsed_s),
        fmt_f64(r.grad_unscaled),
        fmt_f64(r.r_norm),
        fmt_f64(r.f),
        opt(r.step_norm),
        opt(r.theta),
        opt(r.alpha),
        opt(r.delta),
    ]
}

/// Write the summary CSV, the per-trial JSON-lines file and one trace CSV per trial.
pub fn emit_outputs(summary: &ExperimentSummary, paths: &OutputPaths) -> Result<()> {
    for p in [&paths.summary, &paths.trials] {
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::create_dir_all(&paths.traces).map_err(io_err(&paths.traces))?;

    let mut w = csv::Writer::from_path(&paths.summary).map_err(csv_err(&paths.summary))?;
    w.write_record(SUMMARY_HEADER.split(',')).map_err(csv_err(&paths.summary))?;
    w.write_record([
        summary.problem.clone(),
        summary.dims.clone(),
        summary.solver.clone(),
        summary.trials.to_string(),
        fmt_f64(summary.rate),
        fmt_f64(summary.grad_gm),
        fmt_f64(summary.time_gm_s),
        summary.seed_base.to_string(),
    ])
    .map_err(csv_err(&paths.summary))?;
    w.flush().map_err(io_err(&paths.summary))?;

    let file = File::create(&paths.trials).map_err(io_err(&paths.trials))?;
    let mut out = BufWriter::new(file);
    for rec in summary.records() {
        let line = serde_json::to_string(rec).map_err(|e| Error::Format {
            path: paths.trials.clone(),
            message: e.to_string(),
        })?;
        writeln!(out, "{line}").map_err(io_err(&paths.trials))?;
    }
    out.flush().map_err(io_err(&paths.trials))?;

    for o in &summary.outcomes {
        let path = paths.trace_file(o.record.trial);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(TRACE_HEADER.split(',')).map_err(csv_err(&path))?;
        for row in &o.trace {
            w.write_record(trace_fields(row)).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

/// Read back a JSON-lines trial file.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{aggregate, run_experiment, ExperimentConfig, ProblemKind, ProblemSpec, SolverKind};
    use super::*;

    fn small_run() -> ExperimentSummary {
        let spec = ProblemSpec {
            n: 30,
            p: 3,
            ..ProblemSpec::default_for(ProblemKind::Maxcut)
        };
        let mut cfg = ExperimentConfig::new(spec, SolverKind::Rram);
        cfg.trials = 3;
        cfg.seed_base = 4;
        run_experiment(&cfg).unwrap()
    }

    #[test]
    fn float_text_round_trips() {
        for v in [0.0, 0.8, 1e-7, 4.641588833612772e-7, 123456.75, 3e9, -2.5e-12] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1e-7), "1e-7");
        assert_eq!(fmt_f64(0.8), "0.8");
    }

    #[test]
    fn outputs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = small_run();
        let paths = OutputPaths::in_dir(dir.path());
        emit_outputs(&s, &paths).unwrap();

        let text = fs::read_to_string(&paths.summary).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SUMMARY_HEADER);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "maxcut");
        assert_eq!(row[1], "30x3");
        assert_eq!(row[3], "3");

        let recs = read_records(&paths.trials).unwrap();
        let mem: Vec<TrialRecord> = s.records().cloned().collect();
        assert_eq!(recs, mem);
        let (rate, g, t) = aggregate(&recs);
        assert_eq!(row[4].parse::<f64>().unwrap(), rate);
        assert_eq!(row[5].parse::<f64>().unwrap(), g);
        assert_eq!(row[6].parse::<f64>().unwrap(), t);

        for o in &s.outcomes {
            let trace = fs::read_to_string(paths.trace_file(o.record.trial)).unwrap();
            let mut tl = trace.lines();
            assert_eq!(tl.next().unwrap(), TRACE_HEADER);
            assert_eq!(tl.count(), o.trace.len());
        }
    }

    #[test]
    fn zero_iteration_run_writes_one_trace_row() {
        let spec = ProblemSpec {
            n: 4,
            m: 1,
            ..ProblemSpec::default_for(ProblemKind::Karcher)
        };
        let mut cfg = ExperimentConfig::new(spec, SolverKind::Rgd);
        cfg.trials = 1;
        let s = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = OutputPaths::in_dir(dir.path());
        emit_outputs(&s, &paths).unwrap();
        let trace = fs::read_to_string(paths.trace_file(0)).unwrap();
        let rows: Vec<&str> = trace.lines().collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].ends_with(",,,,"));
    }

    #[test]
    fn unwritable_path_reports_context() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let paths = OutputPaths::in_dir(blocker.join("sub"));
        let err = emit_outputs(&small_run(), &paths).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
