//! Single runs and parameter sweeps with CSV output.
//!
//! Output layout for a sweep in `out_dir`:
//!
//! * `config.toml`: the canonical config that produced the results;
//! * `metrics_<label>_<PROTOCOL>.csv`: per-topology metrics of one sweep point;
//! * `plot[_<series>].csv`: spatial averages per sweep value and protocol, one
//!   file per series value, rewritten after every completed point.
//!
//! A single run writes `metrics_<PROTOCOL>.csv` and `summary.csv` with the
//! same columns.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::config::ExperimentConfig;
use crate::engine::{run_observed, RunOptions, RunResult, TrialView};
use crate::error::{Result, SimError};
use crate::metrics::{summary_record, write_topology_csv, SUMMARY_CSV_HEADER};
use crate::topology::fmt_f64;

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub run: RunOptions,
    /// Dump candidate links and paths of every trial of topology 0.
    pub dump_trials: bool,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub result: RunResult,
}

#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub series_value: Option<f64>,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub parameter: String,
    pub series_parameter: Option<String>,
    pub series: Vec<SeriesResult>,
    pub files: Vec<PathBuf>,
}

/// Shortest round-trip form, with characters unfit for file names replaced.
fn label_value(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

fn csv_file(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

#[derive(Default)]
struct TrialDump {
    links: Vec<Vec<String>>,
    paths: Vec<Vec<String>>,
}

impl TrialDump {
    fn observe(&mut self, view: &TrialView<'_>) {
        let r = view.record;
        let ids = [r.topology_id.to_string(), r.service_id.to_string(), r.trial_id.to_string()];
        for c in view.candidates.links() {
            let mut row = ids.to_vec();
            row.extend([
                c.link.from.to_string(),
                c.link.to.to_string(),
                fmt_f64(view.topology.distance(c.link.from, c.link.to)),
                fmt_f64(c.outage),
                c.attempts.to_string(),
                fmt_f64(c.delay),
            ]);
            self.links.push(row);
        }
        for o in &r.outcomes {
            let mut row = ids.to_vec();
            row.extend([
                o.protocol.to_string(),
                o.success().to_string(),
                fmt_f64(o.delay.unwrap_or(f64::NAN)),
                o.hops().to_string(),
                o.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "),
            ]);
            self.paths.push(row);
        }
    }

    fn write(&self, dir: &Path, label: &str, files: &mut Vec<PathBuf>) -> Result<()> {
        let tag = if label.is_empty() { String::new() } else { format!("_{label}") };
        let links_path = dir.join(format!("trials_links{tag}.csv"));
        let mut w = csv_file(&links_path)?;
        w.write_record(["topology_id", "service_id", "trial_id", "a", "b", "distance", "eps", "attempts", "delay"])?;
        for row in &self.links {
            w.write_record(row)?;
        }
        w.flush()?;
        let paths_path = dir.join(format!("trials_paths{tag}.csv"));
        let mut w = csv_file(&paths_path)?;
        w.write_record(["topology_id", "service_id", "trial_id", "protocol", "success", "delay", "hops", "path"])?;
        for row in &self.paths {
            w.write_record(row)?;
        }
        w.flush()?;
        files.push(links_path);
        files.push(paths_path);
        Ok(())
    }
}

fn execute(cfg: &ExperimentConfig, options: &SweepOptions) -> Result<(RunResult, Option<TrialDump>)> {
    if !options.dump_trials {
        let result = run_observed(&cfg.plan, &cfg.network, &cfg.channel, &cfg.service, &options.run, &|_| {})?;
        return Ok((result, None));
    }
    let dump = Mutex::new(TrialDump::default());
    let observer = |view: &TrialView<'_>| {
        if view.record.topology_id == 0 {
            dump.lock().expect("dump lock").observe(view);
        }
    };
    let result = run_observed(&cfg.plan, &cfg.network, &cfg.channel, &cfg.service, &options.run, &observer)?;
    Ok((result, Some(dump.into_inner().expect("dump lock"))))
}

fn write_metrics(dir: &Path, label: &str, result: &RunResult, files: &mut Vec<PathBuf>) -> Result<()> {
    for (p, protocol) in result.protocols.iter().enumerate() {
        let name = if label.is_empty() {
            format!("metrics_{protocol}.csv")
        } else {
            format!("metrics_{label}_{protocol}.csv")
        };
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write_topology_csv(&mut w, *protocol, &result.per_topology[p])?;
        w.flush()?;
        files.push(path);
    }
    Ok(())
}

fn write_summary(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv_file(path)?;
    w.write_record(SUMMARY_CSV_HEADER)?;
    for point in points {
        for (p, protocol) in point.result.protocols.iter().enumerate() {
            w.write_record(summary_record(point.value, *protocol, &point.result.averages[p]))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_canonical(dir: &Path, cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml()?)?;
    files.push(path);
    Ok(())
}

/// Runs the base point of `cfg` (ignoring any sweep). `sweep_value` only
/// fills the first column of `summary.csv`.
pub fn run_single(cfg: &ExperimentConfig, out_dir: &Path, options: &SweepOptions) -> Result<(RunResult, Vec<PathBuf>)> {
    let cfg = cfg.single_point();
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    write_canonical(out_dir, &cfg, &mut files)?;
    let (result, dump) = execute(&cfg, options)?;
    write_metrics(out_dir, "", &result, &mut files)?;
    let summary = out_dir.join("summary.csv");
    let point = SweepPoint { value: f64::NAN, result };
    write_summary(&summary, std::slice::from_ref(&point))?;
    files.push(summary);
    if let Some(d) = dump {
        d.write(out_dir, "", &mut files)?;
    }
    Ok((point.result, files))
}

/// Runs every point of the sweep, series by series, writing results as each
/// point completes.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, options: &SweepOptions) -> Result<SweepReport> {
    let sweep = cfg
        .file
        .sweep
        .clone()
        .ok_or_else(|| SimError::InvalidConfig("config has no [sweep] section".into()))?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    write_canonical(out_dir, cfg, &mut files)?;

    let series_values: Vec<Option<f64>> = match &sweep.series_parameter {
        Some(_) => sweep.series_values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut series = Vec::with_capacity(series_values.len());
    for sv in series_values {
        let series_label = match (&sweep.series_parameter, sv) {
            (Some(key), Some(v)) => format!("{key}_{}", label_value(v)),
            _ => String::new(),
        };
        let plot_path = if series_label.is_empty() {
            out_dir.join("plot.csv")
        } else {
            out_dir.join(format!("plot_{series_label}.csv"))
        };
        let mut points = Vec::with_capacity(sweep.values.len());
        for &value in &sweep.values {
            let point_cfg = cfg.at_point(sv, value)?;
            let (result, dump) = execute(&point_cfg, options)?;
            let point_label = if series_label.is_empty() {
                format!("{}_{}", sweep.parameter, label_value(value))
            } else {
                format!("{series_label}_{}_{}", sweep.parameter, label_value(value))
            };
            write_metrics(out_dir, &point_label, &result, &mut files)?;
            if let Some(d) = dump {
                d.write(out_dir, &point_label, &mut files)?;
            }
            points.push(SweepPoint { value, result });
            write_summary(&plot_path, &points)?;
        }
        files.push(plot_path);
        series.push(SeriesResult {
            series_value: sv,
            points,
        });
    }
    Ok(SweepReport {
        parameter: sweep.parameter,
        series_parameter: sweep.series_parameter,
        series,
        files,
    })
}
