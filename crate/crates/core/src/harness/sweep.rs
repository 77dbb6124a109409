//! One-parameter sweeps: isolated runs per point plus an aggregate table.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{RunConfig, Scenario, SweepParameter};
use super::scenario::{run, Criterion, Metrics};
use crate::correspondence::fit_through_origin;
use crate::error::{Error, Result};

/// Uncentered `R²` that `Im s₁` against `c` must exceed in a coupling sweep.
pub const LINEARITY_R2: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub dir: String,
    /// `None` when the point ran to completion.
    pub error: Option<String>,
    pub passed: bool,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub run_id: String,
    pub config: RunConfig,
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
    /// Checks across points, when the scenario and axis define one.
    pub checks: Vec<Criterion>,
    /// `R²` of `s₂` against `c` through the origin; reported, not checked.
    pub s2_linear_r2: Option<f64>,
    pub passed: bool,
}

/// Like [`RunConfig::run_id`] but over the config including its sweep axis.
pub fn sweep_id(cfg: &RunConfig) -> String {
    let mut full = cfg.clone();
    full.output = None;
    let digest = Sha256::digest(full.to_toml().as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

pub fn point_dir(index: usize) -> String {
    format!("point_{index:03}")
}

fn get(m: &Metrics, key: &str) -> f64 {
    m.get(key).copied().flatten().unwrap_or(f64::NAN)
}

/// Checks across points, computed from per-point metrics only.
pub fn aggregate_checks(scenario: Scenario, parameter: SweepParameter, points: &[SweepPoint]) -> (Vec<Criterion>, Option<f64>) {
    let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.error.is_none()).collect();
    match (scenario, parameter) {
        (Scenario::SlopeCheck, SweepParameter::Coupling) => {
            let cs: Vec<f64> = ok.iter().map(|p| p.value).collect();
            let im_s1: Vec<Complex64> = ok
                .iter()
                .map(|p| Complex64::new(get(&p.metrics, "s1_im"), 0.0))
                .collect();
            let s2: Vec<Complex64> = ok
                .iter()
                .map(|p| Complex64::new(get(&p.metrics, "s2_re"), get(&p.metrics, "s2_im")))
                .collect();
            let r2 = fit_through_origin(&cs, &im_s1).map_or(f64::NAN, |f| f.1);
            let s2_r2 = fit_through_origin(&cs, &s2).ok().map(|f| f.1);
            (vec![Criterion::above("im_s1_linear_r2", r2, LINEARITY_R2)], s2_r2)
        }
        (Scenario::FreeCoherence, SweepParameter::NMax) => {
            let mut sorted: Vec<(f64, f64)> = ok
                .iter()
                .map(|p| (p.value, get(&p.metrics, "max_one_minus_abs_r")))
                .collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let violations = sorted.windows(2).filter(|w| w[1].1.partial_cmp(&w[0].1) != Some(std::cmp::Ordering::Less)).count();
            (vec![Criterion::at_most("n_max_monotonicity_violations", violations as f64, 0.0)], None)
        }
        _ => (Vec::new(), None),
    }
}

fn write_aggregate_csv(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "# coherent-soliton sweep run_id={} scenario={} parameter={}",
        report.run_id,
        report.config.scenario.name(),
        report.parameter.name()
    )?;
    writeln!(w, "# config:")?;
    for line in report.config.to_toml().lines() {
        writeln!(w, "# {line}")?;
    }
    let mut names: Vec<&String> = report.points.iter().flat_map(|p| p.metrics.keys()).collect();
    names.sort();
    names.dedup();
    write!(w, "index,{},status,passed", report.parameter.name())?;
    for n in &names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for p in &report.points {
        let status = if p.error.is_some() { "error" } else { "ok" };
        write!(w, "{},{:.16e},{},{}", p.index, p.value, status, p.passed)?;
        for n in &names {
            match p.metrics.get(*n).copied().flatten() {
                Some(v) => write!(w, ",{v:.16e}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every point of `cfg.sweep` in a pool of `workers` threads. Point failures
/// are recorded and the sweep continues; configs are validated up front.
pub fn sweep(cfg: &RunConfig, out: &Path, workers: usize) -> Result<SweepReport> {
    cfg.validate()?;
    let axis = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    let configs: Vec<RunConfig> = axis
        .values
        .iter()
        .map(|&v| cfg.with_parameter(axis.parameter, v))
        .collect();
    for (c, v) in configs.iter().zip(&axis.values) {
        c.validate()
            .map_err(|e| Error::Config(format!("sweep point {} = {v}: {e}", axis.parameter.name())))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    fs::create_dir_all(out)?;
    let points: Vec<SweepPoint> = pool.install(|| {
        configs
            .par_iter()
            .zip(axis.values.par_iter())
            .enumerate()
            .map(|(index, (c, &value))| {
                let dir = point_dir(index);
                match run(c, &out.join(&dir)) {
                    Ok(report) => SweepPoint {
                        index,
                        value,
                        dir,
                        error: None,
                        passed: report.passed,
                        metrics: report.metrics,
                    },
                    Err(e) => {
                        warn!("sweep point {index} ({} = {value}) failed: {e}", axis.parameter.name());
                        SweepPoint {
                            index,
                            value,
                            dir,
                            error: Some(e.to_string()),
                            passed: false,
                            metrics: Metrics::new(),
                        }
                    }
                }
            })
            .collect()
    });

    let (checks, s2_linear_r2) = aggregate_checks(cfg.scenario, axis.parameter, &points);
    let no_errors = points.iter().all(|p| p.error.is_none());
    let passed = no_errors
        && if checks.is_empty() {
            points.iter().all(|p| p.passed)
        } else {
            checks.iter().all(|c| c.passed)
        };
    let report = SweepReport {
        run_id: sweep_id(cfg),
        config: RunConfig {
            output: None,
            ..cfg.clone()
        },
        parameter: axis.parameter,
        points,
        checks,
        s2_linear_r2,
        passed,
    };
    write_aggregate_csv(&out.join("sweep.csv"), &report)?;
    let mut w = BufWriter::new(fs::File::create(out.join("sweep.json"))?);
    serde_json::to_writer_pretty(&mut w, &report).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(report)
}
