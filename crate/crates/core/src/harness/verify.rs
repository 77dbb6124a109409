//! Re-reads a finished run or sweep and recomputes its criteria from the artifacts.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::Scenario;
use super::scenario::{
    classical_criteria, classical_summary, decay_criteria, free_coherence_criteria, slope_criteria,
    xcheck_criteria, Artifact, ClassicalSummary, Criterion, OverlapSummary, RunReport, XcheckReport,
};
use super::sweep::{aggregate_checks, SweepReport};
use crate::classical::Trajectory;
use crate::correspondence::{fit_quadratic, OverlapSeries, SlopeReport};
use crate::error::{Error, Result};
use crate::grid::{ClassicalField, Grid};

/// Recomputed numbers may differ from stored ones by the CSV round trip only.
const RELATIVE_AGREEMENT: f64 = 1e-12;
const ABSOLUTE_AGREEMENT: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub dir: String,
    pub run_id: String,
    /// Criteria recomputed from the artifacts.
    pub criteria: Vec<Criterion>,
    /// Disagreements between the stored manifest and the recomputation.
    pub mismatches: Vec<String>,
    pub passed: bool,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {msg}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| bad(path, e))?;
    serde_json::from_str(&text).map_err(|e| bad(path, e))
}

fn agree(a: f64, b: f64) -> bool {
    if a.is_nan() && b.is_nan() {
        return true;
    }
    (a - b).abs() <= RELATIVE_AGREEMENT * a.abs().max(b.abs()) + ABSOLUTE_AGREEMENT
}

fn compare(mismatches: &mut Vec<String>, what: &str, stored: f64, recomputed: f64) {
    if !agree(stored, recomputed) {
        mismatches.push(format!("{what}: stored {stored:e}, recomputed {recomputed:e}"));
    }
}

fn compare_criteria(mismatches: &mut Vec<String>, stored: &[Criterion], recomputed: &[Criterion]) {
    if stored.len() != recomputed.len() {
        mismatches.push(format!(
            "criteria count: stored {}, recomputed {}",
            stored.len(),
            recomputed.len()
        ));
    }
    for r in recomputed {
        match stored.iter().find(|s| s.name == r.name) {
            None => mismatches.push(format!("criterion {} missing from run.json", r.name)),
            Some(s) => {
                if s.passed != r.passed {
                    mismatches.push(format!(
                        "criterion {}: stored {}, recomputed {}",
                        r.name,
                        if s.passed { "PASS" } else { "FAIL" },
                        if r.passed { "PASS" } else { "FAIL" }
                    ));
                }
                compare(
                    mismatches,
                    &format!("criterion {} value", r.name),
                    s.value.unwrap_or(f64::NAN),
                    r.value.unwrap_or(f64::NAN),
                );
            }
        }
    }
}

/// CSV artifacts must carry the run id in their first line.
fn check_preamble(path: &Path, run_id: &str, mismatches: &mut Vec<String>) -> Result<()> {
    let mut first = String::new();
    BufReader::new(fs::File::open(path).map_err(|e| bad(path, e))?).read_line(&mut first)?;
    if !first.contains(&format!("run_id={run_id}")) {
        mismatches.push(format!("{}: preamble does not name run {run_id}", path.display()));
    }
    Ok(())
}

fn check_artifact<T>(path: &Path, artifact: &Artifact<T>, run_id: &str, mismatches: &mut Vec<String>) {
    if artifact.run_id != run_id {
        mismatches.push(format!("{}: run_id {} ≠ {run_id}", path.display(), artifact.run_id));
    }
}

fn verify_overlap(dir: &Path, report: &RunReport, mismatches: &mut Vec<String>) -> Result<Vec<Criterion>> {
    let csv = dir.join("overlap.csv");
    check_preamble(&csv, &report.run_id, mismatches)?;
    let series = OverlapSeries::read_csv(BufReader::new(fs::File::open(&csv).map_err(|e| bad(&csv, e))?))
        .map_err(|e| bad(&csv, e))?;
    let summary_path = dir.join("summary.json");
    let stored: Artifact<OverlapSummary> = read_json(&summary_path)?;
    check_artifact(&summary_path, &stored, &report.run_id, mismatches);
    let s = &stored.data;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let mut re = s.clone();
    re.samples = series.len();
    re.min_abs = series.min_abs();
    re.max_abs = series.r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    re.max_one_minus_abs = series.r.iter().map(|z| 1.0 - z.norm()).fold(0.0, f64::max);
    re.max_abs_arg = series.r.iter().map(|z| z.arg().abs()).fold(0.0, f64::max);
    re.max_field_dev = max(&series.field_dev);
    re.max_n_drift = max(&series.n_drift);
    re.max_e_drift = max(&series.e_drift);
    if re.samples != s.samples {
        mismatches.push(format!("samples: stored {}, recomputed {}", s.samples, re.samples));
    }
    for (name, a, b) in [
        ("min_abs", s.min_abs, re.min_abs),
        ("max_abs", s.max_abs, re.max_abs),
        ("max_one_minus_abs", s.max_one_minus_abs, re.max_one_minus_abs),
        ("max_abs_arg", s.max_abs_arg, re.max_abs_arg),
        ("max_field_dev", s.max_field_dev, re.max_field_dev),
        ("max_n_drift", s.max_n_drift, re.max_n_drift),
        ("max_e_drift", s.max_e_drift, re.max_e_drift),
    ] {
        compare(mismatches, name, a, b);
    }
    Ok(if report.scenario == Scenario::FreeCoherence {
        free_coherence_criteria(&re)
    } else {
        decay_criteria(&re)
    })
}

fn verify_slope(dir: &Path, report: &RunReport, mismatches: &mut Vec<String>) -> Result<Vec<Criterion>> {
    let path = dir.join("slope.json");
    let stored: Artifact<SlopeReport> = read_json(&path)?;
    check_artifact(&path, &stored, &report.run_id, mismatches);
    let s = &stored.data;
    if s.dts.len() != s.overlaps.len() || s.dts.len() < 3 {
        return Err(bad(&path, "dts and overlaps must pair up, at least 3 of each"));
    }
    let ys: Vec<Complex64> = s.overlaps.iter().map(|z| z - 1.0).collect();
    let hi = s.dts.iter().copied().fold(0.0, f64::max);
    let noise = 2.0 * report.config.propagator.tolerance * hi + 1e-15;
    let fit = fit_quadratic(&s.dts, &ys, noise)?;
    let half = (s.dts.len() / 2).max(2);
    let half_fit = fit_quadratic(&s.dts[..half], &ys[..half], noise)?;
    let mut re = s.clone();
    re.fit = fit;
    re.half_s1 = half_fit.s1;
    re.consistent = (half_fit.s1 - fit.s1).norm() <= fit.s1_err;
    re.relative_error = if s.predicted.norm() > 0.0 {
        (fit.s1 - s.predicted).norm() / s.predicted.norm()
    } else {
        fit.s1.norm()
    };
    for (name, a, b) in [
        ("s1.re", s.fit.s1.re, fit.s1.re),
        ("s1.im", s.fit.s1.im, fit.s1.im),
        ("s2.re", s.fit.s2.re, fit.s2.re),
        ("s2.im", s.fit.s2.im, fit.s2.im),
        ("s1_err", s.fit.s1_err, fit.s1_err),
        ("relative_error", s.relative_error, re.relative_error),
    ] {
        compare(mismatches, name, a, b);
    }
    Ok(slope_criteria(&re))
}

/// Rebuilds the frames of `trajectory.csv`; rows sharing a time form one frame.
fn read_trajectory(path: &Path, grid: Grid) -> Result<Trajectory> {
    let file = fs::File::open(path).map_err(|e| bad(path, e))?;
    let mut frames = Vec::new();
    let mut current: Option<(f64, Vec<Complex64>)> = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
            continue;
        }
        let cols = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(path, format!("line {}: {e}", lineno + 1)))?;
        if cols.len() != 5 {
            return Err(bad(path, format!("line {}: expected 5 columns", lineno + 1)));
        }
        let z = Complex64::new(cols[2], cols[3]);
        match &mut current {
            Some((t, values)) if *t == cols[0] => values.push(z),
            _ => {
                if let Some((t, values)) = current.take() {
                    frames.push(ClassicalField::new(grid, values, t).map_err(|e| bad(path, e))?);
                }
                current = Some((cols[0], vec![z]));
            }
        }
    }
    if let Some((t, values)) = current {
        frames.push(ClassicalField::new(grid, values, t).map_err(|e| bad(path, e))?);
    }
    if frames.is_empty() {
        return Err(bad(path, "no frames"));
    }
    Ok(Trajectory { frames })
}

fn verify_classical(dir: &Path, report: &RunReport, mismatches: &mut Vec<String>) -> Result<Vec<Criterion>> {
    let cfg = &report.config;
    let csv = dir.join("trajectory.csv");
    check_preamble(&csv, &report.run_id, mismatches)?;
    check_preamble(&dir.join("initial_field.csv"), &report.run_id, mismatches)?;
    let grid = Grid::with_spacing(cfg.model.sites as usize, cfg.spacing())?;
    let trajectory = read_trajectory(&csv, grid)?;
    let path = dir.join("summary.json");
    let stored: Artifact<ClassicalSummary> = read_json(&path)?;
    check_artifact(&path, &stored, &report.run_id, mismatches);
    let re = classical_summary(&trajectory, cfg.model.coupling, cfg.evolve.classical_mode);
    let s = &stored.data;
    if re.frames != s.frames {
        mismatches.push(format!("frames: stored {}, recomputed {}", s.frames, re.frames));
    }
    compare(mismatches, "norm_initial", s.norm_initial, re.norm_initial);
    compare(mismatches, "norm_final", s.norm_final, re.norm_final);
    compare(mismatches, "relative_norm_drift", s.relative_norm_drift, re.relative_norm_drift);
    Ok(classical_criteria(&re, cfg.evolve.max_norm_drift))
}

fn verify_xcheck(dir: &Path, report: &RunReport, mismatches: &mut Vec<String>) -> Result<Vec<Criterion>> {
    let path = dir.join("xcheck.json");
    let stored: Artifact<XcheckReport> = read_json(&path)?;
    check_artifact(&path, &stored, &report.run_id, mismatches);
    if stored.data.tolerance != report.config.propagator.tolerance {
        mismatches.push("xcheck tolerance differs from the config".into());
    }
    Ok(xcheck_criteria(&stored.data))
}

/// Verifies the run stored in `dir` (a directory holding `run.json`).
pub fn verify_run(dir: &Path) -> Result<VerifyReport> {
    let manifest = dir.join("run.json");
    let report: RunReport = read_json(&manifest)?;
    let mut mismatches = Vec::new();
    if report.config.run_id() != report.run_id {
        mismatches.push(format!(
            "run.json: run_id {} does not hash its config ({})",
            report.run_id,
            report.config.run_id()
        ));
    }
    for f in &report.files {
        if !dir.join(f).is_file() {
            mismatches.push(format!("listed artifact {f} is missing"));
        }
    }
    if !mismatches.is_empty() {
        return Ok(VerifyReport {
            dir: dir.display().to_string(),
            run_id: report.run_id,
            criteria: Vec::new(),
            passed: false,
            mismatches,
        });
    }
    let criteria = match report.scenario {
        Scenario::FreeCoherence | Scenario::SolitonDecay => verify_overlap(dir, &report, &mut mismatches)?,
        Scenario::SlopeCheck => verify_slope(dir, &report, &mut mismatches)?,
        Scenario::ClassicalOnly => verify_classical(dir, &report, &mut mismatches)?,
        Scenario::EngineXcheck => verify_xcheck(dir, &report, &mut mismatches)?,
    };
    compare_criteria(&mut mismatches, &report.criteria, &criteria);
    let recomputed_pass = criteria.iter().all(|c| c.passed);
    if recomputed_pass != report.passed {
        mismatches.push(format!("run.json passed = {}, recomputed {recomputed_pass}", report.passed));
    }
    Ok(VerifyReport {
        dir: dir.display().to_string(),
        run_id: report.run_id,
        passed: recomputed_pass && mismatches.is_empty(),
        criteria,
        mismatches,
    })
}

/// Verifies every point of a sweep and re-derives the aggregate checks.
pub fn verify_sweep(dir: &Path) -> Result<VerifyReport> {
    let manifest = dir.join("sweep.json");
    let sweep: SweepReport = read_json(&manifest)?;
    let mut mismatches = Vec::new();
    let mut points = sweep.points.clone();
    for p in &mut points {
        if p.error.is_some() {
            mismatches.push(format!("point {} errored: {}", p.index, p.error.as_deref().unwrap_or("")));
            continue;
        }
        let point = dir.join(&p.dir);
        let v = verify_run(&point)?;
        for m in v.mismatches {
            mismatches.push(format!("{}: {m}", p.dir));
        }
        let stored: RunReport = read_json(&point.join("run.json"))?;
        p.metrics = stored.metrics;
        p.passed = v.passed;
    }
    let (checks, _) = aggregate_checks(sweep.config.scenario, sweep.parameter, &points);
    compare_criteria(&mut mismatches, &sweep.checks, &checks);
    let passed = mismatches.is_empty()
        && if checks.is_empty() {
            points.iter().all(|p| p.passed)
        } else {
            checks.iter().all(|c| c.passed)
        };
    if passed != sweep.passed {
        mismatches.push(format!("sweep.json passed = {}, recomputed {passed}", sweep.passed));
    }
    Ok(VerifyReport {
        dir: dir.display().to_string(),
        run_id: sweep.run_id,
        criteria: checks,
        passed: passed && mismatches.is_empty(),
        mismatches,
    })
}

/// Dispatches on the manifest present in `dir`.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    if dir.join("sweep.json").is_file() {
        verify_sweep(dir)
    } else if dir.join("run.json").is_file() {
        verify_run(dir)
    } else {
        Err(bad(dir, "neither run.json nor sweep.json found"))
    }
}
