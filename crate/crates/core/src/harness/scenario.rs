//! Scenario execution and the pass criteria each scenario is judged by.
//!
//! Criteria are computed from the artifact data alone, so `verify` can recompute
//! them from the files a run left behind.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Scenario, SCHEMA_VERSION};
use crate::classical::{lattice_classical_evolve_on, split_step_evolve, Trajectory};
use crate::correspondence::{
    classical_amplitudes, fit_quadratic, overlap_series, short_time_slope, uniform_times, ClassicalMode,
    OverlapSeries, SlopeReport,
};
use crate::error::{Error, Result};
use crate::grid::{classical_energy, classical_norm, ClassicalField};
use crate::lattice::{hamiltonian, poisson_tail, total_number, FockState};
use crate::propagate::{expectation, Engine, Propagator, PropagatorConfig};

/// `|r|` must fall below `1 - DECAY_ONSET` for a decay run to pass.
pub const DECAY_ONSET: f64 = 1e-3;
pub const COHERENCE_TOLERANCE: f64 = 1e-6;
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;
pub const SLOPE_RELATIVE_TOLERANCE: f64 = 1e-2;
pub const FREE_SLOPE_TOLERANCE: f64 = 1e-8;
pub const ENGINE_AGREEMENT: f64 = 1e-9;
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    /// `None` when the measured value is not finite.
    pub value: Option<f64>,
    pub op: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Criterion {
    fn new(name: &str, value: f64, op: &str, threshold: f64) -> Self {
        let passed = value.is_finite()
            && match op {
                "<" => value < threshold,
                "<=" => value <= threshold,
                ">" => value > threshold,
                _ => unreachable!("unknown comparison {op}"),
            };
        Self {
            name: name.to_string(),
            value: value.is_finite().then_some(value),
            op: op.to_string(),
            threshold,
            passed,
        }
    }

    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<", threshold)
    }

    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<=", threshold)
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, ">", threshold)
    }

    pub fn line(&self) -> String {
        let value = self.value.map_or("non-finite".to_string(), |v| format!("{v:.6e}"));
        format!(
            "{} {}: {} {} {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            value,
            self.op,
            self.threshold
        )
    }
}

pub type Metrics = BTreeMap<String, Option<f64>>;

fn metric(m: &mut Metrics, name: &str, v: f64) {
    m.insert(name.to_string(), v.is_finite().then_some(v));
}

/// `run.json`: the manifest of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub run_id: String,
    pub scenario: Scenario,
    pub config: RunConfig,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
    pub metrics: Metrics,
    pub files: Vec<String>,
}

/// JSON artifact wrapper carrying provenance next to the payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub run_id: String,
    pub config: RunConfig,
    #[serde(flatten)]
    pub data: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub engine: Engine,
    pub classical_mode: ClassicalMode,
    pub samples: usize,
    pub min_abs: f64,
    pub max_abs: f64,
    pub final_abs: f64,
    pub max_one_minus_abs: f64,
    pub max_abs_arg: f64,
    pub max_field_dev: f64,
    pub max_n_drift: f64,
    pub max_e_drift: f64,
    /// First sampled time with `|r| < 1 - 10⁻³`.
    pub onset_time: Option<f64>,
    /// First sampled time with `|r| < 1/e`.
    pub decoherence_time: Option<f64>,
    pub max_tail: f64,
    /// Largest single-site Poisson tail along the classical trajectory.
    pub site_tail_max: f64,
    /// `10 × site_tail_max`, the truncation budget for `1 - |r|` at c = 0.
    pub truncation_budget: f64,
}

impl OverlapSummary {
    fn from_series(series: &OverlapSeries, engine: Engine, mode: ClassicalMode, site_tail_max: f64) -> Self {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        Self {
            engine,
            classical_mode: mode,
            samples: series.len(),
            min_abs: series.min_abs(),
            max_abs: series.r.iter().map(|z| z.norm()).fold(0.0, f64::max),
            final_abs: series.r.last().map_or(f64::NAN, |z| z.norm()),
            max_one_minus_abs: series.r.iter().map(|z| 1.0 - z.norm()).fold(0.0, f64::max),
            max_abs_arg: series.r.iter().map(|z| z.arg().abs()).fold(0.0, f64::max),
            max_field_dev: max(&series.field_dev),
            max_n_drift: max(&series.n_drift),
            max_e_drift: max(&series.e_drift),
            onset_time: series.first_below(1.0 - DECAY_ONSET),
            decoherence_time: series.decoherence_time(),
            max_tail: series.max_tail,
            site_tail_max,
            truncation_budget: 10.0 * site_tail_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XcheckReport {
    pub dim: usize,
    pub seed: u64,
    pub time: f64,
    pub tolerance: f64,
    pub engine_difference: f64,
    pub dense_norm_defect: f64,
    pub krylov_norm_defect: f64,
    /// `‖U(t₂)U(t₁)s - U(t₁+t₂)s‖` with `t₁ = 0.4t`, `t₂ = 0.6t`, Krylov engine.
    pub group_defect: f64,
    /// `‖U(-t)U(t)s - s‖`, Krylov engine.
    pub reversal_defect: f64,
    pub n_drift: f64,
    pub e_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSummary {
    pub classical_mode: ClassicalMode,
    pub frames: usize,
    pub norm_initial: f64,
    pub norm_final: f64,
    pub relative_norm_drift: f64,
    /// Continuum energy functional; split-step runs only.
    pub energy_initial: Option<f64>,
    pub energy_final: Option<f64>,
}

pub fn free_coherence_criteria(s: &OverlapSummary) -> Vec<Criterion> {
    vec![
        Criterion::below("one_minus_abs_r", s.max_one_minus_abs, COHERENCE_TOLERANCE),
        Criterion::below("abs_arg_r", s.max_abs_arg, COHERENCE_TOLERANCE),
        Criterion::below("field_deviation", s.max_field_dev, COHERENCE_TOLERANCE),
        Criterion::below("number_drift", s.max_n_drift, CONSERVATION_TOLERANCE),
        Criterion::below("energy_drift", s.max_e_drift, CONSERVATION_TOLERANCE),
    ]
}

pub fn decay_criteria(s: &OverlapSummary) -> Vec<Criterion> {
    vec![
        Criterion::below("min_abs_r", s.min_abs, 1.0 - DECAY_ONSET),
        Criterion::at_most("abs_r_excess", s.max_abs - 1.0, 1e-9),
        Criterion::below("number_drift", s.max_n_drift, CONSERVATION_TOLERANCE),
        Criterion::below("energy_drift", s.max_e_drift, CONSERVATION_TOLERANCE),
    ]
}

pub fn slope_criteria(r: &SlopeReport) -> Vec<Criterion> {
    if r.coupling == 0.0 {
        return vec![
            Criterion::below("abs_s1", r.fit.s1.norm(), FREE_SLOPE_TOLERANCE),
            Criterion::below("abs_s2", r.fit.s2.norm(), FREE_SLOPE_TOLERANCE),
        ];
    }
    vec![
        Criterion::below("s1_relative_error", r.relative_error, SLOPE_RELATIVE_TOLERANCE),
        Criterion::at_most("re_s1", r.fit.s1.re.abs(), r.fit.s1_err),
        Criterion::at_most("half_refit_shift", (r.half_s1 - r.fit.s1).norm(), r.fit.s1_err),
    ]
}

pub fn classical_criteria(s: &ClassicalSummary, max_norm_drift: f64) -> Vec<Criterion> {
    vec![Criterion::at_most("relative_norm_drift", s.relative_norm_drift, max_norm_drift)]
}

pub fn xcheck_criteria(x: &XcheckReport) -> Vec<Criterion> {
    let group_bound = 2.0 * x.tolerance;
    vec![
        Criterion::below("engine_difference", x.engine_difference, ENGINE_AGREEMENT),
        Criterion::below("dense_unitarity", x.dense_norm_defect, UNITARITY_TOLERANCE),
        Criterion::below("krylov_unitarity", x.krylov_norm_defect, UNITARITY_TOLERANCE),
        Criterion::at_most("group_property", x.group_defect, group_bound),
        Criterion::at_most("time_reversal", x.reversal_defect, group_bound),
        Criterion::below("number_drift", x.n_drift, CONSERVATION_TOLERANCE),
        Criterion::below("energy_drift", x.e_drift, CONSERVATION_TOLERANCE),
    ]
}

/// Everything a scenario computed, before anything touches the disk.
enum Payload {
    Overlap(OverlapSeries, OverlapSummary),
    Slope(SlopeReport),
    Classical(ClassicalField, Trajectory, ClassicalSummary),
    Xcheck(XcheckReport),
}

fn overlap_payload(cfg: &RunConfig) -> Result<Payload> {
    let model = cfg.lattice()?;
    let f0 = cfg.initial_field()?;
    let corr = cfg.correspondence_config();
    let times = uniform_times(cfg.evolve.t_final, cfg.evolve.samples as usize);
    let series = overlap_series(&f0, &model, &corr, &times)?;
    let site_tail_max = classical_amplitudes(&f0, &model, &corr, &times)?
        .iter()
        .flatten()
        .map(|a| poisson_tail(a.norm_sqr(), model.n_max()))
        .fold(0.0, f64::max);
    let engine = corr.propagator.resolve(model.dim());
    let summary = OverlapSummary::from_series(&series, engine, corr.mode, site_tail_max);
    Ok(Payload::Overlap(series, summary))
}

fn slope_payload(cfg: &RunConfig) -> Result<Payload> {
    let model = cfg.lattice()?;
    let f0 = cfg.initial_field()?;
    Ok(Payload::Slope(short_time_slope(
        &f0,
        &model,
        &cfg.slope.dts,
        &cfg.correspondence_config(),
    )?))
}

fn classical_payload(cfg: &RunConfig) -> Result<Payload> {
    let f0 = cfg.initial_field()?;
    let evolve = cfg.evolve_config();
    let coupling = cfg.model.coupling;
    let trajectory = match cfg.evolve.classical_mode {
        ClassicalMode::SplitStep => split_step_evolve(&f0, coupling, &evolve)?,
        ClassicalMode::LatticeOde => {
            let lattice = lattice_classical_evolve_on(
                &f0.lattice_amplitudes(),
                f0.grid(),
                coupling,
                cfg.model.hopping,
                &evolve,
            )?;
            let frames = lattice
                .times
                .iter()
                .zip(&lattice.states)
                .map(|(&t, a)| ClassicalField::from_lattice_amplitudes(*f0.grid(), a, t))
                .collect::<Result<_>>()?;
            Trajectory { frames }
        }
    };
    let summary = classical_summary(&trajectory, coupling, cfg.evolve.classical_mode);
    Ok(Payload::Classical(f0, trajectory, summary))
}

pub fn classical_summary(t: &Trajectory, coupling: f64, mode: ClassicalMode) -> ClassicalSummary {
    let first = &t.frames[0];
    let last = t.last();
    let (n0, n1) = (classical_norm(first), classical_norm(last));
    let split = mode == ClassicalMode::SplitStep;
    ClassicalSummary {
        classical_mode: mode,
        frames: t.frames.len(),
        norm_initial: n0,
        norm_final: n1,
        relative_norm_drift: if n0 > 0.0 { (n1 - n0).abs() / n0 } else { (n1 - n0).abs() },
        energy_initial: split.then(|| classical_energy(first, coupling)),
        energy_final: split.then(|| classical_energy(last, coupling)),
    }
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn xcheck_payload(cfg: &RunConfig) -> Result<Payload> {
    let model = cfg.lattice()?;
    let h = Arc::new(hamiltonian(&model)?);
    let base = cfg.propagator_config();
    let dense = Propagator::new(h.clone(), PropagatorConfig { engine: Engine::DenseEig, ..base })?;
    let krylov = Propagator::new(h.clone(), PropagatorConfig { engine: Engine::Krylov, ..base })?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let raw: Vec<Complex64> = (0..model.dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let s = FockState::normalized(&model, raw)?;
    let t = cfg.evolve.t_final;

    let by_dense = dense.evolve(&s, t)?;
    let by_krylov = krylov.evolve(&s, t)?;
    let split = krylov.evolve(&krylov.evolve(&s, 0.4 * t)?, 0.6 * t)?;
    let back = krylov.evolve(&by_krylov, -t)?;
    let number = total_number(&model);
    let n0 = expectation(&s, &number)?.re;
    let e0 = expectation(&s, &h)?.re;
    Ok(Payload::Xcheck(XcheckReport {
        dim: model.dim(),
        seed: cfg.seed,
        time: t,
        tolerance: base.tolerance,
        engine_difference: distance(by_dense.amplitudes(), by_krylov.amplitudes()),
        dense_norm_defect: (by_dense.norm() - 1.0).abs(),
        krylov_norm_defect: (by_krylov.norm() - 1.0).abs(),
        group_defect: distance(split.amplitudes(), by_krylov.amplitudes()),
        reversal_defect: distance(back.amplitudes(), s.amplitudes()),
        n_drift: (expectation(&by_krylov, &number)?.re - n0).abs(),
        e_drift: (expectation(&by_krylov, &h)?.re - e0).abs(),
    }))
}

/// `#` metadata block heading every CSV artifact.
pub fn csv_preamble(cfg: &RunConfig) -> String {
    let mut out = format!(
        "# coherent-soliton run_id={} scenario={}\n# config:\n",
        cfg.run_id(),
        cfg.scenario.name()
    );
    for line in cfg.resolved().to_toml().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn write_json<T: Serialize>(path: &Path, cfg: &RunConfig, data: &T) -> Result<()> {
    let artifact = Artifact {
        run_id: cfg.run_id(),
        config: cfg.resolved(),
        data,
    };
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &artifact).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv(path: &Path, cfg: &RunConfig, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(csv_preamble(cfg).as_bytes())?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Validates, computes, then writes every artifact plus `run.json` into `out`.
/// Nothing is written when validation or the computation fails.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let payload = match cfg.scenario {
        Scenario::FreeCoherence | Scenario::SolitonDecay => overlap_payload(cfg)?,
        Scenario::SlopeCheck => slope_payload(cfg)?,
        Scenario::ClassicalOnly => classical_payload(cfg)?,
        Scenario::EngineXcheck => xcheck_payload(cfg)?,
    };

    fs::create_dir_all(out)?;
    let mut metrics = Metrics::new();
    let (criteria, files) = match &payload {
        Payload::Overlap(series, summary) => {
            write_csv(&out.join("overlap.csv"), cfg, |w| series.write_csv(w))?;
            write_json(&out.join("summary.json"), cfg, summary)?;
            metric(&mut metrics, "min_abs_r", summary.min_abs);
            metric(&mut metrics, "max_one_minus_abs_r", summary.max_one_minus_abs);
            metric(&mut metrics, "max_abs_arg_r", summary.max_abs_arg);
            metric(&mut metrics, "max_field_dev", summary.max_field_dev);
            metric(&mut metrics, "onset_time", summary.onset_time.unwrap_or(f64::NAN));
            metric(&mut metrics, "decoherence_time", summary.decoherence_time.unwrap_or(f64::NAN));
            metric(&mut metrics, "truncation_budget", summary.truncation_budget);
            let criteria = if cfg.scenario == Scenario::FreeCoherence {
                free_coherence_criteria(summary)
            } else {
                decay_criteria(summary)
            };
            (criteria, vec!["overlap.csv", "summary.json"])
        }
        Payload::Slope(report) => {
            write_json(&out.join("slope.json"), cfg, report)?;
            metric(&mut metrics, "s1_re", report.fit.s1.re);
            metric(&mut metrics, "s1_im", report.fit.s1.im);
            metric(&mut metrics, "s1_err", report.fit.s1_err);
            metric(&mut metrics, "s2_re", report.fit.s2.re);
            metric(&mut metrics, "s2_im", report.fit.s2.im);
            metric(&mut metrics, "s2_err", report.fit.s2_err);
            metric(&mut metrics, "predicted_im", report.predicted.im);
            metric(&mut metrics, "relative_error", report.relative_error);
            (slope_criteria(report), vec!["slope.json"])
        }
        Payload::Classical(f0, trajectory, summary) => {
            let c = cfg.model.coupling;
            write_csv(&out.join("initial_field.csv"), cfg, |w| f0.write_csv(w, c))?;
            write_csv(&out.join("trajectory.csv"), cfg, |w| trajectory.write_csv(w, c))?;
            write_json(&out.join("summary.json"), cfg, summary)?;
            metric(&mut metrics, "relative_norm_drift", summary.relative_norm_drift);
            if let (Some(e0), Some(e1)) = (summary.energy_initial, summary.energy_final) {
                metric(&mut metrics, "energy_drift", (e1 - e0).abs());
            }
            (
                classical_criteria(summary, cfg.evolve.max_norm_drift),
                vec!["initial_field.csv", "trajectory.csv", "summary.json"],
            )
        }
        Payload::Xcheck(x) => {
            write_json(&out.join("xcheck.json"), cfg, x)?;
            metric(&mut metrics, "engine_difference", x.engine_difference);
            (xcheck_criteria(x), vec!["xcheck.json"])
        }
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        run_id: cfg.run_id(),
        scenario: cfg.scenario,
        config: cfg.resolved(),
        passed: criteria.iter().all(|c| c.passed),
        criteria,
        metrics,
        files: files.into_iter().map(String::from).collect(),
    };
    let mut w = BufWriter::new(fs::File::create(out.join("run.json"))?);
    serde_json::to_writer_pretty(&mut w, &report).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(report)
}

/// Refits `r(Δt) - 1` from the stored overlaps and returns the largest change in
/// `s₁`, `s₂` relative to the stored fit.
pub fn refit_shift(r: &SlopeReport, noise: f64) -> Result<f64> {
    let ys: Vec<Complex64> = r.overlaps.iter().map(|z| z - 1.0).collect();
    let fit = fit_quadratic(&r.dts, &ys, noise)?;
    Ok((fit.s1 - r.fit.s1).norm().max((fit.s2 - r.fit.s2).norm() * r.dts[0]))
}

/// Errors caused by the invocation rather than by the physics.
pub fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::InvalidParameter(_) | Error::DimensionBudget { .. } | Error::Io(_)
    )
}
