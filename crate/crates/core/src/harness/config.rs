//! TOML run configuration, `schema_version = 1`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::EvolveConfig;
use crate::correspondence::{ClassicalMode, CorrespondenceConfig};
use crate::error::{Error, Result};
use crate::grid::{bright_soliton, gray_soliton, ClassicalField, SolitonParams};
use crate::lattice::{LatticeModel, LatticeParams, TruncationPolicy, DEFAULT_BASIS_BUDGET};
use crate::propagate::{Engine, PropagatorConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SlopeCheck,
    FreeCoherence,
    SolitonDecay,
    ClassicalOnly,
    EngineXcheck,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SlopeCheck => "slope_check",
            Scenario::FreeCoherence => "free_coherence",
            Scenario::SolitonDecay => "soliton_decay",
            Scenario::ClassicalOnly => "classical_only",
            Scenario::EngineXcheck => "engine_xcheck",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// Seed for randomized test vectors.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub propagator: PropagatorSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub slope: SlopeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sites: i64,
    /// Exactly one of `spacing` and `length` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub coupling: f64,
    pub n_max: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_total: Option<i64>,
    #[serde(default = "yes")]
    pub hopping: bool,
    #[serde(default = "default_budget")]
    pub basis_budget: u64,
}

fn yes() -> bool {
    true
}

fn default_budget() -> u64 {
    DEFAULT_BASIS_BUDGET
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Bright,
    Gray,
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub kind: FieldKind,
    pub eta: f64,
    pub rho: f64,
    pub angle: f64,
    pub amplitude: f64,
    pub mode: i64,
    /// Defaults to the middle of the box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    pub velocity: f64,
    pub phase: f64,
    /// Coupling that shapes the soliton profile. Defaults to the model coupling when
    /// its sign fits the soliton kind, else to -1 (bright) or +1 (gray).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_coupling: Option<f64>,
    /// Rescale the field so that `max_j |α_j|` equals this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_alpha: Option<f64>,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            kind: FieldKind::Bright,
            eta: 1.0,
            rho: 1.0,
            angle: 0.5,
            amplitude: 0.1,
            mode: 1,
            center: None,
            velocity: 0.0,
            phase: 0.0,
            profile_coupling: None,
            peak_alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub dt: f64,
    pub t_final: f64,
    /// Sampled times, `0..=t_final` inclusive.
    pub samples: i64,
    pub classical_mode: ClassicalMode,
    pub snapshot_stride: i64,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        let e = EvolveConfig::default();
        Self {
            dt: e.dt,
            t_final: 5.0,
            samples: 51,
            classical_mode: ClassicalMode::LatticeOde,
            snapshot_stride: 100,
            max_norm_drift: e.max_norm_drift,
            max_energy_drift: e.max_energy_drift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorSection {
    pub engine: Engine,
    pub krylov_dim: i64,
    pub tolerance: f64,
    pub dense_threshold: i64,
}

impl Default for PropagatorSection {
    fn default() -> Self {
        let p = PropagatorConfig::default();
        Self {
            engine: p.engine,
            krylov_dim: p.krylov_dim as i64,
            tolerance: p.tolerance,
            dense_threshold: p.dense_threshold as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSection {
    pub max_tail: f64,
    /// Abort instead of warning when the tail exceeds `max_tail`.
    pub strict: bool,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            max_tail: TruncationPolicy::default().max_tail,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlopeSection {
    pub dts: Vec<f64>,
}

impl Default for SlopeSection {
    fn default() -> Self {
        Self {
            dts: vec![1e-3, 2e-3, 4e-3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Coupling,
    NMax,
    Dt,
    Sites,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Coupling => "coupling",
            SweepParameter::NMax => "n_max",
            SweepParameter::Dt => "dt",
            SweepParameter::Sites => "sites",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be a finite number > 0, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be finite, got {v}")))
    }
}

fn count(name: &str, v: i64, min: i64) -> Result<usize> {
    if v < min {
        return Err(config_err(format!("{name} must be ≥ {min}, got {v}")));
    }
    Ok(v as usize)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    /// The config as embedded in artifacts: no output location, no sweep axis.
    pub fn resolved(&self) -> Self {
        Self {
            sweep: None,
            output: None,
            ..self.clone()
        }
    }

    /// First 12 hex digits of the SHA-256 of the resolved config.
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.resolved().to_toml().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every numeric field and the basis budget; allocates nothing large.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let sites = count("model.sites", m.sites, 1)?;
        count("model.n_max", m.n_max, 1)?;
        if let Some(cap) = m.max_total {
            count("model.max_total", cap, 0)?;
        }
        finite("model.coupling", m.coupling)?;
        match (m.spacing, m.length) {
            (Some(d), None) => positive("model.spacing", d)?,
            (None, Some(l)) => positive("model.length", l)?,
            _ => return Err(config_err("model: give exactly one of spacing and length")),
        }
        if m.basis_budget == 0 {
            return Err(config_err("model.basis_budget must be > 0"));
        }
        if !m.hopping && sites == 0 {
            return Err(config_err("model.sites must be ≥ 1"));
        }

        let f = &self.field;
        for (name, v) in [
            ("field.eta", f.eta),
            ("field.rho", f.rho),
            ("field.amplitude", f.amplitude),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [
            ("field.angle", f.angle),
            ("field.velocity", f.velocity),
            ("field.phase", f.phase),
        ] {
            finite(name, v)?;
        }
        if let Some(c) = f.center {
            finite("field.center", c)?;
        }
        if let Some(c) = f.profile_coupling {
            finite("field.profile_coupling", c)?;
        }
        if let Some(p) = f.peak_alpha {
            positive("field.peak_alpha", p)?;
        }

        let e = &self.evolve;
        positive("evolve.dt", e.dt)?;
        finite("evolve.t_final", e.t_final)?;
        if e.t_final < 0.0 {
            return Err(config_err(format!("evolve.t_final must be ≥ 0, got {}", e.t_final)));
        }
        count("evolve.samples", e.samples, 1)?;
        count("evolve.snapshot_stride", e.snapshot_stride, 0)?;
        positive("evolve.max_norm_drift", e.max_norm_drift)?;
        positive("evolve.max_energy_drift", e.max_energy_drift)?;

        let p = &self.propagator;
        count("propagator.krylov_dim", p.krylov_dim, 2)?;
        count("propagator.dense_threshold", p.dense_threshold, 0)?;
        positive("propagator.tolerance", p.tolerance)?;
        positive("truncation.max_tail", self.truncation.max_tail)?;

        if self.scenario == Scenario::SlopeCheck {
            let dts = &self.slope.dts;
            if dts.len() < 3 {
                return Err(config_err(format!("slope.dts needs at least 3 values, got {}", dts.len())));
            }
            for &d in dts {
                positive("slope.dts entry", d)?;
            }
        }
        if self.scenario == Scenario::FreeCoherence && m.coupling != 0.0 {
            return Err(config_err(format!(
                "free_coherence needs model.coupling = 0, got {}",
                m.coupling
            )));
        }
        if self.scenario == Scenario::ClassicalOnly && e.t_final > 0.0 && e.dt > e.t_final {
            return Err(config_err(format!("evolve.dt = {} exceeds evolve.t_final = {}", e.dt, e.t_final)));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(config_err("sweep.values is empty"));
            }
            for &v in &sweep.values {
                finite("sweep value", v)?;
                if matches!(sweep.parameter, SweepParameter::NMax | SweepParameter::Sites) && v.fract() != 0.0 {
                    return Err(config_err(format!("sweep over {} needs integers, got {v}", sweep.parameter.name())));
                }
            }
        }
        // the basis size is counted, not enumerated; classical runs build none
        if self.scenario != Scenario::ClassicalOnly {
            crate::lattice::Basis::count(sites, m.n_max as usize, m.max_total.map(|c| c as usize), m.basis_budget)?;
        }
        Ok(())
    }

    /// Copy with the sweep parameter set to `value`.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Self {
        let mut out = self.resolved();
        match parameter {
            SweepParameter::Coupling => out.model.coupling = value,
            SweepParameter::NMax => out.model.n_max = value as i64,
            SweepParameter::Dt => out.evolve.dt = value,
            SweepParameter::Sites => out.model.sites = value as i64,
        }
        out
    }

    pub fn spacing(&self) -> f64 {
        match (self.model.spacing, self.model.length) {
            (Some(d), _) => d,
            (None, Some(l)) => l / self.model.sites as f64,
            (None, None) => f64::NAN,
        }
    }

    pub fn lattice(&self) -> Result<LatticeModel> {
        let m = &self.model;
        let mut p = LatticeParams::new(m.sites as usize, self.spacing(), m.coupling, m.n_max as usize);
        p.max_total = m.max_total.map(|c| c as usize);
        p.hopping = m.hopping;
        p.basis_budget = m.basis_budget;
        p.build()
    }

    pub fn initial_field(&self) -> Result<ClassicalField> {
        let grid = crate::grid::Grid::with_spacing(self.model.sites as usize, self.spacing())?;
        let f = &self.field;
        let c = self.model.coupling;
        let center = f.center.unwrap_or(grid.length() / 2.0);
        let field = match f.kind {
            FieldKind::Bright => {
                let pc = f.profile_coupling.unwrap_or(if c < 0.0 { c } else { -1.0 });
                let p = SolitonParams::bright(f.eta, pc)
                    .centered_at(center)
                    .moving(f.velocity)
                    .with_phase(f.phase);
                bright_soliton(&p, &grid, 0.0)?
            }
            FieldKind::Gray => {
                let pc = f.profile_coupling.unwrap_or(if c > 0.0 { c } else { 1.0 });
                let p = SolitonParams::gray(f.rho, f.angle, pc)
                    .centered_at(center)
                    .moving(f.velocity)
                    .with_phase(f.phase);
                gray_soliton(&p, &grid, 0.0)?
            }
            FieldKind::PlaneWave => ClassicalField::plane_wave(grid, f.amplitude, f.mode)?,
        };
        match f.peak_alpha {
            Some(peak) => {
                let current = field.max_abs() * grid.spacing().sqrt();
                if current == 0.0 {
                    return Err(config_err("field.peak_alpha cannot rescale a zero field"));
                }
                Ok(field.scaled(peak / current))
            }
            None => Ok(field),
        }
    }

    pub fn propagator_config(&self) -> PropagatorConfig {
        let p = &self.propagator;
        PropagatorConfig {
            engine: p.engine,
            krylov_dim: p.krylov_dim as usize,
            tolerance: p.tolerance,
            dense_threshold: p.dense_threshold as usize,
        }
    }

    pub fn truncation_policy(&self) -> TruncationPolicy {
        TruncationPolicy {
            max_tail: self.truncation.max_tail,
            strict: self.truncation.strict,
        }
    }

    pub fn evolve_config(&self) -> EvolveConfig {
        let e = &self.evolve;
        let mut cfg = match e.classical_mode {
            ClassicalMode::LatticeOde => EvolveConfig::rk4(e.dt, e.t_final),
            ClassicalMode::SplitStep => EvolveConfig::split_step(e.dt, e.t_final),
        };
        cfg.snapshot_stride = e.snapshot_stride as usize;
        cfg.max_norm_drift = e.max_norm_drift;
        cfg.max_energy_drift = e.max_energy_drift;
        cfg
    }

    pub fn correspondence_config(&self) -> CorrespondenceConfig {
        CorrespondenceConfig {
            evolve: self.evolve_config(),
            propagator: self.propagator_config(),
            truncation: self.truncation_policy(),
            mode: self.evolve.classical_mode,
        }
    }
}
