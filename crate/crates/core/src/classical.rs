//! Classical NLS evolution: a Strang split-step spectral integrator for the
//! continuum equation and an RK4 integrator for the lattice equations of motion
//! `i dα_j/dt = Σ_k h_{jk} α_k + (2c/Δ)|α_j|² α_j`, which use the same hopping
//! matrix as the quantum Hamiltonian.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{classical_norm, energy_with, ClassicalField, Grid};
use crate::lattice::{HoppingMatrix, LatticeModel, NONLINEAR_FACTOR};
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SplitStepStrang,
    Rk4Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Keep every `snapshot_stride`-th step; the initial and final states are always kept.
    /// Zero keeps only those two.
    pub snapshot_stride: usize,
    /// Relative particle-number drift that aborts a split-step run.
    pub max_norm_drift: f64,
    /// Relative energy drift that aborts a split-step run.
    pub max_energy_drift: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::SplitStepStrang,
            snapshot_stride: 0,
            max_norm_drift: 1e-10,
            max_energy_drift: 1e-2,
        }
    }
}

impl EvolveConfig {
    pub fn split_step(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            ..Self::default()
        }
    }

    pub fn rk4(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            scheme: Scheme::Rk4Lattice,
            ..Self::default()
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_final must be ≥ 0, got {}", self.t_final)));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }

    /// Number of uniform steps and their size; the step is shrunk to land on `t_final`.
    fn steps(&self) -> (usize, f64) {
        step_plan(self.t_final, self.dt)
    }

    fn keep(&self, step: usize, total: usize) -> bool {
        step == total || (self.snapshot_stride > 0 && step.is_multiple_of(self.snapshot_stride))
    }
}

pub(crate) fn step_plan(duration: f64, max_dt: f64) -> (usize, f64) {
    if duration == 0.0 {
        return (0, 0.0);
    }
    let n = ((duration / max_dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

/// Split-step snapshots, initial field first.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<ClassicalField>,
}

impl Trajectory {
    pub fn last(&self) -> &ClassicalField {
        self.frames.last().expect("trajectory holds the initial frame")
    }

    /// Grid-field CSV with a leading time column.
    pub fn write_csv<W: Write>(&self, mut w: W, coupling: f64) -> std::io::Result<()> {
        let grid = self.frames[0].grid();
        writeln!(
            w,
            "# M={} spacing={:.16e} c={:.16e} frames={}",
            grid.sites(),
            grid.spacing(),
            coupling,
            self.frames.len()
        )?;
        writeln!(w, "t,x,re_f,im_f,abs2")?;
        for f in &self.frames {
            for (x, z) in grid.points().zip(f.values()) {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    f.time(),
                    x,
                    z.re,
                    z.im,
                    z.norm_sqr()
                )?;
            }
        }
        Ok(())
    }
}

fn relative_drift(now: f64, start: f64) -> f64 {
    let d = (now - start).abs();
    if start != 0.0 {
        d / start.abs()
    } else {
        d
    }
}

fn nonlinear_phase(values: &mut [Complex64], coupling: f64, dt: f64) {
    for z in values.iter_mut() {
        *z *= Complex64::from_polar(1.0, -NONLINEAR_FACTOR * coupling * z.norm_sqr() * dt);
    }
}

/// Strang splitting: half nonlinear phase, exact linear step `e^{-ik²dt}` in Fourier
/// space, half nonlinear phase. Both substeps are pointwise phase rotations, so the
/// particle number is conserved to rounding.
pub fn split_step_evolve(f0: &ClassicalField, coupling: f64, cfg: &EvolveConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.scheme != Scheme::SplitStepStrang {
        return Err(Error::InvalidParameter("split_step_evolve needs scheme = split_step_strang".into()));
    }
    let grid = *f0.grid();
    let mut spectral = Spectral::new(grid.sites(), grid.length());
    let (n_steps, h) = cfg.steps();
    let linear: Vec<Complex64> = spectral.k.iter().map(|k| Complex64::from_polar(1.0, -k * k * h)).collect();
    let norm0 = classical_norm(f0);
    let energy0 = energy_with(&mut spectral, f0, coupling);

    let mut field = f0.clone();
    let mut frames = vec![f0.clone()];
    for step in 1..=n_steps {
        let values = field.values_mut();
        nonlinear_phase(values, coupling, 0.5 * h);
        spectral.forward(values);
        values.iter_mut().zip(&linear).for_each(|(z, l)| *z *= l);
        spectral.inverse(values);
        nonlinear_phase(values, coupling, 0.5 * h);
        let t = f0.time() + step as f64 * h;
        field.set_time(t);

        if cfg.keep(step, n_steps) {
            if field.values().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite { time: t });
            }
            let norm_drift = relative_drift(classical_norm(&field), norm0);
            if norm_drift > cfg.max_norm_drift {
                return Err(Error::Drift {
                    quantity: "norm",
                    drift: norm_drift,
                    tolerance: cfg.max_norm_drift,
                    time: t,
                });
            }
            let energy_drift = relative_drift(energy_with(&mut spectral, &field, coupling), energy0);
            if energy_drift > cfg.max_energy_drift {
                return Err(Error::Drift {
                    quantity: "energy",
                    drift: energy_drift,
                    tolerance: cfg.max_energy_drift,
                    time: t,
                });
            }
            frames.push(field.clone());
        }
    }
    Ok(Trajectory { frames })
}

/// Lattice amplitudes sampled along an RK4 run, initial state first.
#[derive(Debug, Clone)]
pub struct LatticeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

impl LatticeTrajectory {
    pub fn last(&self) -> &[Complex64] {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Right-hand side of the lattice equations of motion: hopping matrix `h` and
/// on-site interaction `c/Δ`.
#[derive(Clone, Copy)]
struct LatticeFlow<'a> {
    hopping: &'a HoppingMatrix,
    interaction: f64,
}

impl LatticeFlow<'_> {
    /// `dα/dt = -i (h α + (2c/Δ)|α|² α)`.
    fn rhs(&self, alpha: &[Complex64], out: &mut [Complex64]) {
        self.hopping.apply_into(alpha, out);
        let g = NONLINEAR_FACTOR * self.interaction;
        for (o, a) in out.iter_mut().zip(alpha) {
            *o = -Complex64::i() * (*o + g * a.norm_sqr() * a);
        }
    }
}

impl<'a> From<&'a LatticeModel> for LatticeFlow<'a> {
    fn from(model: &'a LatticeModel) -> Self {
        Self {
            hopping: model.hopping(),
            interaction: model.interaction(),
        }
    }
}

struct Rk4Buffers {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Buffers {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

fn rk4_step(flow: LatticeFlow, alpha: &mut [Complex64], h: f64, b: &mut Rk4Buffers) {
    flow.rhs(alpha, &mut b.k1);
    for ((t, a), k) in b.tmp.iter_mut().zip(alpha.iter()).zip(&b.k1) {
        *t = a + 0.5 * h * k;
    }
    flow.rhs(&b.tmp, &mut b.k2);
    for ((t, a), k) in b.tmp.iter_mut().zip(alpha.iter()).zip(&b.k2) {
        *t = a + 0.5 * h * k;
    }
    flow.rhs(&b.tmp, &mut b.k3);
    for ((t, a), k) in b.tmp.iter_mut().zip(alpha.iter()).zip(&b.k3) {
        *t = a + h * k;
    }
    flow.rhs(&b.tmp, &mut b.k4);
    for (i, a) in alpha.iter_mut().enumerate() {
        *a += h / 6.0 * (b.k1[i] + 2.0 * b.k2[i] + 2.0 * b.k3[i] + b.k4[i]);
    }
}

/// Advances `alpha` in place by `duration` with uniform RK4 steps no larger than `max_dt`.
pub(crate) fn lattice_advance(model: &LatticeModel, alpha: &mut [Complex64], duration: f64, max_dt: f64, t0: f64) -> Result<()> {
    let (n, h) = step_plan(duration, max_dt);
    let mut buffers = Rk4Buffers::new(alpha.len());
    for _ in 0..n {
        rk4_step(model.into(), alpha, h, &mut buffers);
    }
    if alpha.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite { time: t0 + duration });
    }
    Ok(())
}

/// Classical RK4 trajectory of the lattice equations of motion.
pub fn lattice_classical_evolve(alpha0: &[Complex64], model: &LatticeModel, cfg: &EvolveConfig) -> Result<LatticeTrajectory> {
    evolve_flow(alpha0, model.into(), cfg)
}

/// As [`lattice_classical_evolve`] for a periodic lattice given only by its
/// geometry and coupling; no Fock basis is built.
pub fn lattice_classical_evolve_on(
    alpha0: &[Complex64],
    grid: &Grid,
    coupling: f64,
    hopping: bool,
    cfg: &EvolveConfig,
) -> Result<LatticeTrajectory> {
    let h = HoppingMatrix::periodic(grid.sites(), grid.spacing(), hopping);
    let flow = LatticeFlow {
        hopping: &h,
        interaction: coupling / grid.spacing(),
    };
    evolve_flow(alpha0, flow, cfg)
}

fn evolve_flow(alpha0: &[Complex64], flow: LatticeFlow, cfg: &EvolveConfig) -> Result<LatticeTrajectory> {
    cfg.validate()?;
    if cfg.scheme != Scheme::Rk4Lattice {
        return Err(Error::InvalidParameter("lattice_classical_evolve needs scheme = rk4_lattice".into()));
    }
    if alpha0.len() != flow.hopping.sites() {
        return Err(Error::DimensionMismatch {
            expected: flow.hopping.sites(),
            got: alpha0.len(),
        });
    }
    let (n_steps, h) = cfg.steps();
    let mut alpha = alpha0.to_vec();
    let mut buffers = Rk4Buffers::new(alpha.len());
    let mut out = LatticeTrajectory {
        times: vec![0.0],
        states: vec![alpha.clone()],
    };
    for step in 1..=n_steps {
        rk4_step(flow, &mut alpha, h, &mut buffers);
        if cfg.keep(step, n_steps) {
            let t = step as f64 * h;
            if alpha.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite { time: t });
            }
            out.times.push(t);
            out.states.push(alpha.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{bright_soliton, Grid, SolitonParams};
    use crate::lattice::LatticeParams;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn config_validation() {
        assert!(EvolveConfig::split_step(0.0, 1.0).validate().is_err());
        assert!(EvolveConfig::split_step(0.1, -1.0).validate().is_err());
        assert!(EvolveConfig::split_step(2.0, 1.0).validate().is_err());
        assert!(EvolveConfig::split_step(2.0, 0.0).validate().is_ok());
        assert_eq!(step_plan(1.0, 0.3), (4, 0.25));
        assert_eq!(step_plan(1.0, 0.25), (4, 0.25));
    }

    #[test]
    fn free_plane_wave_is_exact() {
        let grid = Grid::new(32, 2.0 * PI).unwrap();
        let (amp, mode) = (0.8, 3);
        let f0 = ClassicalField::plane_wave(grid, amp, mode).unwrap();
        let t = 0.75;
        let traj = split_step_evolve(&f0, 0.0, &EvolveConfig::split_step(1e-3, t)).unwrap();
        let k = mode as f64;
        for (x, z) in grid.points().zip(traj.last().values()) {
            let expected = Complex64::from_polar(amp, k * x - k * k * t);
            assert!((z - expected).norm() < 1e-12);
        }
        assert_abs_diff_eq!(traj.last().time(), t, epsilon = 1e-15);
    }

    #[test]
    fn split_step_conserves_norm_per_step() {
        let grid = Grid::new(128, 30.0).unwrap();
        let p = SolitonParams::bright(1.2, -1.0).centered_at(15.0).moving(0.4);
        let f0 = bright_soliton(&p, &grid, 0.0).unwrap();
        let cfg = EvolveConfig::split_step(1e-2, 0.5).with_stride(1);
        let traj = split_step_evolve(&f0, -1.0, &cfg).unwrap();
        let n0 = classical_norm(&f0);
        for f in &traj.frames {
            assert!(relative_drift(classical_norm(f), n0) < 1e-13 * 51.0);
        }
    }

    #[test]
    fn wrong_scheme_rejected() {
        let grid = Grid::new(8, 8.0).unwrap();
        let f0 = ClassicalField::zeros(grid);
        assert!(split_step_evolve(&f0, 1.0, &EvolveConfig::rk4(0.1, 1.0)).is_err());
        let model = LatticeModel::periodic(8, 1.0, 1.0, 1).unwrap();
        let alpha = vec![Complex64::new(0.0, 0.0); 8];
        assert!(lattice_classical_evolve(&alpha, &model, &EvolveConfig::split_step(0.1, 1.0)).is_err());
        assert!(lattice_classical_evolve(&alpha[..3], &model, &EvolveConfig::rk4(0.1, 1.0)).is_err());
    }

    #[test]
    fn blowup_aborts_with_diagnostic() {
        let grid = Grid::new(16, 16.0).unwrap();
        // |f|² overflows, so the nonlinear phase is NaN after the first step
        let f0 = ClassicalField::plane_wave(grid, 1e200, 1).unwrap();
        let cfg = EvolveConfig::split_step(0.5, 1.0);
        assert!(matches!(split_step_evolve(&f0, 1.0, &cfg), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let model = LatticeModel::periodic(5, 0.5, -1.0, 1).unwrap();
        let alpha = vec![Complex64::new(0.0, 0.0); 5];
        let traj = lattice_classical_evolve(&alpha, &model, &EvolveConfig::rk4(1e-2, 1.0)).unwrap();
        assert!(traj.last().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn on_site_phase_rotation() {
        // h = 0: α(t) = α(0) e^{-i (2c/Δ)|α|² t}
        let (delta, c) = (0.5, 0.7);
        let mut p = LatticeParams::new(3, delta, c, 1);
        p.hopping = false;
        let model = p.build().unwrap();
        let a0 = Complex64::new(0.6, -0.3);
        let alpha = vec![a0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let t = 1.0;
        let traj = lattice_classical_evolve(&alpha, &model, &EvolveConfig::rk4(1e-3, t)).unwrap();
        let expected = a0 * Complex64::from_polar(1.0, -2.0 * c / delta * a0.norm_sqr() * t);
        let got = traj.last()[0];
        assert!((got - expected).norm() < 1e-11);
        assert_abs_diff_eq!(got.norm(), a0.norm(), epsilon = 1e-12);
    }

    #[test]
    fn snapshot_stride() {
        let model = LatticeModel::periodic(3, 1.0, 0.0, 1).unwrap();
        let alpha = vec![Complex64::new(0.1, 0.0); 3];
        let traj = lattice_classical_evolve(&alpha, &model, &EvolveConfig::rk4(0.1, 1.0).with_stride(3)).unwrap();
        // t = 0, 0.3, 0.6, 0.9, 1.0
        assert_eq!(traj.times.len(), 5);
        assert_abs_diff_eq!(traj.times[4], 1.0, epsilon = 1e-15);
    }
}
