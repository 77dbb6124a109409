//! Quantum vs classical evolution of a coherent state.
//!
//! `|f,t⟩ = e^{-iHt}|f⟩` is compared with `|f̃,t⟩`, the coherent state of the
//! classically evolved field, through the overlap `r(t) = ⟨f,t|f̃,t⟩`. To first
//! order `r(Δt) = 1 - i(c/Δ)Σ_j|α_j|⁴ Δt`, and the remainder carries a factor `c`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use log::{debug, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::classical::{lattice_advance, split_step_evolve, EvolveConfig};
use crate::error::{Error, Result};
use crate::grid::ClassicalField;
use crate::lattice::state::{check_grid, inner};
use crate::lattice::{
    coherent_state_from_amplitudes, discarded_probability, field_expectation, hamiltonian, total_number,
    FockState, LatticeModel, SparseOperator, TruncationPolicy,
};
use crate::propagate::{expectation, Propagator, PropagatorConfig};

/// Overlap below which a run counts as decohered.
pub const DECOHERENCE_THRESHOLD: f64 = 1.0 / std::f64::consts::E;

/// Fit residuals above this fraction of the signal reject a slope fit.
pub const FIT_RESIDUAL_RELATIVE: f64 = 1e-2;
/// Absolute floor for the fit-residual check, for signals that vanish at c = 0.
pub const FIT_RESIDUAL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalMode {
    /// RK4 on the lattice equations of motion, matched to the quantum hopping.
    #[default]
    LatticeOde,
    /// Continuum split-step integrator sampled on the lattice sites.
    SplitStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrespondenceConfig {
    /// Classical step size and drift limits; `t_final` is ignored.
    pub evolve: EvolveConfig,
    pub propagator: PropagatorConfig,
    pub truncation: TruncationPolicy,
    pub mode: ClassicalMode,
}

impl Default for CorrespondenceConfig {
    fn default() -> Self {
        Self {
            evolve: EvolveConfig::default(),
            propagator: PropagatorConfig::default(),
            truncation: TruncationPolicy::default(),
            mode: ClassicalMode::LatticeOde,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSeries {
    pub times: Vec<f64>,
    pub r: Vec<Complex64>,
    /// `max_j |⟨ψ̂(x_j)⟩_t - f(x_j, t)|`.
    pub field_dev: Vec<f64>,
    /// `|⟨N̂⟩_t - ⟨N̂⟩_0|`.
    pub n_drift: Vec<f64>,
    /// `|⟨H⟩_t - ⟨H⟩_0|`.
    pub e_drift: Vec<f64>,
    /// Largest discarded coherent-state weight along the classical trajectory.
    pub max_tail: f64,
}

impl OverlapSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.r.iter().map(|z| z.norm()).collect()
    }

    pub fn arg(&self) -> Vec<f64> {
        self.r.iter().map(|z| z.arg()).collect()
    }

    pub fn min_abs(&self) -> f64 {
        self.r.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// First sampled time with `|r| < 1/e`.
    pub fn decoherence_time(&self) -> Option<f64> {
        self.first_below(DECOHERENCE_THRESHOLD)
    }

    pub fn first_below(&self, level: f64) -> Option<f64> {
        self.times.iter().zip(&self.r).find(|(_, z)| z.norm() < level).map(|(t, _)| *t)
    }

    /// Header `t,re_r,im_r,abs_r,field_dev,n_drift,e_drift`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,re_r,im_r,abs_r,field_dev,n_drift,e_drift")?;
        for k in 0..self.len() {
            let z = self.r[k];
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k],
                z.re,
                z.im,
                z.norm(),
                self.field_dev[k],
                self.n_drift[k],
                self.e_drift[k]
            )?;
        }
        Ok(())
    }

    /// Parses the output of [`OverlapSeries::write_csv`], skipping `#` lines.
    /// `max_tail` is not part of the table and comes back as NaN.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut out = OverlapSeries {
            times: Vec::new(),
            r: Vec::new(),
            field_dev: Vec::new(),
            n_drift: Vec::new(),
            e_drift: Vec::new(),
            max_tail: f64::NAN,
        };
        let mut header_seen = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "t,re_r,im_r,abs_r,field_dev,n_drift,e_drift" {
                    return Err(Error::Config(format!("line {}: unexpected overlap header {line:?}", lineno + 1)));
                }
                header_seen = true;
                continue;
            }
            let cols = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
            if cols.len() != 7 {
                return Err(Error::Config(format!(
                    "line {}: expected 7 columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            out.times.push(cols[0]);
            out.r.push(Complex64::new(cols[1], cols[2]));
            out.field_dev.push(cols[4]);
            out.n_drift.push(cols[5]);
            out.e_drift.push(cols[6]);
        }
        if !header_seen {
            return Err(Error::Config("overlap table has no header".into()));
        }
        Ok(out)
    }
}

/// `n` equally spaced times from 0 to `t_final` inclusive.
pub fn uniform_times(t_final: f64, samples: usize) -> Vec<f64> {
    if samples <= 1 {
        return vec![0.0];
    }
    (0..samples).map(|k| t_final * k as f64 / (samples - 1) as f64).collect()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParameter("times must be finite and ≥ 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("times must be ascending".into()));
    }
    Ok(())
}

/// Classical lattice amplitudes `α_j(t)` at each of the ascending `times`.
pub fn classical_amplitudes(f0: &ClassicalField, model: &LatticeModel, cfg: &CorrespondenceConfig, times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    check_times(times)?;
    let mut out = Vec::with_capacity(times.len());
    let mut now = 0.0;
    match cfg.mode {
        ClassicalMode::LatticeOde => {
            let mut alpha = f0.lattice_amplitudes();
            for &t in times {
                lattice_advance(model, &mut alpha, t - now, cfg.evolve.dt, now)?;
                now = t;
                out.push(alpha.clone());
            }
        }
        ClassicalMode::SplitStep => {
            let mut field = f0.clone();
            field.set_time(0.0);
            for &t in times {
                let span = t - now;
                if span > 0.0 {
                    let seg = EvolveConfig {
                        dt: cfg.evolve.dt.min(span),
                        t_final: span,
                        scheme: crate::classical::Scheme::SplitStepStrang,
                        snapshot_stride: 0,
                        ..cfg.evolve
                    };
                    field = split_step_evolve(&field, model.coupling(), &seg)?.last().clone();
                }
                now = t;
                out.push(field.lattice_amplitudes());
            }
        }
    }
    Ok(out)
}

/// Shared quantum-side setup: Hamiltonian, propagator and the initial coherent state.
struct QuantumSide {
    h: Arc<SparseOperator>,
    number: SparseOperator,
    propagator: Propagator,
    initial: FockState,
}

impl QuantumSide {
    fn new(f0: &ClassicalField, model: &LatticeModel, cfg: &CorrespondenceConfig) -> Result<Self> {
        check_grid(f0, model)?;
        cfg.evolve.validate()?;
        let initial = coherent_state_from_amplitudes(&f0.lattice_amplitudes(), model, &cfg.truncation)?;
        let h = Arc::new(hamiltonian(model)?);
        let propagator = Propagator::new(h.clone(), cfg.propagator)?;
        debug!(
            "quantum side: dim {} nnz {} engine {:?}",
            model.dim(),
            h.nnz(),
            propagator.engine()
        );
        Ok(Self {
            h,
            number: total_number(model),
            propagator,
            initial,
        })
    }
}

fn tail_along(model: &LatticeModel, policy: &TruncationPolicy, times: &[f64], alphas: &[Vec<Complex64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (t, a) in times.iter().zip(alphas) {
        let tail = discarded_probability(model, a);
        policy.check(tail, Some(*t))?;
        worst = worst.max(tail);
    }
    Ok(worst)
}

/// `r(t) = ⟨f,t|f̃,t⟩` on `times` (ascending, starting anywhere ≥ 0), together with
/// the field-expectation deviation and conservation logs.
pub fn overlap_series(f0: &ClassicalField, model: &LatticeModel, cfg: &CorrespondenceConfig, times: &[f64]) -> Result<OverlapSeries> {
    check_times(times)?;
    let quantum = QuantumSide::new(f0, model, cfg)?;
    let classical = classical_amplitudes(f0, model, cfg, times)?;
    let max_tail = tail_along(model, &cfg.truncation, times, &classical)?;
    let states = quantum.propagator.evolve_many(&quantum.initial, times)?;

    let n0 = expectation(&quantum.initial, &quantum.number)?.re;
    let e0 = expectation(&quantum.initial, &quantum.h)?.re;
    let lenient = TruncationPolicy::lenient(f64::INFINITY);
    let scale = model.spacing().sqrt();
    let rows: Vec<(Complex64, f64, f64, f64)> = states
        .par_iter()
        .zip(classical.par_iter())
        .map(|(state, alpha)| {
            let tilde = coherent_state_from_amplitudes(alpha, model, &lenient)?;
            let r = inner(state.amplitudes(), tilde.amplitudes());
            let dev = field_expectation(state, model)
                .iter()
                .zip(alpha)
                .map(|(e, a)| (e - a / scale).norm())
                .fold(0.0, f64::max);
            let n = expectation(state, &quantum.number)?.re;
            let e = expectation(state, &quantum.h)?.re;
            Ok((r, dev, (n - n0).abs(), (e - e0).abs()))
        })
        .collect::<Result<_>>()?;

    let series = OverlapSeries {
        times: times.to_vec(),
        r: rows.iter().map(|x| x.0).collect(),
        field_dev: rows.iter().map(|x| x.1).collect(),
        n_drift: rows.iter().map(|x| x.2).collect(),
        e_drift: rows.iter().map(|x| x.3).collect(),
        max_tail,
    };
    if let Some(k) = series.r.iter().position(|z| z.norm() > 1.0 + 1e-9) {
        warn!("|r| = {} exceeds 1 at t = {}", series.r[k].norm(), series.times[k]);
    }
    Ok(series)
}

/// `max_j |⟨ψ̂(x_j)⟩_t - f(x_j, t)|` on `times`.
pub fn field_deviation(f0: &ClassicalField, model: &LatticeModel, cfg: &CorrespondenceConfig, times: &[f64]) -> Result<Vec<f64>> {
    Ok(overlap_series(f0, model, cfg, times)?.field_dev)
}

/// First-order slope predicted for `dr/dt` at 0: `-i (c/Δ) Σ_j |α_j|⁴`.
pub fn predicted_slope(alphas: &[Complex64], model: &LatticeModel) -> Complex64 {
    let quartic: f64 = alphas.iter().map(|a| a.norm_sqr().powi(2)).sum();
    Complex64::new(0.0, -model.interaction() * quartic)
}

/// Complex least squares `y ≈ s₁x + s₂x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub s1: Complex64,
    pub s2: Complex64,
    /// 95% confidence half-widths: Student-t scaled residual scatter, plus the
    /// per-point noise floor in quadrature.
    pub s1_err: f64,
    pub s2_err: f64,
    /// RMS of `|y_k - fit(x_k)|`.
    pub residual: f64,
}

/// Fits `y ≈ s₁x + s₂x²` with at least two points. `noise` is the per-point
/// uncertainty added in quadrature to the residual scatter.
pub fn fit_quadratic(xs: &[f64], ys: &[Complex64], noise: f64) -> Result<QuadraticFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter("a quadratic fit needs at least two points".into()));
    }
    // columns scaled by the largest x for conditioning
    let x_max = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let (mut b1, mut b2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for (&x, &y) in xs.iter().zip(ys) {
        let u = x / x_max;
        let (p, q) = (u, u * u);
        a11 += p * p;
        a12 += p * q;
        a22 += q * q;
        b1 += y * p;
        b2 += y * q;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-14 * a11 * a22 {
        return Err(Error::InvalidParameter("fit abscissae are degenerate".into()));
    }
    let c1 = (b1 * a22 - b2 * a12) / det;
    let c2 = (b2 * a11 - b1 * a12) / det;
    let s1 = c1 / x_max;
    let s2 = c2 / (x_max * x_max);
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - s1 * x - s2 * x * x).norm_sqr())
        .sum();
    let n = xs.len();
    let residual = (ssr / n as f64).sqrt();
    let scatter = if n > 2 {
        let dof = (n - 2) as f64;
        let t = StudentsT::new(0.0, 1.0, dof)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(1.96);
        t * t * ssr / dof
    } else {
        0.0
    };
    let sigma = (scatter + noise * noise).sqrt();
    Ok(QuadraticFit {
        s1,
        s2,
        s1_err: sigma * (a22 / det).sqrt() / x_max,
        s2_err: sigma * (a11 / det).sqrt() / (x_max * x_max),
        residual,
    })
}

/// Slope `ys ≈ k·xs` through the origin and its uncentered `R²`.
pub fn fit_through_origin(xs: &[f64], ys: &[Complex64]) -> Result<(Complex64, f64)> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::InvalidParameter("origin fit needs matching, non-empty samples".into()));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("origin fit needs a nonzero abscissa".into()));
    }
    let k: Complex64 = xs.iter().zip(ys).map(|(x, y)| y * *x).sum::<Complex64>() / sxx;
    let total: f64 = ys.iter().map(|y| y.norm_sqr()).sum();
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - k * *x).norm_sqr()).sum();
    let r2 = if total > 0.0 { 1.0 - ssr / total } else { 1.0 };
    Ok((k, r2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub coupling: f64,
    pub spacing: f64,
    /// `Σ_j |α_j|⁴` of the prepared amplitudes.
    pub quartic_sum: f64,
    pub dts: Vec<f64>,
    /// `r(Δt)` for each entry of `dts`.
    pub overlaps: Vec<Complex64>,
    pub fit: QuadraticFit,
    pub predicted: Complex64,
    /// `|s₁ - predicted| / |predicted|`; the absolute error when the prediction is 0.
    pub relative_error: f64,
    /// `s₁` refitted on the smallest half of `dts`.
    pub half_s1: Complex64,
    /// Whether the half refit moved `s₁` by less than its error bar.
    pub consistent: bool,
    pub max_tail: f64,
}

impl SlopeReport {
    pub fn s1(&self) -> Complex64 {
        self.fit.s1
    }

    pub fn s2(&self) -> Complex64 {
        self.fit.s2
    }
}

/// Fits `r(Δt) - 1 = s₁Δt + s₂Δt²` and compares `s₁` with [`predicted_slope`].
/// Each `r(Δt)` is computed directly from t = 0; classical substeps are at most
/// `min(cfg.evolve.dt, Δt/16)`.
pub fn short_time_slope(f0: &ClassicalField, model: &LatticeModel, dts: &[f64], cfg: &CorrespondenceConfig) -> Result<SlopeReport> {
    if dts.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 Δt values, got {}", dts.len())));
    }
    if dts.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidParameter("Δt values must be finite and > 0".into()));
    }
    let mut sorted = dts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi < 4.0 * lo * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "Δt values must span a factor of 4, got [{lo}, {hi}]"
        )));
    }

    let quantum = QuantumSide::new(f0, model, cfg)?;
    let alpha0 = f0.lattice_amplitudes();
    let rows: Vec<(Complex64, f64)> = sorted
        .par_iter()
        .map(|&dt| {
            let mut alpha = alpha0.clone();
            let substep = cfg.evolve.dt.min(dt / 16.0);
            match cfg.mode {
                ClassicalMode::LatticeOde => lattice_advance(model, &mut alpha, dt, substep, 0.0)?,
                ClassicalMode::SplitStep => {
                    let seg = EvolveConfig {
                        dt: substep,
                        t_final: dt,
                        scheme: crate::classical::Scheme::SplitStepStrang,
                        snapshot_stride: 0,
                        ..cfg.evolve
                    };
                    alpha = split_step_evolve(f0, model.coupling(), &seg)?.last().lattice_amplitudes();
                }
            }
            let tail = discarded_probability(model, &alpha);
            cfg.truncation.check(tail, Some(dt))?;
            let tilde = coherent_state_from_amplitudes(&alpha, model, &TruncationPolicy::lenient(f64::INFINITY))?;
            let state = quantum.propagator.evolve(&quantum.initial, dt)?;
            Ok((inner(state.amplitudes(), tilde.amplitudes()), tail))
        })
        .collect::<Result<_>>()?;
    let overlaps: Vec<Complex64> = rows.iter().map(|x| x.0).collect();
    let max_tail = rows.iter().map(|x| x.1).fold(0.0, f64::max);
    if let Some(k) = overlaps.iter().position(|r| (r - 1.0).norm() >= 0.1) {
        return Err(Error::InvalidParameter(format!(
            "Δt = {} is too large: |r - 1| = {:.3e} ≥ 0.1",
            sorted[k],
            (overlaps[k] - 1.0).norm()
        )));
    }

    let ys: Vec<Complex64> = overlaps.iter().map(|r| r - 1.0).collect();
    // propagator error is bounded by tolerance·Δt per state
    let noise = 2.0 * cfg.propagator.tolerance * hi + 1e-15;
    let fit = fit_quadratic(&sorted, &ys, noise)?;
    let signal = (ys.iter().map(|y| y.norm_sqr()).sum::<f64>() / ys.len() as f64).sqrt();
    let threshold = (FIT_RESIDUAL_RELATIVE * signal).max(FIT_RESIDUAL_FLOOR);
    if fit.residual > threshold {
        return Err(Error::FitResidual {
            residual: fit.residual,
            threshold,
        });
    }

    let half = (sorted.len() / 2).max(2);
    let half_fit = fit_quadratic(&sorted[..half], &ys[..half], noise)?;
    let consistent = (half_fit.s1 - fit.s1).norm() <= fit.s1_err;
    if !consistent {
        warn!(
            "short-time fit not converged in Δt: s1 = {}, smallest-half refit {} (error bar {:.3e})",
            fit.s1, half_fit.s1, fit.s1_err
        );
    }

    let predicted = predicted_slope(&alpha0, model);
    let relative_error = if predicted.norm() > 0.0 {
        (fit.s1 - predicted).norm() / predicted.norm()
    } else {
        fit.s1.norm()
    };
    Ok(SlopeReport {
        coupling: model.coupling(),
        spacing: model.spacing(),
        quartic_sum: alpha0.iter().map(|a| a.norm_sqr().powi(2)).sum(),
        dts: sorted,
        overlaps,
        fit,
        predicted,
        relative_error,
        half_s1: half_fit.s1,
        consistent,
        max_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{bright_soliton, Grid, SolitonParams};
    use crate::propagate::Engine;

    fn soliton_field(model: &LatticeModel, peak: f64) -> ClassicalField {
        let grid = model.grid().unwrap();
        let p = SolitonParams::bright(1.0, -1.0).centered_at(grid.length() / 2.0).moving(0.3);
        let f = bright_soliton(&p, &grid, 0.0).unwrap();
        let alpha_peak = f.max_abs() * grid.spacing().sqrt();
        f.scaled(peak / alpha_peak)
    }

    fn cfg() -> CorrespondenceConfig {
        CorrespondenceConfig {
            evolve: EvolveConfig::rk4(1e-3, 1.0),
            propagator: PropagatorConfig {
                engine: Engine::DenseEig,
                ..PropagatorConfig::default()
            },
            truncation: TruncationPolicy::lenient(1e-6),
            mode: ClassicalMode::LatticeOde,
        }
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let (s1, s2) = (Complex64::new(0.3, -2.0), Complex64::new(-1.5, 4.0));
        let xs = [1e-3, 2e-3, 4e-3, 8e-3];
        let ys: Vec<Complex64> = xs.iter().map(|&x| s1 * x + s2 * x * x).collect();
        let fit = fit_quadratic(&xs, &ys, 0.0).unwrap();
        assert!((fit.s1 - s1).norm() < 1e-10);
        assert!((fit.s2 - s2).norm() < 1e-6);
        assert!(fit.residual < 1e-15);
        assert!(fit_quadratic(&xs[..1], &ys[..1], 0.0).is_err());
        assert!(fit_quadratic(&[1.0, 1.0], &ys[..2], 0.0).is_err());
    }

    #[test]
    fn origin_fit_r2() {
        let xs = [-0.2, -0.1, 0.1, 0.2];
        let ys: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(0.0, 3.0 * x)).collect();
        let (k, r2) = fit_through_origin(&xs, &ys).unwrap();
        assert!((k - Complex64::new(0.0, 3.0)).norm() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
        // a constant offset is not proportional to x
        let off: Vec<Complex64> = ys.iter().map(|y| y + 1.0).collect();
        assert!(fit_through_origin(&xs, &off).unwrap().1 < 0.5);
    }

    #[test]
    fn predicted_slope_sign() {
        let model = LatticeModel::periodic(3, 0.5, -0.1, 2).unwrap();
        let alphas = [Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.2), Complex64::new(0.0, 0.0)];
        let s = predicted_slope(&alphas, &model);
        assert_eq!(s.re, 0.0);
        // -i (c/Δ) Σ|α|⁴ = -i (-0.2)(1e-4 + 1.6e-3)
        assert!((s.im - 0.2 * 1.7e-3).abs() < 1e-16);
    }

    #[test]
    fn overlap_starts_at_one_and_stays_there_without_interaction() {
        let model = LatticeModel::periodic(4, 1.0, 0.0, 5).unwrap();
        let f0 = soliton_field(&model, 0.1);
        let times = uniform_times(5.0, 11);
        let series = overlap_series(&f0, &model, &cfg(), &times).unwrap();
        assert_eq!(series.len(), 11);
        assert!((series.r[0] - 1.0).norm() < 1e-12);
        for k in 0..series.len() {
            assert!((series.r[k] - 1.0).norm() < 1e-6, "t = {} r = {}", series.times[k], series.r[k]);
            assert!(series.field_dev[k] < 1e-6);
            assert!(series.n_drift[k] < 1e-9 && series.e_drift[k] < 1e-9);
        }
        assert!(series.decoherence_time().is_none());
    }

    #[test]
    fn interaction_pulls_overlap_below_one() {
        let model = LatticeModel::periodic(4, 1.0, -0.5, 6).unwrap();
        let f0 = soliton_field(&model, 0.5);
        let series = overlap_series(&f0, &model, &cfg(), &uniform_times(4.0, 9)).unwrap();
        assert!((series.r[0] - 1.0).norm() < 1e-8);
        assert!(series.min_abs() < 1.0 - 1e-4);
        assert!(series.abs().iter().all(|a| *a <= 1.0 + 1e-9));
        assert!(series.field_dev.last().unwrap() > &1e-6);
    }

    #[test]
    fn slope_matches_prediction_on_small_lattice() {
        let model = LatticeModel::periodic(4, 1.0, -0.1, 6).unwrap();
        let f0 = soliton_field(&model, 0.2);
        let mut c = cfg();
        c.propagator.tolerance = 1e-13;
        let report = short_time_slope(&f0, &model, &[1e-3, 2e-3, 4e-3], &c).unwrap();
        assert!(report.predicted.im > 0.0);
        assert!(report.relative_error < 1e-2, "{report:?}");
        assert!(report.fit.s1.re.abs() < 1e-6 * report.fit.s1.norm() + report.fit.s1_err);
    }

    #[test]
    fn slope_vanishes_without_interaction() {
        let model = LatticeModel::periodic(4, 1.0, 0.0, 6).unwrap();
        let f0 = soliton_field(&model, 0.1);
        let report = short_time_slope(&f0, &model, &[1e-3, 2e-3, 4e-3], &cfg()).unwrap();
        assert!(report.fit.s1.norm() < 1e-8, "{:?}", report.fit);
        assert!(report.fit.s2.norm() < 1e-8, "{:?}", report.fit);
    }

    #[test]
    fn slope_rejects_bad_grids() {
        let model = LatticeModel::periodic(4, 1.0, -0.1, 4).unwrap();
        let f0 = soliton_field(&model, 0.1);
        for dts in [&[1e-3, 2e-3][..], &[1e-3, 2e-3, 3e-3], &[1e-3, -2e-3, 4e-3]] {
            assert!(matches!(
                short_time_slope(&f0, &model, dts, &cfg()),
                Err(Error::InvalidParameter(_))
            ));
        }
        let wrong = ClassicalField::zeros(Grid::new(5, 5.0).unwrap());
        assert!(short_time_slope(&wrong, &model, &[1e-3, 2e-3, 4e-3], &cfg()).is_err());
    }

    #[test]
    fn strict_truncation_names_the_time() {
        let model = LatticeModel::periodic(3, 1.0, -0.2, 2).unwrap();
        let f0 = soliton_field(&model, 0.5);
        let mut c = cfg();
        c.truncation = TruncationPolicy::default();
        assert!(matches!(
            overlap_series(&f0, &model, &c, &[0.0, 1.0]),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let series = OverlapSeries {
            times: vec![0.0, 0.5],
            r: vec![Complex64::new(1.0, 0.0), Complex64::new(0.9, -0.1 / 3.0)],
            field_dev: vec![0.0, 1e-3],
            n_drift: vec![0.0, 1e-12],
            e_drift: vec![0.0, 2e-12],
            max_tail: 1e-9,
        };
        let mut buf = b"# comment\n".to_vec();
        series.write_csv(&mut buf).unwrap();
        let back = OverlapSeries::read_csv(&buf[..]).unwrap();
        assert_eq!(back.times, series.times);
        assert_eq!(back.r, series.r);
        assert_eq!(back.e_drift, series.e_drift);
    }

    #[test]
    fn split_step_mode_runs() {
        let model = LatticeModel::periodic(4, 1.0, -0.2, 4).unwrap();
        let f0 = soliton_field(&model, 0.1);
        let mut c = cfg();
        c.mode = ClassicalMode::SplitStep;
        c.evolve = EvolveConfig::split_step(1e-3, 1.0);
        let series = overlap_series(&f0, &model, &c, &uniform_times(0.5, 3)).unwrap();
        assert!((series.r[0] - 1.0).norm() < 1e-8);
        assert!(series.r[2].norm() < 1.0);
    }
}
