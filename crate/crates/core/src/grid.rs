//! Classical fields on a periodic 1D grid, closed-form NLS solitons and the
//! classical observables (particle number, energy functional).
//!
//! Conventions throughout: `i ∂_t f = -∂_x² f + 2c |f|² f` with ħ = 1, 2m = 1.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use num_complex::Complex64;

use crate::error::{ensure, Error, Result};
use crate::spectral::Spectral;

/// Boundary mismatch above which a sampled soliton is reported as not periodic.
pub const BOUNDARY_MISMATCH_WARN: f64 = 1e-8;

/// Uniform periodic grid `x_j = j Δ`, `j = 0..M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    sites: usize,
    length: f64,
}

impl Grid {
    pub fn new(sites: usize, length: f64) -> Result<Self> {
        ensure(sites >= 2, || format!("grid needs at least 2 sites, got {sites}"))?;
        ensure(length.is_finite() && length > 0.0, || {
            format!("grid length must be positive and finite, got {length}")
        })?;
        Ok(Self { sites, length })
    }

    pub fn with_spacing(sites: usize, spacing: f64) -> Result<Self> {
        ensure(spacing.is_finite() && spacing > 0.0, || {
            format!("grid spacing must be positive and finite, got {spacing}")
        })?;
        Self::new(sites, spacing * sites as f64)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.sites as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.sites).map(|j| self.x(j))
    }

    /// Maps a displacement onto the nearest periodic image in `[-L/2, L/2)`.
    pub fn wrap_centered(&self, d: f64) -> f64 {
        let l = self.length;
        (d + 0.5 * l).rem_euclid(l) - 0.5 * l
    }
}

/// Samples `f(x_j, t)` of a complex classical field.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalField {
    grid: Grid,
    values: Vec<Complex64>,
    time: f64,
}

impl ClassicalField {
    pub fn new(grid: Grid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.sites() {
            return Err(Error::DimensionMismatch {
                expected: grid.sites(),
                got: values.len(),
            });
        }
        ensure(values.iter().all(|z| z.re.is_finite() && z.im.is_finite()), || {
            "field values must be finite".into()
        })?;
        ensure(time.is_finite(), || format!("field time must be finite, got {time}"))?;
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.sites()],
            grid,
            time: 0.0,
        }
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, values, time)
    }

    /// `A e^{i k x}` with `k = 2π mode / L`, which is periodic on the grid.
    pub fn plane_wave(grid: Grid, amplitude: f64, mode: i64) -> Result<Self> {
        let k = 2.0 * PI * mode as f64 / grid.length();
        Self::from_fn(grid, 0.0, |x| Complex64::from_polar(amplitude, k * x))
    }

    /// Field whose samples are `α_j / √Δ` for lattice amplitudes `α_j`.
    pub fn from_lattice_amplitudes(grid: Grid, alphas: &[Complex64], time: f64) -> Result<Self> {
        let scale = 1.0 / grid.spacing().sqrt();
        Self::new(grid, alphas.iter().map(|a| a * scale).collect(), time)
    }

    /// Lattice amplitudes `α_j = f(x_j) √Δ`.
    pub fn lattice_amplitudes(&self) -> Vec<Complex64> {
        let scale = self.grid.spacing().sqrt();
        self.values.iter().map(|z| z * scale).collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * factor).collect(),
            time: self.time,
        }
    }

    /// Writes the snapshot as CSV: a `#` metadata line with M, Δ, t, c, then
    /// `x,re_f,im_f,abs2` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, coupling: f64) -> std::io::Result<()> {
        writeln!(
            w,
            "# M={} spacing={:.16e} t={:.16e} c={:.16e}",
            self.grid.sites(),
            self.grid.spacing(),
            self.time,
            coupling
        )?;
        writeln!(w, "x,re_f,im_f,abs2")?;
        for (x, z) in self.grid.points().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", x, z.re, z.im, z.norm_sqr())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolitonKind {
    /// Attractive coupling, peak modulus `η / √(-c)`.
    Bright { eta: f64 },
    /// Repulsive coupling, background density `ρ`, grayness angle `φ ∈ (-π/2, π/2)`.
    /// `φ = 0` is the fully dark soliton.
    Gray { rho: f64, angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    pub kind: SolitonKind,
    /// Galilean boost; the whole profile translates at `2v`.
    pub velocity: f64,
    pub center: f64,
    pub phase: f64,
    pub coupling: f64,
}

impl SolitonParams {
    pub fn bright(eta: f64, coupling: f64) -> Self {
        Self {
            kind: SolitonKind::Bright { eta },
            velocity: 0.0,
            center: 0.0,
            phase: 0.0,
            coupling,
        }
    }

    pub fn gray(rho: f64, angle: f64, coupling: f64) -> Self {
        Self {
            kind: SolitonKind::Gray { rho, angle },
            velocity: 0.0,
            center: 0.0,
            phase: 0.0,
            coupling,
        }
    }

    pub fn centered_at(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn moving(mut self, velocity: f64) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.velocity, self.center, self.phase, self.coupling]
            .iter()
            .all(|v| v.is_finite());
        ensure(finite, || "soliton parameters must be finite".into())?;
        match self.kind {
            SolitonKind::Bright { eta } => {
                ensure(self.coupling < 0.0, || {
                    format!("bright solitons need attractive coupling c < 0, got c = {}", self.coupling)
                })?;
                ensure(eta.is_finite() && eta > 0.0, || format!("bright amplitude η must be > 0, got {eta}"))
            }
            SolitonKind::Gray { rho, angle } => {
                ensure(self.coupling > 0.0, || {
                    format!("gray solitons need repulsive coupling c > 0, got c = {}", self.coupling)
                })?;
                ensure(rho.is_finite() && rho > 0.0, || format!("background density ρ must be > 0, got {rho}"))?;
                ensure(angle.is_finite() && angle.abs() < 0.5 * PI, || {
                    format!("grayness angle must lie in (-π/2, π/2), got {angle}")
                })
            }
        }
    }

    fn boost(&self, x: f64, t: f64) -> Complex64 {
        let v = self.velocity;
        Complex64::from_polar(1.0, v * x - v * v * t + self.phase)
    }
}

#[derive(Clone, Copy)]
enum GrayLayout {
    Pair,
    Single,
}

/// `i sinφ + cosφ tanh(k s)`, one gray core at `s = 0`.
fn gray_core(s: f64, rho: f64, angle: f64, coupling: f64) -> Complex64 {
    let k = (coupling * rho).sqrt() * angle.cos();
    Complex64::new(angle.cos() * (k * s).tanh(), angle.sin())
}

/// Closed-form value with the profile coordinate `d` taken literally (no wrapping).
/// `d` is measured from the layout's window centre; `x` only enters the boost phase.
fn unwrapped_value(p: &SolitonParams, layout: Option<GrayLayout>, grid: &Grid, d: f64, x: f64, t: f64) -> Complex64 {
    let c = p.coupling;
    match p.kind {
        SolitonKind::Bright { eta } => {
            let amp = eta / (-c).sqrt();
            let sech = 1.0 / (eta * d).cosh();
            amp * sech * Complex64::from_polar(1.0, eta * eta * t) * p.boost(x, t)
        }
        SolitonKind::Gray { rho, angle } => {
            let background = Complex64::from_polar(rho.sqrt(), -2.0 * c * rho * t);
            let speed = 2.0 * (c * rho).sqrt() * angle.sin();
            let core = match layout.unwrap_or(GrayLayout::Pair) {
                GrayLayout::Single => gray_core(d - speed * t, rho, angle, c),
                GrayLayout::Pair => {
                    let q = 0.25 * grid.length();
                    gray_core(d + q - speed * t, rho, angle, c) * gray_core(d - q + speed * t, rho, -angle, c)
                }
            };
            background * core * p.boost(x, t)
        }
    }
}

/// Window centre for the layout: the soliton itself, or the midpoint of a gray pair.
fn window_center(p: &SolitonParams, layout: Option<GrayLayout>, grid: &Grid, t: f64) -> f64 {
    let drift = p.center + 2.0 * p.velocity * t;
    match (p.kind, layout) {
        (SolitonKind::Gray { .. }, Some(GrayLayout::Pair)) => drift + 0.25 * grid.length(),
        _ => drift,
    }
}

fn sample(p: &SolitonParams, layout: Option<GrayLayout>, grid: &Grid, t: f64) -> Result<ClassicalField> {
    ensure(t.is_finite(), || format!("time must be finite, got {t}"))?;
    let center = window_center(p, layout, grid, t);
    let field = ClassicalField::from_fn(*grid, t, |x| {
        let d = grid.wrap_centered(x - center);
        unwrapped_value(p, layout, grid, d, x, t)
    })?;
    let mismatch = mismatch_at(p, layout, grid, t);
    if mismatch > BOUNDARY_MISMATCH_WARN {
        warn!("soliton is not periodic on a box of length {}: boundary mismatch {mismatch:.3e}", grid.length());
    }
    Ok(field)
}

/// Mismatch of value and slope across the periodic seam at time `t`.
fn mismatch_at(p: &SolitonParams, layout: Option<GrayLayout>, grid: &Grid, t: f64) -> f64 {
    let half = 0.5 * grid.length();
    let center = window_center(p, layout, grid, t);
    let at = |d: f64| unwrapped_value(p, layout, grid, d, center + d, t);
    let h = 1e-5;
    let slope = |d: f64| (at(d + h) - at(d - h)) / (2.0 * h);
    (at(-half) - at(half)).norm() + (slope(-half) - slope(half)).norm()
}

/// Seam mismatch (value plus slope) of the sampled closed form. Gray solitons use the pair layout.
pub fn boundary_mismatch(p: &SolitonParams, grid: &Grid, t: f64) -> f64 {
    let layout = matches!(p.kind, SolitonKind::Gray { .. }).then_some(GrayLayout::Pair);
    mismatch_at(p, layout, grid, t)
}

/// Bright soliton `(η/√(-c)) sech(η(x - x0 - 2vt)) e^{i[vx - (v² - η²)t + φ0]}`,
/// sampled at the nearest periodic image of the core.
pub fn bright_soliton(p: &SolitonParams, grid: &Grid, t: f64) -> Result<ClassicalField> {
    p.validate()?;
    let SolitonKind::Bright { eta } = p.kind else {
        return Err(Error::InvalidParameter("bright_soliton needs SolitonKind::Bright".into()));
    };
    let width = 1.0 / eta;
    if width < 2.0 * grid.spacing() || width > 0.1 * grid.length() {
        warn!(
            "bright soliton width {width:.3e} is poorly resolved (spacing {:.3e}, box {:.3e})",
            grid.spacing(),
            grid.length()
        );
    }
    sample(p, None, grid, t)
}

/// Gray soliton pair: the requested core at `x0` with angle `φ`, and a partner at
/// `x0 + L/2` with angle `-φ`, so the total phase winding around the box closes.
/// The pair moves apart at `±2√(cρ) sinφ`.
pub fn gray_soliton(p: &SolitonParams, grid: &Grid, t: f64) -> Result<ClassicalField> {
    gray(p, GrayLayout::Pair, grid, t)
}

/// Single gray core `√ρ (i sinφ + cosφ tanh[√(cρ) cosφ (x - x0 - 2√(cρ) sinφ t)]) e^{-2icρt}`.
/// A lone gray soliton carries a phase jump, so the sampled field is not periodic.
pub fn gray_soliton_single(p: &SolitonParams, grid: &Grid, t: f64) -> Result<ClassicalField> {
    gray(p, GrayLayout::Single, grid, t)
}

fn gray(p: &SolitonParams, layout: GrayLayout, grid: &Grid, t: f64) -> Result<ClassicalField> {
    p.validate()?;
    if !matches!(p.kind, SolitonKind::Gray { .. }) {
        return Err(Error::InvalidParameter("gray_soliton needs SolitonKind::Gray".into()));
    }
    sample(p, Some(layout), grid, t)
}

/// `Δ Σ_j |f_j|²`.
pub fn classical_norm(f: &ClassicalField) -> f64 {
    f.grid.spacing() * f.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `E[f] = ∫ dx [ |∂_x f|² + c |f|⁴ ]` with a spectral derivative.
pub fn classical_energy(f: &ClassicalField, coupling: f64) -> f64 {
    let mut spectral = Spectral::new(f.grid.sites(), f.grid.length());
    energy_with(&mut spectral, f, coupling)
}

pub(crate) fn energy_with(spectral: &mut Spectral, f: &ClassicalField, coupling: f64) -> f64 {
    let kinetic = spectral.gradient_sq_sum(&f.values);
    let quartic: f64 = f.values.iter().map(|z| z.norm_sqr().powi(2)).sum();
    f.grid.spacing() * (kinetic + coupling * quartic)
}

/// Pointwise `i ∂_t f + ∂_x² f - 2c|f|² f` for a field and its time derivative.
pub fn pde_residual(f: &ClassicalField, df_dt: &[Complex64], coupling: f64) -> Vec<Complex64> {
    let mut spectral = Spectral::new(f.grid.sites(), f.grid.length());
    let lap = spectral.second_derivative(&f.values);
    f.values
        .iter()
        .zip(df_dt)
        .zip(lap)
        .map(|((z, dz), l)| Complex64::i() * dz + l - 2.0 * coupling * z.norm_sqr() * z)
        .collect()
}

/// Spectral `∂_x f`.
pub fn spectral_derivative(f: &ClassicalField) -> Vec<Complex64> {
    Spectral::new(f.grid.sites(), f.grid.length()).derivative(&f.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_rejects_degenerate_sizes() {
        assert!(Grid::new(1, 1.0).is_err());
        assert!(Grid::new(4, 0.0).is_err());
        assert!(Grid::with_spacing(4, f64::NAN).is_err());
        let g = Grid::new(8, 4.0).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.x(3) - g.x(2), 0.5);
    }

    #[test]
    fn bright_peak_and_tails() {
        let grid = Grid::new(400, 40.0).unwrap();
        let p = SolitonParams::bright(1.0, -1.0).centered_at(20.0);
        let f = bright_soliton(&p, &grid, 0.0).unwrap();
        let z = f.values()[200];
        assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        assert!(f.values()[0].norm() < 1e-6);
        assert!(f.values()[399].norm() < 1e-6);
    }

    #[test]
    fn stationary_bright_modulus_is_time_independent() {
        let grid = Grid::new(128, 32.0).unwrap();
        let p = SolitonParams::bright(1.0, -1.0).centered_at(16.0);
        let f0 = bright_soliton(&p, &grid, 0.0).unwrap();
        let f1 = bright_soliton(&p, &grid, 2.7).unwrap();
        for (a, b) in f0.values().iter().zip(f1.values()) {
            assert_abs_diff_eq!(a.norm(), b.norm(), epsilon = 1e-14);
        }
    }

    #[test]
    fn bright_rejects_wrong_sign_coupling() {
        let grid = Grid::new(16, 16.0).unwrap();
        assert!(bright_soliton(&SolitonParams::bright(1.0, 0.0), &grid, 0.0).is_err());
        assert!(bright_soliton(&SolitonParams::bright(1.0, 1.0), &grid, 0.0).is_err());
        assert!(bright_soliton(&SolitonParams::bright(f64::INFINITY, -1.0), &grid, 0.0).is_err());
        assert!(bright_soliton(&SolitonParams::gray(1.0, 0.0, 1.0), &grid, 0.0).is_err());
    }

    #[test]
    fn gray_rejects_bad_parameters() {
        let grid = Grid::new(16, 16.0).unwrap();
        assert!(gray_soliton(&SolitonParams::gray(1.0, 0.0, -1.0), &grid, 0.0).is_err());
        assert!(gray_soliton(&SolitonParams::gray(0.0, 0.0, 1.0), &grid, 0.0).is_err());
        assert!(gray_soliton(&SolitonParams::gray(1.0, 2.0, 1.0), &grid, 0.0).is_err());
    }

    #[test]
    fn dark_soliton_core_and_background() {
        let grid = Grid::new(512, 64.0).unwrap();
        let p = SolitonParams::gray(1.0, 0.0, 1.0).centered_at(16.0);
        let f = gray_soliton(&p, &grid, 0.0).unwrap();
        // x = 16 is site 128
        assert!(f.values()[128].norm() < 1e-14);
        // between the two cores, far from both
        assert_abs_diff_eq!(f.values()[256].norm_sqr(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.values()[0].norm_sqr(), 1.0, epsilon = 1e-10);
        assert!(boundary_mismatch(&p, &grid, 0.0) < 1e-8);
    }

    #[test]
    fn gray_minimum_density() {
        // oracle: grid scan of a fine grid around the core
        let grid = Grid::new(8192, 64.0).unwrap();
        let angle = PI / 4.0;
        let p = SolitonParams::gray(1.0, angle, 1.0).centered_at(16.0);
        let f = gray_soliton(&p, &grid, 0.0).unwrap();
        let min = f.values().iter().map(|z| z.norm_sqr()).fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_gray_is_flagged_non_periodic() {
        let grid = Grid::new(256, 64.0).unwrap();
        let p = SolitonParams::gray(1.0, 0.3, 1.0).centered_at(32.0);
        let single = gray_soliton_single(&p, &grid, 0.0).unwrap();
        assert!(single.values()[128].norm() < 0.5);
        assert!(mismatch_at(&p, Some(GrayLayout::Single), &grid, 0.0) > 1.0);
        assert!(boundary_mismatch(&p, &grid, 0.0) < 1e-8);
    }

    #[test]
    fn norm_scaling() {
        let grid = Grid::new(64, 10.0).unwrap();
        assert_eq!(classical_norm(&ClassicalField::zeros(grid)), 0.0);
        let f = ClassicalField::from_fn(grid, 0.0, |x| c((x * 0.3).sin(), x.cos() * 0.2)).unwrap();
        let n = classical_norm(&f);
        assert_abs_diff_eq!(classical_norm(&f.scaled(2.0)), 4.0 * n, epsilon = 1e-12 * n);
    }

    #[test]
    fn bright_norm_matches_closed_form() {
        // ∫ (η²/|c|) sech²(ηx) dx = 2η/|c|
        let grid = Grid::new(256, 40.0).unwrap();
        let p = SolitonParams::bright(1.3, -0.7).centered_at(20.0);
        let f = bright_soliton(&p, &grid, 0.0).unwrap();
        assert_abs_diff_eq!(classical_norm(&f), 2.0 * 1.3 / 0.7, epsilon = 1e-8);
    }

    #[test]
    fn plane_wave_energy() {
        // oracle: L (A² k² + c A⁴), and direct summation of the integrand
        let grid = Grid::new(32, 8.0).unwrap();
        let (amp, mode, coupling) = (0.7, 3, -0.4);
        let k = 2.0 * PI * mode as f64 / 8.0;
        let f = ClassicalField::plane_wave(grid, amp, mode).unwrap();
        let expected = 8.0 * (amp * amp * k * k + coupling * amp.powi(4));
        assert_abs_diff_eq!(classical_energy(&f, coupling), expected, epsilon = 1e-12);
        let df = spectral_derivative(&f);
        let direct: f64 = grid.spacing()
            * f.values()
                .iter()
                .zip(&df)
                .map(|(z, d)| d.norm_sqr() + coupling * z.norm_sqr().powi(2))
                .sum::<f64>();
        assert_abs_diff_eq!(direct, expected, epsilon = 1e-12);
        assert_eq!(classical_energy(&ClassicalField::zeros(grid), coupling), 0.0);
    }

    #[test]
    fn lattice_amplitude_roundtrip() {
        let grid = Grid::new(6, 3.0).unwrap();
        let f = ClassicalField::from_fn(grid, 0.5, |x| c(x, -x)).unwrap();
        let alphas = f.lattice_amplitudes();
        assert_abs_diff_eq!(alphas[2].re, 1.0 * 0.5f64.sqrt(), epsilon = 1e-15);
        let back = ClassicalField::from_lattice_amplitudes(grid, &alphas, 0.5).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let grid = Grid::new(4, 1.0).unwrap();
        assert!(ClassicalField::new(grid, vec![c(0.0, 0.0); 3], 0.0).is_err());
        assert!(ClassicalField::new(grid, vec![c(f64::NAN, 0.0); 4], 0.0).is_err());
    }

    #[test]
    fn csv_snapshot_layout() {
        let grid = Grid::new(4, 2.0).unwrap();
        let f = ClassicalField::plane_wave(grid, 1.0, 1).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf, -1.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# M=4 spacing=5.0000000000000000e-1"));
        assert_eq!(lines[1], "x,re_f,im_f,abs2");
        assert_eq!(lines.len(), 6);
    }
}
