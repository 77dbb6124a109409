//! C ABI over `coherent-soliton`.
//!
//! Objects are opaque heap handles created by `cs_*_new`-style calls and released
//! with the matching `cs_*_free`. Every fallible call returns a [`CsStatus`]; on
//! failure the message is kept per thread and read with [`cs_last_error_message`].
//! Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coherent_soliton::correspondence::{overlap_series, short_time_slope, ClassicalMode, CorrespondenceConfig};
use coherent_soliton::grid::{bright_soliton, gray_soliton, ClassicalField, Grid, SolitonParams};
use coherent_soliton::lattice::{
    coherent_state, eigen_residual, field_expectation, hamiltonian, FockState, LatticeModel, LatticeParams,
    TruncationPolicy,
};
use coherent_soliton::propagate::{evolve, Engine, PropagatorConfig};
use coherent_soliton::{Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DimensionBudget = 3,
    DimensionMismatch = 4,
    Truncation = 5,
    NonFinite = 6,
    Convergence = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsEngine {
    Auto = 0,
    DenseEig = 1,
    Krylov = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsClassicalMode {
    LatticeOde = 0,
    SplitStep = 1,
}

/// Knobs shared by the quantum-classical comparisons.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsOptions {
    /// Classical step size.
    pub dt: f64,
    pub engine: CsEngine,
    pub krylov_dim: usize,
    pub tolerance: f64,
    pub dense_threshold: usize,
    pub max_tail: f64,
    /// Nonzero aborts on truncation overflow; zero only logs.
    pub strict_truncation: u8,
    pub classical_mode: CsClassicalMode,
}

/// Short-time fit `r(Δt) ≈ 1 + s₁Δt + s₂Δt²`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsSlope {
    pub s1_re: f64,
    pub s1_im: f64,
    pub s2_re: f64,
    pub s2_im: f64,
    pub s1_err: f64,
    pub s2_err: f64,
    /// Imaginary part of `-i (c/Δ) Σ|α|⁴`; the real part is zero.
    pub predicted_im: f64,
    pub relative_error: f64,
    /// Nonzero when the smallest-half refit agrees with `s₁` within its error bar.
    pub consistent: u8,
}

pub struct CsModel(LatticeModel);
pub struct CsField(ClassicalField);
pub struct CsState(FockState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CsStatus {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::SiteOutOfRange { .. } | Error::NotHermitian { .. } => {
            CsStatus::InvalidParameter
        }
        Error::DimensionBudget { .. } => CsStatus::DimensionBudget,
        Error::DimensionMismatch { .. } => CsStatus::DimensionMismatch,
        Error::Truncation { .. } => CsStatus::Truncation,
        Error::NonFinite { .. } | Error::Drift { .. } => CsStatus::NonFinite,
        Error::KrylovBreakdown { .. } | Error::FitResidual { .. } => CsStatus::Convergence,
        Error::Io(_) => CsStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Status(CsStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(CsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status plus message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cs_options_default() -> CsOptions {
    let p = PropagatorConfig::default();
    let t = TruncationPolicy::default();
    CsOptions {
        dt: CorrespondenceConfig::default().evolve.dt,
        engine: CsEngine::Auto,
        krylov_dim: p.krylov_dim,
        tolerance: p.tolerance,
        dense_threshold: p.dense_threshold,
        max_tail: t.max_tail,
        strict_truncation: u8::from(t.strict),
        classical_mode: CsClassicalMode::LatticeOde,
    }
}

fn propagator_config(o: &CsOptions) -> PropagatorConfig {
    PropagatorConfig {
        engine: match o.engine {
            CsEngine::Auto => Engine::Auto,
            CsEngine::DenseEig => Engine::DenseEig,
            CsEngine::Krylov => Engine::Krylov,
        },
        krylov_dim: o.krylov_dim,
        tolerance: o.tolerance,
        dense_threshold: o.dense_threshold,
    }
}

fn correspondence_config(o: &CsOptions) -> CorrespondenceConfig {
    let mut cfg = CorrespondenceConfig {
        propagator: propagator_config(o),
        truncation: TruncationPolicy {
            max_tail: o.max_tail,
            strict: o.strict_truncation != 0,
        },
        mode: match o.classical_mode {
            CsClassicalMode::LatticeOde => ClassicalMode::LatticeOde,
            CsClassicalMode::SplitStep => ClassicalMode::SplitStep,
        },
        ..Default::default()
    };
    cfg.evolve.dt = o.dt;
    cfg
}

/// Periodic lattice of `sites` sites, spacing `spacing`, coupling `c`, per-site
/// cutoff `n_max`. Fails with `DimensionBudget` before allocating a large basis.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn cs_model_new(
    sites: usize,
    spacing: f64,
    coupling: f64,
    n_max: usize,
    out: *mut *mut CsModel,
) -> CsStatus {
    guard(|| {
        let model = LatticeParams::new(sites, spacing, coupling, n_max).build()?;
        put(out, CsModel(model))
    })
}

/// # Safety
/// `model` is NULL or a handle from [`cs_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_model_free(model: *mut CsModel) {
    free(model)
}

/// Hilbert-space dimension, 0 for NULL.
///
/// # Safety
/// `model` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_model_dim(model: *const CsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Field from `sites` samples `re[j] + i im[j]` on a grid of the given spacing.
///
/// # Safety
/// `re` and `im` point to `sites` readable doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_field_from_values(
    sites: usize,
    spacing: f64,
    re: *const f64,
    im: *const f64,
    out: *mut *mut CsField,
) -> CsStatus {
    guard(|| {
        let (re, im) = (slice(re, sites, "re")?, slice(im, sites, "im")?);
        let grid = Grid::with_spacing(sites, spacing)?;
        let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        put(out, CsField(ClassicalField::new(grid, values, 0.0)?))
    })
}

/// Bright soliton at t = 0 with amplitude `eta`, profile coupling `coupling < 0`,
/// centre `center` and velocity `velocity`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_field_bright(
    sites: usize,
    spacing: f64,
    eta: f64,
    coupling: f64,
    center: f64,
    velocity: f64,
    out: *mut *mut CsField,
) -> CsStatus {
    guard(|| {
        let grid = Grid::with_spacing(sites, spacing)?;
        let p = SolitonParams::bright(eta, coupling).centered_at(center).moving(velocity);
        put(out, CsField(bright_soliton(&p, &grid, 0.0)?))
    })
}

/// Gray soliton pair at t = 0: background `rho`, grayness `angle`, `coupling > 0`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_field_gray(
    sites: usize,
    spacing: f64,
    rho: f64,
    angle: f64,
    coupling: f64,
    center: f64,
    out: *mut *mut CsField,
) -> CsStatus {
    guard(|| {
        let grid = Grid::with_spacing(sites, spacing)?;
        let p = SolitonParams::gray(rho, angle, coupling).centered_at(center);
        put(out, CsField(gray_soliton(&p, &grid, 0.0)?))
    })
}

/// New field equal to `field` times `factor`.
///
/// # Safety
/// `field` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_field_scaled(field: *const CsField, factor: f64, out: *mut *mut CsField) -> CsStatus {
    guard(|| {
        let f = deref(field, "field")?;
        if !factor.is_finite() {
            return Err(Failure::Status(CsStatus::InvalidParameter, format!("factor must be finite, got {factor}")));
        }
        put(out, CsField(f.0.scaled(factor)))
    })
}

/// # Safety
/// `field` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_field_free(field: *mut CsField) {
    free(field)
}

/// Number of samples, 0 for NULL.
///
/// # Safety
/// `field` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_field_len(field: *const CsField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values().len())
}

/// Copies the samples into `re`/`im`, each of capacity `len`.
///
/// # Safety
/// `re` and `im` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_field_values(field: *const CsField, re: *mut f64, im: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let n = f.0.values().len();
        if len < n {
            return Err(Failure::Status(CsStatus::BufferTooSmall, format!("need {n} entries, got {len}")));
        }
        let (re, im) = (slice_mut(re, len, "re")?, slice_mut(im, len, "im")?);
        for (k, z) in f.0.values().iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// Coherent state of `field` on `model`'s truncated basis.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_coherent_state(
    field: *const CsField,
    model: *const CsModel,
    max_tail: f64,
    strict: u8,
    out: *mut *mut CsState,
) -> CsStatus {
    guard(|| {
        let (f, m) = (deref(field, "field")?, deref(model, "model")?);
        let policy = TruncationPolicy {
            max_tail,
            strict: strict != 0,
        };
        put(out, CsState(coherent_state(&f.0, &m.0, &policy)?))
    })
}

/// # Safety
/// `state` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_state_free(state: *mut CsState) {
    free(state)
}

/// 2-norm, NaN for NULL.
///
/// # Safety
/// `state` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_state_norm(state: *const CsState) -> f64 {
    state.as_ref().map_or(f64::NAN, |s| s.0.norm())
}

/// `⟨s|t⟩` into `re`/`im`.
///
/// # Safety
/// Handles are live; `re` and `im` are writable.
#[no_mangle]
pub unsafe extern "C" fn cs_state_inner(a: *const CsState, b: *const CsState, re: *mut f64, im: *mut f64) -> CsStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        if a.0.dim() != b.0.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.0.dim(),
                got: b.0.dim(),
            }
            .into());
        }
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let z = a.0.inner(&b.0);
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// `max_j ‖(b_j - α_j)|s⟩‖`.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_eigen_residual(
    state: *const CsState,
    field: *const CsField,
    model: *const CsModel,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let (s, f, m) = (deref(state, "state")?, deref(field, "field")?, deref(model, "model")?);
        let r = eigen_residual(&s.0, &f.0, &m.0)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r;
        Ok(())
    })
}

/// `⟨s|ψ̂(x_j)|s⟩` for every site into `re`/`im` of capacity `len`.
///
/// # Safety
/// Handles are live; `re` and `im` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_field_expectation(
    state: *const CsState,
    model: *const CsModel,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> CsStatus {
    guard(|| {
        let (s, m) = (deref(state, "state")?, deref(model, "model")?);
        if s.0.dim() != m.0.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.0.dim(),
                got: s.0.dim(),
            }
            .into());
        }
        let values = field_expectation(&s.0, &m.0);
        if len < values.len() {
            return Err(Failure::Status(
                CsStatus::BufferTooSmall,
                format!("need {} entries, got {len}", values.len()),
            ));
        }
        let (re, im) = (slice_mut(re, len, "re")?, slice_mut(im, len, "im")?);
        for (k, z) in values.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// `e^{-iHt}|s⟩` with `model`'s Hamiltonian.
///
/// # Safety
/// Handles are live; `options` is NULL (defaults) or readable; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_evolve(
    state: *const CsState,
    model: *const CsModel,
    t: f64,
    options: *const CsOptions,
    out: *mut *mut CsState,
) -> CsStatus {
    guard(|| {
        let (s, m) = (deref(state, "state")?, deref(model, "model")?);
        let o = options.as_ref().copied().unwrap_or_else(|| cs_options_default());
        let h = hamiltonian(&m.0)?;
        put(out, CsState(evolve(&s.0, &h, t, &propagator_config(&o))?))
    })
}

/// `r(t_k)` for the `n` ascending times, written to `r_re`/`r_im` of length `n`.
///
/// # Safety
/// Handles are live; `times`, `r_re` and `r_im` point to `n` doubles; `options` is
/// NULL or readable.
#[no_mangle]
pub unsafe extern "C" fn cs_overlap_series(
    field: *const CsField,
    model: *const CsModel,
    times: *const f64,
    n: usize,
    options: *const CsOptions,
    r_re: *mut f64,
    r_im: *mut f64,
) -> CsStatus {
    guard(|| {
        let (f, m) = (deref(field, "field")?, deref(model, "model")?);
        let times = slice(times, n, "times")?;
        let (re, im) = (slice_mut(r_re, n, "r_re")?, slice_mut(r_im, n, "r_im")?);
        let o = options.as_ref().copied().unwrap_or_else(|| cs_options_default());
        let series = overlap_series(&f.0, &m.0, &correspondence_config(&o), times)?;
        for (k, z) in series.r.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// Fits the short-time expansion of `r` over `n ≥ 3` step sizes.
///
/// # Safety
/// Handles are live; `dts` points to `n` doubles; `options` is NULL or readable;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cs_short_time_slope(
    field: *const CsField,
    model: *const CsModel,
    dts: *const f64,
    n: usize,
    options: *const CsOptions,
    out: *mut CsSlope,
) -> CsStatus {
    guard(|| {
        let (f, m) = (deref(field, "field")?, deref(model, "model")?);
        let dts = slice(dts, n, "dts")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = options.as_ref().copied().unwrap_or_else(|| cs_options_default());
        let r = short_time_slope(&f.0, &m.0, dts, &correspondence_config(&o))?;
        *out = CsSlope {
            s1_re: r.fit.s1.re,
            s1_im: r.fit.s1.im,
            s2_re: r.fit.s2.re,
            s2_im: r.fit.s2.im,
            s1_err: r.fit.s1_err,
            s2_err: r.fit.s2_err,
            predicted_im: r.predicted.im,
            relative_error: r.relative_error,
            consistent: u8::from(r.consistent),
        };
        Ok(())
    })
}
