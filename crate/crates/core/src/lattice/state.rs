//! Fock-space states, coherent-state construction and field observables.

use std::io::Write;
use std::sync::Arc;

use log::warn;
use num_complex::Complex64;

use super::basis::Basis;
use super::model::LatticeModel;
use crate::error::{Error, Result};
use crate::grid::ClassicalField;

/// How much Poisson weight above the Fock cutoff a coherent state may lose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Maximum total discarded probability.
    pub max_tail: f64,
    /// Error out when exceeded; otherwise log a warning and continue.
    pub strict: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_tail: 1e-8,
            strict: true,
        }
    }
}

impl TruncationPolicy {
    pub fn lenient(max_tail: f64) -> Self {
        Self { max_tail, strict: false }
    }

    pub(crate) fn check(&self, tail: f64, time: Option<f64>) -> Result<()> {
        if tail <= self.max_tail {
            return Ok(());
        }
        let err = Error::Truncation {
            tail,
            threshold: self.max_tail,
            time,
        };
        if self.strict {
            return Err(err);
        }
        warn!("{err}");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    basis: Arc<Basis>,
    amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn vacuum(model: &LatticeModel) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); model.dim()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            basis: model.basis().clone(),
            amplitudes,
        }
    }

    pub fn basis_state(model: &LatticeModel, occupation: &[usize]) -> Result<Self> {
        let index = model.basis().index_of(occupation).ok_or_else(|| {
            Error::InvalidParameter(format!("occupation {occupation:?} is not in the truncated basis"))
        })?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); model.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            basis: model.basis().clone(),
            amplitudes,
        })
    }

    /// Wraps amplitudes after rescaling them to unit norm.
    pub fn normalized(model: &LatticeModel, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = l2_norm(&amplitudes);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter(format!("cannot normalize a state of norm {norm}")));
        }
        amplitudes.iter_mut().for_each(|z| *z /= norm);
        Ok(Self {
            basis: model.basis().clone(),
            amplitudes,
        })
    }

    /// Wraps amplitudes as they are; the caller vouches for the normalization.
    pub fn from_raw(basis: Arc<Basis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockState) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// CSV rows `index,occupation,re,im`; occupations are space-separated, site 0 first.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,occupation,re,im")?;
        for (i, z) in self.amplitudes.iter().enumerate() {
            let occ: Vec<String> = self.basis.occupations(i).iter().map(|n| n.to_string()).collect();
            writeln!(w, "{},{},{:.16e},{:.16e}", i, occ.join(" "), z.re, z.im)?;
        }
        Ok(())
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `P(n > n_max)` for a Poisson distribution of mean `lambda`.
pub fn poisson_tail(lambda: f64, n_max: usize) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda > n_max as f64 {
        let mut term = (-lambda).exp();
        let mut head = term;
        for n in 1..=n_max {
            term *= lambda / n as f64;
            head += term;
        }
        return (1.0 - head).max(0.0);
    }
    // sum the tail directly to avoid cancellation
    let mut log_term = -lambda;
    for n in 1..=n_max + 1 {
        log_term += lambda.ln() - (n as f64).ln();
    }
    let mut term = log_term.exp();
    let mut sum = 0.0;
    let mut n = n_max + 1;
    while term > 1e-18 * sum || sum == 0.0 {
        sum += term;
        n += 1;
        term *= lambda / n as f64;
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// Per-site unnormalized coherent amplitudes `e^{-|α|²/2} α^n / √(n!)`, `n = 0..=n_max`.
fn site_amplitudes(alpha: Complex64, n_max: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    out.push(c);
    for n in 1..=n_max {
        c *= alpha / (n as f64).sqrt();
        out.push(c);
    }
    out
}

fn product_amplitudes(basis: &Basis, alphas: &[Complex64]) -> Vec<Complex64> {
    let per_site: Vec<Vec<Complex64>> = alphas.iter().map(|&a| site_amplitudes(a, basis.n_max())).collect();
    let mut occ = vec![0; basis.sites()];
    (0..basis.dim())
        .map(|i| {
            basis.decode_into(i, &mut occ);
            occ.iter()
                .zip(&per_site)
                .map(|(&n, amps)| amps[n])
                .product::<Complex64>()
        })
        .collect()
}

/// Probability the untruncated coherent state `|α⟩` places outside the basis.
pub fn discarded_probability(model: &LatticeModel, alphas: &[Complex64]) -> f64 {
    let basis = model.basis();
    if basis.max_total().is_some() {
        let kept: f64 = product_amplitudes(basis, alphas).iter().map(|z| z.norm_sqr()).sum();
        return (1.0 - kept).max(0.0);
    }
    let log_kept: f64 = alphas
        .iter()
        .map(|a| (-poisson_tail(a.norm_sqr(), basis.n_max())).ln_1p())
        .sum();
    -log_kept.exp_m1()
}

/// Coherent state `e^{Â}|0⟩` built site by site from `α_j = f(x_j) √Δ`, then
/// renormalized over the truncated basis.
pub fn coherent_state(f: &ClassicalField, model: &LatticeModel, policy: &TruncationPolicy) -> Result<FockState> {
    check_grid(f, model)?;
    coherent_state_from_amplitudes(&f.lattice_amplitudes(), model, policy)
}

pub fn coherent_state_from_amplitudes(
    alphas: &[Complex64],
    model: &LatticeModel,
    policy: &TruncationPolicy,
) -> Result<FockState> {
    if alphas.len() != model.sites() {
        return Err(Error::DimensionMismatch {
            expected: model.sites(),
            got: alphas.len(),
        });
    }
    if alphas.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
        return Err(Error::InvalidParameter("coherent amplitudes must be finite".into()));
    }
    policy.check(discarded_probability(model, alphas), None)?;
    FockState::normalized(model, product_amplitudes(model.basis(), alphas))
}

pub(crate) fn check_grid(f: &ClassicalField, model: &LatticeModel) -> Result<()> {
    let grid = f.grid();
    if grid.sites() != model.sites() {
        return Err(Error::DimensionMismatch {
            expected: model.sites(),
            got: grid.sites(),
        });
    }
    let rel = (grid.spacing() - model.spacing()).abs() / model.spacing();
    if rel > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "field spacing {} does not match lattice spacing {}",
            grid.spacing(),
            model.spacing()
        )));
    }
    Ok(())
}

/// `⟨s|b_j|s⟩` for every site.
pub fn annihilation_expectations(s: &FockState) -> Vec<Complex64> {
    let basis = s.basis();
    let amps = s.amplitudes();
    (0..basis.sites())
        .map(|j| {
            (0..basis.dim())
                .filter_map(|i| {
                    let k = basis.lowered(i, j)?;
                    let n = basis.occupation_at(i, j) as f64;
                    Some(amps[k].conj() * n.sqrt() * amps[i])
                })
                .sum()
        })
        .collect()
}

/// `⟨s|ψ̂(x_j)|s⟩ = ⟨s|b_j|s⟩ / √Δ`.
pub fn field_expectation(s: &FockState, model: &LatticeModel) -> Vec<Complex64> {
    let scale = 1.0 / model.spacing().sqrt();
    annihilation_expectations(s).into_iter().map(|z| z * scale).collect()
}

/// `max_j ‖(b_j - α_j)|s⟩‖₂` with `α_j = f(x_j) √Δ`.
pub fn eigen_residual(s: &FockState, f: &ClassicalField, model: &LatticeModel) -> Result<f64> {
    check_grid(f, model)?;
    Ok(eigen_residual_amplitudes(s, &f.lattice_amplitudes()))
}

pub fn eigen_residual_amplitudes(s: &FockState, alphas: &[Complex64]) -> f64 {
    let basis = s.basis();
    let amps = s.amplitudes();
    let mut w = vec![Complex64::new(0.0, 0.0); amps.len()];
    alphas
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            for (out, z) in w.iter_mut().zip(amps) {
                *out = -alpha * z;
            }
            for (i, &a) in amps.iter().enumerate() {
                if let Some(k) = basis.lowered(i, j) {
                    w[k] += (basis.occupation_at(i, j) as f64).sqrt() * a;
                }
            }
            l2_norm(&w)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::model::LatticeParams;
    use crate::lattice::operators::{ladder, total_number};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn poisson_tail_against_direct_sum() {
        for &(lambda, n_max) in &[(0.01f64, 4usize), (0.3, 4), (1.0, 2), (5.0, 3), (2.0, 10)] {
            // oracle: 1 - Σ_{n ≤ n_max} computed in extended steps
            let mut head = 0.0;
            let mut term = (-lambda).exp();
            for n in 0..=n_max {
                if n > 0 {
                    term *= lambda / n as f64;
                }
                head += term;
            }
            let tail = poisson_tail(lambda, n_max);
            assert!((tail - (1.0 - head)).abs() < 1e-15, "λ={lambda}: {tail} vs {}", 1.0 - head);
        }
        // small-λ regime: λ^5/5! e^{-λ} to leading order
        let tail = poisson_tail(1e-3, 4);
        assert_abs_diff_eq!(tail / (1e-15 / 120.0), 1.0, epsilon = 1e-3);
        assert_eq!(poisson_tail(0.0, 3), 0.0);
    }

    #[test]
    fn zero_field_gives_vacuum() {
        let model = LatticeModel::periodic(3, 1.0, 0.0, 2).unwrap();
        let grid = model.grid().unwrap();
        let s = coherent_state(&ClassicalField::zeros(grid), &model, &TruncationPolicy::default()).unwrap();
        assert_eq!(s, FockState::vacuum(&model));
    }

    #[test]
    fn single_site_poisson_amplitudes() {
        let model = LatticeModel::periodic(1, 1.0, 0.0, 12).unwrap();
        let s = coherent_state_from_amplitudes(&[c(1.0, 0.0)], &model, &TruncationPolicy::lenient(1.0)).unwrap();
        let mut fact = 1.0;
        for n in 0..=12 {
            if n > 0 {
                fact *= n as f64;
            }
            let expected = (-0.5f64).exp() / fact.sqrt();
            assert_abs_diff_eq!(s.amplitudes()[n].re, expected, epsilon = 1e-10);
            assert_eq!(s.amplitudes()[n].im, 0.0);
        }
    }

    #[test]
    fn coherent_state_norm_and_mean_number() {
        let model = LatticeModel::periodic(3, 0.5, 0.0, 6).unwrap();
        let grid = model.grid().unwrap();
        let f = ClassicalField::new(grid, vec![c(0.4, 0.1), c(-0.2, 0.5), c(0.0, -0.3)], 0.0).unwrap();
        let s = coherent_state(&f, &model, &TruncationPolicy::default()).unwrap();
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
        let n = total_number(&model);
        let mean = s.inner(&FockState::from_raw(s.basis().clone(), n.apply(s.amplitudes())).unwrap());
        let expected: f64 = f.lattice_amplitudes().iter().map(|a| a.norm_sqr()).sum();
        assert_abs_diff_eq!(mean.re, expected, epsilon = 1e-8);
        assert_abs_diff_eq!(expected, 0.5 * (0.17 + 0.29 + 0.09), epsilon = 1e-15);
    }

    #[test]
    fn strict_policy_rejects_heavy_tail() {
        let model = LatticeModel::periodic(2, 1.0, 0.0, 2).unwrap();
        let err = coherent_state_from_amplitudes(&[c(1.0, 0.0), c(0.0, 0.0)], &model, &TruncationPolicy::default());
        assert!(matches!(err, Err(Error::Truncation { .. })));
        let ok = coherent_state_from_amplitudes(&[c(1.0, 0.0), c(0.0, 0.0)], &model, &TruncationPolicy::lenient(1e-8));
        assert!(ok.is_ok());
    }

    #[test]
    fn field_expectation_cases() {
        let model = LatticeModel::periodic(3, 0.25, 0.0, 5).unwrap();
        assert!(field_expectation(&FockState::vacuum(&model), &model).iter().all(|z| *z == c(0.0, 0.0)));
        let number = FockState::basis_state(&model, &[2, 1, 3]).unwrap();
        assert!(field_expectation(&number, &model).iter().all(|z| *z == c(0.0, 0.0)));
        let grid = model.grid().unwrap();
        let f = ClassicalField::new(grid, vec![c(0.3, 0.2), c(-0.4, 0.0), c(0.1, -0.6)], 0.0).unwrap();
        let s = coherent_state(&f, &model, &TruncationPolicy::default()).unwrap();
        for (a, b) in field_expectation(&s, &model).iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn expectations_agree_with_ladder_matvec() {
        let model = LatticeModel::periodic(2, 1.0, 0.0, 3).unwrap();
        let amps: Vec<Complex64> = (0..model.dim()).map(|i| c((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let s = FockState::normalized(&model, amps).unwrap();
        let direct = annihilation_expectations(&s);
        for (j, &d) in direct.iter().enumerate() {
            let (b, _) = ladder(&model, j).unwrap();
            let via = inner(s.amplitudes(), &b.apply(s.amplitudes()));
            assert!((via - d).norm() < 1e-14);
        }
    }

    #[test]
    fn eigen_residual_cases() {
        let model = LatticeModel::periodic(2, 1.0, 0.0, 6).unwrap();
        let grid = model.grid().unwrap();
        let zero = ClassicalField::zeros(grid);
        assert_eq!(eigen_residual(&FockState::vacuum(&model), &zero, &model).unwrap(), 0.0);

        // only the |n_max⟩ component survives (b - α), so the residual is |α| |c_nmax| / √kept
        let f = ClassicalField::new(grid, vec![c(0.5, 0.0), c(0.0, -0.5)], 0.0).unwrap();
        let s = coherent_state(&f, &model, &TruncationPolicy::lenient(1e-6)).unwrap();
        let lambda: f64 = 0.25;
        let weights: Vec<f64> = (0..=6)
            .map(|n| (-lambda).exp() * lambda.powi(n) / (1..=n).product::<i32>() as f64)
            .collect();
        let expected = 0.5 * (weights[6] / weights.iter().sum::<f64>()).sqrt();
        let res = eigen_residual(&s, &f, &model).unwrap();
        assert_abs_diff_eq!(res, expected, epsilon = 1e-15);
        assert!(res < 3e-4);
        let small = ClassicalField::new(grid, vec![c(0.2, 0.0), c(0.0, 0.1)], 0.0).unwrap();
        let s = coherent_state(&small, &model, &TruncationPolicy::default()).unwrap();
        assert!(eigen_residual(&s, &small, &model).unwrap() < 1e-4);

        // n_max = 1 cannot hold |α| = 1: ‖(b - 1)(c0|0⟩ + c1|1⟩)‖ with c ∝ (1, 1)
        let tiny = LatticeModel::periodic(2, 1.0, 0.0, 1).unwrap();
        let f1 = ClassicalField::new(grid, vec![c(1.0, 0.0), c(0.0, 0.0)], 0.0).unwrap();
        let s1 = coherent_state(&f1, &tiny, &TruncationPolicy::lenient(1.0)).unwrap();
        let res = eigen_residual(&s1, &f1, &tiny).unwrap();
        assert_abs_diff_eq!(res, 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn capped_basis_discarded_weight() {
        let mut p = LatticeParams::new(2, 1.0, 0.0, 3);
        p.max_total = Some(1);
        let model = p.build().unwrap();
        let a = [c(0.1, 0.0), c(0.2, 0.0)];
        // kept: vacuum and one particle: e^{-λ}(1 + λ), λ = 0.05
        let lambda: f64 = 0.05;
        let expected = 1.0 - (-lambda).exp() * (1.0 + lambda);
        assert_abs_diff_eq!(discarded_probability(&model, &a), expected, epsilon = 1e-15);
    }
}
