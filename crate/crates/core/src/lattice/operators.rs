//! Second-quantized operators on the truncated basis.

use num_complex::Complex64;

use super::model::LatticeModel;
use super::sparse::{SparseOperator, Symmetry};
use crate::error::{Error, Result};

fn check_site(model: &LatticeModel, site: usize) -> Result<()> {
    if site >= model.sites() {
        return Err(Error::SiteOutOfRange {
            site,
            sites: model.sites(),
        });
    }
    Ok(())
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Truncated `b_j` and `b†_j`. `[b_j, b†_j] = 1` holds except on states with `n_j = n_max`.
pub fn ladder(model: &LatticeModel, site: usize) -> Result<(SparseOperator, SparseOperator)> {
    check_site(model, site)?;
    let basis = model.basis();
    let mut lower = Vec::new();
    for i in 0..basis.dim() {
        if let Some(k) = basis.lowered(i, site) {
            lower.push((k, i, real((basis.occupation_at(i, site) as f64).sqrt())));
        }
    }
    let raise = lower.iter().map(|&(r, c, v)| (c, r, v)).collect();
    Ok((
        SparseOperator::from_triplets(basis.dim(), lower, Symmetry::General)?,
        SparseOperator::from_triplets(basis.dim(), raise, Symmetry::General)?,
    ))
}

pub fn number(model: &LatticeModel, site: usize) -> Result<SparseOperator> {
    check_site(model, site)?;
    let basis = model.basis();
    Ok(SparseOperator::diagonal(
        (0..basis.dim())
            .map(|i| real(basis.occupation_at(i, site) as f64))
            .collect(),
    ))
}

/// `N̂ = Σ_j b†_j b_j`.
pub fn total_number(model: &LatticeModel) -> SparseOperator {
    let basis = model.basis();
    let mut occ = vec![0; basis.sites()];
    SparseOperator::diagonal(
        (0..basis.dim())
            .map(|i| {
                basis.decode_into(i, &mut occ);
                real(occ.iter().sum::<usize>() as f64)
            })
            .collect(),
    )
}

/// `H = Σ_{jk} h_{jk} b†_j b_k + (c/Δ) Σ_j b†_j b†_j b_j b_j`, normal ordered so `H|0⟩ = 0`.
pub fn hamiltonian(model: &LatticeModel) -> Result<SparseOperator> {
    let basis = model.basis();
    let hop = model.hopping();
    let u = model.interaction();
    let n_max = basis.n_max();
    let mut occ = vec![0usize; basis.sites()];
    let mut triplets = Vec::with_capacity(basis.dim() * (1 + hop.entries().len()));
    for i in 0..basis.dim() {
        basis.decode_into(i, &mut occ);
        let mut diag = 0.0;
        for (j, &n) in occ.iter().enumerate() {
            diag += hop.diagonal(j) * n as f64 + u * (n * n.saturating_sub(1)) as f64;
        }
        triplets.push((i, i, real(diag)));
        for &(j, k, h) in hop.entries() {
            if j == k || occ[k] == 0 || occ[j] == n_max {
                continue;
            }
            let code = basis.packed(i) + basis.stride(j) - basis.stride(k);
            if let Some(target) = basis.index_of_packed(code) {
                // integer product first so mirrored entries round identically
                let amp = (((occ[j] + 1) * occ[k]) as f64).sqrt();
                triplets.push((target, i, real(h * amp)));
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, Symmetry::Hermitian)
}

/// Anti-Hermitian displacement generator `Â = Σ_j (α_j b†_j - α_j* b_j)`.
pub fn displacement_generator(model: &LatticeModel, alphas: &[Complex64]) -> Result<SparseOperator> {
    if alphas.len() != model.sites() {
        return Err(Error::DimensionMismatch {
            expected: model.sites(),
            got: alphas.len(),
        });
    }
    let basis = model.basis();
    let mut triplets = Vec::new();
    for i in 0..basis.dim() {
        for (j, &a) in alphas.iter().enumerate() {
            if let Some(up) = basis.raised(i, j) {
                let amp = ((basis.occupation_at(i, j) + 1) as f64).sqrt();
                triplets.push((up, i, a * amp));
                triplets.push((i, up, -a.conj() * amp));
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, Symmetry::AntiHermitian)
}
