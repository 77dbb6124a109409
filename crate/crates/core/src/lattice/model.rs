use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::basis::Basis;
use crate::error::{ensure, Result};
use crate::grid::Grid;

/// Factor in front of `c|f|²f` in the equations of motion. The Hamiltonian's quartic
/// term `(c/Δ) b†b†bb` produces exactly this factor under `i ∂_t b = [b, H]`, and the
/// classical evolvers use the same constant.
pub const NONLINEAR_FACTOR: f64 = 2.0;

pub const DEFAULT_BASIS_BUDGET: u64 = 10_000_000;

/// Construction parameters for [`LatticeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeParams {
    pub sites: usize,
    pub spacing: f64,
    pub coupling: f64,
    pub n_max: usize,
    /// Optional cap on the total particle number, applied on top of the per-site cutoff.
    pub max_total: Option<usize>,
    /// Disables the kinetic term entirely (`h = 0`), for on-site tests.
    pub hopping: bool,
    pub basis_budget: u64,
}

impl LatticeParams {
    pub fn new(sites: usize, spacing: f64, coupling: f64, n_max: usize) -> Self {
        Self {
            sites,
            spacing,
            coupling,
            n_max,
            max_total: None,
            hopping: true,
            basis_budget: DEFAULT_BASIS_BUDGET,
        }
    }

    pub fn build(self) -> Result<LatticeModel> {
        LatticeModel::new(self)
    }
}

/// Periodic lattice regularization: `ψ̂(x_j) = b_j / √Δ`, hopping `1/Δ²` on the
/// three-point stencil, on-site interaction `c/Δ`.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    params: LatticeParams,
    hopping: HoppingMatrix,
    basis: Arc<Basis>,
}

impl LatticeModel {
    pub fn new(params: LatticeParams) -> Result<Self> {
        let p = &params;
        ensure(p.sites >= 1, || "lattice needs at least one site".into())?;
        ensure(p.spacing.is_finite() && p.spacing > 0.0, || {
            format!("lattice spacing must be positive and finite, got {}", p.spacing)
        })?;
        ensure(p.coupling.is_finite(), || format!("coupling must be finite, got {}", p.coupling))?;
        ensure(p.n_max >= 1, || format!("n_max must be at least 1, got {}", p.n_max))?;
        let basis = Basis::new(p.sites, p.n_max, p.max_total, p.basis_budget)?;
        let hopping = HoppingMatrix::periodic(p.sites, p.spacing, p.hopping);
        Ok(Self {
            params,
            hopping,
            basis: Arc::new(basis),
        })
    }

    pub fn periodic(sites: usize, spacing: f64, coupling: f64, n_max: usize) -> Result<Self> {
        LatticeParams::new(sites, spacing, coupling, n_max).build()
    }

    /// Same lattice and basis with a different coupling.
    pub fn with_coupling(&self, coupling: f64) -> Self {
        let mut out = self.clone();
        out.params.coupling = coupling;
        out
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn sites(&self) -> usize {
        self.params.sites
    }

    pub fn spacing(&self) -> f64 {
        self.params.spacing
    }

    pub fn coupling(&self) -> f64 {
        self.params.coupling
    }

    pub fn n_max(&self) -> usize {
        self.params.n_max
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn hopping(&self) -> &HoppingMatrix {
        &self.hopping
    }

    /// On-site coefficient of `b†b†bb` in the Hamiltonian.
    pub fn interaction(&self) -> f64 {
        self.params.coupling / self.params.spacing
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::with_spacing(self.params.sites, self.params.spacing)
    }
}

/// Single-particle matrix `h` of `H_kin = Σ_{jk} h_{jk} b†_j b_k`, shared by the
/// Hamiltonian builder and the classical lattice flow.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingMatrix {
    sites: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl HoppingMatrix {
    /// Accumulates `(1/Δ²)[2 b†_j b_j - b†_j b_{j+1} - b†_{j+1} b_j]` over every bond,
    /// so small rings (M = 1, 2) pick up repeated neighbours.
    pub fn periodic(sites: usize, spacing: f64, enabled: bool) -> Self {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        if enabled {
            let t = 1.0 / (spacing * spacing);
            for j in 0..sites {
                let k = (j + 1) % sites;
                *acc.entry((j, j)).or_default() += 2.0 * t;
                *acc.entry((j, k)).or_default() -= t;
                *acc.entry((k, j)).or_default() -= t;
            }
        }
        let entries = acc
            .into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|((j, k), v)| (j, k, v))
            .collect();
        Self { sites, entries }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn diagonal(&self, j: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(a, b, _)| a == j && b == j)
            .map_or(0.0, |e| e.2)
    }

    /// `out = h · α`.
    pub fn apply_into(&self, alpha: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for &(j, k, v) in &self.entries {
            out[j] += v * alpha[k];
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.sites, self.sites);
        for &(j, k, v) in &self.entries {
            m[(j, k)] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopping_is_symmetric_three_point_stencil() {
        let h = HoppingMatrix::periodic(5, 0.5, true).to_dense();
        assert_eq!(h, h.transpose());
        assert_eq!(h[(0, 0)], 8.0);
        assert_eq!(h[(0, 1)], -4.0);
        assert_eq!(h[(0, 4)], -4.0);
        assert_eq!(h[(0, 2)], 0.0);
        // rows sum to zero: the uniform field has zero kinetic energy
        for j in 0..5 {
            assert_eq!(h.row(j).sum(), 0.0);
        }
    }

    #[test]
    fn small_rings_accumulate_bonds() {
        assert!(HoppingMatrix::periodic(1, 1.0, true).entries().is_empty());
        let h2 = HoppingMatrix::periodic(2, 1.0, true).to_dense();
        assert_eq!(h2[(0, 1)], -2.0);
        assert_eq!(h2[(0, 0)], 2.0);
        assert!(HoppingMatrix::periodic(4, 1.0, false).entries().is_empty());
    }

    #[test]
    fn model_validation() {
        assert!(LatticeModel::periodic(0, 1.0, 0.0, 2).is_err());
        assert!(LatticeModel::periodic(3, -1.0, 0.0, 2).is_err());
        assert!(LatticeModel::periodic(3, 1.0, f64::NAN, 2).is_err());
        assert!(LatticeModel::periodic(3, 1.0, 0.0, 0).is_err());
        let m = LatticeModel::periodic(3, 0.5, -0.2, 2).unwrap();
        assert_eq!(m.dim(), 27);
        assert_eq!(m.interaction(), -0.4);
    }

    #[test]
    fn oversized_basis_rejected() {
        // 5^11 ≈ 4.9e7 > 1e7
        assert!(LatticeModel::periodic(11, 1.0, 0.0, 4).is_err());
    }
}
