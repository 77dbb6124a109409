//! Unitary evolution `e^{-iHt}` on the truncated Fock space.
//!
//! Two engines: a dense eigendecomposition (exact to rounding, cached per
//! Hamiltonian, split into the connected blocks of `H`'s sparsity graph) and a
//! Lanczos Krylov propagator with full reorthogonalization and adaptive substeps.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::state::{inner, l2_norm};
use crate::lattice::{displacement_generator, FockState, LatticeModel, SparseOperator, Symmetry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    DenseEig,
    Krylov,
    /// Dense below `dense_threshold`, Krylov above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub engine: Engine,
    pub krylov_dim: usize,
    /// Bound on the Krylov residual estimate per unit time (2-norm).
    pub tolerance: f64,
    pub dense_threshold: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            engine: Engine::Auto,
            krylov_dim: 30,
            tolerance: 1e-10,
            dense_threshold: 4096,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.krylov_dim < 2 {
            return Err(Error::InvalidParameter(format!("krylov_dim must be ≥ 2, got {}", self.krylov_dim)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        Ok(())
    }

    /// Engine used for a Hamiltonian of dimension `dim`.
    pub fn resolve(&self, dim: usize) -> Engine {
        match self.engine {
            Engine::Auto if dim <= self.dense_threshold => Engine::DenseEig,
            Engine::Auto => Engine::Krylov,
            e => e,
        }
    }
}

/// `e^{-iHt}` for a fixed Hermitian `H`. Shareable across threads; the dense
/// factorization is computed once, on first use.
pub struct Propagator {
    h: Arc<SparseOperator>,
    cfg: PropagatorConfig,
    dense: OnceLock<DenseSpectrum>,
}

impl Propagator {
    pub fn new(h: Arc<SparseOperator>, cfg: PropagatorConfig) -> Result<Self> {
        cfg.validate()?;
        if h.symmetry() != Symmetry::Hermitian {
            return Err(Error::InvalidParameter(format!(
                "time evolution needs a Hermitian operator, got {:?}",
                h.symmetry()
            )));
        }
        Ok(Self {
            h,
            cfg,
            dense: OnceLock::new(),
        })
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.h
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.cfg
    }

    /// Engine actually used for this Hamiltonian.
    pub fn engine(&self) -> Engine {
        self.cfg.resolve(self.h.dim())
    }

    fn spectrum(&self) -> &DenseSpectrum {
        self.dense.get_or_init(|| DenseSpectrum::new(&self.h))
    }

    pub fn evolve(&self, s: &FockState, t: f64) -> Result<FockState> {
        let out = self.evolve_amplitudes(s.amplitudes(), t)?;
        FockState::from_raw(s.basis().clone(), out)
    }

    pub fn evolve_amplitudes(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        if psi.len() != self.h.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.h.dim(),
                got: psi.len(),
            });
        }
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("evolution time must be finite, got {t}")));
        }
        if t == 0.0 {
            return Ok(psi.to_vec());
        }
        match self.engine() {
            Engine::DenseEig => Ok(self.spectrum().apply(psi, t)),
            _ => krylov_evolve(&self.h, psi, t, &self.cfg),
        }
    }

    /// States at each of the ascending `times`, starting from `s` at t = 0.
    /// Dense: independent evaluations in parallel. Krylov: chained increments.
    pub fn evolve_many(&self, s: &FockState, times: &[f64]) -> Result<Vec<FockState>> {
        if self.engine() == Engine::DenseEig {
            let spectrum = self.spectrum();
            return times
                .par_iter()
                .map(|&t| {
                    let amps = if t == 0.0 { s.amplitudes().to_vec() } else { spectrum.apply(s.amplitudes(), t) };
                    FockState::from_raw(s.basis().clone(), amps)
                })
                .collect();
        }
        let mut out = Vec::with_capacity(times.len());
        let mut current = s.clone();
        let mut now = 0.0;
        for &t in times {
            current = self.evolve(&current, t - now)?;
            now = t;
            out.push(current.clone());
        }
        Ok(out)
    }
}

/// One-shot `e^{-iHt} s`.
pub fn evolve(s: &FockState, h: &SparseOperator, t: f64, cfg: &PropagatorConfig) -> Result<FockState> {
    Propagator::new(Arc::new(h.clone()), *cfg)?.evolve(s, t)
}

/// `e^{Â}|0⟩` by exponentiating the truncated displacement generator, written as
/// `e^{-iKt}` with `K = iÂ` Hermitian and `t = 1`. Unitary on the truncated space,
/// so unlike the closed form it needs no renormalization.
pub fn displace_vacuum(model: &LatticeModel, alphas: &[Complex64], cfg: &PropagatorConfig) -> Result<FockState> {
    let a = displacement_generator(model, alphas)?;
    let k = a.scaled(Complex64::new(0.0, 1.0), Symmetry::Hermitian)?;
    evolve(&FockState::vacuum(model), &k, 1.0, cfg)
}

/// `⟨s|A|s⟩`.
pub fn expectation(s: &FockState, a: &SparseOperator) -> Result<Complex64> {
    if a.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: a.dim(),
        });
    }
    Ok(inner(s.amplitudes(), &a.apply(s.amplitudes())))
}

enum BlockVectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

struct Block {
    indices: Vec<usize>,
    energies: Vec<f64>,
    vectors: BlockVectors,
}

/// Eigendecomposition of `H`, block by block over the connected components of its
/// sparsity graph (for number-conserving Hamiltonians these are the particle sectors).
struct DenseSpectrum {
    blocks: Vec<Block>,
}

impl DenseSpectrum {
    fn new(h: &SparseOperator) -> Self {
        let components = connected_components(h);
        let real = h.is_real();
        let blocks = components
            .into_par_iter()
            .map(|indices| {
                let n = indices.len();
                let position = |g: usize| indices.binary_search(&g).expect("component is closed");
                if real {
                    let mut m = DMatrix::<f64>::zeros(n, n);
                    for (a, &g) in indices.iter().enumerate() {
                        for (c, v) in h.row(g) {
                            m[(a, position(c))] = v.re;
                        }
                    }
                    let eig = SymmetricEigen::new(m);
                    Block {
                        energies: eig.eigenvalues.iter().copied().collect(),
                        vectors: BlockVectors::Real(eig.eigenvectors),
                        indices,
                    }
                } else {
                    let mut m = DMatrix::<Complex64>::zeros(n, n);
                    for (a, &g) in indices.iter().enumerate() {
                        for (c, v) in h.row(g) {
                            m[(a, position(c))] = v;
                        }
                    }
                    let eig = SymmetricEigen::new(m);
                    Block {
                        energies: eig.eigenvalues.iter().copied().collect(),
                        vectors: BlockVectors::Complex(eig.eigenvectors),
                        indices,
                    }
                }
            })
            .collect();
        Self { blocks }
    }

    fn apply(&self, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for block in &self.blocks {
            let x: Vec<Complex64> = block.indices.iter().map(|&g| psi[g]).collect();
            if x.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                continue;
            }
            let n = x.len();
            let phases: Vec<Complex64> = block.energies.iter().map(|e| Complex64::from_polar(1.0, -e * t)).collect();
            let y: Vec<Complex64> = match &block.vectors {
                BlockVectors::Real(v) => {
                    let coeffs: Vec<Complex64> = (0..n)
                        .map(|k| (0..n).map(|a| v[(a, k)] * x[a]).sum::<Complex64>() * phases[k])
                        .collect();
                    (0..n).map(|a| (0..n).map(|k| v[(a, k)] * coeffs[k]).sum()).collect()
                }
                BlockVectors::Complex(v) => {
                    let coeffs: Vec<Complex64> = (0..n)
                        .map(|k| (0..n).map(|a| v[(a, k)].conj() * x[a]).sum::<Complex64>() * phases[k])
                        .collect();
                    (0..n).map(|a| (0..n).map(|k| v[(a, k)] * coeffs[k]).sum()).collect()
                }
            };
            for (&g, z) in block.indices.iter().zip(y) {
                out[g] = z;
            }
        }
        out
    }
}

/// Sorted index sets of the connected components of the (symmetric) nonzero pattern.
fn connected_components(h: &SparseOperator) -> Vec<Vec<usize>> {
    let n = h.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (r, c, _) in h.triplets() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Lanczos propagation. Each substep τ is accepted when the residual estimate
/// `β_m |[e^{-iTτ} e_1]_m|` is at most `tolerance`, which bounds the substep error by
/// `tolerance · τ`.
fn krylov_evolve(h: &SparseOperator, psi: &[Complex64], t: f64, cfg: &PropagatorConfig) -> Result<Vec<Complex64>> {
    let dim = h.dim();
    let m_max = cfg.krylov_dim.min(dim);
    let sign = t.signum();
    let total = t.abs();
    let mut w = psi.to_vec();
    let mut done = 0.0;
    let mut tau = total;
    let zero = Complex64::new(0.0, 0.0);

    while done < total {
        let beta0 = l2_norm(&w);
        if beta0 == 0.0 {
            break;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![w.iter().map(|z| z / beta0).collect()];
        let mut alphas = Vec::with_capacity(m_max);
        let mut betas = Vec::with_capacity(m_max);
        let mut exhausted = false;
        let mut scale: f64 = 0.0;
        let mut u = vec![zero; dim];
        for j in 0..m_max {
            h.apply_into(&basis[j], &mut u);
            let a = inner(&basis[j], &u).re;
            alphas.push(a);
            // classical Gram-Schmidt against the whole basis, twice
            for _ in 0..2 {
                for v in &basis {
                    let proj = inner(v, &u);
                    u.iter_mut().zip(v).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let b = l2_norm(&u);
            scale = scale.max(a.abs()).max(betas.last().copied().unwrap_or(0.0));
            if b <= 1e-12 * scale.max(f64::MIN_POSITIVE) || j + 1 == dim {
                exhausted = true;
                break;
            }
            betas.push(b);
            if j + 1 < m_max {
                basis.push(u.iter().map(|z| z / b).collect());
            }
        }
        let m = alphas.len();
        let residual_beta = if exhausted { 0.0 } else { betas[m - 1] };

        let tri = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alphas[r]
            } else if r + 1 == c {
                betas[r]
            } else if c + 1 == r {
                betas[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let projected = |step: f64| -> Vec<Complex64> {
            let weights: Vec<Complex64> = (0..m)
                .map(|k| eig.eigenvectors[(0, k)] * Complex64::from_polar(1.0, -sign * eig.eigenvalues[k] * step))
                .collect();
            (0..m)
                .map(|r| (0..m).map(|k| eig.eigenvectors[(r, k)] * weights[k]).sum())
                .collect()
        };

        let remaining = total - done;
        tau = if exhausted { remaining } else { tau.min(remaining) };
        let mut coeffs = projected(tau);
        let mut estimate = residual_beta * coeffs[m - 1].norm();
        let mut tries = 0;
        while estimate > cfg.tolerance {
            tries += 1;
            let factor = 0.9 * (cfg.tolerance / estimate).powf(1.0 / m as f64);
            tau *= factor.clamp(0.05, 0.9);
            if tau <= 1e-14 * total.max(1.0) || tries > 200 {
                return Err(Error::KrylovBreakdown {
                    time: sign * done,
                    residual: estimate,
                    tolerance: cfg.tolerance,
                });
            }
            coeffs = projected(tau);
            estimate = residual_beta * coeffs[m - 1].norm();
        }

        w.iter_mut().for_each(|z| *z = zero);
        for (v, c) in basis.iter().zip(&coeffs) {
            let c = c * beta0;
            w.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
        }
        done += tau;
        if total - done <= 1e-15 * total {
            break;
        }
        // grow the next step when this one was comfortably accurate
        if tries == 0 && estimate > 0.0 {
            let growth = 0.9 * (cfg.tolerance / estimate).powf(1.0 / m as f64);
            tau *= growth.clamp(1.0, 2.0);
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{hamiltonian, LatticeModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(model: &LatticeModel, seed: u64) -> FockState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..model.dim())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        FockState::normalized(model, amps).unwrap()
    }

    fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    fn setup() -> (LatticeModel, Arc<SparseOperator>) {
        let model = LatticeModel::periodic(4, 1.0, -0.3, 3).unwrap();
        let h = Arc::new(hamiltonian(&model).unwrap());
        (model, h)
    }

    #[test]
    fn zero_time_is_identity() {
        let (model, h) = setup();
        let s = random_state(&model, 1);
        for engine in [Engine::DenseEig, Engine::Krylov] {
            let cfg = PropagatorConfig { engine, ..Default::default() };
            let p = Propagator::new(h.clone(), cfg).unwrap();
            assert_eq!(p.evolve(&s, 0.0).unwrap(), s);
        }
    }

    #[test]
    fn eigenvector_picks_up_phase() {
        let (model, h) = setup();
        // oracle: dense eigendecomposition of the full matrix
        let dense = h.to_dense();
        let eig = SymmetricEigen::new(dense);
        let k = 37;
        let energy = eig.eigenvalues[k];
        let v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
        let s = FockState::normalized(&model, v.clone()).unwrap();
        for engine in [Engine::DenseEig, Engine::Krylov] {
            let cfg = PropagatorConfig { engine, ..Default::default() };
            let out = evolve(&s, &h, 1.3, &cfg).unwrap();
            let expected: Vec<Complex64> =
                s.amplitudes().iter().map(|z| z * Complex64::from_polar(1.0, -energy * 1.3)).collect();
            assert!(dist(out.amplitudes(), &expected) < 1e-9, "{engine:?}");
        }
    }

    #[test]
    fn engines_agree() {
        let (model, h) = setup();
        let s = random_state(&model, 2);
        let dense = Propagator::new(h.clone(), PropagatorConfig { engine: Engine::DenseEig, ..Default::default() }).unwrap();
        let krylov = Propagator::new(h.clone(), PropagatorConfig { engine: Engine::Krylov, ..Default::default() }).unwrap();
        for t in [0.1, 1.0, -2.5] {
            let a = dense.evolve(&s, t).unwrap();
            let b = krylov.evolve(&s, t).unwrap();
            assert!(dist(a.amplitudes(), b.amplitudes()) < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn rejects_non_hermitian_and_bad_config() {
        let op = SparseOperator::from_triplets(2, vec![(0, 1, Complex64::new(1.0, 0.0))], Symmetry::General).unwrap();
        assert!(Propagator::new(Arc::new(op), PropagatorConfig::default()).is_err());
        let (_, h) = setup();
        let bad = PropagatorConfig { krylov_dim: 1, ..Default::default() };
        assert!(Propagator::new(h.clone(), bad).is_err());
        let bad = PropagatorConfig { tolerance: 0.0, ..Default::default() };
        assert!(Propagator::new(h, bad).is_err());
    }

    #[test]
    fn blocks_follow_particle_sectors() {
        let (model, h) = setup();
        let blocks = connected_components(&h);
        // N = 0..=12 sectors on 4 sites with n_max = 3
        assert_eq!(blocks.len(), 13);
        assert_eq!(blocks.iter().map(Vec::len).sum::<usize>(), model.dim());
    }

    #[test]
    fn expectation_dimension_checked() {
        let (model, h) = setup();
        let small = LatticeModel::periodic(2, 1.0, 0.0, 1).unwrap();
        assert!(expectation(&FockState::vacuum(&small), &h).is_err());
        assert_eq!(expectation(&FockState::vacuum(&model), &h).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn evolve_many_matches_single_calls() {
        let (model, h) = setup();
        let s = random_state(&model, 3);
        let times = [0.0, 0.4, 0.9, 2.0];
        for engine in [Engine::DenseEig, Engine::Krylov] {
            let p = Propagator::new(h.clone(), PropagatorConfig { engine, ..Default::default() }).unwrap();
            let many = p.evolve_many(&s, &times).unwrap();
            for (t, state) in times.iter().zip(&many) {
                let single = p.evolve(&s, *t).unwrap();
                assert!(dist(state.amplitudes(), single.amplitudes()) < 2e-9);
            }
        }
    }

    #[test]
    fn displaced_vacuum_matches_closed_form() {
        use crate::lattice::{coherent_state_from_amplitudes, TruncationPolicy};
        let model = LatticeModel::periodic(3, 1.0, 0.0, 4).unwrap();
        let policy = TruncationPolicy::lenient(1.0);
        let cfg = PropagatorConfig { tolerance: 1e-13, ..Default::default() };
        let diff = |alpha: f64| {
            let alphas = [Complex64::new(alpha, 0.0), Complex64::new(0.0, -alpha), Complex64::new(0.6 * alpha, 0.8 * alpha)];
            let numeric = displace_vacuum(&model, &alphas, &cfg).unwrap();
            let closed = coherent_state_from_amplitudes(&alphas, &model, &policy).unwrap();
            assert!((numeric.norm() - 1.0).abs() < 1e-12);
            dist(numeric.amplitudes(), closed.amplitudes())
        };
        let (small, large) = (diff(0.05), diff(0.1));
        assert!(small < 1e-8, "{small}");
        // the truncated generator misses the cutoff commutator at order |α|^6
        assert!((large / small).log2() > 5.0, "{small} {large}");
    }
}
