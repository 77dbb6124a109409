use proptest::prelude::*;

use coherent_soliton::classical::{split_step_evolve, EvolveConfig};
use coherent_soliton::correspondence::{overlap_series, CorrespondenceConfig};
use coherent_soliton::grid::{classical_norm, ClassicalField, Grid};
use coherent_soliton::lattice::{
    coherent_state_from_amplitudes, hamiltonian, poisson_tail, total_number, Basis, FockState, LatticeModel,
    LatticeParams, TruncationPolicy,
};
use coherent_soliton::propagate::{displace_vacuum, expectation, Engine, Propagator, PropagatorConfig};
use coherent_soliton::Complex64;

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn small_model() -> impl Strategy<Value = LatticeModel> {
    (2usize..=3, 1usize..=3, 0.5..2.0f64, -1.0..1.0f64)
        .prop_map(|(m, n_max, delta, c)| LatticeModel::periodic(m, delta, c, n_max).unwrap())
}

fn state_on(model: &LatticeModel, raw: &[Complex64]) -> FockState {
    let amps = (0..model.dim()).map(|i| raw[i % raw.len()] * (1.0 + i as f64).sqrt()).collect();
    FockState::normalized(model, amps).unwrap()
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_index_round_trips(m in 1usize..=4, n_max in 1usize..=4, cap in proptest::option::of(0usize..=6), pick in 0.0..1.0f64) {
        let basis = Basis::new(m, n_max, cap, 1_000_000).unwrap();
        let i = ((basis.dim() as f64 * pick) as usize).min(basis.dim() - 1);
        let occ = basis.occupations(i);
        prop_assert!(occ.iter().all(|&n| n <= n_max));
        if let Some(cap) = cap {
            prop_assert!(occ.iter().sum::<usize>() <= cap);
        }
        prop_assert_eq!(basis.index_of(&occ), Some(i));
        prop_assert_eq!(basis.index_of_packed(basis.encode(&occ).unwrap()), Some(i));
    }

    #[test]
    fn evolution_is_unitary(model in small_model(), raw in proptest::collection::vec(complex(), 1..8), t in -10.0..10.0f64) {
        let h = std::sync::Arc::new(hamiltonian(&model).unwrap());
        let s = state_on(&model, &raw);
        for engine in [Engine::DenseEig, Engine::Krylov] {
            let p = Propagator::new(h.clone(), PropagatorConfig { engine, ..Default::default() }).unwrap();
            let out = p.evolve(&s, t).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-10, "{engine:?}: {}", out.norm());
        }
    }

    #[test]
    fn hermitian_expectations_are_real_and_conserved(model in small_model(), raw in proptest::collection::vec(complex(), 1..8), t in 0.0..5.0f64) {
        let h = hamiltonian(&model).unwrap();
        let n = total_number(&model);
        let s = state_on(&model, &raw);
        let e0 = expectation(&s, &h).unwrap();
        let n0 = expectation(&s, &n).unwrap();
        prop_assert!(e0.im.abs() <= 1e-12 * (1.0 + h.max_abs()));
        prop_assert!(n0.im.abs() <= 1e-12);
        let p = Propagator::new(std::sync::Arc::new(h.clone()), PropagatorConfig { engine: Engine::DenseEig, ..Default::default() }).unwrap();
        let st = p.evolve(&s, t).unwrap();
        prop_assert!((expectation(&st, &n).unwrap().re - n0.re).abs() < 1e-9);
        prop_assert!((expectation(&st, &h).unwrap().re - e0.re).abs() < 1e-9);
    }

    #[test]
    fn overlap_never_exceeds_one(c in -1.0..1.0f64, a in complex(), b in complex()) {
        let model = LatticeModel::periodic(2, 1.0, c, 3).unwrap();
        let grid = Grid::with_spacing(2, 1.0).unwrap();
        let f0 = ClassicalField::new(grid, vec![a * 0.3, b * 0.3], 0.0).unwrap();
        let cfg = CorrespondenceConfig {
            truncation: TruncationPolicy::lenient(1.0),
            ..Default::default()
        };
        let series = overlap_series(&f0, &model, &cfg, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        prop_assert!(series.r.iter().all(|z| z.norm() <= 1.0 + 1e-12));
        prop_assert!((series.r[0] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn displacement_matches_closed_form_at_small_amplitude(a in complex(), b in complex()) {
        let alphas = [a * 0.05, b * 0.05];
        let model = LatticeModel::periodic(2, 1.0, 0.0, 4).unwrap();
        let numeric = displace_vacuum(&model, &alphas, &PropagatorConfig::default()).unwrap();
        let closed = coherent_state_from_amplitudes(&alphas, &model, &TruncationPolicy::default()).unwrap();
        prop_assert!(distance(numeric.amplitudes(), closed.amplitudes()) < 1e-8);
    }

    #[test]
    fn coherent_states_are_normalized(raw in proptest::collection::vec(complex(), 3), n_max in 1usize..=5) {
        let model = LatticeParams::new(3, 1.0, 0.0, n_max).build().unwrap();
        let s = coherent_state_from_amplitudes(&raw, &model, &TruncationPolicy::lenient(1.0)).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn poisson_tail_shrinks_with_cutoff(lambda in 1e-4..4.0f64, n_max in 0usize..12) {
        let (lo, hi) = (poisson_tail(lambda, n_max), poisson_tail(lambda, n_max + 1));
        prop_assert!(hi < lo && hi >= 0.0 && lo <= 1.0);
    }

    #[test]
    fn split_step_conserves_norm(raw in proptest::collection::vec(complex(), 16), c in -1.0..1.0f64) {
        let grid = Grid::new(16, 8.0).unwrap();
        let f0 = ClassicalField::new(grid, raw, 0.0).unwrap();
        let mut cfg = EvolveConfig::split_step(1e-2, 0.5);
        cfg.max_energy_drift = f64::INFINITY;
        let last = split_step_evolve(&f0, c, &cfg).unwrap();
        let (n0, n1) = (classical_norm(&f0), classical_norm(last.last()));
        prop_assert!((n1 - n0).abs() <= 1e-13 * 50.0 * n0);
    }
}
