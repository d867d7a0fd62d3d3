use std::f64::consts::PI;

use faer::Mat;
use mmrabi_core::analytic::{self, Branch, CoherentSolution};
use mmrabi_core::chain::{build_chain_mapping, star_correlations};
use mmrabi_core::exact::FockBasis;
use mmrabi_core::mps::{bond_hamiltonians, GateSet, TimeMode};
use mmrabi_core::observables::{field_map_from_correlations, field_profile, uniform_grid};
use mmrabi_core::series::Source;
use mmrabi_core::{Complex64 as C64, ModelParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(m: usize, seed: u64) -> Mat<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = Mat::<C64>::zeros(m, m);
    for i in 0..m {
        h[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..m {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chain_mapping_is_orthogonal_and_isospectral(m in 1usize..80) {
        let mapping = build_chain_mapping(m).unwrap();
        prop_assert!(mapping.orthogonality_error() < 1e-10);
        let spec = mapping.chain_spectrum().unwrap();
        for (k, e) in spec.iter().enumerate() {
            prop_assert!((e - (k + 1) as f64).abs() < 1e-8);
        }
        prop_assert!(mapping.hoppings.iter().all(|&t| t <= 0.0));
    }

    #[test]
    fn revival_amplitude_squares_to_overlap(g in 0.0f64..1.5, m in 1usize..120, t in 0.0f64..30.0) {
        let p = ModelParams::tls(1.0, g, m, 4);
        let p0 = analytic::revival_probability(&p, t);
        let o = analytic::overlap(&p, t);
        prop_assert!((p0 * p0 - o).abs() < 1e-14);
        let pop = analytic::population(&p, t);
        prop_assert!((0.5..=1.0).contains(&pop));
    }

    #[test]
    fn overlap_exponent_is_periodic_and_even(g in 0.0f64..1.5, m in 1usize..60, t in 0.0f64..6.3) {
        let p = ModelParams::tls(1.0, g, m, 4);
        let s = analytic::overlap_exponent(&p, t);
        let tol = 1e-9 * (1.0 + s.abs());
        prop_assert!(s >= -1e-15);
        prop_assert!((analytic::overlap_exponent(&p, t + 2.0 * PI) - s).abs() < tol);
        prop_assert!((analytic::overlap_exponent(&p, -t) - s).abs() < tol);
    }

    #[test]
    fn mean_fields_of_the_branches_cancel(g in 0.0f64..1.5, m in 1usize..40, x in -0.5f64..0.5, t in 0.0f64..7.0) {
        let p = ModelParams::tls(1.0, g, m, 4);
        let plus = analytic::mean_field(x, t, Branch::Plus, &p).unwrap();
        let minus = analytic::mean_field(x, t, Branch::Minus, &p).unwrap();
        prop_assert!((plus + minus).norm() < 1e-12);
    }

    #[test]
    fn field_map_is_linear(m in 1usize..12, a in 0u64..1000, b in 0u64..1000) {
        let x = uniform_grid(-0.5, 0.5, 31);
        let (ca, cb) = (random_hermitian(m, a), random_hermitian(m, b + 7919));
        let sum = &ca + &cb;
        let fa = field_profile(&ca, &x).unwrap();
        let fb = field_profile(&cb, &x).unwrap();
        let fs = field_profile(&sum, &x).unwrap();
        for k in 0..x.len() {
            prop_assert!((fs[k] - fa[k] - fb[k]).abs() < 1e-10 * (1.0 + fs[k].abs()));
        }
    }

    #[test]
    fn analytic_map_is_reflection_symmetric(g in 0.0f64..1.2, m in 1usize..40, t in 0.0f64..7.0) {
        let p = ModelParams::tls(1.0, g, m, 4);
        let sol = CoherentSolution::new(&p).unwrap();
        let x = uniform_grid(-0.5, 0.5, 41);
        let map = field_map_from_correlations(&[sol.correlations(t)], &[t], &x, Source::Analytic).unwrap();
        let row = &map.amplitude[0];
        for k in 0..x.len() {
            let direct = analytic::field_amplitude(x[k], t, &p).unwrap();
            prop_assert!((row[k] - row[x.len() - 1 - k]).abs() < 1e-9 * (1.0 + row[k].abs()));
            prop_assert!((row[k] - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn fock_codec_is_a_bijection(dims in prop::collection::vec(1usize..5, 1..6), seed in 0u64..1000) {
        let basis = FockBasis::new(&dims, 1 << 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let index = rng.gen_range(0..basis.dim());
            let occ = basis.decode(index);
            prop_assert!(occ.iter().zip(&dims).all(|(o, d)| o < d));
            prop_assert_eq!(basis.encode(&occ), index);
        }
    }

    #[test]
    fn star_correlations_keep_the_trace(m in 1usize..20, seed in 0u64..1000) {
        let mapping = build_chain_mapping(m).unwrap();
        let chain = random_hermitian(m, seed);
        let star = star_correlations(&mapping, &chain).unwrap();
        let tr = |c: &Mat<C64>| (0..m).map(|i| c[(i, i)]).sum::<C64>();
        prop_assert!((tr(&chain) - tr(&star)).norm() < 1e-10);
        for i in 0..m {
            for j in 0..m {
                prop_assert!((star[(i, j)] - star[(j, i)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn real_time_gates_are_unitary(g in 0.0f64..1.5, m in 1usize..5, d in 2usize..5, dt in 0.001f64..0.2) {
        let params = ModelParams::tls(1.0, g, m, d);
        let mapping = build_chain_mapping(m).unwrap();
        let terms = mmrabi_core::chain::chain_terms(&params, &mapping).unwrap();
        prop_assert_eq!(bond_hamiltonians(&terms).unwrap().len(), m);
        let gates = GateSet::from_terms(&terms, dt, TimeMode::Real).unwrap();
        for u in &gates.gates {
            let n = u.nrows();
            let prod = u.adjoint() * u;
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((prod[(i, j)] - C64::new(e, 0.0)).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn repeated_analytic_evaluation_is_bitwise_stable() {
    let p = ModelParams::tls(1.0, 0.6, 50, 4);
    let x = uniform_grid(-0.5, 0.5, 101);
    let a = mmrabi_core::observables::analytic_field_map(&p, &x, &[0.3, 1.7]).unwrap();
    let b = mmrabi_core::observables::analytic_field_map(&p, &x, &[0.3, 1.7]).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}
