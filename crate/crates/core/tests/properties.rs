use proptest::prelude::*;

use povmsim::decompose::decompose_extremal;
use povmsim::io::{canonical_json, read_povm, write_povm};
use povmsim::naimark::{dilate, verify_dilation};
use povmsim::povm::protocol_inverse_d;
use povmsim::random::{random_density_matrix, random_hermitian, random_povm, random_rank_one_povm, rng};
use povmsim::sdp::{embed_hermitian, unembed_hermitian};
use povmsim::simulability::visibility_m_outcome;
use povmsim::{HermitianOperator, PostProcessing, Povm, Tolerances};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn identity_defect(m: &Povm) -> f64 {
    m.normalization_defect()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn random_povms_are_valid(seed in any::<u64>(), d in 2usize..5, n in 1usize..7) {
        let m = random_povm(&mut rng(seed), d, n);
        prop_assert_eq!(m.num_outcomes(), n);
        prop_assert!(identity_defect(&m) < 1e-10);
        prop_assert!(m.effects().iter().all(|e| e.min_eigenvalue() > -1e-12));
    }

    #[test]
    fn json_round_trip_is_byte_stable(seed in any::<u64>(), d in 1usize..5, n in 1usize..6) {
        let m = random_povm(&mut rng(seed), d, n);
        let text = write_povm(&m);
        let back = read_povm(&text, &Tolerances::default()).unwrap();
        prop_assert_eq!(write_povm(&back), text);
        prop_assert!(back.distance(&m) < 1e-15);
    }

    #[test]
    fn canonical_json_is_a_fixed_point(seed in any::<u64>()) {
        let m = random_povm(&mut rng(seed), 2, 3);
        let once = canonical_json(&serde_json::from_str(&write_povm(&m)).unwrap());
        let twice = canonical_json(&serde_json::from_str(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn depolarizing_composes(seed in any::<u64>(), s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let m = random_povm(&mut rng(seed), 3, 4);
        let a = m.depolarize(s).unwrap().depolarize(t).unwrap();
        let b = m.depolarize(s * t).unwrap();
        prop_assert!(a.distance(&b) < 1e-13);
        prop_assert!(a.normalization_defect() < 1e-12);
    }

    #[test]
    fn post_processing_keeps_normalization(seed in any::<u64>(), weights in prop::collection::vec(0.01f64..1.0, 8)) {
        let m = random_povm(&mut rng(seed), 2, 4);
        let rows: Vec<Vec<f64>> = weights
            .chunks(2)
            .map(|w| vec![w[0] / (w[0] + w[1]), w[1] / (w[0] + w[1])])
            .collect();
        let q = PostProcessing::new(rows).unwrap();
        let p = m.post_process(&q).unwrap();
        prop_assert_eq!(p.num_outcomes(), 2);
        prop_assert!(p.normalization_defect() < 1e-12);
        let id = PostProcessing::identity(4);
        prop_assert!(m.post_process(&id).unwrap().distance(&m) < 1e-15);
    }

    #[test]
    fn probabilities_form_a_distribution(seed in any::<u64>(), d in 2usize..5) {
        let mut r = rng(seed);
        let m = random_povm(&mut r, d, 5);
        let rho = random_density_matrix(&mut r, d);
        let p = m.probabilities(&rho);
        prop_assert!(p.iter().all(|&x| x > -1e-12));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_embedding_round_trips(seed in any::<u64>(), d in 1usize..5) {
        let h = random_hermitian(&mut rng(seed), d);
        let e = embed_hermitian(h.matrix());
        prop_assert!((&e - e.transpose()).amax() < 1e-15);
        prop_assert!(unembed_hermitian(&e).distance(&h) < 1e-15);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(e).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let mut hv = h.eig().eigenvalues;
        hv.sort_by(f64::total_cmp);
        for (k, x) in hv.iter().enumerate() {
            prop_assert!((ev[2 * k] - x).abs() < 1e-10 && (ev[2 * k + 1] - x).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_d_protocol_realizes_one_over_d(seed in any::<u64>(), d in 2usize..5, extra in 0usize..3) {
        let m = random_rank_one_povm(&mut rng(seed), d, d + extra);
        let target = m.depolarize(1.0 / d as f64).unwrap();
        prop_assert!(protocol_inverse_d(&m).unwrap().apply().distance(&target) < 1e-10);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn naimark_reproduces_statistics(seed in any::<u64>(), d in 2usize..4, n in 2usize..5) {
        let m = random_povm(&mut rng(seed), d, n);
        let dil = dilate(&m, None).unwrap();
        prop_assert_eq!(dil.ancilla_dim(), d);
        prop_assert!(dil.unitarity_defect() < 1e-10);
        prop_assert!(verify_dilation(&m, &dil, 20, seed) < 1e-9);
    }

    #[test]
    fn extremal_decomposition_reconstructs(seed in any::<u64>(), d in 2usize..4, n in 2usize..5) {
        let m = random_povm(&mut rng(seed), d, n);
        let parts = decompose_extremal(&m).unwrap();
        let w: f64 = parts.iter().map(|(w, _)| w).sum();
        prop_assert!((w - 1.0).abs() < 1e-9);
        prop_assert!(Povm::mix(&parts).unwrap().distance(&m) < 1e-7);
    }

    #[test]
    fn qubit_visibility_bounds_and_certificate(seed in any::<u64>(), n in 2usize..5) {
        let m = random_povm(&mut rng(seed), 2, n);
        let v = visibility_m_outcome(&m, 2).unwrap();
        prop_assert!(v.t_star >= 0.5 - 1e-6 && v.t_star <= 1.0 + 1e-6);
        prop_assert!(v.reconstruction_error(&m) < 1e-6);
        // more noise can only help
        let noisier = visibility_m_outcome(&m.depolarize(0.9).unwrap(), 2).unwrap();
        prop_assert!(noisier.t_star >= v.t_star - 1e-5);
    }

    #[test]
    fn projective_measurements_are_simulable(seed in any::<u64>(), d in 2usize..4) {
        let mut r = rng(seed);
        let u = povmsim::random::random_unitary(&mut r, d);
        let basis: Vec<HermitianOperator> = (0..d)
            .map(|k| HermitianOperator::outer(&u.column(k).into_owned()))
            .collect();
        let m = Povm::new(d, basis).unwrap();
        prop_assert!(m.is_projective(1e-9));
        let v = visibility_m_outcome(&m, d).unwrap();
        prop_assert!(v.t_star > 1.0 - 1e-5);
    }
}
