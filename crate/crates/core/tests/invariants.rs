use langevin_core::detect::{count_symbol_errors, project_constellation};
use langevin_core::sampler::{
    compile_scheme, derive_seed, flow_a, flow_c, flow_o2, flow_o3, SamplerState,
};
use langevin_core::schedule::{
    geometric_sigmas, mass_from_preconditioner, spectral_preconditioner,
};
use langevin_core::{Constellation, Order};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(xs: &[f64]) -> SamplerState {
    let n = xs.len() / 3;
    let mut s = SamplerState::new(DVector::from_column_slice(&xs[..n]));
    s.v = DVector::from_column_slice(&xs[n..2 * n]);
    s.z = DVector::from_column_slice(&xs[2 * n..]);
    s
}

fn close(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    (a - b).amax() <= 1e-10 * (1.0 + a.amax())
}

proptest! {
    #[test]
    fn position_drift_is_a_flow(
        xs in proptest::collection::vec(-5.0f64..5.0, 9),
        c in proptest::collection::vec(0.1f64..3.0, 3),
        m in proptest::collection::vec(0.1f64..3.0, 3),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let (c, m) = (DVector::from_vec(c), DVector::from_vec(m));
        let mut a = state(&xs);
        let mut b = a.clone();
        flow_a(&mut a, t1, &c, &m);
        flow_a(&mut a, t2, &c, &m);
        flow_a(&mut b, t1 + t2, &c, &m);
        prop_assert!(close(&a.x, &b.x));
        prop_assert_eq!(a.v, b.v);
    }

    #[test]
    fn coupling_is_a_flow(xs in proptest::collection::vec(-5.0f64..5.0, 9), lambda in -2.0f64..2.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let mut a = state(&xs);
        let mut b = a.clone();
        flow_c(&mut a, t1, lambda);
        flow_c(&mut a, t2, lambda);
        flow_c(&mut b, t1 + t2, lambda);
        prop_assert!(close(&a.v, &b.v));
        prop_assert_eq!(a.x, b.x);
    }

    #[test]
    fn cold_friction_composes(xs in proptest::collection::vec(-5.0f64..5.0, 9), gamma in 0.01f64..5.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let m = DVector::from_element(3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = state(&xs);
        let mut b = a.clone();
        flow_o2(&mut a, t1, gamma, 0.0, &m, &mut rng);
        flow_o2(&mut a, t2, gamma, 0.0, &m, &mut rng);
        flow_o2(&mut b, t1 + t2, gamma, 0.0, &m, &mut rng);
        prop_assert!(close(&a.v, &b.v));
    }

    #[test]
    fn cold_auxiliary_composes_at_frozen_momentum(xs in proptest::collection::vec(-5.0f64..5.0, 9), lambda in -2.0f64..2.0, alpha in 0.05f64..5.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let m = DVector::from_element(3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = state(&xs);
        let mut b = a.clone();
        flow_o3(&mut a, t1, lambda, alpha, 0.0, &m, &mut rng);
        flow_o3(&mut a, t2, lambda, alpha, 0.0, &m, &mut rng);
        flow_o3(&mut b, t1 + t2, lambda, alpha, 0.0, &m, &mut rng);
        prop_assert!(close(&a.z, &b.z));
        prop_assert_eq!(a.v, b.v);
    }

    #[test]
    fn preconditioner_is_positive_and_bounded(sigma_l in 1e-3f64..3.0, sigma0 in 1e-3f64..3.0, s in proptest::collection::vec(0.0f64..10.0, 1..6), extra in 0usize..3) {
        let dim = s.len() + extra;
        let c = spectral_preconditioner(sigma_l, sigma0, &s, dim).unwrap();
        for (j, cj) in c.iter().enumerate() {
            prop_assert!(*cj > 0.0);
            prop_assert!(*cj <= sigma_l * sigma_l * (1.0 + 1e-12));
            if j >= s.len() {
                prop_assert_eq!(*cj, sigma_l * sigma_l);
            }
        }
        let m = mass_from_preconditioner(&c, 1.5).unwrap();
        for (ci, mi) in c.iter().zip(m.iter()) {
            prop_assert!((ci * mi - 1.5f64.powi(2) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_levels_decrease_geometrically(s1 in 0.05f64..5.0, ratio in 0.001f64..0.9, levels in 2usize..60) {
        let last = s1 * ratio;
        let s = geometric_sigmas(s1, last, levels).unwrap();
        prop_assert_eq!(s.len(), levels + 1);
        prop_assert_eq!(s[levels], 0.0);
        prop_assert!((s[0] - s1).abs() < 1e-12 * s1);
        prop_assert!((s[levels - 1] - last).abs() < 1e-9 * last);
        let q = s[1] / s[0];
        for w in s[..levels].windows(2) {
            prop_assert!(w[1] < w[0]);
            prop_assert!((w[1] / w[0] - q).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_is_idempotent(pairs in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..6), name in prop::sample::select(vec!["QPSK", "QAM16", "QAM64"])) {
        let c = Constellation::new(name).unwrap();
        let x = DVector::from_iterator(2 * pairs.len(), pairs.iter().flat_map(|&(re, im)| [re, im]));
        let p = project_constellation(&x, &c);
        prop_assert_eq!(project_constellation(&p, &c), p.clone());
        prop_assert!(p.iter().all(|v| c.points().contains(v)));
        let (errors, total) = count_symbol_errors(std::slice::from_ref(&p), &[x.map(|v| c.nearest(-v))]).unwrap();
        prop_assert!(errors <= total);
        prop_assert_eq!(total, x.len() / 2);
    }

    #[test]
    fn seeds_are_stable_and_separate(a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(derive_seed(&[a, b]), derive_seed(&[a, b]));
        prop_assert_ne!(derive_seed(&[a, b]), derive_seed(&[a, b.wrapping_add(1)]));
    }
}

#[test]
fn every_scheme_applies_each_flow_for_a_full_step() {
    for (name, order) in [
        ("ULA", Order::First),
        ("ABO", Order::Second),
        ("BAOAB", Order::Second),
        ("BCOABC", Order::Third),
        ("(BC)OA(BC)", Order::Third),
        ("BACOCAB", Order::Third),
    ] {
        let s = compile_scheme(name, order).unwrap();
        for (letter, total) in s.letter_totals() {
            assert!(
                (total - 1.0).abs() < 1e-15,
                "{name}: {letter} sums to {total}"
            );
        }
    }
    assert!(compile_scheme("BAOAB", Order::Third).is_err());
    assert!(compile_scheme("XYZ", Order::Second).is_err());
}
