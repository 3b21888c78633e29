use msbell::bellineq::{lhs_332, lhs_moduli_442, lhs_n, InequalitySpec, SettingsAssignment};
use msbell::corrtensor::{compute_tensor, CorrelationTensor, LocalFrame};
use msbell::criteria::{condition_332, condition_442, condition_n, Options};
use msbell::lhv::{classical_bound, lhv_value_of_product_tensor, DeterministicAssignment};
use msbell::qstate::{mix_white_noise, random_pure, StateSpec};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state_spec() -> impl Strategy<Value = StateSpec> {
    let leaf = prop_oneof![
        (2usize..6, -10.0f64..10.0).prop_map(|(n, alpha)| StateSpec::Ghz { n, alpha }),
        (3usize..7).prop_map(|n| StateSpec::W { n }),
        Just(StateSpec::FourPhoton),
        (1usize..5, any::<u64>()).prop_map(|(n, seed)| StateSpec::Random { n, seed }),
    ];
    leaf.prop_recursive(2, 4, 1, |inner| {
        (0.0f64..=1.0, inner).prop_map(|(v, inner)| StateSpec::Noise { v, inner: Box::new(inner) })
    })
}

fn opts() -> Options {
    Options { restarts: 12, seed: 1 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn state_specs_round_trip(spec in state_spec()) {
        let text = spec.to_string();
        let back: StateSpec = text.parse().unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn product_tensors_never_beat_the_classical_bound(seed in any::<u64>()) {
        // a product tensor is a local model, so no settings can violate
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<Vector3<f64>> = (0..3).map(|_| LocalFrame::random(&mut rng).axis(0)).collect();
        let t = CorrelationTensor::product(&dirs);
        let s = SettingsAssignment::random(&[4, 4, 2], &mut rng);
        prop_assert!(lhs_moduli_442(&t, &s).unwrap() <= 8.0 + 1e-12);
        let s = SettingsAssignment::random(&[3, 3, 2], &mut rng);
        prop_assert!(lhs_332(&t, &s).unwrap() <= 8.0 + 1e-12);
    }

    #[test]
    fn expressions_are_invariant_under_joint_rotation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = CorrelationTensor::random(4, &mut rng);
        let frames: Vec<LocalFrame> = (0..4).map(|_| LocalFrame::random(&mut rng)).collect();
        let mats: Vec<_> = frames.iter().map(|f| f.0).collect();
        let s = SettingsAssignment::random(&[4, 4, 4, 2], &mut rng);
        let a = lhs_n(&t, &s).unwrap();
        let b = lhs_n(&t.rotate(&frames).unwrap(), &s.rotated(&mats).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn criteria_scale_quadratically(seed in any::<u64>(), v in 0.05f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = CorrelationTensor::random(3, &mut rng);
        let vt = t.scaled(v);
        for f in [condition_442, condition_332, condition_n] {
            let a = f(&t, &opts()).unwrap().max_value;
            let b = f(&vt, &opts()).unwrap().max_value;
            prop_assert!((b - v * v * a).abs() <= 1e-9 * (v * v * a).max(1.0));
        }
    }

    #[test]
    fn white_noise_scales_the_factor(seed in any::<u64>(), v in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_pure(3, &mut rng).unwrap();
        let pure = condition_442(&compute_tensor(&psi).unwrap(), &opts()).unwrap().violation_factor;
        let noisy = condition_442(&compute_tensor(&mix_white_noise(&psi, v).unwrap()).unwrap(), &opts())
            .unwrap()
            .violation_factor;
        prop_assert!((noisy - v * pure).abs() <= 1e-9);
    }
}

#[test]
fn deterministic_models_reproduce_the_lhv_values() {
    // E_klm = A_k B_l C_m is realized by T = z z z with settings +-z
    let spec = InequalitySpec::f442();
    let t = CorrelationTensor::product(&[Vector3::z(), Vector3::z(), Vector3::z()]);
    let bound = classical_bound(&spec).unwrap();
    for code in 0..1u64 << spec.total_settings() {
        let a = DeterministicAssignment::from_bits(&spec.settings_per_party, code);
        let settings: Vec<Vec<Vector3<f64>>> = a
            .outcomes()
            .iter()
            .map(|p| p.iter().map(|&o| Vector3::z() * f64::from(o)).collect())
            .collect();
        let s = SettingsAssignment::from_vectors(&settings).unwrap();
        let quantum = lhs_moduli_442(&t, &s).unwrap();
        let classical = lhv_value_of_product_tensor(&a, &spec).unwrap();
        assert_eq!(quantum, classical);
        assert!(quantum <= bound);
    }
}
