mod common;

use proptest::prelude::*;
use sqdr_core::circuits::{Family, PqcSpec};
use sqdr_core::numerics::Rng;
use sqdr_core::par::Exec;
use sqdr_core::quantum::{
    evolve, evolve_density, param_shift, DensityMatrix, KrausChannel, ShiftEngine, StateVector, DENSITY_CAP,
};
use sqdr_core::Error;

#[test]
fn gates_are_unitary() {
    assert!(common::unitarity_deviation(2_000, 1) < 1e-12);
}

#[test]
fn long_circuits_keep_the_norm() {
    assert!(common::norm_drift(6, 10_000, 2) < 1e-10);
}

#[test]
fn channels_are_trace_preserving() {
    assert!(common::kraus_deviation() < 1e-12);
}

#[test]
fn engines_agree_without_noise() {
    assert!(common::engine_agreement(40, 3) < 1e-10);
}

#[test]
fn closed_form_channels() {
    for (name, dev) in common::channel_cases() {
        assert!(dev < 1e-12, "{name}: {dev}");
    }
}

#[test]
fn shift_rule_matches_finite_differences() {
    assert!(common::gradient_vs_fd(10, 4, None, 4) < 1e-6);
    let noise = KrausChannel::depolarizing(0.02).unwrap();
    assert!(common::gradient_vs_fd(4, 3, Some(&noise), 5) < 1e-5);
}

#[test]
fn smoothed_pipeline_gradient() {
    let err = common::pipeline_gradient_error(6);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn trajectories_converge_to_density() {
    assert!(common::trajectory_gap(4_000, 7) < 0.05);
}

#[test]
fn density_cap_is_enforced() {
    assert!(matches!(DensityMatrix::new(DENSITY_CAP + 1), Err(Error::Capacity { .. })));
    assert!(DensityMatrix::new(2).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn density_stays_physical(seed in any::<u64>(), n in 1usize..4, p in 0.0f64..=1.0) {
        let mut rng = Rng::new(seed);
        let c = common::random_circuit(&mut rng, n, 12);
        let rho = evolve_density(&c, Some(&KrausChannel::depolarizing(p).unwrap())).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(rho.trace().im.abs() < 1e-10);
        prop_assert!(rho.hermiticity_deviation() < 1e-10);
        for z in rho.expectations_z() {
            prop_assert!(z.abs() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn statevector_norm_is_preserved(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = Rng::new(seed);
        let c = common::random_circuit(&mut rng, n, 60);
        let mut s = StateVector::new(n).unwrap();
        for g in c.gates() {
            s.apply_gate(&g).unwrap();
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reverse_and_literal_shift_agree(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let case = common::random_dr(&mut rng, 4, 3);
        let c = case.spec.build(&case.x, &case.params).unwrap();
        let (np, nf) = (case.params.len(), case.x.len());
        let a = param_shift(&c, np, nf, ShiftEngine::Reverse, Exec::Sequential).unwrap();
        let b = param_shift(&c, np, nf, ShiftEngine::Literal, Exec::Parallel).unwrap();
        for (x, y) in a.params.iter().zip(&b.params).chain(a.features.iter().zip(&b.features)) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.expectations.iter().zip(&b.expectations) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn expectations_are_periodic_in_angles(seed in any::<u64>(), k in 0usize..12) {
        let mut rng = Rng::new(seed);
        let spec = PqcSpec::new(Family::Dr, 2, 2).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.uniform() * 6.0).collect();
        let mut p: Vec<f64> = (0..12).map(|_| rng.uniform() * 6.0).collect();
        let base = evolve(&spec.build(&x, &p).unwrap(), None).unwrap();
        p[k] += 2.0 * std::f64::consts::TAU;
        let shifted = evolve(&spec.build(&x, &p).unwrap(), None).unwrap();
        for (a, b) in base.iter().zip(shifted) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
