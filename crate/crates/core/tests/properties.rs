use pointflow::blowup::{from_relative, to_relative};
use pointflow::diagnostics::gradient_check;
use pointflow::model::{
    angular_momentum, angular_momentum_scale, decompose_field, hamiltonian, velocity_field,
};
use pointflow::{Complex64, SystemState, WeightVector};
use proptest::prelude::*;

fn disk_point() -> impl Strategy<Value = Complex64> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| Complex64::from_polar(r.sqrt(), a))
}

fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi).prop_filter("nonzero", |v: &f64| v.abs() > 1e-3)
}

fn separated(z: &[Complex64], min: f64) -> bool {
    (0..z.len()).all(|k| ((k + 1)..z.len()).all(|l| (z[k] - z[l]).norm() >= min))
}

fn source_state() -> impl Strategy<Value = SystemState> {
    (2usize..=8)
        .prop_flat_map(|n| (prop::collection::vec(disk_point(), n), prop::collection::vec(nonzero(-3.0, 3.0), n)))
        .prop_filter("min separation 0.1", |(z, _)| separated(z, 0.1))
        .prop_map(|(z, g)| SystemState::from_real(0.0, &z, &g).unwrap())
}

fn mixed_state() -> impl Strategy<Value = SystemState> {
    (2usize..=8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(disk_point(), n),
                prop::collection::vec((nonzero(-3.0, 3.0), -3.0..3.0f64), n),
            )
        })
        .prop_filter("min separation 0.1", |(z, _)| separated(z, 0.1))
        .prop_map(|(z, g)| {
            let parts: Vec<_> = z.iter().zip(&g).map(|(&z, &(a, b))| (z, Complex64::new(a, b))).collect();
            SystemState::from_parts(0.0, &parts).unwrap()
        })
}

proptest! {
    #[test]
    fn momentum_flux_cancels(state in mixed_state()) {
        let v = velocity_field(&state).unwrap();
        let g = state.intensities();
        let total: Complex64 = g.iter().zip(&v).map(|(g, v)| g * v).sum();
        let scale: f64 = g.iter().zip(&v).map(|(g, v)| g.norm() * v.norm()).sum();
        prop_assert!(total.norm() <= 1e-12 * scale);
    }

    #[test]
    fn source_angular_momentum_vanishes(state in source_state()) {
        let z = state.positions();
        let v = velocity_field(&state).unwrap();
        let w = WeightVector::source_weights(&state);
        let a = angular_momentum(&z, &v, &w).unwrap();
        prop_assert!(a.abs() <= 1e-12 * angular_momentum_scale(&z, &v, &w));
    }

    #[test]
    fn decomposition_is_exact(state in mixed_state()) {
        let v = velocity_field(&state).unwrap();
        let parts = decompose_field(&state).unwrap();
        for ((a, b), v) in parts.vortex.iter().zip(&parts.source).zip(&v) {
            let scale = a.norm() + b.norm() + v.norm();
            prop_assert!((a + b - v).norm() <= 16.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn sources_follow_the_gradient(state in source_state()) {
        let err = gradient_check(&state, &WeightVector::source_weights(&state)).unwrap();
        prop_assert!(err <= 1e-6, "relative error {}", err);
    }

    #[test]
    fn hamiltonian_ignores_translations(state in source_state(), w in disk_point()) {
        let weights = WeightVector::source_weights(&state);
        let shifted = state.translated(w * 10.0);
        let a = hamiltonian(&state, &weights).unwrap();
        let b = hamiltonian(&shifted, &weights).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn relative_round_trip(state in mixed_state()) {
        prop_assume!(state.total_intensity().norm() > 0.1);
        let rel = to_relative(&state).unwrap();
        let back = from_relative(&rel).unwrap();
        let z: Complex64 = back.particles.iter().map(|p| p.intensity.value() * p.position).sum();
        prop_assert!((z - rel.momentum).norm() <= 1e-13 * (1.0 + rel.momentum.norm()));
        for (a, b) in back.positions().iter().zip(state.positions()) {
            prop_assert!((a - b).norm() <= 1e-13);
        }
    }
}
