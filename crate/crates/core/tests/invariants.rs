use proptest::prelude::*;
use sdwave_core::dynamics::{apply_u, mode_propagator};
use sdwave_core::model::{cutoff_value, truncate_source, SourceSpec};
use sdwave_core::spectral::{BasisSpec, SpectralField, TransformKind};
use sdwave_core::State;

fn basis() -> impl Strategy<Value = BasisSpec> {
    (1usize..=3, 1usize..=5).prop_map(|(d, n)| BasisSpec::new(d, n).unwrap())
}

fn field(b: BasisSpec) -> impl Strategy<Value = SpectralField> {
    prop::collection::vec(-2.0f64..2.0, b.len()).prop_map(move |c| SpectralField::from_coeffs(b, c).unwrap())
}

fn basis_and_state() -> impl Strategy<Value = State> {
    basis().prop_flat_map(|b| (field(b), field(b))).prop_map(|(w, v)| State::new(w, v).unwrap())
}

proptest! {
    #[test]
    fn poincare_inequality(f in basis().prop_flat_map(field)) {
        let l1 = f.basis().first_eigenvalue();
        let grad = f.sobolev_norm(1.0).unwrap();
        prop_assert!(grad * grad >= l1 * f.l2_norm().powi(2) * (1.0 - 1e-12));
    }

    #[test]
    fn grid_round_trip(f in basis().prop_flat_map(field)) {
        let back = f.to_grid().to_coeffs();
        for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let dense = f.to_grid_with(TransformKind::Dense);
        for (a, b) in f.to_grid().values().iter().zip(dense.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup_law(s in basis_and_state(), t in 0.0f64..2.0, r in 0.0f64..2.0) {
        let composed = apply_u(&apply_u(&s, t), r);
        let direct = apply_u(&s, t + r);
        prop_assert!(composed.sub(&direct).h_norm() < 1e-13 * (1.0 + s.h_norm()));
    }

    #[test]
    fn liouville(lambda in 0.1f64..500.0, t in 0.0f64..5.0) {
        let det = mode_propagator(lambda, t).determinant();
        prop_assert!((det - (-lambda * t).exp()).abs() < 1e-13);
    }

    #[test]
    fn cutoff_sandwich(s in -50.0f64..50.0, m in 0.0f64..10.0) {
        let c = cutoff_value(s, m);
        prop_assert!(c.abs() <= s.abs());
        prop_assert!((s - c).abs() <= m + 4.0 * f64::EPSILON * s.abs());
        prop_assert!(c == 0.0 || c.signum() == s.signum());
    }

    #[test]
    fn truncation_is_inactive_inside(s in -3.0f64..3.0, a in 0.0f64..2.0) {
        let spec = SourceSpec::Cubic { a };
        let fk = truncate_source(&spec, 3.0);
        prop_assert_eq!(fk(s), spec.poly().eval(s));
        prop_assert_eq!(fk(10.0), spec.poly().eval(3.0));
    }

    #[test]
    fn sobolev_norms_increase_with_order(f in basis().prop_flat_map(field)) {
        let orders = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let norms: Vec<f64> = orders.iter().map(|&s| f.sobolev_norm(s).unwrap()).collect();
        for p in norms.windows(2) {
            prop_assert!(p[1] >= p[0] * (1.0 - 1e-12));
        }
    }
}
