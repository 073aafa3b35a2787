use nalgebra::Matrix3;

use so3_frechet::drift::make_finite_difference_drift;
use so3_frechet::lie::{distance, vee, AlgebraVector, GroupElement};
use so3_frechet::predictor::{integrate, PredictionState, VariantFlag};
use so3_frechet::sde::NoiseModel;

fn terminal(steps: usize, variant: VariantFlag) -> PredictionState {
    let m = Matrix3::new(0.3, -1.1, 0.4, 0.9, 0.2, -0.7, -0.5, 0.8, 0.1);
    let offset = AlgebraVector::new(0.2, -0.1, 0.3);
    let drift = make_finite_difference_drift(move |g: &GroupElement| vee(&(m * g.matrix())) + offset, 1e-4).unwrap();
    let traj = integrate(
        &PredictionState::dirac(GroupElement::identity()),
        &drift,
        &NoiseModel::isotropic(0.3),
        1.0,
        steps,
        variant,
    )
    .unwrap();
    *traj.last().unwrap()
}

#[test]
fn fourth_order_convergence_on_a_state_dependent_drift() {
    for variant in [VariantFlag::GeneralEq7, VariantFlag::PaperEq9] {
        let reference = terminal(160, variant);
        let err = |n: usize| {
            let s = terminal(n, variant);
            (distance(&s.mean, &reference.mean), (s.cov.0 - reference.cov.0).norm())
        };
        let (mean8, cov8) = err(8);
        let (mean16, cov16) = err(16);
        assert!(mean16 > 1e-11 && cov16 > 1e-11, "errors too small to measure an order");
        assert!(mean8 / mean16 >= 12.0, "{variant:?} mean ratio {}", mean8 / mean16);
        assert!(cov8 / cov16 >= 12.0, "{variant:?} cov ratio {}", cov8 / cov16);
    }
}
