use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sfd_core::critical::{check_formal_stability, solve_critical_point, spectral_gap, tangent_matrices};
use sfd_core::presets::{load_preset, ParamMap, PresetId};
use sfd_core::sampling::DomainSampler;
use sfd_core::{MechanicalSystem, PhasePoint, SfdError};

fn preset(id: PresetId) -> std::sync::Arc<dyn MechanicalSystem<f64>> {
    load_preset::<f64>(id, None, &ParamMap::new(), None).unwrap().system
}

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

#[test]
fn linear_coupled_critical_point_matches_closed_form() {
    // K2 = 1, S2(x, 0) = x^2, f2 = 0.5 sin t
    let sys = preset(PresetId::LinearCoupled);
    for &(x, t) in &[(0.3, 0.1), (-1.5, 2.0), (1.9, 5.5)] {
        let cp = solve_critical_point(sys.as_ref(), &v(x), &v(0.7), t, &v(0.0)).unwrap();
        let expect = 0.5 * f64::sin(t) - x * x;
        assert!((cp.eta[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        assert!(cp.stable);
        // A = M2^{-1} C2 = 1, B = M2^{-1} K2 = 1
        assert!((cp.a[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((cp.b[(0, 0)] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn linear_coupled_gap_is_half_times_safety() {
    let sys = preset(PresetId::LinearCoupled);
    let cert = spectral_gap(sys.as_ref(), &DomainSampler::default()).unwrap();
    assert!((cert.lambda - 0.475).abs() < 1e-10, "{}", cert.lambda);
    assert_eq!(cert.n_samples, 829);
}

#[test]
fn tet_demo_has_vanishing_b_and_fails_certification() {
    let sys = preset(PresetId::TetDemo);
    let p = PhasePoint::at_rest(&v(0.4), &v(0.1), &v(0.2), 0.3);
    let (_, b) = tangent_matrices(sys.as_ref(), &p).unwrap();
    assert_eq!(b[(0, 0)], 0.0);
    // autonomous: the grid spans (x, xd) only
    let n = DomainSampler::default().slow_points(&sys.domain()).len();
    assert_eq!(n, 181);
    match spectral_gap(sys.as_ref(), &DomainSampler::default()) {
        Err(SfdError::UnstableSample { count, .. }) => assert_eq!(count, n),
        other => panic!("expected UnstableSample, got {other:?}"),
    }
}

fn fold_branch(x: f64, t: f64, sign: f64) -> f64 {
    (-1.0 + sign * (1.0 - (x * x - t.sin())).sqrt()) / 2.0
}

#[test]
fn fold_demo_branches_and_stability() {
    let sys = preset(PresetId::FoldDemo);
    let plus = solve_critical_point(sys.as_ref(), &v(0.0), &v(0.0), 0.0, &v(0.0)).unwrap();
    assert!(plus.eta[0].abs() < 1e-14);
    assert!(plus.stable);
    let minus = solve_critical_point(sys.as_ref(), &v(0.0), &v(0.0), 0.0, &v(-1.0)).unwrap();
    assert!((minus.eta[0] + 1.0).abs() < 1e-12);
    assert!(!minus.stable);
    // B on the minus branch equals -4 sqrt(1 - (x^2 - sin t))
    assert!((minus.b[(0, 0)] + 4.0).abs() < 1e-9);
}

#[test]
fn fold_demo_plus_branch_is_certified() {
    let sys = preset(PresetId::FoldDemo);
    let cert = spectral_gap(sys.as_ref(), &DomainSampler::default()).unwrap();
    assert!(cert.lambda > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn fold_demo_newton_matches_both_branches(x in -1.4f64..1.4, t in 0.0f64..6.28) {
        prop_assume!(x * x < 1.0 + t.sin() - 0.05);
        let sys = preset(PresetId::FoldDemo);
        for (guess, sign) in [(0.0, 1.0), (-1.0, -1.0)] {
            let cp = solve_critical_point(sys.as_ref(), &v(x), &v(0.0), t, &v(guess)).unwrap();
            prop_assert!((cp.eta[0] - fold_branch(x, t, sign)).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_definite_pairs_are_stable(
        f in 1usize..=6,
        seed_a in prop::collection::vec(-1.0f64..1.0, 36),
        seed_b in prop::collection::vec(-1.0f64..1.0, 36),
    ) {
        let ga = DMatrix::from_iterator(f, f, seed_a.into_iter().take(f * f));
        let gb = DMatrix::from_iterator(f, f, seed_b.into_iter().take(f * f));
        let a = &ga * ga.transpose();
        let b = &gb * gb.transpose() + DMatrix::identity(f, f) * 0.1;
        // strictly damped when A is definite; semi-definite A may still be stable
        let a = a + DMatrix::identity(f, f) * 1e-3;
        let (spec, stable) = check_formal_stability(&a, &b).unwrap();
        prop_assert!(stable);
        let bn = b.norm();
        for l in spec {
            let lc = nalgebra::Complex::new(l.re, l.im);
            let m = b.map(|v| nalgebra::Complex::new(v, 0.0))
                + a.map(|v| nalgebra::Complex::new(v, 0.0)) * lc
                + DMatrix::<nalgebra::Complex<f64>>::identity(f, f) * (lc * lc);
            prop_assert!(m.determinant().norm() <= 1e-8 * bn.max(1.0).powi(f as i32));
        }
    }
}

#[test]
fn soft_pendulum_solves_at_hanging_angle() {
    // the angle row of the regularized form is O(eps^2) when sin x = 0
    let p = load_preset::<f64>(PresetId::Pendulum3, Some("soft-soft-stiff"), &ParamMap::new(), None).unwrap();
    let sys = p.system.as_ref();
    let (x, xd) = (DVector::from_vec(vec![0.0, 0.1]), DVector::from_vec(vec![0.5, 0.0]));
    let cp = solve_critical_point(sys, &x, &xd, 0.3, &sys.branch_guess(&x, &xd, 0.3)).unwrap();
    assert!(cp.stable);
    let near = DVector::from_vec(vec![1e-6, 0.1]);
    let cq = solve_critical_point(sys, &near, &xd, 0.3, &cp.eta).unwrap();
    assert!((cq.eta[0] - cp.eta[0]).abs() <= 1e-4 * (1.0 + cp.eta[0].abs()));
}
