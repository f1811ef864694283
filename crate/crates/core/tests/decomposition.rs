use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sfd_core::decomposition::{
    check_a1, default_eps_sequence, inertial_decouple, normalized_forcing, A1Options, A1Verdict, DecoupledForm,
};
use sfd_core::presets::{load_preset, ParamMap, PresetId};
use sfd_core::sampling::DomainSampler;
use sfd_core::{MechanicalSystem, PhasePoint};
use std::sync::Arc;

fn preset(id: PresetId) -> Arc<dyn MechanicalSystem<f64>> {
    load_preset::<f64>(id, None, &ParamMap::new(), None).unwrap().system
}

fn points(sys: &dyn MechanicalSystem<f64>, n: usize) -> Vec<PhasePoint<f64>> {
    DomainSampler::default().phase_points(&sys.domain(), n)
}

fn a1(id: PresetId) -> sfd_core::decomposition::A1Report {
    let sys = preset(id);
    check_a1(sys.as_ref(), &points(sys.as_ref(), 20), &default_eps_sequence(), A1Options::default()).unwrap()
}

#[test]
fn block_diagonal_mass_is_left_unchanged() {
    let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 3.0, 0.0, 0.0, 0.0, 4.0]);
    let f = DVector::from_vec(vec![1.0, -1.0, 2.0]);
    let d = DecoupledForm::from_blocks(&m, &f, 2).unwrap();
    assert_eq!(d.m1, m.view((0, 0), (2, 2)).into_owned());
    assert_eq!(d.m2[(0, 0)], 4.0);
    assert_eq!(d.q1, f.rows(0, 2).into_owned());
    assert_eq!(d.q2[0], 2.0);
}

#[test]
fn singular_fast_block_is_reported() {
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let f = DVector::from_vec(vec![1.0, 1.0]);
    assert!(matches!(
        DecoupledForm::from_blocks(&m, &f, 1),
        Err(sfd_core::SfdError::SingularBlock { .. })
    ));
}

#[test]
fn eps_consistency_of_p2() {
    for id in [PresetId::LinearCoupled, PresetId::FoldDemo, PresetId::GenericWeak, PresetId::TetDemo] {
        let sys = preset(id);
        for p in points(sys.as_ref(), 30) {
            for eps in [0.1, 0.01, 0.001] {
                let nf = normalized_forcing(sys.as_ref(), &p, eps).unwrap();
                let d = inertial_decouple(sys.as_ref(), &p, eps).unwrap();
                let direct = d.m2.clone().lu().solve(&d.q2).unwrap();
                let lhs = &nf.p2 / eps;
                assert!((lhs - &direct).amax() <= 1e-12 * direct.amax().max(1.0), "{id}");
            }
        }
    }
}

#[test]
fn linear_coupled_limit_forcing() {
    // P2 = -(C2 yd + K2 eta + S2(x, 0) - f2(t)) with C2 = K2 = M2 = 1
    let sys = preset(PresetId::LinearCoupled);
    for p in points(sys.as_ref(), 30) {
        let nf = normalized_forcing(sys.as_ref(), &p, 0.0).unwrap();
        let (x, yd, eta, t) = (p.x[0], p.yd[0], p.eta[0], p.t);
        let expect = -(yd + eta + x * x - 0.5 * t.sin());
        assert!((nf.p2[0] - expect).abs() < 1e-9, "{} vs {expect}", nf.p2[0]);
    }
}

#[test]
fn tet_demo_limit_forcing_has_no_restoring_term() {
    // P2 = -(C2 yd + S2(x, 0)) with S2 = x^2
    let sys = preset(PresetId::TetDemo);
    for p in points(sys.as_ref(), 30) {
        let nf = normalized_forcing(sys.as_ref(), &p, 0.0).unwrap();
        let expect = -(p.yd[0] + p.x[0] * p.x[0]);
        assert!((nf.p2[0] - expect).abs() < 1e-9);
    }
}

#[test]
fn a1_verdicts_on_reference_systems() {
    assert_eq!(a1(PresetId::LinearCoupled).verdict, A1Verdict::Extends);
    assert_eq!(a1(PresetId::StiffInertia).verdict, A1Verdict::Diverges);
    let weak = a1(PresetId::GenericWeak);
    assert_eq!(weak.verdict, A1Verdict::Extends);
    for s in &weak.samples {
        // the limit is stacked (P1, P2); P2 vanishes identically
        assert!(s.limit[1].abs() < 1e-9, "{:?}", s.limit);
    }
}

#[test]
fn a1_report_serializes() {
    let r = a1(PresetId::LinearCoupled);
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    assert_eq!(v["verdict"], "extends");
    assert!(v["samples"][0]["ratios"].as_array().unwrap().len() >= 3);
}

#[test]
fn a1_rejects_short_sequences() {
    let sys = preset(PresetId::LinearCoupled);
    let r = check_a1(sys.as_ref(), &points(sys.as_ref(), 2), &[0.1, 0.05, 0.025], A1Options::default());
    assert!(r.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schur_complement_matches_direct_solve(
        n in 2usize..=8,
        split in 0.0f64..1.0,
        entries in prop::collection::vec(-1.0f64..1.0, 64),
        rhs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let s = 1 + ((n - 1) as f64 * split) as usize;
        let s = s.min(n - 1);
        let g = DMatrix::from_iterator(n, n, entries.into_iter().take(n * n));
        // nonsymmetric but diagonally shifted to stay well conditioned
        let m = &g + DMatrix::identity(n, n) * (n as f64);
        let f = DVector::from_iterator(n, rhs.into_iter().take(n));
        let direct = m.clone().lu().solve(&f).unwrap();
        let d = DecoupledForm::from_blocks(&m, &f, s).unwrap();
        let (a1, a2) = d.accelerations().unwrap();
        let scale = direct.amax().max(1e-300);
        prop_assert!((a1 - direct.rows(0, s)).amax() <= 1e-10 * scale);
        prop_assert!((a2 - direct.rows(s, n - s)).amax() <= 1e-10 * scale);
    }

    #[test]
    fn a1_verdict_is_monotone_in_tolerance(tol_exp in -13.0f64..-9.0, loosen in 1.0f64..1e3) {
        let sys = preset(PresetId::LinearCoupled);
        let pts = points(sys.as_ref(), 4);
        let seq = default_eps_sequence();
        let tight = A1Options { tol: 10f64.powf(tol_exp), ..A1Options::default() };
        let loose = A1Options { tol: tight.tol * loosen, ..tight };
        let a = check_a1(sys.as_ref(), &pts, &seq, tight).unwrap().verdict;
        let b = check_a1(sys.as_ref(), &pts, &seq, loose).unwrap().verdict;
        if a == A1Verdict::Extends {
            prop_assert_eq!(b, A1Verdict::Extends);
        }
    }
}
