use nalgebra::DVector;
use sfd_core::critical::spectral_gap;
use sfd_core::integrate::{integrate, linspace, IntegratorOptions, Method};
use sfd_core::presets::{load_preset, ParamMap, PresetId};
use sfd_core::reduced::{build_reduced, simulate_full, synchronize, ReducedForm, SyncOptions, SyncVerdict};
use sfd_core::sampling::DomainSampler;
use sfd_core::slow_manifold::SlowManifoldChart;
use sfd_core::{MechanicalSystem, SfdError};
use std::sync::Arc;

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn preset(id: PresetId, overrides: &[(&str, f64)], eps: f64) -> Arc<dyn MechanicalSystem<f64>> {
    let map: ParamMap = overrides.iter().map(|(k, x)| (k.to_string(), *x)).collect();
    load_preset::<f64>(id, None, &map, Some(eps)).unwrap().system
}

fn lambda(sys: &dyn MechanicalSystem<f64>) -> f64 {
    spectral_gap(sys, &DomainSampler::default()).unwrap().lambda
}

const METHODS: [Method; 3] = [Method::AdaptiveExplicit, Method::AdaptiveImplicit, Method::FixedReference];

#[test]
fn harmonic_oscillator_returns_after_one_period() {
    let mut g = |_t: f64, z: &DVector<f64>| Ok(DVector::from_vec(vec![z[1], -z[0]]));
    let grid = linspace(0.0, 2.0 * std::f64::consts::PI, 10);
    for m in METHODS {
        let opts = IntegratorOptions::default().with_method(m).with_tolerances(1e-8, 1e-10);
        let tr = integrate(&mut g, &DVector::from_vec(vec![1.0, 0.0]), &grid, &opts).unwrap();
        assert!((tr.last().1[0] - 1.0).abs() < 1e-6, "{m:?}: {}", tr.last().1[0]);
    }
}

#[test]
fn critically_damped_fast_system_matches_closed_form() {
    let mut g = |_t: f64, z: &DVector<f64>| Ok(DVector::from_vec(vec![z[1], -2.0 * z[1] - z[0]]));
    let grid = linspace(0.0, 5.0, 50);
    for m in METHODS {
        let opts = IntegratorOptions { fixed_step: 1e-3, ..IntegratorOptions::default() }
            .with_method(m)
            .with_tolerances(1e-11, 1e-13);
        let tr = integrate(&mut g, &DVector::from_vec(vec![1.0, 0.0]), &grid, &opts).unwrap();
        for (&t, z) in tr.times.iter().zip(&tr.states) {
            let e = (-t).exp();
            assert!((z[0] - (1.0 + t) * e).abs() < 1e-8 && (z[1] + t * e).abs() < 1e-8, "{m:?} at {t}");
        }
    }
}

#[test]
fn backward_integration_and_monotone_grid() {
    let mut g = |_t: f64, z: &DVector<f64>| Ok(z.clone());
    let tr = integrate(&mut g, &v(1.0), &[1.0, 0.5, 0.0], &IntegratorOptions::default()).unwrap();
    assert!((tr.last().1[0] - (-1.0f64).exp()).abs() < 1e-7);
    let err = integrate(&mut g, &v(1.0), &[0.0, 1.0, 0.5], &IntegratorOptions::default()).unwrap_err();
    assert!(matches!(err, SfdError::InvalidArgument(_)));
}

#[test]
fn finite_time_blowup_is_reported() {
    let mut g = |_t: f64, z: &DVector<f64>| Ok(z.map(|x| x * x));
    for m in [Method::AdaptiveExplicit, Method::AdaptiveImplicit] {
        let opts = IntegratorOptions::default().with_method(m);
        let err = integrate(&mut g, &v(1.0), &[0.0, 2.0], &opts).unwrap_err();
        assert!(
            matches!(err, SfdError::StepSizeUnderflow { .. } | SfdError::RhsFailure { .. }),
            "{m:?}: {err}"
        );
    }
}

#[test]
fn integration_outside_the_interval_is_rejected() {
    let mut g = |_t: f64, z: &DVector<f64>| Ok(z.clone());
    let opts = IntegratorOptions { interval: Some((0.0, 1.0)), ..IntegratorOptions::default() };
    let err = integrate(&mut g, &v(1.0), &[0.0, 2.0], &opts).unwrap_err();
    assert!(matches!(err, SfdError::TimeDomain { .. }));
    assert!(integrate(&mut g, &v(1.0), &[0.0, 1.0], &opts).is_ok());
}

#[test]
fn order_above_one_is_rejected() {
    let chart = SlowManifoldChart::new(preset(PresetId::LinearCoupled, &[], 1e-2), 1e-2, 1).unwrap();
    assert!(matches!(build_reduced(chart, 2, ReducedForm::MassNormalized), Err(SfdError::InvalidArgument(_))));
}

fn grid3() -> impl Iterator<Item = (f64, f64, f64)> {
    let pts = [-1.5, -0.4, 0.3, 1.2];
    pts.into_iter()
        .flat_map(move |x| pts.into_iter().flat_map(move |xd| [0.0, 1.1, 4.0].into_iter().map(move |t| (x, xd, t))))
}

#[test]
fn linear_coupled_order_zero_matches_closed_form() {
    // M1 xdd + C1 xd + K1 x + S1(x, K2^{-1}[f2(t) - S2(x, 0)]) = f1(t)
    let sys = preset(PresetId::LinearCoupled, &[], 1e-2);
    let chart = SlowManifoldChart::new(sys, 1e-2, 0).unwrap();
    let normalized = build_reduced(chart.clone(), 0, ReducedForm::MassNormalized).unwrap();
    let multiplied = build_reduced(chart, 0, ReducedForm::MassMultiplied).unwrap();
    for (x, xd, t) in grid3() {
        let g0 = 0.5 * t.sin() - x * x;
        let exact = 0.2 * t.sin() - 0.2 * xd - x - (0.5 * x * g0 + 0.2 * g0 * g0);
        assert!((normalized.rhs(&v(x), &v(xd), t).unwrap()[0] - exact).abs() < 1e-10);
        let (m1, f) = multiplied.mass_multiplied(&v(x), &v(xd), t).unwrap();
        assert!((m1[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((f[0] - exact).abs() < 1e-9);
        let z = DVector::from_vec(vec![x, xd]);
        let a = multiplied.first_order(t, &z).unwrap();
        assert!((a[1] - exact).abs() < 1e-9 && a[0] == xd);
    }
}

#[test]
fn soft_coupling_uncouples_the_reduced_model() {
    // M1 xdd + C1 xd + K1 x + S1(x, 0) = f1(t)
    let sys = preset(PresetId::LinearCoupled, &[("s1_soft", 1.0), ("s1_xx", 0.7)], 1e-2);
    let red = build_reduced(SlowManifoldChart::new(sys, 1e-2, 0).unwrap(), 0, ReducedForm::MassNormalized).unwrap();
    for (x, xd, t) in grid3() {
        let exact = 0.2 * t.sin() - 0.2 * xd - x - 0.7 * x * x;
        assert!((red.rhs(&v(x), &v(xd), t).unwrap()[0] - exact).abs() < 1e-10);
    }
}

#[test]
fn lift_matches_leading_order_closed_form() {
    let eps = 1e-3;
    let chart = SlowManifoldChart::new(preset(PresetId::LinearCoupled, &[], eps), eps, 1).unwrap();
    for (x, xd, t) in grid3() {
        let z = chart.lift_state(&v(x), &v(xd), t).unwrap();
        assert_eq!((z[0], z[1]), (x, xd));
        let y = eps * (0.5 * t.sin() - x * x);
        let yd = eps * (0.5 * t.cos() - 2.0 * x * xd);
        assert!((z[2] - y).abs() < 50.0 * eps * eps && (z[3] - yd).abs() < 50.0 * eps * eps);
    }
}

#[test]
fn order_one_beats_order_zero_without_slow_damping() {
    let eps = 1e-2;
    let sys = preset(PresetId::LinearCoupled, &[("c1", 0.0)], eps);
    let chart = SlowManifoldChart::new(sys.clone(), eps, 1).unwrap();
    let (x0, xd0) = (v(0.5), v(0.3));
    let z0 = chart.lift_state(&x0, &xd0, 0.0).unwrap();
    let grid = linspace(0.0, 10.0, 200);
    let stiff = IntegratorOptions::default()
        .with_method(Method::AdaptiveImplicit)
        .with_tolerances(1e-11, 1e-14);
    let full = simulate_full(sys.as_ref(), eps, &z0, &grid, &stiff).unwrap();
    let sup_err = |order: usize| {
        let red = build_reduced(chart.clone(), order, ReducedForm::MassNormalized).unwrap();
        let tr = red.simulate(&x0, &xd0, &grid, &IntegratorOptions::default().with_tolerances(1e-11, 1e-14)).unwrap();
        full.states.iter().zip(&tr.states).map(|(f, r)| (f[0] - r[0]).hypot(f[1] - r[1])).fold(0.0, f64::max)
    };
    let (e0, e1) = (sup_err(0), sup_err(1));
    assert!(e1 <= 0.5 * e0, "order 0 {e0:e}, order 1 {e1:e}");
}

#[test]
fn lifted_start_synchronizes_trivially() {
    let eps = 1e-2;
    let sys = preset(PresetId::LinearCoupled, &[], eps);
    let lam = lambda(sys.as_ref());
    let chart = SlowManifoldChart::new(sys, eps, 1).unwrap();
    let z0 = chart.lift_state(&v(0.5), &v(0.3), 0.0).unwrap();
    let red = build_reduced(chart, 1, ReducedForm::MassNormalized).unwrap();
    let run = synchronize(&red, lam, &z0, (0.0, 1.0), &SyncOptions::default()).unwrap();
    assert_eq!(run.report.verdict, SyncVerdict::Pass);
    assert_eq!(run.report.t_snap, 0.0);
}

#[test]
fn perturbed_fast_data_synchronizes_at_the_spectral_rate() {
    for (id, eps) in [(PresetId::LinearCoupled, 1e-3), (PresetId::FoldDemo, 1e-2), (PresetId::FoldDemo, 1e-3)] {
        let sys = preset(id, &[], eps);
        let lam = lambda(sys.as_ref());
        let chart = SlowManifoldChart::new(sys, eps, 1).unwrap();
        let mut z0 = chart.lift_state(&v(0.3), &v(0.2), 0.0).unwrap();
        z0[3] += 0.5;
        let red = build_reduced(chart, 1, ReducedForm::MassNormalized).unwrap();
        let run = synchronize(&red, lam, &z0, (0.0, 300.0 * eps), &SyncOptions::default()).unwrap();
        let r = &run.report;
        assert_eq!(r.verdict, SyncVerdict::Pass, "{id} eps {eps}: rate {:?} bound {}", r.rate, r.bound);
        assert!(r.rate.unwrap() >= 0.8 * lam / eps);
        assert!(run.full.times.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn no_approach_is_an_error() {
    let eps = 1e-2;
    let sys = preset(PresetId::LinearCoupled, &[], eps);
    let lam = lambda(sys.as_ref());
    let chart = SlowManifoldChart::new(sys, eps, 1).unwrap();
    let mut z0 = chart.lift_state(&v(0.5), &v(0.3), 0.0).unwrap();
    z0[3] += 1.0;
    let red = build_reduced(chart, 1, ReducedForm::MassNormalized).unwrap();
    let err = synchronize(&red, lam, &z0, (0.0, 2.0 * eps), &SyncOptions::default()).err().unwrap();
    assert!(matches!(err, SfdError::NoApproach { .. }), "{err}");
}

#[test]
fn single_precision_smoke() {
    let sys = load_preset::<f32>(PresetId::LinearCoupled, None, &ParamMap::new(), Some(1e-2)).unwrap().system;
    let chart = SlowManifoldChart::<f32>::new(sys, 1e-2, 1).unwrap();
    let x = DVector::from_element(1, 0.3f32);
    let xd = DVector::from_element(1, 0.7f32);
    let g0 = chart.g0(&x, &xd, 1.1).unwrap()[0];
    assert!((g0 - (0.5 * 1.1f32.sin() - 0.09)).abs() < 1e-5);
    let red = build_reduced(chart, 1, ReducedForm::MassNormalized).unwrap();
    let tr = red
        .simulate(&x, &xd, &linspace(0.0f32, 1.0, 10), &IntegratorOptions::default().with_tolerances(1e-5, 1e-6))
        .unwrap();
    assert!(tr.states.iter().all(|z| z.iter().all(|c| c.is_finite())));
}
