//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfd_core::critical::{solve_critical_point, spectral_gap};
use sfd_core::decomposition::DecoupledForm;
use sfd_core::fold::{locate_fold, FoldOptions, SlowPath};
use sfd_core::integrate::{IntegratorOptions, Method};
use sfd_core::local::{compare_reductions, local_expansion, ssm_cubic, LocalOptions, SsmParams};
use sfd_core::presets::{
    load_preset, pendulum_params, pendulum_reference_state, two_dof_params, ParamMap, PendulumMode, Pendulum3,
    PresetId,
};
use sfd_core::reduced::{
    build_reduced, distance_series, invariance_residual, simulate_full, synchronize, ReducedForm, SyncOptions,
    SyncVerdict,
};
use sfd_core::sampling::{DomainSampler, SlowSample};
use sfd_core::slow_manifold::SlowManifoldChart;
use sfd_core::MechanicalSystem;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn preset(id: PresetId, overrides: &[(&str, f64)], eps: Option<f64>) -> Arc<dyn MechanicalSystem<f64>> {
    let map: ParamMap = overrides.iter().map(|(k, x)| (k.to_string(), *x)).collect();
    load_preset::<f64>(id, None, &map, eps).expect("preset").system
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

fn criterion_1() -> Outcome {
    let sys = preset(PresetId::LinearCoupled, &[], None);
    let dom = sys.domain();
    // K2 = 1, f2(t) = 0.5 sin t, S2(x, 0) = x^2
    let oracle = |x: f64, t: f64| 0.5 * t.sin() - x * x;
    let mut worst = 0.0f64;
    for x in linspace(dom.x[0].0, dom.x[0].1, 9) {
        for xd in linspace(dom.xd[0].0, dom.xd[0].1, 9) {
            for t in linspace(dom.t.0, dom.t.1, 9) {
                let cp = solve_critical_point(sys.as_ref(), &v(x), &v(xd), t, &v(0.0)).map_err(|e| e.to_string())?;
                let e = oracle(x, t);
                worst = worst.max((cp.eta[0] - e).abs() / e.abs().max(1e-300));
            }
        }
    }
    ensure(worst <= 1e-10, format!("max relative error {worst:.2e} over 729 points"))
}

fn criterion_2() -> Outcome {
    let sys = preset(PresetId::FoldDemo, &[], None);
    let ss = |x: f64, t: f64| SlowSample { x: vec![x], xd: vec![0.0], t };
    let mut paths: Vec<SlowPath> = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.5]
        .iter()
        .map(|&t| SlowPath::new(ss(0.0, t), ss(2.0, t)))
        .collect();
    paths.push(SlowPath::new(ss(0.0, 0.3), ss(-1.8, 1.0)));
    paths.push(SlowPath::new(ss(1.2, std::f64::consts::FRAC_PI_2), ss(1.2, 0.0)));
    let (mut worst_locus, mut worst_eta) = (0.0f64, 0.0f64);
    for path in &paths {
        let fold = locate_fold(sys.as_ref(), path, &v(0.0), FoldOptions::default()).map_err(|e| e.to_string())?;
        let (x, t) = (fold.x[0], fold.t);
        worst_locus = worst_locus.max((x * x - 1.0 - t.sin()).abs());
        worst_eta = worst_eta.max((fold.eta[0] + 0.5).abs());
        let b = fold.branches.as_ref().ok_or("branches not classified")?;
        if !(b.plus && !b.minus) {
            return Err(format!("branch stability plus={} minus={} at x={x:.4} t={t:.4}", b.plus, b.minus));
        }
    }
    ensure(
        worst_locus <= 1e-6 && worst_eta <= 1e-6,
        format!("{} folds: locus residual {worst_locus:.2e}, |eta + 1/2| {worst_eta:.2e}, plus stable / minus unstable", paths.len()),
    )
}

fn paper_alpha_beta_gamma(p: &SsmParams) -> (f64, f64, f64) {
    let (c1, c2, k1, k2, c) = (p.c1, p.c2, p.k1, p.k2, p.c);
    let d = (c1 * c1 - c1 * c2 + k2)
        * (4.0 * c1 * c1 * k2 - 8.0 * c1 * c2 * k1 - 2.0 * c1 * c2 * k2 + 4.0 * c2 * c2 * k1 + 16.0 * k1 * k1
            - 8.0 * k1 * k2
            + k2 * k2);
    let alpha = -c / d
        * (4.0 * c1.powi(4) - 6.0 * c1.powi(3) * c2 + 2.0 * c1 * c1 * c2 * c2 + 5.0 * c1 * c1 * k2
            - c1 * c2 * (2.0 * k1 + 3.0 * k2)
            + 2.0 * c2 * c2 * k1
            + 8.0 * k1 * k1
            - 6.0 * k1 * k2
            + k2 * k2);
    let beta = -2.0 * c / d * (4.0 * c1 * k1 + k2 * (c1 - c2) + 2.0 * c1 * c2 * c2 - 6.0 * c1 * c1 * c2 + 4.0 * c1.powi(3));
    let gamma = -2.0 * c / d * (2.0 * c1 * c1 - 3.0 * c1 * c2 + c2 * c2 + 4.0 * k1 - k2);
    (alpha, beta, gamma)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let (mut worst, mut n) = (0.0f64, 0);
    while n < 500 {
        let p = SsmParams {
            c1: rng.gen_range(0.0..1.0),
            c2: rng.gen_range(0.0..2.0),
            k1: rng.gen_range(0.2..2.0),
            k2: rng.gen_range(0.5..12.0),
            a: rng.gen_range(-2.0..2.0),
            b: rng.gen_range(-2.0..2.0),
            c: rng.gen_range(-2.0..2.0),
            mu1: rng.gen_range(-1.0..1.0),
        };
        let (a, b, g) = paper_alpha_beta_gamma(&p);
        let m = match ssm_cubic(p) {
            Ok(m) if m.d.abs() > 1e-4 => m,
            _ => continue,
        };
        worst = worst.max(rel(m.alpha, a)).max(rel(m.beta, b)).max(rel(m.gamma, g));
        n += 1;
    }
    let mut worst_cons = 0.0f64;
    for &(k1, k2, a, b, c) in &[(1.0, 8.0, 1.0, 1.0, 1.0), (1.0, 4.4, 1.0, 1.0, 1.0), (0.7, 9.5, -0.3, 2.0, 1.4), (2.0, 3.0, 1.1, -0.5, 0.8)] {
        let p = SsmParams { c1: 0.0, c2: 0.0, k1, k2, a, b, c, mu1: 0.0 };
        let m = ssm_cubic(p).map_err(|e| e.to_string())?;
        let exact = b - a * c * (2.0 * k1 - k2) / (k2 * (4.0 * k1 - k2));
        worst_cons = worst_cons.max(rel(m.cubic, exact));
    }
    ensure(
        worst <= 1e-10 && worst_cons <= 1e-10,
        format!("500 draws: max relative error {worst:.2e}; conservative cubic {worst_cons:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let overrides = [("f2_amp", 0.0), ("f2_bias", 0.0)];
    let sys = preset(PresetId::LinearCoupled, &overrides, None);
    let exp = local_expansion(sys.as_ref(), 0.0, LocalOptions::default()).map_err(|e| e.to_string())?;
    let (gamma, phi, theta) = (exp.gamma[0], exp.phi[(0, 0)], exp.theta[0][(0, 0)]);
    // Taylor coefficient of the chart's G0 by central second differences
    let chart = SlowManifoldChart::new(sys.clone(), 1e-2, 0).map_err(|e| e.to_string())?;
    let g0 = |x: f64| chart.g0(&v(x), &v(0.0), 0.0).map(|g| g[0]).map_err(|e| e.to_string());
    let h = 1e-3;
    let fd = (g0(h)? - 2.0 * g0(0.0)? + g0(-h)?) / (2.0 * h * h);
    // -K2^{-1} d2S2/dx2 with the one-half of the quadratic form: S2 = x^2, K2 = 1
    let formula = -0.5 * 2.0;
    let ok = gamma.abs() <= 1e-10 && phi.abs() <= 1e-10 && (theta - fd).abs() <= 1e-6 && (theta - formula).abs() <= 1e-6;
    ensure(ok, format!("Gamma {gamma:.1e}, Phi {phi:.1e}, Theta {theta:.9} vs Taylor {fd:.9} vs formula {formula}"))
}

fn criterion_5() -> Outcome {
    let base = two_dof_params(
        &load_preset::<f64>(PresetId::TwoDofSsm, None, &ParamMap::new(), None).map_err(|e| e.to_string())?.params,
    );
    let opts = IntegratorOptions::default();
    let t: Vec<f64> = linspace(0.0, 1.0, 11).collect();
    let gap = |k2: f64| -> Result<f64, String> {
        let p = sfd_core::presets::TwoDofParams { k1: 1.0, a: 1.0, b: 1.0, c: 1.0, k2, ..base };
        Ok(compare_reductions(p, 0.1, 0.0, &t, &opts).map_err(|e| e.to_string())?.gap)
    };
    let (far, near) = (gap(8.0)?, gap(4.4)?);
    let ratio = near / far;
    ensure(ratio >= 10.0, format!("gap {far:.4} at k2 = 8, {near:.4} at k2 = 4.4, ratio {ratio:.2}"))
}

fn criterion_6() -> Outcome {
    let opts = IntegratorOptions::default()
        .with_method(Method::AdaptiveImplicit)
        .with_tolerances(1e-11, 1e-15);
    let eps_list = [1e-2, 5e-3, 2.5e-3];
    let mut lines = Vec::new();
    let mut ok = true;
    for id in [PresetId::LinearCoupled, PresetId::FoldDemo] {
        let nominal = preset(id, &[], None);
        let lambda = spectral_gap(nominal.as_ref(), &DomainSampler::default()).map_err(|e| e.to_string())?.lambda;
        for (order, lo, hi) in [(1usize, 5.0, 11.0), (0, 2.8, 5.5)] {
            let mut dist = Vec::new();
            let mut pos = Vec::new();
            for &eps in &eps_list {
                let sys = preset(id, &[], Some(eps));
                // default guess selects the plus branch of fold-demo
                let chart = SlowManifoldChart::new(sys, eps, order).map_err(|e| e.to_string())?;
                let r = invariance_residual(&chart, &v(0.4), &v(0.2), 0.5, 1.0, lambda, &opts).map_err(|e| e.to_string())?;
                dist.push(r.sup_distance);
                pos.push(r.sup_position);
            }
            let ratios: Vec<f64> = dist.windows(2).chain(pos.windows(2)).map(|w| w[0] / w[1]).collect();
            ok &= ratios.iter().all(|r| (lo..=hi).contains(r));
            lines.push(format!(
                "{id} order {order}: distance ratios {:.2}, {:.2}; position ratios {:.2}, {:.2}",
                ratios[0], ratios[1], ratios[2], ratios[3]
            ));
        }
    }
    ensure(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let eps = 1e-2;
    let sys = preset(PresetId::LinearCoupled, &[], Some(eps));
    let lambda = spectral_gap(sys.as_ref(), &DomainSampler::default()).map_err(|e| e.to_string())?.lambda;
    let chart = SlowManifoldChart::new(sys, eps, 1).map_err(|e| e.to_string())?;
    let mut z0 = chart.lift_state(&v(0.5), &v(0.3), 0.0).map_err(|e| e.to_string())?;
    z0[3] += 1.0;
    let red = build_reduced(chart, 1, ReducedForm::MassNormalized).map_err(|e| e.to_string())?;
    let run = synchronize(&red, lambda, &z0, (0.0, 3.0), &SyncOptions::default()).map_err(|e| e.to_string())?;
    let r = &run.report;
    let rate = r.rate.ok_or("no rate fitted")?;
    ensure(
        r.verdict == SyncVerdict::Pass && rate >= 0.8 * lambda / eps,
        format!("rate {rate:.2} vs 0.8 Lambda/eps = {:.2} (Lambda {lambda:.4}), snap at t = {:.3}", 0.8 * lambda / eps, r.t_snap),
    )
}

/// Full state `(x, xd, y, yd)` of the reference initial condition.
fn pendulum_initial(mode: PendulumMode, sys: &Pendulum3) -> DVector<f64> {
    DVector::from_vec(sys.full_state(&pendulum_reference_state(mode)))
}

fn criterion_8() -> Outcome {
    let p = load_preset::<f64>(PresetId::Pendulum3, Some("soft-soft-stiff"), &ParamMap::new(), None).map_err(|e| e.to_string())?;
    let mode = PendulumMode::SoftSoftStiff;
    let phys = Pendulum3::new(mode, pendulum_params(&p.params), p.eps);
    let wp = phys.params.time_scale();
    let z0 = pendulum_initial(mode, &phys);
    let chart = SlowManifoldChart::new(p.system.clone(), p.eps, 0).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = linspace(0.0, 25.0 * wp, 2001).collect();
    let opts = IntegratorOptions::default()
        .with_method(Method::AdaptiveImplicit)
        .with_tolerances(1e-10, 1e-13);
    let tr = simulate_full(p.system.as_ref(), p.eps, &z0, &grid, &opts).map_err(|e| e.to_string())?;
    let d = distance_series(&chart, &tr).map_err(|e| e.to_string())?;
    let sup = |a: f64, b: f64| {
        grid.iter()
            .zip(&d)
            .filter(|(t, _)| (a..=b).contains(&(**t / wp)))
            .map(|(_, x)| *x)
            .fold(0.0, f64::max)
    };
    let (initial, near16, later) = (d[0], sup(15.6, 16.0), sup(16.0, 25.0));
    ensure(
        initial > 1e-2 && near16 < 1e-4,
        format!("distance {initial:.2e} at t = 0, max {near16:.2e} over t in [15.6, 16] s (max {later:.2e} over [16, 25] s)"),
    )
}

fn criterion_9() -> Outcome {
    let p = load_preset::<f64>(PresetId::Pendulum3, Some("stiff-stiff-soft"), &ParamMap::new(), None).map_err(|e| e.to_string())?;
    let mode = PendulumMode::StiffStiffSoft;
    let phys = Pendulum3::new(mode, pendulum_params(&p.params), p.eps);
    let pp = &phys.params;
    // m l^2 xdd + c_p xd + m g l sin x = f_p l in time scaled by omega_p
    let damping = pp.c_p_coef * (pp.l_spring / pp.l).powi(2);
    let gp = |t: f64| pp.fp_amp / (pp.m_bob * pp.g) * t.sin();
    let chart = SlowManifoldChart::new(p.system.clone(), p.eps, 0).map_err(|e| e.to_string())?;
    let red = build_reduced(chart, 0, ReducedForm::MassNormalized).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for x in linspace(-2.0, 2.0, 9) {
        for xd in linspace(-2.0, 2.0, 9) {
            for t in linspace(0.0, 2.0 * std::f64::consts::PI, 9) {
                let r = red.rhs(&v(x), &v(xd), t).map_err(|e| e.to_string())?[0];
                worst = worst.max((r - (-damping * xd - x.sin() + gp(t))).abs());
            }
        }
    }
    let lambda = spectral_gap(p.system.as_ref(), &DomainSampler::default()).map_err(|e| e.to_string())?.lambda;
    let z0 = pendulum_initial(mode, &phys);
    let opts = SyncOptions { dt: Some(0.02), ..SyncOptions::default() };
    let run = synchronize(&red, lambda, &z0, (0.0, 20.0 * pp.time_scale()), &opts).map_err(|e| e.to_string())?;
    let r = &run.report;
    let maxima = r.bin_maxima(6);
    let decreasing = maxima.windows(2).all(|w| w[1] < w[0]);
    ensure(
        worst <= 1e-8 && decreasing && maxima.len() == 6,
        format!(
            "rhs error {worst:.2e} on 729 points; snap at t = {:.2}, error maxima per sixth of the window {}",
            r.t_snap,
            maxima.iter().map(|m| format!("{m:.1e}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(2..=8);
        let s = rng.gen_range(1..n);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let m = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
        let f = DVector::<f64>::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let direct = m.clone().lu().solve(&f).ok_or("singular mass")?;
        let form = DecoupledForm::from_blocks(&m, &f, s).map_err(|e| e.to_string())?;
        let (a1, a2) = form.accelerations().map_err(|e| e.to_string())?;
        let scale = direct.amax().max(1.0f64);
        worst = worst.max((a1 - direct.rows(0, s)).amax() / scale).max((a2 - direct.rows(s, n - s)).amax() / scale);
    }
    ensure(worst <= 1e-10, format!("200 systems: max error {worst:.2e}"))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 10] = [
        ("closed-form critical manifold", 5.0, criterion_1),
        ("fold boundary", 10.0, criterion_2),
        ("SSM oracle", 5.0, criterion_3),
        ("MD/SC recovery", 10.0, criterion_4),
        ("MD failure near resonance", 5.0, criterion_5),
        ("manifold expansion order", 60.0, criterion_6),
        ("synchronization rate", 30.0, criterion_7),
        ("pendulum approach to the manifold", 120.0, criterion_8),
        ("pendulum reduced model", 120.0, criterion_9),
        ("Schur oracle", 5.0, criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(d) if secs <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget} s budget")),
            Err(d) => (false, d),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {:>2} {:<36} {} {:>7.2}s  {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            secs,
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
