//! Reduced-order models on the slow manifold, full-system simulation and the
//! synchronization check.

use crate::decomposition::{default_eps_sequence, inertial_decouple};
use crate::error::{Result, SfdError};
use crate::integrate::{integrate, IntegratorOptions, Method, Trajectory};
use crate::linalg::{inf_norm, mat_inf_norm, Factored};
use crate::sampling::DomainSampler;
use crate::scalar::Scalar;
use crate::slow_manifold::SlowManifoldChart;
use crate::system::{MechanicalSystem, PhasePoint};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReducedForm {
    MassNormalized,
    MassMultiplied,
}

/// Reduced second-order model `xdd = R(x, xd, t)` at truncation order 0 or 1.
#[derive(Clone)]
pub struct ReducedModel<T: Scalar> {
    pub chart: SlowManifoldChart<T>,
    pub order: usize,
    pub form: ReducedForm,
    pub eps: T,
}

/// Builds the reduced model; the mass-multiplied form requires `M1` to
/// extend smoothly to `eps = 0`.
pub fn build_reduced<T: Scalar>(chart: SlowManifoldChart<T>, order: usize, form: ReducedForm) -> Result<ReducedModel<T>> {
    if order > 1 {
        return Err(SfdError::InvalidArgument(format!("reduced-model order must be 0 or 1, got {order}")));
    }
    if form == ReducedForm::MassMultiplied {
        check_m1_smooth(chart.system())?;
    }
    let eps = chart.eps;
    Ok(ReducedModel { chart, order, form, eps })
}

fn m1_at<T: Scalar>(sys: &dyn MechanicalSystem<T>, x: &DVector<T>, eta: &DVector<T>, t: T, eps: T) -> Result<DMatrix<T>> {
    let f = sys.partition().f();
    let p = PhasePoint::at_rest(x, &DVector::zeros(x.len()), eta, t);
    debug_assert_eq!(eta.len(), f);
    Ok(inertial_decouple(sys, &p, eps)?.m1)
}

/// `M1(x, eta, t; 0)` by quadratic extrapolation in eps.
pub fn m1_limit<T: Scalar>(sys: &dyn MechanicalSystem<T>, x: &DVector<T>, eta: &DVector<T>, t: T) -> Result<DMatrix<T>> {
    let h = T::lit(1e-3) * sys.eps_nominal().min(T::one());
    let e = [h / T::lit(4.0), h / T::lit(2.0), h];
    let v: Vec<DMatrix<T>> = e.iter().map(|&ei| m1_at(sys, x, eta, t, ei)).collect::<Result<_>>()?;
    let l = |i: usize, j: usize, k: usize| e[j] * e[k] / ((e[i] - e[j]) * (e[i] - e[k]));
    Ok(&v[0] * l(0, 1, 2) + &v[1] * l(1, 0, 2) + &v[2] * l(2, 0, 1))
}

/// Contraction test on `M1(eps_k)` over a small random sample.
pub fn check_m1_smooth<T: Scalar>(sys: &dyn MechanicalSystem<T>) -> Result<()> {
    let pts = DomainSampler::default().phase_points::<T>(&sys.domain(), 20);
    let seq: Vec<T> = default_eps_sequence().into_iter().map(T::lit).collect();
    for p in &pts {
        let ms: Vec<DMatrix<f64>> = seq
            .iter()
            .map(|&e| m1_at(sys, &p.x, &p.eta, p.t, e).map(|m| m.map(|v| v.f64())))
            .collect::<Result<_>>()?;
        let scale = 1.0 + ms.iter().map(mat_inf_norm).fold(0.0, f64::max);
        let tiny = |d: f64| d <= 1e-12 * scale;
        let d: Vec<f64> = ms.windows(2).map(|w| mat_inf_norm(&(&w[0] - &w[1]))).collect();
        let grows = mat_inf_norm(&ms[ms.len() - 1]) >= 10.0 * mat_inf_norm(&ms[0]).max(1e-6 * scale);
        let contracts = d.windows(2).all(|w| tiny(w[0]) || tiny(w[1]) || w[0] / w[1] >= 1.8);
        if grows || !contracts {
            return Err(SfdError::M1NotSmooth);
        }
    }
    Ok(())
}

impl<T: Scalar> ReducedModel<T> {
    pub fn system(&self) -> &dyn MechanicalSystem<T> {
        self.chart.system()
    }

    /// Slow acceleration.
    pub fn rhs(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<DVector<T>> {
        let c = self.chart.core(x, xd, t)?;
        let mut a = c.p1.clone();
        if self.order >= 1 {
            let g1 = self.chart.g1(x, xd, t)?;
            let h0 = self.chart.h0(x, xd, t)?;
            let j = &c.jac.p1;
            let corr = &j.deta * g1 + &j.dyd * h0 + &j.deps;
            a += corr * self.eps;
        }
        Ok(a)
    }

    /// Mass-multiplied form: `(M1(x, G0, t; 0), M1 xdd)`.
    pub fn mass_multiplied(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<(DMatrix<T>, DVector<T>)> {
        let eta = self.chart.g0(x, xd, t)?;
        let m1 = m1_limit(self.system(), x, &eta, t)?;
        let a = self.rhs(x, xd, t)?;
        let f = &m1 * a;
        Ok((m1, f))
    }

    /// First-order form on `(x, xd)`.
    pub fn first_order(&self, t: T, z: &DVector<T>) -> Result<DVector<T>> {
        let s = z.len() / 2;
        let x = z.rows(0, s).into_owned();
        let xd = z.rows(s, s).into_owned();
        let a = match self.form {
            ReducedForm::MassNormalized => self.rhs(&x, &xd, t)?,
            ReducedForm::MassMultiplied => {
                let (m1, f) = self.mass_multiplied(&x, &xd, t)?;
                crate::linalg::solve_block(&m1, &f, "M1")?
            }
        };
        Ok(crate::linalg::concat(&[&xd, &a]))
    }

    pub fn simulate(&self, x0: &DVector<T>, xd0: &DVector<T>, t_eval: &[T], opts: &IntegratorOptions) -> Result<Trajectory<T>> {
        let z0 = crate::linalg::concat(&[x0, xd0]);
        let mut g = |t: T, z: &DVector<T>| self.first_order(t, z);
        let mut o = *opts;
        o.interval = o.interval.or(self.system().time_dependence().interval());
        integrate(&mut g, &z0, t_eval, &o)
    }
}

/// First-order form of the full equations `M qdd = F` in unscaled
/// coordinates `z = (x, xd, y, yd)`.
pub fn full_rhs<T: Scalar>(sys: &dyn MechanicalSystem<T>, eps: T, t: T, z: &DVector<T>) -> Result<DVector<T>> {
    let n = sys.partition().n;
    let s = sys.partition().s;
    let f = n - s;
    let pos = crate::linalg::concat(&[&z.rows(0, s).into_owned(), &z.rows(2 * s, f).into_owned()]);
    let vel = crate::linalg::concat(&[&z.rows(s, s).into_owned(), &z.rows(2 * s + f, f).into_owned()]);
    let m = sys.mass(&pos, t, eps);
    let force = sys.force(&pos, &vel, t, eps);
    let lu = Factored::new(&m);
    let acc = lu.solve(&force).ok_or(SfdError::SingularMass {
        cond: lu.pivot_ratio.f64(),
    })?;
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, s).copy_from(&vel.rows(0, s));
    out.rows_mut(s, s).copy_from(&acc.rows(0, s));
    out.rows_mut(2 * s, f).copy_from(&vel.rows(s, f));
    out.rows_mut(2 * s + f, f).copy_from(&acc.rows(s, f));
    Ok(out)
}

/// Integrates the full system from `z0 = (x, xd, y, yd)`.
pub fn simulate_full<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    eps: T,
    z0: &DVector<T>,
    t_eval: &[T],
    opts: &IntegratorOptions,
) -> Result<Trajectory<T>> {
    let mut g = |t: T, z: &DVector<T>| full_rhs(sys, eps, t, z);
    let mut o = *opts;
    o.interval = o.interval.or(sys.time_dependence().interval());
    integrate(&mut g, z0, t_eval, &o)
}

/// Splits a full state into `(x, xd, y, yd)`.
pub fn split_state<T: Scalar>(z: &DVector<T>, s: usize) -> (DVector<T>, DVector<T>, DVector<T>, DVector<T>) {
    let f = z.len() / 2 - s;
    (
        z.rows(0, s).into_owned(),
        z.rows(s, s).into_owned(),
        z.rows(2 * s, f).into_owned(),
        z.rows(2 * s + f, f).into_owned(),
    )
}

/// Distance of each full-trajectory state from the chart.
pub fn distance_series<T: Scalar>(chart: &SlowManifoldChart<T>, full: &Trajectory<T>) -> Result<Vec<f64>> {
    let s = chart.system().partition().s;
    full.times
        .iter()
        .zip(&full.states)
        .map(|(&t, z)| {
            let (x, xd, y, yd) = split_state(z, s);
            chart.manifold_distance(&x, &xd, &y, &yd, t).map(|d| d.f64())
        })
        .collect()
}

/// Deviation of a full trajectory started on the chart from the chart.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InvarianceResidual {
    /// Largest distance after the initial fast layer.
    pub sup_distance: f64,
    /// Largest fast-position deviation over the whole horizon.
    pub sup_position: f64,
    /// Largest distance including the initial layer.
    pub sup_distance_with_layer: f64,
    pub layer: f64,
}

/// Lifts `(x0, xd0)` onto the chart at `t0`, integrates the full system over
/// `horizon` and measures how far the trajectory leaves the chart. The layer
/// `[t0, t0 + 25 eps / lambda]` is excluded from `sup_distance`: an O(d)
/// position mismatch excites an O(d / eps) fast-velocity transient there.
pub fn invariance_residual<T: Scalar>(
    chart: &SlowManifoldChart<T>,
    x0: &DVector<T>,
    xd0: &DVector<T>,
    t0: f64,
    horizon: f64,
    lambda: f64,
    opts: &IntegratorOptions,
) -> Result<InvarianceResidual> {
    let sys = chart.system();
    let s = sys.partition().s;
    let eps = chart.eps;
    let layer = (25.0 * eps.f64() / lambda).min(0.5 * horizon);
    let z0 = chart.lift_state(x0, xd0, T::lit(t0))?;
    let grid = crate::integrate::linspace(T::lit(t0), T::lit(t0 + horizon), 400);
    let tr = simulate_full(sys, eps, &z0, &grid, opts)?;
    let mut r = InvarianceResidual {
        sup_distance: 0.0,
        sup_position: 0.0,
        sup_distance_with_layer: 0.0,
        layer,
    };
    for (&t, z) in tr.times.iter().zip(&tr.states) {
        let (x, xd, y, yd) = split_state(z, s);
        let (ly, lyd) = chart.lift(&x, &xd, t)?;
        let dy = (y - ly).norm().f64();
        let d = dy.hypot((yd - lyd).norm().f64());
        r.sup_position = r.sup_position.max(dy);
        r.sup_distance_with_layer = r.sup_distance_with_layer.max(d);
        if t.f64() >= t0 + layer {
            r.sup_distance = r.sup_distance.max(d);
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy)]
pub struct SyncOptions {
    pub snap_tol: f64,
    pub full: IntegratorOptions,
    pub reduced: IntegratorOptions,
    /// Output spacing; defaults to the smaller of `eps / (10 Lambda)` and a hundredth of the characteristic period.
    pub dt: Option<f64>,
    pub max_points: usize,
    pub rate_factor: f64,
    pub min_points: usize,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self {
            snap_tol: 1e-5,
            full: IntegratorOptions::default()
                .with_method(Method::AdaptiveImplicit)
                .with_tolerances(1e-10, 1e-13),
            reduced: IntegratorOptions::default().with_tolerances(1e-11, 1e-14),
            dt: None,
            max_points: 20_000,
            rate_factor: 0.8,
            min_points: 5,
        }
    }
}

/// Outcome of the synchronization experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SyncReport {
    pub rate: Option<f64>,
    pub bound: f64,
    pub lambda: f64,
    pub eps: f64,
    pub verdict: SyncVerdict,
    pub window: Option<[f64; 2]>,
    pub t_snap: f64,
    pub snap_distance: f64,
    pub window_points: usize,
    /// Whether the error envelope equals the raw error inside the window.
    pub monotone: bool,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub errors: Vec<f64>,
    #[serde(skip)]
    pub distances: Vec<f64>,
    #[serde(skip)]
    pub full_times: Vec<f64>,
}

impl SyncReport {
    /// Largest error in each of `n` equal slices of the backward window
    /// `[t_back, t_snap)`, in time order. Empty if the window has fewer than
    /// `n` points.
    pub fn bin_maxima(&self, n: usize) -> Vec<f64> {
        let m = self.times.iter().take_while(|&&t| t < self.t_snap).count();
        if n == 0 || m < n {
            return Vec::new();
        }
        (0..n)
            .map(|b| self.errors[b * m / n..(b + 1) * m / n].iter().cloned().fold(0.0, f64::max))
            .collect()
    }
}

/// Full trajectory, reduced trajectory aligned to the same times and the
/// synchronization report.
pub struct SyncRun<T: Scalar> {
    pub full: Trajectory<T>,
    pub reduced: Trajectory<T>,
    pub report: SyncReport,
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Integrates the full system, snaps onto the manifold, runs the reduced
/// model forward and backward from the snap instant and fits the decay rate
/// of the slow-coordinate error.
pub fn synchronize<T: Scalar>(
    reduced: &ReducedModel<T>,
    lambda: f64,
    z0: &DVector<T>,
    t_span: (f64, f64),
    opts: &SyncOptions,
) -> Result<SyncRun<T>> {
    let sys = reduced.system();
    let s = sys.partition().s;
    let eps = reduced.eps.f64();
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(SfdError::InvalidArgument("t_span must be increasing".into()));
    }
    let period = sys.time_dependence().characteristic_period();
    let dt = opts
        .dt
        .unwrap_or((0.1 * eps / lambda.max(1e-300)).min(period / 100.0))
        .max((t1 - t0) / opts.max_points as f64);
    let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let grid: Vec<T> = crate::integrate::linspace(T::lit(t0), T::lit(t1), n);
    let full = simulate_full(sys, reduced.eps, z0, &grid, &opts.full)?;
    let dist = distance_series(&reduced.chart, &full)?;
    let k = match dist.iter().position(|&d| d < opts.snap_tol) {
        Some(k) => k,
        None => {
            return Err(SfdError::NoApproach {
                snap_tol: opts.snap_tol,
                min_distance: dist.iter().cloned().fold(f64::INFINITY, f64::min),
            })
        }
    };
    let t_snap = grid[k].f64();
    let (xs, xds, _, _) = split_state(&full.states[k], s);
    let t_back = (t_snap - period).max(t0);
    let j = grid.iter().position(|t| t.f64() >= t_back - 1e-12 * (1.0 + t_back.abs())).unwrap_or(0).min(k);

    let fwd = reduced.simulate(&xs, &xds, &grid[k..], &opts.reduced)?;
    let back_grid: Vec<T> = grid[j..=k].iter().rev().copied().collect();
    let back = if back_grid.len() > 1 {
        Some(reduced.simulate(&xs, &xds, &back_grid, &opts.reduced)?.into_increasing())
    } else {
        None
    };
    let mut red_times: Vec<T> = Vec::new();
    let mut red_states: Vec<DVector<T>> = Vec::new();
    if let Some(b) = &back {
        red_times.extend_from_slice(&b.times[..b.times.len() - 1]);
        red_states.extend(b.states[..b.states.len() - 1].iter().cloned());
    }
    red_times.extend_from_slice(&fwd.times);
    red_states.extend(fwd.states.iter().cloned());

    let times: Vec<f64> = red_times.iter().map(|t| t.f64()).collect();
    let errors: Vec<f64> = (0..red_times.len())
        .map(|i| {
            let zf = &full.states[j + i];
            let zr = &red_states[i];
            let mut e2 = 0.0;
            for c in 0..2 * s {
                e2 += (zf[c] - zr[c]).f64().powi(2);
            }
            e2.sqrt()
        })
        .collect();

    let size = full.states.iter().map(|z| inf_norm(&z.map(|v| v.f64()))).fold(0.0, f64::max);
    let roundoff = T::eps_mach().f64() * (1.0 + size);
    let bound = lambda / eps;
    let snap_i = k - j;

    let (rate, window, points, monotone) = fit_rate(&times, &errors, snap_i, roundoff);
    let verdict = if snap_i == 0 {
        // already on the manifold: nothing to synchronize
        SyncVerdict::Pass
    } else {
        match rate {
            None => SyncVerdict::Inconclusive,
            Some(_) if points < opts.min_points => SyncVerdict::Inconclusive,
            Some(r) if r >= opts.rate_factor * bound => SyncVerdict::Pass,
            Some(_) => SyncVerdict::Fail,
        }
    };
    let reduced_traj = Trajectory {
        times: red_times,
        states: red_states,
        method: fwd.method,
        rtol: fwd.rtol,
        atol: fwd.atol,
        stats: fwd.stats,
    };
    let report = SyncReport {
        rate: if snap_i == 0 { None } else { rate },
        bound,
        lambda,
        eps,
        verdict,
        window,
        t_snap,
        snap_distance: dist[k],
        window_points: points,
        monotone,
        times,
        errors,
        distances: dist,
        full_times: grid.iter().map(|t| t.f64()).collect(),
    };
    Ok(SyncRun {
        full,
        reduced: reduced_traj,
        report,
    })
}

/// Fits the decay rate over the backward part `[0, snap]` of the error
/// series. Returns `(rate, window, points used, envelope == raw error)`.
fn fit_rate(times: &[f64], errors: &[f64], snap: usize, roundoff: f64) -> (Option<f64>, Option<[f64; 2]>, usize, bool) {
    if snap < 2 {
        return (None, None, 0, true);
    }
    // running maximum from the right makes the envelope non-increasing
    let mut env = errors[..=snap].to_vec();
    for i in (0..snap).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    // model error over the mirrored forward window sets the floor
    let mirror_end = (2 * snap).min(errors.len() - 1);
    let e_floor = errors[snap..=mirror_end].iter().cloned().fold(0.0, f64::max);
    let floor = (1e2 * roundoff).max(10.0 * e_floor);
    let idx: Vec<usize> = (0..snap).filter(|&i| env[i] > floor).collect();
    if idx.len() < 2 {
        return (None, None, idx.len(), true);
    }
    let lo = idx[0];
    let hi = *idx.last().expect("non-empty");
    let len = hi - lo + 1;
    let trim = len / 10;
    let (a, b) = (lo + trim, hi - trim);
    if b <= a {
        return (None, Some([times[lo], times[hi]]), 0, true);
    }
    let x: Vec<f64> = times[a..=b].to_vec();
    let y: Vec<f64> = env[a..=b].iter().map(|v| v.ln()).collect();
    let slope = ls_slope(&x, &y);
    let monotone = errors[a..=b].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    (Some(-slope), Some([times[a], times[b]]), b - a + 1, monotone)
}
