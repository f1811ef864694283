//! One-step integrators for `z' = g(t, z)`: an adaptive explicit 5(4) pair,
//! an adaptive L-stable SDIRK 4(3) for stiff problems and a fixed-step
//! reference method.

use crate::error::{Result, SfdError};
use crate::linalg::{all_finite, to_f64_vec};
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AdaptiveExplicit,
    AdaptiveImplicit,
    FixedReference,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AdaptiveExplicit => "adaptive-explicit",
            Method::AdaptiveImplicit => "adaptive-implicit",
            Method::FixedReference => "fixed-reference",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    /// Upper bound on the step magnitude.
    pub h_max: f64,
    /// Step of the fixed-step reference method.
    pub fixed_step: f64,
    pub max_steps: usize,
    /// Admissible time interval (aperiodic systems).
    pub interval: Option<(f64, f64)>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveExplicit,
            rtol: 1e-8,
            atol: 1e-10,
            h0: None,
            h_max: f64::INFINITY,
            fixed_step: 1e-3,
            max_steps: 5_000_000,
            interval: None,
        }
    }
}

impl IntegratorOptions {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jacobians: usize,
    pub newton_failures: usize,
}

/// States sampled at the requested output times.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<DVector<T>>,
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub stats: StepStats,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (T, &DVector<T>) {
        (*self.times.last().expect("non-empty"), self.states.last().expect("non-empty"))
    }

    /// Reverses a backward-in-time trajectory into increasing time order.
    pub fn into_increasing(mut self) -> Self {
        if self.times.len() > 1 && self.times[1] < self.times[0] {
            self.times.reverse();
            self.states.reverse();
        }
        self
    }
}

/// `n + 1` equally spaced points from `a` to `b` (either direction).
pub fn linspace<T: Scalar>(a: T, b: T, n: usize) -> Vec<T> {
    let n = n.max(1);
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * T::lit(i as f64 / n as f64) })
        .collect()
}

struct Counter<'a, T: Scalar> {
    g: &'a mut dyn FnMut(T, &DVector<T>) -> Result<DVector<T>>,
    evals: usize,
}

impl<'a, T: Scalar> Counter<'a, T> {
    fn call(&mut self, t: T, z: &DVector<T>) -> Result<DVector<T>> {
        self.evals += 1;
        let v = (self.g)(t, z)?;
        if !all_finite(v.iter().copied()) {
            return Err(SfdError::RhsFailure {
                t: t.f64(),
                reason: "non-finite derivative".into(),
            });
        }
        Ok(v)
    }
}

/// Integrates from `t_eval[0]` through the monotone output grid `t_eval`.
pub fn integrate<T: Scalar>(
    g: &mut dyn FnMut(T, &DVector<T>) -> Result<DVector<T>>,
    z0: &DVector<T>,
    t_eval: &[T],
    opts: &IntegratorOptions,
) -> Result<Trajectory<T>> {
    if t_eval.is_empty() {
        return Err(SfdError::InvalidArgument("empty output grid".into()));
    }
    let dir = if t_eval.len() > 1 && t_eval[1] < t_eval[0] { -T::one() } else { T::one() };
    if t_eval.windows(2).any(|w| !((w[1] - w[0]) * dir > T::zero())) {
        return Err(SfdError::InvalidArgument("output times must be strictly monotone".into()));
    }
    if let Some((a, b)) = opts.interval {
        for &t in [t_eval[0], t_eval[t_eval.len() - 1]].iter() {
            let tf = t.f64();
            if tf < a || tf > b {
                return Err(SfdError::TimeDomain { t: tf, a, b });
            }
        }
    }
    if !all_finite(z0.iter().copied()) {
        return Err(SfdError::NonFinite {
            context: "initial state".into(),
        });
    }
    let mut rhs = Counter { g, evals: 0 };
    let mut out = Trajectory {
        times: vec![t_eval[0]],
        states: vec![z0.clone()],
        method: opts.method,
        rtol: opts.rtol,
        atol: opts.atol,
        stats: StepStats::default(),
    };
    match opts.method {
        Method::AdaptiveExplicit => dopri_adaptive(&mut rhs, z0, t_eval, dir, opts, &mut out)?,
        Method::AdaptiveImplicit => sdirk_adaptive(&mut rhs, z0, t_eval, dir, opts, &mut out)?,
        Method::FixedReference => fixed_reference(&mut rhs, z0, t_eval, opts, &mut out)?,
    }
    out.stats.rhs_evals = rhs.evals;
    Ok(out)
}

/// Weighted RMS norm used for error control.
fn err_norm<T: Scalar>(e: &DVector<T>, y0: &DVector<T>, y1: &DVector<T>, rtol: f64, atol: f64) -> f64 {
    if e.is_empty() {
        return 0.0;
    }
    let s: f64 = (0..e.len())
        .map(|i| {
            let sc = atol + rtol * y0[i].f64().abs().max(y1[i].f64().abs());
            (e[i].f64() / sc).powi(2)
        })
        .sum();
    (s / e.len() as f64).sqrt()
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step; returns the new state, the error vector and the
/// derivative at the new point (first-same-as-last).
fn dopri_step<T: Scalar>(
    rhs: &mut Counter<T>,
    t: T,
    y: &DVector<T>,
    k1: &DVector<T>,
    h: T,
) -> Result<(DVector<T>, DVector<T>, DVector<T>)> {
    let mut k: Vec<DVector<T>> = Vec::with_capacity(7);
    k.push(k1.clone());
    for i in 1..7 {
        let mut yi = y.clone();
        for (j, kj) in k.iter().enumerate().take(i) {
            let a = DP_A[i][j];
            if a != 0.0 {
                yi.axpy(h * T::lit(a), kj, T::one());
            }
        }
        k.push(rhs.call(t + h * T::lit(DP_C[i]), &yi)?);
    }
    // row 6 of A holds the 5th-order weights, so the 7th stage is at y_new
    let mut y_new = y.clone();
    for (j, kj) in k.iter().enumerate().take(6) {
        y_new.axpy(h * T::lit(DP_A[6][j]), kj, T::one());
    }
    let mut err = DVector::zeros(y.len());
    for (j, kj) in k.iter().enumerate() {
        err.axpy(h * T::lit(DP_E[j]), kj, T::one());
    }
    Ok((y_new, err, k.pop().expect("seven stages")))
}

fn initial_step<T: Scalar>(
    rhs: &mut Counter<T>,
    t: T,
    y: &DVector<T>,
    f0: &DVector<T>,
    dir: T,
    order: f64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    if let Some(h) = opts.h0 {
        return Ok(h);
    }
    let zero = DVector::zeros(y.len());
    let d0 = err_norm(y, &zero, y, opts.rtol, opts.atol).max(0.0);
    let d1 = err_norm(f0, y, y, opts.rtol, opts.atol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.h_max);
    let y1 = y + f0 * (dir * T::lit(h0));
    let f1 = rhs.call(t + dir * T::lit(h0), &y1)?;
    let d2 = err_norm(&(f1 - f0), y, y, opts.rtol, opts.atol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order + 1.0))
    };
    Ok((100.0 * h0).min(h1).min(opts.h_max))
}

fn underflow<T: Scalar>(t: T, h: f64, y: &DVector<T>) -> SfdError {
    SfdError::StepSizeUnderflow {
        t: t.f64(),
        h,
        state: to_f64_vec(y),
    }
}

fn min_step<T: Scalar>(t: T) -> f64 {
    1e-14 * t.f64().abs().max(1.0)
}

fn dopri_adaptive<T: Scalar>(
    rhs: &mut Counter<T>,
    z0: &DVector<T>,
    t_eval: &[T],
    dir: T,
    opts: &IntegratorOptions,
    out: &mut Trajectory<T>,
) -> Result<()> {
    let mut t = t_eval[0];
    let mut y = z0.clone();
    if t_eval.len() == 1 {
        return Ok(());
    }
    let mut f = rhs.call(t, &y)?;
    let mut h = initial_step(rhs, t, &y, &f, dir, 4.0, opts)?;
    let mut err_prev: f64 = 1e-4;
    let mut steps = 0;
    let mut last_failure: Option<SfdError> = None;
    for &target in &t_eval[1..] {
        while (target - t) * dir > T::zero() {
            steps += 1;
            if steps > opts.max_steps {
                return Err(SfdError::TooManySteps {
                    t: t.f64(),
                    steps: opts.max_steps,
                });
            }
            if h < min_step(t) {
                return Err(last_failure.unwrap_or_else(|| underflow(t, h, &y)));
            }
            let remaining = ((target - t) * dir).f64();
            let clamped = h >= remaining;
            let hs = if clamped { remaining } else { h };
            let step = dopri_step(rhs, t, &y, &f, dir * T::lit(hs));
            let (y_new, err, f_new) = match step {
                Ok(v) => v,
                Err(e) => {
                    last_failure = Some(e);
                    out.stats.rejected += 1;
                    h = hs * 0.25;
                    continue;
                }
            };
            let en = err_norm(&err, &y, &y_new, opts.rtol, opts.atol);
            if en <= 1.0 {
                out.stats.accepted += 1;
                last_failure = None;
                t = if clamped { target } else { t + dir * T::lit(hs) };
                y = y_new;
                f = f_new;
                let fac = if en == 0.0 { 5.0 } else { 0.9 * en.powf(-0.17) * err_prev.powf(0.04) };
                let hn = hs * fac.clamp(0.2, 5.0);
                // a clamped step says nothing about the natural step length
                h = if clamped { h.max(hn) } else { hn };
                h = h.min(opts.h_max);
                err_prev = en.max(1e-4);
            } else {
                out.stats.rejected += 1;
                h = hs * (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        out.times.push(target);
        out.states.push(y.clone());
    }
    Ok(())
}

fn fixed_reference<T: Scalar>(
    rhs: &mut Counter<T>,
    z0: &DVector<T>,
    t_eval: &[T],
    opts: &IntegratorOptions,
    out: &mut Trajectory<T>,
) -> Result<()> {
    let mut y = z0.clone();
    for w in t_eval.windows(2) {
        let span = (w[1] - w[0]).f64();
        let n = (span.abs() / opts.fixed_step).ceil().max(1.0) as usize;
        let h = w[1] - w[0];
        let mut t = w[0];
        for i in 0..n {
            let hi = h / T::lit(n as f64);
            let f = rhs.call(t, &y)?;
            let (y_new, _, _) = dopri_step(rhs, t, &y, &f, hi)?;
            y = y_new;
            t = if i + 1 == n { w[1] } else { w[0] + h * T::lit((i + 1) as f64 / n as f64) };
            out.stats.accepted += 1;
        }
        out.times.push(w[1]);
        out.states.push(y.clone());
    }
    Ok(())
}

// L-stable, stiffly accurate SDIRK of order 4 with embedded order 3.
const SD_GAMMA: f64 = 0.25;
const SD_C: [f64; 5] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
const SD_A: [[f64; 5]; 5] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];
const SD_BHAT: [f64; 5] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];

fn fd_jacobian<T: Scalar>(rhs: &mut Counter<T>, t: T, y: &DVector<T>, f0: &DVector<T>) -> Result<DMatrix<T>> {
    let n = y.len();
    let mut j = DMatrix::zeros(n, n);
    let sq = T::eps_mach().sqrt();
    for c in 0..n {
        let d = sq * y[c].abs().max(T::one());
        let mut yp = y.clone();
        yp[c] += d;
        let fp = rhs.call(t, &yp)?;
        j.set_column(c, &((fp - f0) / (yp[c] - y[c])));
    }
    Ok(j)
}

enum StageFailure {
    Newton,
    Rhs(SfdError),
}

/// One SDIRK step; returns the new state and the filtered error estimate.
#[allow(clippy::too_many_arguments)]
fn sdirk_step<T: Scalar>(
    rhs: &mut Counter<T>,
    t: T,
    y: &DVector<T>,
    f0: &DVector<T>,
    h: T,
    lu: &nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    opts: &IntegratorOptions,
) -> std::result::Result<(DVector<T>, DVector<T>), StageFailure> {
    let n = y.len();
    let hg = h * T::lit(SD_GAMMA);
    let mut k: Vec<DVector<T>> = Vec::with_capacity(5);
    let mut yi = y.clone();
    for i in 0..5 {
        let mut base = y.clone();
        for (j, kj) in k.iter().enumerate() {
            base.axpy(h * T::lit(SD_A[i][j]), kj, T::one());
        }
        let ti = t + h * T::lit(SD_C[i]);
        // predictor: explicit part plus the latest slope
        let slope = if i == 0 { f0 } else { &k[i - 1] };
        yi = &base + slope * hg;
        let mut prev_norm = f64::INFINITY;
        let mut converged = false;
        for _ in 0..10 {
            let fi = rhs.call(ti, &yi).map_err(StageFailure::Rhs)?;
            let g = &yi - &base - fi * hg;
            let dz = -lu.solve(&g).ok_or(StageFailure::Newton)?;
            let dn = err_norm(&dz, &yi, &yi, opts.rtol, opts.atol);
            yi += &dz;
            if !all_finite(yi.iter().copied()) {
                return Err(StageFailure::Newton);
            }
            if dn <= 1e-3 || dn == 0.0 {
                converged = true;
                break;
            }
            if dn > 0.9 * prev_norm {
                break;
            }
            prev_norm = dn;
        }
        if !converged {
            return Err(StageFailure::Newton);
        }
        k.push((&yi - &base) / hg);
    }
    let mut y_hat = y.clone();
    for (j, kj) in k.iter().enumerate() {
        y_hat.axpy(h * T::lit(SD_BHAT[j]), kj, T::one());
    }
    let raw = &yi - y_hat;
    let err = lu.solve(&raw).unwrap_or(raw);
    debug_assert_eq!(err.len(), n);
    Ok((yi, err))
}

fn sdirk_adaptive<T: Scalar>(
    rhs: &mut Counter<T>,
    z0: &DVector<T>,
    t_eval: &[T],
    dir: T,
    opts: &IntegratorOptions,
    out: &mut Trajectory<T>,
) -> Result<()> {
    let n = z0.len();
    let mut t = t_eval[0];
    let mut y = z0.clone();
    if t_eval.len() == 1 {
        return Ok(());
    }
    let mut f = rhs.call(t, &y)?;
    let mut h = initial_step(rhs, t, &y, &f, dir, 3.0, opts)?;
    let mut jac: Option<DMatrix<T>> = None;
    let mut err_prev: f64 = 1e-4;
    let mut steps = 0;
    let mut last_failure: Option<SfdError> = None;
    let eye = DMatrix::<T>::identity(n, n);
    for &target in &t_eval[1..] {
        while (target - t) * dir > T::zero() {
            steps += 1;
            if steps > opts.max_steps {
                return Err(SfdError::TooManySteps {
                    t: t.f64(),
                    steps: opts.max_steps,
                });
            }
            if h < min_step(t) {
                return Err(last_failure.unwrap_or_else(|| underflow(t, h, &y)));
            }
            if jac.is_none() {
                jac = Some(fd_jacobian(rhs, t, &y, &f)?);
                out.stats.jacobians += 1;
            }
            let remaining = ((target - t) * dir).f64();
            let clamped = h >= remaining;
            let hs = if clamped { remaining } else { h };
            let hh = dir * T::lit(hs);
            let iter = &eye - jac.as_ref().expect("jacobian") * (hh * T::lit(SD_GAMMA));
            let lu = iter.lu();
            match sdirk_step(rhs, t, &y, &f, hh, &lu, opts) {
                Ok((y_new, err)) => {
                    let en = err_norm(&err, &y, &y_new, opts.rtol, opts.atol);
                    if en <= 1.0 {
                        let t_new = if clamped { target } else { t + hh };
                        match rhs.call(t_new, &y_new) {
                            Ok(f_new) => {
                                out.stats.accepted += 1;
                                last_failure = None;
                                t = t_new;
                                y = y_new;
                                f = f_new;
                                jac = None;
                                let fac = if en == 0.0 { 5.0 } else { 0.9 * en.powf(-0.7 / 4.0) * err_prev.powf(0.4 / 4.0) };
                                let hn = hs * fac.clamp(0.2, 5.0);
                                h = if clamped { h.max(hn) } else { hn };
                                h = h.min(opts.h_max);
                                err_prev = en.max(1e-4);
                            }
                            Err(e) => {
                                last_failure = Some(e);
                                out.stats.rejected += 1;
                                h = hs * 0.25;
                            }
                        }
                    } else {
                        out.stats.rejected += 1;
                        h = hs * (0.9 * en.powf(-0.25)).clamp(0.2, 1.0);
                    }
                }
                Err(StageFailure::Newton) => {
                    out.stats.newton_failures += 1;
                    h = hs * 0.5;
                }
                Err(StageFailure::Rhs(e)) => {
                    last_failure = Some(e);
                    out.stats.rejected += 1;
                    h = hs * 0.25;
                }
            }
        }
        out.times.push(target);
        out.states.push(y.clone());
    }
    Ok(())
}
