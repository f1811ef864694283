//! Inertial decoupling, mass-normalized forcings and the eps -> 0 limit.

use crate::error::{Result, SfdError};
use crate::linalg::{all_finite, inf_norm, Factored};
use crate::scalar::Scalar;
use crate::system::{BlockJacobian, ForcingJacobians, MechanicalSystem, PhasePoint};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Schur complements and decoupled forces at one evaluation point.
#[derive(Debug, Clone)]
pub struct DecoupledForm<T: Scalar> {
    pub m1: DMatrix<T>,
    pub m2: DMatrix<T>,
    pub q1: DVector<T>,
    pub q2: DVector<T>,
}

impl<T: Scalar> DecoupledForm<T> {
    /// Decouples `M a = F` with the leading `s` coordinates slow.
    pub fn from_blocks(m: &DMatrix<T>, f: &DVector<T>, s: usize) -> Result<Self> {
        let n = m.nrows();
        let fd = n - s;
        let m11 = m.view((0, 0), (s, s)).into_owned();
        let m12 = m.view((0, s), (s, fd)).into_owned();
        let m21 = m.view((s, 0), (fd, s)).into_owned();
        let m22 = m.view((s, s), (fd, fd)).into_owned();
        let f1 = f.rows(0, s).into_owned();
        let f2 = f.rows(s, fd).into_owned();
        let lu22 = Factored::new(&m22);
        let lu11 = Factored::new(&m11);
        let singular = |block: &'static str, lu: &Factored<T>| SfdError::SingularBlock {
            block,
            cond: lu.pivot_ratio.f64(),
        };
        let m22_m21 = lu22.solve_mat(&m21).ok_or_else(|| singular("M22", &lu22))?;
        let m22_f2 = lu22.solve(&f2).ok_or_else(|| singular("M22", &lu22))?;
        let m11_m12 = lu11.solve_mat(&m12).ok_or_else(|| singular("M11", &lu11))?;
        let m11_f1 = lu11.solve(&f1).ok_or_else(|| singular("M11", &lu11))?;
        Ok(Self {
            m1: &m11 - &m12 * m22_m21,
            m2: &m22 - &m21 * m11_m12,
            q1: &f1 - &m12 * m22_f2,
            q2: &f2 - &m21 * m11_f1,
        })
    }

    /// Slow and fast accelerations `(M1^{-1} Q1, M2^{-1} Q2)`.
    pub fn accelerations(&self) -> Result<(DVector<T>, DVector<T>)> {
        let a1 = crate::linalg::solve_block(&self.m1, &self.q1, "M1")?;
        let a2 = crate::linalg::solve_block(&self.m2, &self.q2, "M2")?;
        Ok((a1, a2))
    }
}

/// Decouples the scaled equations at `p` for `eps > 0`.
pub fn inertial_decouple<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    p: &PhasePoint<T>,
    eps: T,
) -> Result<DecoupledForm<T>> {
    let m = sys.scaled_mass(&p.x, &p.eta, p.t, eps);
    let f = sys.scaled_force(p, eps);
    if !all_finite(m.iter().copied()) || !all_finite(f.iter().copied()) {
        return Err(SfdError::NonFinite {
            context: format!("scaled evaluators at eps = {}", eps.f64()),
        });
    }
    DecoupledForm::from_blocks(&m, &f, sys.partition().s)
}

/// `P1 = M1^{-1} Q1`, `P2 = eps M2^{-1} Q2`.
#[derive(Debug, Clone)]
pub struct NormalizedForcing<T: Scalar> {
    pub p1: DVector<T>,
    pub p2: DVector<T>,
    pub point: PhasePoint<T>,
    pub eps: T,
}

/// Mass-normalized forcings; at `eps = 0` the limit is taken.
pub fn normalized_forcing<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    p: &PhasePoint<T>,
    eps: T,
) -> Result<NormalizedForcing<T>> {
    let (p1, p2) = if eps > T::zero() {
        let d = inertial_decouple(sys, p, eps)?;
        let (a1, a2) = d.accelerations()?;
        (a1, a2 * eps)
    } else {
        let z = limit_forcing(sys, p)?;
        split(&z, sys.partition().s)
    };
    Ok(NormalizedForcing {
        p1,
        p2,
        point: p.clone(),
        eps,
    })
}

fn split<T: Scalar>(z: &DVector<T>, s: usize) -> (DVector<T>, DVector<T>) {
    (z.rows(0, s).into_owned(), z.rows(s, z.len() - s).into_owned())
}

/// Stacked `(P1, P2)` from the regularized form, valid for `eps >= 0`.
fn regularized_forcing<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    p: &PhasePoint<T>,
    eps: T,
) -> Option<Result<DVector<T>>> {
    let (a, b) = sys.regularized(p, eps)?;
    if !all_finite(a.iter().copied()) || !all_finite(b.iter().copied()) {
        return Some(Err(SfdError::NonFinite {
            context: format!("regularized form at eps = {} (no finite limit)", eps.f64()),
        }));
    }
    // rows may carry very different powers of the scaling parameters
    let (mut a, mut b) = (a, b);
    for i in 0..a.nrows() {
        let m = a.row(i).iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if m > T::zero() {
            a.row_mut(i).scale_mut(T::one() / m);
            b[i] /= m;
        }
    }
    Some(crate::linalg::solve_block(&a, &b, "regularized mass"))
}

/// Stacked forcing for `eps > 0` through the Schur-complement path.
fn decoupled_forcing<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>, eps: T) -> Result<DVector<T>> {
    let nf = normalized_forcing(sys, p, eps)?;
    Ok(crate::linalg::concat(&[&nf.p1, &nf.p2]))
}

/// Step used to probe the eps-dependence near zero.
fn eps_probe<T: Scalar>(sys: &dyn MechanicalSystem<T>) -> T {
    T::lit(1e-3) * sys.eps_nominal().min(T::one())
}

/// Stacked `(P1, P2)` at `eps = 0`.
pub fn limit_forcing<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<DVector<T>> {
    let z = match regularized_forcing(sys, p, T::zero()) {
        Some(r) => r?,
        None => {
            let (c0, _) = extrapolate(sys, p)?;
            c0
        }
    };
    if !all_finite(z.iter().copied()) {
        return Err(SfdError::NonFinite {
            context: "forcing limit at eps = 0".into(),
        });
    }
    Ok(z)
}

/// Quadratic fit of `P(eps)` through `eps = h/4, h/2, h`; returns the
/// value and slope at zero.
fn extrapolate<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<(DVector<T>, DVector<T>)> {
    let h = eps_probe(sys);
    let e = [h / T::lit(4.0), h / T::lit(2.0), h];
    let v: Vec<DVector<T>> = e.iter().map(|&ei| decoupled_forcing(sys, p, ei)).collect::<Result<_>>()?;
    // Lagrange basis derivatives at zero
    let (e0, e1, e2) = (e[0], e[1], e[2]);
    let l0 = e1 * e2 / ((e0 - e1) * (e0 - e2));
    let l1 = e0 * e2 / ((e1 - e0) * (e1 - e2));
    let l2 = e0 * e1 / ((e2 - e0) * (e2 - e1));
    let d0 = -(e1 + e2) / ((e0 - e1) * (e0 - e2));
    let d1 = -(e0 + e2) / ((e1 - e0) * (e1 - e2));
    let d2 = -(e0 + e1) / ((e2 - e0) * (e2 - e1));
    let c0 = &v[0] * l0 + &v[1] * l1 + &v[2] * l2;
    let c1 = &v[0] * d0 + &v[1] * d1 + &v[2] * d2;
    if !all_finite(c0.iter().copied()) {
        return Err(SfdError::NonFinite {
            context: "extrapolated forcing at eps = 0".into(),
        });
    }
    Ok((c0, c1))
}

/// `d/d eps (P1, P2)` at `eps = 0`.
pub fn eps_derivative<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<DVector<T>> {
    if sys.regularized(p, T::zero()).is_none() {
        return Ok(extrapolate(sys, p)?.1);
    }
    let h = eps_probe(sys);
    let f = |e: T| regularized_forcing(sys, p, e).expect("checked");
    let p0 = f(T::zero())?;
    let ph2 = f(h / T::lit(2.0))?;
    let ph = f(h)?;
    let p2h = f(h + h)?;
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    // one-sided second-order differences, then one Richardson pass
    let d_h = (&ph * four - &p0 * three - &p2h) / (h + h);
    let d_h2 = (&ph2 * four - &p0 * three - &ph) / h;
    Ok((d_h2 * four - d_h) / three)
}

/// Central-difference step for a coordinate of size `v`.
pub fn fd_step<T: Scalar>(v: T) -> T {
    T::eps_mach().cbrt() * v.abs().max(T::one())
}

/// Central-difference Jacobian of `g` at `z`.
pub fn central_jacobian<T: Scalar>(
    z: &DVector<T>,
    mut g: impl FnMut(&DVector<T>) -> Result<DVector<T>>,
) -> Result<DMatrix<T>> {
    let mut cols: Vec<DVector<T>> = Vec::with_capacity(z.len());
    for j in 0..z.len() {
        let h = fd_step(z[j]);
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += h;
        zm[j] -= h;
        let gp = g(&zp)?;
        let gm = g(&zm)?;
        cols.push((gp - gm) / ((zp[j] - zm[j])));
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Jacobians of `(P1, P2)` at `eps = 0`, analytic when the system supplies
/// them and central differences otherwise.
pub fn forcing_jacobians<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<ForcingJacobians<T>> {
    if let Some(j) = sys.limit_jacobians(p) {
        return Ok(j);
    }
    let part = sys.partition();
    let (s, f) = (part.s, part.f());
    let z = p.pack();
    let jac = central_jacobian(&z, |zz| limit_forcing(sys, &PhasePoint::unpack(zz, s, f)))?;
    let deps = eps_derivative(sys, p)?;
    let block = |r0: usize, rows: usize| BlockJacobian {
        dx: jac.view((r0, 0), (rows, s)).into_owned(),
        dxd: jac.view((r0, s), (rows, s)).into_owned(),
        deta: jac.view((r0, 2 * s), (rows, f)).into_owned(),
        dyd: jac.view((r0, 2 * s + f), (rows, f)).into_owned(),
        dt: jac.view((r0, 2 * s + 2 * f), (rows, 1)).column(0).into_owned(),
        deps: deps.rows(r0, rows).into_owned(),
    };
    Ok(ForcingJacobians {
        p1: block(0, s),
        p2: block(s, f),
    })
}

/// `d P2 / d eta` at `eps = 0`.
pub fn p2_eta_jacobian<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<DMatrix<T>> {
    if let Some(j) = sys.limit_jacobians(p) {
        return Ok(j.p2.deta);
    }
    let s = sys.partition().s;
    central_jacobian(&p.eta, |eta| {
        let mut q = p.clone();
        q.eta = eta.clone();
        Ok(limit_forcing(sys, &q)?.rows(s, eta.len()).into_owned())
    })
}

/// `P2` at `eps = 0`.
pub fn limit_p2<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<DVector<T>> {
    let s = sys.partition().s;
    let z = limit_forcing(sys, p)?;
    Ok(z.rows(s, z.len() - s).into_owned())
}

/// `P1` at `eps = 0`.
pub fn limit_p1<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<DVector<T>> {
    let s = sys.partition().s;
    Ok(limit_forcing(sys, p)?.rows(0, s).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum A1Verdict {
    Extends,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct A1Sample {
    /// Packed `(x, xd, eta, yd, t)`.
    pub point: Vec<f64>,
    /// `d_k / d_{k+1}` with `d_k = |P(eps_k) - P(eps_{k+1})|_inf`.
    pub ratios: Vec<f64>,
    pub differences: Vec<f64>,
    /// Extrapolated `(P1, P2)` at `eps = 0`.
    pub limit: Vec<f64>,
    pub verdict: A1Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct A1Report {
    pub verdict: A1Verdict,
    pub samples: Vec<A1Sample>,
}

#[derive(Debug, Clone, Copy)]
pub struct A1Options {
    /// Differences below `tol * (1 + |P|)` count as converged.
    pub tol: f64,
    /// Minimum contraction per halving.
    pub contraction: f64,
    /// Growth factor that signals divergence.
    pub growth: f64,
}

impl Default for A1Options {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            contraction: 1.8,
            growth: 10.0,
        }
    }
}

/// Default geometric eps-sequence.
pub fn default_eps_sequence() -> Vec<f64> {
    vec![1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3]
}

/// Checks that the forcings extend smoothly to `eps = 0`.
pub fn check_a1<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    samples: &[PhasePoint<T>],
    eps_seq: &[T],
    opts: A1Options,
) -> Result<A1Report> {
    if eps_seq.len() < 4 || eps_seq.windows(2).any(|w| !(w[1] < w[0])) || eps_seq.iter().any(|e| *e <= T::zero()) {
        return Err(SfdError::InvalidArgument(
            "eps sequence must be positive, strictly decreasing, with at least 4 terms".into(),
        ));
    }
    let per: Vec<A1Sample> = samples
        .par_iter()
        .map(|p| a1_sample(sys, p, eps_seq, opts))
        .collect::<Result<_>>()?;
    let verdict = if per.iter().any(|s| s.verdict == A1Verdict::Diverges) {
        A1Verdict::Diverges
    } else if per.iter().all(|s| s.verdict == A1Verdict::Extends) {
        A1Verdict::Extends
    } else {
        A1Verdict::Inconclusive
    };
    Ok(A1Report { verdict, samples: per })
}

/// Value at zero of the polynomial interpolating `(eps[i], vals[i])`.
fn neville_at_zero(eps: &[f64], vals: &[DVector<f64>]) -> DVector<f64> {
    let mut p: Vec<DVector<f64>> = vals.to_vec();
    let n = p.len();
    for k in 1..n {
        for i in 0..n - k {
            let (a, b) = (eps[i], eps[i + k]);
            p[i] = (&p[i + 1] * a - &p[i] * b) / (a - b);
        }
    }
    p.swap_remove(0)
}

fn a1_sample<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    p: &PhasePoint<T>,
    eps_seq: &[T],
    opts: A1Options,
) -> Result<A1Sample> {
    let vals: Vec<DVector<f64>> = eps_seq
        .iter()
        .map(|&e| decoupled_forcing(sys, p, e).map(|v| v.map(|x| x.f64())))
        .collect::<Result<_>>()?;
    let scale = 1.0 + vals.iter().map(|v| inf_norm(v)).fold(0.0, f64::max);
    let negligible = |d: f64| d <= opts.tol * scale;
    let diffs: Vec<f64> = vals.windows(2).map(|w| inf_norm(&(&w[0] - &w[1]))).collect();
    let ratios: Vec<f64> = diffs
        .windows(2)
        .map(|w| if w[1] == 0.0 { f64::INFINITY } else { w[0] / w[1] })
        .collect();
    let first = &vals[0];
    let last = &vals[vals.len() - 1];
    let grows = (0..first.len()).any(|i| {
        let a = first[i].abs();
        let b = last[i].abs();
        b > 1e-6 * scale && b >= opts.growth * a
    });
    // pre-asymptotic pairs may contract slowly; the finest pair must not
    let pair_ok = |w: &[f64], factor: f64| negligible(w[0]) || negligible(w[1]) || w[0] / w[1] >= factor;
    let contracts = diffs.windows(2).all(|w| pair_ok(w, 1.0))
        && diffs.windows(2).last().map_or(true, |w| pair_ok(w, opts.contraction));
    let verdict = if grows || vals.iter().any(|v| !all_finite(v.iter().copied())) {
        A1Verdict::Diverges
    } else if contracts {
        A1Verdict::Extends
    } else {
        A1Verdict::Inconclusive
    };
    let eps: Vec<f64> = eps_seq.iter().map(|e| e.f64()).collect();
    let limit = neville_at_zero(&eps, &vals);
    Ok(A1Sample {
        point: p.pack().iter().map(|x| x.f64()).collect(),
        ratios,
        differences: diffs,
        limit: limit.iter().copied().collect(),
        verdict,
    })
}
