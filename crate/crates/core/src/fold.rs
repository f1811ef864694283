//! Fold boundary of the reduction domain: where `dP2/deta` becomes singular
//! along the critical manifold.

use crate::critical::{check_formal_stability, solve_g0, tangent_matrices, NewtonOptions};
use crate::decomposition::{limit_p2, p2_eta_jacobian};
use crate::error::{Result, SfdError};
use crate::linalg::{eigenvalues, inf_norm, kernel_vector, numerical_rank, singular_values, Factored};
use crate::sampling::SlowSample;
use crate::scalar::Scalar;
use crate::system::{MechanicalSystem, PhasePoint};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Scaled determinant `det J / prod_i max(1, |row_i|)` of `J = dP2/deta`.
pub fn scaled_det<T: Scalar>(j: &DMatrix<T>) -> T {
    let mut scale = T::one();
    for i in 0..j.nrows() {
        scale *= T::one().max(j.row(i).norm());
    }
    j.clone().determinant() / scale
}

/// Fold indicator at a point of the critical manifold.
pub fn fold_indicator<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<T> {
    Ok(scaled_det(&p2_eta_jacobian(sys, p)?))
}

/// Straight segment in the slow base, parametrized by `s` in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SlowPath {
    pub start: SlowSample,
    pub end: SlowSample,
}

impl SlowPath {
    pub fn new(start: SlowSample, end: SlowSample) -> Self {
        Self { start, end }
    }

    pub fn at<T: Scalar>(&self, s: T) -> (DVector<T>, DVector<T>, T) {
        let lerp = |a: f64, b: f64| T::lit(a) + (T::lit(b) - T::lit(a)) * s;
        let x = DVector::from_iterator(self.start.x.len(), self.start.x.iter().zip(&self.end.x).map(|(a, b)| lerp(*a, *b)));
        let xd = DVector::from_iterator(self.start.xd.len(), self.start.xd.iter().zip(&self.end.xd).map(|(a, b)| lerp(*a, *b)));
        (x, xd, lerp(self.start.t, self.end.t))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FoldOptions {
    /// Absolute tolerance on the scaled determinant.
    pub fold_tol: f64,
    /// Marching steps along the path.
    pub march_steps: usize,
    /// Initial offset into the domain for branch classification.
    pub branch_offset: f64,
    /// Nondegeneracy threshold.
    pub degenerate_tol: f64,
}

impl Default for FoldOptions {
    fn default() -> Self {
        Self {
            fold_tol: 1e-8,
            march_steps: 200,
            branch_offset: 1e-3,
            degenerate_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchInfo {
    /// Whether the branch displaced along `+v` (kernel direction, largest
    /// entry positive) is formally stable.
    pub plus: bool,
    /// Whether the branch displaced along `-v` is formally stable.
    pub minus: bool,
    pub plus_eta: Vec<f64>,
    pub minus_eta: Vec<f64>,
    /// Number of real eigenvalues of `B` changing sign between the branches.
    pub crossings: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldPoint {
    /// Packed `(x, xd, t)`.
    pub point: Vec<f64>,
    pub x: Vec<f64>,
    pub xd: Vec<f64>,
    pub t: f64,
    pub eta: Vec<f64>,
    /// Path parameter of the fold.
    pub s: f64,
    pub det: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub nondegeneracy: f64,
    pub kernel: Vec<f64>,
    pub branches: Option<BranchInfo>,
}

fn solve_on_path<T: Scalar>(sys: &dyn MechanicalSystem<T>, path: &SlowPath, s: T, guess: &DVector<T>) -> Result<DVector<T>> {
    let (x, xd, t) = path.at(s);
    Ok(solve_g0(sys, &x, &xd, t, guess, NewtonOptions::default())?.eta)
}

fn indicator_on_path<T: Scalar>(sys: &dyn MechanicalSystem<T>, path: &SlowPath, s: T, eta: &DVector<T>) -> Result<T> {
    let (x, xd, t) = path.at(s);
    fold_indicator(sys, &PhasePoint::at_rest(&x, &xd, eta, t))
}

/// Marches along `path` from the branch selected by `guess`, brackets the
/// first sign change of the indicator (or loss of the branch) and refines it
/// with Newton on the extended system `[P2 = 0, indicator = 0]`.
pub fn locate_fold<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    path: &SlowPath,
    guess: &DVector<T>,
    opts: FoldOptions,
) -> Result<FoldPoint> {
    let n = opts.march_steps.max(2);
    let mut eta = solve_on_path(sys, path, T::zero(), guess)?;
    let mut ind = indicator_on_path(sys, path, T::zero(), &eta)?;
    let mut s_left = T::zero();
    let mut bracket: Option<(T, DVector<T>, Option<T>)> = None;
    for k in 1..=n {
        let s = T::lit(k as f64 / n as f64);
        match solve_on_path(sys, path, s, &eta) {
            Ok(e) => {
                let i = indicator_on_path(sys, path, s, &e)?;
                if i.abs() <= T::lit(opts.fold_tol) || (i > T::zero()) != (ind > T::zero()) {
                    bracket = Some((s, e, Some(i)));
                    break;
                }
                eta = e;
                ind = i;
                s_left = s;
            }
            Err(SfdError::NoConvergence { .. }) | Err(SfdError::SingularJacobian { .. }) => {
                bracket = Some((s, eta.clone(), None));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let (mut s_right, _, right_ind) = bracket.ok_or(SfdError::NoSignChange)?;
    let sign_change = right_ind.is_some();

    // bisection keeps a converged branch point on the left
    let width_tol = T::lit(1e-13);
    for _ in 0..200 {
        if ind.abs() <= T::lit(opts.fold_tol) * T::lit(1e-3) || s_right - s_left <= width_tol {
            break;
        }
        let mid = (s_left + s_right) / T::lit(2.0);
        let ok = match solve_on_path(sys, path, mid, &eta) {
            Ok(e) => {
                let i = indicator_on_path(sys, path, mid, &e)?;
                let same_side = !sign_change || (i > T::zero()) == (ind > T::zero());
                if same_side {
                    eta = e;
                    ind = i;
                    Some(true)
                } else {
                    Some(false)
                }
            }
            Err(SfdError::NoConvergence { .. }) | Err(SfdError::SingularJacobian { .. }) => None,
            Err(e) => return Err(e),
        };
        match ok {
            Some(true) => s_left = mid,
            _ => s_right = mid,
        }
    }

    let (s_f, eta_f) = refine_extended(sys, path, s_left, &eta, opts)?;
    fold_point(sys, path, s_f, eta_f, opts)
}

/// Newton on `(eta, s)` for `P2 = 0`, `indicator = 0`.
fn refine_extended<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    path: &SlowPath,
    s0: T,
    eta0: &DVector<T>,
    opts: FoldOptions,
) -> Result<(T, DVector<T>)> {
    let f = eta0.len();
    let residual = |u: &DVector<T>| -> Result<DVector<T>> {
        let eta = u.rows(0, f).into_owned();
        let s = u[f];
        let (x, xd, t) = path.at(s);
        let p = PhasePoint::at_rest(&x, &xd, &eta, t);
        let r = limit_p2(sys, &p)?;
        let d = fold_indicator(sys, &p)?;
        let mut out = DVector::zeros(f + 1);
        out.rows_mut(0, f).copy_from(&r);
        out[f] = d;
        Ok(out)
    };
    let mut u = DVector::zeros(f + 1);
    u.rows_mut(0, f).copy_from(eta0);
    u[f] = s0;
    let mut r = residual(&u)?;
    let mut rn = inf_norm(&r);
    for _ in 0..30 {
        if rn <= T::lit(1e-13) {
            break;
        }
        let jac = crate::decomposition::central_jacobian(&u, |v| residual(v))?;
        let lu = Factored::new(&jac);
        let Some(step) = lu.solve(&r) else { break };
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &u - &step * lambda;
            if let Ok(rt) = residual(&trial) {
                let rtn = inf_norm(&rt);
                if rtn < rn {
                    u = trial;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            lambda *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    let det = r[f].abs();
    let p2 = inf_norm(&r.rows(0, f).into_owned());
    if det > T::lit(opts.fold_tol) || p2 > T::lit(1e-10) {
        return Err(SfdError::NoConvergence {
            iterations: 30,
            residual: rn.f64(),
            best: u.iter().map(|v| v.f64()).collect(),
        });
    }
    Ok((u[f], u.rows(0, f).into_owned()))
}

fn fold_point<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    path: &SlowPath,
    s: T,
    eta: DVector<T>,
    opts: FoldOptions,
) -> Result<FoldPoint> {
    let (x, xd, t) = path.at(s);
    let p = PhasePoint::at_rest(&x, &xd, &eta, t);
    let j = p2_eta_jacobian(sys, &p)?;
    let sv = singular_values(&j);
    let rank = numerical_rank(&j, T::lit(1e-6));
    let v = kernel_vector(&j);
    let h = T::lit(1e-6);
    let along = |sign: T| {
        let mut q = p.clone();
        q.eta = &eta + &v * (sign * h);
        fold_indicator(sys, &q)
    };
    let nondeg = ((along(T::one())? - along(-T::one())?) / (h + h)).abs();
    let det = scaled_det(&j);
    let mut fp = FoldPoint {
        point: {
            let mut v: Vec<f64> = x.iter().map(|a| a.f64()).collect();
            v.extend(xd.iter().map(|a| a.f64()));
            v.push(t.f64());
            v
        },
        x: x.iter().map(|a| a.f64()).collect(),
        xd: xd.iter().map(|a| a.f64()).collect(),
        t: t.f64(),
        eta: eta.iter().map(|a| a.f64()).collect(),
        s: s.f64(),
        det: det.f64(),
        rank,
        singular_values: sv.iter().map(|a| a.f64()).collect(),
        nondegeneracy: nondeg.f64(),
        kernel: v.iter().map(|a| a.f64()).collect(),
        branches: None,
    };
    if fp.nondegeneracy < opts.degenerate_tol {
        return Err(SfdError::DegenerateFold { value: fp.nondegeneracy });
    }
    fp.branches = Some(classify_branches(sys, path, &fp, opts)?);
    Ok(fp)
}

/// Number of eigenvalues of `B` with negative real part.
fn negative_count<T: Scalar>(b: &DMatrix<T>) -> Result<usize> {
    Ok(eigenvalues(b)?.iter().filter(|l| l.re < T::zero()).count())
}

/// Solves both branches a small arclength away from the fold and classifies
/// their formal stability.
pub fn classify_branches<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    path: &SlowPath,
    fold: &FoldPoint,
    opts: FoldOptions,
) -> Result<BranchInfo> {
    let f = fold.eta.len();
    let eta0: DVector<T> = crate::linalg::from_f64_slice(&fold.eta);
    let v: DVector<T> = crate::linalg::from_f64_slice(&fold.kernel);
    let s0 = T::lit(fold.s);
    let side = |sign: T| -> Result<(bool, DVector<T>, usize)> {
        let mut delta = T::lit(opts.branch_offset);
        let mut last_err = None;
        for _ in 0..12 {
            match branch_point(sys, path, s0, &eta0, &v, sign * delta) {
                Ok((s, eta)) => {
                    let (x, xd, t) = path.at(s);
                    let (a, b) = tangent_matrices(sys, &PhasePoint::at_rest(&x, &xd, &eta, t))?;
                    let (_, stable) = check_formal_stability(&a, &b)?;
                    return Ok((stable, eta, negative_count(&b)?));
                }
                Err(e) => {
                    last_err = Some(e);
                    delta /= T::lit(2.0);
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    };
    let (plus, pe, pn) = side(T::one())?;
    let (minus, me, mn) = side(-T::one())?;
    let crossings = pn.abs_diff(mn);
    debug_assert!(pe.len() == f && me.len() == f);
    if crossings != 1 {
        return Err(SfdError::BranchCrossing { crossings });
    }
    Ok(BranchInfo {
        plus,
        minus,
        plus_eta: pe.iter().map(|a| a.f64()).collect(),
        minus_eta: me.iter().map(|a| a.f64()).collect(),
        crossings,
    })
}

/// Pseudo-arclength corrector: `P2(path(s), eta) = 0` with
/// `v . (eta - eta0) = delta`.
fn branch_point<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    path: &SlowPath,
    s0: T,
    eta0: &DVector<T>,
    v: &DVector<T>,
    delta: T,
) -> Result<(T, DVector<T>)> {
    let f = eta0.len();
    let residual = |u: &DVector<T>| -> Result<DVector<T>> {
        let eta = u.rows(0, f).into_owned();
        let (x, xd, t) = path.at(u[f]);
        let r = limit_p2(sys, &PhasePoint::at_rest(&x, &xd, &eta, t))?;
        let mut out = DVector::zeros(f + 1);
        out.rows_mut(0, f).copy_from(&r);
        out[f] = v.dot(&(&eta - eta0)) - delta;
        Ok(out)
    };
    let mut u = DVector::zeros(f + 1);
    u.rows_mut(0, f).copy_from(&(eta0 + v * delta));
    u[f] = s0;
    let mut r = residual(&u)?;
    let r0 = inf_norm(&r);
    let tol = T::lit(1e-12) * (T::one() + r0);
    for it in 0..50 {
        if inf_norm(&r) <= tol {
            return Ok((u[f], u.rows(0, f).into_owned()));
        }
        let jac = crate::decomposition::central_jacobian(&u, |w| residual(w))?;
        let lu = Factored::new(&jac);
        let step = lu.solve(&r).ok_or(SfdError::NoConvergence {
            iterations: it,
            residual: inf_norm(&r).f64(),
            best: vec![],
        })?;
        let rn = inf_norm(&r);
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &u - &step * lambda;
            if let Ok(rt) = residual(&trial) {
                if inf_norm(&rt) < rn {
                    u = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    Err(SfdError::NoConvergence {
        iterations: 50,
        residual: inf_norm(&r).f64(),
        best: u.iter().map(|a| a.f64()).collect(),
    })
}
