//! Critical manifold: zero-acceleration fast states, tangent matrices and
//! formal stability.

use crate::decomposition::{central_jacobian, limit_p2, p2_eta_jacobian};
use crate::error::{Result, SfdError};
use crate::linalg::{companion, eigenvalues, inf_norm, mat_inf_norm, to_f64_vec, Factored};
use crate::sampling::{DomainSampler, SlowSample};
use crate::scalar::Scalar;
use crate::system::{MechanicalSystem, PhasePoint};
use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Newton iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Success when the residual is below `rel_tol * (1 + |initial residual|)`,
    /// with `rel_tol` floored at a small multiple of machine epsilon.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Smallest LU pivot accepted for `dP2/deta`.
    pub min_pivot: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 50,
            min_pivot: 1e-14,
        }
    }
}

/// A solved point of the critical manifold.
#[derive(Debug, Clone)]
pub struct CriticalPoint<T: Scalar> {
    pub x: DVector<T>,
    pub xd: DVector<T>,
    pub t: T,
    pub eta: DVector<T>,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub spectrum: Vec<Complex<T>>,
    pub stable: bool,
    pub residual: T,
    pub iterations: usize,
}

impl<T: Scalar> CriticalPoint<T> {
    pub fn phase_point(&self) -> PhasePoint<T> {
        PhasePoint::at_rest(&self.x, &self.xd, &self.eta, self.t)
    }

    pub fn max_real_part(&self) -> T {
        max_re(&self.spectrum)
    }
}

/// Result of the Newton solve alone.
#[derive(Debug, Clone)]
pub struct NewtonSolution<T: Scalar> {
    pub eta: DVector<T>,
    pub residual: T,
    pub iterations: usize,
}

fn max_re<T: Scalar>(spec: &[Complex<T>]) -> T {
    spec.iter().fold(T::min_value().unwrap(), |m, l| m.max(l.re))
}

fn singular_jacobian<T: Scalar>(x: &DVector<T>, xd: &DVector<T>, t: T, eta: &DVector<T>) -> SfdError {
    SfdError::SingularJacobian {
        x: to_f64_vec(x),
        xd: to_f64_vec(xd),
        t: t.f64(),
        eta: to_f64_vec(eta),
    }
}

/// Solves `P2(x, xd, eta, 0, t; 0) = 0` for `eta` by damped Newton.
pub fn solve_g0<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    x: &DVector<T>,
    xd: &DVector<T>,
    t: T,
    guess: &DVector<T>,
    opts: NewtonOptions,
) -> Result<NewtonSolution<T>> {
    let point = |eta: &DVector<T>| PhasePoint::at_rest(x, xd, eta, t);
    let mut eta = guess.clone();
    let mut r = limit_p2(sys, &point(&eta))?;
    let mut rn = inf_norm(&r);
    let tol = T::lit(opts.rel_tol).max(T::lit(100.0) * T::eps_mach()) * (T::one() + rn);
    let mut polished = 0;
    let mut it = 0;
    while it < opts.max_iter {
        if rn <= tol {
            // one extra step drives the residual to round-off
            if polished > 0 || rn == T::zero() {
                break;
            }
            polished += 1;
        }
        it += 1;
        let j = p2_eta_jacobian(sys, &point(&eta))?;
        let lu = Factored::new(&j);
        let scale = T::one().max(mat_inf_norm(&j));
        if lu.is_singular() || lu.min_pivot <= T::lit(opts.min_pivot) * scale {
            if rn <= tol {
                break;
            }
            return Err(singular_jacobian(x, xd, t, &eta));
        }
        let dx = -lu.solve(&r).expect("nonsingular");
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &eta + &dx * lambda;
            if let Ok(rt) = limit_p2(sys, &point(&trial)) {
                let rtn = inf_norm(&rt);
                if rtn.is_finite_val() && rtn < rn {
                    eta = trial;
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
    if rn <= tol {
        Ok(NewtonSolution {
            eta,
            residual: rn,
            iterations: it,
        })
    } else {
        Err(SfdError::NoConvergence {
            iterations: it,
            residual: rn.f64(),
            best: to_f64_vec(&eta),
        })
    }
}

/// `A = -dP2/dyd`, `B = -dP2/deta` at `(x, xd, eta, 0, t; 0)`.
pub fn tangent_matrices<T: Scalar>(sys: &dyn MechanicalSystem<T>, p: &PhasePoint<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if let Some(j) = sys.limit_jacobians(p) {
        return Ok((-j.p2.dyd, -j.p2.deta));
    }
    let b = -p2_eta_jacobian(sys, p)?;
    let a = -central_jacobian(&p.yd, |yd| {
        let mut q = p.clone();
        q.yd = yd.clone();
        limit_p2(sys, &q)
    })?;
    Ok((a, b))
}

/// Spectrum of `eta'' + A eta' + B eta = 0` and whether it is asymptotically
/// stable with margin `1e-12 * (1 + |A| + |B|)`.
pub fn check_formal_stability<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<(Vec<Complex<T>>, bool)> {
    if !crate::linalg::all_finite(a.iter().chain(b.iter()).copied()) {
        return Err(SfdError::NonFinite {
            context: "tangent matrices".into(),
        });
    }
    let spec = eigenvalues(&companion(a, b))?;
    let scale = T::one() + mat_inf_norm(a) + mat_inf_norm(b);
    let stable = max_re(&spec) < -T::lit(1e-12) * scale;
    Ok((spec, stable))
}

/// Solves the critical point from `guess` and classifies its stability.
pub fn solve_critical_point<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    x: &DVector<T>,
    xd: &DVector<T>,
    t: T,
    guess: &DVector<T>,
) -> Result<CriticalPoint<T>> {
    let sol = solve_g0(sys, x, xd, t, guess, NewtonOptions::default())?;
    classify_solution(sys, x, xd, t, sol)
}

/// Attaches tangent matrices and spectrum to a Newton solution.
pub fn classify_solution<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    x: &DVector<T>,
    xd: &DVector<T>,
    t: T,
    sol: NewtonSolution<T>,
) -> Result<CriticalPoint<T>> {
    let p = PhasePoint::at_rest(x, xd, &sol.eta, t);
    let (a, b) = tangent_matrices(sys, &p)?;
    let (spectrum, stable) = check_formal_stability(&a, &b)?;
    Ok(CriticalPoint {
        x: x.clone(),
        xd: xd.clone(),
        t,
        eta: sol.eta,
        a,
        b,
        spectrum,
        stable,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

/// Uniform stability bound over a sample of the reduction domain.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityCertificate {
    pub lambda: f64,
    pub margin: f64,
    pub max_re: f64,
    /// Packed `(x, xd, t)` of the least stable sample.
    pub worst_point: Vec<f64>,
    pub n_samples: usize,
}

/// Safety factor between the sampled spectral abscissa and the reported gap.
pub const GAP_SAFETY: f64 = 0.95;

/// Outcome at one sample: a critical point, or the spectral abscissa of the
/// tangent problem at the iterate where Newton stopped on a singular Jacobian.
enum SampleOutcome<T: Scalar> {
    Solved(CriticalPoint<T>),
    Degenerate { max_re: f64 },
}

fn sample_outcome<T: Scalar>(sys: &dyn MechanicalSystem<T>, s: &SlowSample) -> Result<SampleOutcome<T>> {
    let (x, xd, t) = (s.x::<T>(), s.xd::<T>(), T::lit(s.t));
    let guess = sys.branch_guess(&x, &xd, t);
    match solve_critical_point(sys, &x, &xd, t, &guess) {
        Ok(cp) => Ok(SampleOutcome::Solved(cp)),
        Err(SfdError::SingularJacobian { eta, .. }) => {
            let eta = crate::linalg::from_f64_slice::<T>(&eta);
            let (a, b) = tangent_matrices(sys, &PhasePoint::at_rest(&x, &xd, &eta, t))?;
            let (spec, _) = check_formal_stability(&a, &b)?;
            Ok(SampleOutcome::Degenerate {
                max_re: max_re(&spec).f64(),
            })
        }
        Err(e) => Err(e),
    }
}

/// Solves the critical manifold on every sample (input order preserved).
pub fn solve_samples<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    samples: &[SlowSample],
) -> Vec<Result<CriticalPoint<T>>> {
    samples
        .par_iter()
        .map(|s| {
            let (x, xd, t) = (s.x::<T>(), s.xd::<T>(), T::lit(s.t));
            solve_critical_point(sys, &x, &xd, t, &sys.branch_guess(&x, &xd, t))
        })
        .collect()
}

/// Spectral gap over `samples`; fails with `UnstableSample` at the first
/// (in input order) sample that is not formally stable.
pub fn spectral_gap_on<T: Scalar>(sys: &dyn MechanicalSystem<T>, samples: &[SlowSample]) -> Result<StabilityCertificate> {
    if samples.is_empty() {
        return Err(SfdError::InvalidArgument("empty sample set".into()));
    }
    let outcomes: Vec<Result<SampleOutcome<T>>> = samples.par_iter().map(|s| sample_outcome(sys, s)).collect();
    let mut worst: Option<(f64, usize)> = None;
    let mut unstable: Vec<(usize, f64)> = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        let (re, ok) = match o? {
            SampleOutcome::Solved(cp) => (cp.max_real_part().f64(), cp.stable),
            SampleOutcome::Degenerate { max_re } => (max_re, false),
        };
        if !ok {
            unstable.push((i, re));
        }
        if worst.map_or(true, |(w, _)| re > w) {
            worst = Some((re, i));
        }
    }
    if let Some(&(i, re)) = unstable.first() {
        let s = &samples[i];
        return Err(SfdError::UnstableSample {
            x: s.x.clone(),
            xd: s.xd.clone(),
            t: s.t,
            max_re: re,
            count: unstable.len(),
        });
    }
    let (re, i) = worst.expect("non-empty");
    let lambda = GAP_SAFETY * re.abs();
    Ok(StabilityCertificate {
        lambda,
        margin: re.abs() - lambda,
        max_re: re,
        worst_point: samples[i].packed(),
        n_samples: samples.len(),
    })
}

/// Spectral gap over the sampler's points in the system's domain box.
pub fn spectral_gap<T: Scalar>(sys: &dyn MechanicalSystem<T>, sampler: &DomainSampler) -> Result<StabilityCertificate> {
    spectral_gap_on(sys, &sampler.slow_points(&sys.domain()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn damped_oscillator_is_stable() {
        let (spec, stable) = check_formal_stability(&m1(2.0), &m1(4.0)).unwrap();
        assert!(stable);
        for l in spec {
            assert!((l.re + 1.0).abs() < 1e-12);
            assert!((l.im.abs() - 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn undamped_oscillator_is_not_asymptotically_stable() {
        let (spec, stable) = check_formal_stability(&m1(0.0), &m1(1.0)).unwrap();
        assert!(!stable);
        assert!(spec.iter().all(|l| l.re.abs() < 1e-12 && (l.im.abs() - 1.0).abs() < 1e-12));
    }
}
