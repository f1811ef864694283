//! Equilibrium-local reductions: static condensation, modal derivatives and
//! the two-DOF spectral-submanifold oracle.

use crate::critical::{solve_g0, NewtonOptions};
use crate::decomposition::{forcing_jacobians, limit_p1, limit_p2};
use crate::error::{Result, SfdError};
use crate::integrate::{integrate, IntegratorOptions, Trajectory};
use crate::linalg::{inf_norm, mat_inf_norm, Factored};
use crate::presets::TwoDofParams;
use crate::sampling::DomainSampler;
use crate::scalar::Scalar;
use crate::system::{MechanicalSystem, PhasePoint};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;
use std::sync::Arc;

/// Quadratic expansion `G0(x) = Gamma + Phi x + (Theta x) x` at the
/// equilibrium, with `Theta[k]` the symmetric `s x s` matrix of component `k`.
#[derive(Debug, Clone)]
pub struct LocalExpansion<T: Scalar> {
    pub gamma: DVector<T>,
    pub phi: DMatrix<T>,
    pub theta: Vec<DMatrix<T>>,
    pub t: T,
    /// Hypothesis diagnostics that did not block the construction.
    pub warnings: Vec<String>,
}

impl<T: Scalar> LocalExpansion<T> {
    /// `(Theta x) x`.
    pub fn quadratic(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(self.theta.len(), self.theta.iter().map(|th| x.dot(&(th * x))))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LocalOptions {
    /// Tolerance for the slow-velocity independence check.
    pub a4_tol: f64,
    /// Step of the second differences.
    pub hessian_step: f64,
    /// Tolerance under which hypothesis quantities count as zero.
    pub hypothesis_tol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            a4_tol: 1e-8,
            hessian_step: 1e-4,
            hypothesis_tol: 1e-8,
        }
    }
}

/// Largest `|dP2/dxd|` over random samples of the domain at `eps = 0`.
pub fn slow_velocity_dependence<T: Scalar>(sys: &dyn MechanicalSystem<T>) -> Result<f64> {
    let pts = DomainSampler::default().phase_points::<T>(&sys.domain(), 20);
    let mut worst = 0.0f64;
    for p in pts {
        let j = forcing_jacobians(sys, &p)?;
        worst = worst.max(mat_inf_norm(&j.p2.dxd).f64());
    }
    Ok(worst)
}

/// Builds the local expansion at time `t`.
pub fn local_expansion<T: Scalar>(sys: &dyn MechanicalSystem<T>, t: T, opts: LocalOptions) -> Result<LocalExpansion<T>> {
    let part = sys.partition();
    let (s, f) = (part.s, part.f());
    let a4 = slow_velocity_dependence(sys)?;
    if a4 > opts.a4_tol {
        return Err(SfdError::A4Violated { value: a4 });
    }
    let zs = DVector::<T>::zeros(s);
    let gamma = solve_g0(sys, &zs, &zs, t, &DVector::zeros(f), NewtonOptions::default())
        .map_err(|e| SfdError::A5Violated {
            reason: format!("no critical point from eta = 0 at x = 0: {e}"),
        })?
        .eta;
    let p0 = PhasePoint::at_rest(&zs, &zs, &gamma, t);
    let jac = forcing_jacobians(sys, &p0)?;
    let lu = Factored::new(&jac.p2.deta);
    if lu.is_singular() {
        return Err(SfdError::SingularJacobian {
            x: vec![0.0; s],
            xd: vec![0.0; s],
            t: t.f64(),
            eta: gamma.iter().map(|v| v.f64()).collect(),
        });
    }
    let phi = -lu.solve_mat(&jac.p2.dx).expect("nonsingular");

    // Hessians of each P2 component in z = (x, eta)
    let h = T::lit(opts.hessian_step);
    let m = s + f;
    let eval = |z: &DVector<T>| -> Result<DVector<T>> {
        let x = z.rows(0, s).into_owned();
        let eta = z.rows(s, f).into_owned();
        limit_p2(sys, &PhasePoint::at_rest(&x, &zs, &eta, t))
    };
    let mut z0 = DVector::zeros(m);
    z0.rows_mut(s, f).copy_from(&gamma);
    let mut hess = vec![DMatrix::<T>::zeros(m, m); f];
    for a in 0..m {
        for b in a..m {
            let shifted = |da: T, db: T| {
                let mut z = z0.clone();
                z[a] += da;
                z[b] += db;
                eval(&z)
            };
            let v = (shifted(h, h)? - shifted(h, -h)? - shifted(-h, h)? + shifted(-h, -h)?) / (T::lit(4.0) * h * h);
            for i in 0..f {
                hess[i][(a, b)] = v[i];
                hess[i][(b, a)] = v[i];
            }
        }
    }
    // second derivative of P2(x, G0(x)) without the d2 G0 term
    let hx: Vec<DMatrix<T>> = hess
        .iter()
        .map(|hi| {
            let pxx = hi.view((0, 0), (s, s)).into_owned();
            let pxe = hi.view((0, s), (s, f)).into_owned();
            let pee = hi.view((s, s), (f, f)).into_owned();
            let cross = &pxe * &phi;
            pxx + &cross + cross.transpose() + phi.transpose() * pee * &phi
        })
        .collect();
    let jinv = lu.solve_mat(&DMatrix::identity(f, f)).expect("nonsingular");
    let theta: Vec<DMatrix<T>> = (0..f)
        .map(|k| {
            let mut th = DMatrix::zeros(s, s);
            for (i, hi) in hx.iter().enumerate() {
                th -= hi * (jinv[(k, i)] * T::lit(0.5));
            }
            (&th + th.transpose()) * T::lit(0.5)
        })
        .collect();

    let tol = T::lit(opts.hypothesis_tol);
    let mut warnings = Vec::new();
    if inf_norm(&gamma) > tol {
        warnings.push(format!("equilibrium offset Gamma = {:?} is not zero", gamma.iter().map(|v| v.f64()).collect::<Vec<_>>()));
    }
    if mat_inf_norm(&phi) > tol {
        warnings.push("linear coupling Phi is not zero".into());
    }
    if inf_norm(&jac.p2.dt) > tol {
        warnings.push("P2 depends explicitly on time at the equilibrium".into());
    }
    Ok(LocalExpansion {
        gamma,
        phi,
        theta,
        t,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalKind {
    StaticCondensation,
    ModalDerivatives,
}

/// Equilibrium-local reduced model `xdd = P1(x, xd, eta(x), 0, t; 0)`.
#[derive(Clone)]
pub struct LocalModel<T: Scalar> {
    sys: Arc<dyn MechanicalSystem<T>>,
    pub kind: LocalKind,
    pub expansion: LocalExpansion<T>,
    /// Amplitude exponent of the validity neighbourhood in eps.
    pub validity_exponent: f64,
}

pub fn static_condensation_model<T: Scalar>(sys: Arc<dyn MechanicalSystem<T>>, expansion: LocalExpansion<T>) -> LocalModel<T> {
    LocalModel {
        sys,
        kind: LocalKind::StaticCondensation,
        expansion,
        validity_exponent: 1.0 / 3.0,
    }
}

pub fn modal_derivatives_model<T: Scalar>(sys: Arc<dyn MechanicalSystem<T>>, expansion: LocalExpansion<T>) -> LocalModel<T> {
    LocalModel {
        sys,
        kind: LocalKind::ModalDerivatives,
        expansion,
        validity_exponent: 0.25,
    }
}

impl<T: Scalar> LocalModel<T> {
    pub fn fast_state(&self, x: &DVector<T>) -> DVector<T> {
        match self.kind {
            LocalKind::StaticCondensation => DVector::zeros(self.expansion.theta.len()),
            LocalKind::ModalDerivatives => self.expansion.quadratic(x),
        }
    }

    pub fn rhs(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<DVector<T>> {
        let eta = self.fast_state(x);
        limit_p1(self.sys.as_ref(), &PhasePoint::at_rest(x, xd, &eta, t))
    }

    pub fn simulate(&self, x0: &DVector<T>, xd0: &DVector<T>, t_eval: &[T], opts: &IntegratorOptions) -> Result<Trajectory<T>> {
        let s = x0.len();
        let mut g = |t: T, z: &DVector<T>| {
            let x = z.rows(0, s).into_owned();
            let xd = z.rows(s, s).into_owned();
            let a = self.rhs(&x, &xd, t)?;
            Ok(crate::linalg::concat(&[&xd, &a]))
        };
        integrate(&mut g, &crate::linalg::concat(&[x0, xd0]), t_eval, opts)
    }
}

/// Cubic reduced model on the slow spectral submanifold of the two-DOF
/// example, `y = alpha x^2 + beta x xd + gamma xd^2 + O(3)`.
#[derive(Debug, Clone, Serialize)]
pub struct SsmCubicModel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub d: f64,
    pub params: SsmParams,
    /// Coefficient of `x^2 xd`.
    pub damping_cubic: f64,
    /// Coefficient of `x xd^2`.
    pub stiffness_cubic: f64,
    /// Coefficient of `x^3`.
    pub cubic: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SsmParams {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu1: f64,
}

impl From<TwoDofParams> for SsmParams {
    fn from(p: TwoDofParams) -> Self {
        Self {
            c1: p.c1,
            c2: p.c2,
            k1: p.k1,
            k2: p.k2,
            a: p.a,
            b: p.b,
            c: p.c,
            mu1: p.mu1,
        }
    }
}

/// Matrix of the linear system for `(alpha, beta, gamma)`.
pub fn ssm_matrix(p: &SsmParams) -> Matrix3<f64> {
    let (c1, c2, k1, k2) = (p.c1, p.c2, p.k1, p.k2);
    Matrix3::new(
        k2 - 2.0 * k1,
        k1 * (c1 - c2),
        2.0 * k1 * k1,
        2.0 * (c2 - c1),
        k2 - 4.0 * k1 + c1 * c1 - c1 * c2,
        2.0 * k1 * (3.0 * c1 - c2),
        2.0,
        c2 - 3.0 * c1,
        k2 - 2.0 * k1 + 4.0 * c1 * c1 - 2.0 * c1 * c2,
    )
}

/// Determinant of the SSM system in factored form.
pub fn ssm_denominator(p: &SsmParams) -> f64 {
    let (c1, c2, k1, k2) = (p.c1, p.c2, p.k1, p.k2);
    (c1 * c1 - c1 * c2 + k2)
        * (4.0 * c1 * c1 * k2 - 8.0 * c1 * c2 * k1 - 2.0 * c1 * c2 * k2 + 4.0 * c2 * c2 * k1 + 16.0 * k1 * k1
            - 8.0 * k1 * k2
            + k2 * k2)
}

/// Closed-form `(alpha, beta, gamma)`.
pub fn ssm_closed_form(p: &SsmParams) -> (f64, f64, f64) {
    let (c1, c2, k1, k2, c) = (p.c1, p.c2, p.k1, p.k2, p.c);
    let d = ssm_denominator(p);
    let alpha = -c / d
        * (4.0 * c1.powi(4) - 6.0 * c1.powi(3) * c2 + 2.0 * c1 * c1 * c2 * c2 + 5.0 * c1 * c1 * k2
            - c1 * c2 * (2.0 * k1 + 3.0 * k2)
            + 2.0 * c2 * c2 * k1
            + 8.0 * k1 * k1
            - 6.0 * k1 * k2
            + k2 * k2);
    let beta = -2.0 * c / d
        * (4.0 * c1 * k1 + k2 * (c1 - c2) + 2.0 * c1 * c2 * c2 - 6.0 * c1 * c1 * c2 + 4.0 * c1.powi(3));
    let gamma = -2.0 * c / d * (2.0 * c1 * c1 - 3.0 * c1 * c2 + c2 * c2 + 4.0 * k1 - k2);
    (alpha, beta, gamma)
}

/// Threshold on `|D|` below which the SSM model is not constructed.
pub const RESONANCE_TOL: f64 = 1e-8;

/// Solves for the SSM coefficients and assembles the cubic reduced model.
pub fn ssm_cubic(p: SsmParams) -> Result<SsmCubicModel> {
    let d = ssm_denominator(&p);
    if !(d.abs() > RESONANCE_TOL) {
        return Err(SfdError::NearResonance { d });
    }
    let m = ssm_matrix(&p);
    let sol = m
        .lu()
        .solve(&Vector3::new(-p.c, 0.0, 0.0))
        .ok_or(SfdError::NearResonance { d })?;
    let (alpha, beta, gamma) = (sol[0], sol[1], sol[2]);
    Ok(SsmCubicModel {
        alpha,
        beta,
        gamma,
        d,
        params: p,
        damping_cubic: p.mu1 + p.a * beta,
        stiffness_cubic: p.a * gamma,
        cubic: p.b + p.a * alpha,
    })
}

impl SsmCubicModel {
    /// `xdd` of the cubic SSM model.
    pub fn rhs(&self, x: f64, xd: f64) -> f64 {
        let p = &self.params;
        -((p.c1 + self.damping_cubic * x * x) * xd + (p.k1 + self.stiffness_cubic * xd * xd) * x + self.cubic * x.powi(3))
    }

    /// Residual of the 3x3 system at the stored coefficients.
    pub fn residual(&self) -> f64 {
        let r = ssm_matrix(&self.params) * Vector3::new(self.alpha, self.beta, self.gamma) + Vector3::new(self.params.c, 0.0, 0.0);
        r.amax()
    }
}

/// Cubic coefficients of the three local models.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CubicCoefficients {
    pub sc: f64,
    pub md: f64,
    pub ssm: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub k2: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub coeffs: CubicCoefficients,
    /// `|(b + a alpha) - (b + a Theta)|`.
    pub gap: f64,
    /// Largest `|x|` difference from the SSM trajectory.
    pub sc_divergence: f64,
    pub md_divergence: f64,
    pub sweep: Vec<SweepPoint>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub times: Vec<f64>,
    /// Rows `(x_sc, xd_sc, x_md, xd_md, x_ssm, xd_ssm)`.
    #[serde(skip)]
    pub states: Vec<[f64; 6]>,
}

/// Integrates the static-condensation, modal-derivative and SSM models of
/// the two-DOF example from the same slow state.
pub fn compare_reductions(
    params: TwoDofParams,
    x0: f64,
    xd0: f64,
    t_eval: &[f64],
    opts: &IntegratorOptions,
) -> Result<ComparisonReport> {
    let ssm = ssm_cubic(params.into())?;
    let sys: Arc<dyn MechanicalSystem<f64>> = Arc::new(crate::presets::TwoDofSsm::new(params, 1.0));
    let exp = local_expansion(sys.as_ref(), 0.0, LocalOptions::default())?;
    let theta = exp.theta[0][(0, 0)];
    let warnings = exp.warnings.clone();
    let sc = static_condensation_model(sys.clone(), exp.clone());
    let md = modal_derivatives_model(sys, exp);
    let coeffs = CubicCoefficients {
        sc: params.b,
        md: params.b + params.a * theta,
        ssm: ssm.cubic,
    };
    let v = |x: f64| DVector::from_element(1, x);
    let tr_sc = sc.simulate(&v(x0), &v(xd0), t_eval, opts)?;
    let tr_md = md.simulate(&v(x0), &v(xd0), t_eval, opts)?;
    let mut g = |_t: f64, z: &DVector<f64>| Ok(DVector::from_vec(vec![z[1], ssm.rhs(z[0], z[1])]));
    let tr_ssm = integrate(&mut g, &DVector::from_vec(vec![x0, xd0]), t_eval, opts)?;
    let states: Vec<[f64; 6]> = (0..tr_ssm.len())
        .map(|i| {
            let (a, b, c) = (&tr_sc.states[i], &tr_md.states[i], &tr_ssm.states[i]);
            [a[0], a[1], b[0], b[1], c[0], c[1]]
        })
        .collect();
    let sc_div = states.iter().map(|r| (r[0] - r[4]).abs()).fold(0.0, f64::max);
    let md_div = states.iter().map(|r| (r[2] - r[4]).abs()).fold(0.0, f64::max);
    Ok(ComparisonReport {
        coeffs,
        gap: (coeffs.ssm - coeffs.md).abs(),
        sc_divergence: sc_div,
        md_divergence: md_div,
        sweep: Vec::new(),
        warnings,
        times: tr_ssm.times.clone(),
        states,
    })
}

/// SSM-vs-MD cubic gap `|a alpha + a c / k2|` over a sweep of `k2`.
pub fn gap_sweep(params: TwoDofParams, k2_values: &[f64]) -> Vec<SweepPoint> {
    k2_values
        .iter()
        .filter_map(|&k2| {
            let p = TwoDofParams { k2, ..params };
            let ssm = ssm_cubic(p.into()).ok()?;
            let md = p.b - p.a * p.c / p.k2;
            Some(SweepPoint {
                k2,
                gap: (ssm.cubic - md).abs(),
            })
        })
        .collect()
}
