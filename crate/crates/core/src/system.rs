//! The mechanical-system abstraction and the slow/fast evaluation point.

use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Slow/fast split of the generalized coordinates, `q = (x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Partition {
    /// Total degrees of freedom.
    pub n: usize,
    /// Slow degrees of freedom.
    pub s: usize,
}

impl Partition {
    pub fn new(n: usize, s: usize) -> Self {
        assert!(s >= 1 && s < n, "partition requires 1 <= s < n");
        Self { n, s }
    }

    /// Fast degrees of freedom.
    pub fn f(&self) -> usize {
        self.n - self.s
    }
}

/// How the equations depend on time.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum TimeDependence {
    Autonomous,
    Periodic { period: f64 },
    Quasiperiodic { frequencies: Vec<f64> },
    Aperiodic { a: f64, b: f64 },
}

impl TimeDependence {
    /// Admissible integration interval, if restricted.
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self {
            TimeDependence::Aperiodic { a, b } => Some((*a, *b)),
            _ => None,
        }
    }

    /// Time range used for domain sampling.
    pub fn sample_range(&self) -> (f64, f64) {
        match self {
            TimeDependence::Autonomous => (0.0, 0.0),
            TimeDependence::Periodic { period } => (0.0, *period),
            TimeDependence::Quasiperiodic { frequencies } => {
                let w = frequencies.iter().fold(f64::INFINITY, |m, w| m.min(w.abs()));
                (0.0, if w.is_finite() && w > 0.0 { 2.0 * std::f64::consts::PI / w } else { 0.0 })
            }
            TimeDependence::Aperiodic { a, b } => (*a, *b),
        }
    }

    /// A characteristic slow period (used to cap backward integration).
    pub fn characteristic_period(&self) -> f64 {
        let (a, b) = self.sample_range();
        if b > a {
            b - a
        } else {
            2.0 * std::f64::consts::PI
        }
    }
}

/// Sampling box for the slow state and time; fast bounds are used for
/// consistency checks only.
#[derive(Debug, Clone, Serialize)]
pub struct DomainBox {
    pub x: Vec<(f64, f64)>,
    pub xd: Vec<(f64, f64)>,
    pub y: Vec<(f64, f64)>,
    pub yd: Vec<(f64, f64)>,
    pub t: (f64, f64),
}

impl DomainBox {
    /// The default box: |x|, |xd| <= 2, |y|, |yd| <= 1, t over the sample range.
    pub fn standard(p: Partition, td: &TimeDependence) -> Self {
        Self {
            x: vec![(-2.0, 2.0); p.s],
            xd: vec![(-2.0, 2.0); p.s],
            y: vec![(-1.0, 1.0); p.f()],
            yd: vec![(-1.0, 1.0); p.f()],
            t: td.sample_range(),
        }
    }
}

/// Evaluation point `(x, xd, eta, yd, t)` of the scaled equations.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint<T: Scalar> {
    pub x: DVector<T>,
    pub xd: DVector<T>,
    pub eta: DVector<T>,
    pub yd: DVector<T>,
    pub t: T,
}

impl<T: Scalar> PhasePoint<T> {
    pub fn new(x: DVector<T>, xd: DVector<T>, eta: DVector<T>, yd: DVector<T>, t: T) -> Self {
        Self { x, xd, eta, yd, t }
    }

    /// Point on the zero-fast-velocity slice.
    pub fn at_rest(x: &DVector<T>, xd: &DVector<T>, eta: &DVector<T>, t: T) -> Self {
        Self {
            x: x.clone(),
            xd: xd.clone(),
            eta: eta.clone(),
            yd: DVector::zeros(eta.len()),
            t,
        }
    }

    /// Packs `(x, xd, eta, yd, t)` into one vector.
    pub fn pack(&self) -> DVector<T> {
        let (s, f) = (self.x.len(), self.eta.len());
        let mut z = DVector::zeros(2 * s + 2 * f + 1);
        z.rows_mut(0, s).copy_from(&self.x);
        z.rows_mut(s, s).copy_from(&self.xd);
        z.rows_mut(2 * s, f).copy_from(&self.eta);
        z.rows_mut(2 * s + f, f).copy_from(&self.yd);
        z[2 * s + 2 * f] = self.t;
        z
    }

    pub fn unpack(z: &DVector<T>, s: usize, f: usize) -> Self {
        Self {
            x: z.rows(0, s).into_owned(),
            xd: z.rows(s, s).into_owned(),
            eta: z.rows(2 * s, f).into_owned(),
            yd: z.rows(2 * s + f, f).into_owned(),
            t: z[2 * s + 2 * f],
        }
    }
}

/// Partial derivatives of one forcing block with respect to each argument
/// group of the scaled equations.
#[derive(Debug, Clone)]
pub struct BlockJacobian<T: Scalar> {
    pub dx: DMatrix<T>,
    pub dxd: DMatrix<T>,
    pub deta: DMatrix<T>,
    pub dyd: DMatrix<T>,
    pub dt: DVector<T>,
    pub deps: DVector<T>,
}

/// Jacobians of `(P1, P2)` at `eps = 0`.
#[derive(Debug, Clone)]
pub struct ForcingJacobians<T: Scalar> {
    pub p1: BlockJacobian<T>,
    pub p2: BlockJacobian<T>,
}

/// A mechanical system `M(q,t) q'' - F(q, q', t) = 0` together with its
/// eps-scaled form in the variables `(x, eta = y / eps)`.
///
/// Evaluators must be pure; they are called concurrently.
pub trait MechanicalSystem<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn partition(&self) -> Partition;

    fn time_dependence(&self) -> TimeDependence;

    fn domain(&self) -> DomainBox {
        DomainBox::standard(self.partition(), &self.time_dependence())
    }

    /// The value of the small parameter the system is configured with.
    fn eps_nominal(&self) -> T;

    /// Unscaled mass matrix `M(q, t)` of the eps-family member `eps`.
    fn mass(&self, q: &DVector<T>, t: T, eps: T) -> DMatrix<T>;

    /// Unscaled force vector `F(q, q', t)`.
    fn force(&self, q: &DVector<T>, qd: &DVector<T>, t: T, eps: T) -> DVector<T>;

    /// Mass matrix in the scaled variables, valid for `eps > 0`.
    fn scaled_mass(&self, x: &DVector<T>, eta: &DVector<T>, t: T, eps: T) -> DMatrix<T>;

    /// Force vector in the scaled variables, valid for `eps > 0`.
    fn scaled_force(&self, p: &PhasePoint<T>, eps: T) -> DVector<T>;

    /// Row/column rescaled equations `(A, b)` with `A^{-1} b = (P1, P2)`,
    /// finite and nonsingular down to and including `eps = 0`.
    ///
    /// Systems that cannot provide this fall back to extrapolation of the
    /// decoupled forcings from `eps > 0`.
    fn regularized(&self, _p: &PhasePoint<T>, _eps: T) -> Option<(DMatrix<T>, DVector<T>)> {
        None
    }

    /// Analytic derivatives of `(P1, P2)` at `eps = 0`.
    fn limit_jacobians(&self, _p: &PhasePoint<T>) -> Option<ForcingJacobians<T>> {
        None
    }

    /// Default Newton guess for the critical manifold at `(x, xd, t)`.
    fn branch_guess(&self, _x: &DVector<T>, _xd: &DVector<T>, _t: T) -> DVector<T> {
        DVector::zeros(self.partition().f())
    }
}

/// Hides a system's analytic derivatives so that every derivative is
/// computed by finite differences.
pub struct FiniteDifferenced<S>(pub S);

impl<T: Scalar, S: MechanicalSystem<T>> MechanicalSystem<T> for FiniteDifferenced<S> {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn partition(&self) -> Partition {
        self.0.partition()
    }
    fn time_dependence(&self) -> TimeDependence {
        self.0.time_dependence()
    }
    fn domain(&self) -> DomainBox {
        self.0.domain()
    }
    fn eps_nominal(&self) -> T {
        self.0.eps_nominal()
    }
    fn mass(&self, q: &DVector<T>, t: T, eps: T) -> DMatrix<T> {
        self.0.mass(q, t, eps)
    }
    fn force(&self, q: &DVector<T>, qd: &DVector<T>, t: T, eps: T) -> DVector<T> {
        self.0.force(q, qd, t, eps)
    }
    fn scaled_mass(&self, x: &DVector<T>, eta: &DVector<T>, t: T, eps: T) -> DMatrix<T> {
        self.0.scaled_mass(x, eta, t, eps)
    }
    fn scaled_force(&self, p: &PhasePoint<T>, eps: T) -> DVector<T> {
        self.0.scaled_force(p, eps)
    }
    fn regularized(&self, p: &PhasePoint<T>, eps: T) -> Option<(DMatrix<T>, DVector<T>)> {
        self.0.regularized(p, eps)
    }
    fn branch_guess(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> DVector<T> {
        self.0.branch_guess(x, xd, t)
    }
}

/// Hides both the analytic derivatives and the regularized form, leaving
/// only the eps > 0 evaluators.
pub struct EvaluatorsOnly<S>(pub S);

impl<T: Scalar, S: MechanicalSystem<T>> MechanicalSystem<T> for EvaluatorsOnly<S> {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn partition(&self) -> Partition {
        self.0.partition()
    }
    fn time_dependence(&self) -> TimeDependence {
        self.0.time_dependence()
    }
    fn domain(&self) -> DomainBox {
        self.0.domain()
    }
    fn eps_nominal(&self) -> T {
        self.0.eps_nominal()
    }
    fn mass(&self, q: &DVector<T>, t: T, eps: T) -> DMatrix<T> {
        self.0.mass(q, t, eps)
    }
    fn force(&self, q: &DVector<T>, qd: &DVector<T>, t: T, eps: T) -> DVector<T> {
        self.0.force(q, qd, t, eps)
    }
    fn scaled_mass(&self, x: &DVector<T>, eta: &DVector<T>, t: T, eps: T) -> DMatrix<T> {
        self.0.scaled_mass(x, eta, t, eps)
    }
    fn scaled_force(&self, p: &PhasePoint<T>, eps: T) -> DVector<T> {
        self.0.scaled_force(p, eps)
    }
    fn branch_guess(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> DVector<T> {
        self.0.branch_guess(x, xd, t)
    }
}
