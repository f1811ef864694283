//! Two-degree-of-freedom oscillator with quadratic coupling
//!
//! ```text
//! x'' + (c1 + mu1 x^2) x' + k1 x + a x y + b x^3 = 0
//! y'' + c2 y' + k2 y + c x^2 = 0
//! ```
//!
//! embedded in the eps-family `eps y'' + c2 y' + (k2 / eps) y + c x^2 = 0`,
//! `a x (y / eps)`, which is the physical system at `eps = 1`.

use crate::scalar::Scalar;
use crate::system::{DomainBox, MechanicalSystem, Partition, PhasePoint, TimeDependence};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoDofParams {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu1: f64,
}

#[derive(Debug, Clone)]
pub struct TwoDofSsm {
    pub params: TwoDofParams,
    eps: f64,
}

impl TwoDofSsm {
    pub fn new(params: TwoDofParams, eps: f64) -> Self {
        Self { params, eps }
    }

    fn slow<T: Scalar>(&self, x: T, xd: T, z: T) -> T {
        let p = &self.params;
        let l = T::lit;
        -((l(p.c1) + l(p.mu1) * x * x) * xd + l(p.k1) * x + l(p.a) * x * z + l(p.b) * x * x * x)
    }
}

impl<T: Scalar> MechanicalSystem<T> for TwoDofSsm {
    fn name(&self) -> &str {
        "twodof-ssm"
    }

    fn partition(&self) -> Partition {
        Partition::new(2, 1)
    }

    fn time_dependence(&self) -> TimeDependence {
        TimeDependence::Autonomous
    }

    fn domain(&self) -> DomainBox {
        DomainBox {
            x: vec![(-0.5, 0.5)],
            xd: vec![(-0.5, 0.5)],
            y: vec![(-0.5, 0.5)],
            yd: vec![(-0.5, 0.5)],
            t: (0.0, 0.0),
        }
    }

    fn eps_nominal(&self) -> T {
        T::lit(self.eps)
    }

    fn mass(&self, _q: &DVector<T>, _t: T, eps: T) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![T::one(), eps]))
    }

    fn force(&self, q: &DVector<T>, qd: &DVector<T>, _t: T, eps: T) -> DVector<T> {
        let p = &self.params;
        let l = T::lit;
        let (x, y) = (q[0], q[1]);
        let f2 = -(l(p.c2) * qd[1] + l(p.k2) * y / eps + l(p.c) * x * x);
        DVector::from_vec(vec![self.slow(x, qd[0], y / eps), f2])
    }

    fn scaled_mass(&self, _x: &DVector<T>, _eta: &DVector<T>, _t: T, eps: T) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![T::one(), eps]))
    }

    fn scaled_force(&self, p: &PhasePoint<T>, _eps: T) -> DVector<T> {
        let q = &self.params;
        let l = T::lit;
        let x = p.x[0];
        let f2 = -(l(q.c2) * p.yd[0] + l(q.k2) * p.eta[0] + l(q.c) * x * x);
        DVector::from_vec(vec![self.slow(x, p.xd[0], p.eta[0]), f2])
    }

    fn regularized(&self, p: &PhasePoint<T>, eps: T) -> Option<(DMatrix<T>, DVector<T>)> {
        Some((DMatrix::identity(2, 2), MechanicalSystem::<T>::scaled_force(self, p, eps)))
    }
}
