//! Slow-manifold chart `y = eps G0 + eps^2 G1`, `yd = eps H0 + eps^2 H1`.

use crate::critical::{classify_solution, solve_g0, CriticalPoint, NewtonOptions};
use crate::decomposition::{forcing_jacobians, limit_p1};
use crate::error::{Result, SfdError};
use crate::linalg::{to_f64_vec, Factored};
use crate::scalar::Scalar;
use crate::system::{ForcingJacobians, MechanicalSystem, PhasePoint};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Branch selector: Newton initial guess as a function of `(x, xd, t)`.
pub type BranchGuess<T> = Arc<dyn Fn(&DVector<T>, &DVector<T>, T) -> DVector<T> + Send + Sync>;

/// Quantities shared by all chart terms at one base point.
#[derive(Debug, Clone)]
pub struct ChartCore<T: Scalar> {
    pub eta: DVector<T>,
    pub jac: ForcingJacobians<T>,
    /// `P1(x, xd, G0, 0, t; 0)`.
    pub p1: DVector<T>,
}

/// Chart terms at one base point.
#[derive(Debug, Clone)]
pub struct ChartValues<T: Scalar> {
    pub g0: DVector<T>,
    pub h0: DVector<T>,
    pub g1: Option<DVector<T>>,
    pub h1: Option<DVector<T>>,
}

const CACHE_LIMIT: usize = 200_000;

pub struct SlowManifoldChart<T: Scalar> {
    sys: Arc<dyn MechanicalSystem<T>>,
    pub order: usize,
    pub eps: T,
    guess: Option<BranchGuess<T>>,
    cache: Option<Mutex<HashMap<Vec<u64>, ChartCore<T>>>>,
    warm: Option<Mutex<Option<DVector<T>>>>,
}

impl<T: Scalar> Clone for SlowManifoldChart<T> {
    fn clone(&self) -> Self {
        Self {
            sys: self.sys.clone(),
            order: self.order,
            eps: self.eps,
            guess: self.guess.clone(),
            cache: self.cache.as_ref().map(|_| Mutex::new(HashMap::new())),
            warm: self.warm.as_ref().map(|_| Mutex::new(None)),
        }
    }
}

fn key<T: Scalar>(x: &DVector<T>, xd: &DVector<T>, t: T) -> Vec<u64> {
    x.iter()
        .chain(xd.iter())
        .chain(std::iter::once(&t))
        .map(|v| v.f64().to_bits())
        .collect()
}

impl<T: Scalar> SlowManifoldChart<T> {
    pub fn new(sys: Arc<dyn MechanicalSystem<T>>, eps: T, order: usize) -> Result<Self> {
        if order > 1 {
            return Err(SfdError::InvalidArgument(format!("chart order must be 0 or 1, got {order}")));
        }
        Ok(Self {
            sys,
            order,
            eps,
            guess: None,
            cache: Some(Mutex::new(HashMap::new())),
            warm: None,
        })
    }

    /// Selects the branch by an explicit initial guess.
    pub fn with_guess(mut self, guess: BranchGuess<T>) -> Self {
        self.guess = Some(guess);
        self
    }

    /// Reuses the previous solution as the next Newton guess. Only useful for
    /// sequential queries along a trajectory.
    pub fn with_warm_start(mut self) -> Self {
        self.warm = Some(Mutex::new(None));
        self
    }

    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order.min(1);
        self
    }

    pub fn system(&self) -> &dyn MechanicalSystem<T> {
        self.sys.as_ref()
    }

    pub fn system_arc(&self) -> Arc<dyn MechanicalSystem<T>> {
        self.sys.clone()
    }

    fn initial_guess(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> DVector<T> {
        if let Some(w) = &self.warm {
            if let Some(prev) = w.lock().expect("warm-start lock").clone() {
                return prev;
            }
        }
        match &self.guess {
            Some(g) => g(x, xd, t),
            None => self.sys.branch_guess(x, xd, t),
        }
    }

    /// `G0` and the limit Jacobians at `(x, xd, G0, 0, t)`.
    pub fn core(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<ChartCore<T>> {
        let k = self.cache.as_ref().map(|_| key(x, xd, t));
        if let (Some(c), Some(k)) = (&self.cache, &k) {
            if let Some(hit) = c.lock().expect("cache lock").get(k) {
                return Ok(hit.clone());
            }
        }
        let guess = self.initial_guess(x, xd, t);
        let sol = solve_g0(self.system(), x, xd, t, &guess, NewtonOptions::default())?;
        if let Some(w) = &self.warm {
            *w.lock().expect("warm-start lock") = Some(sol.eta.clone());
        }
        let p = PhasePoint::at_rest(x, xd, &sol.eta, t);
        let jac = forcing_jacobians(self.system(), &p)?;
        let p1 = limit_p1(self.system(), &p)?;
        let core = ChartCore { eta: sol.eta, jac, p1 };
        if let (Some(c), Some(k)) = (&self.cache, k) {
            let mut m = c.lock().expect("cache lock");
            if m.len() >= CACHE_LIMIT {
                m.clear();
            }
            m.insert(k, core.clone());
        }
        Ok(core)
    }

    /// Critical point with tangent matrices and spectrum.
    pub fn critical_point(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<CriticalPoint<T>> {
        let guess = self.initial_guess(x, xd, t);
        let sol = solve_g0(self.system(), x, xd, t, &guess, NewtonOptions::default())?;
        classify_solution(self.system(), x, xd, t, sol)
    }

    pub fn g0(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<DVector<T>> {
        Ok(self.core(x, xd, t)?.eta)
    }

    fn eta_jacobian(&self, c: &ChartCore<T>, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<Factored<T>> {
        let lu = Factored::new(&c.jac.p2.deta);
        if lu.is_singular() {
            return Err(SfdError::SingularJacobian {
                x: to_f64_vec(x),
                xd: to_f64_vec(xd),
                t: t.f64(),
                eta: to_f64_vec(&c.eta),
            });
        }
        Ok(lu)
    }

    /// `(dG0/dx, dG0/dxd, dG0/dt)` by the implicit function theorem.
    pub fn implicit_jacobians(
        &self,
        x: &DVector<T>,
        xd: &DVector<T>,
        t: T,
    ) -> Result<(DMatrix<T>, DMatrix<T>, DVector<T>)> {
        let c = self.core(x, xd, t)?;
        implicit_from_core(&c, &self.eta_jacobian(&c, x, xd, t)?)
    }

    pub fn h0(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<DVector<T>> {
        let c = self.core(x, xd, t)?;
        let lu = self.eta_jacobian(&c, x, xd, t)?;
        h0_from_core(&c, &lu, xd)
    }

    pub fn g1(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<DVector<T>> {
        let c = self.core(x, xd, t)?;
        let lu = self.eta_jacobian(&c, x, xd, t)?;
        let h0 = h0_from_core(&c, &lu, xd)?;
        let rhs = &c.jac.p2.dyd * h0 + &c.jac.p2.deps;
        Ok(-lu.solve(&rhs).expect("nonsingular"))
    }

    /// `H1 = dG1/dx xd + dG1/dxd P1 + dG1/dt` with central differences of
    /// `G1` and one Richardson pass.
    pub fn h1(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<DVector<T>> {
        let c = self.core(x, xd, t)?;
        let s = x.len();
        let mut out = DVector::zeros(c.eta.len());
        let weight = |j: usize| -> T {
            if j < s {
                xd[j]
            } else if j < 2 * s {
                c.p1[j - s]
            } else {
                T::one()
            }
        };
        for j in 0..(2 * s + 1) {
            let w = weight(j);
            if w == T::zero() {
                continue;
            }
            let base = if j < s {
                x[j]
            } else if j < 2 * s {
                xd[j - s]
            } else {
                t
            };
            let h = T::lit(1e-5) * (T::one() + base.abs());
            let d = |h: T| -> Result<DVector<T>> {
                let at = |sign: T| {
                    let (mut xx, mut xv, mut tt) = (x.clone(), xd.clone(), t);
                    if j < s {
                        xx[j] += sign * h;
                    } else if j < 2 * s {
                        xv[j - s] += sign * h;
                    } else {
                        tt += sign * h;
                    }
                    self.g1(&xx, &xv, tt)
                };
                Ok((at(T::one())? - at(-T::one())?) / (h + h))
            };
            let coarse = d(h)?;
            let fine = d(h / T::lit(2.0))?;
            let deriv = (fine * T::lit(4.0) - coarse) / T::lit(3.0);
            out += deriv * w;
        }
        Ok(out)
    }

    /// All chart terms up to the chart order.
    pub fn values(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<ChartValues<T>> {
        let c = self.core(x, xd, t)?;
        let lu = self.eta_jacobian(&c, x, xd, t)?;
        let h0 = h0_from_core(&c, &lu, xd)?;
        let (g1, h1) = if self.order >= 1 {
            (Some(self.g1(x, xd, t)?), Some(self.h1(x, xd, t)?))
        } else {
            (None, None)
        };
        Ok(ChartValues { g0: c.eta, h0, g1, h1 })
    }

    /// Fast position and velocity `(y, yd)` on the chart.
    pub fn lift(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<(DVector<T>, DVector<T>)> {
        let v = self.values(x, xd, t)?;
        let e = self.eps;
        let mut y = &v.g0 * e;
        let mut yd = &v.h0 * e;
        if let (Some(g1), Some(h1)) = (v.g1, v.h1) {
            y += g1 * (e * e);
            yd += h1 * (e * e);
        }
        Ok((y, yd))
    }

    /// Full state `(x, xd, y, yd)` packed in the trajectory column order.
    pub fn lift_state(&self, x: &DVector<T>, xd: &DVector<T>, t: T) -> Result<DVector<T>> {
        let (y, yd) = self.lift(x, xd, t)?;
        Ok(crate::linalg::concat(&[x, xd, &y, &yd]))
    }

    /// Euclidean distance of the fast state from the chart.
    pub fn manifold_distance(
        &self,
        x: &DVector<T>,
        xd: &DVector<T>,
        y: &DVector<T>,
        yd: &DVector<T>,
        t: T,
    ) -> Result<T> {
        let (ly, lyd) = self.lift(x, xd, t)?;
        let dy = y - ly;
        let dyd = yd - lyd;
        Ok((dy.norm_squared() + dyd.norm_squared()).sqrt())
    }
}

fn implicit_from_core<T: Scalar>(
    c: &ChartCore<T>,
    lu: &Factored<T>,
) -> Result<(DMatrix<T>, DMatrix<T>, DVector<T>)> {
    let gx = -lu.solve_mat(&c.jac.p2.dx).expect("nonsingular");
    let gxd = -lu.solve_mat(&c.jac.p2.dxd).expect("nonsingular");
    let gt = -lu.solve(&c.jac.p2.dt).expect("nonsingular");
    Ok((gx, gxd, gt))
}

fn h0_from_core<T: Scalar>(c: &ChartCore<T>, lu: &Factored<T>, xd: &DVector<T>) -> Result<DVector<T>> {
    let (gx, gxd, gt) = implicit_from_core(c, lu)?;
    Ok(gx * xd + gxd * &c.p1 + gt)
}

/// `(dG0/dx, dG0/dxd, dG0/dt)` at a solved critical point.
pub fn implicit_jacobians<T: Scalar>(
    sys: &dyn MechanicalSystem<T>,
    cp: &CriticalPoint<T>,
) -> Result<(DMatrix<T>, DMatrix<T>, DVector<T>)> {
    let jac = forcing_jacobians(sys, &cp.phase_point())?;
    let lu = Factored::new(&jac.p2.deta);
    if lu.is_singular() {
        return Err(SfdError::SingularJacobian {
            x: to_f64_vec(&cp.x),
            xd: to_f64_vec(&cp.xd),
            t: cp.t.f64(),
            eta: to_f64_vec(&cp.eta),
        });
    }
    let core = ChartCore {
        eta: cp.eta.clone(),
        jac,
        p1: DVector::zeros(cp.x.len()),
    };
    implicit_from_core(&core, &lu)
}
