//! Agreement of the scaled and unscaled evaluators.

use crate::error::{Result, SfdError};
use crate::linalg::{inf_norm, mat_inf_norm, Factored};
use crate::scalar::Scalar;
use crate::system::{MechanicalSystem, PhasePoint};
use nalgebra::DVector;
use serde::Serialize;

/// Unscaled state `(x, xd, y, yd, t)`.
#[derive(Debug, Clone)]
pub struct FullState<T: Scalar> {
    pub x: DVector<T>,
    pub xd: DVector<T>,
    pub y: DVector<T>,
    pub yd: DVector<T>,
    pub t: T,
}

impl<T: Scalar> FullState<T> {
    /// Reads the `eta` slot of a sampled phase point as `y`.
    pub fn from_sample(p: &PhasePoint<T>) -> Self {
        Self {
            x: p.x.clone(),
            xd: p.xd.clone(),
            y: p.eta.clone(),
            yd: p.yd.clone(),
            t: p.t,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    /// Largest relative discrepancy over mass and force.
    pub max_discrepancy: f64,
    /// Packed `(x, xd, y, yd, t)` of the worst sample.
    pub worst_sample: Vec<f64>,
    /// Smallest `|det M| / |M|^n` over the samples.
    pub min_det_ratio: f64,
    pub n_samples: usize,
    pub eps: f64,
}

/// Compares unscaled evaluators with scaled ones at `eta = y / eps`.
pub fn consistency_check<T: Scalar>(sys: &dyn MechanicalSystem<T>, samples: &[FullState<T>], eps: T) -> Result<ConsistencyReport> {
    if !(eps > T::zero()) {
        return Err(SfdError::InvalidArgument("consistency check needs eps > 0".into()));
    }
    let mut worst = (0.0f64, Vec::new());
    let mut min_det = f64::INFINITY;
    for st in samples {
        let q = crate::linalg::concat(&[&st.x, &st.y]);
        let qd = crate::linalg::concat(&[&st.xd, &st.yd]);
        let m = sys.mass(&q, st.t, eps);
        let lu = Factored::new(&m);
        let n = m.nrows() as i32;
        let mn = mat_inf_norm(&m).f64();
        let ratio = lu.determinant().f64().abs() / mn.powi(n);
        if lu.is_singular() || !(ratio > 1e-12) {
            return Err(SfdError::SingularMass {
                cond: lu.pivot_ratio.f64(),
            });
        }
        min_det = min_det.min(ratio);
        let f = sys.force(&q, &qd, st.t, eps);
        let eta = &st.y / eps;
        let p = PhasePoint::new(st.x.clone(), st.xd.clone(), eta.clone(), st.yd.clone(), st.t);
        let ms = sys.scaled_mass(&st.x, &eta, st.t, eps);
        let fs = sys.scaled_force(&p, eps);
        let dm = mat_inf_norm(&(&m - ms)).f64() / mn.max(1.0);
        let df = inf_norm(&(&f - fs)).f64() / inf_norm(&f).f64().max(1.0);
        let d = dm.max(df);
        if !d.is_finite() {
            return Err(SfdError::NonFinite {
                context: "consistency sample".into(),
            });
        }
        if d >= worst.0 {
            let mut packed: Vec<f64> = Vec::new();
            for v in [&st.x, &st.xd, &st.y, &st.yd] {
                packed.extend(v.iter().map(|a| a.f64()));
            }
            packed.push(st.t.f64());
            worst = (d, packed);
        }
    }
    Ok(ConsistencyReport {
        max_discrepancy: worst.0,
        worst_sample: worst.1,
        min_det_ratio: min_det,
        n_samples: samples.len(),
        eps: eps.f64(),
    })
}
