//! Three-degree-of-freedom pendulum damper in non-dimensional form.
//!
//! Coordinates: pendulum angle `gamma`, horizontal spring deflection `d`
//! (scaled by `D`), vertical deflection `h` (scaled by `L`); time is scaled by
//! the pendulum frequency `omega_p = sqrt(g / l)`.

use crate::scalar::Scalar;
use crate::system::{DomainBox, MechanicalSystem, Partition, PhasePoint, TimeDependence};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Which springs are stiff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendulumMode {
    /// Slow `(gamma, d)`, fast `h`.
    SoftSoftStiff,
    /// Slow `gamma`, fast `(h, d)`; requires `D = L`.
    StiffStiffSoft,
}

impl PendulumMode {
    /// Parses a preset mode name.
    pub fn parse(mode: &str) -> Option<Self> {
        match mode {
            "soft-soft-stiff" => Some(PendulumMode::SoftSoftStiff),
            "stiff-stiff-soft" => Some(PendulumMode::StiffStiffSoft),
            _ => None,
        }
    }
}

/// Physical parameters (SI units). Damping constants are given as multiples
/// of `omega_p * M` (`C_h`, `C_d`) and `omega_p * m * L^2` (`c_p`).
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumParams {
    pub l: f64,
    pub d_len: f64,
    pub l_spring: f64,
    pub m_cart: f64,
    pub m_bob: f64,
    pub k_h: f64,
    pub gamma_h: f64,
    pub k_d: f64,
    pub c_d_coef: f64,
    pub c_h_coef: f64,
    pub c_p_coef: f64,
    pub g: f64,
    pub fp_amp: f64,
    pub fp_freq: f64,
    pub fp_freq_rel: f64,
    pub fh_amp: f64,
    pub fh_freq: f64,
    pub fd_amp: f64,
    pub fd_freq: f64,
}

impl PendulumParams {
    pub fn omega_p(&self) -> f64 {
        (self.g / self.l).sqrt()
    }

    /// Factor converting physical time to non-dimensional time.
    pub fn time_scale(&self) -> f64 {
        self.omega_p()
    }
}

/// Non-dimensional groups `Delta, rho, beta, pi_*, q_*, a_h`.
#[derive(Debug, Clone, Copy)]
struct Groups {
    delta: f64,
    rho: f64,
    beta: f64,
    pi_h: f64,
    pi_d: f64,
    pi_p: f64,
    q_h: f64,
    q_d: f64,
    a_h: f64,
}

/// Scaled parameters, fixed once at the nominal eps.
#[derive(Debug, Clone, Copy)]
pub struct ScaledParams {
    pub delta: f64,
    pub phi: f64,
    pub beta: f64,
    pub mu_h: f64,
    pub mu_d: f64,
    pub mu_p: f64,
    pub omega_h2: f64,
    pub omega_d2: f64,
    pub alpha_h: f64,
}

#[derive(Debug, Clone)]
pub struct Pendulum3 {
    pub mode: PendulumMode,
    pub params: PendulumParams,
    pub scaled: ScaledParams,
    eps: f64,
}

/// `eps`-dependent coefficient set used by all evaluators.
#[derive(Clone, Copy)]
struct Coeffs<T> {
    delta: T,
    rho: T,
    beta: T,
    pi_h: T,
    pi_d: T,
    pi_p: T,
    q_h: T,
    q_d: T,
    a_h: T,
}

/// Stable `1 - r0 / sqrt(r0^2 (1+d)^2 + h^2)`.
fn spring_q<T: Scalar>(r0: T, d: T, h: T) -> T {
    let one = T::one();
    let r = (r0 * r0 * (one + d) * (one + d) + h * h).sqrt();
    (r0 * r0 * (d + d + d * d) + h * h) / (r * (r + r0))
}

impl Pendulum3 {
    pub fn new(mode: PendulumMode, params: PendulumParams, eps: f64) -> Self {
        let g = Self::groups(&params);
        let e = eps;
        let scaled = match mode {
            PendulumMode::SoftSoftStiff => ScaledParams {
                delta: e * g.delta,
                phi: e * g.rho,
                beta: g.beta,
                mu_h: e * g.pi_h,
                mu_d: g.pi_d,
                mu_p: e * e * g.pi_p,
                omega_h2: e * e * g.q_h,
                omega_d2: g.q_d,
                alpha_h: e.powi(4) * g.a_h,
            },
            PendulumMode::StiffStiffSoft => ScaledParams {
                delta: e * g.delta,
                phi: g.rho,
                beta: g.beta,
                mu_h: e * g.pi_h,
                mu_d: e * g.pi_d,
                mu_p: e * e * g.pi_p,
                omega_h2: e * e * g.q_h,
                omega_d2: e * e * g.q_d,
                alpha_h: e.powi(4) * g.a_h,
            },
        };
        Self { mode, params, scaled, eps }
    }

    fn groups(p: &PendulumParams) -> Groups {
        let wp2 = p.g / p.l;
        Groups {
            delta: p.l / p.l_spring,
            rho: p.d_len / p.l_spring,
            beta: p.m_bob / p.m_cart,
            pi_h: p.c_h_coef,
            pi_d: p.c_d_coef,
            pi_p: p.c_p_coef,
            q_h: p.k_h / (p.m_cart * wp2),
            q_d: p.k_d / (p.m_cart * wp2),
            a_h: p.gamma_h * p.l_spring * p.l_spring / (p.m_cart * wp2),
        }
    }

    /// Unscaled coefficients of the eps-family member `eps`.
    fn coeffs<T: Scalar>(&self, eps: T) -> Coeffs<T> {
        let s = &self.scaled;
        let l = T::lit;
        let e2 = eps * eps;
        match self.mode {
            PendulumMode::SoftSoftStiff => Coeffs {
                delta: l(s.delta) / eps,
                rho: l(s.phi) / eps,
                beta: l(s.beta),
                pi_h: l(s.mu_h) / eps,
                pi_d: l(s.mu_d),
                pi_p: l(s.mu_p) / e2,
                q_h: l(s.omega_h2) / e2,
                q_d: l(s.omega_d2),
                a_h: l(s.alpha_h) / (e2 * e2),
            },
            PendulumMode::StiffStiffSoft => Coeffs {
                delta: l(s.delta) / eps,
                rho: l(s.phi),
                beta: l(s.beta),
                pi_h: l(s.mu_h) / eps,
                pi_d: l(s.mu_d) / eps,
                pi_p: l(s.mu_p) / e2,
                q_h: l(s.omega_h2) / e2,
                q_d: l(s.omega_d2) / e2,
                a_h: l(s.alpha_h) / (e2 * e2),
            },
        }
    }

    /// Non-dimensional excitations `(G_p, F_p, F_h, F_d)` at scaled time `t`.
    pub fn excitation<T: Scalar>(&self, t: T) -> (T, T, T, T) {
        let p = &self.params;
        let wp = p.omega_p();
        let tp = t / T::lit(wp);
        let fp = T::lit(p.fp_amp) * (T::lit(p.fp_freq + p.fp_freq_rel * wp) * tp).sin();
        let fh = T::lit(p.fh_amp) * (T::lit(p.fh_freq) * tp).sin();
        let fd = T::lit(p.fd_amp) * (T::lit(p.fd_freq) * tp).sin();
        let mg = T::lit(p.m_bob * p.g);
        let big_mg = T::lit(p.m_cart * p.g);
        (fp / mg, fp / big_mg, fh / big_mg, fd / big_mg)
    }

    /// Mass matrix in the coordinate order of the mode.
    fn mass_matrix<T: Scalar>(&self, gamma: T, c: &Coeffs<T>) -> DMatrix<T> {
        let (sn, cs) = (gamma.sin(), gamma.cos());
        let one = T::one();
        let (dl, b) = (c.delta, c.beta);
        match self.mode {
            PendulumMode::SoftSoftStiff => DMatrix::from_row_slice(
                3,
                3,
                &[
                    dl * dl, c.rho * dl * cs, -dl * sn,
                    b * dl / c.rho * cs, one + b, T::zero(),
                    -b * dl * sn, T::zero(), one + b,
                ],
            ),
            PendulumMode::StiffStiffSoft => DMatrix::from_row_slice(
                3,
                3,
                &[
                    dl * dl, -dl * sn, dl * cs,
                    -b * dl * sn, one + b, T::zero(),
                    b * dl * cs, T::zero(), one + b,
                ],
            ),
        }
    }

    /// Force vector from physical-form coordinates `(gamma, d, h)` and their
    /// rates, in the coordinate order of the mode.
    #[allow(clippy::too_many_arguments)]
    fn force_vector<T: Scalar>(&self, g: T, d: T, h: T, gd: T, dd: T, hd: T, t: T, c: &Coeffs<T>) -> DVector<T> {
        let (gp, fp, fh, fd) = self.excitation(t);
        let (sn, cs) = (g.sin(), g.cos());
        let one = T::one();
        let (dl, b) = (c.delta, c.beta);
        let q = spring_q(c.rho, d, h);
        let f_g = -c.pi_p * gd - dl * dl * sn + dl * dl * gp;
        let f_h = b * dl * cs * gd * gd - c.pi_h * hd - c.q_h * h - c.q_d * h * q - c.a_h * h * h * h
            + (one + b) * dl
            + fh * dl
            - fp * dl * sn;
        let f_d = b * dl / c.rho * sn * gd * gd - c.pi_d * dd - c.q_d * (one + d) * q + fd * dl / c.rho
            + fp * dl / c.rho * cs;
        match self.mode {
            PendulumMode::SoftSoftStiff => DVector::from_vec(vec![f_g, f_d, f_h]),
            PendulumMode::StiffStiffSoft => DVector::from_vec(vec![f_g, f_h, f_d]),
        }
    }

    /// Splits a mode-ordered `(q, qd)` into `(gamma, d, h)` components.
    fn physical<T: Scalar>(&self, q: &DVector<T>) -> (T, T, T) {
        match self.mode {
            PendulumMode::SoftSoftStiff => (q[0], q[1], q[2]),
            PendulumMode::StiffStiffSoft => (q[0], q[2], q[1]),
        }
    }

    /// Converts a physical state (SI units, mode coordinate order, positions
    /// then velocities) to the non-dimensional state.
    pub fn nondimensionalize_state(&self, phys: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let wp = p.omega_p();
        let (dscale, hscale) = (p.d_len, p.l_spring);
        let scales = match self.mode {
            PendulumMode::SoftSoftStiff => [1.0, dscale, hscale],
            PendulumMode::StiffStiffSoft => [1.0, hscale, dscale],
        };
        let mut out = vec![0.0; 6];
        for i in 0..3 {
            out[i] = phys[i] / scales[i];
            out[3 + i] = phys[3 + i] / (scales[i] * wp);
        }
        out
    }

    /// Full scaled state `(x, xd, y, yd)` from a physical state in mode order.
    pub fn full_state(&self, phys: &[f64]) -> Vec<f64> {
        let z = self.nondimensionalize_state(phys);
        match self.mode {
            PendulumMode::SoftSoftStiff => vec![z[0], z[1], z[3], z[4], z[2], z[5]],
            PendulumMode::StiffStiffSoft => vec![z[0], z[3], z[1], z[2], z[4], z[5]],
        }
    }
}

impl<T: Scalar> MechanicalSystem<T> for Pendulum3 {
    fn name(&self) -> &str {
        "pendulum3"
    }

    fn partition(&self) -> Partition {
        match self.mode {
            PendulumMode::SoftSoftStiff => Partition::new(3, 2),
            PendulumMode::StiffStiffSoft => Partition::new(3, 1),
        }
    }

    fn time_dependence(&self) -> TimeDependence {
        let p = &self.params;
        let wp = p.omega_p();
        let mut w: Vec<f64> = Vec::new();
        for (amp, freq) in [
            (p.fp_amp, p.fp_freq + p.fp_freq_rel * wp),
            (p.fh_amp, p.fh_freq),
            (p.fd_amp, p.fd_freq),
        ] {
            if amp != 0.0 && freq != 0.0 {
                w.push(freq.abs() / wp);
            }
        }
        if w.is_empty() {
            return TimeDependence::Autonomous;
        }
        let base = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let commensurate = w.iter().all(|v| {
            let r = v / base;
            (r - r.round()).abs() < 1e-12
        });
        if commensurate {
            TimeDependence::Periodic { period: 2.0 * PI / base }
        } else {
            TimeDependence::Quasiperiodic { frequencies: w }
        }
    }

    fn domain(&self) -> DomainBox {
        let td = MechanicalSystem::<T>::time_dependence(self);
        let t = td.sample_range();
        match self.mode {
            PendulumMode::SoftSoftStiff => DomainBox {
                x: vec![(-1.2, 1.2), (-0.3, 0.3)],
                xd: vec![(-1.0, 1.0), (-0.5, 0.5)],
                y: vec![(-0.2, 0.2)],
                yd: vec![(-0.2, 0.2)],
                t,
            },
            PendulumMode::StiffStiffSoft => DomainBox {
                x: vec![(-2.0, 2.0)],
                xd: vec![(-2.0, 2.0)],
                y: vec![(-0.05, 0.05), (-0.05, 0.05)],
                yd: vec![(-0.05, 0.05), (-0.05, 0.05)],
                t,
            },
        }
    }

    fn eps_nominal(&self) -> T {
        T::lit(self.eps)
    }

    fn mass(&self, q: &DVector<T>, _t: T, eps: T) -> DMatrix<T> {
        self.mass_matrix(q[0], &self.coeffs(eps))
    }

    fn force(&self, q: &DVector<T>, qd: &DVector<T>, t: T, eps: T) -> DVector<T> {
        let (g, d, h) = self.physical(q);
        let (gd, dd, hd) = self.physical(qd);
        self.force_vector(g, d, h, gd, dd, hd, t, &self.coeffs(eps))
    }

    fn scaled_mass(&self, x: &DVector<T>, _eta: &DVector<T>, _t: T, eps: T) -> DMatrix<T> {
        self.mass_matrix(x[0], &self.coeffs(eps))
    }

    fn scaled_force(&self, p: &PhasePoint<T>, eps: T) -> DVector<T> {
        let c = self.coeffs(eps);
        match self.mode {
            PendulumMode::SoftSoftStiff => {
                self.force_vector(p.x[0], p.x[1], eps * p.eta[0], p.xd[0], p.xd[1], p.yd[0], p.t, &c)
            }
            PendulumMode::StiffStiffSoft => self.force_vector(
                p.x[0],
                eps * p.eta[1],
                eps * p.eta[0],
                p.xd[0],
                p.yd[1],
                p.yd[0],
                p.t,
                &c,
            ),
        }
    }

    fn regularized(&self, p: &PhasePoint<T>, eps: T) -> Option<(DMatrix<T>, DVector<T>)> {
        let s = &self.scaled;
        let l = T::lit;
        let (delta, phi, b) = (l(s.delta), l(s.phi), l(s.beta));
        let one = T::one();
        let (gp, fp, fh, fd) = self.excitation(p.t);
        let g = p.x[0];
        let gd = p.xd[0];
        let (sn, cs) = (g.sin(), g.cos());
        let row_g = -l(s.mu_p) * gd - delta * delta * sn + delta * delta * gp;
        match self.mode {
            PendulumMode::SoftSoftStiff => {
                let (d, dd) = (p.x[1], p.xd[1]);
                let (eta, w) = (p.eta[0], p.yd[0]);
                let q = spring_q(phi, d, eps * eps * eta);
                let a = DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        delta * delta, phi * delta * cs, -delta * sn,
                        b * delta / phi * cs, one + b, T::zero(),
                        -b * delta * sn, T::zero(), one + b,
                    ],
                );
                let row_d = b * delta / phi * sn * gd * gd - l(s.mu_d) * dd - l(s.omega_d2) * (one + d) * q
                    + fd * delta / phi
                    + fp * delta / phi * cs;
                let row_h = b * delta * cs * gd * gd - l(s.mu_h) * w - l(s.omega_h2) * eta
                    - eps * eps * l(s.omega_d2) * eta * q
                    - l(s.alpha_h) * eta * eta * eta
                    + (one + b) * delta
                    + fh * delta
                    - fp * delta * sn;
                Some((a, DVector::from_vec(vec![row_g, row_d, row_h])))
            }
            PendulumMode::StiffStiffSoft => {
                let (eh, ed) = (p.eta[0], p.eta[1]);
                let (wh, wd) = (p.yd[0], p.yd[1]);
                let a = DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        delta * delta, -delta * sn, delta * cs,
                        -b * delta * sn, one + b, T::zero(),
                        b * delta * cs, T::zero(), one + b,
                    ],
                );
                let (dh, dd_) = (eps * eh, eps * ed);
                let r = ((one + dd_) * (one + dd_) + dh * dh).sqrt();
                let q = spring_q(one, dd_, dh);
                let q_over_eps = (ed + ed + eps * (ed * ed + eh * eh)) / (r * (r + one));
                let row_h = b * delta * cs * gd * gd - l(s.mu_h) * wh - l(s.omega_h2) * eh
                    - l(s.omega_d2) * eh * q
                    - l(s.alpha_h) * eh * eh * eh
                    + (one + b) * delta
                    + fh * delta
                    - fp * delta * sn;
                let row_d = b * delta * sn * gd * gd - l(s.mu_d) * wd - l(s.omega_d2) * (one + dd_) * q_over_eps
                    + fd * delta
                    + fp * delta * cs;
                Some((a, DVector::from_vec(vec![row_g, row_h, row_d])))
            }
        }
    }
}
