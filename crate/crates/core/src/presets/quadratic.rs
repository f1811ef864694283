//! Linear oscillators with quadratic slow/fast coupling and configurable
//! placement of the small parameter.

use crate::scalar::Scalar;
use crate::system::{
    BlockJacobian, DomainBox, ForcingJacobians, MechanicalSystem, Partition, PhasePoint,
    TimeDependence,
};
use nalgebra::{DMatrix, DVector};

/// Vector-valued quadratic form `S_i(x, z) = x'XX_i x + x'XZ_i z + z'ZZ_i z`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub xx: Vec<DMatrix<f64>>,
    pub xz: Vec<DMatrix<f64>>,
    pub zz: Vec<DMatrix<f64>>,
}

impl Quadratic {
    pub fn zero(rows: usize, s: usize, f: usize) -> Self {
        Self {
            xx: vec![DMatrix::zeros(s, s); rows],
            xz: vec![DMatrix::zeros(s, f); rows],
            zz: vec![DMatrix::zeros(f, f); rows],
        }
    }

    /// Scalar case `S(x, z) = a x^2 + b x z + c z^2`.
    pub fn scalar(a: f64, b: f64, c: f64) -> Self {
        Self {
            xx: vec![DMatrix::from_element(1, 1, a)],
            xz: vec![DMatrix::from_element(1, 1, b)],
            zz: vec![DMatrix::from_element(1, 1, c)],
        }
    }

    fn eval<T: Scalar>(&self, x: &DVector<T>, z: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(
            self.xx.len(),
            (0..self.xx.len()).map(|i| {
                cast(&self.xx[i]).dot_form(x, x) + cast(&self.xz[i]).dot_form(x, z) + cast(&self.zz[i]).dot_form(z, z)
            }),
        )
    }

    /// Jacobians with respect to `x` and `z`.
    fn jac<T: Scalar>(&self, x: &DVector<T>, z: &DVector<T>) -> (DMatrix<T>, DMatrix<T>) {
        let rows = self.xx.len();
        let mut jx = DMatrix::zeros(rows, x.len());
        let mut jz = DMatrix::zeros(rows, z.len());
        for i in 0..rows {
            let xx = cast::<T>(&self.xx[i]);
            let xz = cast::<T>(&self.xz[i]);
            let zz = cast::<T>(&self.zz[i]);
            let gx = (&xx + xx.transpose()) * x + &xz * z;
            let gz = xz.transpose() * x + (&zz + zz.transpose()) * z;
            jx.row_mut(i).copy_from(&gx.transpose());
            jz.row_mut(i).copy_from(&gz.transpose());
        }
        (jx, jz)
    }
}

trait DotForm<T: Scalar> {
    fn dot_form(&self, u: &DVector<T>, v: &DVector<T>) -> T;
}

impl<T: Scalar> DotForm<T> for DMatrix<T> {
    fn dot_form(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        u.dot(&(self * v))
    }
}

fn cast<T: Scalar>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::lit)
}

/// Componentwise `bias + amp * sin(freq * t)`.
#[derive(Debug, Clone)]
pub struct Excitation {
    pub bias: DVector<f64>,
    pub amp: DVector<f64>,
    pub freq: DVector<f64>,
}

impl Excitation {
    pub fn zero(n: usize) -> Self {
        Self {
            bias: DVector::zeros(n),
            amp: DVector::zeros(n),
            freq: DVector::zeros(n),
        }
    }

    fn eval<T: Scalar>(&self, t: T) -> DVector<T> {
        DVector::from_iterator(
            self.bias.len(),
            (0..self.bias.len()).map(|i| {
                T::lit(self.bias[i]) + T::lit(self.amp[i]) * (T::lit(self.freq[i]) * t).sin()
            }),
        )
    }

    fn rate<T: Scalar>(&self, t: T) -> DVector<T> {
        DVector::from_iterator(
            self.bias.len(),
            (0..self.bias.len()).map(|i| {
                let w = T::lit(self.freq[i]);
                T::lit(self.amp[i]) * w * (w * t).cos()
            }),
        )
    }

    fn frequencies(&self) -> Vec<f64> {
        (0..self.amp.len())
            .filter(|&i| self.amp[i] != 0.0 && self.freq[i] != 0.0)
            .map(|i| self.freq[i].abs())
            .collect()
    }
}

/// Whether a coupling term sees the fast coordinate `y` (soft) or the
/// stretched coordinate `eta = y / eps` (stiff).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingArg {
    Soft,
    Stiff,
}

/// Powers of eps in the fast equation
/// `eps^p M2 y'' + C2 y' + eps^{-k} K2 y + S2 = f2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub mass_power: i32,
    pub stiffness_power: i32,
    pub s1: CouplingArg,
    pub s2: CouplingArg,
}

/// Blocks of the two-field oscillator
///
/// ```text
/// M1 x'' + C1 x' + K1 x + S1(x, .) = f1(t)
/// eps^p M2 y'' + C2 y' + eps^{-k} K2 y + S2(x, .) = f2(t)
/// ```
#[derive(Debug, Clone)]
pub struct OscillatorBlocks {
    pub m1: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub s1: Quadratic,
    pub f1: Excitation,
    pub m2: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    pub s2: Quadratic,
    pub f2: Excitation,
}

impl OscillatorBlocks {
    /// Zero coupling and forcing with identity inertia and stiffness.
    pub fn uncoupled(s: usize, f: usize) -> Self {
        Self {
            m1: DMatrix::identity(s, s),
            c1: DMatrix::zeros(s, s),
            k1: DMatrix::identity(s, s),
            s1: Quadratic::zero(s, s, f),
            f1: Excitation::zero(s),
            m2: DMatrix::identity(f, f),
            c2: DMatrix::identity(f, f),
            k2: DMatrix::identity(f, f),
            s2: Quadratic::zero(f, s, f),
            f2: Excitation::zero(f),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticOscillator {
    name: String,
    pub blocks: OscillatorBlocks,
    pub placement: Placement,
    eps: f64,
    domain: Option<DomainBox>,
    time: Option<TimeDependence>,
}

impl QuadraticOscillator {
    pub fn new(name: &str, blocks: OscillatorBlocks, placement: Placement, eps: f64) -> Self {
        Self {
            name: name.to_string(),
            blocks,
            placement,
            eps,
            domain: None,
            time: None,
        }
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_time_dependence(mut self, td: TimeDependence) -> Self {
        self.time = Some(td);
        self
    }

    fn s(&self) -> usize {
        self.blocks.m1.nrows()
    }

    fn f(&self) -> usize {
        self.blocks.m2.nrows()
    }

    fn coupling<T: Scalar>(arg: CouplingArg, y_or_eta: &DVector<T>, eps: T, scaled: bool) -> DVector<T> {
        // scaled: argument is eta; otherwise it is y
        match (arg, scaled) {
            (CouplingArg::Stiff, true) => y_or_eta.clone(),
            (CouplingArg::Soft, true) => y_or_eta * eps,
            (CouplingArg::Stiff, false) => y_or_eta / eps,
            (CouplingArg::Soft, false) => y_or_eta.clone(),
        }
    }

    fn slow_force<T: Scalar>(&self, x: &DVector<T>, xd: &DVector<T>, z1: &DVector<T>, t: T) -> DVector<T> {
        let b = &self.blocks;
        -(cast::<T>(&b.c1) * xd + cast::<T>(&b.k1) * x + b.s1.eval(x, z1) - b.f1.eval(t))
    }

    fn mass_blocks<T: Scalar>(&self, eps: T) -> DMatrix<T> {
        let (s, f) = (self.s(), self.f());
        let mut m = DMatrix::zeros(s + f, s + f);
        m.view_mut((0, 0), (s, s)).copy_from(&cast::<T>(&self.blocks.m1));
        m.view_mut((s, s), (f, f))
            .copy_from(&(cast::<T>(&self.blocks.m2) * eps.powi(self.placement.mass_power)));
        m
    }
}

impl<T: Scalar> MechanicalSystem<T> for QuadraticOscillator {
    fn name(&self) -> &str {
        &self.name
    }

    fn partition(&self) -> Partition {
        Partition::new(self.s() + self.f(), self.s())
    }

    fn time_dependence(&self) -> TimeDependence {
        if let Some(td) = &self.time {
            return td.clone();
        }
        let mut w = self.blocks.f1.frequencies();
        w.extend(self.blocks.f2.frequencies());
        if w.is_empty() {
            TimeDependence::Autonomous
        } else if w.iter().all(|v| (v - w[0]).abs() <= 1e-14 * w[0]) {
            TimeDependence::Periodic {
                period: 2.0 * std::f64::consts::PI / w[0],
            }
        } else {
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            w.dedup();
            TimeDependence::Quasiperiodic { frequencies: w }
        }
    }

    fn domain(&self) -> DomainBox {
        self.domain.clone().unwrap_or_else(|| {
            let p = MechanicalSystem::<T>::partition(self);
            DomainBox::standard(p, &MechanicalSystem::<T>::time_dependence(self))
        })
    }

    fn eps_nominal(&self) -> T {
        T::lit(self.eps)
    }

    fn mass(&self, _q: &DVector<T>, _t: T, eps: T) -> DMatrix<T> {
        self.mass_blocks(eps)
    }

    fn force(&self, q: &DVector<T>, qd: &DVector<T>, t: T, eps: T) -> DVector<T> {
        let (s, f) = (self.s(), self.f());
        let x = q.rows(0, s).into_owned();
        let y = q.rows(s, f).into_owned();
        let xd = qd.rows(0, s).into_owned();
        let yd = qd.rows(s, f).into_owned();
        let b = &self.blocks;
        let z1 = Self::coupling(self.placement.s1, &y, eps, false);
        let z2 = Self::coupling(self.placement.s2, &y, eps, false);
        let f1 = self.slow_force(&x, &xd, &z1, t);
        let k_scale = eps.powi(-self.placement.stiffness_power);
        let f2 = -(cast::<T>(&b.c2) * &yd + cast::<T>(&b.k2) * &y * k_scale + b.s2.eval(&x, &z2) - b.f2.eval(t));
        crate::linalg::concat(&[&f1, &f2])
    }

    fn scaled_mass(&self, _x: &DVector<T>, _eta: &DVector<T>, _t: T, eps: T) -> DMatrix<T> {
        self.mass_blocks(eps)
    }

    fn scaled_force(&self, p: &PhasePoint<T>, eps: T) -> DVector<T> {
        let b = &self.blocks;
        let z1 = Self::coupling(self.placement.s1, &p.eta, eps, true);
        let z2 = Self::coupling(self.placement.s2, &p.eta, eps, true);
        let f1 = self.slow_force(&p.x, &p.xd, &z1, p.t);
        let k_scale = eps.powi(1 - self.placement.stiffness_power);
        let f2 = -(cast::<T>(&b.c2) * &p.yd + cast::<T>(&b.k2) * &p.eta * k_scale + b.s2.eval(&p.x, &z2)
            - b.f2.eval(p.t));
        crate::linalg::concat(&[&f1, &f2])
    }

    fn regularized(&self, p: &PhasePoint<T>, eps: T) -> Option<(DMatrix<T>, DVector<T>)> {
        let (s, f) = (self.s(), self.f());
        let mut a = DMatrix::zeros(s + f, s + f);
        a.view_mut((0, 0), (s, s)).copy_from(&cast::<T>(&self.blocks.m1));
        a.view_mut((s, s), (f, f)).copy_from(&cast::<T>(&self.blocks.m2));
        let force = MechanicalSystem::<T>::scaled_force(self, p, eps);
        let mut b = force.clone();
        let row_scale = eps.powi(1 - self.placement.mass_power);
        for i in s..s + f {
            b[i] *= row_scale;
        }
        Some((a, b))
    }

    fn limit_jacobians(&self, p: &PhasePoint<T>) -> Option<ForcingJacobians<T>> {
        let pl = self.placement;
        if pl.mass_power != 1 || !(0..=1).contains(&pl.stiffness_power) {
            return None;
        }
        let (s, f) = (self.s(), self.f());
        let b = &self.blocks;
        let zero = T::zero();
        let m1 = crate::linalg::Factored::new(&cast::<T>(&b.m1));
        let m2 = crate::linalg::Factored::new(&cast::<T>(&b.m2));

        // slow block
        let z1 = Self::coupling(pl.s1, &p.eta, zero, true);
        let (s1x, s1z) = b.s1.jac(&p.x, &z1);
        let (d1eta, d1eps) = match pl.s1 {
            CouplingArg::Stiff => (-s1z, DVector::zeros(s)),
            CouplingArg::Soft => (DMatrix::zeros(s, f), -(&s1z * &p.eta)),
        };
        let p1 = BlockJacobian {
            dx: m1.solve_mat(&-(cast::<T>(&b.k1) + s1x))?,
            dxd: m1.solve_mat(&-cast::<T>(&b.c1))?,
            deta: m1.solve_mat(&d1eta)?,
            dyd: DMatrix::zeros(s, f),
            dt: m1.solve(&b.f1.rate(p.t))?,
            deps: m1.solve(&d1eps)?,
        };

        // fast block
        let z2 = Self::coupling(pl.s2, &p.eta, zero, true);
        let (s2x, s2z) = b.s2.jac(&p.x, &z2);
        let k2 = cast::<T>(&b.k2);
        let mut d2eta = DMatrix::zeros(f, f);
        let mut d2eps = DVector::zeros(f);
        if pl.stiffness_power == 1 {
            d2eta -= &k2;
        } else {
            d2eps -= &k2 * &p.eta;
        }
        match pl.s2 {
            CouplingArg::Stiff => d2eta -= &s2z,
            CouplingArg::Soft => d2eps -= &s2z * &p.eta,
        }
        let p2 = BlockJacobian {
            dx: m2.solve_mat(&-s2x)?,
            dxd: DMatrix::zeros(f, s),
            deta: m2.solve_mat(&d2eta)?,
            dyd: m2.solve_mat(&-cast::<T>(&b.c2))?,
            dt: m2.solve(&b.f2.rate(p.t))?,
            deps: m2.solve(&d2eps)?,
        };
        Some(ForcingJacobians { p1, p2 })
    }
}

/// Scalar (s = f = 1) parameter set shared by the oscillator presets.
pub(crate) fn scalar_blocks(p: &dyn Fn(&str) -> f64) -> OscillatorBlocks {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    let v = |v: f64| DVector::from_element(1, v);
    OscillatorBlocks {
        m1: m(p("m1")),
        c1: m(p("c1")),
        k1: m(p("k1")),
        s1: Quadratic::scalar(p("s1_xx"), p("s1_xy"), p("s1_yy")),
        f1: Excitation {
            bias: v(p("f1_bias")),
            amp: v(p("f1_amp")),
            freq: v(p("f1_freq")),
        },
        m2: m(p("m2")),
        c2: m(p("c2")),
        k2: m(p("k2")),
        s2: Quadratic::scalar(p("s2_xx"), p("s2_xy"), p("s2_yy")),
        f2: Excitation {
            bias: v(p("f2_bias")),
            amp: v(p("f2_amp")),
            freq: v(p("f2_freq")),
        },
    }
}
