//! Built-in example systems and their parameter sets.

mod pendulum;
mod quadratic;
mod twodof;

pub use pendulum::{Pendulum3, PendulumMode, PendulumParams, ScaledParams};
pub use quadratic::{
    CouplingArg, Excitation, OscillatorBlocks, Placement, Quadratic, QuadraticOscillator,
};
pub use twodof::{TwoDofParams, TwoDofSsm};

use crate::error::{Result, SfdError};
use crate::scalar::Scalar;
use crate::system::{DomainBox, MechanicalSystem};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Parameter name to value.
pub type ParamMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetId {
    /// Partially stiff, weakly nonlinear oscillator (stiff coupling into the slow block).
    LinearCoupled,
    /// Stiffly damped fast block without restoring force; no critical manifold.
    TetDemo,
    /// Quadratic fast restoring force whose critical manifold folds.
    FoldDemo,
    /// Two-degree-of-freedom oscillator used for the local-reduction comparison.
    TwoDofSsm,
    /// Three-degree-of-freedom pendulum damper.
    Pendulum3,
    /// Generic weakly coupled system with no eps-scaling of parameters.
    GenericWeak,
    /// Small fast inertia paired with a 1/eps stiffness; P2 has no eps -> 0 limit.
    StiffInertia,
}

impl PresetId {
    pub const ALL: [PresetId; 7] = [
        PresetId::LinearCoupled,
        PresetId::TetDemo,
        PresetId::FoldDemo,
        PresetId::TwoDofSsm,
        PresetId::Pendulum3,
        PresetId::GenericWeak,
        PresetId::StiffInertia,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetId::LinearCoupled => "linear-coupled",
            PresetId::TetDemo => "tet-demo",
            PresetId::FoldDemo => "fold-demo",
            PresetId::TwoDofSsm => "twodof-ssm",
            PresetId::Pendulum3 => "pendulum3",
            PresetId::GenericWeak => "generic-weak",
            PresetId::StiffInertia => "stiff-inertia",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SfdError::UnknownPreset(s.to_string()))
    }

    pub fn modes(&self) -> &'static [&'static str] {
        match self {
            PresetId::Pendulum3 => &["soft-soft-stiff", "stiff-stiff-soft"],
            _ => &["default"],
        }
    }

    pub fn default_mode(&self) -> &'static str {
        self.modes()[0]
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Positive,
    NonNegative,
    Any,
    Flag,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub constraint: Constraint,
}

const fn spec(name: &'static str, default: f64, constraint: Constraint) -> ParamSpec {
    ParamSpec { name, default, constraint }
}

use Constraint::{Any, Flag, NonNegative, Positive};

/// Values for the scalar oscillator family, in declaration order.
struct OscDefaults {
    m1: f64,
    c1: f64,
    k1: f64,
    s1: [f64; 3],
    f1: [f64; 3],
    m2: f64,
    c2: f64,
    k2: Option<f64>,
    s2: [f64; 3],
    f2: [f64; 3],
}

fn oscillator_specs(d: OscDefaults) -> Vec<ParamSpec> {
    let mut v = vec![
        spec("m1", d.m1, Positive),
        spec("c1", d.c1, NonNegative),
        spec("k1", d.k1, Positive),
        spec("s1_xx", d.s1[0], Any),
        spec("s1_xy", d.s1[1], Any),
        spec("s1_yy", d.s1[2], Any),
        spec("f1_bias", d.f1[0], Any),
        spec("f1_amp", d.f1[1], Any),
        spec("f1_freq", d.f1[2], NonNegative),
        spec("m2", d.m2, Positive),
        spec("c2", d.c2, NonNegative),
    ];
    if let Some(k2) = d.k2 {
        v.push(spec("k2", k2, Positive));
    }
    v.extend([
        spec("s2_xx", d.s2[0], Any),
        spec("s2_xy", d.s2[1], Any),
        spec("s2_yy", d.s2[2], Any),
        spec("f2_bias", d.f2[0], Any),
        spec("f2_amp", d.f2[1], Any),
        spec("f2_freq", d.f2[2], NonNegative),
    ]);
    v
}

fn weakly_nonlinear_defaults() -> OscDefaults {
    OscDefaults {
        m1: 1.0,
        c1: 0.2,
        k1: 1.0,
        s1: [0.0, 0.5, 0.2],
        f1: [0.0, 0.2, 1.0],
        m2: 1.0,
        c2: 1.0,
        k2: Some(1.0),
        s2: [1.0, 0.5, 0.3],
        f2: [0.0, 0.5, 1.0],
    }
}

/// Declared parameters of a preset mode, with their defaults.
pub fn parameter_specs(id: PresetId, mode: &str) -> Result<Vec<ParamSpec>> {
    check_mode(id, mode)?;
    Ok(match id {
        PresetId::LinearCoupled => {
            let mut v = oscillator_specs(weakly_nonlinear_defaults());
            v.push(spec("s1_soft", 0.0, Flag));
            v
        }
        PresetId::GenericWeak | PresetId::StiffInertia => oscillator_specs(weakly_nonlinear_defaults()),
        PresetId::TetDemo => oscillator_specs(OscDefaults {
            m1: 1.0,
            c1: 0.1,
            k1: 1.0,
            s1: [0.0, 1.0, 0.0],
            f1: [0.0, 0.0, 0.0],
            m2: 1.0,
            c2: 1.0,
            k2: None,
            s2: [1.0, 1.0, 1.0],
            f2: [0.0, 0.0, 0.0],
        }),
        PresetId::FoldDemo => oscillator_specs(OscDefaults {
            m1: 1.0,
            c1: 0.1,
            k1: 1.0,
            s1: [0.0, 0.5, 0.0],
            f1: [0.0, 0.0, 0.0],
            m2: 1.0,
            c2: 1.0,
            k2: Some(4.0),
            s2: [1.0, 0.0, 4.0],
            f2: [0.0, 1.0, 1.0],
        }),
        PresetId::TwoDofSsm => vec![
            spec("c1", 0.0, NonNegative),
            spec("c2", 0.0, NonNegative),
            spec("k1", 1.0, Positive),
            spec("k2", 9.0, Positive),
            spec("a", 1.0, Any),
            spec("b", 1.0, Any),
            spec("c", 1.0, Any),
            spec("mu1", 0.0, Any),
        ],
        PresetId::Pendulum3 => {
            let soft = mode == "soft-soft-stiff";
            let pick = |a: f64, b: f64| if soft { a } else { b };
            vec![
                spec("l", 6.0, Positive),
                spec("D", pick(6.0, 3.0), Positive),
                spec("L", pick(1.0, 3.0), Positive),
                spec("M", pick(1.0, 0.25), Positive),
                spec("m", pick(1.0, 0.5), Positive),
                spec("K_h", pick(600.0, 2000.0), Positive),
                spec("Gamma_h", 0.5, Positive),
                spec("K_d", pick(2.0, 280.0), Positive),
                spec("C_d_coef", pick(0.33, 3.0), Positive),
                spec("C_h_coef", 3.0, Positive),
                spec("c_p_coef", pick(0.33, 1.0), Positive),
                spec("g", 9.81, Positive),
                spec("fp_amp", pick(0.5, 0.6), Any),
                spec("fp_freq", pick(1.0, 0.0), NonNegative),
                spec("fp_freq_rel", pick(0.0, 1.0), NonNegative),
                spec("fh_amp", pick(0.5, 0.0), Any),
                spec("fh_freq", pick(3.0, 0.0), NonNegative),
                spec("fd_amp", pick(0.5, 0.0), Any),
                spec("fd_freq", pick(3.0, 0.0), NonNegative),
            ]
        }
    })
}

/// Default value of the small parameter.
pub fn default_eps(id: PresetId) -> f64 {
    match id {
        PresetId::Pendulum3 => 1e-8,
        PresetId::TwoDofSsm => 1.0,
        _ => 1e-2,
    }
}

fn check_mode(id: PresetId, mode: &str) -> Result<()> {
    if id.modes().contains(&mode) {
        Ok(())
    } else {
        Err(SfdError::UnknownMode {
            preset: id.to_string(),
            mode: mode.to_string(),
        })
    }
}

/// Merges overrides into the defaults, validating names and ranges.
pub fn resolve_parameters(id: PresetId, mode: &str, overrides: &ParamMap) -> Result<ParamMap> {
    let specs = parameter_specs(id, mode)?;
    let mut out = ParamMap::new();
    for s in &specs {
        out.insert(s.name.to_string(), s.default);
    }
    for (k, &v) in overrides {
        let Some(s) = specs.iter().find(|s| s.name == k) else {
            return Err(SfdError::UnknownParameter {
                preset: id.to_string(),
                name: k.clone(),
            });
        };
        let bad = |reason: &str| SfdError::InvalidParameter {
            name: k.clone(),
            value: v,
            reason: reason.to_string(),
        };
        if !v.is_finite() {
            return Err(bad("must be finite"));
        }
        match s.constraint {
            Positive if v <= 0.0 => return Err(bad("must be positive")),
            NonNegative if v < 0.0 => return Err(bad("must be non-negative")),
            Flag if v != 0.0 && v != 1.0 => return Err(bad("must be 0 or 1")),
            _ => {}
        }
        out.insert(k.clone(), v);
    }
    if id == PresetId::Pendulum3 && mode == "stiff-stiff-soft" && out["D"] != out["L"] {
        return Err(SfdError::InvalidParameter {
            name: "D".into(),
            value: out["D"],
            reason: "stiff-stiff-soft mode requires D = L".into(),
        });
    }
    Ok(out)
}

/// Parameter report `{system, mode, parameters, eps}`.
#[derive(Debug, Clone, Serialize)]
pub struct ParameterReport {
    pub system: String,
    pub mode: String,
    pub parameters: ParamMap,
    pub eps: f64,
}

/// A resolved preset: identity, parameters and the constructed system.
#[derive(Clone)]
pub struct Preset<T: Scalar> {
    pub id: PresetId,
    pub mode: String,
    pub params: ParamMap,
    pub eps: f64,
    pub system: Arc<dyn MechanicalSystem<T>>,
}

impl<T: Scalar> Preset<T> {
    pub fn report(&self) -> ParameterReport {
        ParameterReport {
            system: self.id.to_string(),
            mode: self.mode.clone(),
            parameters: self.params.clone(),
            eps: self.eps,
        }
    }
}

/// Builds a preset system with parameter overrides and an optional eps.
pub fn load_preset<T: Scalar>(
    id: PresetId,
    mode: Option<&str>,
    overrides: &ParamMap,
    eps: Option<f64>,
) -> Result<Preset<T>> {
    let mode = mode.unwrap_or(id.default_mode());
    let params = resolve_parameters(id, mode, overrides)?;
    let eps = eps.unwrap_or(default_eps(id));
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SfdError::InvalidParameter {
            name: "eps".into(),
            value: eps,
            reason: "must be positive".into(),
        });
    }
    let p = |k: &str| params[k];
    let system: Arc<dyn MechanicalSystem<T>> = match id {
        PresetId::LinearCoupled | PresetId::GenericWeak | PresetId::StiffInertia | PresetId::FoldDemo => {
            let blocks = quadratic::scalar_blocks(&p);
            let soft = CouplingArg::Soft;
            let stiff = CouplingArg::Stiff;
            let placement = match id {
                PresetId::LinearCoupled => Placement {
                    mass_power: 1,
                    stiffness_power: 1,
                    s1: if p("s1_soft") == 1.0 { soft } else { stiff },
                    s2: soft,
                },
                PresetId::GenericWeak => Placement {
                    mass_power: 0,
                    stiffness_power: 0,
                    s1: soft,
                    s2: soft,
                },
                PresetId::StiffInertia => Placement {
                    mass_power: 2,
                    stiffness_power: 1,
                    s1: soft,
                    s2: soft,
                },
                _ => Placement {
                    mass_power: 1,
                    stiffness_power: 1,
                    s1: stiff,
                    s2: stiff,
                },
            };
            let sys = QuadraticOscillator::new(id.as_str(), blocks, placement, eps);
            if id == PresetId::FoldDemo {
                // stays inside x^2 < 1 + sin t with margin
                let domain = DomainBox {
                    x: vec![(-0.6, 0.6)],
                    xd: vec![(-1.0, 1.0)],
                    y: vec![(-0.5, 0.5)],
                    yd: vec![(-1.0, 1.0)],
                    t: (0.0, std::f64::consts::PI),
                };
                Arc::new(sys.with_domain(domain))
            } else {
                Arc::new(sys)
            }
        }
        PresetId::TetDemo => {
            let mut with_k2 = params.clone();
            with_k2.insert("k2".into(), 0.0);
            let q = |k: &str| with_k2[k];
            let blocks = quadratic::scalar_blocks(&q);
            let placement = Placement {
                mass_power: 1,
                stiffness_power: 1,
                s1: CouplingArg::Soft,
                s2: CouplingArg::Soft,
            };
            Arc::new(QuadraticOscillator::new(id.as_str(), blocks, placement, eps))
        }
        PresetId::TwoDofSsm => Arc::new(TwoDofSsm::new(two_dof_params(&params), eps)),
        PresetId::Pendulum3 => {
            let m = PendulumMode::parse(mode).expect("mode checked");
            Arc::new(Pendulum3::new(m, pendulum_params(&params), eps))
        }
    };
    Ok(Preset {
        id,
        mode: mode.to_string(),
        params,
        eps,
        system,
    })
}

pub fn two_dof_params(p: &ParamMap) -> TwoDofParams {
    TwoDofParams {
        c1: p["c1"],
        c2: p["c2"],
        k1: p["k1"],
        k2: p["k2"],
        a: p["a"],
        b: p["b"],
        c: p["c"],
        mu1: p["mu1"],
    }
}

pub fn pendulum_params(p: &ParamMap) -> PendulumParams {
    PendulumParams {
        l: p["l"],
        d_len: p["D"],
        l_spring: p["L"],
        m_cart: p["M"],
        m_bob: p["m"],
        k_h: p["K_h"],
        gamma_h: p["Gamma_h"],
        k_d: p["K_d"],
        c_d_coef: p["C_d_coef"],
        c_h_coef: p["C_h_coef"],
        c_p_coef: p["c_p_coef"],
        g: p["g"],
        fp_amp: p["fp_amp"],
        fp_freq: p["fp_freq"],
        fp_freq_rel: p["fp_freq_rel"],
        fh_amp: p["fh_amp"],
        fh_freq: p["fh_freq"],
        fd_amp: p["fd_amp"],
        fd_freq: p["fd_freq"],
    }
}

/// Reference initial conditions in physical units, mode coordinate order
/// (positions then velocities).
pub fn pendulum_reference_state(mode: PendulumMode) -> [f64; 6] {
    match mode {
        // (gamma, d, h, gamma', d', h')
        PendulumMode::SoftSoftStiff => [1.000, 1.200, 0.08182, 0.0, 0.0, 0.005301],
        // (gamma, h, d, gamma', h', d')
        PendulumMode::StiffStiffSoft => [1.000, 0.002842, 0.02296, 0.0, 0.0005551, -0.002546],
    }
}
