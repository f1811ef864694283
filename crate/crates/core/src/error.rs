use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, Error)]
pub enum SfdError {
    #[error("singular {block} block (pivot ratio {cond:.3e})")]
    SingularBlock { block: &'static str, cond: f64 },

    #[error("singular mass matrix (pivot ratio {cond:.3e})")]
    SingularMass { cond: f64 },

    #[error("non-finite value from evaluator: {context}")]
    NonFinite { context: String },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("singular Jacobian dP2/deta at x={x:?}, xd={xd:?}, t={t} (near a fold)")]
    SingularJacobian {
        x: Vec<f64>,
        xd: Vec<f64>,
        t: f64,
        eta: Vec<f64>,
    },

    #[error("unstable critical point at x={x:?}, xd={xd:?}, t={t} (max Re = {max_re:.3e})")]
    UnstableSample {
        x: Vec<f64>,
        xd: Vec<f64>,
        t: f64,
        max_re: f64,
        count: usize,
    },

    #[error("eigenvalue solver failed")]
    EigenFailure,

    #[error("step size underflow at t={t} (h={h:.3e}); problem may be stiff")]
    StepSizeUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("step budget of {steps} exhausted at t={t}")]
    TooManySteps { t: f64, steps: usize },

    #[error("right-hand side failed at t={t}: {reason}")]
    RhsFailure { t: f64, reason: String },

    #[error("time {t} outside admissible interval [{a}, {b}]")]
    TimeDomain { t: f64, a: f64, b: f64 },

    #[error("mass-multiplied form unavailable: M1 is not smooth at eps = 0")]
    M1NotSmooth,

    #[error("distance to slow manifold never fell below {snap_tol:.3e} (min {min_distance:.3e})")]
    NoApproach { snap_tol: f64, min_distance: f64 },

    #[error("fold indicator has no sign change and Newton never failed along the path")]
    NoSignChange,

    #[error("degenerate fold (nondegeneracy {value:.3e})")]
    DegenerateFold { value: f64 },

    #[error("branch classification found {crossings} eigenvalue crossings instead of one")]
    BranchCrossing { crossings: usize },

    #[error("near 2:1 resonance: |D| = {d:.3e}")]
    NearResonance { d: f64 },

    #[error("assumption A4 violated: |dP2/dxd| = {value:.3e}")]
    A4Violated { value: f64 },

    #[error("assumption A5 violated: {reason}")]
    A5Violated { reason: String },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("unknown mode '{mode}' for preset '{preset}'")]
    UnknownMode { preset: String, mode: String },

    #[error("unknown parameter '{name}' for preset '{preset}'")]
    UnknownParameter { preset: String, name: String },

    #[error("invalid parameter '{name}' = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("key '{key}' expects {expected}")]
    TypeMismatch { key: String, expected: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = SfdError> = std::result::Result<T, E>;
