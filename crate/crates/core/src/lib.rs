//! Exact model reduction of mechanical systems by slow-fast decomposition.

pub mod config;
pub mod consistency;
pub mod critical;
pub mod decomposition;
pub mod error;
pub mod fold;
pub mod integrate;
pub mod linalg;
pub mod local;
pub mod presets;
pub mod reduced;
pub mod sampling;
pub mod scalar;
pub mod slow_manifold;
pub mod system;

pub use error::{Result, SfdError};
pub use scalar::Scalar;
pub use system::{DomainBox, MechanicalSystem, Partition, PhasePoint, TimeDependence};

/// Double-precision aliases.
pub type System64 = dyn MechanicalSystem<f64>;
pub type SharedSystem64 = std::sync::Arc<System64>;
pub type PhasePoint64 = PhasePoint<f64>;
pub type CriticalPoint64 = critical::CriticalPoint<f64>;
pub type DecoupledForm64 = decomposition::DecoupledForm<f64>;
pub type Chart64 = slow_manifold::SlowManifoldChart<f64>;
pub type ReducedModel64 = reduced::ReducedModel<f64>;
pub type SyncRun64 = reduced::SyncRun<f64>;
pub type Trajectory64 = integrate::Trajectory<f64>;
pub type LocalExpansion64 = local::LocalExpansion<f64>;
pub type LocalModel64 = local::LocalModel<f64>;
pub type Preset64 = presets::Preset<f64>;
