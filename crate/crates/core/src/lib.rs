//! Robust piecewise-quadratic Lyapunov certificates for uncertain
//! piecewise-affine gene regulatory networks.
//!
//! The pipeline is [`model`] → [`partition`] and [`stg`] → [`polytope`] →
//! [`certify`] (which builds an [`sdp`] problem) → [`filippov`] for
//! trajectory-level checks.

pub mod bundled;
pub mod certify;
pub mod filippov;
pub mod json;
pub mod model;
pub mod partition;
pub mod polytope;
pub mod scalar;
pub mod sdp;
pub mod stg;

pub use certify::{certify, Certificate, CertifyConfig, Mode, PwqFunction};
pub use filippov::{simulate, verify, Trajectory, VerificationReport};
pub use model::{LambdaInstance, UncertainGrn};
pub use partition::{Domain, DomainId, Partition};
pub use stg::Stg;

/// Polyhedra over `f64`, the scalar used by the certification pipeline.
pub type HPolytope = polytope::HPolyhedron<f64>;
pub type VPolytope = polytope::VPolyhedron<f64>;
