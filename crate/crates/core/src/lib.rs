//! Correlation-tensor criteria for multisetting Bell inequalities on qubits.
//!
//! The pipeline is: build a state ([`qstate`]), compute its correlation
//! tensor ([`corrtensor`]), then evaluate a violation criterion
//! ([`criteria`]) or maximize an explicit Bell expression ([`bellineq`]).
//! [`lhv`] checks the classical side by exhaustive enumeration.

mod dense;
mod subspace;

pub mod bellineq;
pub mod corrtensor;
pub mod criteria;
pub mod error;
pub mod lhv;
pub mod qstate;

pub use corrtensor::{compute_tensor, CorrelationTensor, LocalFrame};
pub use criteria::{CriterionId, CriterionResult, Method, Options};
pub use error::{Error, Result};
pub use qstate::{QuantumState, StateSpec};
pub use subspace::CriterionFrames;
