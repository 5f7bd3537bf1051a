//! Monte Carlo laboratory for random vector-valued Schrödinger operators
//! `-½Δ + V + ξ` with matrix noise over the reals, complex numbers or
//! quaternions.

pub mod algebra;
pub mod combinatorics;
pub mod error;
pub mod estimators;
pub mod jumps;
pub mod noise;
pub mod paths;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use algebra::{Complex2x2, FieldElement, FieldKind};
pub use combinatorics::{BinarySequence, Jump, Matching};
pub use error::{Error, Result};
pub use model::{Discretization, ExperimentSpec, Model, Potential, MAX_TRACE_FACTORS};
pub use paths::Domain;
pub use stats::{Execution, MomentEstimate};
