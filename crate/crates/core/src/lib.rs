//! Weighted upper densities, Furstenberg families and C-type operators.
//!
//! Sets of naturals ([`IndexSet`]) are measured against weight sequences
//! ([`WeightSequence`]) by finite-horizon estimators; constructions produce
//! weights and sets with prescribed density behaviour; C-type operators
//! ([`CTypeParams`]) act exactly on dyadic sparse vectors.

pub mod audit;
pub mod ctype;
pub mod density;
pub mod dyadic;
pub mod error;
pub mod experiment;
pub mod forge;
pub mod furstenberg;
pub mod index_set;
pub mod report;
pub mod sparse;
pub mod weight;

pub use ctype::{build_c_plus_1, CPlus1Config, CTypeParams, TauRule};
pub use density::{DensityProfile, SamplePlan};
pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use experiment::{run, ExperimentConfig};
pub use index_set::IndexSet;
pub use report::{AuditReport, Check};
pub use sparse::SparseVector;
pub use weight::{WeightSequence, WeightSpec};
