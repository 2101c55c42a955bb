//! Return trajectories, Cayley graphs of `SL2(Z/q)`, measures on the fibers
//! and the flattening estimates.

pub mod flatten;
pub mod measures;
pub mod returns;

pub use flatten::{flattening_pipeline, FlatteningConfig, FlatteningReport};
pub use measures::{approx_transfer_check, build_measures, ApproxReport, FqMeasure, MeasureQuad};
pub use returns::{
    build_return_set, cayley_gap, detect_level, generates_full, min_irrep_dimension, CayleySpectrum,
    GenerationCertificate, LevelDetection, ReturnSet,
};

use crate::congruence::CongruenceError;
use crate::symbolic::SymbolicError;
use crate::thermo::ThermoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpanderError {
    #[error("{0} words exceed the enumeration limit")]
    EnumerationTooLarge(u128),
    #[error("return set does not generate SL2(Z/{0}) (closure size {1})")]
    NotGenerating(u64, usize),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("difference s - r = {0} outside the supported range")]
    StepRange(usize),
    #[error("cylinder depth {0} below the required {1}")]
    DepthExhausted(usize, usize),
    #[error("no admissible configuration: {0}")]
    NoConfiguration(String),
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}
