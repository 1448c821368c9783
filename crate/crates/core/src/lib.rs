//! Hyperuniformity diagnostics for finite point sets on the unit sphere S^d.

pub mod energy;
pub mod error;
pub mod io;
pub mod overlap;
pub mod pointset;
pub mod quad;
pub mod regression;
pub mod specfun;
pub mod structure;
pub mod sum;
pub mod tail;
pub mod variance;

pub use error::{Error, Result};
pub use pointset::{OptimizerOptions, PointSet, Provenance};
pub use structure::{PointSetSequence, RegimeReport, SequenceSource};
pub use specfun::{SeriesTruncation, SphereDim, TruncationConfig};
