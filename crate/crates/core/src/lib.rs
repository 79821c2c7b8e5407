//! Degree distributions of the directed preferential-attachment graph:
//! simulation, the joint limit law of (in, out) degrees, its regularly
//! varying tail, and Tauberian checks linking the two.

pub mod census;
pub mod checks;
pub mod error;
pub mod limit;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod special;
pub mod tail;
pub mod tauberian;

pub use census::{JointCountTable, JointPmf, Margin, TailFit};
pub use error::{Error, Result};
pub use limit::{Component, LimitDistribution};
pub use params::{DerivedConstants, ModelParams};
pub use quadrature::QuadratureSpec;
pub use sim::DirectedMultigraph;
pub use tail::{TailComponent, TailMeasure};

/// Crate version, written into output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
