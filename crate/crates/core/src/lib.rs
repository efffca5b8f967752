//! Linear and nonlinear descriptors of noise signals and the ergodicity
//! breaking parameter computed over their epoch series.

pub mod config;
pub mod descriptors;
pub mod dfa;
pub mod ergodicity;
pub mod error;
pub mod figures;
pub mod gamble;
pub mod io;
pub mod linstats;
pub mod multifractal;
pub mod noise;
pub mod numeric;
pub mod pipeline;
pub mod regression;
pub mod seed;
pub mod series;
pub mod spectral;
pub mod surrogate;

pub use error::{Error, Result};
pub use linstats::{Descriptor, DescriptorSeries, EpochFlag, EpochGrid};
pub use series::{Provenance, TimeSeries};
