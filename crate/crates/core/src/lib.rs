//! Error-correction maps for a leaky integrate-and-fire beat generator
//! entrained to an isochronous tone sequence.

pub mod error;
pub mod event_sim;
pub mod linear;
pub mod maps;
pub mod orbit;
pub mod roots;

pub use error::{AnalysisError, MapError};
pub use maps::{CycleRecord, MapState, ModelParams};
pub use orbit::MapKind;
