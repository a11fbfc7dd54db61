pub mod classification;
pub mod clustering;
pub mod decomposition;
pub mod error;
pub mod features;
pub mod matrix;
pub mod ontology;
pub mod pipeline;
pub mod rulemining;
pub mod testbed;

pub use error::{NofError, Result};
