pub mod boundary;
pub mod cusped;
pub mod error;
pub mod graph;
pub mod group;
pub mod hyperbolicity;
pub mod lattice;
pub mod quotient;
pub mod scenario;
pub mod spiderweb;
pub mod topology;
pub mod truncation;

pub use error::{LabError, Result};
