pub mod analysis;
pub mod assembly;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod runner;
pub mod timestepper;

pub use error::{Error, Result};
