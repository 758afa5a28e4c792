pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
mod seed;
pub mod stroke;
pub mod tensor;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
