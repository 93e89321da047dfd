pub mod cli;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod irka;
pub mod linalg;
pub mod matrixeq;
pub mod stabilize;

pub use error::{Error, Result};
