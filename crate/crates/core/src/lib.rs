pub mod assembly;
pub mod error;
pub mod lambda;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod precond;
pub mod problems;

pub use error::{Error, Result};
