pub mod cli;
pub mod cumulants;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod model;
pub mod simharness;

pub use error::{EmaxError, Result};
