pub mod bench;
pub mod csd;
pub mod error;
pub mod io;
pub mod isometry;
pub mod kernel;
pub mod polar;
pub mod selftest;
pub mod symeig;
pub mod testgen;

pub use error::{Error, Result};
pub use kernel::{Matrix, C64, UNIT_ROUNDOFF};
