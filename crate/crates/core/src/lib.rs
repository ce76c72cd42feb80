pub mod algebra;
pub mod analysis;
pub mod error;
pub mod harness;
pub mod io;
pub mod rng;
pub mod sketch;
pub mod solver;

pub use error::{Result, TspError};
