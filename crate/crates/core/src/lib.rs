pub mod error;
pub mod lattice;
pub mod modlat;
pub mod torus;
pub mod formula;
pub mod structure;
pub mod solver;
pub mod finite;
pub mod orbit;
pub mod types;
pub mod check;
pub mod cli;

pub use error::{Error, Result};
