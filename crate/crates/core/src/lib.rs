pub mod analysis;
pub mod certificate;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod momentpoly;
pub mod moments;
pub mod p4;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
