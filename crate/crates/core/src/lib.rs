//! Flag-conditioned decoder weights for triangular color codes.

pub mod circuit;
pub mod code;
pub mod decoder;
pub mod deflag;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod sim;
pub mod weights;

pub use code::{Basis, ColorCode, Family};
pub use error::{Error, Result};
