pub mod cli;
pub mod ctransform;
pub mod divergences;
pub mod error;
pub mod io;
pub mod legendre;
pub mod linalg;
pub mod plot;
pub mod polarity;
pub mod projective;
pub mod transforms;

pub use error::{Error, Result};
