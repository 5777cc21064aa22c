//! Second-order (evidential) uncertainty for exponential-family models, and
//! tools to check whether learned second-order distributions are faithful to
//! the sampling variability of first-order fits.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod family;
pub mod marginal;
pub mod nn;
pub mod oracles;
pub mod plot;
pub mod reference;
pub mod second_order;
pub mod specfun;
pub mod train;

pub use error::{Error, Result};
