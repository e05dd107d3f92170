pub mod destabilizer;
pub mod dft;
pub mod error;
pub mod frequency;
pub mod harmonics;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod lure;
pub mod margin;
pub mod multiplier;
pub mod plants;
pub mod polyhedral;
pub mod signal;
pub mod simplex;
pub mod sweep;

pub use error::{Error, Result};
