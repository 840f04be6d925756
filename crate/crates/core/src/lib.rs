//! Gated warfarin dosing: the IWPC clinical dose model behind a kernel
//! classifier that flags patients for whom the model is unreliable.

pub mod cli;
pub mod cohort;
pub mod error;
pub mod eval;
pub mod gate;
pub mod iwpc_dose;
pub mod pipeline;
pub mod svm;

pub use error::{Error, Result};
