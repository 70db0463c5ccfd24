//! Sequential projective measurements on finite and truncated quantum systems.

pub mod boxmodel;
pub mod error;
pub mod finitedim;
pub mod freegroup;
pub mod ladder;
pub mod linalg;
pub mod qcore;
pub mod quad;
pub mod sequences;
pub mod spinpos;
pub mod tomography;

pub use error::{Error, Result};
