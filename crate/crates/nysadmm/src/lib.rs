//! Datasets, synthetic generators and benchmark plumbing around
//! [`nysadmm_core`].

pub mod bench;
pub mod clock;
pub mod generators;
pub mod io;

pub use nysadmm_core as core;
