pub mod averaging;
pub mod cli;
pub mod cubes;
pub mod cutoff;
pub mod error;
pub mod extension;
pub mod fields;
pub mod harness;
pub mod jets;
