//! Attribute-mediated vision-to-language pipeline on a synthetic micro-world.

pub mod attrnet;
pub mod decode;
pub mod error;
pub mod expand;
pub mod harness;
pub mod metrics;
pub mod microworld;
pub mod rng;
pub mod seqcore;
pub mod tasks;
pub mod tensor;
pub mod vocab;

pub use error::{Error, Result};
