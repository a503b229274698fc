//! Cross-lingual information extraction with constituency-aware,
//! frequency-modulated attention and multi-level representation alignment.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod interaction;
pub mod metrics;
pub mod numerics;
pub mod syntax;
pub mod tasks;
pub(crate) mod util;

pub use error::{Result, ShineError};
