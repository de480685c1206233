//! attriq: post-hoc attribution engine with a quantitative evaluation suite.
//!
//! The crate splits into two component families. Attribution modules produce
//! per-feature or per-pixel relevance scores for a single prediction
//! ([`attrib`]); metric modules score those explanations against the model
//! they explain ([`metrics`]). Native model families live in [`model`],
//! on-disk formats in [`io`], and the batch benchmark front end in [`bench`].

pub mod attrib;
pub mod bench;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{Model, ModelOutput};
pub use tensor::Tensor;
