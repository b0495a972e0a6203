//! Review-to-hashtag generation with two neural pipelines and an evaluation
//! battery.

pub mod annotate;
pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod evalmetrics;
pub mod files;
pub mod maskedlm;
pub mod numcore;
pub mod pipeline;

pub use error::{Error, Result};
pub mod seq2seq;
pub mod train;
