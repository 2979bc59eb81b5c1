//! Span-selection pre-training data generation and a toy pointer-network reader.
//!
//! The pipeline runs corpus segmentation ([`corpus`]), tokenization and
//! answer-term annotation ([`analysis`]), BM25 retrieval ([`index`]), and
//! instance assembly ([`generator`]). The [`model`] module holds a small
//! transformer encoder with start/end pointer heads and an optional
//! answerability classifier, trained on the generated instances.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod generator;
pub mod index;
pub mod model;
mod text;

pub use error::{Error, Result};
