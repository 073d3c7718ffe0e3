//! Domain-adversarial sequence tagging for semantic frame parsing.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece of
//! the parser: a hand-differentiated numeric layer set, the bidirectional GRU
//! tagger, the gradient-reversal domain adversary and its training loop,
//! k-means domain inference, constrained BIO decoding and the cumulative
//! evaluation metrics. File formats, the CLI and parallel drivers live in the
//! `advframe` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod clustering;
pub mod corpus;
pub mod decoder;
mod error;
pub mod metrics;
pub mod numerics;
pub mod tagger;

pub use error::{Error, Result};
