//! Two-pass context-tree compressor.
//!
//! Pass I scans the input once to collect per-context symbol counts, merges
//! them, and prunes the full suffix tree to the subtree that minimizes total
//! description length. Pass II splits the input into blocks and codes each
//! one independently against that shared model, so blocks can be encoded and
//! decoded in parallel and any single block can be decoded without touching
//! the others.

pub mod arith;
pub mod bitio;
pub mod codec;
pub mod container;
pub mod context;
pub mod error;
pub mod quant;

pub use codec::{
    compress, decompress, decompress_block, BlockDecoder, CompressOptions, CompressOutcome,
};
pub use error::{Error, Result};

/// Hard cap on the context depth. Tables are dense in `2^depth`, so this
/// bounds decoder memory no matter what a parsed header claims.
pub const MAX_DEPTH: u8 = 22;
