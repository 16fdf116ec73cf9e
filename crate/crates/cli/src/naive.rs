//! Baseline that gives every block its own model instead of sharing one.
//! Each block runs the complete pipeline in isolation, so model structure
//! and parameters are paid for B times over. Exists to measure what the
//! shared model saves; nothing here is meant for production use.

use ptpmdl::bitio::Bits;
use ptpmdl::codec::{compress, BlockPlan, CompressOptions, CompressOutcome};
use ptpmdl::Result;

pub struct NaiveOutcome {
    /// One independent compression per non-empty block, in block order.
    pub per_block: Vec<CompressOutcome>,
    pub depth: u8,
}

impl NaiveOutcome {
    /// Model plus payload bits summed over the blocks, before byte padding.
    pub fn content_bits(&self) -> u64 {
        self.per_block.iter().map(|o| o.stats.content_bits()).sum()
    }
}

/// Compresses each block of `input` independently with the depth the shared
/// pipeline would have used, so the two are comparable bit for bit.
pub fn naive_compress(input: &Bits, opts: &CompressOptions) -> Result<NaiveOutcome> {
    let plan = BlockPlan::new(input.len(), opts.blocks, opts.depth)?;
    let block_opts = CompressOptions {
        blocks: 1,
        depth: Some(plan.depth),
        ..*opts
    };
    let mut per_block = Vec::with_capacity(plan.blocks as usize);
    for b in 0..plan.blocks {
        let (start, end) = plan.range(b);
        if start == end {
            continue;
        }
        let mut block = Bits::with_capacity(end - start);
        for i in start..end {
            block.push(input.get(i));
        }
        per_block.push(compress(&block, &block_opts)?);
    }
    Ok(NaiveOutcome {
        per_block,
        depth: plan.depth,
    })
}
