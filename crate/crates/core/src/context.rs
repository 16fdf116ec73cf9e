//! Context statistics, tree pruning, and the shared model.
//!
//! Every symbol position is classified by the `D` symbols preceding it,
//! packed into a context index with the oldest symbol in the least
//! significant bit. A suffix state of length `L` then owns one contiguous
//! range of `2^(D-L)` context indices, which keeps state lookup and count
//! aggregation simple array arithmetic. Pruning runs a bottom-up dynamic
//! program over the full depth-`D` tree and keeps a split exactly when the
//! children describe the data more cheaply than their parent.

use crate::bitio::{BitReader, BitWriter, Bits};
use crate::error::{Error, Result};
use crate::quant::{self, QuantizerSpec};

/// Advances a context window by one symbol: the oldest symbol falls out of
/// the bottom bit and `x` becomes the newest in the top bit.
#[inline]
pub fn next_context(c: u32, x: u8, depth: u8) -> u32 {
    if depth == 0 {
        0
    } else {
        (c >> 1) | ((x as u32) << (depth - 1))
    }
}

/// Dense per-context symbol counts at a fixed depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextTree {
    depth: u8,
    counts: Vec<[u64; 2]>,
    total_symbols: u64,
}

impl ContextTree {
    pub fn new(depth: u8) -> Self {
        assert!(depth <= crate::MAX_DEPTH, "depth {depth} exceeds the table limit");
        ContextTree {
            depth,
            counts: vec![[0; 2]; 1usize << depth],
            total_symbols: 0,
        }
    }

    /// Builds a table directly from per-context counts, one `[zeros, ones]`
    /// pair per depth-`depth` context in index order. For statistics gathered
    /// outside the usual block scan.
    pub fn from_leaf_counts(depth: u8, counts: Vec<[u64; 2]>) -> Self {
        assert!(depth <= crate::MAX_DEPTH, "depth {depth} exceeds the table limit");
        assert_eq!(counts.len(), 1usize << depth, "one count pair per context");
        let total_symbols = counts.iter().map(|c| c[0] + c[1]).sum();
        ContextTree {
            depth,
            counts,
            total_symbols,
        }
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    /// Number of counted symbols, which excludes the first `depth` positions
    /// of every contributing block.
    pub fn total_symbols(&self) -> u64 {
        self.total_symbols
    }

    pub fn counts(&self) -> &[[u64; 2]] {
        &self.counts
    }

    /// Folds another table into this one elementwise.
    pub fn add(&mut self, other: &ContextTree) -> Result<()> {
        if self.depth != other.depth {
            return Err(Error::DepthMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self.total_symbols += other.total_symbols;
        Ok(())
    }

    /// Counts the symbols of `bits[start..end]`. The first `depth` positions
    /// of the range seed the context window and are not counted themselves.
    pub fn accumulate_range(&mut self, bits: &Bits, start: u64, end: u64) -> Result<()> {
        debug_assert!(start <= end && end <= bits.len());
        let depth = self.depth as u64;
        if end - start < depth {
            return Err(Error::BlockTooShort);
        }
        let mut c: u32 = 0;
        for j in 0..depth {
            c |= (bits.get(start + j) as u32) << j;
        }
        for i in (start + depth)..end {
            let x = bits.get(i);
            self.counts[c as usize][x as usize] += 1;
            c = next_context(c, x, self.depth);
        }
        self.total_symbols += end - start - depth;
        Ok(())
    }
}

/// Context index of every position past the warm-up prefix, oldest symbol in
/// the least significant bit.
pub fn context_indices(block: &Bits, depth: u8) -> Result<Vec<u32>> {
    let d = depth as u64;
    if block.len() < d {
        return Err(Error::BlockTooShort);
    }
    let mut c: u32 = 0;
    for j in 0..d {
        c |= (block.get(j) as u32) << j;
    }
    let mut out = Vec::with_capacity((block.len() - d) as usize);
    for i in d..block.len() {
        out.push(c);
        c = next_context(c, block.get(i), depth);
    }
    Ok(out)
}

/// Symbol counts of a single standalone block.
pub fn accumulate_block_counts(block: &Bits, depth: u8) -> Result<ContextTree> {
    let mut tree = ContextTree::new(depth);
    tree.accumulate_range(block, 0, block.len())?;
    Ok(tree)
}

/// Elementwise sum of per-block tables.
pub fn merge_counts(trees: &[ContextTree]) -> Result<ContextTree> {
    let first = trees.first().ok_or(Error::EmptyInput)?;
    let mut merged = ContextTree::new(first.depth);
    for t in trees {
        merged.add(t)?;
    }
    Ok(merged)
}

/// Description cost of one state, together with its quantized parameter.
#[derive(Clone, Copy, Debug)]
pub struct StateCost {
    pub bits: f64,
    pub bin: u32,
    pub level: f64,
}

/// Cost in bits of coding `(n0, n1)` through a `levels`-bin quantizer:
/// log2(levels) to name the bin plus the symbol cost at the bin's level.
/// An empty state defaults to the maximum-likelihood estimate 1/2.
pub fn state_cost(n0: u64, n1: u64, levels: u32) -> StateCost {
    let total = n0 + n1;
    let theta = if total == 0 {
        0.5
    } else {
        n1 as f64 / total as f64
    };
    let (bin, level) = quant::quantize(theta, levels);
    let mut bits = (levels as f64).log2();
    if n0 > 0 {
        bits -= n0 as f64 * (1.0 - level).log2();
    }
    if n1 > 0 {
        bits -= n1 as f64 * level.log2();
    }
    StateCost { bits, bin, level }
}

/// One leaf surviving the prune, carrying the merged counts of its range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrunedLeaf {
    pub depth: u8,
    pub value: u32,
    pub n0: u64,
    pub n1: u64,
}

/// Outcome of pruning: leaves in depth-first order, the total description
/// cost, and the number of tree nodes the dynamic program examined.
#[derive(Clone, Debug)]
pub struct Pruning {
    pub leaves: Vec<PrunedLeaf>,
    pub cost_bits: f64,
    pub nodes_visited: u64,
}

#[inline]
fn node_index(depth: u8, value: u32) -> usize {
    (1usize << depth) + value as usize
}

/// Prunes the full tree to the leaf set minimizing structure bits plus
/// per-state coding cost. Every node above the maximum depth charges one
/// structure bit; a split survives only when it is strictly cheaper, so ties
/// collapse to the smaller model.
pub fn prune_with_levels(tree: &ContextTree, levels: u32) -> Pruning {
    let mut split = vec![false; 1usize << (tree.depth as usize + 1)];
    let mut visited = 0u64;
    let (_, _, cost_bits) = prune_node(tree, levels, 0, 0, &mut split, &mut visited);
    let mut leaves = Vec::new();
    emit_leaves(tree, 0, 0, &split, &mut leaves);
    Pruning {
        leaves,
        cost_bits,
        nodes_visited: visited,
    }
}

fn prune_node(
    tree: &ContextTree,
    levels: u32,
    depth: u8,
    value: u32,
    split: &mut [bool],
    visited: &mut u64,
) -> (u64, u64, f64) {
    *visited += 1;
    if depth == tree.depth {
        let [n0, n1] = tree.counts[value as usize];
        return (n0, n1, state_cost(n0, n1, levels).bits);
    }
    let (a0, a1, ca) = prune_node(tree, levels, depth + 1, 2 * value, split, visited);
    let (b0, b1, cb) = prune_node(tree, levels, depth + 1, 2 * value + 1, split, visited);
    let (n0, n1) = (a0 + b0, a1 + b1);
    let keep = state_cost(n0, n1, levels).bits;
    let children = ca + cb;
    if children < keep {
        split[node_index(depth, value)] = true;
        (n0, n1, 1.0 + children)
    } else {
        (n0, n1, 1.0 + keep)
    }
}

fn emit_leaves(
    tree: &ContextTree,
    depth: u8,
    value: u32,
    split: &[bool],
    out: &mut Vec<PrunedLeaf>,
) {
    if depth < tree.depth && split[node_index(depth, value)] {
        emit_leaves(tree, depth + 1, 2 * value, split, out);
        emit_leaves(tree, depth + 1, 2 * value + 1, split, out);
    } else {
        let (n0, n1) = range_counts(tree, depth, value);
        out.push(PrunedLeaf {
            depth,
            value,
            n0,
            n1,
        });
    }
}

/// Sums the counts of every full-depth context reached through `(depth, value)`.
fn range_counts(tree: &ContextTree, depth: u8, value: u32) -> (u64, u64) {
    let width = tree.depth - depth;
    let lo = (value as usize) << width;
    let hi = lo + (1usize << width);
    tree.counts[lo..hi]
        .iter()
        .fold((0, 0), |(n0, n1), c| (n0 + c[0], n1 + c[1]))
}

/// One state of the pruned model.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub depth: u8,
    pub value: u32,
    pub n0: u64,
    pub n1: u64,
    /// Quantizer bin index.
    pub bin: u32,
    /// Level count of the quantizer this state currently uses.
    pub levels: u32,
    /// Probability of a one symbol, the bin's representation level.
    pub level: f64,
    /// Whether the two-level scheme put this state on the coarse quantizer.
    pub coarse: bool,
}

/// The pruned tree source shared by every block in the coding pass.
///
/// States sit in depth-first order with child 0 before child 1, the same
/// order used by the structure code and the serialized parameter indices.
#[derive(Clone, Debug)]
pub struct MdlSource {
    pub depth: u8,
    pub quant: QuantizerSpec,
    pub states: Vec<ModelState>,
    /// Total description cost found by the prune, in bits.
    pub mdl_root: f64,
    /// Tree nodes examined while pruning.
    pub model_ops: u64,
}

/// Prunes the merged counts with the quantizer sized by the whole input.
/// The returned parameters are the pruning-time ones; apply
/// [`MdlSource::requantize`] afterwards to switch the states to the
/// configured scheme.
pub fn prune_mdl(tree: &ContextTree, quant: QuantizerSpec) -> MdlSource {
    let k0 = quant::num_levels(quant.basis_bits.max(1));
    let pruning = prune_with_levels(tree, k0);
    let states = pruning
        .leaves
        .iter()
        .map(|leaf| {
            let c = state_cost(leaf.n0, leaf.n1, k0);
            ModelState {
                depth: leaf.depth,
                value: leaf.value,
                n0: leaf.n0,
                n1: leaf.n1,
                bin: c.bin,
                levels: k0,
                level: c.level,
                coarse: false,
            }
        })
        .collect();
    MdlSource {
        depth: tree.depth,
        quant,
        states,
        mdl_root: pruning.cost_bits,
        model_ops: pruning.nodes_visited,
    }
}

impl MdlSource {
    /// Reassigns every state's bin and level under the configured scheme.
    /// The leaf set itself never changes, only the parameter resolution.
    pub fn requantize(&mut self) {
        let q = self.quant;
        let count = self.states.len() as u64;
        for st in &mut self.states {
            let total = st.n0 + st.n1;
            let (levels, coarse) = q.levels_for(count, total);
            let theta = if total == 0 {
                0.5
            } else {
                st.n1 as f64 / total as f64
            };
            let (bin, level) = quant::quantize(theta, levels);
            st.bin = bin;
            st.levels = levels;
            st.level = level;
            st.coarse = coarse;
        }
    }

    /// Length of the structure code in bits: one per tree node above the
    /// maximum depth.
    pub fn natural_len(&self) -> u64 {
        let max_depth_leaves = self
            .states
            .iter()
            .filter(|s| s.depth == self.depth)
            .count() as u64;
        2 * self.states.len() as u64 - 1 - max_depth_leaves
    }

    /// Writes the structure code: a depth-first walk emitting 1 for an
    /// internal node and 0 for a leaf, with nothing for nodes at the maximum
    /// depth since those can only be leaves.
    pub fn encode_structure(&self, w: &mut BitWriter) {
        fn walk(
            states: &[ModelState],
            cursor: &mut usize,
            depth: u8,
            value: u32,
            max: u8,
            w: &mut BitWriter,
        ) {
            let here = &states[*cursor];
            if here.depth == depth && here.value == value {
                *cursor += 1;
                if depth < max {
                    w.write_bit(0);
                }
            } else {
                debug_assert!(depth < max, "state list is not a proper tree");
                w.write_bit(1);
                walk(states, cursor, depth + 1, 2 * value, max, w);
                walk(states, cursor, depth + 1, 2 * value + 1, max, w);
            }
        }
        let mut cursor = 0;
        walk(&self.states, &mut cursor, 0, 0, self.depth, w);
        debug_assert_eq!(cursor, self.states.len());
    }
}

/// Reads a structure code back into its leaves as `(depth, value)` pairs in
/// depth-first order.
pub fn decode_structure(r: &mut BitReader, depth: u8) -> Result<Vec<(u8, u32)>> {
    fn walk(r: &mut BitReader, d: u8, value: u32, max: u8, out: &mut Vec<(u8, u32)>) -> Result<()> {
        if d == max {
            out.push((d, value));
            return Ok(());
        }
        match r.next_bit() {
            Some(1) => {
                walk(r, d + 1, 2 * value, max, out)?;
                walk(r, d + 1, 2 * value + 1, max, out)
            }
            Some(_) => {
                out.push((d, value));
                Ok(())
            }
            None => Err(Error::MalformedStructure),
        }
    }
    let mut out = Vec::new();
    walk(r, 0, 0, depth, &mut out)?;
    Ok(out)
}

/// Flat map from each full-depth context index to its generating state.
#[derive(Clone, Debug)]
pub struct GeneratorTable {
    depth: u8,
    state_of: Vec<u32>,
    probs: Vec<f64>,
}

impl GeneratorTable {
    /// Builds the table from `(depth, value, prob_one)` states. Each state
    /// fills its contiguous index range, so construction touches every slot
    /// exactly once.
    pub fn from_states<I>(depth: u8, states: I) -> Self
    where
        I: IntoIterator<Item = (u8, u32, f64)>,
    {
        let mut state_of = vec![u32::MAX; 1usize << depth];
        let mut probs = Vec::new();
        for (id, (d, v, p)) in states.into_iter().enumerate() {
            let width = depth - d;
            let lo = (v as usize) << width;
            let hi = lo + (1usize << width);
            for slot in &mut state_of[lo..hi] {
                debug_assert_eq!(*slot, u32::MAX, "state ranges overlap");
                *slot = id as u32;
            }
            probs.push(p);
        }
        debug_assert!(
            state_of.iter().all(|&s| s != u32::MAX),
            "states do not cover every context"
        );
        GeneratorTable {
            depth,
            state_of,
            probs,
        }
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn state_count(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn state(&self, ctx: u32) -> u32 {
        self.state_of[ctx as usize]
    }

    /// Probability of a one symbol in the given context.
    #[inline]
    pub fn prob_one(&self, ctx: u32) -> f64 {
        self.probs[self.state_of[ctx as usize] as usize]
    }
}

/// Generator table of a pruned model.
pub fn build_generator_table(source: &MdlSource) -> GeneratorTable {
    GeneratorTable::from_states(
        source.depth,
        source.states.iter().map(|s| (s.depth, s.value, s.level)),
    )
}
