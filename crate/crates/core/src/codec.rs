//! The two-pass pipeline.
//!
//! Pass I counts contexts per block, merges the tables, prunes, and
//! serializes the model. Pass II codes each block independently against the
//! shared model: the first `D` symbols of a block go out raw since they lack
//! a full context, the rest through the arithmetic coder. Blocks at most `D`
//! bits long are stored entirely raw. Both passes run serially or across a
//! thread pool with bit-identical output, and any single block can be
//! decoded from the header, the model segment, and its own payload.

use std::io::{Read, Seek, SeekFrom};
use std::time::Instant;

use rayon::prelude::*;

use crate::arith::{Decoder, Encoder};
use crate::bitio::{BitReader, BitWriter, Bits};
use crate::container::{self, byte_extent, Container, HeaderInfo, HEADER_LEN};
use crate::context::{
    build_generator_table, decode_structure, next_context, prune_mdl, ContextTree, GeneratorTable,
    MdlSource,
};
use crate::error::{Error, Result};
use crate::quant::{self, QuantizerSpec, Scheme};

/// Depth used when none is requested, bounded so a count table never
/// outgrows a few dozen megabytes.
pub const DEFAULT_DEPTH_CAP: u8 = 20;

/// Partition of the input into block bit ranges plus the context depth.
/// The first `blocks - 1` ranges hold `ceil(n/blocks)` bits each and the
/// last takes the remainder, so trailing ranges may be empty when there are
/// more blocks than bits.
#[derive(Clone, Copy, Debug)]
pub struct BlockPlan {
    pub n_bits: u64,
    pub blocks: u32,
    pub depth: u8,
    nominal: u64,
}

impl BlockPlan {
    pub fn new(n_bits: u64, blocks: u32, depth: Option<u8>) -> Result<BlockPlan> {
        if blocks == 0 {
            return Err(Error::InvalidOptions("block count must be at least 1"));
        }
        let nominal = n_bits.div_ceil(blocks as u64);
        let depth = match depth {
            Some(d) if d > crate::MAX_DEPTH => return Err(Error::DepthTooLarge(d)),
            Some(d) => d,
            None => default_depth(n_bits, blocks, nominal),
        };
        Ok(BlockPlan {
            n_bits,
            blocks,
            depth,
            nominal,
        })
    }

    pub fn range(&self, b: u32) -> (u64, u64) {
        let start = (self.nominal * b as u64).min(self.n_bits);
        let end = (self.nominal * (b as u64 + 1)).min(self.n_bits);
        (start, end)
    }

    pub fn len(&self, b: u32) -> u64 {
        let (start, end) = self.range(b);
        end - start
    }

    /// A block too short to code against the model is stored raw in full.
    pub fn is_degenerate(&self, b: u32) -> bool {
        self.len(b) <= self.depth as u64
    }
}

/// Largest depth whose warm-up prefix still fits in the shortest block.
fn default_depth(n_bits: u64, blocks: u32, nominal: u64) -> u8 {
    let covered = (blocks as u64 - 1).saturating_mul(nominal);
    let min_len = n_bits.saturating_sub(covered);
    if min_len == 0 {
        0
    } else {
        ((63 - min_len.leading_zeros() as u8) as u8).min(DEFAULT_DEPTH_CAP)
    }
}

#[derive(Clone, Debug)]
pub struct CompressOptions {
    pub blocks: u32,
    /// Context depth; chosen from the block lengths when absent.
    pub depth: Option<u8>,
    pub scheme: Scheme,
    /// Two-level population threshold; defaults to ceil(sqrt(n)).
    pub tau: Option<u64>,
    /// Spread per-block work over the thread pool. Output is identical
    /// either way.
    pub parallel: bool,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            blocks: 1,
            depth: None,
            scheme: Scheme::Global,
            tau: None,
            parallel: true,
        }
    }
}

/// Measurements for one block of one compression run.
#[derive(Clone, Debug)]
pub struct BlockRecord {
    pub block_bits: u64,
    /// Bits of the payload written without coding.
    pub raw_bits: u64,
    pub payload_bits: u64,
    /// Information content of the coded symbols at the model's levels.
    pub ideal_bits: f64,
    /// Input symbols touched while counting and coding this block.
    pub symbol_ops: u64,
    pub degenerate: bool,
    pub nanos: u64,
}

/// Whole-run measurements: per-block records plus model accounting.
#[derive(Clone, Debug)]
pub struct BlockStats {
    pub records: Vec<BlockRecord>,
    /// Structure-code bits at the front of the model segment.
    pub natural_bits: u64,
    /// Coarse/fine flag count, zero outside the two-level scheme.
    pub flag_bits: u64,
    /// Information content of the bin indices.
    pub param_ideal_bits: f64,
    pub model_len_bits: u64,
    pub ideal_coded_bits: f64,
    /// Maximum-likelihood entropy of the counted symbols under the pruned
    /// model, the baseline all redundancy is measured against.
    pub nh_bits: f64,
    pub state_count: usize,
    pub mdl_root: f64,
    /// Tree nodes examined by the prune.
    pub model_ops: u64,
    /// Wall time of the serial section: merge, prune, model serialization,
    /// and container assembly.
    pub ts_nanos: u64,
    /// Summed wall time of the per-block sections.
    pub tsp_nanos: u64,
}

impl BlockStats {
    pub fn total_payload_bits(&self) -> u64 {
        self.records.iter().map(|r| r.payload_bits).sum()
    }

    pub fn total_raw_bits(&self) -> u64 {
        self.records.iter().map(|r| r.raw_bits).sum()
    }

    /// Model plus payload bits, before byte padding.
    pub fn content_bits(&self) -> u64 {
        self.model_len_bits + self.total_payload_bits()
    }

    /// Content bits beyond the maximum-likelihood entropy of the input
    /// under the recovered model.
    pub fn redundancy_bits(&self) -> f64 {
        self.content_bits() as f64 - self.nh_bits
    }
}

pub struct CompressOutcome {
    pub container: Container,
    pub stats: BlockStats,
    pub model: MdlSource,
}

fn ml_entropy_bits(n0: u64, n1: u64) -> f64 {
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let n = (n0 + n1) as f64;
    let p = n1 as f64 / n;
    -(n1 as f64) * p.log2() - (n0 as f64) * (1.0 - p).log2()
}

pub fn compress(input: &Bits, opts: &CompressOptions) -> Result<CompressOutcome> {
    if input.is_empty() {
        return Err(Error::EmptyInput);
    }
    let plan = BlockPlan::new(input.len(), opts.blocks, opts.depth)?;

    type CountAcc = (ContextTree, Vec<(u32, u64, u64)>);
    let count_into = |acc: &mut CountAcc, b: u32| {
        let t0 = Instant::now();
        let (start, end) = plan.range(b);
        let mut ops = 0;
        if end - start > plan.depth as u64 {
            let before = acc.0.total_symbols();
            acc.0
                .accumulate_range(input, start, end)
                .expect("block spans at least the context depth");
            ops = acc.0.total_symbols() - before;
        }
        acc.1.push((b, ops, t0.elapsed().as_nanos() as u64));
    };
    let (merged, count_marks) = if opts.parallel {
        (0..plan.blocks)
            .into_par_iter()
            .fold(
                || (ContextTree::new(plan.depth), Vec::new()),
                |mut acc, b| {
                    count_into(&mut acc, b);
                    acc
                },
            )
            .reduce(
                || (ContextTree::new(plan.depth), Vec::new()),
                |mut a, b| {
                    a.0.add(&b.0).expect("tables share the plan depth");
                    a.1.extend(b.1);
                    a
                },
            )
    } else {
        let mut acc = (ContextTree::new(plan.depth), Vec::new());
        for b in 0..plan.blocks {
            count_into(&mut acc, b);
        }
        acc
    };
    let mut count_marks_by_block = vec![(0u64, 0u64); plan.blocks as usize];
    for (b, ops, nanos) in count_marks {
        count_marks_by_block[b as usize] = (ops, nanos);
    }

    let serial0 = Instant::now();
    let spec = QuantizerSpec::new(opts.scheme, input.len(), opts.tau);
    let mut model = prune_mdl(&merged, spec);
    model.requantize();
    let table = build_generator_table(&model);

    let mut w = BitWriter::new();
    model.encode_structure(&mut w);
    let natural_bits = w.len_bits();
    let mut enc = Encoder::new(w);
    let mut param_ideal_bits = 0.0;
    for st in &model.states {
        if opts.scheme == Scheme::TwoLevel {
            enc.encode_bit(u8::from(st.coarse), 0.5);
        }
        enc.encode_uniform(st.bin, st.levels);
        param_ideal_bits += (st.levels as f64).log2();
    }
    let model_bits = enc.finish().into_bits();
    let serial_front_nanos = serial0.elapsed().as_nanos() as u64;

    let encode_block = |b: u32| -> (Bits, BlockRecord) {
        let t0 = Instant::now();
        let (start, end) = plan.range(b);
        let m_b = end - start;
        let d = plan.depth as u64;
        if m_b <= d {
            let mut w = BitWriter::new();
            for i in start..end {
                w.write_bit(input.get(i));
            }
            let bits = w.into_bits();
            let record = BlockRecord {
                block_bits: m_b,
                raw_bits: m_b,
                payload_bits: bits.len(),
                ideal_bits: 0.0,
                symbol_ops: m_b,
                degenerate: true,
                nanos: t0.elapsed().as_nanos() as u64,
            };
            (bits, record)
        } else {
            let mut w = BitWriter::new();
            let mut c = 0u32;
            for j in 0..d {
                let x = input.get(start + j);
                w.write_bit(x);
                c |= (x as u32) << j;
            }
            let mut enc = Encoder::new(w);
            for i in (start + d)..end {
                let x = input.get(i);
                enc.encode_bit(x, table.prob_one(c));
                c = next_context(c, x, plan.depth);
            }
            let ideal_bits = enc.ideal_bits();
            let bits = enc.finish().into_bits();
            let record = BlockRecord {
                block_bits: m_b,
                raw_bits: d,
                payload_bits: bits.len(),
                ideal_bits,
                symbol_ops: m_b,
                degenerate: false,
                nanos: t0.elapsed().as_nanos() as u64,
            };
            (bits, record)
        }
    };
    let coded: Vec<(Bits, BlockRecord)> = if opts.parallel {
        (0..plan.blocks).into_par_iter().map(encode_block).collect()
    } else {
        (0..plan.blocks).map(encode_block).collect()
    };

    let serial1 = Instant::now();
    let mut payloads = Vec::with_capacity(coded.len());
    let mut records = Vec::with_capacity(coded.len());
    let mut tsp_nanos = 0u64;
    for ((bits, mut record), &(count_ops, count_nanos)) in
        coded.into_iter().zip(&count_marks_by_block)
    {
        record.symbol_ops += count_ops;
        record.nanos += count_nanos;
        tsp_nanos += record.nanos;
        payloads.push(bits);
        records.push(record);
    }
    let container = Container {
        n_bits: input.len(),
        depth: plan.depth,
        scheme: opts.scheme,
        tau: spec.tau,
        model: model_bits,
        payloads,
    };

    let nh_bits: f64 = model
        .states
        .iter()
        .map(|s| ml_entropy_bits(s.n0, s.n1))
        .sum();
    let stats = BlockStats {
        records,
        natural_bits,
        flag_bits: if opts.scheme == Scheme::TwoLevel {
            model.states.len() as u64
        } else {
            0
        },
        param_ideal_bits,
        model_len_bits: container.model.len(),
        ideal_coded_bits: 0.0,
        nh_bits,
        state_count: model.states.len(),
        mdl_root: model.mdl_root,
        model_ops: model.model_ops,
        ts_nanos: serial_front_nanos + serial1.elapsed().as_nanos() as u64,
        tsp_nanos,
    };
    let mut stats = stats;
    stats.ideal_coded_bits = stats.records.iter().map(|r| r.ideal_bits).sum();

    Ok(CompressOutcome {
        container,
        stats,
        model,
    })
}

/// Coding-cost budget of a finished model: structure, flag, and index bits,
/// the per-block raw prefix and coder finish, and the information content
/// of every counted symbol at its state's level. Actual output exceeds it
/// only by byte padding and the coder's discretization slack.
pub fn predicted_length(model: &MdlSource, blocks: u32) -> f64 {
    let mut bits = model.natural_len() as f64;
    bits += blocks as f64 * (model.depth as f64 + 2.0);
    for st in &model.states {
        bits += (st.levels as f64).log2();
        if model.quant.scheme == Scheme::TwoLevel {
            bits += 1.0;
        }
        if st.n0 > 0 {
            bits -= st.n0 as f64 * (1.0 - st.level).log2();
        }
        if st.n1 > 0 {
            bits -= st.n1 as f64 * st.level.log2();
        }
    }
    bits
}

/// One state recovered from a model segment.
#[derive(Clone, Debug)]
pub struct DecodedState {
    pub depth: u8,
    pub value: u32,
    pub bin: u32,
    pub levels: u32,
    pub level: f64,
    pub coarse: bool,
}

/// Model fields recovered from a container, enough to rebuild the
/// generator table and report on the states.
#[derive(Clone, Debug)]
pub struct DecodedModel {
    pub depth: u8,
    pub scheme: Scheme,
    pub tau: u64,
    pub states: Vec<DecodedState>,
}

/// Reads a model segment back into its states and generator table.
pub fn decode_model(
    n_bits: u64,
    depth: u8,
    scheme: Scheme,
    tau: u64,
    model: &Bits,
) -> Result<(DecodedModel, GeneratorTable)> {
    let mut r = BitReader::with_len(model.as_bytes(), model.len());
    let leaves = decode_structure(&mut r, depth)?;
    let spec = QuantizerSpec::new(scheme, n_bits.max(1), Some(tau));
    let count = leaves.len() as u64;
    let mut dec = Decoder::new(r)?;
    let mut states = Vec::with_capacity(leaves.len());
    for (d, value) in leaves {
        let coarse = scheme == Scheme::TwoLevel && dec.decode_bit(0.5)? == 1;
        let levels = if coarse {
            spec.coarse_levels()
        } else {
            spec.fine_levels(count)
        };
        let bin = dec.decode_uniform(levels)?;
        let level = quant::level_value(bin, levels);
        states.push(DecodedState {
            depth: d,
            value,
            bin,
            levels,
            level,
            coarse,
        });
    }
    let table = GeneratorTable::from_states(depth, states.iter().map(|s| (s.depth, s.value, s.level)));
    Ok((
        DecodedModel {
            depth,
            scheme,
            tau,
            states,
        },
        table,
    ))
}

fn decode_block_payload(
    plan: &BlockPlan,
    table: &GeneratorTable,
    payload: &Bits,
    b: u32,
) -> Result<Bits> {
    let (start, end) = plan.range(b);
    let m_b = end - start;
    let d = plan.depth as u64;
    if m_b <= d {
        if payload.len() != m_b {
            return Err(Error::Truncated);
        }
        return Ok(payload.clone());
    }
    let mut r = BitReader::with_len(payload.as_bytes(), payload.len());
    let mut out = Bits::with_capacity(m_b);
    let mut c = 0u32;
    for j in 0..d {
        let x = r.read_bit().map_err(|_| Error::Truncated)?;
        out.push(x);
        c |= (x as u32) << j;
    }
    let mut dec = Decoder::new(r)?;
    for _ in d..m_b {
        let x = dec.decode_bit(table.prob_one(c))?;
        out.push(x);
        c = next_context(c, x, plan.depth);
    }
    Ok(out)
}

pub fn decompress(c: &Container) -> Result<Bits> {
    decompress_with(c, true)
}

pub fn decompress_with(c: &Container, parallel: bool) -> Result<Bits> {
    if c.n_bits == 0 {
        if c.payloads.iter().any(|p| !p.is_empty()) {
            return Err(Error::InconsistentOffsets);
        }
        return Ok(Bits::new());
    }
    let plan = BlockPlan::new(c.n_bits, c.block_count(), Some(c.depth))?;
    let (_, table) = decode_model(c.n_bits, c.depth, c.scheme, c.tau, &c.model)?;
    let decode_block = |b: u32| decode_block_payload(&plan, &table, &c.payloads[b as usize], b);
    let parts: Vec<Result<Bits>> = if parallel {
        (0..plan.blocks).into_par_iter().map(decode_block).collect()
    } else {
        (0..plan.blocks).map(decode_block).collect()
    };
    let mut out = Bits::with_capacity(c.n_bits);
    for part in parts {
        out.extend(&part?);
    }
    debug_assert_eq!(out.len(), c.n_bits);
    Ok(out)
}

/// Decodes one block by index, using only the model segment and that
/// block's payload.
pub fn decompress_block(c: &Container, block: u32) -> Result<Bits> {
    if block >= c.block_count() {
        return Err(Error::BlockOutOfRange);
    }
    if c.n_bits == 0 {
        return Ok(Bits::new());
    }
    let plan = BlockPlan::new(c.n_bits, c.block_count(), Some(c.depth))?;
    let (_, table) = decode_model(c.n_bits, c.depth, c.scheme, c.tau, &c.model)?;
    decode_block_payload(&plan, &table, &c.payloads[block as usize], block)
}

/// Random-access decoder over any seekable byte source.
///
/// Opening reads the fixed header, the model segment, and the offsets table
/// once. Each block fetch afterwards seeks to that payload and reads exactly
/// its byte extent, so the cost of pulling one block out of a large file
/// does not depend on the other payloads.
pub struct BlockDecoder<R> {
    src: R,
    header: HeaderInfo,
    plan: BlockPlan,
    model: DecodedModel,
    table: GeneratorTable,
    payload_bits: Vec<u64>,
    payload_start: Vec<u64>,
    bytes_read: u64,
}

impl<R: Read + Seek> BlockDecoder<R> {
    pub fn open(mut src: R) -> Result<Self> {
        let mut bytes_read = 0u64;
        let mut head = [0u8; HEADER_LEN];
        read_fully(&mut src, &mut head, &mut bytes_read)?;
        let header = container::parse_header(&head)?;

        let model_extent = byte_extent(header.model_len_bits as u64);
        let mut model_raw = vec![0u8; model_extent as usize];
        read_fully(&mut src, &mut model_raw, &mut bytes_read)?;
        let model_bits = Bits::from_bytes_truncated(model_raw, header.model_len_bits as u64);

        let mut offsets_raw = vec![0u8; 8 * header.b_blocks as usize];
        read_fully(&mut src, &mut offsets_raw, &mut bytes_read)?;
        let payload_bits: Vec<u64> = offsets_raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut payload_start = Vec::with_capacity(payload_bits.len());
        let mut at = HEADER_LEN as u64 + model_extent + 8 * header.b_blocks as u64;
        for &bits in &payload_bits {
            payload_start.push(at);
            at += byte_extent(bits);
        }

        let (model, table) = if header.n_bits == 0 {
            let empty = DecodedModel {
                depth: header.depth,
                scheme: header.scheme,
                tau: header.tau,
                states: Vec::new(),
            };
            (empty, GeneratorTable::from_states(0, [(0, 0, 0.5)]))
        } else {
            decode_model(
                header.n_bits,
                header.depth,
                header.scheme,
                header.tau,
                &model_bits,
            )?
        };
        let plan = BlockPlan::new(header.n_bits, header.b_blocks, Some(header.depth))?;

        Ok(BlockDecoder {
            src,
            header,
            plan,
            model,
            table,
            payload_bits,
            payload_start,
            bytes_read,
        })
    }

    pub fn header(&self) -> &HeaderInfo {
        &self.header
    }

    pub fn model(&self) -> &DecodedModel {
        &self.model
    }

    pub fn block_count(&self) -> u32 {
        self.header.b_blocks
    }

    /// Bytes pulled from the source so far, front matter included.
    pub fn bytes_read(&self) -> u64 {
        self.bytes_read
    }

    pub fn block(&mut self, b: u32) -> Result<Bits> {
        if b >= self.header.b_blocks {
            return Err(Error::BlockOutOfRange);
        }
        if self.header.n_bits == 0 {
            return Ok(Bits::new());
        }
        let bits = self.payload_bits[b as usize];
        let extent = byte_extent(bits) as usize;
        self.src
            .seek(SeekFrom::Start(self.payload_start[b as usize]))?;
        let mut raw = vec![0u8; extent];
        read_fully(&mut self.src, &mut raw, &mut self.bytes_read)?;
        let payload = Bits::from_bytes_truncated(raw, bits);
        decode_block_payload(&self.plan, &self.table, &payload, b)
    }
}

fn read_fully<R: Read>(src: &mut R, buf: &mut [u8], bytes_read: &mut u64) -> Result<()> {
    src.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated
        } else {
            Error::Io(e)
        }
    })?;
    *bytes_read += buf.len() as u64;
    Ok(())
}
