//! Synthetic binary tree sources described by plain text files.
//!
//! A source file lists one state per line as `<suffix> <p1>`, where the
//! suffix is written oldest symbol first ("001" matches positions whose three
//! preceding symbols were 0, 0, 1) and `p1` is the probability of emitting a
//! one there. A lone `-` stands for the empty suffix, giving an i.i.d.
//! source. Blank lines and lines starting with `#` are skipped.

use anyhow::{bail, ensure, Context, Result};
use ptpmdl::bitio::Bits;
use ptpmdl::context::{next_context, GeneratorTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// A complete and proper set of suffix states with their emission rates.
#[derive(Clone, Debug)]
pub struct SourceSpec {
    depth: u8,
    states: Vec<(u8, u32, f64)>,
}

impl SourceSpec {
    /// Parses the text form. Rejects malformed lines, probabilities outside
    /// the open interval (0, 1), and state sets that fail to assign exactly
    /// one generating state to every possible past.
    pub fn parse_str(text: &str) -> Result<SourceSpec> {
        let mut states: Vec<(u8, u32, f64)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(suffix), Some(prob), None) = (parts.next(), parts.next(), parts.next())
            else {
                bail!("line {}: expected `<suffix> <p1>`", idx + 1);
            };
            let (depth, value) = parse_suffix(suffix)
                .with_context(|| format!("line {}: bad state {suffix:?}", idx + 1))?;
            let p1: f64 = prob
                .parse()
                .with_context(|| format!("line {}: bad probability {prob:?}", idx + 1))?;
            ensure!(
                p1 > 0.0 && p1 < 1.0,
                "line {}: probability must lie strictly between 0 and 1",
                idx + 1
            );
            states.push((depth, value, p1));
        }
        ensure!(!states.is_empty(), "no states given");
        Self::from_states(states)
    }

    pub fn load(path: &Path) -> Result<SourceSpec> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Validates an explicit state list. Each state is (suffix length, suffix
    /// value) with the oldest suffix symbol at bit 0.
    pub fn from_states(states: Vec<(u8, u32, f64)>) -> Result<SourceSpec> {
        let depth = states.iter().map(|s| s.0).max().unwrap_or(0);
        ensure!(
            depth <= ptpmdl::MAX_DEPTH,
            "suffix length {depth} exceeds the supported maximum {}",
            ptpmdl::MAX_DEPTH
        );
        for &(_, _, p) in &states {
            ensure!(
                p > 0.0 && p < 1.0,
                "probability must lie strictly between 0 and 1"
            );
        }

        // Each state of length L owns the contexts sharing its suffix, a run
        // of 2^(depth-L) consecutive indices. A valid set tiles the whole
        // context range exactly once; any gap, overlap, duplicate, or nested
        // pair of states breaks the tiling.
        let mut ranges: Vec<(u64, u64)> = states
            .iter()
            .map(|&(len, value, _)| {
                let span = 1u64 << (depth - len);
                (value as u64 * span, (value as u64 + 1) * span)
            })
            .collect();
        ranges.sort_unstable();
        let mut expect = 0u64;
        for &(start, end) in &ranges {
            ensure!(
                start == expect,
                "state set does not cover every past exactly once"
            );
            expect = end;
        }
        ensure!(
            expect == 1u64 << depth,
            "state set does not cover every past exactly once"
        );
        Ok(SourceSpec { depth, states })
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn states(&self) -> &[(u8, u32, f64)] {
        &self.states
    }

    /// Draws `n` symbols. The first `depth` symbols are fair coin flips that
    /// only establish a starting context; every later symbol is drawn from
    /// the rate of its generating state. The same seed always yields the
    /// same bits.
    pub fn generate(&self, n: u64, seed: u64) -> Bits {
        let table = GeneratorTable::from_states(self.depth, self.states.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = Bits::with_capacity(n);
        let mut c = 0u32;
        for i in 0..n {
            let x = if i < self.depth as u64 {
                rng.random_range(0u8..2)
            } else {
                u8::from(rng.random::<f64>() < table.prob_one(c))
            };
            bits.push(x);
            c = next_context(c, x, self.depth);
        }
        bits
    }
}

/// Turns a suffix string into (length, value), oldest symbol at bit 0.
fn parse_suffix(s: &str) -> Result<(u8, u32)> {
    if s == "-" {
        return Ok((0, 0));
    }
    ensure!(
        s.len() <= ptpmdl::MAX_DEPTH as usize,
        "suffix longer than {} symbols",
        ptpmdl::MAX_DEPTH
    );
    let mut value = 0u32;
    for (j, ch) in s.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => value |= 1 << j,
            _ => bail!("suffix must consist of 0s and 1s"),
        }
    }
    Ok((s.len() as u8, value))
}

/// Renders (length, value) back into the text form used by source files.
pub fn suffix_string(depth: u8, value: u32) -> String {
    if depth == 0 {
        return "-".into();
    }
    (0..depth)
        .map(|j| if value >> j & 1 == 1 { '1' } else { '0' })
        .collect()
}
