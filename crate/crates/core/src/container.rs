//! On-disk format.
//!
//! A file is a fixed header, the byte-padded model segment, a table of
//! per-block payload bit lengths, and the byte-aligned payloads. Every
//! payload's byte position follows from the header and the table alone,
//! which is what makes single-block decoding possible without reading the
//! rest of the file.

use crate::bitio::Bits;
use crate::error::{Error, Result};
use crate::quant::Scheme;

pub const MAGIC: [u8; 4] = *b"PTPM";
pub const VERSION: u8 = 1;

/// Fixed header: magic, version, input bit count, block count, depth,
/// scheme, coarse threshold, and model bit length.
pub const HEADER_LEN: usize = 4 + 1 + 8 + 4 + 1 + 1 + 8 + 4;

/// Parsed fixed header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeaderInfo {
    pub n_bits: u64,
    pub b_blocks: u32,
    pub depth: u8,
    pub scheme: Scheme,
    pub tau: u64,
    pub model_len_bits: u32,
}

/// A compressed file held in memory. Bit lengths are exact; the serialized
/// form pads the model and each payload to whole bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Container {
    pub n_bits: u64,
    pub depth: u8,
    pub scheme: Scheme,
    /// Population threshold of the two-level scheme, zero otherwise.
    pub tau: u64,
    pub model: Bits,
    pub payloads: Vec<Bits>,
}

pub fn byte_extent(bits: u64) -> u64 {
    bits.div_ceil(8)
}

impl Container {
    pub fn block_count(&self) -> u32 {
        self.payloads.len() as u32
    }

    pub fn total_payload_bits(&self) -> u64 {
        self.payloads.iter().map(|p| p.len()).sum()
    }

    pub fn serialize(&self) -> Vec<u8> {
        let payload_bytes: u64 = self.payloads.iter().map(|p| byte_extent(p.len())).sum();
        let total = HEADER_LEN as u64
            + byte_extent(self.model.len())
            + 8 * self.payloads.len() as u64
            + payload_bytes;
        let mut out = Vec::with_capacity(total as usize);
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.n_bits.to_le_bytes());
        out.extend_from_slice(&self.block_count().to_le_bytes());
        out.push(self.depth);
        out.push(self.scheme.as_u8());
        out.extend_from_slice(&self.tau.to_le_bytes());
        out.extend_from_slice(&(self.model.len() as u32).to_le_bytes());
        out.extend_from_slice(self.model.as_bytes());
        for p in &self.payloads {
            out.extend_from_slice(&p.len().to_le_bytes());
        }
        for p in &self.payloads {
            out.extend_from_slice(p.as_bytes());
        }
        debug_assert_eq!(out.len() as u64, total);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Container> {
        let header = parse_header(bytes)?;
        let mut pos = HEADER_LEN;

        let model_bytes = byte_extent(header.model_len_bits as u64) as usize;
        let model_raw = take(bytes, &mut pos, model_bytes)?;
        let model = Bits::from_bytes_truncated(model_raw.to_vec(), header.model_len_bits as u64);

        let mut payload_bits = Vec::with_capacity(header.b_blocks as usize);
        for _ in 0..header.b_blocks {
            let raw = take(bytes, &mut pos, 8)?;
            payload_bits.push(u64::from_le_bytes(raw.try_into().unwrap()));
        }

        let mut payloads = Vec::with_capacity(payload_bits.len());
        for &bits in &payload_bits {
            let extent = byte_extent(bits);
            if extent > bytes.len() as u64 {
                return Err(Error::Truncated);
            }
            let raw = take(bytes, &mut pos, extent as usize)?;
            payloads.push(Bits::from_bytes_truncated(raw.to_vec(), bits));
        }
        if pos != bytes.len() {
            return Err(Error::InconsistentOffsets);
        }

        Ok(Container {
            n_bits: header.n_bits,
            depth: header.depth,
            scheme: header.scheme,
            tau: header.tau,
            model,
            payloads,
        })
    }
}

/// Reads and validates the fixed header from the front of `bytes`.
pub fn parse_header(bytes: &[u8]) -> Result<HeaderInfo> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated);
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(Error::BadVersion(bytes[4]));
    }
    let n_bits = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let b_blocks = u32::from_le_bytes(bytes[13..17].try_into().unwrap());
    let depth = bytes[17];
    let scheme = Scheme::from_u8(bytes[18])?;
    let tau = u64::from_le_bytes(bytes[19..27].try_into().unwrap());
    let model_len_bits = u32::from_le_bytes(bytes[27..31].try_into().unwrap());
    if depth > crate::MAX_DEPTH {
        return Err(Error::DepthTooLarge(depth));
    }
    if b_blocks == 0 {
        return Err(Error::BadHeader("container holds no blocks"));
    }
    Ok(HeaderInfo {
        n_bits,
        b_blocks,
        depth,
        scheme,
        tau,
        model_len_bits,
    })
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, len: usize) -> Result<&'a [u8]> {
    let end = pos.checked_add(len).ok_or(Error::Truncated)?;
    if end > bytes.len() {
        return Err(Error::Truncated);
    }
    let slice = &bytes[*pos..end];
    *pos = end;
    Ok(slice)
}
