//! Probability quantizers with arcsine-spaced bins.
//!
//! Bin edges follow `sin^2(pi k / 2K)`, which gives every bin the same mass
//! under the arcsine density `1 / (pi sqrt(t(1-t)))`. The level count grows
//! with the square root of the population the estimate was drawn from, so the
//! quantization error stays in balance with the estimation error.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// How level counts are sized for the states of one model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// One quantizer sized by the full input length.
    Global,
    /// One quantizer sized by the mean state population `N / |S|`.
    Scaled,
    /// Coarse levels for states with population below a threshold, full-size
    /// levels for the rest, selected per state by a one-bit flag.
    TwoLevel,
}

impl Scheme {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Scheme::Global),
            1 => Ok(Scheme::Scaled),
            2 => Ok(Scheme::TwoLevel),
            _ => Err(Error::BadScheme(v)),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Scheme::Global => 0,
            Scheme::Scaled => 1,
            Scheme::TwoLevel => 2,
        }
    }
}

/// Number of quantizer levels for an estimate built from `n` symbols,
/// `ceil(1.772 sqrt(n))`. The coefficient is the square-root sizing
/// constant rounded to three decimals; the published rounding is part of
/// the interface, since the fifth-decimal tail would tip perfect squares
/// like n = 10^6 into the next level count.
pub fn num_levels(n: u64) -> u32 {
    assert!(n >= 1, "population must be positive");
    (1.772 * (n as f64).sqrt()).ceil() as u32
}

/// Lower edge of bin `k`, `sin^2(pi k / 2K)`. Edge `K` is 1.
pub fn bin_edge(k: u32, levels: u32) -> f64 {
    debug_assert!(k <= levels);
    let s = (PI * k as f64 / (2.0 * levels as f64)).sin();
    s * s
}

/// Representation level of bin `k`, `sin^2(pi (2k+1) / 4K)`.
pub fn level_value(k: u32, levels: u32) -> f64 {
    debug_assert!(k < levels);
    let s = (PI * (2 * k + 1) as f64 / (4.0 * levels as f64)).sin();
    s * s
}

/// Maps `theta` in [0,1] to its bin and representation level. Bins are
/// half-open except the last, which also takes `theta = 1`.
pub fn quantize(theta: f64, levels: u32) -> (u32, f64) {
    assert!((0.0..=1.0).contains(&theta), "theta out of range: {theta}");
    assert!(levels >= 1);
    let kf = (2.0 * levels as f64 / PI) * theta.sqrt().asin();
    let mut k = (kf.floor() as i64).clamp(0, levels as i64 - 1) as u32;
    // asin can land a rounding error past a bin edge; settle against the
    // edge values themselves so the half-open intervals are authoritative.
    if k + 1 < levels && theta >= bin_edge(k + 1, levels) {
        k += 1;
    } else if k > 0 && theta < bin_edge(k, levels) {
        k -= 1;
    }
    debug_assert!(theta >= bin_edge(k, levels) || k == 0);
    debug_assert!(theta < bin_edge(k + 1, levels) || k == levels - 1);
    (k, level_value(k, levels))
}

/// Integer `ceil(sqrt(n))`.
pub fn ceil_sqrt(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut s = (n as f64).sqrt().round() as u64;
    while s > 0 && s.checked_mul(s).map_or(true, |sq| sq > n) {
        s -= 1;
    }
    while (s + 1).checked_mul(s + 1).is_some_and(|sq| sq <= n) {
        s += 1;
    }
    if s * s == n {
        s
    } else {
        s + 1
    }
}

/// Sizing rule for the quantizers of one compressed stream. Everything here
/// is derivable from container header fields plus the parsed state count, so
/// the decoder rebuilds the exact same level counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizerSpec {
    pub scheme: Scheme,
    /// Population basis: the input length in bits.
    pub basis_bits: u64,
    /// Two-level population threshold; zero for the other schemes.
    pub tau: u64,
}

impl QuantizerSpec {
    pub fn new(scheme: Scheme, basis_bits: u64, tau: Option<u64>) -> Self {
        let tau = match scheme {
            Scheme::TwoLevel => tau.unwrap_or_else(|| ceil_sqrt(basis_bits)).max(1),
            _ => 0,
        };
        QuantizerSpec {
            scheme,
            basis_bits,
            tau,
        }
    }

    /// Level count shared by every state that is not coarsely quantized.
    pub fn fine_levels(&self, state_count: u64) -> u32 {
        match self.scheme {
            Scheme::Global | Scheme::TwoLevel => num_levels(self.basis_bits),
            Scheme::Scaled => {
                let count = state_count.max(1);
                num_levels(self.basis_bits.div_ceil(count).max(1))
            }
        }
    }

    /// Level count of the coarse quantizer; only meaningful for two-level.
    pub fn coarse_levels(&self) -> u32 {
        num_levels(self.tau.max(1))
    }

    /// Level count for one state, with the flag saying whether the coarse
    /// quantizer was chosen.
    pub fn levels_for(&self, state_count: u64, population: u64) -> (u32, bool) {
        match self.scheme {
            Scheme::TwoLevel if population < self.tau => (self.coarse_levels(), true),
            _ => (self.fine_levels(state_count), false),
        }
    }
}
