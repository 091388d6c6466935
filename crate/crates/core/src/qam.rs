//! Gray-mapped square QAM with unit average constellation energy.
//!
//! Supported orders are M = 4, 16, 64. Each symbol carries log2(M) bits:
//! the first half selects the in-phase level, the second half the
//! quadrature level, each through an independent per-axis Gray code.
//!
//! Bit-to-level table (per axis, m = log2(M)/2 bits, n = 2^m levels):
//! the bit group `b` selects level index `i` with `gray(i) = b`, and the
//! amplitude is `(n-1) - 2i` before normalization. So the all-zero group
//! maps to the most positive level; e.g. M = 4 maps bits `00` to
//! (+1+j)/sqrt(2) and M = 64 maps `000000` to (7+7j)/sqrt(42).
//!
//! Normalization divides by sqrt(2/3*(M-1)) (sqrt(2), sqrt(10), sqrt(42))
//! so the average energy over all M points is exactly 1.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Supported square-QAM orders.
pub const SUPPORTED_ORDERS: [usize; 3] = [4, 16, 64];

/// Bits per symbol for a supported order, or an error.
pub fn bits_per_symbol(mod_order: usize) -> Result<usize> {
    match mod_order {
        4 => Ok(2),
        16 => Ok(4),
        64 => Ok(6),
        other => Err(Error::UnsupportedModOrder(other)),
    }
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Per-axis amplitude levels in bit-group order: `levels[b]` is the
/// normalized amplitude selected by bit group `b`.
fn axis_levels(mod_order: usize) -> Result<Vec<f64>> {
    let m = bits_per_symbol(mod_order)? / 2;
    let n = 1usize << m;
    let norm = (2.0 / 3.0 * (mod_order as f64 - 1.0)).sqrt();
    let mut levels = vec![0.0; n];
    for (i, level) in (0..n).map(|i| (n - 1) as f64 - 2.0 * i as f64).enumerate() {
        levels[gray(i)] = level / norm;
    }
    Ok(levels)
}

fn bits_to_group(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

fn group_to_bits(group: usize, width: usize, out: &mut Vec<bool>) {
    for shift in (0..width).rev() {
        out.push((group >> shift) & 1 == 1);
    }
}

/// Maps a bit vector to Gray-coded square-QAM points of order `mod_order`.
///
/// The bit vector length must be divisible by log2(M); each chunk of
/// log2(M) bits yields one point, first half I, second half Q.
pub fn map_bits(bits: &[bool], mod_order: usize) -> Result<Vec<Complex64>> {
    let bps = bits_per_symbol(mod_order)?;
    if bits.len() % bps != 0 {
        return Err(Error::BitLength {
            len: bits.len(),
            bits_per_symbol: bps,
        });
    }
    let levels = axis_levels(mod_order)?;
    let half = bps / 2;
    Ok(bits
        .chunks_exact(bps)
        .map(|chunk| {
            let re = levels[bits_to_group(&chunk[..half])];
            let im = levels[bits_to_group(&chunk[half..])];
            Complex64::new(re, im)
        })
        .collect())
}

/// Nearest level index for one axis; ties go to the smaller amplitude.
fn nearest_level(x: f64, levels: &[f64]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    let mut best_amp = f64::INFINITY;
    for (b, &amp) in levels.iter().enumerate() {
        let dist = (x - amp).abs();
        if dist < best_dist || (dist == best_dist && amp < best_amp) {
            best = b;
            best_dist = dist;
            best_amp = amp;
        }
    }
    best
}

/// Hard-decision demapping: nearest constellation point, inverse Gray.
///
/// Distance ties resolve toward the point with smaller real part, then
/// smaller imaginary part. Total on all finite inputs.
pub fn demap_hard(symbols: &[Complex64], mod_order: usize) -> Result<Vec<bool>> {
    let bps = bits_per_symbol(mod_order)?;
    let levels = axis_levels(mod_order)?;
    let half = bps / 2;
    let mut bits = Vec::with_capacity(symbols.len() * bps);
    for s in symbols {
        group_to_bits(nearest_level(s.re, &levels), half, &mut bits);
        group_to_bits(nearest_level(s.im, &levels), half, &mut bits);
    }
    Ok(bits)
}

/// Re-slices symbols onto the constellation grid (nearest point).
pub fn slice_to_constellation(symbols: &[Complex64], mod_order: usize) -> Result<Vec<Complex64>> {
    map_bits(&demap_hard(symbols, mod_order)?, mod_order)
}

/// All M constellation points in bit-pattern order.
pub fn constellation(mod_order: usize) -> Result<Vec<Complex64>> {
    let bps = bits_per_symbol(mod_order)?;
    let mut bits = Vec::with_capacity(mod_order * bps);
    for pattern in 0..mod_order {
        group_to_bits(pattern, bps, &mut bits);
    }
    map_bits(&bits, mod_order)
}
