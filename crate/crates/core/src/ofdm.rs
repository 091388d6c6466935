//! OFDM (de)modulation: QAM symbol frames, the unitary IFFT/FFT pair over
//! the occupied subcarriers, cyclic prefix handling, and power measurement.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qam;

/// Static OFDM numerology: FFT size, cyclic prefix, occupied subcarriers
/// and constellation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// FFT size N.
    pub n_fft: usize,
    /// Cyclic prefix length in samples.
    pub n_cp: usize,
    /// Occupied subcarrier indices, unique, ascending, in [-N/2, N/2-1].
    pub used_indices: Vec<i32>,
    /// Constellation order M (4, 16 or 64).
    pub mod_order: usize,
}

impl OfdmConfig {
    pub fn new(n_fft: usize, n_cp: usize, used_indices: Vec<i32>, mod_order: usize) -> Result<Self> {
        let cfg = Self {
            n_fft,
            n_cp,
            used_indices,
            mod_order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fft == 0 {
            return Err(Error::InvalidConfig("n_fft must be positive".into()));
        }
        if self.n_cp >= self.n_fft {
            return Err(Error::InvalidConfig(format!(
                "n_cp {} must be smaller than n_fft {}",
                self.n_cp, self.n_fft
            )));
        }
        if self.used_indices.is_empty() {
            return Err(Error::InvalidConfig("no occupied subcarriers".into()));
        }
        if self.used_indices.len() > self.n_fft {
            return Err(Error::InvalidConfig(format!(
                "{} occupied subcarriers exceed n_fft {}",
                self.used_indices.len(),
                self.n_fft
            )));
        }
        let half = self.n_fft as i32 / 2;
        for w in self.used_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidConfig(
                    "used_indices must be strictly ascending".into(),
                ));
            }
        }
        for &idx in &self.used_indices {
            if idx < -half || idx >= half {
                return Err(Error::InvalidConfig(format!(
                    "subcarrier index {idx} outside [-N/2, N/2-1]"
                )));
            }
        }
        qam::bits_per_symbol(self.mod_order)?;
        Ok(())
    }

    /// Number of occupied subcarriers N_U.
    pub fn n_used(&self) -> usize {
        self.used_indices.len()
    }

    /// Bits carried by one OFDM symbol.
    pub fn bits_per_frame(&self) -> usize {
        self.n_used() * qam::bits_per_symbol(self.mod_order).expect("validated order")
    }

    /// Analytic mean power of a body sample for unit-energy symbols,
    /// N_U / N. The empirical counterpart is [`measure_power`].
    pub fn nominal_body_power(&self) -> f64 {
        self.n_used() as f64 / self.n_fft as f64
    }

    /// FFT bin for an occupied subcarrier index (negative indices wrap).
    fn bin(&self, idx: i32) -> usize {
        idx.rem_euclid(self.n_fft as i32) as usize
    }
}

/// One OFDM symbol worth of QAM data plus the bits behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    /// Unit-average-energy constellation points, one per occupied subcarrier.
    pub data: Vec<Complex64>,
    /// Backing bits, length N_U * log2(M).
    pub bits: Vec<bool>,
}

impl SymbolFrame {
    /// Maps bits onto one frame; the bit count must match the config exactly.
    pub fn from_bits(bits: Vec<bool>, cfg: &OfdmConfig) -> Result<Self> {
        if bits.len() != cfg.bits_per_frame() {
            return Err(Error::SizeMismatch {
                what: "frame bits",
                expected: cfg.bits_per_frame(),
                got: bits.len(),
            });
        }
        let data = qam::map_bits(&bits, cfg.mod_order)?;
        Ok(Self { data, bits })
    }

    /// Draws a uniformly random frame from `rng`.
    pub fn random<R: Rng + ?Sized>(cfg: &OfdmConfig, rng: &mut R) -> Self {
        let bits: Vec<bool> = (0..cfg.bits_per_frame()).map(|_| rng.random()).collect();
        Self::from_bits(bits, cfg).expect("length matches by construction")
    }
}

/// Complex baseband samples for one OFDM symbol: `cp_len` prefix samples
/// followed by the N-sample body.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
    pub cp_len: usize,
}

impl TimeSignal {
    pub fn new(samples: Vec<Complex64>, cp_len: usize) -> Self {
        Self { samples, cp_len }
    }

    /// Samples past the cyclic prefix.
    pub fn body(&self) -> &[Complex64] {
        &self.samples[self.cp_len.min(self.samples.len())..]
    }

    /// Applies a per-sample map (PA, scaling) preserving framing.
    pub fn map_samples(&self, f: impl Fn(Complex64) -> Complex64) -> TimeSignal {
        TimeSignal {
            samples: self.samples.iter().map(|&s| f(s)).collect(),
            cp_len: self.cp_len,
        }
    }
}

/// Mean power of the body samples (cyclic prefix excluded: it duplicates
/// body statistics, so including it would only double-count).
pub fn measure_power(signal: &TimeSignal) -> Result<f64> {
    let body = signal.body();
    if body.is_empty() {
        return Err(Error::EmptySignal);
    }
    Ok(body.iter().map(|s| s.norm_sqr()).sum::<f64>() / body.len() as f64)
}

/// OFDM modulator/demodulator with cached FFT plans for one config.
///
/// All methods are pure with respect to observable state; the engine is
/// `Send + Sync` and can be shared across worker threads.
pub struct Ofdm {
    cfg: OfdmConfig,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    bins: Vec<usize>,
}

impl Ofdm {
    pub fn new(cfg: OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(cfg.n_fft);
        let inv = planner.plan_fft_inverse(cfg.n_fft);
        let bins = cfg.used_indices.iter().map(|&i| cfg.bin(i)).collect();
        Ok(Self {
            cfg,
            fwd,
            inv,
            bins,
        })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    /// Modulates one frame: x_n = (1/sqrt(N)) sum_k d_k exp(j 2 pi n I_k / N)
    /// for n in {-N_CP, ..., N-1}, returned as cp_len + N samples. Unused
    /// subcarriers carry zero.
    pub fn modulate(&self, frame: &SymbolFrame) -> Result<TimeSignal> {
        self.modulate_symbols(&frame.data)
    }

    /// [`Ofdm::modulate`] on raw constellation points.
    pub fn modulate_symbols(&self, data: &[Complex64]) -> Result<TimeSignal> {
        let n = self.cfg.n_fft;
        if data.len() != self.bins.len() {
            return Err(Error::SizeMismatch {
                what: "frame symbols",
                expected: self.bins.len(),
                got: data.len(),
            });
        }
        let mut body = vec![Complex64::ZERO; n];
        for (&bin, &d) in self.bins.iter().zip(data) {
            body[bin] = d;
        }
        self.inv.process(&mut body);
        let scale = 1.0 / (n as f64).sqrt();
        for s in &mut body {
            *s *= scale;
        }
        let mut samples = Vec::with_capacity(self.cfg.n_cp + n);
        samples.extend_from_slice(&body[n - self.cfg.n_cp..]);
        samples.extend_from_slice(&body);
        Ok(TimeSignal::new(samples, self.cfg.n_cp))
    }

    /// Demodulates: discards the prefix, takes the unitary FFT of the next
    /// N samples and returns the values at the occupied subcarriers only.
    pub fn demodulate(&self, signal: &TimeSignal) -> Result<Vec<Complex64>> {
        let n = self.cfg.n_fft;
        let body = signal.body();
        if body.len() < n {
            return Err(Error::SignalTooShort {
                need: n,
                got: body.len(),
            });
        }
        let mut freq = body[..n].to_vec();
        self.fwd.process(&mut freq);
        let scale = 1.0 / (n as f64).sqrt();
        Ok(self.bins.iter().map(|&b| freq[b] * scale).collect())
    }
}
