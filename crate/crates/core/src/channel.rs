//! Fading and noise: per-subcarrier Rayleigh gains, Eb/N0-calibrated AWGN,
//! and a time-domain convolution path used to validate the per-subcarrier
//! model.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::TimeSignal;
use crate::qam;

/// One channel instance: frequency-domain gains at the occupied
/// subcarriers plus the per-subcarrier noise variance. Gains stay fixed
/// for every frame transmitted through the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    pub noise_var: f64,
}

impl ChannelRealization {
    pub fn new(gains: Vec<Complex64>, noise_var: f64) -> Result<Self> {
        if noise_var < 0.0 {
            return Err(Error::NonPositive("noise_var (>= 0)"));
        }
        Ok(Self { gains, noise_var })
    }

    /// Identity channel with the given noise level.
    pub fn flat(n_used: usize, noise_var: f64) -> Self {
        Self {
            gains: vec![Complex64::new(1.0, 0.0); n_used],
            noise_var,
        }
    }
}

/// Time-domain multipath impulse response h_0..h_{L-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<Complex64>,
}

impl ImpulseResponse {
    /// Frequency response at subcarrier index `idx` of an N-point grid:
    /// H = sum_l h_l exp(-j 2 pi l idx / N).
    pub fn frequency_response(&self, idx: i32, n_fft: usize) -> Complex64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(l, &h)| {
                h * Complex64::from_polar(
                    1.0,
                    -std::f64::consts::TAU * l as f64 * idx as f64 / n_fft as f64,
                )
            })
            .sum()
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draws i.i.d. unit-variance circular complex Gaussian gains, one per
/// occupied subcarrier (|h| Rayleigh, E[|h|^2] = 1).
pub fn draw_rayleigh<R: Rng + ?Sized>(n_used: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n_used).map(|_| complex_gaussian(rng, 1.0)).collect()
}

/// Per-subcarrier noise variance hitting a target Eb/N0:
/// noise_var = P / (log2(M) * 10^(ebn0_db/10)), where P is the measured
/// mean |Y_k|^2 at the PA output over used subcarriers (distortion power
/// included, so the reference is total transmitted energy per bit).
pub fn calibrate_noise(ebn0_db: f64, signal_power_per_used_sc: f64, mod_order: usize) -> Result<f64> {
    if signal_power_per_used_sc <= 0.0 {
        return Err(Error::NonPositive("signal power"));
    }
    let bits = qam::bits_per_symbol(mod_order)? as f64;
    Ok(signal_power_per_used_sc / (bits * 10f64.powf(ebn0_db / 10.0)))
}

/// r_k = h_k Y_k + w_k with w_k i.i.d. circular complex Gaussian of the
/// realization's noise variance.
pub fn apply_freq_channel<R: Rng + ?Sized>(
    y: &[Complex64],
    ch: &ChannelRealization,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if y.len() != ch.gains.len() {
        return Err(Error::SizeMismatch {
            what: "frequency-domain channel",
            expected: ch.gains.len(),
            got: y.len(),
        });
    }
    Ok(y.iter()
        .zip(&ch.gains)
        .map(|(&yk, &hk)| hk * yk + complex_gaussian(rng, ch.noise_var))
        .collect())
}

/// Noiseless linear convolution with `h`, aligned so the cyclic prefix
/// absorbs the inter-symbol spill: sample n of the output only depends on
/// inputs n-l of the same frame, and every body sample sees a full tap
/// history once L-1 <= N_CP.
pub fn apply_time_channel(y: &TimeSignal, h: &ImpulseResponse) -> Result<TimeSignal> {
    if h.taps.len() > y.cp_len + 1 {
        return Err(Error::CpTooShortForTaps {
            taps: h.taps.len(),
            n_cp: y.cp_len,
        });
    }
    let mut out = vec![Complex64::ZERO; y.samples.len()];
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for (l, &tap) in h.taps.iter().enumerate() {
            if n >= l {
                acc += tap * y.samples[n - l];
            }
        }
        *o = acc;
    }
    Ok(TimeSignal::new(out, y.cp_len))
}
