//! Memoryless power-amplifier models, input back-off control and the
//! Bussgang decomposition of the amplified signal.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::TimeSignal;

/// Rapp model parameters: y = Gx / (1 + |Gx|^(2p) / P_max^p)^(1/(2p)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RappParams {
    /// Linear gain G.
    pub gain: f64,
    /// Saturation power P_max.
    pub p_max: f64,
    /// Smoothness factor p; large p approaches a soft limiter.
    pub smoothness: f64,
}

impl RappParams {
    pub fn validate(&self) -> Result<()> {
        if self.gain <= 0.0 {
            return Err(Error::NonPositive("Rapp gain"));
        }
        if self.p_max <= 0.0 {
            return Err(Error::NonPositive("Rapp p_max"));
        }
        if self.smoothness < 0.5 {
            return Err(Error::NonPositive("Rapp smoothness (>= 0.5)"));
        }
        Ok(())
    }
}

/// Odd-order memoryless polynomial: y = sum_q a_q x |x|^(2(q-1)).
/// Entry q (0-based) carries monomial order 2q+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialParams {
    pub coeffs: Vec<Complex64>,
}

/// A memoryless PA transfer function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PaModel {
    /// Distortion-free gain stage.
    Linear { gain: f64 },
    Rapp(RappParams),
    SoftLimiter { gain: f64, p_max: f64 },
    Polynomial(PolynomialParams),
}

impl PaModel {
    pub fn rapp(gain: f64, p_max: f64, smoothness: f64) -> Self {
        PaModel::Rapp(RappParams {
            gain,
            p_max,
            smoothness,
        })
    }

    /// Applies the transfer function to one sample.
    pub fn amplify(&self, x: Complex64) -> Complex64 {
        match self {
            PaModel::Linear { gain } => x * *gain,
            PaModel::Rapp(p) => rapp_amplify(x, p),
            PaModel::SoftLimiter { gain, p_max } => soft_limit(x, *gain, *p_max),
            PaModel::Polynomial(p) => poly_amplify(x, p),
        }
    }

    /// Saturation power, when the model has one (IBO is undefined otherwise).
    pub fn saturation_power(&self) -> Option<f64> {
        match self {
            PaModel::Rapp(p) => Some(p.p_max),
            PaModel::SoftLimiter { p_max, .. } => Some(*p_max),
            PaModel::Linear { .. } | PaModel::Polynomial(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PaModel::Linear { gain } if *gain <= 0.0 => Err(Error::NonPositive("linear gain")),
            PaModel::Rapp(p) => p.validate(),
            PaModel::SoftLimiter { gain, p_max } => {
                if *gain <= 0.0 {
                    Err(Error::NonPositive("soft limiter gain"))
                } else if *p_max <= 0.0 {
                    Err(Error::NonPositive("soft limiter p_max"))
                } else {
                    Ok(())
                }
            }
            PaModel::Polynomial(p) if p.coeffs.is_empty() => {
                Err(Error::NonPositive("polynomial coefficient count"))
            }
            _ => Ok(()),
        }
    }
}

/// Rapp transfer function. The phase of `x` is preserved exactly; the
/// envelope is computed in the log domain so extreme smoothness values
/// (p in the hundreds, soft-limiter proxies) neither overflow nor
/// underflow.
pub fn rapp_amplify(x: Complex64, params: &RappParams) -> Complex64 {
    let gx = x * params.gain;
    let a2 = gx.norm_sqr();
    if a2 == 0.0 {
        return Complex64::ZERO;
    }
    let p = params.smoothness;
    // t = (|Gx|^2 / P_max)^p, denominator = (1 + t)^(1/(2p)); work with
    // ln t to keep t representable for any p.
    let ln_t = p * (a2 / params.p_max).ln();
    let ln_denom = if ln_t > 0.0 {
        (ln_t + (-ln_t).exp().ln_1p()) / (2.0 * p)
    } else {
        ln_t.exp().ln_1p() / (2.0 * p)
    };
    gx * (-ln_denom).exp()
}

/// Ideal clipper: y = Gx while |Gx|^2 <= P_max, else scaled to the
/// saturation circle.
pub fn soft_limit(x: Complex64, gain: f64, p_max: f64) -> Complex64 {
    let gx = x * gain;
    let pw = gx.norm_sqr();
    if pw <= p_max {
        gx
    } else {
        gx * (p_max / pw).sqrt()
    }
}

/// Odd-order polynomial transfer, Horner form in |x|^2.
pub fn poly_amplify(x: Complex64, params: &PolynomialParams) -> Complex64 {
    let s = x.norm_sqr();
    let mut acc = Complex64::ZERO;
    for &a in params.coeffs.iter().rev() {
        acc = a + acc * s;
    }
    x * acc
}

/// Amplitude scale s that places the PA at `ibo_db` of input back-off:
/// gamma = P_max / (s^2 sigma2) = 10^(ibo_db/10), so s = sqrt(P_max /
/// (gamma sigma2)). PA parameters stay fixed; only the drive changes.
pub fn gain_for_ibo(ibo_db: f64, p_max: f64, sigma2: f64) -> Result<f64> {
    if p_max <= 0.0 {
        return Err(Error::NonPositive("p_max"));
    }
    if sigma2 <= 0.0 {
        return Err(Error::NonPositive("sigma2"));
    }
    let gamma = 10f64.powf(ibo_db / 10.0);
    Ok((p_max / (gamma * sigma2)).sqrt())
}

/// A PA driven through a fixed input scale; the composite transfer
/// y = pa(scale * x) is what the transmit chain applies to unit-power
/// OFDM signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPa {
    pub model: PaModel,
    pub input_scale: f64,
}

impl ScaledPa {
    /// Scale chosen so the PA sees `ibo_db` of back-off at input power
    /// `sigma2`. Models without a saturation power get scale 1.
    pub fn at_ibo(model: PaModel, ibo_db: f64, sigma2: f64) -> Result<Self> {
        let input_scale = match model.saturation_power() {
            Some(p_max) => gain_for_ibo(ibo_db, p_max, sigma2)?,
            None => 1.0,
        };
        Ok(Self { model, input_scale })
    }

    pub fn amplify(&self, x: Complex64) -> Complex64 {
        self.model.amplify(x * self.input_scale)
    }

    pub fn amplify_signal(&self, x: &TimeSignal) -> TimeSignal {
        x.map_samples(|s| self.amplify(s))
    }
}

/// Bussgang linear gain of a nonlinearity at a given drive level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BussgangGain {
    /// alpha = E[y x*] / E[|x|^2].
    pub alpha: Complex64,
    /// Input power the estimate was taken at.
    pub input_power: f64,
    /// Standard error of the estimate.
    pub std_error: f64,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn alpha_from_pairs(pairs: impl Iterator<Item = (Complex64, Complex64)>, sigma2: f64) -> BussgangGain {
    let mut num = Complex64::ZERO;
    let mut den = 0.0;
    let mut pts: Vec<(Complex64, Complex64)> = Vec::new();
    for (x, y) in pairs {
        num += y * x.conj();
        den += x.norm_sqr();
        pts.push((x, y));
    }
    let alpha = num / den;
    // Residual-weighted error of the ratio estimator.
    let mut resid = 0.0;
    for (x, y) in &pts {
        resid += (y - alpha * x).norm_sqr() * x.norm_sqr();
    }
    BussgangGain {
        alpha,
        input_power: sigma2,
        std_error: resid.sqrt() / den,
    }
}

/// Estimates the Bussgang gain alpha = E[y x*]/E[|x|^2] over `n_samples`
/// circular complex Gaussian inputs of variance `sigma2` (the Gaussian
/// stand-in for a many-subcarrier OFDM signal). Deterministic per seed.
pub fn estimate_alpha(model: &PaModel, sigma2: f64, n_samples: usize, seed: u64) -> Result<BussgangGain> {
    const MIN_SAMPLES: usize = 10_000;
    if sigma2 <= 0.0 {
        return Err(Error::NonPositive("sigma2"));
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::DegenerateSampleCount {
            min: MIN_SAMPLES,
            got: n_samples,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(alpha_from_pairs(
        (0..n_samples).map(|_| {
            let x = complex_gaussian(&mut rng, sigma2);
            (x, model.amplify(x))
        }),
        sigma2,
    ))
}

/// Frame-based variant of [`estimate_alpha`] for validating the Gaussian
/// assumption: the ratio is taken over the body samples of actual OFDM
/// frames pushed through `pa`.
pub fn estimate_alpha_from_frames(
    pa: &ScaledPa,
    ofdm: &crate::ofdm::Ofdm,
    n_frames: usize,
    seed: u64,
) -> Result<BussgangGain> {
    if n_frames == 0 {
        return Err(Error::DegenerateSampleCount { min: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for _ in 0..n_frames {
        let frame = crate::ofdm::SymbolFrame::random(ofdm.config(), &mut rng);
        let x = ofdm.modulate(&frame)?;
        let y = pa.amplify_signal(&x);
        for (&xs, &ys) in x.body().iter().zip(y.body()) {
            pairs.push((xs, ys));
        }
    }
    let sigma2 = ofdm.config().nominal_body_power() * pa.input_scale * pa.input_scale;
    Ok(alpha_from_pairs(pairs.into_iter(), sigma2))
}

/// Uncorrelated distortion component q_n = y_n - alpha x_n.
pub fn bussgang_residual(x: &TimeSignal, y: &TimeSignal, alpha: Complex64) -> Result<TimeSignal> {
    if x.samples.len() != y.samples.len() {
        return Err(Error::SizeMismatch {
            what: "bussgang residual",
            expected: x.samples.len(),
            got: y.samples.len(),
        });
    }
    Ok(TimeSignal::new(
        x.samples
            .iter()
            .zip(&y.samples)
            .map(|(&xs, &ys)| ys - alpha * xs)
            .collect(),
        x.cp_len,
    ))
}
