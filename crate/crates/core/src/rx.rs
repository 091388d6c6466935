//! Detection schemes: zero-forcing, iterative clipping-noise cancellation,
//! and the learned higher-order combining receivers (full 3rd-order,
//! reduced IMD3/IMD5, and the channel-independent PA-only variant applied
//! after equalization).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::imd::{build_features, FullThirdOrderTermSet, ImdTermSet, Terms};
use crate::lstsq::{column_scale, lstsq, DesignMatrix};
use crate::ofdm::{Ofdm, SymbolFrame};
use crate::pa::ScaledPa;
use crate::qam;

/// Channel gains with magnitude below this are treated as unusable for
/// equalization: the affected subcarrier is decided on the unscaled
/// received value and the event is counted. Exact zeros have measure
/// zero under Rayleigh fading but numerically tiny gains do occur.
pub const ZERO_GAIN_EPS: f64 = 1e-6;

/// What data a combiner was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Trained on symbols received through channel and noise at the
    /// operating point; valid only for that (channel, SNR, IBO).
    TrainedWithChannel,
    /// Trained on noiseless, channel-free PA output; channel independent
    /// and cacheable per (PA, IBO, numerology).
    TrainedPaOnly,
}

/// Term-set layout a coefficient vector is aligned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermKind {
    Imd3,
    Imd5,
    Full3,
}

/// Per-target term sets for every occupied subcarrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermBank {
    Reduced(Vec<ImdTermSet>),
    Full3(Vec<FullThirdOrderTermSet>),
}

impl TermBank {
    /// Linear + IMD3 terms for every subcarrier.
    pub fn third_order(used_indices: &[i32]) -> Result<Self> {
        Ok(TermBank::Reduced(
            (0..used_indices.len())
                .map(|k| ImdTermSet::third_order(used_indices, k))
                .collect::<Result<_>>()?,
        ))
    }

    /// Linear + IMD3 + IMD5 terms for every subcarrier.
    pub fn fifth_order(used_indices: &[i32]) -> Result<Self> {
        Ok(TermBank::Reduced(
            (0..used_indices.len())
                .map(|k| ImdTermSet::fifth_order(used_indices, k))
                .collect::<Result<_>>()?,
        ))
    }

    /// All nine unconstrained 3rd-order families for every subcarrier.
    pub fn full_third_order(used_indices: &[i32]) -> Result<Self> {
        Ok(TermBank::Full3(
            (0..used_indices.len())
                .map(|k| crate::imd::enum_full3(used_indices, k))
                .collect::<Result<_>>()?,
        ))
    }

    pub fn kind(&self) -> TermKind {
        match self {
            TermBank::Reduced(sets) => {
                if sets.iter().any(|s| !s.imd5.is_empty()) {
                    TermKind::Imd5
                } else {
                    TermKind::Imd3
                }
            }
            TermBank::Full3(_) => TermKind::Full3,
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        match self {
            TermBank::Reduced(s) => s.len(),
            TermBank::Full3(s) => s.len(),
        }
    }

    pub fn terms_for(&self, k: usize) -> Terms<'_> {
        match self {
            TermBank::Reduced(s) => Terms::Reduced(&s[k]),
            TermBank::Full3(s) => Terms::Full3(&s[k]),
        }
    }

    pub fn len_of(&self, k: usize) -> usize {
        self.terms_for(k).len()
    }

    pub fn max_terms(&self) -> usize {
        (0..self.n_subcarriers())
            .map(|k| self.len_of(k))
            .max()
            .unwrap_or(0)
    }
}

/// Where and how a combiner was trained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub ibo_db: Option<f64>,
    pub ebn0_db: Option<f64>,
    pub channel_id: Option<u64>,
    pub n_frames: usize,
    /// In-sample mean squared symbol error per subcarrier.
    pub in_sample_mse: Vec<f64>,
    /// Subcarriers whose solve needed the documented ridge fallback.
    pub ridge_fallback: Vec<usize>,
}

/// Learned combining coefficients, aligned per subcarrier with a
/// [`TermBank`] of the recorded kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerCoefficients {
    pub provenance: Provenance,
    pub kind: TermKind,
    pub per_subcarrier: Vec<Vec<Complex64>>,
    pub meta: TrainingMeta,
}

/// Coefficients serialized together with the term sets they are aligned
/// to, so the pair cannot drift apart in caches or reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinerBundle {
    pub terms: TermBank,
    pub coeffs: CombinerCoefficients,
}

/// Estimated symbols and hard decisions for a batch of frames.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    /// d-hat per frame, N_U entries each.
    pub symbols: Vec<Vec<Complex64>>,
    /// Hard bits, frame-major, N_U * log2(M) per frame.
    pub bits: Vec<bool>,
    /// |d-hat - d|^2 summed per frame; filled by [`Self::score_against`].
    pub per_frame_sq_err: Vec<f64>,
    /// Subcarriers of this batch's channel that fell below
    /// [`ZERO_GAIN_EPS`] (counted once per batch, not per frame).
    pub zero_gain_events: u64,
}

impl DetectionResult {
    fn from_symbols(symbols: Vec<Vec<Complex64>>, mod_order: usize, zero_gain: u64) -> Result<Self> {
        let mut bits = Vec::with_capacity(
            symbols.len() * symbols.first().map_or(0, |s| s.len()) * qam::bits_per_symbol(mod_order)?,
        );
        for frame in &symbols {
            bits.extend(qam::demap_hard(frame, mod_order)?);
        }
        Ok(Self {
            symbols,
            bits,
            per_frame_sq_err: Vec::new(),
            zero_gain_events: zero_gain,
        })
    }

    /// Fills per-frame squared errors against the transmitted symbols.
    pub fn score_against(&mut self, sent: &[Vec<Complex64>]) -> Result<()> {
        if sent.len() != self.symbols.len() {
            return Err(Error::SizeMismatch {
                what: "detection truth frames",
                expected: self.symbols.len(),
                got: sent.len(),
            });
        }
        self.per_frame_sq_err = self
            .symbols
            .iter()
            .zip(sent)
            .map(|(est, tru)| {
                est.iter()
                    .zip(tru)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
            })
            .collect();
        Ok(())
    }

    /// Mean squared symbol error over all frames and subcarriers.
    pub fn mean_sq_err(&self) -> f64 {
        let n_sym: usize = self.symbols.iter().map(|f| f.len()).sum();
        if n_sym == 0 {
            return 0.0;
        }
        self.per_frame_sq_err.iter().sum::<f64>() / n_sym as f64
    }

    /// (bit errors, total bits) against the transmitted bit stream.
    pub fn count_bit_errors(&self, sent_bits: &[bool]) -> Result<(u64, u64)> {
        if sent_bits.len() != self.bits.len() {
            return Err(Error::SizeMismatch {
                what: "detection truth bits",
                expected: self.bits.len(),
                got: sent_bits.len(),
            });
        }
        let errors = self
            .bits
            .iter()
            .zip(sent_bits)
            .filter(|(a, b)| a != b)
            .count() as u64;
        Ok((errors, self.bits.len() as u64))
    }
}

fn count_zero_gains(ch: &ChannelRealization) -> u64 {
    ch.gains
        .iter()
        .filter(|h| h.norm() <= ZERO_GAIN_EPS)
        .count() as u64
}

/// Zero-forcing estimate d-hat = r / (h alpha). Subcarriers with
/// unusable gain are decided on the raw received value instead.
pub fn zf_detect(
    received: &[Vec<Complex64>],
    ch: &ChannelRealization,
    alpha: Complex64,
    mod_order: usize,
) -> Result<DetectionResult> {
    if alpha.norm() == 0.0 {
        return Err(Error::NonPositive("alpha"));
    }
    let symbols = received
        .iter()
        .map(|frame| {
            if frame.len() != ch.gains.len() {
                return Err(Error::SizeMismatch {
                    what: "zf frame",
                    expected: ch.gains.len(),
                    got: frame.len(),
                });
            }
            Ok(frame
                .iter()
                .zip(&ch.gains)
                .map(|(&r, &h)| {
                    if h.norm() <= ZERO_GAIN_EPS {
                        r
                    } else {
                        r / (h * alpha)
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    DetectionResult::from_symbols(symbols, mod_order, count_zero_gains(ch))
}

/// Decision-aided clipping-noise cancellation.
///
/// Iteration 0 is the ZF estimate. Each pass re-slices the current
/// estimate to the constellation, replays the hard decisions through the
/// transmit chain's PA twin, subtracts the reconstructed distortion from
/// the equalized observation and rescales:
/// d_{i+1} = (r/h - (F(PA(x-hat)) - alpha s-hat)) / alpha.
/// The Bussgang gain alpha stays fixed across iterations.
pub fn cnc_detect(
    received: &[Vec<Complex64>],
    ch: &ChannelRealization,
    pa: &ScaledPa,
    alpha: Complex64,
    ofdm: &Ofdm,
    iterations: usize,
) -> Result<DetectionResult> {
    if alpha.norm() == 0.0 {
        return Err(Error::NonPositive("alpha"));
    }
    let mod_order = ofdm.config().mod_order;
    let n_used = ch.gains.len();
    let usable: Vec<bool> = ch.gains.iter().map(|h| h.norm() > ZERO_GAIN_EPS).collect();

    let mut symbols = Vec::with_capacity(received.len());
    for frame in received {
        if frame.len() != n_used {
            return Err(Error::SizeMismatch {
                what: "cnc frame",
                expected: n_used,
                got: frame.len(),
            });
        }
        // Iteration 0 is exactly the ZF expression (bit-identical);
        // updates subtract the rescaled distortion estimate from it.
        let zf0: Vec<Complex64> = frame
            .iter()
            .zip(&ch.gains)
            .zip(&usable)
            .map(|((&r, &h), &ok)| if ok { r / (h * alpha) } else { r })
            .collect();
        let mut est = zf0.clone();
        for _ in 0..iterations {
            let sliced = qam::slice_to_constellation(&est, mod_order)?;
            let regen = ofdm.demodulate(&pa.amplify_signal(&ofdm.modulate_symbols(&sliced)?))?;
            for k in 0..n_used {
                if usable[k] {
                    let distortion = regen[k] - alpha * sliced[k];
                    est[k] = zf0[k] - distortion / alpha;
                }
            }
        }
        symbols.push(est);
    }
    DetectionResult::from_symbols(symbols, mod_order, count_zero_gains(ch))
}

/// Extra context recorded into [`TrainingMeta`].
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainContext {
    pub ibo_db: Option<f64>,
    pub ebn0_db: Option<f64>,
    pub channel_id: Option<u64>,
}

fn train_combiner(
    received: &[Vec<Complex64>],
    sent: &[Vec<Complex64>],
    bank: &TermBank,
    ridge: f64,
    provenance: Provenance,
    ctx: TrainContext,
) -> Result<CombinerCoefficients> {
    let n_frames = received.len();
    if sent.len() != n_frames {
        return Err(Error::SizeMismatch {
            what: "training pairs",
            expected: n_frames,
            got: sent.len(),
        });
    }
    let n_used = bank.n_subcarriers();
    // The regression only averages distortion and noise properly when the
    // system is strongly overdetermined.
    let need = 10 * bank.max_terms();
    if n_frames < need {
        return Err(Error::Underdetermined {
            rows: n_frames,
            cols: need,
        });
    }

    let per_k: Vec<(Vec<Complex64>, f64, bool)> = (0..n_used)
        .into_par_iter()
        .map(|k| -> Result<(Vec<Complex64>, f64, bool)> {
            let terms = bank.terms_for(k);
            let n_terms = terms.len();
            let mut a = DesignMatrix::zeros(n_frames, n_terms);
            let mut row = Vec::with_capacity(n_terms);
            for (f, frame) in received.iter().enumerate() {
                build_features(frame, &terms, &mut row)?;
                a.set_row(f, &row)?;
            }
            let b: Vec<Complex64> = sent
                .iter()
                .map(|frame| {
                    frame.get(k).copied().ok_or(Error::SizeMismatch {
                        what: "sent frame",
                        expected: k + 1,
                        got: frame.len(),
                    })
                })
                .collect::<Result<_>>()?;

            let scaled = column_scale(&a);
            let solution = match lstsq(&scaled.matrix, &b, ridge) {
                Ok(s) => Ok((s, false)),
                Err(Error::RankDeficient { .. }) if ridge == 0.0 => {
                    // Equilibrated columns have unit RMS, so the mean
                    // squared column norm is the row count.
                    let fallback = 1e-8 * n_frames as f64;
                    lstsq(&scaled.matrix, &b, fallback).map(|s| (s, true))
                }
                Err(e) => Err(e),
            };
            let (solution, fell_back) = solution.map_err(|e| Error::Training {
                subcarrier: k,
                source: Box::new(e),
            })?;
            let coeffs = scaled.unscale_coeffs(&solution.coeffs);
            let mse = solution.residual_norm.powi(2) / n_frames as f64;
            Ok((coeffs, mse, fell_back))
        })
        .collect::<Result<_>>()?;

    let mut meta = TrainingMeta {
        ibo_db: ctx.ibo_db,
        ebn0_db: ctx.ebn0_db,
        channel_id: ctx.channel_id,
        n_frames,
        in_sample_mse: Vec::with_capacity(n_used),
        ridge_fallback: Vec::new(),
    };
    let mut per_subcarrier = Vec::with_capacity(n_used);
    for (k, (coeffs, mse, fell_back)) in per_k.into_iter().enumerate() {
        per_subcarrier.push(coeffs);
        meta.in_sample_mse.push(mse);
        if fell_back {
            meta.ridge_fallback.push(k);
        }
    }
    Ok(CombinerCoefficients {
        provenance,
        kind: bank.kind(),
        per_subcarrier,
        meta,
    })
}

/// Learns combining coefficients from symbols received through the
/// operating channel and noise: per subcarrier, the features of every
/// received frame form one design-matrix row and the transmitted symbol
/// the target; the minimum-MSE coefficients come from the least-squares
/// solve. Valid for the channel instance and SNR they were trained at.
///
/// `ridge` applies to the RMS-equilibrated design matrix; 0 requests the
/// plain pseudoinverse solution with an automatic 1e-8-scale fallback if
/// rank deficiency is reported (recorded in the metadata).
pub fn hoc_train(
    received: &[Vec<Complex64>],
    sent: &[Vec<Complex64>],
    bank: &TermBank,
    ridge: f64,
    ctx: TrainContext,
) -> Result<CombinerCoefficients> {
    train_combiner(received, sent, bank, ridge, Provenance::TrainedWithChannel, ctx)
}

fn combine(
    received: &[Vec<Complex64>],
    coeffs: &CombinerCoefficients,
    bank: &TermBank,
) -> Result<Vec<Vec<Complex64>>> {
    let n_used = bank.n_subcarriers();
    for (k, c) in coeffs.per_subcarrier.iter().enumerate() {
        if c.len() != bank.len_of(k) {
            return Err(Error::TermMisalignment {
                subcarrier: k,
                coeffs: c.len(),
                terms: bank.len_of(k),
            });
        }
    }
    if coeffs.kind != bank.kind() || coeffs.per_subcarrier.len() != n_used {
        return Err(Error::TermMisalignment {
            subcarrier: 0,
            coeffs: coeffs.per_subcarrier.len(),
            terms: n_used,
        });
    }
    let mut out = Vec::with_capacity(received.len());
    let mut feats = Vec::new();
    for frame in received {
        let mut est = Vec::with_capacity(n_used);
        for k in 0..n_used {
            build_features(frame, &bank.terms_for(k), &mut feats)?;
            let d: Complex64 = feats
                .iter()
                .zip(&coeffs.per_subcarrier[k])
                .map(|(f, c)| f * c)
                .sum();
            est.push(d);
        }
        out.push(est);
    }
    Ok(out)
}

/// Applies channel-trained combining coefficients directly to received
/// symbols: d-hat_k = <coeffs_k, features_k(r)>.
pub fn hoc_detect(
    received: &[Vec<Complex64>],
    coeffs: &CombinerCoefficients,
    bank: &TermBank,
    mod_order: usize,
) -> Result<DetectionResult> {
    if coeffs.provenance != Provenance::TrainedWithChannel {
        return Err(Error::ProvenanceMismatch {
            wanted: Provenance::TrainedWithChannel,
            found: coeffs.provenance,
        });
    }
    DetectionResult::from_symbols(combine(received, coeffs, bank)?, mod_order, 0)
}

/// Trains combining coefficients on noiseless, channel-free PA output:
/// pairs (F(PA(x(d))), d) generated from `seed`. The result depends only
/// on the PA, its drive level and the numerology, so it can be trained
/// once and cached.
pub fn lchoc_train(
    pa: &ScaledPa,
    ofdm: &Ofdm,
    bank: &TermBank,
    n_frames: usize,
    ridge: f64,
    seed: u64,
) -> Result<CombinerCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut received = Vec::with_capacity(n_frames);
    let mut sent = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let frame = SymbolFrame::random(ofdm.config(), &mut rng);
        let y = pa.amplify_signal(&ofdm.modulate(&frame)?);
        received.push(ofdm.demodulate(&y)?);
        sent.push(frame.data);
    }
    train_combiner(
        &received,
        &sent,
        bank,
        ridge,
        Provenance::TrainedPaOnly,
        TrainContext::default(),
    )
}

/// Equalize-then-combine detection with PA-only coefficients: the
/// channel is removed per subcarrier (r/h) and the cached combiner runs
/// on the equalized symbols.
pub fn lchoc_detect(
    received: &[Vec<Complex64>],
    ch: &ChannelRealization,
    coeffs: &CombinerCoefficients,
    bank: &TermBank,
    mod_order: usize,
) -> Result<DetectionResult> {
    if coeffs.provenance != Provenance::TrainedPaOnly {
        return Err(Error::ProvenanceMismatch {
            wanted: Provenance::TrainedPaOnly,
            found: coeffs.provenance,
        });
    }
    let usable: Vec<bool> = ch.gains.iter().map(|h| h.norm() > ZERO_GAIN_EPS).collect();
    let equalized: Vec<Vec<Complex64>> = received
        .iter()
        .map(|frame| {
            if frame.len() != ch.gains.len() {
                return Err(Error::SizeMismatch {
                    what: "lchoc frame",
                    expected: ch.gains.len(),
                    got: frame.len(),
                });
            }
            Ok(frame
                .iter()
                .zip(&ch.gains)
                .zip(&usable)
                .map(|((&r, &h), &ok)| if ok { r / h } else { r })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut symbols = combine(&equalized, coeffs, bank)?;
    // Unusable subcarriers are decided on the raw received value.
    for (est, frame) in symbols.iter_mut().zip(received) {
        for (k, ok) in usable.iter().enumerate() {
            if !ok {
                est[k] = frame[k];
            }
        }
    }
    DetectionResult::from_symbols(symbols, mod_order, count_zero_gains(ch))
}

/// One line of a sparsity report: a full-3rd-order term and the
/// magnitude of its learned coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct SparsityRow {
    pub family: usize,
    pub label: String,
    pub magnitude: f64,
    pub in_support: bool,
}

/// Learned-coefficient magnitudes for one subcarrier of a full
/// 3rd-order combiner, ranked descending, with each term flagged as
/// inside or outside the reduced-combiner support (linear r_k plus
/// closure-satisfying r r r* products).
#[derive(Debug, Clone, Serialize)]
pub struct SparsityReport {
    pub target: usize,
    pub rows: Vec<SparsityRow>,
    pub support_size: usize,
    /// Whether the top `support_size` terms are exactly the support set.
    pub top_terms_match_support: bool,
    /// max out-of-support magnitude / max in-support magnitude.
    pub max_out_in_ratio: f64,
}

pub fn sparsity_report(
    coeffs: &CombinerCoefficients,
    bank: &TermBank,
    used_indices: &[i32],
    target: usize,
) -> Result<SparsityReport> {
    let full = match bank {
        TermBank::Full3(sets) => sets,
        TermBank::Reduced(_) => {
            return Err(Error::TermMisalignment {
                subcarrier: target,
                coeffs: 0,
                terms: 0,
            })
        }
    };
    if coeffs.kind != TermKind::Full3 || target >= coeffs.per_subcarrier.len() {
        return Err(Error::InvalidSubcarrier {
            pos: target,
            n_used: coeffs.per_subcarrier.len(),
        });
    }
    let set = &full[target];
    let c = &coeffs.per_subcarrier[target];
    if c.len() != set.len() {
        return Err(Error::TermMisalignment {
            subcarrier: target,
            coeffs: c.len(),
            terms: set.len(),
        });
    }
    let mut rows: Vec<SparsityRow> = c
        .iter()
        .enumerate()
        .map(|(i, coeff)| {
            let (family, label) = set.term_label(i);
            SparsityRow {
                family,
                label,
                magnitude: coeff.norm(),
                in_support: set.in_reduced_support(i, used_indices),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    let support_size = rows.iter().filter(|r| r.in_support).count();
    let top_terms_match_support = rows[..support_size].iter().all(|r| r.in_support);
    let max_in = rows
        .iter()
        .filter(|r| r.in_support)
        .map(|r| r.magnitude)
        .fold(0.0, f64::max);
    let max_out = rows
        .iter()
        .filter(|r| !r.in_support)
        .map(|r| r.magnitude)
        .fold(0.0, f64::max);
    let max_out_in_ratio = if max_in > 0.0 { max_out / max_in } else { f64::INFINITY };
    Ok(SparsityReport {
        target,
        rows,
        support_size,
        top_terms_match_support,
        max_out_in_ratio,
    })
}

impl std::fmt::Display for SparsityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "subcarrier {}: {} terms, support size {}, top-match {}, out/in ratio {:.3e}",
            self.target,
            self.rows.len(),
            self.support_size,
            self.top_terms_match_support,
            self.max_out_in_ratio
        )?;
        writeln!(f, "{:>4}  {:>3}  {:<28} {:>12}  support", "rank", "fam", "term", "|coeff|")?;
        for (i, r) in self.rows.iter().enumerate().take(24) {
            writeln!(
                f,
                "{:>4}  b{:<2}  {:<28} {:>12.5e}  {}",
                i + 1,
                r.family,
                r.label,
                r.magnitude,
                if r.in_support { "in" } else { "-" }
            )?;
        }
        if self.rows.len() > 24 {
            writeln!(f, "... {} more terms", self.rows.len() - 24)?;
        }
        Ok(())
    }
}
