//! Experiment orchestration: seeded Monte Carlo sweeps over Eb/N0 and
//! IBO, BER accounting and CSV emission.
//!
//! A sweep runs the cross product (ibo, ebn0, instance). Each point draws
//! one channel realization, pushes independent training and test frame
//! sets through the transmit chain, trains the channel-dependent
//! combiners on the training set, and measures train/test BER for every
//! selected receiver. Points execute in parallel; all randomness is
//! derived from the master seed per (point, purpose), so the emitted CSV
//! is byte-identical across reruns regardless of worker count.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_freq_channel, calibrate_noise, draw_rayleigh, ChannelRealization};
use crate::error::{Error, Result};
use crate::ofdm::{Ofdm, OfdmConfig, SymbolFrame};
use crate::pa::{estimate_alpha, BussgangGain, PaModel, ScaledPa};
use crate::rx::{
    cnc_detect, hoc_detect, hoc_train, lchoc_detect, lchoc_train, sparsity_report, zf_detect,
    CombinerBundle, CombinerCoefficients, SparsityReport, TermBank, TrainContext,
};
use crate::seeds::{self, GridPurpose, Purpose};

/// Exact CSV header of sweep output.
pub const CSV_HEADER: &str =
    "experiment,receiver,ibo_db,ebn0_db,instance,ber_train,ber_test,n_bits,zero_gain_events,wall_ms";

/// Detection schemes the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    /// Zero forcing with the Bussgang gain.
    Zf,
    /// Decision-aided clipping-noise cancellation.
    Cnc,
    /// Learned combining, linear + IMD3 terms.
    HocImd3,
    /// Learned combining, linear + IMD3 + IMD5 terms.
    HocImd5,
    /// Learned combining over all nine unconstrained 3rd-order families.
    HocFull3,
    /// PA-only-trained combining after ZF equalization.
    LcHoc,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 6] = [
        ReceiverKind::Zf,
        ReceiverKind::Cnc,
        ReceiverKind::HocImd3,
        ReceiverKind::HocImd5,
        ReceiverKind::HocFull3,
        ReceiverKind::LcHoc,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            ReceiverKind::Zf => "zf",
            ReceiverKind::Cnc => "cnc",
            ReceiverKind::HocImd3 => "hoc-imd3",
            ReceiverKind::HocImd5 => "hoc-imd5",
            ReceiverKind::HocFull3 => "hoc-full3",
            ReceiverKind::LcHoc => "lc-hoc",
        }
    }
}

impl std::str::FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReceiverKind::ALL
            .iter()
            .find(|r| r.id() == s)
            .copied()
            .ok_or_else(|| Error::Experiment(format!("unknown receiver '{s}'")))
    }
}

impl std::fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

fn default_experiment() -> String {
    "desk".into()
}
fn default_ofdm() -> OfdmConfig {
    OfdmConfig {
        n_fft: 64,
        n_cp: 8,
        used_indices: (0..6).collect(),
        mod_order: 64,
    }
}
fn default_pa() -> PaModel {
    PaModel::rapp(1.0, 1.0, 10.0)
}
fn default_ibo() -> Vec<f64> {
    vec![-4.0]
}
fn default_ebn0() -> Vec<f64> {
    vec![6.0, 10.0, 14.0, 18.0, 22.0, 26.0, 30.0, 34.0]
}
fn default_receivers() -> Vec<ReceiverKind> {
    vec![
        ReceiverKind::Zf,
        ReceiverKind::Cnc,
        ReceiverKind::HocImd3,
        ReceiverKind::HocImd5,
        ReceiverKind::LcHoc,
    ]
}
fn default_instances() -> usize {
    50
}
fn default_frames() -> usize {
    2000
}
fn default_cnc_iterations() -> usize {
    10
}
fn default_seed() -> u64 {
    1
}
fn default_alpha_samples() -> usize {
    200_000
}

/// Full description of a sweep. Deserializes from a JSON document where
/// every field is optional; the defaults reproduce the desk-scale study
/// (50 instances, 2000 training and 2000 test frames).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label written into the CSV `experiment` column.
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default = "default_ofdm")]
    pub ofdm: OfdmConfig,
    #[serde(default = "default_pa")]
    pub pa: PaModel,
    #[serde(default = "default_ibo")]
    pub ibo_db: Vec<f64>,
    #[serde(default = "default_ebn0")]
    pub ebn0_db: Vec<f64>,
    #[serde(default = "default_receivers")]
    pub receivers: Vec<ReceiverKind>,
    #[serde(default = "default_instances")]
    pub n_channel_instances: usize,
    #[serde(default = "default_frames")]
    pub n_train_frames: usize,
    #[serde(default = "default_frames")]
    pub n_test_frames: usize,
    #[serde(default = "default_cnc_iterations")]
    pub cnc_iterations: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Ridge for the combiner regressions (0 = plain pseudoinverse).
    #[serde(default)]
    pub ridge: f64,
    /// Sample count for Bussgang gain estimation.
    #[serde(default = "default_alpha_samples")]
    pub n_alpha_samples: usize,
    /// Write measured wall time into the CSV. Off by default so reruns
    /// of the same seed are byte-identical; timings stay available in
    /// the in-memory records either way.
    #[serde(default)]
    pub record_timing: bool,
    /// CSV output path (CLI `--out` overrides).
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory for cached PA-only combiners; defaults beside `output`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are total")
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.pa.validate()?;
        if self.ibo_db.is_empty() || self.ebn0_db.is_empty() {
            return Err(Error::Experiment("ibo_db and ebn0_db must be non-empty".into()));
        }
        if self.receivers.is_empty() {
            return Err(Error::Experiment("receiver list must be non-empty".into()));
        }
        if self.n_channel_instances == 0 || self.n_test_frames == 0 {
            return Err(Error::Experiment("instances and test frames must be positive".into()));
        }
        if self.ridge < 0.0 {
            return Err(Error::Experiment("ridge must be >= 0".into()));
        }
        let max_terms = self.largest_term_set()?;
        if max_terms > 0 && self.n_train_frames < 10 * max_terms {
            return Err(Error::Experiment(format!(
                "n_train_frames {} must be at least 10x the largest term set ({}) of the selected receivers",
                self.n_train_frames,
                max_terms
            )));
        }
        Ok(())
    }

    /// Largest combiner term-set size among the selected receivers.
    pub fn largest_term_set(&self) -> Result<usize> {
        let used = &self.ofdm.used_indices;
        let mut max = 0;
        for r in &self.receivers {
            let bank = match r {
                ReceiverKind::HocImd3 => TermBank::third_order(used)?,
                ReceiverKind::HocImd5 | ReceiverKind::LcHoc => TermBank::fifth_order(used)?,
                ReceiverKind::HocFull3 => TermBank::full_third_order(used)?,
                ReceiverKind::Zf | ReceiverKind::Cnc => continue,
            };
            max = max.max(bank.max_terms());
        }
        Ok(max)
    }
}

/// Result row for one (receiver, point).
#[derive(Debug, Clone)]
pub struct BerRecord {
    pub receiver: ReceiverKind,
    pub ibo_db: f64,
    pub ebn0_db: f64,
    pub instance: usize,
    pub ber_train: f64,
    pub ber_test: f64,
    /// Test bits counted: n_test_frames * N_U * log2(M).
    pub n_bits: u64,
    /// Subcarriers of this instance's channel below the usability
    /// threshold (same value on every receiver row of the point).
    pub zero_gain_events: u64,
    /// Measured wall time of this receiver's train + detect work.
    pub wall_ms: u64,
    /// Exact error counts behind the BER fields.
    pub errors_train: u64,
    pub errors_test: u64,
    pub n_bits_train: u64,
}

/// Aggregated row per (receiver, ibo, ebn0) over instances.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub receiver: ReceiverKind,
    pub ibo_db: f64,
    pub ebn0_db: f64,
    pub ber_train: f64,
    pub ber_test: f64,
    pub n_bits: u64,
    pub zero_gain_events: u64,
    pub wall_ms: u64,
}

/// Immutable per-sweep state shared by all points: the OFDM engine, the
/// per-IBO drive levels, Bussgang gains and cached PA-only combiners.
pub struct SweepContext {
    pub cfg: ExperimentConfig,
    ofdm: Ofdm,
    scaled_pa: Vec<ScaledPa>,
    alpha_raw: Vec<BussgangGain>,
    /// Effective d_k -> Y_k gain per IBO: input_scale * alpha.
    alpha_eff: Vec<Complex64>,
    bank_imd3: Option<Arc<TermBank>>,
    bank_imd5: Option<Arc<TermBank>>,
    bank_full3: Option<Arc<TermBank>>,
    lchoc: Vec<Option<Arc<CombinerBundle>>>,
}

impl SweepContext {
    /// Validates the config, calibrates every IBO operating point and
    /// trains (or loads from cache) the PA-only combiners.
    pub fn prepare(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let ofdm = Ofdm::new(cfg.ofdm.clone())?;
        let sigma2 = cfg.ofdm.nominal_body_power();
        let used = &cfg.ofdm.used_indices;

        let bank_imd3 = if cfg.receivers.contains(&ReceiverKind::HocImd3) {
            Some(Arc::new(TermBank::third_order(used)?))
        } else {
            None
        };
        let needs_imd5 = cfg.receivers.contains(&ReceiverKind::HocImd5)
            || cfg.receivers.contains(&ReceiverKind::LcHoc);
        let bank_imd5 = if needs_imd5 {
            Some(Arc::new(TermBank::fifth_order(used)?))
        } else {
            None
        };
        let bank_full3 = if cfg.receivers.contains(&ReceiverKind::HocFull3) {
            Some(Arc::new(TermBank::full_third_order(used)?))
        } else {
            None
        };

        let mut scaled_pa = Vec::with_capacity(cfg.ibo_db.len());
        let mut alpha_raw = Vec::with_capacity(cfg.ibo_db.len());
        let mut alpha_eff = Vec::with_capacity(cfg.ibo_db.len());
        let mut lchoc = Vec::with_capacity(cfg.ibo_db.len());
        for (ibo_idx, &ibo) in cfg.ibo_db.iter().enumerate() {
            let pa = ScaledPa::at_ibo(cfg.pa.clone(), ibo, sigma2)?;
            let drive = sigma2 * pa.input_scale * pa.input_scale;
            let gain = estimate_alpha(
                &cfg.pa,
                drive,
                cfg.n_alpha_samples,
                seeds::grid_seed(cfg.master_seed, ibo_idx, GridPurpose::Alpha),
            )?;
            alpha_eff.push(gain.alpha * pa.input_scale);
            alpha_raw.push(gain);

            let bundle = if cfg.receivers.contains(&ReceiverKind::LcHoc) {
                let bank = bank_imd5.as_ref().expect("imd5 bank prepared for lc-hoc");
                Some(Arc::new(load_or_train_lchoc(&cfg, &ofdm, &pa, bank, ibo_idx, ibo)?))
            } else {
                None
            };
            lchoc.push(bundle);
            scaled_pa.push(pa);
        }

        Ok(Self {
            cfg,
            ofdm,
            scaled_pa,
            alpha_raw,
            alpha_eff,
            bank_imd3,
            bank_imd5,
            bank_full3,
            lchoc,
        })
    }

    pub fn ofdm(&self) -> &Ofdm {
        &self.ofdm
    }

    pub fn alpha_for(&self, ibo_idx: usize) -> &BussgangGain {
        &self.alpha_raw[ibo_idx]
    }

    pub fn scaled_pa_for(&self, ibo_idx: usize) -> &ScaledPa {
        &self.scaled_pa[ibo_idx]
    }
}

/// Key under which a PA-only combiner is cached: everything its
/// coefficients depend on.
#[derive(Serialize)]
struct LchocCacheKey<'a> {
    pa: &'a PaModel,
    ibo_db: f64,
    ofdm: &'a OfdmConfig,
    n_train_frames: usize,
    ridge: f64,
    seed: u64,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn load_or_train_lchoc(
    cfg: &ExperimentConfig,
    ofdm: &Ofdm,
    pa: &ScaledPa,
    bank: &Arc<TermBank>,
    ibo_idx: usize,
    ibo_db: f64,
) -> Result<CombinerBundle> {
    let seed = seeds::grid_seed(cfg.master_seed, ibo_idx, GridPurpose::PaOnlyTraining);
    let key = LchocCacheKey {
        pa: &cfg.pa,
        ibo_db,
        ofdm: &cfg.ofdm,
        n_train_frames: cfg.n_train_frames,
        ridge: cfg.ridge,
        seed,
    };
    let digest = fnv1a64(serde_json::to_string(&key)?.as_bytes());
    let cache_path = cfg
        .cache_dir
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.parent().map(PathBuf::from)))
        .map(|dir| dir.join(format!("lchoc-{digest:016x}.json")));

    if let Some(path) = &cache_path {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(bundle) = serde_json::from_str::<CombinerBundle>(&text) {
                if bundle.terms == **bank {
                    return Ok(bundle);
                }
            }
        }
    }

    let mut coeffs = lchoc_train(pa, ofdm, bank, cfg.n_train_frames, cfg.ridge, seed)?;
    coeffs.meta.ibo_db = Some(ibo_db);
    let bundle = CombinerBundle {
        terms: (**bank).clone(),
        coeffs,
    };
    if let Some(path) = &cache_path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string(&bundle)?)?;
    }
    Ok(bundle)
}

fn generate_frames(
    ofdm: &Ofdm,
    pa: &ScaledPa,
    n_frames: usize,
    seed: u64,
) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>, Vec<bool>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pa_out = Vec::with_capacity(n_frames);
    let mut sent = Vec::with_capacity(n_frames);
    let mut bits = Vec::with_capacity(n_frames * ofdm.config().bits_per_frame());
    for _ in 0..n_frames {
        let frame = SymbolFrame::random(ofdm.config(), &mut rng);
        let y = pa.amplify_signal(&ofdm.modulate(&frame)?);
        pa_out.push(ofdm.demodulate(&y)?);
        bits.extend_from_slice(&frame.bits);
        sent.push(frame.data);
    }
    Ok((pa_out, sent, bits))
}

fn add_channel(
    pa_out: &[Vec<Complex64>],
    ch: &ChannelRealization,
    seed: u64,
) -> Result<Vec<Vec<Complex64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pa_out
        .iter()
        .map(|y| apply_freq_channel(y, ch, &mut rng))
        .collect()
}

struct PointData {
    ch: ChannelRealization,
    r_train: Vec<Vec<Complex64>>,
    r_test: Vec<Vec<Complex64>>,
    d_train: Vec<Vec<Complex64>>,
    bits_train: Vec<bool>,
    bits_test: Vec<bool>,
}

/// Runs one (ibo, ebn0, instance) cell: one channel realization, fresh
/// training and test sets with independent noise at the same calibrated
/// variance, every selected receiver trained and evaluated. Returns one
/// record per receiver in config order.
pub fn run_point(
    ctx: &SweepContext,
    ibo_idx: usize,
    ebn0_idx: usize,
    instance: usize,
) -> Result<Vec<BerRecord>> {
    let cfg = &ctx.cfg;
    let ibo_db = cfg.ibo_db[ibo_idx];
    let ebn0_db = cfg.ebn0_db[ebn0_idx];
    run_point_inner(ctx, ibo_idx, ebn0_idx, instance).map_err(|e| Error::Point {
        ibo_db,
        ebn0_db,
        instance,
        source: Box::new(e),
    })
}

fn run_point_inner(
    ctx: &SweepContext,
    ibo_idx: usize,
    ebn0_idx: usize,
    instance: usize,
) -> Result<Vec<BerRecord>> {
    let cfg = &ctx.cfg;
    let ofdm = &ctx.ofdm;
    let pa = &ctx.scaled_pa[ibo_idx];
    let alpha = ctx.alpha_eff[ibo_idx];
    let ibo_db = cfg.ibo_db[ibo_idx];
    let ebn0_db = cfg.ebn0_db[ebn0_idx];
    let seed = |p: Purpose| seeds::point_seed(cfg.master_seed, ibo_idx, ebn0_idx, instance, p);

    // Transmit chains; the training set doubles as the calibration set
    // for the Eb reference (mean PA-output power per used subcarrier,
    // distortion included).
    let (y_train, d_train, bits_train) =
        generate_frames(ofdm, pa, cfg.n_train_frames, seed(Purpose::TrainBits))?;
    let (y_test, _d_test, bits_test) =
        generate_frames(ofdm, pa, cfg.n_test_frames, seed(Purpose::TestBits))?;

    let n_symbols = (cfg.n_train_frames * cfg.ofdm.n_used()) as f64;
    let signal_power = y_train
        .iter()
        .flat_map(|f| f.iter())
        .map(|y| y.norm_sqr())
        .sum::<f64>()
        / n_symbols;
    let noise_var = calibrate_noise(ebn0_db, signal_power, cfg.ofdm.mod_order)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed(Purpose::Channel));
    let ch = ChannelRealization::new(draw_rayleigh(cfg.ofdm.n_used(), &mut rng), noise_var)?;

    let data = PointData {
        r_train: add_channel(&y_train, &ch, seed(Purpose::TrainNoise))?,
        r_test: add_channel(&y_test, &ch, seed(Purpose::TestNoise))?,
        ch,
        d_train,
        bits_train,
        bits_test,
    };
    let zero_gain = data
        .ch
        .gains
        .iter()
        .filter(|h| h.norm() <= crate::rx::ZERO_GAIN_EPS)
        .count() as u64;

    let train_ctx = TrainContext {
        ibo_db: Some(ibo_db),
        ebn0_db: Some(ebn0_db),
        channel_id: Some(seed(Purpose::Channel)),
    };

    let mut trained_imd3: Option<CombinerCoefficients> = None;
    let mut trained_imd5: Option<CombinerCoefficients> = None;
    let mut records = Vec::with_capacity(cfg.receivers.len());

    for &receiver in &cfg.receivers {
        let started = Instant::now();
        let (det_train, det_test) = match receiver {
            ReceiverKind::Zf => (
                zf_detect(&data.r_train, &data.ch, alpha, cfg.ofdm.mod_order)?,
                zf_detect(&data.r_test, &data.ch, alpha, cfg.ofdm.mod_order)?,
            ),
            ReceiverKind::Cnc => (
                cnc_detect(&data.r_train, &data.ch, pa, alpha, ofdm, cfg.cnc_iterations)?,
                cnc_detect(&data.r_test, &data.ch, pa, alpha, ofdm, cfg.cnc_iterations)?,
            ),
            ReceiverKind::HocImd3 => {
                let bank = ctx.bank_imd3.as_ref().expect("imd3 bank prepared");
                let coeffs = hoc_train(&data.r_train, &data.d_train, bank, cfg.ridge, train_ctx)?;
                let out = (
                    hoc_detect(&data.r_train, &coeffs, bank, cfg.ofdm.mod_order)?,
                    hoc_detect(&data.r_test, &coeffs, bank, cfg.ofdm.mod_order)?,
                );
                trained_imd3 = Some(coeffs);
                out
            }
            ReceiverKind::HocImd5 => {
                let bank = ctx.bank_imd5.as_ref().expect("imd5 bank prepared");
                let coeffs = hoc_train(&data.r_train, &data.d_train, bank, cfg.ridge, train_ctx)?;
                let out = (
                    hoc_detect(&data.r_train, &coeffs, bank, cfg.ofdm.mod_order)?,
                    hoc_detect(&data.r_test, &coeffs, bank, cfg.ofdm.mod_order)?,
                );
                trained_imd5 = Some(coeffs);
                out
            }
            ReceiverKind::HocFull3 => {
                let bank = ctx.bank_full3.as_ref().expect("full3 bank prepared");
                let coeffs = hoc_train(&data.r_train, &data.d_train, bank, cfg.ridge, train_ctx)?;
                (
                    hoc_detect(&data.r_train, &coeffs, bank, cfg.ofdm.mod_order)?,
                    hoc_detect(&data.r_test, &coeffs, bank, cfg.ofdm.mod_order)?,
                )
            }
            ReceiverKind::LcHoc => {
                let bundle = ctx.lchoc[ibo_idx].as_ref().expect("lc-hoc bundle prepared");
                (
                    lchoc_detect(
                        &data.r_train,
                        &data.ch,
                        &bundle.coeffs,
                        &bundle.terms,
                        cfg.ofdm.mod_order,
                    )?,
                    lchoc_detect(
                        &data.r_test,
                        &data.ch,
                        &bundle.coeffs,
                        &bundle.terms,
                        cfg.ofdm.mod_order,
                    )?,
                )
            }
        };
        let (errors_train, n_bits_train) = det_train.count_bit_errors(&data.bits_train)?;
        let (errors_test, n_bits) = det_test.count_bit_errors(&data.bits_test)?;
        records.push(BerRecord {
            receiver,
            ibo_db,
            ebn0_db,
            instance,
            ber_train: errors_train as f64 / n_bits_train as f64,
            ber_test: errors_test as f64 / n_bits as f64,
            n_bits,
            zero_gain_events: zero_gain,
            wall_ms: started.elapsed().as_millis() as u64,
            errors_train,
            errors_test,
            n_bits_train,
        });
    }

    // Adding IMD5 columns to the IMD3 model can only shrink the
    // in-sample residual; a violation indicates a solver defect.
    if let (Some(c3), Some(c5)) = (&trained_imd3, &trained_imd5) {
        for (k, (m3, m5)) in c3
            .meta
            .in_sample_mse
            .iter()
            .zip(&c5.meta.in_sample_mse)
            .enumerate()
        {
            if *m5 > m3 * (1.0 + 1e-9) + 1e-15 {
                return Err(Error::Experiment(format!(
                    "nested-model violation at subcarrier {k}: imd5 in-sample mse {m5} > imd3 {m3}"
                )));
            }
        }
    }

    Ok(records)
}

/// Everything a sweep produced. `errors` is non-empty when points
/// failed; successful records are still present (and flushed to CSV by
/// the caller) in deterministic order.
pub struct SweepOutput {
    pub records: Vec<BerRecord>,
    pub summaries: Vec<SummaryRow>,
    pub errors: Vec<Error>,
}

impl SweepOutput {
    pub fn is_complete(&self) -> bool {
        self.errors.is_empty()
    }

    /// Renders the CSV document: header, per-point rows, then (for
    /// complete sweeps) one summary row per (receiver, ibo, ebn0) with
    /// `mean` in the instance column.
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let wall = if cfg.record_timing { r.wall_ms } else { 0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                cfg.experiment,
                r.receiver,
                r.ibo_db,
                r.ebn0_db,
                r.instance,
                r.ber_train,
                r.ber_test,
                r.n_bits,
                r.zero_gain_events,
                wall
            );
        }
        for s in &self.summaries {
            let wall = if cfg.record_timing { s.wall_ms } else { 0 };
            let _ = writeln!(
                out,
                "{},{},{},{},mean,{},{},{},{},{}",
                cfg.experiment,
                s.receiver,
                s.ibo_db,
                s.ebn0_db,
                s.ber_train,
                s.ber_test,
                s.n_bits,
                s.zero_gain_events,
                wall
            );
        }
        out
    }
}

/// Runs the full (ibo, ebn0, instance) cross product in parallel.
/// Workers come from the rayon global pool (`RAYON_NUM_THREADS`
/// controls the count; default is the available parallelism).
pub fn run_sweep(ctx: &SweepContext) -> SweepOutput {
    let cfg = &ctx.cfg;
    let mut cells = Vec::new();
    for ibo_idx in 0..cfg.ibo_db.len() {
        for ebn0_idx in 0..cfg.ebn0_db.len() {
            for instance in 0..cfg.n_channel_instances {
                cells.push((ibo_idx, ebn0_idx, instance));
            }
        }
    }
    let results: Vec<Result<Vec<BerRecord>>> = cells
        .par_iter()
        .map(|&(i, e, n)| run_point(ctx, i, e, n))
        .collect();

    let mut records = Vec::with_capacity(cells.len() * cfg.receivers.len());
    let mut errors = Vec::new();
    for res in results {
        match res {
            Ok(rs) => records.extend(rs),
            Err(e) => errors.push(e),
        }
    }
    let summaries = if errors.is_empty() {
        summarize(cfg, &records)
    } else {
        Vec::new()
    };
    SweepOutput {
        records,
        summaries,
        errors,
    }
}

/// Bit-weighted mean BER per (receiver, ibo, ebn0), in grid order.
fn summarize(cfg: &ExperimentConfig, records: &[BerRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &ibo in &cfg.ibo_db {
        for &ebn0 in &cfg.ebn0_db {
            for &receiver in &cfg.receivers {
                let group: Vec<&BerRecord> = records
                    .iter()
                    .filter(|r| {
                        r.receiver == receiver && r.ibo_db == ibo && r.ebn0_db == ebn0
                    })
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let n_bits: u64 = group.iter().map(|r| r.n_bits).sum();
                let n_bits_train: u64 = group.iter().map(|r| r.n_bits_train).sum();
                let errors_test: u64 = group.iter().map(|r| r.errors_test).sum();
                let errors_train: u64 = group.iter().map(|r| r.errors_train).sum();
                rows.push(SummaryRow {
                    receiver,
                    ibo_db: ibo,
                    ebn0_db: ebn0,
                    ber_train: errors_train as f64 / n_bits_train as f64,
                    ber_test: errors_test as f64 / n_bits as f64,
                    n_bits,
                    zero_gain_events: group.iter().map(|r| r.zero_gain_events).sum(),
                    wall_ms: group.iter().map(|r| r.wall_ms).sum(),
                });
            }
        }
    }
    rows
}

/// Per-subcarrier IMD term counts for a numerology.
#[derive(Debug, Clone, Serialize)]
pub struct TermCountReport {
    pub used_indices: Vec<i32>,
    /// (imd3 count, imd5 count) per target subcarrier.
    pub per_subcarrier: Vec<(usize, usize)>,
}

impl TermCountReport {
    pub fn mean_imd3(&self) -> f64 {
        self.per_subcarrier.iter().map(|c| c.0 as f64).sum::<f64>()
            / self.per_subcarrier.len() as f64
    }

    pub fn mean_imd5(&self) -> f64 {
        self.per_subcarrier.iter().map(|c| c.1 as f64).sum::<f64>()
            / self.per_subcarrier.len() as f64
    }
}

impl std::fmt::Display for TermCountReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>4} {:>6} {:>6} {:>6}", "k", "I_k", "imd3", "imd5")?;
        for (k, (c3, c5)) in self.per_subcarrier.iter().enumerate() {
            writeln!(f, "{:>4} {:>6} {:>6} {:>6}", k, self.used_indices[k], c3, c5)?;
        }
        writeln!(
            f,
            "mean imd3 {:.2}, mean imd5 {:.2}, totals {} / {}",
            self.mean_imd3(),
            self.mean_imd5(),
            self.per_subcarrier.iter().map(|c| c.0).sum::<usize>(),
            self.per_subcarrier.iter().map(|c| c.1).sum::<usize>()
        )
    }
}

/// Counts closure-satisfying IMD3/IMD5 terms for every subcarrier of
/// the configured numerology.
pub fn report_terms(cfg: &OfdmConfig) -> Result<TermCountReport> {
    cfg.validate()?;
    let per_subcarrier = (0..cfg.n_used())
        .map(|k| -> Result<(usize, usize)> {
            Ok((
                crate::imd::enum_imd3(&cfg.used_indices, k)?.len(),
                crate::imd::enum_imd5(&cfg.used_indices, k)?.len(),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(TermCountReport {
        used_indices: cfg.used_indices.clone(),
        per_subcarrier,
    })
}

/// One Bussgang-gain row of [`report_alpha`].
#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub ibo_db: f64,
    pub input_scale: f64,
    pub alpha: Complex64,
    pub std_error: f64,
    /// Effective d_k -> Y_k gain: input_scale * alpha.
    pub alpha_eff: Complex64,
}

/// Bussgang gains across the configured IBO grid.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaReport {
    pub rows: Vec<AlphaRow>,
}

impl std::fmt::Display for AlphaReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:>8} {:>12} {:>22} {:>12} {:>12}",
            "ibo_db", "input_scale", "alpha", "std_err", "|alpha_eff|"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>8} {:>12.6} {:>11.6}{:+.6}j {:>12.3e} {:>12.6}",
                r.ibo_db,
                r.input_scale,
                r.alpha.re,
                r.alpha.im,
                r.std_error,
                r.alpha_eff.norm()
            )?;
        }
        Ok(())
    }
}

/// Estimates the Bussgang gain at every configured IBO.
pub fn report_alpha(cfg: &ExperimentConfig) -> Result<AlphaReport> {
    cfg.validate()?;
    let sigma2 = cfg.ofdm.nominal_body_power();
    let mut rows = Vec::with_capacity(cfg.ibo_db.len());
    for (ibo_idx, &ibo) in cfg.ibo_db.iter().enumerate() {
        let pa = ScaledPa::at_ibo(cfg.pa.clone(), ibo, sigma2)?;
        let drive = sigma2 * pa.input_scale * pa.input_scale;
        let gain = estimate_alpha(
            &cfg.pa,
            drive,
            cfg.n_alpha_samples,
            seeds::grid_seed(cfg.master_seed, ibo_idx, GridPurpose::Alpha),
        )?;
        rows.push(AlphaRow {
            ibo_db: ibo,
            input_scale: pa.input_scale,
            alpha: gain.alpha,
            std_error: gain.std_error,
            alpha_eff: gain.alpha * pa.input_scale,
        });
    }
    Ok(AlphaReport { rows })
}

/// Trains the full 3rd-order combiner on noiseless, channel-free PA
/// output at the given IBO and reports ranked coefficient magnitudes per
/// subcarrier.
pub fn run_sparsity(
    cfg: &ExperimentConfig,
    ibo_idx: usize,
    n_frames: usize,
) -> Result<Vec<SparsityReport>> {
    cfg.validate()?;
    if ibo_idx >= cfg.ibo_db.len() {
        return Err(Error::Experiment(format!(
            "ibo index {ibo_idx} out of range ({} configured)",
            cfg.ibo_db.len()
        )));
    }
    let ofdm = Ofdm::new(cfg.ofdm.clone())?;
    let sigma2 = cfg.ofdm.nominal_body_power();
    let pa = ScaledPa::at_ibo(cfg.pa.clone(), cfg.ibo_db[ibo_idx], sigma2)?;
    let bank = TermBank::full_third_order(&cfg.ofdm.used_indices)?;
    let seed = seeds::grid_seed(cfg.master_seed, ibo_idx, GridPurpose::Sparsity);
    let coeffs = lchoc_train(&pa, &ofdm, &bank, n_frames, cfg.ridge, seed)?;
    (0..cfg.ofdm.n_used())
        .map(|k| sparsity_report(&coeffs, &bank, &cfg.ofdm.used_indices, k))
        .collect()
}
