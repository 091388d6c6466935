//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by signal-processing, training and harness operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported modulation order {0} (supported: 4, 16, 64)")]
    UnsupportedModOrder(usize),

    #[error("bit vector length {len} is not divisible by {bits_per_symbol} bits/symbol")]
    BitLength { len: usize, bits_per_symbol: usize },

    #[error("invalid OFDM config: {0}")]
    InvalidConfig(String),

    #[error("signal too short: need at least {need} samples past the cyclic prefix, got {got}")]
    SignalTooShort { need: usize, got: usize },

    #[error("empty signal")]
    EmptySignal,

    #[error("subcarrier position {pos} out of range (N_U = {n_used})")]
    InvalidSubcarrier { pos: usize, n_used: usize },

    #[error("{0} must be positive")]
    NonPositive(&'static str),

    #[error("alpha estimation needs at least {min} samples, got {got}")]
    DegenerateSampleCount { min: usize, got: usize },

    #[error("impulse response of {taps} taps exceeds cyclic prefix of {n_cp} samples")]
    CpTooShortForTaps { taps: usize, n_cp: usize },

    #[error("least-squares system is underdetermined: {rows} rows < {cols} columns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("rank-deficient design matrix (pivot {col} below tolerance); retry with ridge > 0")]
    RankDeficient { col: usize },

    #[error("combiner trained as {found:?} cannot be used by a {wanted:?} detector")]
    ProvenanceMismatch {
        wanted: crate::rx::Provenance,
        found: crate::rx::Provenance,
    },

    #[error("coefficient vector for subcarrier {subcarrier} has {coeffs} entries but the term set has {terms}")]
    TermMisalignment {
        subcarrier: usize,
        coeffs: usize,
        terms: usize,
    },

    #[error("training at subcarrier {subcarrier} failed: {source}")]
    Training {
        subcarrier: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("point (ibo {ibo_db} dB, ebn0 {ebn0_db} dB, instance {instance}) failed: {source}")]
    Point {
        ibo_db: f64,
        ebn0_db: f64,
        instance: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("experiment config: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
