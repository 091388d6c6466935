//! Link-level OFDM simulation under nonlinear power-amplifier distortion.
//!
//! The crate models the full chain — Gray-mapped QAM onto occupied
//! subcarriers, unitary IFFT with cyclic prefix, a memoryless PA at a
//! controlled input back-off, per-subcarrier Rayleigh fading with
//! Eb/N0-calibrated noise — and implements several receivers on top of
//! it: zero forcing against the Bussgang gain, iterative clipping-noise
//! cancellation, and higher-order combining detectors whose coefficients
//! are learned by complex least squares over intermodulation monomials
//! of the received symbols.
//!
//! Modules map to the processing stages:
//!
//! - [`qam`]: constellation mapping and hard decisions
//! - [`ofdm`]: (de)modulation, framing, power measurement
//! - [`pa`]: PA models, input back-off, Bussgang decomposition
//! - [`channel`]: fading, noise calibration, time-domain validation path
//! - [`imd`]: intermodulation term enumeration and feature evaluation
//! - [`lstsq`]: dense complex least squares
//! - [`rx`]: the detection schemes and combiner training
//! - [`sim`]: seeded Monte Carlo sweeps, BER accounting, CSV output
//! - [`seeds`]: deterministic sub-seed derivation

pub mod channel;
pub mod error;
pub mod imd;
pub mod lstsq;
pub mod ofdm;
pub mod pa;
pub mod qam;
pub mod rx;
pub mod seeds;
pub mod sim;

pub use channel::{ChannelRealization, ImpulseResponse};
pub use error::{Error, Result};
pub use imd::{FullThirdOrderTermSet, ImdTermSet};
pub use lstsq::{DesignMatrix, Solution};
pub use ofdm::{Ofdm, OfdmConfig, SymbolFrame, TimeSignal};
pub use pa::{BussgangGain, PaModel, PolynomialParams, RappParams, ScaledPa};
pub use rx::{CombinerBundle, CombinerCoefficients, DetectionResult, TermBank};
pub use sim::{BerRecord, ExperimentConfig, ReceiverKind, SweepContext, SweepOutput};
