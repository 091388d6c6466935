//! Deterministic sub-seed derivation.
//!
//! Every random draw of a sweep gets its own RNG stream so that points
//! can run on any number of workers, in any order, and still produce
//! byte-identical results. Point-scoped purposes key on the full
//! (ibo, ebn0, instance) cell; grid-scoped purposes (Bussgang gain,
//! PA-only combiner training) key on the IBO alone because their result
//! is shared by every point at that operating level. Seeds are derived
//! by folding tag words into a SplitMix64 chain; the mapping is a fixed
//! part of the output contract.

/// Draws scoped to one (ibo, ebn0, instance) sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Per-subcarrier channel gains.
    Channel,
    /// Training-set payload bits.
    TrainBits,
    /// Training-set receiver noise.
    TrainNoise,
    /// Test-set payload bits.
    TestBits,
    /// Test-set receiver noise.
    TestNoise,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Channel => 1,
            Purpose::TrainBits => 2,
            Purpose::TrainNoise => 3,
            Purpose::TestBits => 4,
            Purpose::TestNoise => 5,
        }
    }
}

/// Draws scoped to one IBO level of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPurpose {
    /// Gaussian samples for Bussgang gain estimation.
    Alpha,
    /// Channel-free training bits for the PA-only combiner.
    PaOnlyTraining,
    /// Channel-free training bits for the full 3rd-order sparsity study.
    Sparsity,
}

impl GridPurpose {
    fn tag(self) -> u64 {
        match self {
            GridPurpose::Alpha => 101,
            GridPurpose::PaOnlyTraining => 102,
            GridPurpose::Sparsity => 103,
        }
    }
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `tags` into `master`, one SplitMix64 step per word.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &t in tags {
        s = splitmix64(s ^ t);
    }
    s
}

/// Sub-seed for one (ibo, ebn0, instance, purpose) cell of a sweep grid.
pub fn point_seed(
    master: u64,
    ibo_idx: usize,
    ebn0_idx: usize,
    instance: usize,
    purpose: Purpose,
) -> u64 {
    derive(
        master,
        &[
            0x10,
            ibo_idx as u64,
            ebn0_idx as u64,
            instance as u64,
            purpose.tag(),
        ],
    )
}

/// Sub-seed for per-IBO shared draws.
pub fn grid_seed(master: u64, ibo_idx: usize, purpose: GridPurpose) -> u64 {
    derive(master, &[0x20, ibo_idx as u64, purpose.tag()])
}
