//! Per-trajectory records shared by all backends.

use serde::{Deserialize, Serialize};

/// What to record along a trajectory besides the final moments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Record `⟨M_z⟩` and `⟨M_z²⟩` after every step. Costs O(2^L) per step on
    /// the statevector backend.
    #[serde(default)]
    pub dense_mz: bool,
    /// Steps (1-based, counted after the operation) at which to record the
    /// half-chain entropy. Step 0 means the initial state.
    #[serde(default)]
    pub entropy_steps: Vec<usize>,
    /// Entanglement cut; defaults to `L/2`.
    #[serde(default)]
    pub entropy_cut: Option<usize>,
    /// Sample a terminal bitstring from the final state.
    #[serde(default)]
    pub final_bitstring: bool,
}

impl ProbeConfig {
    pub fn with_final_bitstring(mut self) -> Self {
        self.final_bitstring = true;
        self
    }

    pub fn with_dense_mz(mut self) -> Self {
        self.dense_mz = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    /// `m_k ∈ {+1, −1, 0}`: +1 for outcome |0⟩, −1 for |1⟩, 0 at scrambling steps.
    pub measurements: Vec<i8>,
    /// `⟨M_z⟩` after each step (index 0 is the initial state) when dense sampling is on.
    pub mz_series: Option<Vec<f64>>,
    pub mz_sq_series: Option<Vec<f64>>,
    pub mz_final: f64,
    pub mz_sq_final: f64,
    pub final_bitstring: Option<Vec<u8>>,
    pub entropy_series: Vec<(usize, f64)>,
    pub fidelity_final: f64,
    pub shot_seed: u64,
}

impl ShotRecord {
    /// Magnetization of the terminal bitstring, if one was sampled.
    pub fn bitstring_mz(&self) -> Option<f64> {
        self.final_bitstring.as_deref().map(bitstring_mz)
    }
}

/// `(1/L) Σ (1 − 2 b_i)`.
pub fn bitstring_mz(bits: &[u8]) -> f64 {
    let ones: usize = bits.iter().map(|&b| b as usize).sum();
    (bits.len() as f64 - 2.0 * ones as f64) / bits.len() as f64
}

/// Packs site bits into a basis index with site `i` at bit `i`.
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as usize & 1) << i))
}

pub fn index_to_bits(index: usize, l: usize) -> Vec<u8> {
    (0..l).map(|i| ((index >> i) & 1) as u8).collect()
}
