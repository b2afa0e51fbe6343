//! Shot and circuit aggregation: mean magnetization, the quantum
//! (shot-to-shot) fluctuation `(ΔM_z)²|_C` of each circuit, and its
//! circuit-to-circuit variance `Var_Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shot::ShotRecord;
use crate::stats::{jackknife_se, mean, variance, Moments};
use crate::Backend;

/// Tolerance below which a circuit's quantum fluctuation counts as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Per-trajectory wavefunction expectations `⟨M_z⟩`, `⟨M_z²⟩`.
    Expectation,
    /// Magnetization of a sampled terminal bitstring.
    Bitstring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub circuit_index: u64,
    /// Number of shots; 0 marks statistics computed exactly.
    pub n_shots: u64,
    /// `E_m[⟨M_z⟩]`.
    pub mz_mean: f64,
    /// `E_m[⟨M_z²⟩]` (expectation mode) or `E_m[M_z²]` (bitstring mode).
    pub mz_second: f64,
    /// Unbiased estimate of `(ΔM_z)²|_C`; may be slightly negative.
    pub quantum_var: f64,
    /// Jackknife estimate of the sampling variance of `quantum_var`
    /// (0 for exact statistics, NaN with fewer than 3 shots).
    pub quantum_var_noise: f64,
    pub backend: Backend,
    pub mode: EstimatorMode,
}

impl CircuitStats {
    /// Statistics known exactly (infinite shots).
    pub fn exact(circuit_index: u64, backend: Backend, mz_mean: f64, quantum_var: f64) -> Self {
        CircuitStats {
            circuit_index,
            n_shots: 0,
            mz_mean,
            mz_second: quantum_var + mz_mean * mz_mean,
            quantum_var,
            quantum_var_noise: 0.0,
            backend,
            mode: EstimatorMode::Expectation,
        }
    }

    /// From per-shot first moments `xs` and second moments `ys`
    /// (`ys[i] = xs[i]²` for definite outcomes).
    ///
    /// `quantum_var = mean(y) − mean(x)² + s²_x / n`, unbiased for
    /// `E[y] − E[x]²`; with `y = x²` it reduces to the sample variance.
    pub fn from_moments(
        circuit_index: u64,
        backend: Backend,
        mode: EstimatorMode,
        xs: &[f64],
        ys: &[f64],
    ) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("circuit stats need ≥ 2 shots, got {n}")));
        }
        if ys.len() != n {
            return Err(Error::Parameter("moment arrays differ in length".into()));
        }
        let mx = Moments::from_slice(xs);
        let my = mean(ys);
        let q = |mx: &Moments, my: f64| {
            let k = mx.n as f64;
            my - mx.mean * mx.mean + mx.var() / k
        };
        let quantum_var = q(&mx, my);
        let quantum_var_noise = if n >= 3 {
            let sy: f64 = ys.iter().sum();
            let loo: Vec<f64> = xs
                .iter()
                .zip(ys)
                .map(|(&x, &y)| q(&mx.without(x), (sy - y) / (n - 1) as f64))
                .collect();
            crate::stats::jackknife_spread(&loo).powi(2)
        } else {
            f64::NAN
        };
        Ok(CircuitStats {
            circuit_index,
            n_shots: n as u64,
            mz_mean: mx.mean,
            mz_second: my,
            quantum_var,
            quantum_var_noise,
            backend,
            mode,
        })
    }

    pub fn is_zero_fluctuation(&self) -> bool {
        self.quantum_var.abs() <= ZERO_TOLERANCE
    }
}

/// Aggregates the shots of one circuit.
pub fn circuit_stats(
    shots: &[ShotRecord],
    mode: EstimatorMode,
    circuit_index: u64,
    backend: Backend,
) -> Result<CircuitStats> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = match mode {
        EstimatorMode::Expectation => shots.iter().map(|s| (s.mz_final, s.mz_sq_final)).unzip(),
        EstimatorMode::Bitstring => shots
            .iter()
            .map(|s| {
                s.bitstring_mz()
                    .map(|m| (m, m * m))
                    .ok_or_else(|| Error::Parameter("bitstring mode needs sampled final bitstrings".into()))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
    };
    CircuitStats::from_moments(circuit_index, backend, mode, &xs, &ys)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub backend: Backend,
    pub mode: EstimatorMode,
    pub l: usize,
    pub p: f64,
    pub t: usize,
    /// Circuit average of `E_m[⟨M_z⟩]`.
    pub mz_bar: f64,
    pub mz_bar_se: f64,
    /// Unbiased variance over circuits of `(ΔM_z)²|_C`.
    pub var_q: f64,
    pub var_q_se: f64,
    /// `var_q` minus the mean per-circuit estimation noise.
    pub var_q_debiased: f64,
    /// Variance over circuits of `E_m[⟨M_z⟩]` (the circuit-fluctuation term).
    pub var_circuit: f64,
    /// Circuit average of `(ΔM_z)²|_C`.
    pub mean_quantum_var: f64,
    /// Fraction of circuits with `|(ΔM_z)²|_C| ≤ 1e−12`.
    pub zero_fraction: f64,
    pub n_circuits: usize,
    /// Shots per circuit (the minimum if they differ; 0 for exact).
    pub n_shots: u64,
}

pub fn ensemble_stats(circuits: &[CircuitStats], l: usize, p: f64, t: usize) -> Result<EnsembleStats> {
    let n = circuits.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("ensemble stats need ≥ 2 circuits, got {n}")));
    }
    let (backend, mode) = (circuits[0].backend, circuits[0].mode);
    if circuits.iter().any(|c| c.backend != backend || c.mode != mode) {
        return Err(Error::Parameter("mixed backends or estimator modes in one ensemble".into()));
    }
    let mz: Vec<f64> = circuits.iter().map(|c| c.mz_mean).collect();
    let qv: Vec<f64> = circuits.iter().map(|c| c.quantum_var).collect();
    let noise: Vec<f64> = circuits.iter().map(|c| c.quantum_var_noise).collect();
    let var_q = variance(&qv);
    let mean_noise = if noise.iter().all(|x| x.is_finite()) { mean(&noise) } else { f64::NAN };
    Ok(EnsembleStats {
        backend,
        mode,
        l,
        p,
        t,
        mz_bar: mean(&mz),
        mz_bar_se: jackknife_se(&mz, mean),
        var_q,
        var_q_se: jackknife_se(&qv, variance),
        var_q_debiased: var_q - mean_noise,
        var_circuit: variance(&mz),
        mean_quantum_var: mean(&qv),
        zero_fraction: zero_fraction(circuits),
        n_circuits: n,
        n_shots: circuits.iter().map(|c| c.n_shots).min().unwrap_or(0),
    })
}

pub fn zero_fraction(circuits: &[CircuitStats]) -> f64 {
    circuits.iter().filter(|c| c.is_zero_fluctuation()).count() as f64 / circuits.len() as f64
}

/// Plug-in split of the pooled shot variance `σ²[M_z]` into circuit and
/// quantum parts, weighting circuits by shot count:
/// `σ² = Σ w_C (μ_C − μ)² + Σ w_C (E_C[M²] − μ_C²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub total: f64,
    pub circuit: f64,
    pub quantum: f64,
}

pub fn decomposition(circuits: &[CircuitStats]) -> Result<Decomposition> {
    let w_total: f64 = circuits.iter().map(|c| c.n_shots as f64).sum();
    if circuits.is_empty() || w_total == 0.0 {
        return Err(Error::InsufficientData("decomposition needs sampled circuits".into()));
    }
    let w = |c: &CircuitStats| c.n_shots as f64 / w_total;
    let grand: f64 = circuits.iter().map(|c| w(c) * c.mz_mean).sum();
    let second: f64 = circuits.iter().map(|c| w(c) * c.mz_second).sum();
    Ok(Decomposition {
        total: second - grand * grand,
        circuit: circuits.iter().map(|c| w(c) * (c.mz_mean - grand).powi(2)).sum(),
        quantum: circuits.iter().map(|c| w(c) * (c.mz_second - c.mz_mean * c.mz_mean)).sum(),
    })
}
