//! One-off diagnostics that do not belong to a sweep.

use bernoulli_core::analysis::{frame_potential, lyapunov_estimate};
use bernoulli_core::circuit::{CircuitParams, Ensemble};
use bernoulli_core::runner::entropy_profile;
use bernoulli_core::statmech2::{estimate_collision_probability, DEFAULT_REL_TOL};
use serde_json::{json, Value};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub enum Probe {
    /// `F_k` of a two-qubit gate ensemble.
    FramePotential { ensemble: Ensemble, k: u32, n_pairs: usize, seed: u64 },
    /// Separation growth rate of the control map.
    Lyapunov { p: f64, n_steps: usize, n_trajectories: usize, precision_bits: u32, seed: u64 },
    /// Replica-model collision probability `Σ_x p_x²`.
    Collision { params: CircuitParams, n_circuits: usize, n_words: usize },
    /// Late-time half-chain entanglement entropy (bits).
    Entropy { params: CircuitParams, n_circuits: usize, n_shots: usize },
}

/// Runs the probe and returns its result as JSON.
pub fn cmd_probe(probe: &Probe) -> Result<Value> {
    Ok(match probe {
        Probe::FramePotential { ensemble, k, n_pairs, seed } => {
            let f = frame_potential(*ensemble, *k, *n_pairs, *seed)?;
            json!({ "probe": "frame-potential", "ensemble": ensemble, "result": f })
        }
        Probe::Lyapunov { p, n_steps, n_trajectories, precision_bits, seed } => {
            let e = lyapunov_estimate(*p, *n_steps, *n_trajectories, *precision_bits, *seed)?;
            json!({
                "probe": "lyapunov",
                "p": p,
                "result": e,
                "lambda_over_log2": e.lambda_over_log2(),
                "stderr_over_log2": e.stderr_over_log2(),
            })
        }
        Probe::Collision { params, n_circuits, n_words } => {
            let c = estimate_collision_probability(params, *n_circuits, *n_words, DEFAULT_REL_TOL)?;
            json!({ "probe": "collision", "l": params.l, "p": params.p, "t_max": params.t_max, "result": c })
        }
        Probe::Entropy { params, n_circuits, n_shots } => {
            let e = entropy_profile(params, *n_circuits, *n_shots)?;
            json!({ "probe": "entropy", "t_max": params.t_max, "result": e })
        }
    })
}
