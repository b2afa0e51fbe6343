//! Random circuit realizations of the adaptive Bernoulli model.
//!
//! A realization is a frozen list of operations: at each step either a
//! two-qubit scrambling gate on `(i, i+1)` (after which the walker moves
//! right) or a measure-and-reset control on `i` (after which it moves left).
//! Realizations are independent of any dynamics backend.

mod gates;
mod serialize;

pub use gates::{
    approx_haar_gate, cz, euler_rotation, haar_unitary, haar_unitary_2, haar_unitary_dyn, kron2,
    rx, rz, unitarity_defect, GateSpec, Mat2, Mat4, C64, N_ANGLES,
};
pub use serialize::{
    deserialize_circuit, deserialize_circuit_json, serialize_circuit, serialize_circuit_json,
    FORMAT_VERSION,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::seed::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    ApproxHaarCz,
    ExactHaar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub l: usize,
    pub p: f64,
    pub t_max: usize,
    pub boundary: Boundary,
    pub ensemble: Ensemble,
    pub master_seed: u64,
    pub initial_position: usize,
}

/// Steady-state horizon `L²/2`, at least one step.
pub fn default_t_max(l: usize) -> usize {
    (l * l / 2).max(1)
}

impl CircuitParams {
    /// Periodic chain, exact-Haar gates, `t_max = L²/2`, walker starting at 0.
    pub fn new(l: usize, p: f64) -> Self {
        CircuitParams {
            l,
            p,
            t_max: default_t_max(l),
            boundary: Boundary::Periodic,
            ensemble: Ensemble::ExactHaar,
            master_seed: 0,
            initial_position: 0,
        }
    }

    pub fn with_t_max(mut self, t_max: usize) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_ensemble(mut self, ensemble: Ensemble) -> Self {
        self.ensemble = ensemble;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_initial_position(mut self, i: usize) -> Self {
        self.initial_position = i;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return param_err(format!("L = {} but at least 2 qubits are required", self.l));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return param_err(format!("control probability p = {} outside [0, 1]", self.p));
        }
        if self.t_max < 1 {
            return param_err("t_max must be at least 1");
        }
        if self.initial_position >= self.l {
            return param_err(format!(
                "initial position {} outside [0, {})",
                self.initial_position, self.l
            ));
        }
        Ok(())
    }

    /// Second site touched by a scrambling gate at `site`. Always the right
    /// neighbour modulo `L`; under open boundaries the wrap-around pair carries
    /// no entangling gate.
    pub fn partner(&self, site: usize) -> usize {
        (site + 1) % self.l
    }

    /// Whether the gate at `site` may entangle its two qubits.
    pub fn coupled(&self, site: usize) -> bool {
        !(self.boundary == Boundary::Open && site == self.l - 1)
    }

    /// Walker position after an operation at `site`.
    pub fn next_position(&self, site: usize, kind: OpKind) -> usize {
        let l = self.l;
        match (self.boundary, kind) {
            (Boundary::Periodic, OpKind::Chaotic) => (site + 1) % l,
            (Boundary::Periodic, OpKind::Control) => (site + l - 1) % l,
            (Boundary::Open, OpKind::Chaotic) => (site + 1).min(l - 1),
            (Boundary::Open, OpKind::Control) => site.saturating_sub(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Chaotic,
    Control,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOp {
    /// Scrambling gate on `(site, site + 1 mod L)`.
    Chaotic { site: usize, gate: GateSpec },
    /// Measure `site` in Z and flip it back to |0⟩ on outcome |1⟩.
    Control { site: usize },
}

impl StepOp {
    pub fn kind(&self) -> OpKind {
        match self {
            StepOp::Chaotic { .. } => OpKind::Chaotic,
            StepOp::Control { .. } => OpKind::Control,
        }
    }

    pub fn site(&self) -> usize {
        match self {
            StepOp::Chaotic { site, .. } | StepOp::Control { site } => *site,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitRealization {
    pub params: CircuitParams,
    pub steps: Vec<StepOp>,
    pub circuit_index: u64,
}

impl CircuitRealization {
    pub fn l(&self) -> usize {
        self.params.l
    }

    pub fn control_count(&self) -> usize {
        self.steps.iter().filter(|s| s.kind() == OpKind::Control).count()
    }

    /// Checks that positions follow the walk rule and gates match the
    /// boundary. Used when replaying or loading circuits.
    pub fn check_walk(&self) -> Result<()> {
        let params = &self.params;
        if self.steps.len() != params.t_max {
            return param_err(format!(
                "circuit has {} steps, expected t_max = {}",
                self.steps.len(),
                params.t_max
            ));
        }
        let mut pos = params.initial_position;
        for (k, step) in self.steps.iter().enumerate() {
            if step.site() != pos {
                return param_err(format!(
                    "step {k} acts on site {} but the walker is at {pos}",
                    step.site()
                ));
            }
            if let StepOp::Chaotic {
                gate: GateSpec::ApproxHaarCz { cz, .. },
                site,
            } = step
            {
                if *cz != params.coupled(*site) {
                    return param_err(format!("step {k}: CZ flag inconsistent with boundary"));
                }
            }
            pos = params.next_position(pos, step.kind());
        }
        Ok(())
    }
}

fn sample_gate<R: Rng + ?Sized>(params: &CircuitParams, site: usize, rng: &mut R) -> GateSpec {
    let coupled = params.coupled(site);
    match params.ensemble {
        Ensemble::ApproxHaarCz => GateSpec::sample_approx(rng, coupled),
        Ensemble::ExactHaar if coupled => GateSpec::Matrix(Box::new(haar_unitary(rng))),
        Ensemble::ExactHaar => {
            // no coupler across the open edge: independent single-qubit Haar rotations
            let a = haar_unitary_2(rng);
            let b = haar_unitary_2(rng);
            GateSpec::Matrix(Box::new(kron2(&a, &b)))
        }
    }
}

/// Draws a realization; fully determined by `(params.master_seed, circuit_index)`.
pub fn sample_circuit(params: &CircuitParams, circuit_index: u64) -> Result<CircuitRealization> {
    params.validate()?;
    let mut rng = rng_for(params.master_seed, &[stream::CIRCUIT, circuit_index]);
    let mut steps = Vec::with_capacity(params.t_max);
    let mut pos = params.initial_position;
    for _ in 0..params.t_max {
        // draw the kind unconditionally so that p=0 and p=1 consume the same stream
        let control = rng.random::<f64>() < params.p;
        let step = if control {
            StepOp::Control { site: pos }
        } else {
            StepOp::Chaotic {
                site: pos,
                gate: sample_gate(params, pos, &mut rng),
            }
        };
        pos = params.next_position(pos, step.kind());
        steps.push(step);
    }
    Ok(CircuitRealization {
        params: params.clone(),
        steps,
        circuit_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sites(c: &CircuitRealization) -> Vec<usize> {
        c.steps.iter().map(StepOp::site).collect()
    }

    #[test]
    fn all_control_walks_left() {
        let params = CircuitParams::new(4, 1.0).with_t_max(3);
        let c = sample_circuit(&params, 0).unwrap();
        assert!(c.steps.iter().all(|s| s.kind() == OpKind::Control));
        assert_eq!(sites(&c), vec![0, 3, 2]);
    }

    #[test]
    fn all_chaotic_walks_right() {
        let params = CircuitParams::new(4, 0.0).with_t_max(3);
        let c = sample_circuit(&params, 0).unwrap();
        assert!(c.steps.iter().all(|s| s.kind() == OpKind::Chaotic));
        assert_eq!(sites(&c), vec![0, 1, 2]);
    }

    #[test]
    fn open_boundary_clamps_and_drops_cz() {
        let params = CircuitParams::new(3, 0.0)
            .with_t_max(5)
            .with_boundary(Boundary::Open)
            .with_ensemble(Ensemble::ApproxHaarCz);
        let c = sample_circuit(&params, 1).unwrap();
        assert_eq!(sites(&c), vec![0, 1, 2, 2, 2]);
        for s in &c.steps {
            if let StepOp::Chaotic { site, gate: GateSpec::ApproxHaarCz { cz, .. } } = s {
                assert_eq!(*cz, *site != 2);
            }
        }
        c.check_walk().unwrap();

        let params = CircuitParams::new(3, 1.0)
            .with_t_max(3)
            .with_boundary(Boundary::Open)
            .with_initial_position(1);
        let c = sample_circuit(&params, 0).unwrap();
        assert_eq!(sites(&c), vec![1, 0, 0]);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(sample_circuit(&CircuitParams::new(1, 0.5), 0).is_err());
        assert!(sample_circuit(&CircuitParams::new(4, 1.5), 0).is_err());
        assert!(sample_circuit(&CircuitParams::new(4, -0.1), 0).is_err());
        assert!(sample_circuit(&CircuitParams::new(4, 0.5).with_t_max(0), 0).is_err());
        assert!(sample_circuit(&CircuitParams::new(4, 0.5).with_initial_position(4), 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_index() {
        let params = CircuitParams::new(6, 0.4).with_seed(99);
        let a = sample_circuit(&params, 3).unwrap();
        let b = sample_circuit(&params, 3).unwrap();
        let c = sample_circuit(&params, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn control_fraction_matches_binomial() {
        // 10^5 circuits × 100 steps at p = 0.5
        let params = CircuitParams::new(4, 0.5)
            .with_t_max(100)
            .with_seed(2024)
            .with_ensemble(Ensemble::ApproxHaarCz);
        let n_circuits = 100_000u64;
        let controls: usize = (0..n_circuits)
            .map(|k| sample_circuit(&params, k).unwrap().control_count())
            .sum();
        let n = (n_circuits * 100) as f64;
        let sigma = (n * 0.25).sqrt();
        assert!((controls as f64 - 0.5 * n).abs() < 3.0 * sigma);
    }
}
