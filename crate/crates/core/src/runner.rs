//! Ensemble execution at one `(backend, L, p)` point: sample circuits, run
//! shots on the chosen backend and aggregate. Circuits run in parallel;
//! every circuit and shot draws from its own derived seed, so results do not
//! depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{sample_circuit, CircuitParams, CircuitRealization};
use crate::classical::{
    statmech1_exact, statmech1_exact_series, statmech1_final_marginals, statmech1_sample_final_mz,
    DephasingPlan, InitialBits, NoiseParams,
};
use crate::error::{param_err, Error, Result};
use crate::observables::{circuit_stats, ensemble_stats, CircuitStats, EnsembleStats, EstimatorMode};
use crate::seed::{derive_seed, rng_for, stream};
use crate::shot::ProbeConfig;
use crate::stats::{jackknife_spread, Moments};
use crate::sv::SvProgram;
use crate::Backend;

/// Initial state of every shot.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `|1…1⟩` on the statevector backend, uniform random bits on the
    /// classical ones.
    #[default]
    Default,
    /// Independent uniform bits, drawn per shot.
    Uniform,
    /// The same bitstring for every shot.
    Fixed(Vec<u8>),
}

impl InitialState {
    pub fn all_ones(l: usize) -> Self {
        InitialState::Fixed(vec![1; l])
    }

    /// Initialization of the classical backends.
    fn classical_bits(&self) -> InitialBits {
        match self {
            InitialState::Fixed(b) => InitialBits::Fixed(b.clone()),
            InitialState::Default | InitialState::Uniform => InitialBits::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    pub backend: Backend,
    pub circuit: CircuitParams,
    pub n_circuits: usize,
    /// Shots per circuit; 0 asks the first-moment backends for exact
    /// statistics.
    pub n_shots: usize,
    pub noise: NoiseParams,
    pub mode: EstimatorMode,
    pub initial: InitialState,
}

impl PointConfig {
    pub fn new(backend: Backend, circuit: CircuitParams, n_circuits: usize, n_shots: usize) -> Self {
        PointConfig {
            backend,
            circuit,
            n_circuits,
            n_shots,
            noise: NoiseParams::NONE,
            mode: EstimatorMode::Expectation,
            initial: InitialState::Default,
        }
    }

    pub fn with_noise(mut self, noise: NoiseParams) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_mode(mut self, mode: EstimatorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_initial(mut self, initial: InitialState) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        self.noise.validate()?;
        if self.n_circuits == 0 {
            return param_err("n_circuits must be ≥ 1");
        }
        match self.backend {
            Backend::Statmech2 => {
                return param_err("statmech2 estimates collision probabilities, not magnetization statistics")
            }
            Backend::Statmech1Noisy => {}
            _ if !self.noise.is_noiseless() => {
                return param_err(format!("backend {} does not take noise parameters", self.backend))
            }
            _ => {}
        }
        if self.n_shots == 0 && !matches!(self.backend, Backend::Statmech1 | Backend::Statmech1Noisy) {
            return param_err(format!("backend {} needs n_shots ≥ 2", self.backend));
        }
        if self.n_shots == 1 {
            return param_err("n_shots must be 0 (exact) or ≥ 2");
        }
        if let InitialState::Fixed(b) = &self.initial {
            InitialBits::Fixed(b.clone()).check(self.circuit.l)?;
        }
        Ok(())
    }

    pub fn shot_seed(&self, circuit_index: u64, shot: u64) -> u64 {
        derive_seed(self.circuit.master_seed, &[stream::SHOT, circuit_index, shot])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub circuits: Vec<CircuitStats>,
    pub ensemble: EnsembleStats,
}

fn statevector_initial(cfg: &PointConfig, circuit_index: u64, shot: u64) -> Vec<u8> {
    let l = cfg.circuit.l;
    match &cfg.initial {
        InitialState::Default => vec![1; l],
        InitialState::Fixed(b) => b.clone(),
        InitialState::Uniform => {
            let mut rng = rng_for(cfg.circuit.master_seed, &[stream::SHOT, circuit_index, shot, 1]);
            InitialBits::Uniform.draw(l, &mut rng)
        }
    }
}

/// Statistics of one circuit realization.
pub fn run_circuit(cfg: &PointConfig, c: &CircuitRealization) -> Result<CircuitStats> {
    let idx = c.circuit_index;
    let probes = match cfg.mode {
        EstimatorMode::Expectation => ProbeConfig::default(),
        EstimatorMode::Bitstring => ProbeConfig::default().with_final_bitstring(),
    };
    match cfg.backend {
        Backend::Statevector => {
            let prog = SvProgram::compile(c)?;
            let shots = (0..cfg.n_shots as u64)
                .map(|s| prog.run_shot(&statevector_initial(cfg, idx, s), cfg.shot_seed(idx, s), &probes))
                .collect::<Result<Vec<_>>>()?;
            circuit_stats(&shots, cfg.mode, idx, cfg.backend)
        }
        Backend::Dephasing => {
            let plan = DephasingPlan::compile(c)?;
            let initial = cfg.initial.classical_bits();
            let shots = (0..cfg.n_shots as u64)
                .map(|s| plan.run_shot(&initial, cfg.shot_seed(idx, s), &probes))
                .collect::<Result<Vec<_>>>()?;
            circuit_stats(&shots, cfg.mode, idx, cfg.backend)
        }
        Backend::Statmech1 | Backend::Statmech1Noisy => {
            let initial = cfg.initial.classical_bits();
            if cfg.n_shots == 0 {
                let e = statmech1_exact(c, &initial, &cfg.noise)?;
                return Ok(CircuitStats::exact(idx, cfg.backend, e.mz_mean, e.mz_quantum_var));
            }
            // final bits are independent given the circuit: sample them directly
            let marginals = statmech1_final_marginals(c, &initial, &cfg.noise)?;
            let mut rng = rng_for(cfg.circuit.master_seed, &[stream::SHOT, idx]);
            let xs = statmech1_sample_final_mz(&marginals, cfg.n_shots, &mut rng)?;
            let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
            CircuitStats::from_moments(idx, cfg.backend, cfg.mode, &xs, &ys)
        }
        Backend::Statmech2 => param_err("statmech2 has no per-circuit magnetization statistics"),
    }
}

/// Runs every circuit of the point and aggregates them.
pub fn run_point(cfg: &PointConfig) -> Result<PointResult> {
    cfg.validate()?;
    let circuits = (0..cfg.n_circuits as u64)
        .into_par_iter()
        .map(|i| run_circuit(cfg, &sample_circuit(&cfg.circuit, i)?))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = ensemble_stats(&circuits, cfg.circuit.l, cfg.circuit.p, cfg.circuit.t_max)?;
    Ok(PointResult { circuits, ensemble })
}

/// Ensemble time series of the first-moment model at one `(L, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: usize,
    pub mz_bar: f64,
    pub mz_bar_se: f64,
    /// Circuit average of `M_z(t) − M_z(0)`.
    pub delta_mz_bar: f64,
    pub delta_mz_se: f64,
    /// Variance over circuits of the exact `(ΔM_z)²|_C(t)`.
    pub var_q: f64,
    pub var_q_se: f64,
}

/// Exact (infinite-shot) per-circuit time series, averaged over
/// `n_circuits` circuits. Standard errors are jackknife over circuits.
pub fn statmech1_time_series(
    params: &CircuitParams,
    n_circuits: usize,
    initial: &InitialBits,
    noise: &NoiseParams,
) -> Result<Vec<SeriesPoint>> {
    params.validate()?;
    if n_circuits < 2 {
        return param_err("time series need ≥ 2 circuits");
    }
    let series: Vec<Vec<(f64, f64)>> = (0..n_circuits as u64)
        .into_par_iter()
        .map(|i| statmech1_exact_series(&sample_circuit(params, i)?, initial, noise))
        .collect::<Result<_>>()?;
    let n = n_circuits as f64;
    let out = (0..=params.t_max)
        .map(|t| {
            let mut mz = Moments::default();
            let mut dz = Moments::default();
            let mut qv = Moments::default();
            for s in &series {
                mz.push(s[t].0);
                dz.push(s[t].0 - s[0].0);
                qv.push(s[t].1);
            }
            let loo: Vec<f64> = series.iter().map(|s| qv.without(s[t].1).var()).collect();
            SeriesPoint {
                t,
                mz_bar: mz.mean,
                mz_bar_se: (mz.var() / n).sqrt(),
                delta_mz_bar: dz.mean,
                delta_mz_se: (dz.var() / n).sqrt(),
                var_q: qv.var(),
                var_q_se: jackknife_spread(&loo),
            }
        })
        .collect();
    Ok(out)
}

/// Late-time half-chain entanglement entropy of statevector trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub l: usize,
    pub p: f64,
    /// Mean entropy (bits) at the final step over circuits and shots.
    pub mean: f64,
    /// Standard error over circuit means.
    pub stderr: f64,
    pub n_circuits: usize,
    pub n_shots: usize,
}

pub fn entropy_profile(params: &CircuitParams, n_circuits: usize, n_shots: usize) -> Result<EntropyProfile> {
    params.validate()?;
    if n_circuits < 2 || n_shots == 0 {
        return param_err("entropy profile needs ≥ 2 circuits and ≥ 1 shot");
    }
    let probes = ProbeConfig {
        entropy_steps: vec![params.t_max],
        ..Default::default()
    };
    let initial = vec![1u8; params.l];
    let per_circuit: Vec<f64> = (0..n_circuits as u64)
        .into_par_iter()
        .map(|i| {
            let c = sample_circuit(params, i)?;
            let prog = SvProgram::compile(&c)?;
            let mut sum = 0.0;
            for s in 0..n_shots as u64 {
                let seed = derive_seed(params.master_seed, &[stream::PROBE, i, s]);
                let rec = prog.run_shot(&initial, seed, &probes)?;
                let (_, e) = rec
                    .entropy_series
                    .last()
                    .copied()
                    .ok_or_else(|| Error::Numerical("entropy probe not recorded".into()))?;
                sum += e;
            }
            Ok(sum / n_shots as f64)
        })
        .collect::<Result<_>>()?;
    let m = Moments::from_slice(&per_circuit);
    Ok(EntropyProfile {
        l: params.l,
        p: params.p,
        mean: m.mean,
        stderr: (m.var() / n_circuits as f64).sqrt(),
        n_circuits,
        n_shots,
    })
}

/// Per-circuit statistics of two backends on the same circuit realizations
/// (same circuit seeds and indices), e.g. for KL comparisons.
pub fn run_matched(a: &PointConfig, b: &PointConfig) -> Result<(PointResult, PointResult)> {
    if a.circuit != b.circuit || a.n_circuits != b.n_circuits {
        return param_err("matched runs need identical circuit parameters and counts");
    }
    Ok((run_point(a)?, run_point(b)?))
}
