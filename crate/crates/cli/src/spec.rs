//! Sweep specification: the JSON config of a `(backend, L, p)` grid run.

use std::path::{Path, PathBuf};

use bernoulli_core::circuit::{default_t_max, Boundary, CircuitParams, Ensemble};
use bernoulli_core::classical::NoiseParams;
use bernoulli_core::observables::EstimatorMode;
use bernoulli_core::runner::{InitialState, PointConfig};
use bernoulli_core::seed::{derive_seed, stream};
use bernoulli_core::sv::check_capacity;
use bernoulli_core::Backend;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{input_err, json_err, io_err, Result};

pub const DEFAULT_CIRCUITS: usize = 50;
pub const DEFAULT_CLASSICAL_SHOTS: usize = 10_000;
pub const DEFAULT_STATEVECTOR_SHOTS: usize = 1_000;
pub const DEFAULT_WORDS: usize = 1_000;

/// Number of hex digits of the spec hash used to name the run directory.
const RUN_DIR_DIGITS: usize = 16;

/// Circuit depth as a function of the system size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TMaxRule {
    /// `L²/2`, the steady-state horizon.
    #[default]
    HalfSquare,
    Square,
    /// `5L`, the experimental horizon.
    FiveL,
    Fixed(usize),
}

impl TMaxRule {
    pub fn resolve(self, l: usize) -> usize {
        match self {
            TMaxRule::HalfSquare => default_t_max(l),
            TMaxRule::Square => l * l,
            TMaxRule::FiveL => 5 * l,
            TMaxRule::Fixed(t) => t,
        }
    }
}

/// What each task records besides the ensemble statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probes {
    #[serde(default = "default_mode")]
    pub mode: EstimatorMode,
    /// Exact per-step time series (first-moment backends only).
    #[serde(default)]
    pub time_series: bool,
}

fn default_mode() -> EstimatorMode {
    EstimatorMode::Expectation
}

impl Default for Probes {
    fn default() -> Self {
        Probes {
            mode: default_mode(),
            time_series: false,
        }
    }
}

fn default_circuits() -> usize {
    DEFAULT_CIRCUITS
}

fn default_ensemble() -> Ensemble {
    Ensemble::ExactHaar
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

fn default_output() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub backend: Backend,
    pub sizes: Vec<usize>,
    pub ps: Vec<f64>,
    #[serde(default)]
    pub t_max: TMaxRule,
    #[serde(default = "default_circuits")]
    pub n_circuits: usize,
    /// Defaults to 10⁴ on the classical backends and 10³ on the statevector.
    #[serde(default)]
    pub n_shots: Option<usize>,
    /// Word trajectories per circuit (replica backend only).
    #[serde(default)]
    pub n_words: Option<usize>,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub probes: Probes,
    #[serde(default = "default_ensemble")]
    pub ensemble: Ensemble,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub initial: InitialState,
    /// Parent of the `runs/` tree. Not part of the spec hash.
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

/// One `(L, p)` point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: String,
    pub l: usize,
    pub p: f64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(backend: Backend, sizes: Vec<usize>, ps: Vec<f64>) -> Self {
        SweepSpec {
            backend,
            sizes,
            ps,
            t_max: TMaxRule::default(),
            n_circuits: DEFAULT_CIRCUITS,
            n_shots: None,
            n_words: None,
            noise: NoiseParams::NONE,
            master_seed: 0,
            probes: Probes::default(),
            ensemble: default_ensemble(),
            boundary: default_boundary(),
            initial: InitialState::Default,
            output_dir: default_output(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(json_err(path))
    }

    pub fn shots(&self) -> usize {
        self.n_shots.unwrap_or(match self.backend {
            Backend::Statevector => DEFAULT_STATEVECTOR_SHOTS,
            _ => DEFAULT_CLASSICAL_SHOTS,
        })
    }

    pub fn words(&self) -> usize {
        self.n_words.unwrap_or(DEFAULT_WORDS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.ps.is_empty() {
            return input_err("a sweep needs at least one size and one p value");
        }
        if self.n_circuits < 2 {
            return input_err("n_circuits must be ≥ 2");
        }
        if self.backend == Backend::Statevector {
            for &l in &self.sizes {
                check_capacity(l)?;
            }
        }
        if self.probes.time_series && !matches!(self.backend, Backend::Statmech1 | Backend::Statmech1Noisy) {
            return input_err("time series are recorded by the first-moment backends only");
        }
        if self.backend == Backend::Statmech2 {
            if self.words() == 0 {
                return input_err("n_words must be ≥ 1");
            }
            if !self.noise.is_noiseless() {
                return input_err("the replica backend takes no noise parameters");
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for task in self.tasks() {
            if !ids.insert(task.id.clone()) {
                return input_err(format!("duplicate grid point {}", task.id));
            }
            let params = self.circuit_params(&task);
            if params.t_max == 0 {
                return input_err("t_max must be ≥ 1");
            }
            match self.backend {
                Backend::Statmech2 => params.validate()?,
                _ => self.point_config(&task).validate()?,
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the spec without its output directory.
    pub fn hash(&self) -> Result<String> {
        let canonical = SweepSpec {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).map_err(|e| crate::error::CliError::Core(e.into()))?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn run_dir(&self) -> Result<PathBuf> {
        Ok(self.output_dir.join("runs").join(&self.hash()?[..RUN_DIR_DIGITS]))
    }

    /// Grid points in size-major order. Task seeds depend on `(L, p)` only,
    /// not on their position in the grid.
    pub fn tasks(&self) -> Vec<Task> {
        self.sizes
            .iter()
            .flat_map(|&l| {
                self.ps.iter().map(move |&p| Task {
                    id: format!("L{l}_p{p}"),
                    l,
                    p,
                    seed: derive_seed(self.master_seed, &[stream::TASK, l as u64, p.to_bits()]),
                })
            })
            .collect()
    }

    pub fn circuit_params(&self, task: &Task) -> CircuitParams {
        CircuitParams::new(task.l, task.p)
            .with_t_max(self.t_max.resolve(task.l))
            .with_seed(task.seed)
            .with_ensemble(self.ensemble)
            .with_boundary(self.boundary)
    }

    pub fn point_config(&self, task: &Task) -> PointConfig {
        PointConfig::new(self.backend, self.circuit_params(task), self.n_circuits, self.shots())
            .with_noise(self.noise)
            .with_mode(self.probes.mode)
            .with_initial(self.initial.clone())
    }
}
