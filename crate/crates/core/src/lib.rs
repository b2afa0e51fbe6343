//! Simulation and analysis of the adaptive Bernoulli circuit: a chain of
//! qubits driven by random scrambling gates and measurement-based resets,
//! with exact quantum, classical Markov, and replica stat-mech backends.

pub mod analysis;
pub mod circuit;
pub mod classical;
pub mod error;
pub mod observables;
pub mod runner;
pub mod seed;
pub mod shot;
pub mod statmech2;
pub mod stats;
pub mod sv;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Dynamics used to evolve a circuit realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Dense statevector trajectories with Born-rule resets.
    Statevector,
    /// Markov chain on bitstrings with weights `|U_ij|²`.
    Dephasing,
    /// First-moment stat-mech model (uniform bits after each gate).
    Statmech1,
    /// First-moment model with depolarizing noise.
    Statmech1Noisy,
    /// Second-moment replica model (collision probability only).
    Statmech2,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Statevector => "statevector",
            Backend::Dephasing => "dephasing",
            Backend::Statmech1 => "statmech1",
            Backend::Statmech1Noisy => "statmech1-noisy",
            Backend::Statmech2 => "statmech2",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Backend::Statevector,
            Backend::Dephasing,
            Backend::Statmech1,
            Backend::Statmech1Noisy,
            Backend::Statmech2,
        ]
        .into_iter()
        .find(|b| b.name() == s)
        .ok_or_else(|| Error::Parameter(format!("unknown backend '{s}'")))
    }
}
