//! Fitting and statistics on top of the simulation outputs: scaling
//! collapse, KL divergence, frame potential and Lyapunov probes.

pub mod collapse;
pub mod fit;
pub mod frame;
pub mod kl;
pub mod lm;
pub mod lyapunov;

pub use collapse::{collapse_loss, collapse_residuals, Ansatz, CollapseInput, CollapsePoint, ScalingParams};
pub use fit::{fit_collapse, FitConfig, FitResult, FitWindow, FreeParams, ParamErrors};
pub use frame::{frame_potential, FramePotential};
pub use kl::{kl_divergence, KlConfig, KlResult};
pub use lm::{levenberg_marquardt, LmConfig, LmOutcome};
pub use lyapunov::{lyapunov_estimate, LyapunovEstimate};
