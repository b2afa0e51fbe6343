//! Collapse fitting: multi-start Levenberg–Marquardt on the collapse
//! residuals, with standard errors from the scaled covariance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::collapse::{collapse_loss, collapse_residuals, Ansatz, CollapseInput, ScalingParams};
use super::lm::{levenberg_marquardt, numerical_jacobian, LmConfig, LmOutcome};
use crate::error::{Error, Result};

/// Which raw points enter the fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitWindow {
    All,
    /// `lo ≤ x ≤ hi`.
    Range { lo: f64, hi: f64 },
    /// `lo ≤ x ≤ factor·L`, e.g. early times `t ∈ [1, 0.6 L]`.
    SizeScaled { lo: f64, factor: f64 },
}

impl FitWindow {
    pub fn apply(&self, data: &CollapseInput) -> CollapseInput {
        match *self {
            FitWindow::All => data.clone(),
            FitWindow::Range { lo, hi } => data.window(lo, hi),
            FitWindow::SizeScaled { lo, factor } => data.filter(|p| p.x >= lo && p.x <= factor * p.l as f64),
        }
    }
}

/// Free/fixed flags in the order `(p_c, ν, β, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeParams(pub [bool; 4]);

impl FreeParams {
    /// `p_c`, `ν`, `β` free.
    pub const STATIC: FreeParams = FreeParams([true, true, true, false]);
    /// `p_c`, `ν` free with `β` fixed (e.g. to 0 for the magnetization).
    pub const STATIC_FIXED_BETA: FreeParams = FreeParams([true, true, false, false]);
    /// `β`, `z` free with `ν` fixed.
    pub const DYNAMIC: FreeParams = FreeParams([false, false, true, true]);
    /// Only `z` free.
    pub const DYNAMIC_FIXED_BETA: FreeParams = FreeParams([false, false, false, true]);

    fn count(&self) -> usize {
        self.0.iter().filter(|&&f| f).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamErrors {
    pub p_c: Option<f64>,
    pub nu: Option<f64>,
    pub beta: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub ansatz: Ansatz,
    pub window: FitWindow,
    pub params: ScalingParams,
    /// Standard errors of the free parameters; `None` when fixed.
    pub errors: ParamErrors,
    /// Collapse loss at the optimum.
    pub chi2_nu: f64,
    pub n_points: usize,
    pub beta_power: f64,
    pub iterations: usize,
    pub starts: usize,
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub window: FitWindow,
    pub free: FreeParams,
    pub lm: LmConfig,
    /// Run the 3^k start grid around the guess (otherwise a single start).
    pub multi_start: bool,
}

impl FitConfig {
    pub fn new(window: FitWindow, free: FreeParams) -> Self {
        FitConfig {
            window,
            free,
            lm: LmConfig::default(),
            multi_start: true,
        }
    }
}

/// Coarser finite-difference steps run before the configured one. The
/// collapse loss has a kink wherever two rescaled points swap order, so a
/// Jacobian at the fine step only sees one smooth patch and LM creeps along
/// the kinks; the coarse passes smooth over them and the final pass at the
/// configured step refines the optimum and provides the covariance.
const JACOBIAN_CONTINUATION: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Finite-difference step of the Jacobian behind the reported covariance.
/// At the configured fine step the Jacobian resolves individual kinks and
/// the implied errors collapse towards zero; this step averages over them.
const COVARIANCE_STEP: f64 = 1e-3;

/// LM from `x0` through the Jacobian-step continuation.
fn continued_lm<F>(f: F, x0: &[f64], cfg: &LmConfig) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut iterations = 0;
    for step in JACOBIAN_CONTINUATION.into_iter().filter(|&s| s > cfg.jacobian_step) {
        let coarse = levenberg_marquardt(&f, &x, &LmConfig { jacobian_step: step, ..*cfg })?;
        iterations += coarse.iterations;
        x = coarse.params;
    }
    let mut out = levenberg_marquardt(&f, &x, cfg)?;
    out.iterations += iterations;
    Ok(out)
}

/// Start grid: `p_c ± 0.02`, `ν` and `z` scaled by `{0.8, 1, 1.25}`, `β ± 0.2`.
fn start_grid(guess: &ScalingParams, free: FreeParams, multi: bool) -> Vec<[f64; 4]> {
    let base = guess.to_array();
    let options = |i: usize| -> Vec<f64> {
        if !free.0[i] || !multi {
            return vec![base[i]];
        }
        match i {
            0 => vec![base[0] - 0.02, base[0], base[0] + 0.02],
            2 => vec![base[2] - 0.2, base[2], base[2] + 0.2],
            _ => vec![base[i] * 0.8, base[i], base[i] * 1.25],
        }
    };
    let mut starts = vec![base];
    for i in 0..4 {
        let opts = options(i);
        starts = starts
            .iter()
            .flat_map(|s| {
                opts.iter().map(move |&v| {
                    let mut t = *s;
                    t[i] = v;
                    t
                })
            })
            .collect();
    }
    starts
}

pub fn fit_collapse(data: &CollapseInput, guess: &ScalingParams, cfg: &FitConfig) -> Result<FitResult> {
    let windowed = cfg.window.apply(data);
    let k = cfg.free.count();
    if k == 0 {
        return Err(Error::Parameter("no free parameters".into()));
    }
    if windowed.distinct_sizes() < 2 {
        return Err(Error::InsufficientData(format!(
            "collapse needs ≥ 2 system sizes in the window, got {}",
            windowed.distinct_sizes()
        )));
    }
    if windowed.points.len() < 3 || windowed.points.len() <= k {
        return Err(Error::InsufficientData(format!(
            "{} points in the window for {k} free parameters",
            windowed.points.len()
        )));
    }
    let free_idx: Vec<usize> = (0..4).filter(|&i| cfg.free.0[i]).collect();
    let embed = |base: &[f64; 4], v: &[f64]| {
        let mut full = *base;
        for (&i, &x) in free_idx.iter().zip(v) {
            full[i] = x;
        }
        ScalingParams::from_array(full)
    };
    let starts = start_grid(guess, cfg.free, cfg.multi_start);
    let runs: Vec<(usize, Result<LmOutcome>)> = starts
        .par_iter()
        .enumerate()
        .map(|(si, s)| {
            let f = |v: &[f64]| collapse_residuals(&embed(s, v), &windowed);
            let x0: Vec<f64> = free_idx.iter().map(|&i| s[i]).collect();
            (si, continued_lm(f, &x0, &cfg.lm))
        })
        .collect();
    let mut best: Option<(usize, LmOutcome)> = None;
    let mut best_any: Option<(usize, LmOutcome)> = None;
    for (si, r) in runs {
        let Ok(out) = r else { continue };
        let better = |cur: &Option<(usize, LmOutcome)>| cur.as_ref().is_none_or(|(_, b)| out.cost < b.cost);
        if better(&best_any) {
            best_any = Some((si, out.clone()));
        }
        if out.converged && better(&best) {
            best = Some((si, out));
        }
    }
    let Some((si, out)) = best else {
        return Err(match best_any {
            Some((_, o)) => Error::FitFailure {
                iterations: o.iterations,
                best_loss: o.cost / windowed.points.len() as f64,
                reason: format!("no start converged; best parameters {:?}", o.params),
            },
            None => Error::FitFailure {
                iterations: 0,
                best_loss: f64::INFINITY,
                reason: "every start failed to evaluate".into(),
            },
        });
    };
    let params = embed(&starts[si], &out.params);
    let f = |v: &[f64]| collapse_residuals(&embed(&starts[si], v), &windowed);
    let smooth = LmOutcome {
        jacobian: numerical_jacobian(&f, &out.params, &out.residuals, COVARIANCE_STEP)?,
        ..out.clone()
    };
    let cov = smooth.covariance()?;
    let mut errs = [None; 4];
    for (j, &i) in free_idx.iter().enumerate() {
        let v = cov[(j, j)];
        if !(v > 0.0) {
            return Err(Error::FitFailure {
                iterations: out.iterations,
                best_loss: out.cost / windowed.points.len() as f64,
                reason: format!("non-positive variance for {}", ScalingParams::NAMES[i]),
            });
        }
        errs[i] = Some(v.sqrt());
    }
    Ok(FitResult {
        ansatz: windowed.ansatz,
        window: cfg.window,
        params,
        errors: ParamErrors {
            p_c: errs[0],
            nu: errs[1],
            beta: errs[2],
            z: errs[3],
        },
        chi2_nu: collapse_loss(&params, &windowed)?,
        n_points: windowed.points.len(),
        beta_power: windowed.beta_power,
        iterations: out.iterations,
        starts: starts.len(),
    })
}
