//! KL divergence between distributions that mix an atom at zero with a
//! continuous part:
//!
//! `D = w_p log(w_p/w_q) + (1−w_p) log((1−w_p)/(1−w_q)) + (1−w_p) D(p_c‖q_c)`
//!
//! The continuous term is estimated with Gaussian kernel densities
//! (Silverman bandwidth) as the sample average of `log p̂(x)/q̂(x)` over the
//! continuous `p` samples; uncertainty comes from bootstrap resampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};
use crate::stats::quantile_sorted;

/// Samples with `|x|` below this are atoms at zero.
pub const ATOM_TOLERANCE: f64 = 1e-12;

/// Above this many kernel evaluations per density, kernels are binned onto a grid.
const EXACT_KDE_LIMIT: usize = 4_000_000;
const GRID_POINTS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlConfig {
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Add one pseudo-observation to each of the atom/continuous counts.
    pub laplace: bool,
}

impl Default for KlConfig {
    fn default() -> Self {
        KlConfig {
            n_bootstrap: 100,
            seed: 0,
            laplace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlResult {
    /// Estimate on the full samples.
    pub kl: f64,
    /// Mean of the bootstrap replicates.
    pub kl_mean: f64,
    /// Standard deviation of the bootstrap replicates.
    pub kl_stderr: f64,
    /// `kl_mean ± 1.96 · kl_stderr`.
    pub ci_low: f64,
    pub ci_high: f64,
    /// The point estimate diverges (mass of `p` where `q` has none).
    pub infinite: bool,
    /// Fraction of bootstrap replicates that diverged.
    pub infinite_fraction: f64,
    pub w_p: f64,
    pub w_q: f64,
    pub n_p: usize,
    pub n_q: usize,
}

impl KlResult {
    pub fn ci_contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }
}

/// Silverman's rule `0.9 · min(sd, IQR/1.34) · n^{−1/5}`, falling back to
/// the standard deviation when the IQR vanishes and to a tiny scale-aware
/// width for constant data.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        (mean.abs() * 1e-3).max(1e-12)
    }
}

/// Gaussian KDE evaluated in log space.
pub struct Kde {
    sorted: Vec<f64>,
    h: f64,
    grid: Option<Grid>,
}

struct Grid {
    x0: f64,
    dx: f64,
    density: Vec<f64>,
    floor: f64,
}

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

impl Kde {
    pub fn new(samples: &[f64], n_eval: usize) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let h = silverman_bandwidth(&sorted);
        let mut kde = Kde { sorted, h, grid: None };
        if kde.sorted.len().saturating_mul(n_eval) > EXACT_KDE_LIMIT {
            kde.grid = Some(kde.build_grid());
        }
        kde
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    /// Linear binning onto a grid and convolution with the kernel truncated
    /// at ±8h. Points where the binned density is tiny fall back to the
    /// exact evaluation.
    fn build_grid(&self) -> Grid {
        let (lo, hi) = (self.sorted[0] - 8.0 * self.h, self.sorted[self.sorted.len() - 1] + 8.0 * self.h);
        let dx = (hi - lo) / (GRID_POINTS - 1) as f64;
        let mut counts = vec![0.0; GRID_POINTS];
        for &x in &self.sorted {
            let pos = (x - lo) / dx;
            let i = (pos.floor() as usize).min(GRID_POINTS - 2);
            let frac = pos - i as f64;
            counts[i] += 1.0 - frac;
            counts[i + 1] += frac;
        }
        let half = ((8.0 * self.h / dx).ceil() as usize).min(GRID_POINTS);
        let norm = 1.0 / (self.sorted.len() as f64 * self.h * (2.0 * std::f64::consts::PI).sqrt());
        let kernel: Vec<f64> = (0..=half)
            .map(|k| (-0.5 * (k as f64 * dx / self.h).powi(2)).exp() * norm)
            .collect();
        let mut density = vec![0.0; GRID_POINTS];
        for (j, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let a = j.saturating_sub(half);
            let b = (j + half).min(GRID_POINTS - 1);
            for (i, d) in density.iter_mut().enumerate().take(b + 1).skip(a) {
                *d += c * kernel[i.abs_diff(j)];
            }
        }
        let peak = density.iter().cloned().fold(0.0, f64::max);
        Grid {
            x0: lo,
            dx,
            density,
            floor: peak * 1e-8,
        }
    }

    /// Exact `log p̂(x)`: log-sum-exp over samples within the nearest
    /// distance plus 9 bandwidths (the omitted terms are below e^{−40}
    /// relative to the nearest one).
    pub fn log_density_exact(&self, x: f64) -> f64 {
        let s = &self.sorted;
        let idx = s.partition_point(|&v| v < x);
        let nearest = [idx.checked_sub(1), (idx < s.len()).then_some(idx)]
            .into_iter()
            .flatten()
            .map(|i| (s[i] - x).abs())
            .fold(f64::INFINITY, f64::min);
        let reach = nearest + 9.0 * self.h;
        let a = s.partition_point(|&v| v < x - reach);
        let b = s.partition_point(|&v| v <= x + reach);
        let max_term = -0.5 * (nearest / self.h).powi(2);
        let sum: f64 = s[a..b]
            .iter()
            .map(|&v| (-0.5 * ((v - x) / self.h).powi(2) - max_term).exp())
            .sum();
        max_term + sum.ln() - (s.len() as f64).ln() - self.h.ln() - LOG_SQRT_2PI
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if let Some(g) = &self.grid {
            let pos = (x - g.x0) / g.dx;
            if pos >= 0.0 && pos <= (GRID_POINTS - 1) as f64 {
                let i = (pos.floor() as usize).min(GRID_POINTS - 2);
                let f = pos - i as f64;
                let d = g.density[i] * (1.0 - f) + g.density[i + 1] * f;
                if d > g.floor {
                    return d.ln();
                }
            }
        }
        self.log_density_exact(x)
    }
}

fn split(xs: &[f64]) -> (usize, Vec<f64>) {
    let cont: Vec<f64> = xs.iter().copied().filter(|x| x.abs() >= ATOM_TOLERANCE).collect();
    (xs.len() - cont.len(), cont)
}

fn xlogy_ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).ln()
    }
}

/// Point estimate of the mixture KL divergence.
pub fn kl_point(p: &[f64], q: &[f64], laplace: bool) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InsufficientData("KL divergence needs non-empty sample sets".into()));
    }
    let (zp, cp) = split(p);
    let (zq, cq) = split(q);
    let weight = |zeros: usize, n: usize| {
        if laplace {
            (zeros as f64 + 1.0) / (n as f64 + 2.0)
        } else {
            zeros as f64 / n as f64
        }
    };
    let (w_p, w_q) = (weight(zp, p.len()), weight(zq, q.len()));
    let atoms = xlogy_ratio(w_p, w_q) + xlogy_ratio(1.0 - w_p, 1.0 - w_q);
    if cp.is_empty() {
        return Ok(atoms);
    }
    if cq.is_empty() {
        return Ok(f64::INFINITY);
    }
    let kp = Kde::new(&cp, cp.len());
    let kq = Kde::new(&cq, cp.len());
    let cont = cp.iter().map(|&x| kp.log_density(x) - kq.log_density(x)).sum::<f64>() / cp.len() as f64;
    Ok(atoms + (1.0 - w_p) * cont)
}

pub fn kl_divergence(p: &[f64], q: &[f64], cfg: &KlConfig) -> Result<KlResult> {
    let kl = kl_point(p, q, cfg.laplace)?;
    let replicates: Vec<f64> = (0..cfg.n_bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(cfg.seed, &[stream::BOOTSTRAP, b]);
            let rp: Vec<f64> = (0..p.len()).map(|_| p[rng.random_range(0..p.len())]).collect();
            let rq: Vec<f64> = (0..q.len()).map(|_| q[rng.random_range(0..q.len())]).collect();
            kl_point(&rp, &rq, cfg.laplace)
        })
        .collect::<Result<_>>()?;
    let finite: Vec<f64> = replicates.iter().copied().filter(|x| x.is_finite()).collect();
    let infinite_fraction = if replicates.is_empty() {
        0.0
    } else {
        1.0 - finite.len() as f64 / replicates.len() as f64
    };
    let (kl_mean, kl_stderr) = if replicates.len() < 2 || infinite_fraction > 0.0 {
        (if replicates.is_empty() { kl } else { f64::INFINITY }, f64::INFINITY)
    } else {
        let n = finite.len() as f64;
        let m = finite.iter().sum::<f64>() / n;
        let sd = (finite.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (m, sd)
    };
    let (ci_low, ci_high) = if kl_stderr.is_finite() {
        (kl_mean - 1.96 * kl_stderr, kl_mean + 1.96 * kl_stderr)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    let (zp, _) = split(p);
    let (zq, _) = split(q);
    Ok(KlResult {
        kl,
        kl_mean,
        kl_stderr,
        ci_low,
        ci_high,
        infinite: kl.is_infinite(),
        infinite_fraction,
        w_p: zp as f64 / p.len() as f64,
        w_q: zq as f64 / q.len() as f64,
        n_p: p.len(),
        n_q: q.len(),
    })
}
