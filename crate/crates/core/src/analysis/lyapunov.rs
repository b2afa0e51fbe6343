//! Lyapunov exponent of the stochastic competition between the Bernoulli
//! map `B(a) = 2a mod 1` and the control map `C(a) = a/2`.
//!
//! Reals in `[0, 1)` are `precision_bits`-bit fixed-point numbers stored in
//! the top bits of a `u128`. `B` is a left shift that feeds in a fresh random
//! bit (the digits below the working precision), shared by both members of a
//! pair; `C` is a right shift. The separation is the circular distance on
//! `[0, 1)`. Separations are kept inside a window well above the resolution
//! and well below saturation: a pair that leaves the window is re-seeded at
//! the middle of the window, so no counted step ever touches either limit.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::seed::{rng_for, stream};
use crate::stats::Moments;

/// Sub-path of the probe stream used by Lyapunov trajectories.
const LYAPUNOV_TAG: u64 = 0x1a9c;
/// Margin (in bits) between the counting window and the resolution or
/// saturation limits.
const MARGIN_BITS: u32 = 8;
pub const MIN_PRECISION_BITS: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean growth rate of the log-separation per step (natural log).
    pub lambda: f64,
    pub stderr: f64,
    /// Counted steps over all trajectories.
    pub valid_steps: u64,
    /// Re-seeds after the separation left the window.
    pub reseeds: u64,
}

impl LyapunovEstimate {
    pub fn lambda_over_log2(&self) -> f64 {
        self.lambda / std::f64::consts::LN_2
    }

    pub fn stderr_over_log2(&self) -> f64 {
        self.stderr / std::f64::consts::LN_2
    }
}

struct Fixed {
    /// Mask of the `precision_bits` significant bits.
    mask: u128,
    /// Unit in the last place.
    ulp: u128,
}

impl Fixed {
    fn new(bits: u32) -> Self {
        let ulp = 1u128 << (128 - bits);
        Fixed {
            mask: !(ulp - 1),
            ulp,
        }
    }

    fn bernoulli(&self, a: u128, fresh: bool) -> u128 {
        (a << 1) | if fresh { self.ulp } else { 0 }
    }

    fn control(&self, a: u128) -> u128 {
        (a >> 1) & self.mask
    }
}

fn circular_distance(a: u128, b: u128) -> u128 {
    let d = a.wrapping_sub(b);
    d.min(d.wrapping_neg())
}

/// `(Σ log-growth, counted steps, re-seeds)` for one trajectory.
fn trajectory(p: f64, n_steps: usize, bits: u32, seed: u64, index: u64) -> (f64, u64, u64) {
    let fx = Fixed::new(bits);
    let mut rng = rng_for(seed, &[stream::PROBE, LYAPUNOV_TAG, index]);
    // window of separations, in units of the ulp: [2^MARGIN, 2^(bits − MARGIN)]
    let lo = fx.ulp << MARGIN_BITS;
    let hi = 1u128 << (128 - MARGIN_BITS);
    let mid_shift = (128 - bits) + (bits / 2);
    let reseed = |rng: &mut crate::seed::SimRng| {
        let x = rng.random::<u128>() & fx.mask;
        (x, x.wrapping_add(1u128 << mid_shift))
    };
    let (mut x, mut y) = reseed(&mut rng);
    let (mut sum, mut counted, mut reseeds) = (0.0, 0u64, 0u64);
    for _ in 0..n_steps {
        let d0 = circular_distance(x, y);
        if rng.random::<f64>() < p {
            x = fx.control(x);
            y = fx.control(y);
        } else {
            let fresh = rng.random::<bool>();
            x = fx.bernoulli(x, fresh);
            y = fx.bernoulli(y, fresh);
        }
        let d1 = circular_distance(x, y);
        // a step from inside the window stays clear of the resolution and
        // saturation limits, so its growth factor is exact and is counted
        // even when it leaves the window; the pair is then re-seeded
        sum += (d1 as f64 / d0 as f64).ln();
        counted += 1;
        if !(lo..=hi).contains(&d1) {
            reseeds += 1;
            (x, y) = reseed(&mut rng);
        }
    }
    (sum, counted, reseeds)
}

/// Mean per-step log-growth of the separation over `n_trajectories`
/// independent trajectories; the standard error is the spread of the
/// per-trajectory rates.
pub fn lyapunov_estimate(
    p: f64,
    n_steps: usize,
    n_trajectories: usize,
    precision_bits: u32,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if !(0.0..=1.0).contains(&p) {
        return param_err(format!("p = {p} outside [0, 1]"));
    }
    if !(MIN_PRECISION_BITS..=128).contains(&precision_bits) {
        return param_err(format!(
            "precision_bits = {precision_bits} outside [{MIN_PRECISION_BITS}, 128]"
        ));
    }
    if n_trajectories < 2 {
        return param_err("need at least two trajectories for an error estimate");
    }
    let runs: Vec<(f64, u64, u64)> = (0..n_trajectories as u64)
        .into_par_iter()
        .map(|i| trajectory(p, n_steps, precision_bits, seed, i))
        .collect();
    let mut rates = Moments::default();
    let (mut valid, mut reseeds) = (0u64, 0u64);
    for &(sum, c, e) in &runs {
        valid += c;
        reseeds += e;
        if c > 0 {
            rates.push(sum / c as f64);
        }
    }
    if rates.n < 2 || valid < 10 * n_trajectories as u64 {
        return Err(Error::Estimation(format!(
            "only {valid} valid steps in {} trajectories",
            n_trajectories
        )));
    }
    Ok(LyapunovEstimate {
        lambda: rates.mean,
        stderr: (rates.var() / rates.n as f64).sqrt(),
        valid_steps: valid,
        reseeds,
    })
}
