//! Small statistics helpers: streaming moments, jackknife, quantiles.

use serde::{Deserialize, Serialize};

/// Streaming mean and centered second moment (Welford), mergeable across
/// partial aggregates (Chan et al.), so reductions can run in any order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    /// `Σ (x − mean)²`.
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb, nf) = (self.n as f64, other.n as f64, n as f64);
        Moments {
            n,
            mean: self.mean + d * nb / nf,
            m2: self.m2 + other.m2 + d * d * na * nb / nf,
        }
    }

    /// Moments with one observation `x` taken out.
    pub fn without(&self, x: f64) -> Moments {
        if self.n <= 1 {
            return Moments::default();
        }
        let n = self.n - 1;
        let mean = (self.n as f64 * self.mean - x) / n as f64;
        Moments {
            n,
            mean,
            m2: (self.m2 - (x - self.mean) * (x - mean)).max(0.0),
        }
    }

    /// Plug-in variance `m2 / n`.
    pub fn var_pop(&self) -> f64 {
        self.m2 / self.n as f64
    }

    /// Unbiased variance `m2 / (n − 1)`.
    pub fn var(&self) -> f64 {
        self.m2 / (self.n as f64 - 1.0)
    }

    pub fn from_slice(xs: &[f64]) -> Moments {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Delete-one jackknife standard error of `stat` over `xs`.
pub fn jackknife_se<F: Fn(&[f64]) -> f64>(xs: &[f64], stat: F) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut buf = Vec::with_capacity(n - 1);
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(xs[..i].iter().chain(&xs[i + 1..]));
            stat(&buf)
        })
        .collect();
    jackknife_spread(&loo)
}

/// `sqrt((n−1)/n · Σ (θ_(i) − θ̄)²)` from leave-one-out replicates.
pub fn jackknife_spread(loo: &[f64]) -> f64 {
    let n = loo.len() as f64;
    let m = mean(loo);
    ((n - 1.0) / n * loo.iter().map(|t| (t - m).powi(2)).sum::<f64>()).sqrt()
}

/// Linear-interpolated quantile of sorted data, `q ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
