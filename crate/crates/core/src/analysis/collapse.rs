//! Finite-size-scaling collapse loss.
//!
//! Points `(x_raw, L, y, σ)` are rescaled as
//! `x = (p − p_c) L^{1/ν}` (static) or `x = t / L^z` (dynamic) and
//! `ỹ = L^{mβ/ν} y`, `σ̃ = L^{mβ/ν} σ`, where `m` is the observable's
//! exponent multiplier (1 for the magnetization, 2 for `Var_Q`). After
//! sorting by `x`, every point is compared with the linear interpolation
//! through its two neighbours (one-sided extrapolation at the ends), and the
//! loss is the mean squared normalized deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    /// `O ~ L^{−mβ/ν} f((p − p_c) L^{1/ν})`.
    Static,
    /// `O ~ L^{−mβ/ν} f(t / L^z)`.
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapsePoint {
    /// Control probability (static) or time step (dynamic).
    pub x: f64,
    pub l: usize,
    pub y: f64,
    pub sigma: f64,
}

/// Scaling parameters; which ones matter depends on the ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub p_c: f64,
    pub nu: f64,
    pub beta: f64,
    pub z: f64,
}

impl ScalingParams {
    pub const NAMES: [&'static str; 4] = ["p_c", "nu", "beta", "z"];

    pub fn to_array(self) -> [f64; 4] {
        [self.p_c, self.nu, self.beta, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        ScalingParams {
            p_c: a[0],
            nu: a[1],
            beta: a[2],
            z: a[3],
        }
    }
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            p_c: 0.5,
            nu: 1.0,
            beta: 0.0,
            z: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseInput {
    pub points: Vec<CollapsePoint>,
    pub ansatz: Ansatz,
    /// Exponent multiplier `m` in `L^{mβ/ν}`.
    pub beta_power: f64,
}

impl CollapseInput {
    pub fn new(points: Vec<CollapsePoint>, ansatz: Ansatz) -> Self {
        CollapseInput {
            points,
            ansatz,
            beta_power: 1.0,
        }
    }

    pub fn with_beta_power(mut self, m: f64) -> Self {
        self.beta_power = m;
        self
    }

    pub fn distinct_sizes(&self) -> usize {
        let mut ls: Vec<usize> = self.points.iter().map(|p| p.l).collect();
        ls.sort_unstable();
        ls.dedup();
        ls.len()
    }

    /// Keeps points with `lo ≤ x ≤ hi` (raw `p` or `t`).
    pub fn window(&self, lo: f64, hi: f64) -> CollapseInput {
        self.filter(|p| p.x >= lo && p.x <= hi)
    }

    pub fn filter<F: Fn(&CollapsePoint) -> bool>(&self, keep: F) -> CollapseInput {
        CollapseInput {
            points: self.points.iter().copied().filter(|p| keep(p)).collect(),
            ansatz: self.ansatz,
            beta_power: self.beta_power,
        }
    }
}

/// Rescaled `(x, ỹ, σ̃)` for every point, in input order.
pub fn rescale(params: &ScalingParams, data: &CollapseInput) -> Result<Vec<(f64, f64, f64)>> {
    if !(params.nu > 0.0) {
        return Err(Error::Domain(format!("ν = {} must be positive", params.nu)));
    }
    if data.ansatz == Ansatz::Dynamic && !(params.z > 0.0) {
        return Err(Error::Domain(format!("z = {} must be positive", params.z)));
    }
    let exp_y = data.beta_power * params.beta / params.nu;
    Ok(data
        .points
        .iter()
        .map(|pt| {
            let l = pt.l as f64;
            let x = match data.ansatz {
                Ansatz::Static => (pt.x - params.p_c) * l.powf(1.0 / params.nu),
                Ansatz::Dynamic => pt.x / l.powf(params.z),
            };
            let s = l.powf(exp_y);
            (x, s * pt.y, s * pt.sigma)
        })
        .collect())
}

/// Normalized deviations `(ỹ_ι − 𝔒̃_ι)/σ̃_ι`, indexed like the input points
/// so that each component follows one point as the parameters move the sort
/// order (which keeps finite-difference Jacobians meaningful).
pub fn collapse_residuals(params: &ScalingParams, data: &CollapseInput) -> Result<Vec<f64>> {
    let sorted = sorted_residuals(params, data)?;
    let mut out = vec![0.0; sorted.len()];
    for (orig, r) in sorted {
        out[orig] = r;
    }
    Ok(out)
}

/// `(input index, residual)` in ascending-`x` order.
fn sorted_residuals(params: &ScalingParams, data: &CollapseInput) -> Result<Vec<(usize, f64)>> {
    if data.points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "collapse needs ≥ 3 points, got {}",
            data.points.len()
        )));
    }
    let mut pts: Vec<(f64, f64, f64, usize)> = rescale(params, data)?
        .into_iter()
        .enumerate()
        .map(|(i, (x, y, s))| (x, y, s, i))
        .collect();
    // total order on (x, ỹ, σ̃) keeps the loss permutation invariant under ties
    pts.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // neighbours used for the interpolation; one-sided at the ends
        let (a, b) = match i {
            0 => (1, 2),
            _ if i == n - 1 => (n - 3, n - 2),
            _ => (i - 1, i + 1),
        };
        let (xi, yi, si, orig) = pts[i];
        let (xa, ya, sa, _) = pts[a];
        let (xb, yb, sb, _) = pts[b];
        let dx = xb - xa;
        let (wa, wb) = if dx == 0.0 {
            (0.5, 0.5)
        } else {
            ((xb - xi) / dx, (xi - xa) / dx)
        };
        let interp = wa * ya + wb * yb;
        let sigma2 = si * si + (wa * sa).powi(2) + (wb * sb).powi(2);
        let dev = yi - interp;
        if sigma2 == 0.0 {
            if dev == 0.0 {
                out.push((orig, 0.0));
                continue;
            }
            return Err(Error::SingularLoss(format!(
                "point at x = {xi} deviates by {dev} with zero uncertainty"
            )));
        }
        out.push((orig, dev / sigma2.sqrt()));
    }
    Ok(out)
}

/// Reduced χ²: `(1/N) Σ ((ỹ_ι − 𝔒̃_ι)/σ̃_ι)²`.
pub fn collapse_loss(params: &ScalingParams, data: &CollapseInput) -> Result<f64> {
    // summed in sorted order so the value is independent of input order
    let r = sorted_residuals(params, data)?;
    Ok(r.iter().map(|(_, x)| x * x).sum::<f64>() / r.len() as f64)
}
