//! Frame potential `F_k = E_{U,V} |tr(U†V)|^{2k}` of a two-qubit gate
//! ensemble. A unitary k-design on dimension 4 has `F_k = k!` for `k ≤ 4`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{haar_unitary, GateSpec, Mat4, C64};
use crate::circuit::Ensemble;
use crate::error::{param_err, Result};
use crate::seed::{rng_for, stream, SimRng};
use crate::stats::Moments;

pub const MIN_PAIRS: usize = 1_000;
const BATCHES: usize = 20;
/// Sub-path of the probe stream used by frame-potential draws.
const FRAME_TAG: u64 = 0xf4a3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePotential {
    pub estimate: f64,
    pub stderr: f64,
    pub k: u32,
    pub n_pairs: usize,
}

fn draw(ensemble: Ensemble, rng: &mut SimRng) -> Mat4 {
    match ensemble {
        Ensemble::ApproxHaarCz => GateSpec::sample_approx(rng, true).as_matrix(),
        Ensemble::ExactHaar => haar_unitary(rng),
    }
}

/// `|tr(U†V)|²`.
pub fn overlap_sq(u: &Mat4, v: &Mat4) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
}

/// Monte Carlo estimate over `n_pairs` independent pairs, split into 20
/// equally seeded batches whose means give the standard error.
pub fn frame_potential(ensemble: Ensemble, k: u32, n_pairs: usize, seed: u64) -> Result<FramePotential> {
    if k == 0 {
        return param_err("frame potential order k must be ≥ 1");
    }
    if n_pairs < MIN_PAIRS {
        return param_err(format!("frame potential needs ≥ {MIN_PAIRS} pairs, got {n_pairs}"));
    }
    let batch_means: Vec<f64> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let size = n_pairs / BATCHES + usize::from(b < n_pairs % BATCHES);
            let mut rng = rng_for(seed, &[stream::PROBE, FRAME_TAG, b as u64]);
            let mut m = Moments::default();
            for _ in 0..size {
                let u = draw(ensemble, &mut rng);
                let v = draw(ensemble, &mut rng);
                m.push(overlap_sq(&u, &v).powi(k as i32));
            }
            m.mean
        })
        .collect();
    let m = Moments::from_slice(&batch_means);
    Ok(FramePotential {
        estimate: m.mean,
        stderr: (m.var() / BATCHES as f64).sqrt(),
        k,
        n_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within(fp: &FramePotential, target: f64, sigmas: f64) -> bool {
        (fp.estimate - target).abs() <= sigmas * fp.stderr
    }

    #[test]
    fn haar_values_are_factorials() {
        for (k, target) in [(1, 1.0), (2, 2.0)] {
            let fp = frame_potential(Ensemble::ExactHaar, k, 40_000, 11).unwrap();
            assert!(within(&fp, target, 3.0), "k={k}: {fp:?}");
        }
    }

    #[test]
    fn approximate_ensemble_is_a_one_design() {
        let fp = frame_potential(Ensemble::ApproxHaarCz, 1, 40_000, 12).unwrap();
        assert!(within(&fp, 1.0, 3.0), "{fp:?}");
    }

    #[test]
    fn identical_unitaries_have_maximal_overlap() {
        let mut rng = crate::seed::rng_from_seed(3);
        let u = haar_unitary(&mut rng);
        assert!((overlap_sq(&u, &u) - 16.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(frame_potential(Ensemble::ExactHaar, 2, 10, 0).is_err());
        assert!(frame_potential(Ensemble::ExactHaar, 0, 10_000, 0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let a = frame_potential(Ensemble::ApproxHaarCz, 2, 2_000, 5).unwrap();
        let b = frame_potential(Ensemble::ApproxHaarCz, 2, 2_000, 5).unwrap();
        assert_eq!(a, b);
    }
}
