//! Second-moment replica model for the circuit-averaged collision probability
//! `E_C Σ_x p_x²`.
//!
//! Each site carries a two-copy operator word: `P = (|0⟩⟨0|)^{⊗2}` (a reset
//! site), `I` (identity on both copies) or `S` (swap of the copies). A Haar
//! gate on two sites maps any product of words to a combination
//! `c_I·II + c_S·SS`, with coefficients fixed by the traces
//! `t(σ) = tr σ` and `s(σ) = tr(σ·S)`:
//!
//! | word | t | s |
//! |------|---|---|
//! | P    | 1 | 1 |
//! | I    | 4 | 2 |
//! | S    | 2 | 4 |
//!
//! A reset maps `σ ↦ t(σ)·P`. The collision probability is
//! `Σ_words weight · Π_j f(σ_j)` with `f(P) = 1`, `f(I) = f(S) = 2`.
//! Branches are sampled with probability proportional to `|c|` and the
//! weight carries the remaining factor, so the estimator is unbiased.

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{sample_circuit, CircuitParams, CircuitRealization, StepOp};
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Word {
    P,
    I,
    S,
}

impl Word {
    /// `tr σ` on the two copies of one qubit.
    pub const fn trace(self) -> i64 {
        match self {
            Word::P => 1,
            Word::I => 4,
            Word::S => 2,
        }
    }

    /// `tr(σ·S)`.
    pub const fn swap_trace(self) -> i64 {
        match self {
            Word::P => 1,
            Word::I => 2,
            Word::S => 4,
        }
    }

    /// `tr(σ·Σ_b |bb⟩⟨bb|)`: contribution of a site to the collision probability.
    pub const fn estimator_factor(self) -> i64 {
        match self {
            Word::P => 1,
            Word::I | Word::S => 2,
        }
    }
}

/// Haar twirl of a two-qubit product of words: `(c_I, c_S)` in
/// `σ_a ⊗ σ_b ↦ c_I·II + c_S·SS`, with `c_I = (T − s/4)/15`,
/// `c_S = (s − T/4)/15` for `T = t(σ_a)t(σ_b)`, `s = s(σ_a)s(σ_b)`.
pub fn pair_twirl(a: Word, b: Word) -> (Ratio<i64>, Ratio<i64>) {
    let t = a.trace() * b.trace();
    let s = a.swap_trace() * b.swap_trace();
    (Ratio::new(4 * t - s, 60), Ratio::new(4 * s - t, 60))
}

/// Haar twirl of one qubit: `c_I = (2t − s)/6`, `c_S = (2s − t)/6`.
pub fn site_twirl(a: Word) -> (Ratio<i64>, Ratio<i64>) {
    let (t, s) = (a.trace(), a.swap_trace());
    (Ratio::new(2 * t - s, 6), Ratio::new(2 * s - t, 6))
}

/// Reset of both copies: `σ ↦ t(σ)·P`. Returns the weight factor.
pub fn reset_factor(a: Word) -> i64 {
    a.trace()
}

fn to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Copy)]
struct Branch {
    /// Probability of choosing `I`.
    p_i: f64,
    /// Weight factor for the `I` and `S` branches.
    w_i: f64,
    w_s: f64,
}

impl Branch {
    fn new((c_i, c_s): (Ratio<i64>, Ratio<i64>)) -> Self {
        let (ci, cs) = (to_f64(c_i), to_f64(c_s));
        let total = ci.abs() + cs.abs();
        assert!(total > 0.0, "twirl coefficients vanish");
        Branch {
            p_i: ci.abs() / total,
            w_i: ci.signum() * total,
            w_s: cs.signum() * total,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Word, f64) {
        if self.p_i >= 1.0 || (self.p_i > 0.0 && rng.random::<f64>() < self.p_i) {
            (Word::I, self.w_i)
        } else {
            (Word::S, self.w_s)
        }
    }
}

fn index(w: Word) -> usize {
    w as usize
}

/// Precomputed branch tables in floating point.
struct Tables {
    pair: [[Branch; 3]; 3],
    site: [Branch; 3],
}

impl Tables {
    fn new() -> Self {
        let words = [Word::P, Word::I, Word::S];
        Tables {
            pair: words.map(|a| words.map(|b| Branch::new(pair_twirl(a, b)))),
            site: words.map(|a| Branch::new(site_twirl(a))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordState {
    pub words: Vec<Word>,
    pub weight: f64,
}

impl WordState {
    /// All sites reset, weight 1: the two-copy image of `|0…0⟩`.
    pub fn new(l: usize) -> Self {
        WordState {
            words: vec![Word::P; l],
            weight: 1.0,
        }
    }

    /// `weight · Π_j f(σ_j)`.
    pub fn estimator(&self) -> f64 {
        self.words
            .iter()
            .fold(self.weight, |acc, w| acc * w.estimator_factor() as f64)
    }

    pub fn chaotic_update<R: Rng + ?Sized>(&mut self, j: usize, k: usize, rng: &mut R) {
        let b = Branch::new(pair_twirl(self.words[j], self.words[k]));
        let (w, f) = b.sample(rng);
        self.words[j] = w;
        self.words[k] = w;
        self.weight *= f;
    }

    /// Independent single-qubit twirls on `j` and `k` (gate without coupler).
    pub fn product_update<R: Rng + ?Sized>(&mut self, j: usize, k: usize, rng: &mut R) {
        for site in [j, k] {
            let (w, f) = Branch::new(site_twirl(self.words[site])).sample(rng);
            self.words[site] = w;
            self.weight *= f;
        }
    }

    pub fn control_update(&mut self, j: usize) {
        self.weight *= reset_factor(self.words[j]) as f64;
        self.words[j] = Word::P;
    }
}

fn run_words<R: Rng + ?Sized>(c: &CircuitRealization, tables: &Tables, rng: &mut R) -> f64 {
    let l = c.l();
    let mut words = vec![Word::P; l];
    let mut weight = 1.0;
    for s in &c.steps {
        match s {
            StepOp::Chaotic { site, .. } => {
                let (a, b) = (*site, c.params.partner(*site));
                if c.params.coupled(a) {
                    let (w, f) = tables.pair[index(words[a])][index(words[b])].sample(rng);
                    words[a] = w;
                    words[b] = w;
                    weight *= f;
                } else {
                    for x in [a, b] {
                        let (w, f) = tables.site[index(words[x])].sample(rng);
                        words[x] = w;
                        weight *= f;
                    }
                }
            }
            StepOp::Control { site } => {
                weight *= reset_factor(words[*site]) as f64;
                words[*site] = Word::P;
            }
        }
    }
    words
        .iter()
        .fold(weight, |acc, w| acc * w.estimator_factor() as f64)
}

/// Mean of the estimator over `n_words` word trajectories for a fixed
/// circuit: an unbiased estimate of the Haar-averaged collision probability
/// at the circuit's sequence of operations. Gate matrices are not used.
pub fn circuit_collision_probability(c: &CircuitRealization, n_words: usize) -> Result<(f64, f64)> {
    if n_words < 2 {
        return Err(Error::InsufficientData("need at least two word trajectories".into()));
    }
    let tables = Tables::new();
    let mut rng = rng_for(c.params.master_seed, &[stream::WORDS, c.circuit_index]);
    // Welford accumulation
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=n_words {
        let x = run_words(c, &tables, &mut rng);
        let d = x - mean;
        mean += d / k as f64;
        m2 += d * (x - mean);
    }
    let n = n_words as f64;
    Ok((mean, (m2 / (n - 1.0) / n).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_circuits: usize,
    pub n_words: usize,
    /// `stderr ≤ rel_tol · mean`.
    pub converged: bool,
}

/// Default relative standard error regarded as converged.
pub const DEFAULT_REL_TOL: f64 = 0.05;

/// Circuit- and word-averaged collision probability. The standard error is
/// the spread of per-circuit means (batch means with one batch per circuit);
/// with a single circuit the word trajectories are split into 20 batches.
pub fn estimate_collision_probability(
    params: &CircuitParams,
    n_circuits: usize,
    n_words: usize,
    rel_tol: f64,
) -> Result<CollisionEstimate> {
    params.validate()?;
    if n_circuits == 0 || n_words == 0 {
        return Err(Error::InsufficientData("no circuits or word trajectories requested".into()));
    }
    let tables = Tables::new();
    let batches: Vec<Vec<f64>> = (0..n_circuits as u64)
        .into_par_iter()
        .map(|ci| {
            let c = sample_circuit(params, ci)?;
            let mut rng = rng_for(params.master_seed, &[stream::WORDS, ci]);
            Ok((0..n_words).map(|_| run_words(&c, &tables, &mut rng)).collect())
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = if n_circuits > 1 {
        batches.iter().map(|b| b.iter().sum::<f64>() / b.len() as f64).collect()
    } else {
        let xs = &batches[0];
        let nb = 20.min(xs.len());
        let size = xs.len() / nb;
        if size == 0 || nb < 2 {
            return Err(Error::InsufficientData("too few word trajectories for batch means".into()));
        }
        xs.chunks(size).take(nb).map(|b| b.iter().sum::<f64>() / b.len() as f64).collect()
    };
    let all: f64 = batches.iter().flatten().sum::<f64>() / (n_circuits * n_words) as f64;
    let m = means.len() as f64;
    let bm = means.iter().sum::<f64>() / m;
    let var = means.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let stderr = (var / m).sqrt();
    Ok(CollisionEstimate {
        mean: all,
        stderr,
        n_circuits,
        n_words,
        converged: stderr <= rel_tol * all.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Boundary, OpKind};
    use crate::seed::rng_from_seed;

    fn r(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn pair_twirl_reproduces_published_cases() {
        assert_eq!(pair_twirl(Word::I, Word::I), (r(1, 1), r(0, 1)));
        assert_eq!(pair_twirl(Word::S, Word::S), (r(0, 1), r(1, 1)));
        assert_eq!(pair_twirl(Word::I, Word::S), (r(2, 5), r(2, 5)));
        assert_eq!(pair_twirl(Word::S, Word::I), (r(2, 5), r(2, 5)));
        assert_eq!(pair_twirl(Word::P, Word::P), (r(1, 20), r(1, 20)));
        assert_eq!(pair_twirl(Word::P, Word::I), (r(7, 30), r(2, 30)));
        assert_eq!(pair_twirl(Word::P, Word::S), (r(2, 30), r(7, 30)));
        // IS → (4/5)(II + SS)/2
        let (ci, cs) = pair_twirl(Word::I, Word::S);
        assert_eq!(ci + cs, r(4, 5));
    }

    #[test]
    fn pair_twirl_branch_probabilities_and_weights() {
        let b = Branch::new(pair_twirl(Word::P, Word::I));
        assert!((b.p_i - 7.0 / 9.0).abs() < 1e-15);
        assert!((b.w_i - 0.3).abs() < 1e-15 && (b.w_s - 0.3).abs() < 1e-15);
        let b = Branch::new(pair_twirl(Word::P, Word::P));
        assert_eq!(b.p_i, 0.5);
        assert!((b.w_i - 0.1).abs() < 1e-15);
        let b = Branch::new(pair_twirl(Word::I, Word::I));
        assert_eq!((b.p_i, b.w_i), (1.0, 1.0));
    }

    #[test]
    fn scrambling_a_pure_pair_reduces_collision_probability_to_two_fifths() {
        // (P,P) → weight 1/10 on II or SS, estimator 4 × 1/10
        let mut ws = WordState::new(2);
        ws.chaotic_update(0, 1, &mut rng_from_seed(0));
        assert!((ws.estimator() - 0.4).abs() < 1e-15);
        let (ci, cs) = pair_twirl(Word::P, Word::P);
        assert_eq!((ci + cs) * 4, r(2, 5));
    }

    #[test]
    fn identity_pair_is_a_fixed_point() {
        let mut ws = WordState {
            words: vec![Word::I, Word::I],
            weight: 1.0,
        };
        let mut rng = rng_from_seed(1);
        for _ in 0..10 {
            ws.chaotic_update(0, 1, &mut rng);
            assert_eq!(ws.words, vec![Word::I, Word::I]);
            assert_eq!(ws.weight, 1.0);
        }
    }

    #[test]
    fn reset_doubles_identity_sites_and_preserves_swap_sites() {
        // change in collision probability = f(P)·t(σ) / f(σ)
        for (w, factor) in [(Word::I, r(2, 1)), (Word::S, r(1, 1)), (Word::P, r(1, 1))] {
            assert_eq!(r(reset_factor(w) * Word::P.estimator_factor(), w.estimator_factor()), factor);
            let mut ws = WordState {
                words: vec![w],
                weight: 1.0,
            };
            let before = ws.estimator();
            ws.control_update(0);
            assert_eq!(ws.words, vec![Word::P]);
            assert_eq!(ws.estimator() / before, to_f64(factor));
        }
    }

    #[test]
    fn scramble_then_reset_matches_beta_marginal() {
        // after a Haar gate on |00⟩ and a reset of site 0, site 1 is the
        // marginal of a Haar state in C⁴: Σ p² = E[a² + (1−a)²], a ~ Beta(2,2)
        let twirl = pair_twirl(Word::P, Word::P);
        let exact = twirl.0 * reset_factor(Word::I) * 2 + twirl.1 * reset_factor(Word::S) * 2;
        assert_eq!(exact, r(3, 5));
    }

    #[test]
    fn site_twirl_is_a_single_qubit_haar_average() {
        // P = |00⟩⟨00| twirled on one qubit: (I + S)/6
        assert_eq!(site_twirl(Word::P), (r(1, 6), r(1, 6)));
        assert_eq!(site_twirl(Word::I), (r(1, 1), r(0, 1)));
        assert_eq!(site_twirl(Word::S), (r(0, 1), r(1, 1)));
    }

    #[test]
    fn weights_are_never_negative_from_reachable_states() {
        let words = [Word::P, Word::I, Word::S];
        for a in words {
            for b in words {
                let (ci, cs) = pair_twirl(a, b);
                assert!(ci >= r(0, 1) && cs >= r(0, 1));
                assert!(ci + cs > r(0, 1));
            }
            let (ci, cs) = site_twirl(a);
            assert!(ci >= r(0, 1) && cs >= r(0, 1));
        }
    }

    #[test]
    fn all_reset_circuits_have_unit_collision_probability() {
        let params = CircuitParams::new(6, 1.0);
        let est = estimate_collision_probability(&params, 5, 100, DEFAULT_REL_TOL).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn single_gate_on_two_sites() {
        let params = CircuitParams::new(2, 0.0).with_t_max(1);
        let c = sample_circuit(&params, 0).unwrap();
        let (mean, se) = circuit_collision_probability(&c, 1000).unwrap();
        assert!((mean - 0.4).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn open_edge_gate_is_a_product_of_single_qubit_twirls() {
        // L=2 open: walker clamps at site 1, gate there is uncoupled
        let params = CircuitParams::new(2, 0.0).with_t_max(2).with_boundary(Boundary::Open).with_initial_position(1);
        let c = sample_circuit(&params, 0).unwrap();
        assert!(c.steps.iter().all(|s| s.kind() == OpKind::Chaotic && s.site() == 1));
        // single-qubit Haar states on |0⟩ each have E[Σp²] = 2/3
        let (mean, se) = circuit_collision_probability(&c, 200_000).unwrap();
        assert!((mean - 4.0 / 9.0).abs() < 4.0 * se.max(1e-3), "{mean} ± {se}");
    }

    #[test]
    fn fully_scrambled_chain_approaches_haar_value() {
        for l in [3usize, 4] {
            let params = CircuitParams::new(l, 0.0).with_t_max(20 * l).with_seed(l as u64);
            let est = estimate_collision_probability(&params, 20, 2000, DEFAULT_REL_TOL).unwrap();
            let haar = 2.0 / ((1u64 << l) as f64 + 1.0);
            assert!((est.mean - haar).abs() < 3.0 * est.stderr.max(1e-4), "L={l}: {} ± {}", est.mean, est.stderr);
        }
    }

    #[test]
    fn estimator_matches_density_matrix_oracle() {
        // L=4, ten steps: replica estimator vs Monte Carlo over Haar gate draws
        // with the operation sequence fixed, evolving the exact reset channel
        use crate::circuit::{haar_unitary, GateSpec};
        use crate::sv::outcome_distribution;
        let params = CircuitParams::new(4, 0.35).with_t_max(10).with_seed(8);
        let c = sample_circuit(&params, 0).unwrap();
        assert!(c.control_count() > 0);
        let (est, est_se) = circuit_collision_probability(&c, 1_000_000).unwrap();
        let mut rng = rng_from_seed(99);
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let mut draw = c.clone();
                for s in draw.steps.iter_mut() {
                    if let StepOp::Chaotic { gate, .. } = s {
                        *gate = GateSpec::Matrix(Box::new(haar_unitary(&mut rng)));
                    }
                }
                outcome_distribution(&draw, &[0; 4]).unwrap().iter().map(|p| p * p).sum()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let combined = (se * se + est_se * est_se).sqrt();
        assert!((est - mean).abs() < 3.0 * combined, "{est} ± {est_se} vs {mean} ± {se}");
    }
}
