//! Classical reference dynamics on bitstrings.
//!
//! * The dephasing model keeps only the transition weights `|U_ij|²` of each
//!   gate, giving a Markov chain on bitstrings driven by the same circuit.
//! * The first-moment stat-mech model replaces the Haar average of a gate by
//!   "both touched bits become uniformly random"; resets set a bit to 0.
//!   Given the circuit, final bits are independent, so the per-site marginal
//!   probability of a 1 is tracked exactly by [`MarginalState`].
//! * Depolarizing noise after resets (`p_e1`) and after gates (`p_e2`)
//!   replaces the touched bits by uniform ones with the given probability.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitRealization, Mat4, StepOp};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};
use crate::shot::{bitstring_mz, ProbeConfig, ShotRecord};

/// Tolerated deviation of a transition-matrix row or column sum from 1.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Depolarizing probability applied to a site after each reset.
    pub p_e1: f64,
    /// Depolarizing probability applied to the pair after each gate.
    pub p_e2: f64,
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams { p_e1: 0.0, p_e2: 0.0 };

    pub fn new(p_e1: f64, p_e2: f64) -> Result<Self> {
        let n = NoiseParams { p_e1, p_e2 };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_e1", self.p_e1), ("p_e2", self.p_e2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p_e1 == 0.0 && self.p_e2 == 0.0
    }
}

/// How the classical backends initialize their bits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBits {
    /// Independent uniform bits, drawn per shot.
    #[default]
    Uniform,
    Fixed(Vec<u8>),
}

impl InitialBits {
    pub fn check(&self, l: usize) -> Result<()> {
        match self {
            InitialBits::Fixed(b) if b.len() != l => Err(Error::Parameter(format!(
                "initial bitstring has length {} but L = {l}",
                b.len()
            ))),
            InitialBits::Fixed(b) if b.iter().any(|&x| x > 1) => {
                Err(Error::Parameter("initial bits must be 0 or 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> Vec<u8> {
        match self {
            InitialBits::Uniform => (0..l).map(|_| rng.random::<bool>() as u8).collect(),
            InitialBits::Fixed(b) => b.clone(),
        }
    }

    /// Per-site probability of a 1.
    fn marginals(&self, l: usize) -> Vec<f64> {
        match self {
            InitialBits::Uniform => vec![0.5; l],
            InitialBits::Fixed(b) => b.iter().map(|&x| x as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitstringState {
    pub bits: Vec<u8>,
}

impl BitstringState {
    pub fn l(&self) -> usize {
        self.bits.len()
    }

    pub fn magnetization(&self) -> f64 {
        bitstring_mz(&self.bits)
    }

    /// Resets `site` to 0 and returns the record entry (+1 if it was already 0).
    fn reset(&mut self, site: usize) -> i8 {
        let m = if self.bits[site] == 0 { 1 } else { -1 };
        self.bits[site] = 0;
        m
    }
}

/// `T[i][j] = |U_ij|²`: probability of moving from two-bit state `j` to `i`.
/// Both row and column sums are checked against 1.
pub fn transition_matrix(u: &Mat4) -> Result<[[f64; 4]; 4]> {
    let mut t = [[0.0; 4]; 4];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = u[(i, j)].norm_sqr();
        }
    }
    for k in 0..4 {
        let row: f64 = t[k].iter().sum();
        let col: f64 = t.iter().map(|r| r[k]).sum();
        if (row - 1.0).abs() > STOCHASTIC_TOLERANCE || (col - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::Numerical(format!(
                "transition matrix line {k} sums to {row} (row) / {col} (column)"
            )));
        }
    }
    Ok(t)
}

enum DephasingOp {
    Gate {
        a: usize,
        b: usize,
        /// `cumulative[j][i] = Σ_{i' ≤ i} T[i'][j]`.
        cumulative: [[f64; 4]; 4],
    },
    Reset {
        site: usize,
    },
}

/// A circuit compiled to the dephasing Markov chain, reusable across shots.
pub struct DephasingPlan {
    l: usize,
    ops: Vec<DephasingOp>,
}

impl DephasingPlan {
    pub fn compile(c: &CircuitRealization) -> Result<Self> {
        let params = &c.params;
        let ops = c
            .steps
            .iter()
            .map(|s| match s {
                StepOp::Chaotic { site, gate } => {
                    let t = transition_matrix(&gate.as_matrix())?;
                    let mut cumulative = [[0.0; 4]; 4];
                    for (j, cum) in cumulative.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (i, slot) in cum.iter_mut().enumerate() {
                            acc += t[i][j];
                            *slot = acc;
                        }
                    }
                    Ok(DephasingOp::Gate {
                        a: *site,
                        b: params.partner(*site),
                        cumulative,
                    })
                }
                StepOp::Control { site } => Ok(DephasingOp::Reset { site: *site }),
            })
            .collect::<Result<_>>()?;
        Ok(DephasingPlan { l: c.l(), ops })
    }

    pub fn run_shot(&self, initial: &InitialBits, shot_seed: u64, probes: &ProbeConfig) -> Result<ShotRecord> {
        initial.check(self.l)?;
        let mut rng: SimRng = rng_from_seed(shot_seed);
        let mut state = BitstringState {
            bits: initial.draw(self.l, &mut rng),
        };
        let mut rec = Recorder::new(&state, self.ops.len(), probes);
        for op in &self.ops {
            let m = match op {
                DephasingOp::Gate { a, b, cumulative } => {
                    let j = 2 * state.bits[*a] as usize + state.bits[*b] as usize;
                    let u = rng.random::<f64>() * cumulative[j][3];
                    let i = cumulative[j].iter().position(|&c| u < c).unwrap_or(3);
                    state.bits[*a] = (i >> 1) as u8;
                    state.bits[*b] = (i & 1) as u8;
                    0
                }
                DephasingOp::Reset { site } => state.reset(*site),
            };
            rec.step(&state, m);
        }
        Ok(rec.finish(state, shot_seed))
    }
}

/// Shared bookkeeping for classical shots.
struct Recorder {
    measurements: Vec<i8>,
    mz_series: Option<Vec<f64>>,
}

impl Recorder {
    fn new(state: &BitstringState, steps: usize, probes: &ProbeConfig) -> Self {
        Recorder {
            measurements: Vec::with_capacity(steps),
            mz_series: probes.dense_mz.then(|| {
                let mut v = Vec::with_capacity(steps + 1);
                v.push(state.magnetization());
                v
            }),
        }
    }

    fn step(&mut self, state: &BitstringState, m: i8) {
        self.measurements.push(m);
        if let Some(s) = self.mz_series.as_mut() {
            s.push(state.magnetization());
        }
    }

    fn finish(self, state: BitstringState, shot_seed: u64) -> ShotRecord {
        let mz = state.magnetization();
        let fidelity = if state.bits.iter().all(|&b| b == 0) { 1.0 } else { 0.0 };
        ShotRecord {
            measurements: self.measurements,
            mz_sq_series: self.mz_series.as_ref().map(|s| s.iter().map(|m| m * m).collect()),
            mz_series: self.mz_series,
            mz_final: mz,
            mz_sq_final: mz * mz,
            final_bitstring: Some(state.bits),
            entropy_series: Vec::new(),
            fidelity_final: fidelity,
            shot_seed,
        }
    }
}

/// One dephasing-model trajectory of `c`.
pub fn dephasing_run_shot(
    c: &CircuitRealization,
    initial: &InitialBits,
    shot_seed: u64,
    probes: &ProbeConfig,
) -> Result<ShotRecord> {
    DephasingPlan::compile(c)?.run_shot(initial, shot_seed, probes)
}

/// One first-moment stat-mech trajectory of `c`. Gate matrices are ignored.
pub fn statmech1_run_shot(
    c: &CircuitRealization,
    initial: &InitialBits,
    shot_seed: u64,
    noise: &NoiseParams,
    probes: &ProbeConfig,
) -> Result<ShotRecord> {
    noise.validate()?;
    let l = c.l();
    initial.check(l)?;
    let mut rng: SimRng = rng_from_seed(shot_seed);
    let mut state = BitstringState {
        bits: initial.draw(l, &mut rng),
    };
    let mut rec = Recorder::new(&state, c.steps.len(), probes);
    for s in &c.steps {
        let m = match s {
            StepOp::Chaotic { site, .. } => {
                let b = c.params.partner(*site);
                state.bits[*site] = rng.random::<bool>() as u8;
                state.bits[b] = rng.random::<bool>() as u8;
                if noise.p_e2 > 0.0 && rng.random::<f64>() < noise.p_e2 {
                    state.bits[*site] = rng.random::<bool>() as u8;
                    state.bits[b] = rng.random::<bool>() as u8;
                }
                0
            }
            StepOp::Control { site } => {
                let m = state.reset(*site);
                if noise.p_e1 > 0.0 && rng.random::<f64>() < noise.p_e1 {
                    state.bits[*site] = rng.random::<bool>() as u8;
                }
                m
            }
        };
        rec.step(&state, m);
    }
    Ok(rec.finish(state, shot_seed))
}

/// Exact per-site probabilities of a 1 under the first-moment model.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalState {
    pub q: Vec<f64>,
}

impl MarginalState {
    pub fn new(initial: &InitialBits, l: usize) -> Result<Self> {
        initial.check(l)?;
        Ok(MarginalState {
            q: initial.marginals(l),
        })
    }

    pub fn apply(&mut self, step: &StepOp, c: &CircuitRealization, noise: &NoiseParams) {
        match step {
            StepOp::Chaotic { site, .. } => {
                // uniform bits are a fixed point of depolarization
                self.q[*site] = 0.5;
                self.q[c.params.partner(*site)] = 0.5;
            }
            StepOp::Control { site } => self.q[*site] = noise.p_e1 * 0.5,
        }
    }

    /// `(1/L) Σ (1 − 2 q_i)`.
    pub fn mz_mean(&self) -> f64 {
        self.q.iter().map(|q| 1.0 - 2.0 * q).sum::<f64>() / self.q.len() as f64
    }

    /// Shot-to-shot variance of `M_z`: `(4/L²) Σ q_i (1 − q_i)`.
    pub fn mz_var(&self) -> f64 {
        let l = self.q.len() as f64;
        4.0 * self.q.iter().map(|q| q * (1.0 - q)).sum::<f64>() / (l * l)
    }

    /// Sites whose bit is not deterministic.
    pub fn mixed_count(&self) -> usize {
        self.q.iter().filter(|&&q| q > 0.0 && q < 1.0).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statmech1Exact {
    pub mz_mean: f64,
    pub mz_quantum_var: f64,
    pub mixed_count: usize,
}

pub fn statmech1_final_marginals(
    c: &CircuitRealization,
    initial: &InitialBits,
    noise: &NoiseParams,
) -> Result<MarginalState> {
    noise.validate()?;
    let mut m = MarginalState::new(initial, c.l())?;
    for s in &c.steps {
        m.apply(s, c, noise);
    }
    Ok(m)
}

/// Exact first-moment mean and shot-to-shot variance of the final `M_z`.
pub fn statmech1_exact(c: &CircuitRealization, initial: &InitialBits, noise: &NoiseParams) -> Result<Statmech1Exact> {
    let m = statmech1_final_marginals(c, initial, noise)?;
    Ok(Statmech1Exact {
        mz_mean: m.mz_mean(),
        mz_quantum_var: m.mz_var(),
        mixed_count: m.mixed_count(),
    })
}

/// Exact `(mean, variance)` of `M_z` after every step; index 0 is the
/// initial state. Runs in O(L + t_max).
pub fn statmech1_exact_series(
    c: &CircuitRealization,
    initial: &InitialBits,
    noise: &NoiseParams,
) -> Result<Vec<(f64, f64)>> {
    noise.validate()?;
    let l = c.l() as f64;
    let mut m = MarginalState::new(initial, c.l())?;
    let mut sum_z: f64 = m.q.iter().map(|q| 1.0 - 2.0 * q).sum();
    let mut sum_v: f64 = m.q.iter().map(|q| q * (1.0 - q)).sum();
    let mut out = Vec::with_capacity(c.steps.len() + 1);
    out.push((sum_z / l, 4.0 * sum_v / (l * l)));
    for s in &c.steps {
        let touched = match s {
            StepOp::Chaotic { site, .. } => [Some(*site), Some(c.params.partner(*site))],
            StepOp::Control { site } => [Some(*site), None],
        };
        for &i in touched.iter().flatten() {
            sum_z -= 1.0 - 2.0 * m.q[i];
            sum_v -= m.q[i] * (1.0 - m.q[i]);
        }
        m.apply(s, c, noise);
        for &i in touched.iter().flatten() {
            sum_z += 1.0 - 2.0 * m.q[i];
            sum_v += m.q[i] * (1.0 - m.q[i]);
        }
        out.push((sum_z / l, 4.0 * sum_v / (l * l)));
    }
    Ok(out)
}

/// Collision probability predicted by the first-moment model, `2^{−(L−|A|)}`
/// with `A` the sites whose last operation was a reset.
pub fn statmech1_cp_prediction(c: &CircuitRealization) -> f64 {
    let l = c.l();
    let mut reset = vec![false; l];
    for s in &c.steps {
        match s {
            StepOp::Chaotic { site, .. } => {
                reset[*site] = false;
                reset[c.params.partner(*site)] = false;
            }
            StepOp::Control { site } => reset[*site] = true,
        }
    }
    let a = reset.iter().filter(|&&r| r).count();
    0.5f64.powi((l - a) as i32)
}

/// Draws final-time `M_z` values of `n_shots` first-moment trajectories.
///
/// Exact in distribution: given the circuit the final bits are independent
/// with the marginals of [`statmech1_final_marginals`], so the number of ones
/// among sites sharing a marginal is binomial.
pub fn statmech1_sample_final_mz(
    marginals: &MarginalState,
    n_shots: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let l = marginals.q.len();
    let mut groups: Vec<(f64, u64)> = Vec::new();
    for &q in &marginals.q {
        if q == 0.0 {
            continue;
        }
        match groups.iter_mut().find(|(g, _)| *g == q) {
            Some((_, n)) => *n += 1,
            None => groups.push((q, 1)),
        }
    }
    let dists = groups
        .iter()
        .map(|&(q, n)| Binomial::new(n, q).map_err(|e| Error::Numerical(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..n_shots)
        .map(|_| {
            let ones: u64 = dists.iter().map(|d| d.sample(rng)).sum();
            (l as f64 - 2.0 * ones as f64) / l as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{cz, haar_unitary, sample_circuit, CircuitParams, Ensemble, GateSpec};
    use crate::seed::derive_seed;
    use proptest::prelude::*;

    #[test]
    fn transition_matrices_are_doubly_stochastic() {
        let mut rng = rng_from_seed(1);
        for _ in 0..500 {
            let t = transition_matrix(&haar_unitary(&mut rng)).unwrap();
            for k in 0..4 {
                assert!((t[k].iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!((t.iter().map(|r| r[k]).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let bad = Mat4::identity() * crate::circuit::C64::new(1.1, 0.0);
        assert!(matches!(transition_matrix(&bad), Err(Error::Numerical(_))));
    }

    #[test]
    fn cz_gate_leaves_bits_unchanged() {
        let t = transition_matrix(&cz()).unwrap();
        for (i, row) in t.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert_eq!(x, if i == j { 1.0 } else { 0.0 });
            }
        }
        let mut c = sample_circuit(&CircuitParams::new(4, 0.0).with_t_max(6), 0).unwrap();
        for s in c.steps.iter_mut() {
            if let StepOp::Chaotic { gate, .. } = s {
                *gate = GateSpec::Matrix(Box::new(cz()));
            }
        }
        let init = InitialBits::Fixed(vec![1, 0, 1, 1]);
        for seed in 0..20 {
            let r = dephasing_run_shot(&c, &init, seed, &ProbeConfig::default()).unwrap();
            assert_eq!(r.final_bitstring.unwrap(), vec![1, 0, 1, 1]);
        }
    }

    /// Exact propagation of the full probability vector over bitstrings.
    fn dephasing_distribution(c: &CircuitRealization, initial: &[u8]) -> Vec<f64> {
        let l = c.l();
        let mut p = vec![0.0; 1 << l];
        p[crate::shot::bits_to_index(initial)] = 1.0;
        for s in &c.steps {
            let mut next = vec![0.0; 1 << l];
            match s {
                StepOp::Chaotic { site, gate } => {
                    let (a, b) = (*site, c.params.partner(*site));
                    let u = gate.as_matrix();
                    for (idx, &w) in p.iter().enumerate() {
                        let j = 2 * ((idx >> a) & 1) + ((idx >> b) & 1);
                        let clear = idx & !(1 << a) & !(1 << b);
                        for i in 0..4 {
                            next[clear | ((i >> 1) << a) | ((i & 1) << b)] += w * u[(i, j)].norm_sqr();
                        }
                    }
                }
                StepOp::Control { site } => {
                    for (idx, &w) in p.iter().enumerate() {
                        next[idx & !(1 << site)] += w;
                    }
                }
            }
            p = next;
        }
        p
    }

    #[test]
    fn dephasing_shots_match_probability_vector() {
        for (ensemble, seed) in [(Ensemble::ExactHaar, 3u64), (Ensemble::ApproxHaarCz, 4)] {
            let params = CircuitParams::new(4, 0.3).with_t_max(16).with_seed(seed).with_ensemble(ensemble);
            let c = sample_circuit(&params, 0).unwrap();
            let init = [1u8, 1, 0, 1];
            let exact = dephasing_distribution(&c, &init);
            assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let plan = DephasingPlan::compile(&c).unwrap();
            let n = 100_000u64;
            let mut counts = [0usize; 16];
            let fixed = InitialBits::Fixed(init.to_vec());
            for shot in 0..n {
                let r = plan.run_shot(&fixed, derive_seed(seed, &[shot]), &ProbeConfig::default()).unwrap();
                counts[crate::shot::bits_to_index(r.final_bitstring.as_ref().unwrap())] += 1;
            }
            let tv: f64 = counts
                .iter()
                .zip(&exact)
                .map(|(&k, &p)| (k as f64 / n as f64 - p).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.02, "TV distance {tv}");
        }
    }

    #[test]
    fn all_reset_circuit_is_deterministic() {
        let l = 6;
        let c = sample_circuit(&CircuitParams::new(l, 1.0).with_t_max(2 * l), 0).unwrap();
        for seed in 0..20 {
            let r = statmech1_run_shot(&c, &InitialBits::Uniform, seed, &NoiseParams::NONE, &ProbeConfig::default())
                .unwrap();
            assert_eq!(r.mz_final, 1.0);
        }
        let e = statmech1_exact(&c, &InitialBits::Uniform, &NoiseParams::NONE).unwrap();
        assert_eq!((e.mz_mean, e.mz_quantum_var, e.mixed_count), (1.0, 0.0, 0));
        assert_eq!(statmech1_cp_prediction(&c), 1.0);
    }

    #[test]
    fn scrambled_chain_has_zero_mean_magnetization() {
        let l = 10;
        let c = sample_circuit(&CircuitParams::new(l, 0.0).with_t_max(10 * l), 0).unwrap();
        let n = 10_000u64;
        let sum: f64 = (0..n)
            .map(|s| {
                statmech1_run_shot(&c, &InitialBits::Fixed(vec![1; l]), s, &NoiseParams::NONE, &ProbeConfig::default())
                    .unwrap()
                    .mz_final
            })
            .sum();
        // per-shot variance is 1/L
        let sigma = (1.0 / l as f64 / n as f64).sqrt();
        assert!((sum / n as f64).abs() < 3.0 * sigma);
        let e = statmech1_exact(&c, &InitialBits::Uniform, &NoiseParams::NONE).unwrap();
        assert_eq!(e.mz_mean, 0.0);
        assert_eq!(e.mz_quantum_var, 1.0 / l as f64);
        assert_eq!(statmech1_cp_prediction(&c), 0.5f64.powi(l as i32));
    }

    #[test]
    fn single_reset_after_scrambling() {
        let l = 5;
        let mut c = sample_circuit(&CircuitParams::new(l, 0.0).with_t_max(3 * l), 0).unwrap();
        let site = c.steps.last().map(|s| c.params.next_position(s.site(), s.kind())).unwrap();
        c.steps.push(StepOp::Control { site });
        c.params.t_max += 1;
        assert_eq!(statmech1_cp_prediction(&c), 0.5f64.powi(l as i32 - 1));
        let e = statmech1_exact(&c, &InitialBits::Uniform, &NoiseParams::NONE).unwrap();
        assert_eq!(e.mixed_count, l - 1);
        assert_eq!(e.mz_quantum_var, (l - 1) as f64 / (l * l) as f64);
    }

    #[test]
    fn noisy_reset_fixed_point() {
        let l = 8;
        let c = sample_circuit(&CircuitParams::new(l, 1.0).with_t_max(4 * l), 0).unwrap();
        let noise = NoiseParams::new(0.01, 0.001).unwrap();
        let e = statmech1_exact(&c, &InitialBits::Uniform, &noise).unwrap();
        assert!((e.mz_mean - (1.0 - noise.p_e1)).abs() < 1e-15);
        // Monte Carlo agrees with the closed form
        let n = 20_000u64;
        let mean = (0..n)
            .map(|s| statmech1_run_shot(&c, &InitialBits::Uniform, s, &noise, &ProbeConfig::default()).unwrap().mz_final)
            .sum::<f64>()
            / n as f64;
        let sigma = (e.mz_quantum_var / n as f64).sqrt();
        assert!((mean - (1.0 - noise.p_e1)).abs() < 3.0 * sigma);
        assert!(NoiseParams::new(1.5, 0.0).is_err());
    }

    #[test]
    fn sampler_agrees_with_exact_moments() {
        let l = 20;
        let params = CircuitParams::new(l, 0.5).with_seed(5);
        for ci in 0..3 {
            let c = sample_circuit(&params, ci).unwrap();
            let e = statmech1_exact(&c, &InitialBits::Uniform, &NoiseParams::NONE).unwrap();
            let n = 10_000;
            let xs: Vec<f64> = (0..n as u64)
                .map(|s| {
                    statmech1_run_shot(&c, &InitialBits::Uniform, derive_seed(ci, &[s]), &NoiseParams::NONE, &ProbeConfig::default())
                        .unwrap()
                        .mz_final
                })
                .collect();
            check_moments(&xs, &e);
            let m = statmech1_final_marginals(&c, &InitialBits::Uniform, &NoiseParams::NONE).unwrap();
            let fast = statmech1_sample_final_mz(&m, n, &mut rng_from_seed(ci)).unwrap();
            check_moments(&fast, &e);
        }
    }

    fn check_moments(xs: &[f64], e: &Statmech1Exact) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - e.mz_mean).abs() <= 3.0 * (e.mz_quantum_var / n).sqrt() + 1e-15);
        // M_z is a scaled sum of k fair bits, whose excess kurtosis is −2/k
        let k = e.mixed_count as f64;
        let kurt_excess = if k > 0.0 { -2.0 / k } else { 0.0 };
        let var_se = (e.mz_quantum_var.powi(2) * (2.0 / (n - 1.0) + kurt_excess / n)).sqrt();
        assert!((var - e.mz_quantum_var).abs() <= 3.0 * var_se + 1e-15, "{var} vs {}", e.mz_quantum_var);
    }

    #[test]
    fn exact_series_matches_final_marginals() {
        let params = CircuitParams::new(9, 0.45).with_seed(2).with_t_max(60);
        let noise = NoiseParams::new(0.05, 0.01).unwrap();
        let c = sample_circuit(&params, 0).unwrap();
        let series = statmech1_exact_series(&c, &InitialBits::Fixed(vec![1; 9]), &noise).unwrap();
        assert_eq!(series.len(), 61);
        assert_eq!(series[0], (-1.0, 0.0));
        let e = statmech1_exact(&c, &InitialBits::Fixed(vec![1; 9]), &noise).unwrap();
        let (m, v) = *series.last().unwrap();
        assert!((m - e.mz_mean).abs() < 1e-12 && (v - e.mz_quantum_var).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn marginals_stay_in_unit_interval(seed in any::<u64>(), p in 0.0f64..=1.0, pe1 in 0.0f64..=1.0) {
            let c = sample_circuit(&CircuitParams::new(7, p).with_seed(seed).with_t_max(30), 0).unwrap();
            let noise = NoiseParams::new(pe1, 0.0).unwrap();
            let m = statmech1_final_marginals(&c, &InitialBits::Uniform, &noise).unwrap();
            prop_assert!(m.q.iter().all(|q| (0.0..=1.0).contains(q)));
            prop_assert!(m.mz_var() >= 0.0);
            prop_assert!(m.mz_mean().abs() <= 1.0);
        }

        #[test]
        fn deterministic_sites_carry_no_variance(seed in any::<u64>()) {
            let c = sample_circuit(&CircuitParams::new(6, 0.9).with_seed(seed).with_t_max(40), 0).unwrap();
            let e = statmech1_exact(&c, &InitialBits::Uniform, &NoiseParams::NONE).unwrap();
            prop_assert_eq!(e.mixed_count == 0, e.mz_quantum_var == 0.0);
        }
    }
}
