//! Dense statevector trajectories with Born-rule mid-circuit reset.

use nalgebra::DMatrix;
use rand::Rng;

use crate::circuit::{CircuitRealization, Mat4, StepOp, C64};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};
use crate::shot::{bits_to_index, ProbeConfig, ShotRecord};

/// Largest supported chain length.
pub const MAX_QUBITS: usize = 16;

/// Tolerated deviation of the squared norm from 1 before a trajectory is
/// declared numerically broken.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Eigenvalues of the reduced density matrix below this are dropped.
const ENTROPY_CUTOFF: f64 = 1e-14;

pub fn check_capacity(l: usize) -> Result<()> {
    if l > MAX_QUBITS {
        return Err(Error::Capacity {
            requested: l,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Inserts a 0 at bit position `bit` of `k`, shifting the higher bits up.
#[inline]
fn insert_zero_bit(k: usize, bit: usize) -> usize {
    let low = k & ((1usize << bit) - 1);
    ((k >> bit) << (bit + 1)) | low
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    l: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_bitstring(bits: &[u8]) -> Result<Self> {
        let l = bits.len();
        check_capacity(l)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << l];
        amps[bits_to_index(bits)] = C64::new(1.0, 0.0);
        Ok(StateVector { l, amps })
    }

    /// Wraps raw amplitudes (site `i` at bit `i` of the index). Not renormalized.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::Parameter(format!(
                "amplitude vector of length {n} is not a power of two"
            )));
        }
        let l = n.trailing_zeros() as usize;
        check_capacity(l)?;
        Ok(StateVector { l, amps })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `gate` to `(a, b)` with `a` the more significant qubit of the
    /// gate's basis.
    pub fn apply_two_qubit(&mut self, gate: &[[C64; 4]; 4], a: usize, b: usize) {
        debug_assert!(a != b && a < self.l && b < self.l);
        let ma = 1usize << a;
        let mb = 1usize << b;
        let (lo, hi) = (a.min(b), a.max(b));
        // enumerate only the indices with both target bits clear
        for k in 0..self.amps.len() >> 2 {
            let base = insert_zero_bit(insert_zero_bit(k, lo), hi);
            let idx = [base, base | mb, base | ma, base | ma | mb];
            let v = idx.map(|i| self.amps[i]);
            for (row, &i) in gate.iter().zip(idx.iter()) {
                self.amps[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
            }
        }
    }

    pub fn prob_one(&self, site: usize) -> f64 {
        let m = 1usize << site;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projective Z measurement of `site` followed by X on outcome |1⟩.
    /// Returns `+1` for outcome |0⟩ and `−1` for |1⟩.
    pub fn measure_and_reset<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> Result<i8> {
        let m = 1usize << site;
        let (mut p0, mut p1) = (0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            if i & m == 0 {
                p0 += a.norm_sqr();
            } else {
                p1 += a.norm_sqr();
            }
        }
        let total = p0 + p1;
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Numerical(format!("state norm² drifted to {total}")));
        }
        let one = rng.random::<f64>() * total < p1;
        let keep = if one { p1 } else { p0 };
        let scale = 1.0 / keep.sqrt();
        for k in 0..self.amps.len() >> 1 {
            let i = insert_zero_bit(k, site);
            let j = i | m;
            if one {
                self.amps[i] = self.amps[j] * scale;
            } else {
                self.amps[i] *= scale;
            }
            self.amps[j] = C64::new(0.0, 0.0);
        }
        Ok(if one { -1 } else { 1 })
    }

    /// `⟨M_z⟩ = (1/L) Σ_i ⟨Z_i⟩`.
    pub fn magnetization(&self) -> f64 {
        self.mz_moments().0
    }

    /// `⟨M_z²⟩ = (1/L²) ⟨(Σ_i Z_i)²⟩`.
    pub fn magnetization_sq(&self) -> f64 {
        self.mz_moments().1
    }

    /// Both magnetization moments in one pass over the diagonal.
    pub fn mz_moments(&self) -> (f64, f64) {
        let l = self.l as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            let w = a.norm_sqr();
            let z = l - 2.0 * i.count_ones() as f64;
            m1 += w * z;
            m2 += w * z * z;
        }
        (m1 / l, m2 / (l * l))
    }

    /// `|⟨0…0|ψ⟩|²`.
    pub fn fixed_point_fidelity(&self) -> f64 {
        self.amps[0].norm_sqr()
    }

    /// Von Neumann entropy (bits) of sites `[0, cut)`.
    pub fn half_chain_entropy(&self, cut: usize) -> Result<f64> {
        if cut == 0 || cut >= self.l {
            return Err(Error::Parameter(format!(
                "entropy cut {cut} outside [1, {}]",
                self.l - 1
            )));
        }
        let rows = 1usize << cut;
        let cols = 1usize << (self.l - cut);
        let m = DMatrix::from_fn(rows, cols, |r, c| self.amps[r | (c << cut)]);
        let sv = m.singular_values();
        Ok(sv
            .iter()
            .map(|s| s * s)
            .filter(|&lambda| lambda > ENTROPY_CUTOFF)
            .map(|lambda| -lambda * lambda.log2())
            .sum())
    }

    /// Samples a computational-basis outcome with probability `|a_b|²`.
    pub fn sample_bitstring<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let u = rng.random::<f64>() * self.norm_sqr();
        let mut acc = 0.0;
        let mut chosen = self.amps.len() - 1;
        for (i, a) in self.amps.iter().enumerate() {
            acc += a.norm_sqr();
            if u < acc {
                chosen = i;
                break;
            }
        }
        crate::shot::index_to_bits(chosen, self.l)
    }
}

fn to_array(m: &Mat4) -> [[C64; 4]; 4] {
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, z) in row.iter_mut().enumerate() {
            *z = m[(r, c)];
        }
    }
    out
}

enum CompiledOp {
    Gate {
        a: usize,
        b: usize,
        matrix: [[C64; 4]; 4],
    },
    Reset {
        site: usize,
    },
}

/// A circuit with its gate matrices materialized, reusable across shots.
pub struct SvProgram<'c> {
    circuit: &'c CircuitRealization,
    ops: Vec<CompiledOp>,
}

impl<'c> SvProgram<'c> {
    pub fn compile(circuit: &'c CircuitRealization) -> Result<Self> {
        check_capacity(circuit.l())?;
        let params = &circuit.params;
        let ops = circuit
            .steps
            .iter()
            .map(|s| match s {
                StepOp::Chaotic { site, gate } => CompiledOp::Gate {
                    a: *site,
                    b: params.partner(*site),
                    matrix: to_array(&gate.as_matrix()),
                },
                StepOp::Control { site } => CompiledOp::Reset { site: *site },
            })
            .collect();
        Ok(SvProgram { circuit, ops })
    }

    pub fn run_shot(&self, initial: &[u8], shot_seed: u64, probes: &ProbeConfig) -> Result<ShotRecord> {
        let l = self.circuit.l();
        if initial.len() != l {
            return Err(Error::Parameter(format!(
                "initial bitstring has length {} but L = {l}",
                initial.len()
            )));
        }
        let cut = probes.entropy_cut.unwrap_or(l / 2);
        let mut rng: SimRng = rng_from_seed(shot_seed);
        let mut state = StateVector::from_bitstring(initial)?;
        let n = self.ops.len();
        let mut measurements = Vec::with_capacity(n);
        let (mut mz_series, mut mz_sq_series) = if probes.dense_mz {
            let (m1, m2) = state.mz_moments();
            (Some(vec![m1]), Some(vec![m2]))
        } else {
            (None, None)
        };
        let mut entropy_series = Vec::new();
        if probes.entropy_steps.contains(&0) {
            entropy_series.push((0, state.half_chain_entropy(cut)?));
        }
        for (k, op) in self.ops.iter().enumerate() {
            match op {
                CompiledOp::Gate { a, b, matrix } => {
                    state.apply_two_qubit(matrix, *a, *b);
                    measurements.push(0);
                }
                CompiledOp::Reset { site } => {
                    measurements.push(state.measure_and_reset(*site, &mut rng)?);
                }
            }
            if let (Some(s1), Some(s2)) = (mz_series.as_mut(), mz_sq_series.as_mut()) {
                let (m1, m2) = state.mz_moments();
                s1.push(m1);
                s2.push(m2);
            }
            if probes.entropy_steps.contains(&(k + 1)) {
                entropy_series.push((k + 1, state.half_chain_entropy(cut)?));
            }
        }
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Numerical(format!("final state norm² {norm}")));
        }
        let (mz_final, mz_sq_final) = state.mz_moments();
        let final_bitstring = probes.final_bitstring.then(|| state.sample_bitstring(&mut rng));
        Ok(ShotRecord {
            measurements,
            mz_series,
            mz_sq_series,
            mz_final,
            mz_sq_final,
            final_bitstring,
            entropy_series,
            fidelity_final: state.fixed_point_fidelity(),
            shot_seed,
        })
    }

    /// Runs the circuit and hands back the final state; used by probes that
    /// need more than the recorded moments.
    pub fn run_to_state(&self, initial: &[u8], shot_seed: u64) -> Result<StateVector> {
        let mut rng: SimRng = rng_from_seed(shot_seed);
        let mut state = StateVector::from_bitstring(initial)?;
        for op in &self.ops {
            match op {
                CompiledOp::Gate { a, b, matrix } => state.apply_two_qubit(matrix, *a, *b),
                CompiledOp::Reset { site } => {
                    state.measure_and_reset(*site, &mut rng)?;
                }
            }
        }
        Ok(state)
    }
}

/// Largest chain handled by [`outcome_distribution`].
pub const MAX_DENSITY_QUBITS: usize = MAX_QUBITS / 2;

/// Exact distribution of final bitstrings averaged over all measurement
/// records, by evolving the density matrix under the gates and the reset
/// channel `ρ ↦ P₀ρP₀ + X P₁ρP₁ X`.
pub fn outcome_distribution(c: &CircuitRealization, initial: &[u8]) -> Result<Vec<f64>> {
    let l = c.l();
    if l > MAX_DENSITY_QUBITS {
        return Err(Error::Capacity {
            requested: l,
            cap: MAX_DENSITY_QUBITS,
        });
    }
    if initial.len() != l {
        return Err(Error::Parameter(format!(
            "initial bitstring has length {} but L = {l}",
            initial.len()
        )));
    }
    // ρ stored as a 2L-qubit vector: row bits above column bits
    let n = 1usize << l;
    let mut rho = vec![C64::new(0.0, 0.0); n * n];
    let i0 = bits_to_index(initial);
    rho[(i0 << l) | i0] = C64::new(1.0, 0.0);
    let mut rho = StateVector { l: 2 * l, amps: rho };
    for s in &c.steps {
        match s {
            StepOp::Chaotic { site, gate } => {
                let (a, b) = (*site, c.params.partner(*site));
                let u = to_array(&gate.as_matrix());
                let u_conj = u.map(|row| row.map(|z| z.conj()));
                rho.apply_two_qubit(&u, a + l, b + l);
                rho.apply_two_qubit(&u_conj, a, b);
            }
            StepOp::Control { site } => {
                let m = 1usize << site;
                let both = m | (m << l);
                let zero = C64::new(0.0, 0.0);
                for idx in 0..rho.amps.len() {
                    let (r, col) = (idx >> l, idx & (n - 1));
                    if r & m != 0 || col & m != 0 {
                        continue;
                    }
                    let flipped = rho.amps[idx | both];
                    rho.amps[idx] += flipped;
                    rho.amps[idx | both] = zero;
                    rho.amps[idx | m] = zero;
                    rho.amps[idx | (m << l)] = zero;
                }
            }
        }
    }
    Ok((0..n).map(|i| rho.amps[(i << l) | i].re).collect())
}

/// One trajectory of `c` from the basis state `initial`.
pub fn run_shot(
    c: &CircuitRealization,
    initial: &[u8],
    shot_seed: u64,
    probes: &ProbeConfig,
) -> Result<ShotRecord> {
    SvProgram::compile(c)?.run_shot(initial, shot_seed, probes)
}
