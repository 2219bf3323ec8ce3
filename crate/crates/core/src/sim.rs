//! Dense state-vector simulator.
//!
//! Basis index `z` stores qubit `q` in bit `q` (little-endian: qubit 0 is the least
//! significant bit). Global phase is never normalized away; everything observable
//! from outside (overlap magnitudes, Z expectations, probabilities) is phase-invariant.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Default register cap: 2^20 amplitudes, 16 MiB at double precision.
pub const DEFAULT_QUBIT_CAP: usize = 20;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n` qubits under the default cap.
    pub fn new_zero_state(n: usize) -> Result<Self> {
        Self::new_zero_state_with_cap(n, DEFAULT_QUBIT_CAP)
    }

    pub fn new_zero_state_with_cap(n: usize, cap: usize) -> Result<Self> {
        if n == 0 || n > cap {
            return Err(Error::Capacity { requested: n, cap });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits: n,
            amplitudes,
        })
    }

    /// Wraps an explicit normalized amplitude vector.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("amplitudes"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies a 2x2 matrix `[[m00, m01], [m10, m11]]` to every amplitude pair of `qubit`.
    fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1usize << qubit;
        for base in (0..self.amplitudes.len()).step_by(stride << 1) {
            for lo in base..base + stride {
                let hi = lo + stride;
                let a0 = self.amplitudes[lo];
                let a1 = self.amplitudes[hi];
                self.amplitudes[lo] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[hi] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn apply_hadamard(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        self.apply_single(qubit, [[h, h], [h, -h]]);
        Ok(())
    }

    /// RY(angle) = [[cos a/2, -sin a/2], [sin a/2, cos a/2]].
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(Error::NonFinite("RY angle"));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
        self.apply_single(qubit, [[c, -s], [s, c]]);
        Ok(())
    }

    /// RZ(angle) = diag(e^{-i a/2}, e^{+i a/2}).
    pub fn apply_rz(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(Error::NonFinite("RZ angle"));
        }
        let phase0 = Complex64::from_polar(1.0, -angle / 2.0);
        let phase1 = Complex64::from_polar(1.0, angle / 2.0);
        let mask = 1usize << qubit;
        for (z, amp) in self.amplitudes.iter_mut().enumerate() {
            *amp *= if z & mask == 0 { phase0 } else { phase1 };
        }
        Ok(())
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::SameQubit(a));
        }
        let mask = (1usize << a) | (1usize << b);
        for (z, amp) in self.amplitudes.iter_mut().enumerate() {
            if z & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                context: "inner product",
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn expectation_pauli_z(&self, qubit: usize) -> Result<f64> {
        self.expectation_z_string(&[qubit])
    }

    /// Expectation of a tensor product of Z on the listed qubits.
    pub fn expectation_z_string(&self, qubits: &[usize]) -> Result<f64> {
        let mut mask = 0usize;
        for &q in qubits {
            self.check_qubit(q)?;
            mask |= 1 << q;
        }
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(z, a)| {
                let p = a.norm_sqr();
                if (z & mask).count_ones() % 2 == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum())
    }

    /// Draws `shots` i.i.d. computational-basis outcomes from |amp_z|^2.
    ///
    /// Counts are generated as a multinomial via successive conditional binomials, so the
    /// cost is linear in the basis size rather than in `shots`.
    pub fn sample_measurements(&self, shots: u64, seed: u64) -> Result<MeasurementCounts> {
        let indices = self.sample_index_counts(shots, seed)?;
        let counts = indices
            .into_iter()
            .map(|(z, c)| (bitstring(z, self.n_qubits), c))
            .collect();
        Ok(MeasurementCounts {
            n_qubits: self.n_qubits,
            shots,
            counts,
        })
    }

    /// Same draw as [`sample_measurements`](Self::sample_measurements), keyed by basis index.
    pub fn sample_index_counts(&self, shots: u64, seed: u64) -> Result<BTreeMap<usize, u64>> {
        if shots == 0 {
            return Err(Error::InvalidParameter("shots must be positive".into()));
        }
        let mut rng = rng_from_seed(seed);
        let probs = self.probabilities();
        let total: f64 = probs.iter().sum();
        let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let mut remaining = shots;
        let mut remaining_mass = total;
        let mut counts = BTreeMap::new();
        for (z, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let c = if z == last_nonzero {
                remaining
            } else {
                let q = (p / remaining_mass).clamp(0.0, 1.0);
                Binomial::new(remaining, q)
                    .map_err(|e| Error::Numerical(format!("binomial sampler: {e}")))?
                    .sample(&mut rng)
            };
            remaining_mass -= p;
            remaining -= c;
            if c > 0 {
                counts.insert(z, c);
            }
        }
        Ok(counts)
    }
}

/// Bitstring for basis index `z`, written most significant qubit first (q_{n-1} ... q_0).
pub fn bitstring(z: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .rev()
        .map(|q| if z >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementCounts {
    pub n_qubits: usize,
    pub shots: u64,
    /// Outcome bitstring (q_{n-1} ... q_0) to count; outcomes never observed are absent.
    pub counts: BTreeMap<String, u64>,
}

impl MeasurementCounts {
    pub fn get(&self, bits: &str) -> u64 {
        self.counts.get(bits).copied().unwrap_or(0)
    }

    pub fn frequency(&self, bits: &str) -> f64 {
        self.get(bits) as f64 / self.shots as f64
    }
}
