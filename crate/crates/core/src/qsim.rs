//! Dense statevector and density-matrix engine.
//!
//! Qubit 0 is the leftmost character of a bitstring and the most significant
//! bit of a basis-state index. Two-qubit gates take their targets in the
//! order of the gate's own basis: the first target is its more significant
//! bit.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::rng;

const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => linalg::identity(2),
            Pauli::X => linalg::sigma_x(),
            Pauli::Y => linalg::sigma_y(),
            Pauli::Z => linalg::sigma_z(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_char(ch: char) -> Result<Self> {
        match ch.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::input(format!("not a Pauli label: {other:?}"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-qubit rotation taking this Pauli's +1 eigenstate to `|0⟩`, so a
    /// computational-basis readout afterwards measures this operator.
    pub fn basis_change(self) -> CMatrix {
        match self {
            Pauli::I | Pauli::Z => linalg::identity(2),
            Pauli::X => linalg::hadamard(),
            Pauli::Y => {
                let s_dag = linalg::from_rows(&[&[ONE, ZERO], &[ZERO, -linalg::I]]);
                linalg::hadamard() * s_dag
            }
        }
    }
}

/// Tensor product of single-qubit Paulis, one per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(Pauli::from_char)
            .collect::<Result<_>>()
            .map(PauliString)
    }

    /// Identity everywhere except the listed `(qubit, pauli)` sites.
    pub fn sparse(n: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut ops = vec![Pauli::I; n];
        for &(q, p) in sites {
            if q >= n {
                return Err(Error::input(format!(
                    "qubit {q} out of range for {n} qubits"
                )));
            }
            ops[q] = p;
        }
        Ok(PauliString(ops))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn matrix(&self) -> CMatrix {
        let mats: Vec<CMatrix> = self.0.iter().map(|p| p.matrix()).collect();
        linalg::kron_all(mats.iter())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

fn parse_bits(bits: &str) -> Result<Vec<u8>> {
    bits.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::input(format!("bitstring contains {other:?}"))),
        })
        .collect()
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn index_to_bitstring(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| {
            if (index >> (n - 1 - q)) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

fn check_unitary(gate: &CMatrix, dim: usize) -> Result<()> {
    if gate.nrows() != dim || gate.ncols() != dim {
        return Err(Error::input(format!(
            "expected a {dim}x{dim} gate, got {}x{}",
            gate.nrows(),
            gate.ncols()
        )));
    }
    if !linalg::is_unitary(gate, UNITARY_TOL) {
        return Err(Error::input("gate is not unitary"));
    }
    Ok(())
}

/// Applies a `2^k`-dimensional gate to the amplitudes of `targets` in place,
/// for every assignment of the remaining bits.
fn apply_local(amps: &mut [C64], n: usize, targets: &[usize], gate: &CMatrix) {
    let k = targets.len();
    let sub = 1usize << k;
    let shifts: Vec<usize> = targets.iter().map(|&q| n - 1 - q).collect();
    let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let offsets: Vec<usize> = (0..sub)
        .map(|j| {
            shifts
                .iter()
                .enumerate()
                .fold(0, |acc, (pos, &s)| acc | (((j >> (k - 1 - pos)) & 1) << s))
        })
        .collect();
    let mut buf = vec![ZERO; sub];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (j, &o) in offsets.iter().enumerate() {
            buf[j] = amps[base | o];
        }
        for (i, &o) in offsets.iter().enumerate() {
            amps[base | o] = (0..sub).map(|j| gate[(i, j)] * buf[j]).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl Statevector {
    /// Computational basis state `|bitstring⟩`.
    pub fn new_basis_state(n_qubits: usize, bitstring: &str) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::input("a register needs at least one qubit"));
        }
        let bits = parse_bits(bitstring)?;
        if bits.len() != n_qubits {
            return Err(Error::input(format!(
                "bitstring {bitstring:?} has length {} but the register has {n_qubits} qubits",
                bits.len()
            )));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[bits_to_index(&bits)] = ONE;
        Ok(Statevector {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes, normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::input(format!(
                "{len} amplitudes is not a qubit register"
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::input("cannot normalize a zero or non-finite vector"));
        }
        Ok(Statevector {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &Statevector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn apply_1q(&mut self, gate: &CMatrix, target: usize) -> Result<()> {
        check_unitary(gate, 2)?;
        linalg::check_targets(self.n_qubits, &[target])?;
        apply_local(&mut self.amplitudes, self.n_qubits, &[target], gate);
        Ok(())
    }

    pub fn apply_2q(&mut self, gate: &CMatrix, q1: usize, q2: usize) -> Result<()> {
        if q1 == q2 {
            return Err(Error::input(format!(
                "two-qubit gate on equal targets ({q1}, {q2})"
            )));
        }
        check_unitary(gate, 4)?;
        linalg::check_targets(self.n_qubits, &[q1, q2])?;
        apply_local(&mut self.amplitudes, self.n_qubits, &[q1, q2], gate);
        Ok(())
    }

    /// Full-register operator application; `op` must be `2^n × 2^n`.
    pub fn apply_operator(&mut self, op: &CMatrix) -> Result<()> {
        let dim = self.amplitudes.len();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::input(
                "operator dimension does not match the register",
            ));
        }
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        self.amplitudes = (op * v).iter().copied().collect();
        Ok(())
    }

    pub fn expectation_pauli(&self, p: &PauliString) -> Result<f64> {
        if p.len() != self.n_qubits {
            return Err(Error::input(format!(
                "Pauli string of length {} on a {}-qubit state",
                p.len(),
                self.n_qubits
            )));
        }
        let n = self.n_qubits;
        let mut flip = 0usize;
        let mut y_count = 0u32;
        let mut phase_mask = 0usize;
        for (q, op) in p.0.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match op {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    phase_mask |= bit;
                    y_count += 1;
                }
                Pauli::Z => phase_mask |= bit,
            }
        }
        // Y = i X Z, so P|i⟩ = i^{#Y} (-1)^{popcount(i & phase_mask)} |i ^ flip⟩
        let global = linalg::I.powu(y_count);
        let total: C64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let sign = if (i & phase_mask).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                self.amplitudes[i ^ flip].conj() * a * sign
            })
            .sum();
        Ok((global * total).re)
    }

    /// Reduced density matrix of the qubits in `keep`, in that order.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::input(
                "reduced_density needs at least one qubit to keep",
            ));
        }
        linalg::check_targets(self.n_qubits, keep)?;
        let n = self.n_qubits;
        let k = keep.len();
        let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let compose = |a: usize, r: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                idx |= ((a >> (k - 1 - pos)) & 1) << (n - 1 - q);
            }
            for (pos, &q) in rest.iter().enumerate() {
                idx |= ((r >> (rest.len() - 1 - pos)) & 1) << (n - 1 - q);
            }
            idx
        };
        let dk = 1usize << k;
        let mut m = CMatrix::zeros(dk, dk);
        for r in 0..(1usize << rest.len()) {
            for a in 0..dk {
                let va = self.amplitudes[compose(a, r)];
                if va == ZERO {
                    continue;
                }
                for b in 0..dk {
                    m[(a, b)] += va * self.amplitudes[compose(b, r)].conj();
                }
            }
        }
        Ok(DensityMatrix {
            n_qubits: k,
            matrix: m,
        })
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        DensityMatrix {
            n_qubits: self.n_qubits,
            matrix: &v * v.adjoint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity at the crate
    /// tolerances (1e-10, 1e-10, -1e-9).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let dm = Self::new_unchecked(matrix)?;
        dm.validate()?;
        Ok(dm)
    }

    /// Only checks the shape; used for intermediate estimates that may be
    /// unphysical.
    pub fn new_unchecked(matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if dim < 2 || !dim.is_power_of_two() || !matrix.is_square() {
            return Err(Error::input(format!(
                "{}x{} is not a qubit density matrix shape",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DensityMatrix {
            n_qubits: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        DensityMatrix {
            n_qubits,
            matrix: linalg::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !linalg::is_hermitian(&self.matrix, 1e-10) {
            return Err(Error::numerical("density matrix is not Hermitian"));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::numerical(format!("density matrix trace is {tr}")));
        }
        let min = self.eigenvalues()[0];
        if min < -1e-9 {
            return Err(Error::numerical(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn expectation(&self, op: &CMatrix) -> f64 {
        linalg::trace(&(op * &self.matrix)).re
    }

    pub fn expectation_pauli(&self, p: &PauliString) -> Result<f64> {
        if p.len() != self.n_qubits {
            return Err(Error::input("Pauli string length does not match the state"));
        }
        Ok(self.expectation(&p.matrix()))
    }

    fn apply_local_unitary(&mut self, gate: &CMatrix, targets: &[usize]) {
        let dim = self.matrix.nrows();
        let n = self.n_qubits;
        // ρ → U ρ U†: act on columns, then on rows with the conjugate.
        let mut col = vec![ZERO; dim];
        for j in 0..dim {
            for (i, v) in col.iter_mut().enumerate() {
                *v = self.matrix[(i, j)];
            }
            apply_local(&mut col, n, targets, gate);
            for (i, v) in col.iter().enumerate() {
                self.matrix[(i, j)] = *v;
            }
        }
        let conj = gate.map(|z| z.conj());
        for i in 0..dim {
            for (j, v) in col.iter_mut().enumerate() {
                *v = self.matrix[(i, j)];
            }
            apply_local(&mut col, n, targets, &conj);
            for (j, v) in col.iter().enumerate() {
                self.matrix[(i, j)] = *v;
            }
        }
    }

    pub fn apply_1q(&mut self, gate: &CMatrix, target: usize) -> Result<()> {
        check_unitary(gate, 2)?;
        linalg::check_targets(self.n_qubits, &[target])?;
        self.apply_local_unitary(gate, &[target]);
        Ok(())
    }

    pub fn apply_2q(&mut self, gate: &CMatrix, q1: usize, q2: usize) -> Result<()> {
        if q1 == q2 {
            return Err(Error::input(format!(
                "two-qubit gate on equal targets ({q1}, {q2})"
            )));
        }
        check_unitary(gate, 4)?;
        linalg::check_targets(self.n_qubits, &[q1, q2])?;
        self.apply_local_unitary(gate, &[q1, q2]);
        Ok(())
    }

    pub fn apply_operator(&mut self, op: &CMatrix) -> Result<()> {
        if op.nrows() != self.matrix.nrows() || op.ncols() != self.matrix.ncols() {
            return Err(Error::input(
                "operator dimension does not match the register",
            ));
        }
        self.matrix = op * &self.matrix * op.adjoint();
        Ok(())
    }

    /// Partial trace keeping the qubits in `keep`, in that order.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::input(
                "reduced density needs at least one qubit to keep",
            ));
        }
        linalg::check_targets(self.n_qubits, keep)?;
        let n = self.n_qubits;
        let k = keep.len();
        let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let compose = |a: usize, r: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                idx |= ((a >> (k - 1 - pos)) & 1) << (n - 1 - q);
            }
            for (pos, &q) in rest.iter().enumerate() {
                idx |= ((r >> (rest.len() - 1 - pos)) & 1) << (n - 1 - q);
            }
            idx
        };
        let dk = 1usize << k;
        let mut m = CMatrix::zeros(dk, dk);
        for r in 0..(1usize << rest.len()) {
            for a in 0..dk {
                let ia = compose(a, r);
                for b in 0..dk {
                    m[(a, b)] += self.matrix[(ia, compose(b, r))];
                }
            }
        }
        Ok(DensityMatrix {
            n_qubits: k,
            matrix: m,
        })
    }

    /// Marginal outcome distribution of `measured` (in that order) in the
    /// computational basis.
    pub fn marginal_probabilities(&self, measured: &[usize]) -> Result<Vec<f64>> {
        linalg::check_targets(self.n_qubits, measured)?;
        let n = self.n_qubits;
        let k = measured.len();
        let mut out = vec![0.0; 1 << k];
        for (idx, p) in self.probabilities().into_iter().enumerate() {
            let key = measured
                .iter()
                .fold(0usize, |acc, &q| (acc << 1) | ((idx >> (n - 1 - q)) & 1));
            out[key] += p;
        }
        Ok(out)
    }
}

/// Histogram of measured bitstrings for one basis setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub setting: String,
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
}

impl CountsRecord {
    /// Builds a record from per-outcome counts indexed by basis index.
    pub fn from_vector(setting: impl Into<String>, counts: &[u64]) -> Result<Self> {
        let len = counts.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::input(format!(
                "{len} outcomes is not a bit register"
            )));
        }
        let n = len.trailing_zeros() as usize;
        let map = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (index_to_bitstring(i, n), c))
            .collect();
        Ok(CountsRecord {
            setting: setting.into(),
            counts: map,
            shots: counts.iter().sum(),
        })
    }

    pub fn n_bits(&self) -> Option<usize> {
        self.counts.keys().next().map(|k| k.len())
    }

    /// Dense count vector over `2^n_bits` outcomes.
    pub fn to_vector(&self, n_bits: usize) -> Result<Vec<u64>> {
        let mut v = vec![0u64; 1 << n_bits];
        for (bits, &c) in &self.counts {
            if bits.len() != n_bits {
                return Err(Error::input(format!(
                    "bitstring {bits:?} does not have {n_bits} bits"
                )));
            }
            v[bits_to_index(&parse_bits(bits)?)] += c;
        }
        Ok(v)
    }

    pub fn frequencies(&self, n_bits: usize) -> Result<Vec<f64>> {
        if self.shots == 0 {
            return Err(Error::input("no shots recorded"));
        }
        Ok(self
            .to_vector(n_bits)?
            .into_iter()
            .map(|c| c as f64 / self.shots as f64)
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        let total: u64 = self.counts.values().sum();
        if total != self.shots {
            return Err(Error::input(format!(
                "counts sum to {total} but {} shots were recorded",
                self.shots
            )));
        }
        let mut lens = self.counts.keys().map(|k| k.len());
        if let Some(first) = lens.next() {
            if lens.any(|l| l != first) {
                return Err(Error::input("bitstrings of unequal length"));
            }
        }
        Ok(())
    }
}

/// Checks a probability vector and renormalizes it; entries down to -1e-9
/// are treated as round-off and clipped.
pub fn normalize_probabilities(probabilities: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = probabilities.iter().find(|p| **p < -1e-9 || !p.is_finite()) {
        return Err(Error::input(format!("invalid probability {p}")));
    }
    let clipped: Vec<f64> = probabilities.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::input("probabilities sum to zero"));
    }
    Ok(clipped.into_iter().map(|p| p / total).collect())
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(probabilities: &[f64], trials: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probabilities.len()];
    let mut remaining = trials;
    let mut mass = 1.0f64;
    for (i, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probabilities.len() {
            out[i] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q)
                .expect("conditional probability lies in (0, 1)")
                .sample(rng)
        };
        out[i] = draw;
        remaining -= draw;
        mass -= p;
    }
    out
}

pub fn sample_counts_with<R: Rng + ?Sized>(
    probabilities: &[f64],
    shots: u64,
    setting: &str,
    rng: &mut R,
) -> Result<CountsRecord> {
    let p = normalize_probabilities(probabilities)?;
    let counts = multinomial(&p, shots, rng);
    CountsRecord::from_vector(setting, &counts)
}

/// Multinomial shot sampling with a private ChaCha20 stream for `seed`.
pub fn sample_counts(probabilities: &[f64], shots: u64, seed: u64) -> Result<CountsRecord> {
    let mut rng = rng::rng_from_seed(seed);
    sample_counts_with(probabilities, shots, "Z", &mut rng)
}
