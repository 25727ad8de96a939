//! Parametric noise: two-qubit depolarizing after every entangling gate and
//! per-qubit readout bit flips, simulated exactly on the density matrix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::qsim::{self, CountsRecord, DensityMatrix, Pauli, PauliString, Statevector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub depol_2q: f64,
    /// Per physical qubit, P(read 1 | state 0).
    pub readout_e0: Vec<f64>,
    /// Per physical qubit, P(read 0 | state 1).
    pub readout_e1: Vec<f64>,
}

impl NoiseModel {
    pub fn uniform(n_qubits: usize, depol_2q: f64, e0: f64, e1: f64) -> Result<Self> {
        let m = NoiseModel {
            depol_2q,
            readout_e0: vec![e0; n_qubits],
            readout_e1: vec![e1; n_qubits],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn noiseless(n_qubits: usize) -> Self {
        NoiseModel {
            depol_2q: 0.0,
            readout_e0: vec![0.0; n_qubits],
            readout_e1: vec![0.0; n_qubits],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.depol_2q) {
            return Err(Error::input(format!(
                "depol_2q = {} outside [0, 1]",
                self.depol_2q
            )));
        }
        if self.readout_e0.len() != self.readout_e1.len() {
            return Err(Error::input("readout_e0 and readout_e1 differ in length"));
        }
        if let Some(p) = self
            .readout_e0
            .iter()
            .chain(&self.readout_e1)
            .find(|p| !ok(**p))
        {
            return Err(Error::input(format!("readout error {p} outside [0, 1]")));
        }
        Ok(())
    }

    fn check_register(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.readout_e0.len() != n {
            return Err(Error::input(format!(
                "noise model covers {} qubits, register has {n}",
                self.readout_e0.len()
            )));
        }
        Ok(())
    }
}

/// Multiplier `r` of the entangling-gate error; always odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NoiseLevel(u32);

impl NoiseLevel {
    pub fn new(r: u32) -> Result<Self> {
        if r == 0 || r.is_multiple_of(2) {
            return Err(Error::input(format!(
                "noise level r = {r} must be odd and positive"
            )));
        }
        Ok(NoiseLevel(r))
    }

    pub fn r(self) -> u32 {
        self.0
    }
}

/// Folds every entangling gate `G → G (G† G)^((r−1)/2)`; a CNOT becomes `r`
/// CNOTs.
pub fn amplify_noise(circuit: &Circuit, r: u32) -> Result<Circuit> {
    let level = NoiseLevel::new(r)?;
    let folds = (level.r() - 1) / 2;
    let mut out = Circuit {
        gates: Vec::with_capacity(circuit.gates.len()),
        ..circuit.clone()
    };
    for gate in &circuit.gates {
        out.gates.push(gate.clone());
        match gate {
            Gate::Cnot { .. } => {
                for _ in 0..2 * folds {
                    out.gates.push(gate.clone());
                }
            }
            Gate::Two { qubits, matrix } => {
                for _ in 0..folds {
                    out.gates.push(Gate::Two {
                        qubits: *qubits,
                        matrix: matrix.adjoint(),
                    });
                    out.gates.push(gate.clone());
                }
            }
            Gate::Single { .. } => {}
        }
    }
    Ok(out)
}

/// `ρ → (1−p) ρ + p (𝟙/4)_{ab} ⊗ Tr_{ab} ρ`.
pub fn depolarize_pair(rho: &mut DensityMatrix, a: usize, b: usize, p: f64) -> Result<()> {
    let n = rho.n_qubits();
    crate::linalg::check_targets(n, &[a, b])?;
    if p == 0.0 {
        return Ok(());
    }
    let (sa, sb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
    let mask = sa | sb;
    let subs = [0, sb, sa, sa | sb];
    let m = rho.matrix();
    let dim = m.nrows();
    let mut mixed = CMatrix::from_element(dim, dim, ZERO);
    for i in (0..dim).filter(|i| i & mask == 0) {
        for j in (0..dim).filter(|j| j & mask == 0) {
            let reduced: crate::linalg::C64 = subs.iter().map(|&k| m[(i | k, j | k)]).sum();
            for &k in &subs {
                mixed[(i | k, j | k)] = reduced * 0.25;
            }
        }
    }
    let out = m.scale(1.0 - p) + mixed.scale(p);
    *rho = DensityMatrix::new_unchecked(out)?;
    Ok(())
}

/// Exact noisy evolution of `initial` (given in physical order).
pub fn evolve_density(
    circuit: &Circuit,
    initial: &Statevector,
    noise: &NoiseModel,
) -> Result<DensityMatrix> {
    let n = circuit.n_qubits;
    if initial.n_qubits() != n {
        return Err(Error::input(
            "initial state does not match the circuit width",
        ));
    }
    noise.check_register(n)?;
    let mut rho = initial.to_density();
    for gate in &circuit.gates {
        match gate {
            Gate::Single { qubit, matrix } => rho.apply_1q(matrix, *qubit)?,
            Gate::Two {
                qubits: (a, b),
                matrix,
            } => {
                rho.apply_2q(matrix, *a, *b)?;
                depolarize_pair(&mut rho, *a, *b, noise.depol_2q)?;
            }
            Gate::Cnot { control, target } => {
                rho.apply_2q(&crate::linalg::cnot(), *control, *target)?;
                depolarize_pair(&mut rho, *control, *target, noise.depol_2q)?;
            }
        }
    }
    Ok(rho)
}

/// Rotates each qubit so a Z readout measures the setting's Pauli; `I`
/// leaves the qubit in the Z basis.
pub fn rotate_to_basis(rho: &DensityMatrix, setting: &PauliString) -> Result<DensityMatrix> {
    if setting.len() != rho.n_qubits() {
        return Err(Error::input(
            "basis setting length does not match the register",
        ));
    }
    let mut out = rho.clone();
    for (q, p) in setting.0.iter().enumerate() {
        if matches!(p, Pauli::X | Pauli::Y) {
            out.apply_1q(&p.basis_change(), q)?;
        }
    }
    Ok(out)
}

/// Applies per-bit confusion matrices `[[1−e0, e1], [e0, 1−e1]]` to a
/// distribution over `bits.len()` bits; `e0[k]`, `e1[k]` belong to bit `k`.
pub fn apply_readout_errors(probs: &[f64], e0: &[f64], e1: &[f64]) -> Vec<f64> {
    let k = e0.len();
    let mut p = probs.to_vec();
    for bit in 0..k {
        let shift = k - 1 - bit;
        for idx in (0..p.len()).filter(|i| (i >> shift) & 1 == 0) {
            let one = idx | (1 << shift);
            let (p0, p1) = (p[idx], p[one]);
            p[idx] = (1.0 - e0[bit]) * p0 + e1[bit] * p1;
            p[one] = e0[bit] * p0 + (1.0 - e1[bit]) * p1;
        }
    }
    p
}

/// Outcome distribution of the physical qubits in `measured` (in that
/// order) after rotation to `setting` and readout corruption.
pub fn measured_distribution(
    rho: &DensityMatrix,
    setting: &PauliString,
    measured: &[usize],
    noise: &NoiseModel,
) -> Result<Vec<f64>> {
    noise.check_register(rho.n_qubits())?;
    let rotated = rotate_to_basis(rho, setting)?;
    let probs = rotated.marginal_probabilities(measured)?;
    let e0: Vec<f64> = measured.iter().map(|&q| noise.readout_e0[q]).collect();
    let e1: Vec<f64> = measured.iter().map(|&q| noise.readout_e1[q]).collect();
    Ok(apply_readout_errors(&probs, &e0, &e1))
}

/// Noisy execution followed by shot sampling of all qubits in `setting`.
pub fn run_noisy<R: Rng + ?Sized>(
    circuit: &Circuit,
    initial: &Statevector,
    noise: &NoiseModel,
    setting: &PauliString,
    shots: u64,
    rng: &mut R,
) -> Result<CountsRecord> {
    let rho = evolve_density(circuit, initial, noise)?;
    let all: Vec<usize> = (0..circuit.n_qubits).collect();
    let probs = measured_distribution(&rho, setting, &all, noise)?;
    qsim::sample_counts_with(&probs, shots, &setting.to_string(), rng)
}

/// Readout calibration: `|0…0⟩` and `|1…1⟩` measured with readout noise only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub zeros: CountsRecord,
    pub ones: CountsRecord,
    pub shots: u64,
}

impl CalibrationRecord {
    pub fn n_qubits(&self) -> usize {
        self.zeros.n_bits().or(self.ones.n_bits()).unwrap_or(0)
    }

    /// `(flips of |0⟩, flips of |1⟩)` on qubit `q`.
    pub fn flip_counts(&self, q: usize) -> Result<(u64, u64)> {
        let n = self.n_qubits();
        if q >= n {
            return Err(Error::input(format!("calibration has no qubit {q}")));
        }
        let flips = |rec: &CountsRecord, from: u8| -> u64 {
            rec.counts
                .iter()
                .filter(|(bits, _)| bits.as_bytes()[q] != b'0' + from)
                .map(|(_, c)| *c)
                .sum()
        };
        Ok((flips(&self.zeros, 0), flips(&self.ones, 1)))
    }

    pub fn validate(&self) -> Result<()> {
        self.zeros.validate()?;
        self.ones.validate()?;
        if self.zeros.shots != self.shots || self.ones.shots != self.shots {
            return Err(Error::input("calibration shot totals disagree"));
        }
        Ok(())
    }
}

pub fn calibration_run<R: Rng + ?Sized>(
    noise: &NoiseModel,
    n_qubits: usize,
    shots: u64,
    rng: &mut R,
) -> Result<CalibrationRecord> {
    noise.check_register(n_qubits)?;
    let dim = 1usize << n_qubits;
    let mut run = |index: usize, label: &str| {
        let mut ideal = vec![0.0; dim];
        ideal[index] = 1.0;
        let probs = apply_readout_errors(&ideal, &noise.readout_e0, &noise.readout_e1);
        qsim::sample_counts_with(&probs, shots, label, rng)
    };
    let zeros = run(0, "cal0")?;
    let ones = run(dim - 1, "cal1")?;
    Ok(CalibrationRecord { zeros, ones, shots })
}
