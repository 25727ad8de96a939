//! Gate lists on a linear qubit array, their dense unitaries, and the
//! Trotter / swap-network constructions.

pub mod kak;
pub mod trotter;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

pub use kak::{compile, kak_decompose, zyz_angles, CompiledGate, CompiledOp};
pub use trotter::{
    pair_unitary, reversed_swap_network_circuit, swap_network_circuit, swap_network_schedule,
    trotter_u1_circuit,
};

const MAX_DENSE_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Single {
        qubit: usize,
        matrix: CMatrix,
    },
    /// Arbitrary two-qubit unitary; `qubits.0` is the matrix's more
    /// significant bit.
    Two {
        qubits: (usize, usize),
        matrix: CMatrix,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn targets(&self) -> Vec<usize> {
        match self {
            Gate::Single { qubit, .. } => vec![*qubit],
            Gate::Two { qubits, .. } => vec![qubits.0, qubits.1],
            Gate::Cnot { control, target } => vec![*control, *target],
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            Gate::Single { matrix, .. } | Gate::Two { matrix, .. } => matrix.clone(),
            Gate::Cnot { .. } => linalg::cnot(),
        }
    }

    pub fn is_entangler(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    fn kind(&self) -> &'static str {
        match self {
            Gate::Single { .. } => "1q",
            Gate::Two { .. } => "2q",
            Gate::Cnot { .. } => "cx",
        }
    }
}

/// A gate list acting on physical positions `0..n_qubits`.
///
/// `layout_in[i]` is the logical qubit held at physical position `i` before
/// the first gate and `layout_out[i]` the one held there after the last
/// gate. The circuit implements `e^{i global_phase}` times the product of
/// its gates.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub layout_in: Vec<usize>,
    pub layout_out: Vec<usize>,
    pub global_phase: f64,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        let id: Vec<usize> = (0..n_qubits).collect();
        Circuit {
            n_qubits,
            gates: Vec::new(),
            layout_in: id.clone(),
            layout_out: id,
            global_phase: 0.0,
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let targets = gate.targets();
        linalg::check_targets(self.n_qubits, &targets)?;
        match &gate {
            Gate::Single { matrix, .. } if matrix.shape() != (2, 2) => {
                return Err(Error::input("single-qubit gate must be 2x2"))
            }
            Gate::Two { matrix, .. } if matrix.shape() != (4, 4) => {
                return Err(Error::input("two-qubit gate must be 4x4"))
            }
            _ => {}
        }
        if targets.len() == 2 && targets[0].abs_diff(targets[1]) != 1 {
            return Err(Error::input(format!(
                "two-qubit gate on non-adjacent positions {} and {}",
                targets[0], targets[1]
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Physical position of logical qubit `logical` after the circuit.
    pub fn output_position(&self, logical: usize) -> Result<usize> {
        self.layout_out
            .iter()
            .position(|&l| l == logical)
            .ok_or_else(|| Error::input(format!("logical qubit {logical} not in layout")))
    }

    /// Physical bitstring that prepares the logical basis state `logical_bits`.
    pub fn physical_input_bits(&self, logical_bits: &str) -> Result<String> {
        let chars: Vec<char> = logical_bits.chars().collect();
        if chars.len() != self.n_qubits {
            return Err(Error::input(format!(
                "bitstring {logical_bits:?} does not have {} bits",
                self.n_qubits
            )));
        }
        Ok(self.layout_in.iter().map(|&l| chars[l]).collect())
    }

    pub fn entangler_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_entangler()).count()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_DENSE_QUBITS {
        return Err(Error::Resource(format!(
            "dense unitary of {n} qubits exceeds the {MAX_DENSE_QUBITS}-qubit limit"
        )));
    }
    Ok(())
}

/// Product of the embedded gates in application order, including the
/// circuit's global phase.
pub fn circuit_unitary(circuit: &Circuit) -> Result<CMatrix> {
    let n = circuit.n_qubits;
    check_size(n)?;
    let mut u = linalg::identity(1 << n);
    for gate in &circuit.gates {
        u = linalg::embed(n, &gate.targets(), &gate.matrix())? * u;
    }
    Ok(u * C64::from_polar(1.0, circuit.global_phase))
}

/// The circuit's action in logical qubit order: `P_out† · U · P_in`.
pub fn logical_unitary(circuit: &Circuit) -> Result<CMatrix> {
    let u = circuit_unitary(circuit)?;
    let p_in = linalg::layout_operator(&circuit.layout_in);
    let p_out = linalg::layout_operator(&circuit.layout_out);
    Ok(p_out.adjoint() * u * p_in)
}

/// Number of non-trivial Euler rotations in a single-qubit unitary, at most 3.
pub fn rotation_count(u: &CMatrix) -> usize {
    const TOL: f64 = 1e-9;
    let trivial = |angle: f64| {
        let r = angle.rem_euclid(2.0 * std::f64::consts::PI);
        r < TOL || 2.0 * std::f64::consts::PI - r < TOL
    };
    let (alpha, beta, gamma, _) = zyz_angles(u);
    if trivial(beta) {
        usize::from(!trivial(alpha + gamma))
    } else {
        1 + usize::from(!trivial(alpha)) + usize::from(!trivial(gamma))
    }
}

/// `(entanglers, single-qubit rotations)` of a compiled circuit.
pub fn gate_counts(circuit: &Circuit) -> Result<(usize, usize)> {
    let mut entanglers = 0;
    let mut rotations = 0;
    for gate in &circuit.gates {
        match gate {
            Gate::Cnot { .. } => entanglers += 1,
            Gate::Single { matrix, .. } => rotations += rotation_count(matrix),
            Gate::Two { .. } => {
                return Err(Error::input(
                    "circuit contains uncompiled two-qubit gates; run compile first",
                ))
            }
        }
    }
    Ok((entanglers, rotations))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: String,
    pub targets: Vec<usize>,
    /// Row-major `(re, im)` pairs.
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub n_qubits: usize,
    pub layout_in: Vec<usize>,
    pub layout_out: Vec<usize>,
    pub global_phase: f64,
    pub gates: Vec<GateRecord>,
}

fn flatten(m: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

fn unflatten(v: &[f64], dim: usize) -> Result<CMatrix> {
    if v.len() != 2 * dim * dim {
        return Err(Error::input(format!(
            "expected {} matrix reals, got {}",
            2 * dim * dim,
            v.len()
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        C64::new(v[k], v[k + 1])
    }))
}

impl Circuit {
    pub fn to_record(&self) -> CircuitRecord {
        CircuitRecord {
            n_qubits: self.n_qubits,
            layout_in: self.layout_in.clone(),
            layout_out: self.layout_out.clone(),
            global_phase: self.global_phase,
            gates: self
                .gates
                .iter()
                .map(|g| GateRecord {
                    kind: g.kind().to_string(),
                    targets: g.targets(),
                    matrix: flatten(&g.matrix()),
                })
                .collect(),
        }
    }

    pub fn from_record(record: &CircuitRecord) -> Result<Self> {
        let mut c = Circuit::new(record.n_qubits);
        c.layout_in = record.layout_in.clone();
        c.layout_out = record.layout_out.clone();
        c.global_phase = record.global_phase;
        for g in &record.gates {
            let gate = match (g.kind.as_str(), g.targets.as_slice()) {
                ("1q", &[q]) => Gate::Single {
                    qubit: q,
                    matrix: unflatten(&g.matrix, 2)?,
                },
                ("2q", &[a, b]) => Gate::Two {
                    qubits: (a, b),
                    matrix: unflatten(&g.matrix, 4)?,
                },
                ("cx", &[a, b]) => Gate::Cnot {
                    control: a,
                    target: b,
                },
                (kind, targets) => {
                    return Err(Error::input(format!(
                        "bad gate record: kind {kind:?} on {targets:?}"
                    )))
                }
            };
            c.push(gate)?;
        }
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn empty_and_single_swap() {
        let c = Circuit::new(3);
        assert!(max_abs_diff(&circuit_unitary(&c).unwrap(), &linalg::identity(8)) < 1e-15);

        let mut c = Circuit::new(2);
        c.push(Gate::Two {
            qubits: (0, 1),
            matrix: linalg::swap(),
        })
        .unwrap();
        assert!(max_abs_diff(&circuit_unitary(&c).unwrap(), &linalg::swap()) < 1e-15);
    }

    #[test]
    fn push_rejects_non_adjacent_and_bad_shapes() {
        let mut c = Circuit::new(3);
        assert!(c
            .push(Gate::Cnot {
                control: 0,
                target: 2
            })
            .is_err());
        assert!(c
            .push(Gate::Cnot {
                control: 1,
                target: 1
            })
            .is_err());
        assert!(c
            .push(Gate::Single {
                qubit: 0,
                matrix: linalg::identity(4)
            })
            .is_err());
        assert!(c
            .push(Gate::Cnot {
                control: 2,
                target: 1
            })
            .is_ok());
    }

    #[test]
    fn size_limit() {
        let c = Circuit::new(11);
        assert!(matches!(circuit_unitary(&c), Err(Error::Resource(_))));
    }

    #[test]
    fn rotation_counts() {
        assert_eq!(rotation_count(&linalg::identity(2)), 0);
        assert_eq!(rotation_count(&linalg::rz(0.3)), 1);
        assert_eq!(rotation_count(&linalg::ry(0.3)), 1);
        assert_eq!(rotation_count(&(linalg::rz(0.2) * linalg::ry(0.4))), 2);
        assert_eq!(rotation_count(&(linalg::rx(0.7))), 3);
        assert_eq!(rotation_count(&linalg::hadamard()), 2);
    }

    #[test]
    fn json_round_trip() {
        let mut c = Circuit::new(2);
        c.push(Gate::Single {
            qubit: 1,
            matrix: linalg::hadamard(),
        })
        .unwrap();
        c.push(Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        c.push(Gate::Two {
            qubits: (1, 0),
            matrix: linalg::swap(),
        })
        .unwrap();
        c.layout_out = vec![1, 0];
        c.global_phase = 0.25;
        let rec = c.to_record();
        assert_eq!(rec.gates[0].matrix.len(), 8);
        assert_eq!(rec.gates[2].matrix.len(), 32);
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
