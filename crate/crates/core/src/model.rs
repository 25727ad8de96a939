//! Collective-oscillation spin Hamiltonian for a monochromatic neutrino beam.
//!
//! Energies are in units of the two-body coupling η and times in 1/η.
//! Neutrinos are 0-based here; user-facing labels add one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qsim::Statevector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutrinoModel {
    pub n: usize,
    pub b: [f64; 3],
    /// Symmetric, zero diagonal, row-major `n × n`.
    pub j: Vec<Vec<f64>>,
    pub theta_v: f64,
    pub matter_a: f64,
}

/// Builds the model on the uniform angle grid
/// `θ_pq = arccos(max_cos)·|p−q|/(n−1)` with `J_pq = 1 − cos θ_pq`.
///
/// The one-body field is `b = (sin 2θ_v, 0, −cos 2θ_v + A/2)`.
pub fn build_model(n: usize, theta_v: f64, max_cos: f64, matter_a: f64) -> Result<NeutrinoModel> {
    if n < 2 {
        return Err(Error::input(format!(
            "need at least two neutrinos, got {n}"
        )));
    }
    if !(max_cos > 0.0 && max_cos <= 1.0) {
        return Err(Error::input(format!(
            "max_cos must lie in (0, 1], got {max_cos}"
        )));
    }
    if !theta_v.is_finite() || !matter_a.is_finite() {
        return Err(Error::input("model parameters must be finite"));
    }
    let theta_max = max_cos.acos();
    let j = (0..n)
        .map(|p| {
            (0..n)
                .map(|q| {
                    if p == q {
                        0.0
                    } else {
                        let theta = theta_max * p.abs_diff(q) as f64 / (n - 1) as f64;
                        1.0 - theta.cos()
                    }
                })
                .collect()
        })
        .collect();
    let two = 2.0 * theta_v;
    Ok(NeutrinoModel {
        n,
        b: [two.sin(), 0.0, -two.cos() + 0.5 * matter_a],
        j,
        theta_v,
        matter_a,
    })
}

impl NeutrinoModel {
    pub fn coupling(&self, p: usize, q: usize) -> f64 {
        self.j[p][q]
    }

    /// `b·σ` as a 2×2 matrix.
    pub fn one_body(&self) -> CMatrix {
        linalg::sigma_x().scale(self.b[0])
            + linalg::sigma_y().scale(self.b[1])
            + linalg::sigma_z().scale(self.b[2])
    }

    pub fn check_neutrino(&self, k: usize) -> Result<()> {
        if k >= self.n {
            return Err(Error::input(format!(
                "neutrino index {k} out of range for {} neutrinos",
                self.n
            )));
        }
        Ok(())
    }

    /// All pairs `p < q` in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        all_pairs(self.n)
    }
}

pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
        .collect()
}

/// `σ·σ` on two qubits.
pub fn exchange_operator() -> CMatrix {
    [linalg::sigma_x(), linalg::sigma_y(), linalg::sigma_z()]
        .iter()
        .map(|s| linalg::kron(s, s))
        .fold(CMatrix::zeros(4, 4), |acc, m| acc + m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairHamiltonian {
    pub p: usize,
    pub q: usize,
    pub h: CMatrix,
}

/// `h_pq = b·(σ_p + σ_q)/(n−1) + J_pq σ_p·σ_q`, with `p` the more
/// significant qubit of the 4×4 matrix.
pub fn pair_hamiltonian(model: &NeutrinoModel, p: usize, q: usize) -> Result<PairHamiltonian> {
    if p >= q {
        return Err(Error::input(format!("pair ({p}, {q}) must satisfy p < q")));
    }
    model.check_neutrino(q)?;
    let id = linalg::identity(2);
    let b = model.one_body().scale(1.0 / (model.n - 1) as f64);
    let h = linalg::kron(&b, &id)
        + linalg::kron(&id, &b)
        + exchange_operator().scale(model.coupling(p, q));
    Ok(PairHamiltonian { p, q, h })
}

/// `H = Σ_k b·σ_k + Σ_{p<q} J_pq σ_p·σ_q` on `2^n` states.
pub fn full_hamiltonian(model: &NeutrinoModel) -> CMatrix {
    let n = model.n;
    let dim = 1usize << n;
    let one = model.one_body();
    let mut h = CMatrix::zeros(dim, dim);
    for k in 0..n {
        h += linalg::embed(n, &[k], &one).expect("site in range");
    }
    let ex = exchange_operator();
    for (p, q) in model.pairs() {
        h += linalg::embed(n, &[p, q], &ex)
            .expect("pair in range")
            .scale(model.coupling(p, q));
    }
    h
}

/// Eigen-decomposition of `H`, reused across evolution times.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    values: Vec<f64>,
    vectors: CMatrix,
}

impl ExactPropagator {
    pub fn new(model: &NeutrinoModel) -> Self {
        let (values, vectors) = linalg::hermitian_eigen(&full_hamiltonian(model));
        ExactPropagator { values, vectors }
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.values
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        linalg::spectral_map(&self.values, &self.vectors, |v| {
            linalg::C64::from_polar(1.0, -v * t)
        })
    }

    pub fn evolve(&self, state: &Statevector, t: f64) -> Result<Statevector> {
        let mut out = state.clone();
        out.apply_operator(&self.unitary(t))?;
        Ok(out)
    }
}

/// `exp(−iHt)`.
pub fn exact_propagator(model: &NeutrinoModel, t: f64) -> CMatrix {
    ExactPropagator::new(model).unitary(t)
}

pub fn exact_evolve(state: &Statevector, model: &NeutrinoModel, t: f64) -> Result<Statevector> {
    if state.n_qubits() != model.n {
        return Err(Error::input(format!(
            "{}-qubit state for a {}-neutrino model",
            state.n_qubits(),
            model.n
        )));
    }
    ExactPropagator::new(model).evolve(state, t)
}
