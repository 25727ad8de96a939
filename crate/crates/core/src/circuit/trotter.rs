//! Single-step propagator circuits.
//!
//! `U₁(t) = Π_j exp(−it b·σ_j) · Π_{p<q} exp(−it J_pq σ_p·σ_q)` with the
//! two-body factors applied first in lexicographic pair order, and the swap
//! network `U₂(t)`, which applies each exact pair propagator
//! `u_pq = exp(−it h_pq)` once while reversing the qubit line.
//!
//! Orderings are 0-based permutations of the neutrinos: `ordering[i]` is the
//! neutrino placed on physical position `i` at the start.

use super::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{exchange_operator, pair_hamiltonian, NeutrinoModel};

/// `exp(−it h_pq)`.
pub fn pair_unitary(model: &NeutrinoModel, p: usize, q: usize, t: f64) -> Result<CMatrix> {
    let h = pair_hamiltonian(model, p, q)?;
    Ok(linalg::expm_hermitian(&h.h, t))
}

pub fn trotter_u1_circuit(model: &NeutrinoModel, t: f64) -> Result<Circuit> {
    let n = model.n;
    let mut circuit = Circuit::new(n);
    let mut layout: Vec<usize> = (0..n).collect();
    let pos = |layout: &[usize], k: usize| layout.iter().position(|&l| l == k).unwrap();
    let ex = exchange_operator();
    for (p, q) in model.pairs() {
        loop {
            let (pp, pq) = (pos(&layout, p), pos(&layout, q));
            if pp.abs_diff(pq) == 1 {
                let u = linalg::expm_hermitian(&ex, t * model.coupling(p, q));
                circuit.push(Gate::Two {
                    qubits: (pp, pq),
                    matrix: u,
                })?;
                break;
            }
            let next = if pq > pp { pq - 1 } else { pq + 1 };
            circuit.push(Gate::Two {
                qubits: (pq.min(next), pq.max(next)),
                matrix: linalg::swap(),
            })?;
            layout.swap(pq, next);
        }
    }
    let one = linalg::expm_hermitian(&model.one_body(), t);
    for site in 0..n {
        circuit.push(Gate::Single {
            qubit: site,
            matrix: one.clone(),
        })?;
    }
    circuit.layout_out = layout;
    Ok(circuit)
}

fn check_ordering(n: usize, ordering: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    if ordering.len() != n {
        return Err(Error::input(format!(
            "ordering {ordering:?} is not a permutation of {n} neutrinos"
        )));
    }
    for &k in ordering {
        if k >= n || seen[k] {
            return Err(Error::input(format!(
                "ordering {ordering:?} is not a permutation of {n} neutrinos"
            )));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Bond positions per layer; layer `l` starts at position `parity(l)`.
fn layers(n: usize, reversed: bool) -> Vec<Vec<usize>> {
    (0..n)
        .map(|l| {
            let layer = if reversed { n - 1 - l } else { l };
            (layer % 2..n.saturating_sub(1)).step_by(2).collect()
        })
        .collect()
}

fn network(model: &NeutrinoModel, t: f64, start: &[usize], reversed: bool) -> Result<Circuit> {
    let n = model.n;
    check_ordering(n, start)?;
    let mut circuit = Circuit::new(n);
    circuit.layout_in = start.to_vec();
    let mut layout = start.to_vec();
    for layer in layers(n, reversed) {
        for i in layer {
            let (a, b) = (layout[i], layout[i + 1]);
            let (p, q) = (a.min(b), a.max(b));
            let mut u = pair_unitary(model, p, q, t)?;
            if a > b {
                u = linalg::swap() * u * linalg::swap();
            }
            circuit.push(Gate::Two {
                qubits: (i, i + 1),
                matrix: linalg::swap() * u,
            })?;
            layout.swap(i, i + 1);
        }
    }
    circuit.layout_out = layout;
    Ok(circuit)
}

/// Swap network of `n` alternating layers, the first on bonds starting at
/// position 0. Each gate is `SWAP · u_pq` on the pair currently adjacent.
pub fn swap_network_circuit(model: &NeutrinoModel, t: f64, ordering: &[usize]) -> Result<Circuit> {
    network(model, t, ordering, false)
}

/// The same network traversed backwards: starts from the reversed line and
/// ends in `ordering`. Composing it after the forward network gives a
/// symmetric two-step sequence.
pub fn reversed_swap_network_circuit(
    model: &NeutrinoModel,
    t: f64,
    ordering: &[usize],
) -> Result<Circuit> {
    check_ordering(model.n, ordering)?;
    let start: Vec<usize> = ordering.iter().rev().copied().collect();
    network(model, t, &start, true)
}

/// Pairs `(p, q)`, `p < q`, in the order the swap network applies them.
pub fn swap_network_schedule(n: usize, ordering: &[usize]) -> Result<Vec<(usize, usize)>> {
    check_ordering(n, ordering)?;
    let mut layout = ordering.to_vec();
    let mut pairs = Vec::new();
    for layer in layers(n, false) {
        for i in layer {
            let (a, b) = (layout[i], layout[i + 1]);
            pairs.push((a.min(b), a.max(b)));
            layout.swap(i, i + 1);
        }
    }
    Ok(pairs)
}
