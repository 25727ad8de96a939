//! Two-qubit KAK decomposition into CNOTs and single-qubit unitaries.
//!
//! A 4×4 unitary is written as `e^{iφ} (A₁⊗B₁) exp(i(a XX + b YY + c ZZ)) (A₂⊗B₂)`
//! by diagonalizing `Uᵀ U` in the magic basis, where local gates become real
//! orthogonal matrices. The canonical middle factor is then synthesized with
//! 0 to 3 CNOTs from fixed templates.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;

use super::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64, ONE, ZERO};

const COORD_TOL: f64 = 1e-9;
const RECOMPOSE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum CompiledOp {
    /// `q0 ⊗ q1`; `q0` acts on the gate's more significant qubit.
    Local { q0: CMatrix, q1: CMatrix },
    /// CNOT with the given local control (0 or 1).
    Cnot { control: usize },
}

impl CompiledOp {
    fn matrix(&self) -> CMatrix {
        match self {
            CompiledOp::Local { q0, q1 } => linalg::kron(q0, q1),
            CompiledOp::Cnot { control: 0 } => linalg::cnot(),
            CompiledOp::Cnot { .. } => linalg::swap() * linalg::cnot() * linalg::swap(),
        }
    }
}

/// Decomposition result; `ops` are in application order and alternate
/// between local layers and CNOTs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledGate {
    pub target: CMatrix,
    pub ops: Vec<CompiledOp>,
    pub entangler_count: usize,
    /// `target = e^{i global_phase} · recompose()`.
    pub global_phase: f64,
    /// Canonical coordinates `(a, b, c)`, each in `(−π/4, π/4]`.
    pub coordinates: [f64; 3],
}

impl CompiledGate {
    pub fn recompose(&self) -> CMatrix {
        self.ops
            .iter()
            .fold(linalg::identity(4), |acc, op| op.matrix() * acc)
    }
}

fn magic_basis() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (r, i) = (c(h, 0.0), c(0.0, h));
    linalg::from_rows(&[
        &[r, ZERO, ZERO, i],
        &[ZERO, i, r, ZERO],
        &[ZERO, i, -r, ZERO],
        &[r, ZERO, ZERO, -i],
    ])
}

/// Diagonal signs of XX, YY, ZZ in the magic basis.
const XX_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
const YY_SIGNS: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];
const ZZ_SIGNS: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c(x, 0.0))
}

fn off_diagonal(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// Real orthogonal `P` (det +1) diagonalizing the complex symmetric unitary
/// `m`. Its real and imaginary parts commute, so a generic real combination
/// of them shares their eigenvectors.
fn real_diagonalizer(m: &CMatrix) -> Result<DMatrix<f64>> {
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for &weight in &[1.0, 0.618_033_988_7, 2.5, -1.3, 0.1, 7.3, -0.37] {
        let combo = &re + &im * weight;
        let sym = (&combo + combo.transpose()) * 0.5;
        let mut p = sym.symmetric_eigen().eigenvectors;
        if p.determinant() < 0.0 {
            p.column_mut(0).neg_mut();
        }
        let pc = to_complex(&p);
        let resid = off_diagonal(&(pc.transpose() * m * &pc));
        if resid < 1e-12 {
            return Ok(p);
        }
        if best.as_ref().is_none_or(|(r, _)| resid < *r) {
            best = Some((resid, p));
        }
    }
    match best {
        Some((resid, p)) if resid < 1e-8 => Ok(p),
        _ => Err(Error::numerical(
            "failed to diagonalize UᵀU in the magic basis",
        )),
    }
}

/// Splits a local 4×4 unitary into `A ⊗ B`.
fn factor_local(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let block = |i: usize, j: usize| m.view((2 * i, 2 * j), (2, 2)).into_owned();
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..2 {
        for j in 0..2 {
            let n = block(i, j).norm();
            if n > best {
                (bi, bj, best) = (i, j, n);
            }
        }
    }
    let blk = block(bi, bj);
    let det = blk.determinant();
    let b = blk / det.sqrt();
    let b_dag = b.adjoint();
    let a = CMatrix::from_fn(2, 2, |i, j| linalg::trace(&(&b_dag * block(i, j))) * 0.5);
    if linalg::max_abs_diff(&linalg::kron(&a, &b), m) > 1e-8 {
        return Err(Error::numerical("local factor is not a tensor product"));
    }
    Ok((a, b))
}

fn exp_i_pauli(p: &CMatrix, theta: f64) -> CMatrix {
    // exp(iθP) for an involutory Pauli P
    linalg::identity(2).scale(theta.cos()) + p * c(0.0, theta.sin())
}

fn local(q0: CMatrix, q1: CMatrix) -> CompiledOp {
    CompiledOp::Local { q0, q1 }
}

/// `W · ops · W†` with `W = w ⊗ w`.
fn conjugate(w: &CMatrix, mut ops: Vec<CompiledOp>) -> Vec<CompiledOp> {
    let wd = w.adjoint();
    ops.insert(0, local(wd.clone(), wd));
    ops.push(local(w.clone(), w.clone()));
    ops
}

fn s_gate() -> CMatrix {
    linalg::from_rows(&[&[ONE, ZERO], &[ZERO, linalg::I]])
}

/// `exp(iπ/4 ZZ)` up to phase: `exp(iπ/4 ZI) exp(iπ/4 IZ) · CZ`.
fn one_cnot_zz() -> Vec<CompiledOp> {
    let h = linalg::hadamard();
    let rz = exp_i_pauli(&linalg::sigma_z(), FRAC_PI_4);
    vec![
        local(linalg::identity(2), h.clone()),
        CompiledOp::Cnot { control: 0 },
        local(rz.clone(), &rz * h),
    ]
}

/// `exp(i(a XX + c ZZ)) = CX · (e^{iaX} ⊗ e^{icZ}) · CX`.
fn two_cnot_xz(a: f64, cz: f64) -> Vec<CompiledOp> {
    vec![
        CompiledOp::Cnot { control: 0 },
        local(
            exp_i_pauli(&linalg::sigma_x(), a),
            exp_i_pauli(&linalg::sigma_z(), cz),
        ),
        CompiledOp::Cnot { control: 0 },
    ]
}

/// `exp(i(a XX + b YY + c ZZ))` up to phase with three CNOTs.
fn three_cnot(a: f64, b: f64, cz: f64) -> Vec<CompiledOp> {
    let id = linalg::identity(2);
    vec![
        local(id.clone(), linalg::rz(-FRAC_PI_2)),
        CompiledOp::Cnot { control: 1 },
        local(
            linalg::rz(-2.0 * cz - FRAC_PI_2),
            linalg::ry(2.0 * a + FRAC_PI_2),
        ),
        CompiledOp::Cnot { control: 0 },
        local(id.clone(), linalg::ry(-2.0 * b - FRAC_PI_2)),
        CompiledOp::Cnot { control: 1 },
        local(linalg::rz(FRAC_PI_2), id),
    ]
}

fn canonical_ops(coords: [f64; 3]) -> (Vec<CompiledOp>, usize) {
    let [a, b, cz] = coords;
    let nonzero: Vec<usize> = (0..3).filter(|&k| coords[k].abs() > COORD_TOL).collect();
    let x_to_y = s_gate();
    let z_to_y = exp_i_pauli(&linalg::sigma_x(), FRAC_PI_4);
    match nonzero.as_slice() {
        [] => (Vec::new(), 0),
        [k] if (coords[*k] - FRAC_PI_4).abs() < COORD_TOL => {
            let ops = match k {
                0 => conjugate(&linalg::hadamard(), one_cnot_zz()),
                1 => conjugate(&(s_gate() * linalg::hadamard()), one_cnot_zz()),
                _ => one_cnot_zz(),
            };
            (ops, 1)
        }
        _ if b.abs() <= COORD_TOL => (two_cnot_xz(a, cz), 2),
        _ if cz.abs() <= COORD_TOL => (conjugate(&z_to_y, two_cnot_xz(a, b)), 2),
        _ if a.abs() <= COORD_TOL => (conjugate(&x_to_y, two_cnot_xz(b, cz)), 2),
        _ => (three_cnot(a, b, cz), 3),
    }
}

/// Merges consecutive local layers.
fn merge_locals(ops: Vec<CompiledOp>) -> Vec<CompiledOp> {
    let mut out: Vec<CompiledOp> = Vec::with_capacity(ops.len());
    for op in ops {
        match (out.last_mut(), op) {
            (Some(CompiledOp::Local { q0, q1 }), CompiledOp::Local { q0: n0, q1: n1 }) => {
                *q0 = n0 * &*q0;
                *q1 = n1 * &*q1;
            }
            (_, op) => out.push(op),
        }
    }
    out
}

/// Reduces `x` into `(−π/4, π/4]`, returning the number of `π/2` steps taken.
fn reduce_coordinate(x: f64) -> (f64, i64) {
    let mut k = (x / FRAC_PI_2).round() as i64;
    let mut r = x - k as f64 * FRAC_PI_2;
    if r <= -FRAC_PI_4 + COORD_TOL {
        r += FRAC_PI_2;
        k -= 1;
    }
    (r, k)
}

pub fn kak_decompose(u: &CMatrix) -> Result<CompiledGate> {
    if u.shape() != (4, 4) || !linalg::is_unitary(u, 1e-10) {
        return Err(Error::input("kak_decompose needs a 4x4 unitary"));
    }
    let det = u.determinant();
    let u4 = u * C64::from_polar(1.0, -det.arg() / 4.0);
    let bm = magic_basis();
    let bd = bm.adjoint();
    let up = &bd * &u4 * &bm;
    let m2 = up.transpose() * &up;
    let p = to_complex(&real_diagonalizer(&m2)?);
    let diag = p.transpose() * &m2 * &p;
    let mut d: Vec<C64> = (0..4)
        .map(|k| C64::from_polar(1.0, diag[(k, k)].arg() / 2.0))
        .collect();
    let dbar = |d: &[C64]| CMatrix::from_fn(4, 4, |i, j| if i == j { d[i].conj() } else { ZERO });
    let mut k1 = &up * &p * dbar(&d);
    if k1.determinant().re < 0.0 {
        d[0] = -d[0];
        k1 = &up * &p * dbar(&d);
    }
    let mut l1 = &bm * &k1 * &bd;
    let l2 = &bm * p.transpose() * &bd;

    let phases: Vec<f64> = d.iter().map(|z| z.arg()).collect();
    let project =
        |signs: &[f64; 4]| signs.iter().zip(&phases).map(|(s, p)| s * p).sum::<f64>() / 4.0;
    let raw = [project(&XX_SIGNS), project(&YY_SIGNS), project(&ZZ_SIGNS)];
    let paulis = [linalg::sigma_x(), linalg::sigma_y(), linalg::sigma_z()];
    let mut coords = [0.0; 3];
    for axis in 0..3 {
        let (r, k) = reduce_coordinate(raw[axis]);
        coords[axis] = r;
        if k.rem_euclid(2) == 1 {
            // exp(iπ/2 PP) = i PP; the phase is recovered below
            l1 *= linalg::kron(&paulis[axis], &paulis[axis]);
        }
    }

    let (a1, b1) = factor_local(&l1)?;
    let (a2, b2) = factor_local(&l2)?;
    let (middle, entangler_count) = canonical_ops(coords);
    let mut ops = vec![local(a2, b2)];
    ops.extend(middle);
    ops.push(local(a1, b1));
    let ops = merge_locals(ops);

    let mut gate = CompiledGate {
        target: u.clone(),
        ops,
        entangler_count,
        global_phase: 0.0,
        coordinates: coords,
    };
    let r = gate.recompose();
    let phase = linalg::phase_between(u, &r)
        .ok_or_else(|| Error::numerical("recomposed gate is orthogonal to the target"))?;
    let err = linalg::max_abs_diff(u, &r.map(|z| z * C64::from_polar(1.0, phase)));
    if err > RECOMPOSE_TOL {
        return Err(Error::numerical(format!(
            "KAK recomposition error {err:.3e}"
        )));
    }
    gate.global_phase = phase;
    Ok(gate)
}

/// Euler angles with `u = e^{iφ} Rz(α) Ry(β) Rz(γ)`, returned as `(α, β, γ, φ)`.
pub fn zyz_angles(u: &CMatrix) -> (f64, f64, f64, f64) {
    let det = u.determinant();
    let v = u * C64::from_polar(1.0, -det.arg() / 2.0);
    let beta = 2.0 * v[(1, 0)].norm().atan2(v[(0, 0)].norm());
    let sum = 2.0 * v[(1, 1)].arg();
    let diff = 2.0 * v[(1, 0)].arg();
    let (alpha, gamma) = if v[(1, 0)].norm() < 1e-12 {
        (sum, 0.0)
    } else if v[(0, 0)].norm() < 1e-12 {
        (diff, 0.0)
    } else {
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };
    let r = linalg::rz(alpha) * linalg::ry(beta) * linalg::rz(gamma);
    let phi = linalg::phase_between(u, &r).unwrap_or(0.0);
    (alpha, beta, gamma, phi)
}

fn near_identity_phase(m: &CMatrix) -> Option<f64> {
    let id = linalg::identity(m.nrows());
    if linalg::equal_up_to_phase(m, &id, 1e-12) {
        linalg::phase_between(m, &id)
    } else {
        None
    }
}

/// Replaces every general two-qubit gate by its KAK sequence and fuses
/// runs of single-qubit gates on the same qubit. The logical unitary is
/// unchanged up to the tracked global phase.
pub fn compile(circuit: &Circuit) -> Result<Circuit> {
    let n = circuit.n_qubits;
    let mut out = Circuit::new(n);
    out.layout_in = circuit.layout_in.clone();
    out.layout_out = circuit.layout_out.clone();
    out.global_phase = circuit.global_phase;
    let mut pending: Vec<Option<CMatrix>> = vec![None; n];

    fn flush(out: &mut Circuit, pending: &mut [Option<CMatrix>], q: usize) -> Result<()> {
        if let Some(m) = pending[q].take() {
            match near_identity_phase(&m) {
                Some(phase) => out.global_phase += phase,
                None => out.push(Gate::Single {
                    qubit: q,
                    matrix: m,
                })?,
            }
        }
        Ok(())
    }
    fn absorb(pending: &mut [Option<CMatrix>], q: usize, m: CMatrix) {
        pending[q] = Some(match pending[q].take() {
            Some(prev) => m * prev,
            None => m,
        });
    }

    for gate in &circuit.gates {
        match gate {
            Gate::Single { qubit, matrix } => absorb(&mut pending, *qubit, matrix.clone()),
            Gate::Cnot { control, target } => {
                flush(&mut out, &mut pending, *control)?;
                flush(&mut out, &mut pending, *target)?;
                out.push(gate.clone())?;
            }
            Gate::Two {
                qubits: (a, b),
                matrix,
            } => {
                let compiled = kak_decompose(matrix)?;
                out.global_phase += compiled.global_phase;
                for op in compiled.ops {
                    match op {
                        CompiledOp::Local { q0, q1 } => {
                            absorb(&mut pending, *a, q0);
                            absorb(&mut pending, *b, q1);
                        }
                        CompiledOp::Cnot { control } => {
                            let (ctl, tgt) = if control == 0 { (*a, *b) } else { (*b, *a) };
                            flush(&mut out, &mut pending, ctl)?;
                            flush(&mut out, &mut pending, tgt)?;
                            out.push(Gate::Cnot {
                                control: ctl,
                                target: tgt,
                            })?;
                        }
                    }
                }
            }
        }
    }
    for q in 0..n {
        flush(&mut out, &mut pending, q)?;
    }
    Ok(out)
}
