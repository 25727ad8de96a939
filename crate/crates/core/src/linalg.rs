//! Small dense complex linear-algebra toolkit shared by the simulator.
//!
//! Everything works on `nalgebra::DMatrix<Complex64>`. Multi-qubit operators
//! follow the crate-wide convention that qubit 0 is the most significant bit
//! of a basis index.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn from_rows(rows: &[&[C64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn sigma_x() -> CMatrix {
    from_rows(&[&[ZERO, ONE], &[ONE, ZERO]])
}

pub fn sigma_y() -> CMatrix {
    from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn sigma_z() -> CMatrix {
    from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]])
}

pub fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    from_rows(&[&[c(h, 0.0), c(h, 0.0)], &[c(h, 0.0), c(-h, 0.0)]])
}

pub fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

pub fn swap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

/// `exp(-i θ/2 Z)`.
pub fn rz(theta: f64) -> CMatrix {
    let h = 0.5 * theta;
    from_rows(&[
        &[C64::from_polar(1.0, -h), ZERO],
        &[ZERO, C64::from_polar(1.0, h)],
    ])
}

/// `exp(-i θ/2 Y)`.
pub fn ry(theta: f64) -> CMatrix {
    let (s, co) = (0.5 * theta).sin_cos();
    from_rows(&[&[c(co, 0.0), c(-s, 0.0)], &[c(s, 0.0), c(co, 0.0)]])
}

/// `exp(-i θ/2 X)`.
pub fn rx(theta: f64) -> CMatrix {
    let (s, co) = (0.5 * theta).sin_cos();
    from_rows(&[&[c(co, 0.0), c(0.0, -s)], &[c(0.0, -s), c(co, 0.0)]])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(identity(1), |acc, f| acc.kronecker(f))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(&(m.adjoint() * m), &identity(m.nrows())) <= tol
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, the
/// columns of the returned matrix are the matching eigenvectors.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    // symmetrize away round-off before handing to the solver
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Rebuilds `V f(Λ) V†` from an eigen-decomposition.
pub fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vectors.adjoint()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    spectral_map(&values, &vectors, |v| C64::from_polar(1.0, -v * t))
}

/// Square root of a positive semidefinite matrix, negative round-off clipped.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    spectral_map(&values, &vectors, |v| c(v.max(0.0).sqrt(), 0.0))
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Half the trace norm of `a - b`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
}

/// If `a = e^{iφ} b` within `tol` (max-abs), returns `φ`.
pub fn phase_between(a: &CMatrix, b: &CMatrix) -> Option<f64> {
    if a.shape() != b.shape() {
        return None;
    }
    let overlap: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    if overlap.norm() == 0.0 {
        return None;
    }
    Some(overlap.arg())
}

pub fn equal_up_to_phase(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    match phase_between(a, b) {
        Some(phi) => max_abs_diff(a, &b.map(|z| z * C64::from_polar(1.0, phi))) <= tol,
        None => false,
    }
}

/// Embeds a `2^k × 2^k` operator acting on `targets` (first target is the
/// operator's most significant bit) into an `n`-qubit register.
pub fn embed(n: usize, targets: &[usize], op: &CMatrix) -> Result<CMatrix> {
    let k = targets.len();
    if op.nrows() != 1 << k || op.ncols() != 1 << k {
        return Err(Error::input(format!(
            "operator of size {}x{} does not act on {} qubits",
            op.nrows(),
            op.ncols(),
            k
        )));
    }
    check_targets(n, targets)?;
    let dim = 1usize << n;
    let shifts: Vec<usize> = targets.iter().map(|&q| n - 1 - q).collect();
    let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let local = |idx: usize| -> usize {
        shifts
            .iter()
            .fold(0, |acc, &s| (acc << 1) | ((idx >> s) & 1))
    };
    let scatter = |base: usize, sub: usize| -> usize {
        shifts.iter().enumerate().fold(base, |acc, (pos, &s)| {
            let bit = (sub >> (k - 1 - pos)) & 1;
            acc | (bit << s)
        })
    };
    let mut out = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let base = col & !mask;
        let sub_col = local(col);
        for sub_row in 0..(1 << k) {
            let v = op[(sub_row, sub_col)];
            if v != ZERO {
                out[(scatter(base, sub_row), col)] = v;
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_targets(n: usize, targets: &[usize]) -> Result<()> {
    for (i, &q) in targets.iter().enumerate() {
        if q >= n {
            return Err(Error::input(format!(
                "qubit {q} out of range for {n} qubits"
            )));
        }
        if targets[..i].contains(&q) {
            return Err(Error::input(format!("repeated target qubit {q}")));
        }
    }
    Ok(())
}

/// Operator mapping a state written in logical qubit order to the physical
/// register, where physical position `i` holds logical qubit `layout[i]`.
pub fn layout_operator(layout: &[usize]) -> CMatrix {
    let n = layout.len();
    let dim = 1usize << n;
    let mut p = CMatrix::zeros(dim, dim);
    for logical in 0..dim {
        let physical = (0..n).fold(0usize, |acc, pos| {
            let bit = (logical >> (n - 1 - layout[pos])) & 1;
            acc | (bit << (n - 1 - pos))
        });
        p[(physical, logical)] = ONE;
    }
    p
}
