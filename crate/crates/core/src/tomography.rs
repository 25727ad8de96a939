//! Two-qubit state tomography from the nine Pauli measurement settings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::optimize::{damped_newton, lbfgs, LbfgsOptions};
use crate::qsim::{CountsRecord, DensityMatrix, Pauli, PauliString};

/// The nine local bases `{X,Y,Z}²` measured on a pair.
pub fn measurement_settings() -> Vec<[Pauli; 2]> {
    Pauli::NON_IDENTITY
        .iter()
        .flat_map(|&a| Pauli::NON_IDENTITY.iter().map(move |&b| [a, b]))
        .collect()
}

/// Full-register settings for tomography of physical pair `(a, b)`; the
/// other qubits stay in the Z basis.
pub fn register_settings(n_qubits: usize, a: usize, b: usize) -> Result<Vec<PauliString>> {
    if a == b {
        return Err(Error::input("tomography pair needs two distinct qubits"));
    }
    measurement_settings()
        .into_iter()
        .map(|[pa, pb]| {
            let mut s = PauliString::sparse(n_qubits, &[(a, pa), (b, pb)])?;
            for (q, p) in s.0.iter_mut().enumerate() {
                if q != a && q != b {
                    *p = Pauli::Z;
                }
            }
            Ok(s)
        })
        .collect()
}

pub fn setting_label(bases: [Pauli; 2]) -> String {
    format!("{}{}", bases[0].as_char(), bases[1].as_char())
}

/// Outcome frequencies (possibly quasi-probabilities) of one setting,
/// indexed by the two measured bits, with the shot total used as the
/// likelihood weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingData {
    pub bases: [Pauli; 2],
    pub probabilities: [f64; 4],
    pub shots: f64,
}

/// Per-setting data for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairData {
    pub settings: BTreeMap<String, SettingData>,
}

impl PairData {
    pub fn new(settings: impl IntoIterator<Item = SettingData>) -> Self {
        PairData {
            settings: settings
                .into_iter()
                .map(|s| (setting_label(s.bases), s))
                .collect(),
        }
    }

    /// From two-bit count records labelled by setting (`"XY"`, ...).
    pub fn from_counts(records: &[CountsRecord]) -> Result<Self> {
        let mut out = Vec::with_capacity(records.len());
        for rec in records {
            let chars: Vec<char> = rec.setting.chars().collect();
            if chars.len() != 2 {
                return Err(Error::input(format!(
                    "bad pair setting label {:?}",
                    rec.setting
                )));
            }
            let bases = [Pauli::from_char(chars[0])?, Pauli::from_char(chars[1])?];
            let f = rec.frequencies(2)?;
            out.push(SettingData {
                bases,
                probabilities: [f[0], f[1], f[2], f[3]],
                shots: rec.shots as f64,
            });
        }
        Ok(PairData::new(out))
    }

    fn get(&self, bases: [Pauli; 2]) -> Result<&SettingData> {
        self.settings
            .get(&setting_label(bases))
            .ok_or_else(|| Error::input(format!("missing setting {}", setting_label(bases))))
    }

    pub fn check_complete(&self) -> Result<()> {
        for bases in measurement_settings() {
            self.get(bases)?;
        }
        Ok(())
    }
}

/// `M[α][β] = ⟨P^α ⊗ P^β⟩` with Pauli indices `I, X, Y, Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliMatrixEstimate {
    pub m: [[f64; 4]; 4],
}

fn parity_sign(outcome: usize, first: bool, second: bool) -> f64 {
    let mut bits = 0;
    if first {
        bits += outcome >> 1;
    }
    if second {
        bits += outcome & 1;
    }
    if bits % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn correlator(p: &[f64; 4], first: bool, second: bool) -> f64 {
    (0..4).map(|o| parity_sign(o, first, second) * p[o]).sum()
}

/// Pauli expectations from the nine settings. Single-qubit marginals are
/// averaged over the three settings that contain them.
pub fn estimate_pauli_matrix(data: &PairData) -> Result<PauliMatrixEstimate> {
    data.check_complete()?;
    let mut m = [[0.0; 4]; 4];
    m[0][0] = 1.0;
    for a in Pauli::NON_IDENTITY {
        for b in Pauli::NON_IDENTITY {
            let p = &data.get([a, b])?.probabilities;
            m[a.index()][b.index()] = correlator(p, true, true);
            m[a.index()][0] += correlator(p, true, false) / 3.0;
            m[0][b.index()] += correlator(p, false, true) / 3.0;
        }
    }
    Ok(PauliMatrixEstimate { m })
}

/// `ρ = ¼ Σ M_{αβ} P^α ⊗ P^β`; Hermitian with unit trace but not
/// necessarily positive.
pub fn linear_inversion_dm(est: &PauliMatrixEstimate) -> CMatrix {
    let mut rho = CMatrix::zeros(4, 4);
    for a in Pauli::ALL {
        for b in Pauli::ALL {
            let v = est.m[a.index()][b.index()];
            if v != 0.0 {
                rho += linalg::kron(&a.matrix(), &b.matrix()).scale(0.25 * v);
            }
        }
    }
    rho
}

/// `M_{αβ} = Tr(ρ P^α ⊗ P^β)`.
pub fn pauli_matrix_of(rho: &CMatrix) -> PauliMatrixEstimate {
    let mut m = [[0.0; 4]; 4];
    for a in Pauli::ALL {
        for b in Pauli::ALL {
            let op = linalg::kron(&a.matrix(), &b.matrix());
            m[a.index()][b.index()] = linalg::trace(&(op * rho)).re;
        }
    }
    PauliMatrixEstimate { m }
}

/// Closest physical state in eigenvalues: negative eigenvalues are zeroed
/// and the rest renormalized.
pub fn project_to_physical(h: &CMatrix) -> Result<DensityMatrix> {
    let (values, vectors) = linalg::hermitian_eigen(h);
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::numerical(
            "matrix has no positive spectrum to project onto",
        ));
    }
    let rho = linalg::spectral_map(&clipped, &vectors, |v| c(v / total, 0.0));
    DensityMatrix::new(rho)
}

struct Projector {
    op: CMatrix,
    weight: f64,
}

fn outcome_projectors(data: &PairData) -> Result<Vec<Projector>> {
    data.check_complete()?;
    let mut out = Vec::with_capacity(36);
    for bases in measurement_settings() {
        let s = data.get(bases)?;
        let rot = linalg::kron(&bases[0].basis_change(), &bases[1].basis_change());
        let rot_dag = rot.adjoint();
        for o in 0..4 {
            // negative quasi-counts carry no likelihood weight
            let weight = (s.probabilities[o] * s.shots).max(0.0);
            if weight == 0.0 {
                continue;
            }
            let col = rot_dag.column(o).into_owned();
            out.push(Projector {
                op: &col * col.adjoint(),
                weight,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::input("tomography data has no positive counts"));
    }
    Ok(out)
}

/// `Σ_settings Σ_outcomes n · log Tr(Π ρ)` with `n` the (clipped) counts.
pub fn log_likelihood(data: &PairData, rho: &CMatrix) -> Result<f64> {
    Ok(outcome_projectors(data)?
        .iter()
        .map(|p| p.weight * linalg::trace(&(&p.op * rho)).re.max(1e-300).ln())
        .sum())
}

const N_PARAMS: usize = 16;

/// Lower-triangular `T` from 16 reals: 4 diagonal, then 6 complex entries.
fn unpack(x: &[f64]) -> CMatrix {
    let mut t = CMatrix::zeros(4, 4);
    let mut k = 4;
    for i in 0..4 {
        t[(i, i)] = c(x[i], 0.0);
        for j in 0..i {
            t[(i, j)] = c(x[k], x[k + 1]);
            k += 2;
        }
    }
    t
}

fn pack(t: &CMatrix) -> Vec<f64> {
    let mut x = vec![0.0; N_PARAMS];
    let mut k = 4;
    for i in 0..4 {
        x[i] = t[(i, i)].re;
        for j in 0..i {
            x[k] = t[(i, j)].re;
            x[k + 1] = t[(i, j)].im;
            k += 2;
        }
    }
    x
}

/// `T` lower-triangular with `T†T = ρ`, from a Cholesky factorization of
/// the index-reversed matrix.
fn lower_root(rho: &CMatrix) -> Result<CMatrix> {
    let rev = |m: &CMatrix| CMatrix::from_fn(4, 4, |i, j| m[(3 - i, 3 - j)]);
    let chol = rev(rho)
        .cholesky()
        .ok_or_else(|| Error::numerical("starting state is not positive definite"))?;
    Ok(rev(&chol.l()).adjoint())
}

/// Normalized `−(1/W) Σ w log Tr(Π ρ)` at `ρ = T†T / Tr(T†T)` and its
/// gradient in the packed parameters of `T`.
fn negative_log_likelihood(projectors: &[Projector], total: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let t = unpack(x);
    let a = t.adjoint() * &t;
    let tr = linalg::trace(&a).re;
    let rho = a.unscale(tr);
    let mut value = 0.0;
    let mut r = CMatrix::zeros(4, 4);
    for p in projectors {
        let prob = linalg::trace(&(&p.op * &rho)).re;
        if prob <= 0.0 {
            return (f64::INFINITY, vec![0.0; N_PARAMS]);
        }
        value -= p.weight * prob.ln();
        r += p.op.scale(p.weight / prob);
    }
    // d/dA of the objective is −(R − W 𝟙) / (W Tr A)
    let g = (r - linalg::identity(4).scale(total)).unscale(-tr * total);
    let gt = g * t.adjoint();
    let mut grad = vec![0.0; N_PARAMS];
    let mut k = 4;
    for i in 0..4 {
        grad[i] = 2.0 * gt[(i, i)].re;
        for j in 0..i {
            grad[k] = 2.0 * gt[(j, i)].re;
            grad[k + 1] = -2.0 * gt[(j, i)].im;
            k += 2;
        }
    }
    (value / total, grad)
}

/// Upper bound on how far the normalized log-likelihood at `rho` lies below
/// its maximum: `λ_max(R) − 1` with `R = Σ (w/W) Π / Tr(Πρ)`, from
/// concavity of the log-likelihood in `ρ`.
fn likelihood_gap(projectors: &[Projector], total: f64, rho: &CMatrix) -> f64 {
    let mut r = CMatrix::zeros(4, 4);
    for p in projectors.iter().filter(|p| p.weight > 0.0) {
        let prob = linalg::trace(&(&p.op * rho)).re;
        if prob <= 0.0 {
            return f64::INFINITY;
        }
        r += p.op.scale(p.weight / (total * prob));
    }
    let r = (&r + r.adjoint()).scale(0.5);
    linalg::hermitian_eigenvalues(&r)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
        - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOptions {
    pub optimizer: LbfgsOptions,
    /// Newton refinement when the quasi-Newton run stops short.
    pub polish: LbfgsOptions,
    /// Weight of `𝟙/4` mixed into the starting state.
    pub start_mixing: f64,
    /// A fit that stops short of the gradient tolerance is accepted when its
    /// certified log-likelihood gap per count is below this.
    pub gap_tol: f64,
    /// Fresh starts from the stalled estimate mixed with `restart_mixing`
    /// of `𝟙/4`, which lifts factors stuck at zero. Each restart gets a
    /// larger Newton budget.
    pub restarts: usize,
    pub restart_mixing: f64,
}

impl Default for MlOptions {
    fn default() -> Self {
        MlOptions {
            optimizer: LbfgsOptions::default(),
            polish: LbfgsOptions {
                max_iterations: 100,
                ..LbfgsOptions::default()
            },
            start_mixing: 1e-6,
            gap_tol: 1e-9,
            restarts: 3,
            restart_mixing: 1e-3,
        }
    }
}

/// Maximum-likelihood physical state `ρ = T†T / Tr(T†T)`.
pub fn ml_reconstruct(data: &PairData) -> Result<DensityMatrix> {
    ml_reconstruct_with(data, &MlOptions::default())
}

pub fn ml_reconstruct_with(data: &PairData, opts: &MlOptions) -> Result<DensityMatrix> {
    let projectors = outcome_projectors(data)?;
    let total: f64 = projectors.iter().map(|p| p.weight).sum();
    let objective = |x: &[f64]| negative_log_likelihood(&projectors, total, x);
    let mix = |rho: &CMatrix, weight: f64| -> Result<Vec<f64>> {
        let mixed = rho.scale(1.0 - weight) + linalg::identity(4).scale(weight / 4.0);
        Ok(pack(&lower_root(&mixed)?))
    };

    let start = project_to_physical(&linear_inversion_dm(&estimate_pauli_matrix(data)?))?;
    let mut x0 = mix(start.matrix(), opts.start_mixing)?;
    let mut attempt = 0;
    let x = loop {
        let outcome = match lbfgs(objective, x0, &opts.optimizer) {
            Err(Error::NonConvergence { best, .. }) => {
                let budget = opts.polish.max_iterations * (1 + 10 * attempt);
                damped_newton(
                    objective,
                    best,
                    &LbfgsOptions {
                        max_iterations: budget,
                        ..opts.polish
                    },
                )
            }
            other => other,
        };
        match outcome {
            Ok(min) => break min.x,
            Err(Error::NonConvergence { best, .. })
                if likelihood_gap(&projectors, total, &density_of(&best)) <= opts.gap_tol =>
            {
                break best
            }
            Err(Error::NonConvergence { best, .. }) if attempt < opts.restarts => {
                attempt += 1;
                x0 = mix(&density_of(&best), opts.restart_mixing)?;
            }
            Err(e) => return Err(e),
        }
    };
    let rho = density_of(&x);
    DensityMatrix::new((&rho + rho.adjoint()).scale(0.5))
}

fn density_of(x: &[f64]) -> CMatrix {
    let t = unpack(x);
    let a = t.adjoint() * &t;
    a.unscale(linalg::trace(&a).re)
}

/// Point estimate with posterior replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixEstimate {
    pub point: DensityMatrix,
    pub replicas: Vec<DensityMatrix>,
}

/// Exact outcome distribution of one setting for a two-qubit state.
pub fn setting_distribution(rho: &CMatrix, bases: [Pauli; 2]) -> [f64; 4] {
    let rot = linalg::kron(&bases[0].basis_change(), &bases[1].basis_change());
    let r = &rot * rho * rot.adjoint();
    [r[(0, 0)].re, r[(1, 1)].re, r[(2, 2)].re, r[(3, 3)].re]
}

/// Noise-free data with exact probabilities, weighted as `shots` counts.
pub fn exact_pair_data(rho: &CMatrix, shots: f64) -> PairData {
    PairData::new(measurement_settings().into_iter().map(|bases| SettingData {
        bases,
        probabilities: setting_distribution(rho, bases),
        shots,
    }))
}
