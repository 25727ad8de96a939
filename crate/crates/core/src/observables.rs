//! Flavor and entanglement observables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::mitigation::{ensemble_statistics, EnsembleEstimate};
use crate::qsim::{CountsRecord, DensityMatrix, Pauli};
use crate::tomography::DensityMatrixEstimate;

/// Eigenvalues above this are clipped to zero instead of rejected.
const NEGATIVE_EIGENVALUE_TOL: f64 = 1e-6;

fn check_layout(layout: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if layout.len() != n {
        return Err(Error::input(format!(
            "layout {layout:?} does not cover {n} qubits"
        )));
    }
    for &l in layout {
        if l >= n || std::mem::replace(&mut seen[l], true) {
            return Err(Error::input(format!(
                "layout {layout:?} is not a permutation"
            )));
        }
    }
    Ok(())
}

fn check_flavor(initial_flavor: u8) -> Result<()> {
    if initial_flavor > 1 {
        return Err(Error::input(format!(
            "flavor bit {initial_flavor} is not 0 or 1"
        )));
    }
    Ok(())
}

/// Fraction of shots where the physical qubit carrying logical `neutrino`
/// reads the opposite of `initial_flavor`. `layout[i]` is the logical qubit
/// at physical position `i` when the circuit ends.
pub fn inversion_probability(
    counts: &CountsRecord,
    neutrino: usize,
    initial_flavor: u8,
    layout: &[usize],
) -> Result<f64> {
    check_flavor(initial_flavor)?;
    check_layout(layout, layout.len())?;
    let pos = layout
        .iter()
        .position(|&l| l == neutrino)
        .ok_or_else(|| Error::input(format!("neutrino {neutrino} not in layout")))?;
    if counts.shots == 0 {
        return Err(Error::input("no shots recorded"));
    }
    let flipped = b'0' + (1 - initial_flavor);
    let mut hits = 0u64;
    for (bits, &c) in &counts.counts {
        if bits.len() != layout.len() {
            return Err(Error::input(format!(
                "bitstring {bits:?} does not match a {}-qubit layout",
                layout.len()
            )));
        }
        if bits.as_bytes()[pos] == flipped {
            hits += c;
        }
    }
    Ok(hits as f64 / counts.shots as f64)
}

/// Inversion probability from a full distribution over physical bitstrings.
pub fn inversion_probability_from_distribution(
    probs: &[f64],
    neutrino: usize,
    initial_flavor: u8,
    layout: &[usize],
) -> Result<f64> {
    check_flavor(initial_flavor)?;
    let n = layout.len();
    check_layout(layout, n)?;
    if probs.len() != 1 << n {
        return Err(Error::input(format!(
            "{} probabilities for {n} qubits",
            probs.len()
        )));
    }
    let pos = layout
        .iter()
        .position(|&l| l == neutrino)
        .ok_or_else(|| Error::input(format!("neutrino {neutrino} not in layout")))?;
    let shift = n - 1 - pos;
    Ok(probs
        .iter()
        .enumerate()
        .filter(|(i, _)| ((i >> shift) & 1) as u8 != initial_flavor)
        .map(|(_, p)| p)
        .sum())
}

fn physical_spectrum(m: &CMatrix, what: &str) -> Result<Vec<f64>> {
    let values = linalg::hermitian_eigenvalues(m);
    if values[0] < -NEGATIVE_EIGENVALUE_TOL {
        return Err(Error::input(format!(
            "{what} has eigenvalue {:.3e} below zero",
            values[0]
        )));
    }
    Ok(values.into_iter().map(|v| v.max(0.0)).collect())
}

/// Entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let values = physical_spectrum(rho.matrix(), "density matrix")?;
    Ok(values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum::<f64>()
        .max(0.0))
}

/// `λ₀ − λ₁ − λ₂ − λ₃` from the square-rooted spectrum of
/// `√ρ (Y⊗Y) ρ* (Y⊗Y) √ρ`, without truncation at zero.
pub fn extended_concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return Err(Error::input(format!(
            "concurrence needs a two-qubit state, got {} qubits",
            rho.n_qubits()
        )));
    }
    let m = rho.matrix();
    let yy = linalg::kron(&Pauli::Y.matrix(), &Pauli::Y.matrix());
    let tilde = &yy * m.conjugate() * &yy;
    let root = linalg::psd_sqrt(m);
    let r = &root * tilde * &root;
    let r = (&r + r.adjoint()).scale(0.5);
    let values = linalg::hermitian_eigenvalues(&r);
    if values[0] < -NEGATIVE_EIGENVALUE_TOL {
        return Err(Error::numerical(format!(
            "concurrence matrix has eigenvalue {:.3e} below zero",
            values[0]
        )));
    }
    let mut roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok(roots[0] - roots[1] - roots[2] - roots[3])
}

pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    Ok(extended_concurrence(rho)?.max(0.0))
}

/// Applies `f` to each replica and summarizes.
pub fn replica_statistics(
    estimate: &DensityMatrixEstimate,
    f: impl Fn(&DensityMatrix) -> Result<f64>,
) -> Result<EnsembleEstimate> {
    ensemble_statistics(estimate.replicas.iter().map(f).collect::<Result<_>>()?)
}

/// Entropy of one qubit of a pair, replica by replica. `which` is 0 or 1.
pub fn single_spin_entropies(estimate: &DensityMatrixEstimate, which: usize) -> Result<Vec<f64>> {
    if which > 1 {
        return Err(Error::input(format!("qubit {which} is not part of a pair")));
    }
    estimate
        .replicas
        .iter()
        .map(|rho| von_neumann_entropy(&rho.reduced(&[which])?))
        .collect()
}

/// Averaged single-spin entropy of `k` from the three pair estimates that
/// contain it. The interval half-widths are the averages of the per-pair
/// half-widths.
pub fn single_spin_entropy_avg(
    pairs: &[((usize, usize), &DensityMatrixEstimate)],
    k: usize,
) -> Result<EnsembleEstimate> {
    if pairs.len() != 3 {
        return Err(Error::input(format!(
            "expected 3 pairs, got {}",
            pairs.len()
        )));
    }
    let mut per_pair = Vec::with_capacity(3);
    for &((a, b), est) in pairs {
        let which = match (a == k, b == k) {
            (true, false) => 0,
            (false, true) => 1,
            _ => {
                return Err(Error::input(format!(
                    "pair ({a}, {b}) does not contain {k} once"
                )))
            }
        };
        per_pair.push(ensemble_statistics(single_spin_entropies(est, which)?)?);
    }
    average_estimates(&per_pair)
}

/// Average of several estimates of one quantity: means and interval
/// half-widths are averaged, samples are averaged replica by replica.
pub fn average_estimates(estimates: &[EnsembleEstimate]) -> Result<EnsembleEstimate> {
    let Some(first) = estimates.first() else {
        return Err(Error::input("no estimates to average"));
    };
    let len = first.samples.len();
    if estimates.iter().any(|e| e.samples.len() != len) {
        return Err(Error::input("estimates have different replica counts"));
    }
    let k = estimates.len() as f64;
    let samples: Vec<f64> = (0..len)
        .map(|i| estimates.iter().map(|e| e.samples[i]).sum::<f64>() / k)
        .collect();
    let mean = estimates.iter().map(|e| e.mean).sum::<f64>() / k;
    let below = estimates.iter().map(|e| e.mean - e.ci_low).sum::<f64>() / k;
    let above = estimates.iter().map(|e| e.ci_high - e.mean).sum::<f64>() / k;
    Ok(EnsembleEstimate {
        samples,
        mean,
        ci_low: mean - below,
        ci_high: mean + above,
    })
}

/// How a series point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationTag {
    Bare,
    Richardson,
    Exp,
    ShiftedExp,
}

impl MitigationTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MitigationTag::Bare => "bare",
            MitigationTag::Richardson => "richardson",
            MitigationTag::Exp => "exp",
            MitigationTag::ShiftedExp => "shifted-exp",
        }
    }
}

/// An observable along a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    /// `None` where extrapolation failed for all but at most one replica.
    pub estimates: Vec<Option<EnsembleEstimate>>,
    /// Effective noise level; 0 for extrapolated series.
    pub noise_level: f64,
    pub mitigation: MitigationTag,
    /// Replicas left out at each time because the ansatz did not apply.
    pub dropped: Vec<usize>,
}

impl ObservableSeries {
    pub fn new(
        name: impl Into<String>,
        times: Vec<f64>,
        estimates: Vec<Option<EnsembleEstimate>>,
        noise_level: f64,
        mitigation: MitigationTag,
        dropped: Vec<usize>,
    ) -> Result<Self> {
        if times.len() != estimates.len() || times.len() != dropped.len() {
            return Err(Error::input(format!(
                "{} times for {} estimates and {} drop counts",
                times.len(),
                estimates.len(),
                dropped.len()
            )));
        }
        if times
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::input("time grid is not strictly increasing"));
        }
        Ok(ObservableSeries {
            name: name.into(),
            times,
            estimates,
            noise_level,
            mitigation,
            dropped,
        })
    }

    /// `r` for bare series, the mitigation tag otherwise.
    pub fn label(&self) -> String {
        match self.mitigation {
            MitigationTag::Bare => format!("{}", self.noise_level),
            tag => tag.as_str().to_string(),
        }
    }

    /// Points whose mean lies below zero.
    pub fn below_zero(&self) -> Vec<bool> {
        self.estimates
            .iter()
            .map(|e| e.as_ref().is_some_and(|e| e.mean < 0.0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, kron};
    use crate::qsim::Statevector;
    use proptest::prelude::*;

    fn bell() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Statevector::from_amplitudes(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)])
            .unwrap()
            .to_density()
    }

    fn werner(w: f64) -> DensityMatrix {
        let m =
            bell().matrix().scale(w) + DensityMatrix::maximally_mixed(2).matrix().scale(1.0 - w);
        DensityMatrix::new(m).unwrap()
    }

    fn unitary_1q(a: f64, b: f64, g: f64) -> CMatrix {
        linalg::rz(a) * linalg::ry(b) * linalg::rz(g)
    }

    #[test]
    fn entropy_examples() {
        let pure = Statevector::new_basis_state(2, "01").unwrap().to_density();
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        assert!(
            (von_neumann_entropy(&DensityMatrix::maximally_mixed(1)).unwrap() - 1.0).abs() < 1e-12
        );
        assert!(
            (von_neumann_entropy(&DensityMatrix::maximally_mixed(2)).unwrap() - 2.0).abs() < 1e-12
        );
        let half = bell().reduced(&[0]).unwrap();
        assert!((von_neumann_entropy(&half).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_unphysical() {
        let m = linalg::from_rows(&[&[c(1.1, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(-0.1, 0.0)]]);
        let rho = DensityMatrix::new_unchecked(m).unwrap();
        assert!(von_neumann_entropy(&rho).is_err());
    }

    #[test]
    fn concurrence_examples() {
        assert!((concurrence(&bell()).unwrap() - 1.0).abs() < 1e-9);
        assert!((extended_concurrence(&bell()).unwrap() - 1.0).abs() < 1e-9);
        let prod = Statevector::new_basis_state(2, "10").unwrap().to_density();
        assert!(concurrence(&prod).unwrap().abs() < 1e-9);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_eq!(concurrence(&mixed).unwrap(), 0.0);
        assert!((extended_concurrence(&mixed).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn werner_family_closed_form() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=20 {
            let w = i as f64 / 20.0;
            let ct = extended_concurrence(&werner(w)).unwrap();
            assert!((ct - (3.0 * w - 1.0) / 2.0).abs() < 1e-8, "w={w} got {ct}");
            assert!(ct > prev);
            prev = ct;
        }
    }

    #[test]
    fn inversion_examples() {
        let start = CountsRecord::from_vector("Z", &{
            let mut v = vec![0u64; 16];
            v[0b0011] = 100;
            v
        })
        .unwrap();
        for k in 0..4 {
            let flavor = if k < 2 { 0 } else { 1 };
            assert_eq!(
                inversion_probability(&start, k, flavor, &[0, 1, 2, 3]).unwrap(),
                0.0
            );
        }
        let flat = CountsRecord::from_vector("Z", &[10u64; 16]).unwrap();
        assert_eq!(
            inversion_probability(&flat, 2, 1, &[3, 2, 1, 0]).unwrap(),
            0.5
        );
        assert!(inversion_probability(&flat, 2, 1, &[0, 0, 1, 2]).is_err());
    }

    #[test]
    fn inversion_follows_layout() {
        let mut v = vec![0u64; 16];
        v[0b1000] = 10;
        let rec = CountsRecord::from_vector("Z", &v).unwrap();
        assert_eq!(
            inversion_probability(&rec, 3, 0, &[3, 2, 1, 0]).unwrap(),
            1.0
        );
        assert_eq!(
            inversion_probability(&rec, 0, 0, &[3, 2, 1, 0]).unwrap(),
            0.0
        );
        let mut p = vec![0.0; 16];
        p[0b1000] = 1.0;
        assert_eq!(
            inversion_probability_from_distribution(&p, 3, 0, &[3, 2, 1, 0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn product_state_pairs_have_zero_entropy() {
        let rho = Statevector::new_basis_state(2, "01").unwrap().to_density();
        let est = DensityMatrixEstimate {
            point: rho.clone(),
            replicas: vec![rho; 4],
        };
        let avg =
            single_spin_entropy_avg(&[((0, 1), &est), ((0, 2), &est), ((0, 3), &est)], 0).unwrap();
        assert!(avg.mean.abs() < 1e-12);
        assert!(
            single_spin_entropy_avg(&[((1, 2), &est), ((0, 2), &est), ((0, 3), &est)], 0).is_err()
        );
    }

    #[test]
    fn depolarized_pairs_give_one_bit() {
        let rho = DensityMatrix::maximally_mixed(2);
        let est = DensityMatrixEstimate {
            point: rho.clone(),
            replicas: vec![rho; 3],
        };
        let avg =
            single_spin_entropy_avg(&[((0, 1), &est), ((1, 2), &est), ((1, 3), &est)], 1).unwrap();
        assert!((avg.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn series_requires_increasing_times() {
        let e = ensemble_statistics(vec![0.0, 1.0]).unwrap();
        let two = vec![Some(e.clone()), Some(e)];
        assert!(ObservableSeries::new(
            "x",
            vec![1.0, 1.0],
            two.clone(),
            1.0,
            MitigationTag::Bare,
            vec![0; 2]
        )
        .is_err());
        let s = ObservableSeries::new(
            "x",
            vec![0.0, 1.0],
            two,
            1.0,
            MitigationTag::Bare,
            vec![0; 2],
        )
        .unwrap();
        assert_eq!(s.below_zero(), vec![false, false]);
        assert_eq!(s.label(), "1");
    }

    proptest! {
        #[test]
        fn truncation_and_local_invariance(
            w in 0.0f64..1.0,
            angles in proptest::array::uniform6(-3.0f64..3.0),
        ) {
            let s = (1.0 - w).sqrt();
            let psi = Statevector::from_amplitudes(vec![c(w.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.3 * s), c(0.91_f64.sqrt() * s, 0.0)]).unwrap();
            let rho = DensityMatrix::new(psi.to_density().matrix().scale(0.8) + DensityMatrix::maximally_mixed(2).matrix().scale(0.2)).unwrap();
            let ct = extended_concurrence(&rho).unwrap();
            prop_assert_eq!(concurrence(&rho).unwrap(), ct.max(0.0));
            let u = kron(&unitary_1q(angles[0], angles[1], angles[2]), &unitary_1q(angles[3], angles[4], angles[5]));
            let moved = DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
            prop_assert!((extended_concurrence(&moved).unwrap() - ct).abs() < 1e-10);
            prop_assert!((von_neumann_entropy(&moved).unwrap() - von_neumann_entropy(&rho).unwrap()).abs() < 1e-10);
            let s_half = von_neumann_entropy(&rho.reduced(&[0]).unwrap()).unwrap();
            let s_moved = von_neumann_entropy(&moved.reduced(&[0]).unwrap()).unwrap();
            prop_assert!((s_half - s_moved).abs() < 1e-10);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s_half));
        }
    }
}
