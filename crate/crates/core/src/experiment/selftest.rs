//! Quick end-to-end checks of tomography and mitigation on known inputs.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{self, c};
use crate::mitigation::{
    beta_update, exp_extrapolate, readout_correction_map, richardson_extrapolate,
    shifted_exp_extrapolate, BetaPosterior, ReadoutParams,
};
use crate::noise::apply_readout_errors;
use crate::qsim::{sample_counts_with, DensityMatrix, Statevector};
use crate::rng::derived_rng;
use crate::tomography::{
    estimate_pauli_matrix, exact_pair_data, linear_inversion_dm, log_likelihood,
    measurement_settings, ml_reconstruct, project_to_physical, setting_distribution, setting_label,
    PairData,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> SelfTestCheck {
    SelfTestCheck {
        name: name.into(),
        passed,
        detail,
    }
}

fn sampled_pair_data(rho: &DensityMatrix, shots: u64, seed: u64, stream: u64) -> Result<PairData> {
    let records = measurement_settings()
        .into_iter()
        .enumerate()
        .map(|(i, bases)| {
            let p = setting_distribution(rho.matrix(), bases);
            let mut rng = derived_rng(seed, &[stream, i as u64]);
            sample_counts_with(&p, shots, &setting_label(bases), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    PairData::from_counts(&records)
}

fn bell() -> Result<Statevector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Statevector::from_amplitudes(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)])
}

pub fn tomography_selftest(seed: u64) -> Result<Vec<SelfTestCheck>> {
    let mut out = Vec::new();

    let bell = bell()?;
    let est = ml_reconstruct(&sampled_pair_data(&bell.to_density(), 8192, seed, 0)?)?;
    let fid = est.expectation(&bell.to_density().into_matrix());
    out.push(check(
        "bell state fidelity >= 0.99",
        fid >= 0.99,
        format!("fidelity {fid:.6}"),
    ));

    let mixed = DensityMatrix::maximally_mixed(2);
    let est = ml_reconstruct(&sampled_pair_data(&mixed, 8192, seed, 1)?)?;
    let td = linalg::trace_distance(est.matrix(), mixed.matrix());
    out.push(check(
        "maximally mixed within 0.02",
        td <= 0.02,
        format!("trace distance {td:.6}"),
    ));

    let psi =
        Statevector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.48), c(0.0, 0.0), c(0.64, 0.0)])?;
    let rho = DensityMatrix::new(psi.to_density().matrix().scale(0.9) + mixed.matrix().scale(0.1))?;
    let est = ml_reconstruct(&exact_pair_data(rho.matrix(), 8192.0))?;
    let td = linalg::trace_distance(est.matrix(), rho.matrix());
    out.push(check(
        "exact probabilities recovered within 1e-6",
        td < 1e-6,
        format!("trace distance {td:.3e}"),
    ));

    let data = sampled_pair_data(&psi.to_density(), 1024, seed, 2)?;
    let ml = ml_reconstruct(&data)?;
    let projected = project_to_physical(&linear_inversion_dm(&estimate_pauli_matrix(&data)?))?;
    let (l_ml, l_lin) = (
        log_likelihood(&data, ml.matrix())?,
        log_likelihood(&data, projected.matrix())?,
    );
    out.push(check(
        "ML likelihood >= projected linear inversion",
        l_ml >= l_lin - 1e-9,
        format!("{l_ml:.6} vs {l_lin:.6}"),
    ));
    Ok(out)
}

pub fn mitigation_selftest(_seed: u64) -> Result<Vec<SelfTestCheck>> {
    let mut out = Vec::new();

    let post = beta_update(&BetaPosterior::uniform(), 3, 10)?;
    out.push(check(
        "beta update (1,1) + 3/10 = (4,8)",
        post.alpha == 4.0 && post.beta == 8.0,
        format!("({}, {})", post.alpha, post.beta),
    ));

    let params = ReadoutParams {
        e0: vec![0.05, 0.1],
        e1: vec![0.05, 0.03],
    };
    let ideal = [0.1, 0.2, 0.3, 0.4];
    let back = readout_correction_map(&params)?
        .apply(&apply_readout_errors(&ideal, &params.e0, &params.e1))?;
    let err = back
        .iter()
        .zip(ideal)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    out.push(check(
        "readout round trip within 1e-12",
        err < 1e-12,
        format!("max error {err:.3e}"),
    ));

    let rich = richardson_extrapolate(&[(1.0, 0.8), (3.0, 0.4)])?;
    out.push(check(
        "richardson (1,0.8),(3,0.4) -> 1",
        (rich - 1.0).abs() < 1e-12,
        format!("{rich}"),
    ));

    let v = |r: f64| 2.0 * (-0.5 * r).exp();
    let a = exp_extrapolate(v(1.0), v(3.0), 1.0, 3.0)?;
    out.push(check(
        "exponential recovers amplitude 2",
        (a - 2.0).abs() < 1e-12,
        format!("{a}"),
    ));

    let s = |r: f64| 1.0 - 0.6 * (-0.4 * r).exp();
    let a = shifted_exp_extrapolate(s(1.0), s(3.0), 1.0, 3.0, 1.0)?;
    out.push(check(
        "shifted exponential recovers 0.4",
        (a - 0.4).abs() < 1e-10,
        format!("{a}"),
    ));
    Ok(out)
}
