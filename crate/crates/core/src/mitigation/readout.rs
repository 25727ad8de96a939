//! Readout-error correction with Bayesian uncertainty on both the
//! measurement counts and the calibration.

use serde::{Deserialize, Serialize};

use super::bayes::{beta_update, predictive_draw, BetaPosterior, DirichletPosterior};
use crate::error::{Error, Result};
use crate::noise::CalibrationRecord;
use crate::qsim::CountsRecord;
use crate::rng::{self, SimRng};

/// Per-bit flip probabilities, in the order of the measured bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
}

impl ReadoutParams {
    pub fn validate(&self) -> Result<()> {
        if self.e0.len() != self.e1.len() {
            return Err(Error::input("e0 and e1 differ in length"));
        }
        if let Some(p) = self
            .e0
            .iter()
            .chain(&self.e1)
            .find(|p| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::input(format!("readout error {p} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Tensor product of inverted confusion matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionMap {
    /// Per bit, the inverse of `[[1−e0, e1], [e0, 1−e1]]` row-major.
    inverses: Vec<[[f64; 2]; 2]>,
}

pub fn readout_correction_map(params: &ReadoutParams) -> Result<CorrectionMap> {
    params.validate()?;
    let inverses = params
        .e0
        .iter()
        .zip(&params.e1)
        .map(|(&e0, &e1)| {
            let det = 1.0 - e0 - e1;
            if det <= 1e-12 {
                return Err(Error::input(format!(
                    "confusion matrix with e0 = {e0}, e1 = {e1} is not invertible"
                )));
            }
            Ok([[(1.0 - e1) / det, -e1 / det], [-e0 / det, (1.0 - e0) / det]])
        })
        .collect::<Result<_>>()?;
    Ok(CorrectionMap { inverses })
}

impl CorrectionMap {
    pub fn n_bits(&self) -> usize {
        self.inverses.len()
    }

    /// Corrected quasi-probabilities; entries may be negative.
    pub fn apply(&self, probs: &[f64]) -> Result<Vec<f64>> {
        let k = self.inverses.len();
        if probs.len() != 1 << k {
            return Err(Error::input(format!(
                "{} probabilities for a {k}-bit correction",
                probs.len()
            )));
        }
        let mut p = probs.to_vec();
        for (bit, inv) in self.inverses.iter().enumerate() {
            let shift = k - 1 - bit;
            for idx in (0..p.len()).filter(|i| (i >> shift) & 1 == 0) {
                let one = idx | (1 << shift);
                let (p0, p1) = (p[idx], p[one]);
                p[idx] = inv[0][0] * p0 + inv[0][1] * p1;
                p[one] = inv[1][0] * p0 + inv[1][1] * p1;
            }
        }
        Ok(p)
    }
}

/// One posterior draw of `(e0, e1)` for each listed physical qubit.
pub fn sample_readout_params(
    calibration: &CalibrationRecord,
    qubits: &[usize],
    rng: &mut SimRng,
) -> Result<ReadoutParams> {
    let mut e0 = Vec::with_capacity(qubits.len());
    let mut e1 = Vec::with_capacity(qubits.len());
    for &q in qubits {
        let (m0, m1) = calibration.flip_counts(q)?;
        e0.push(beta_update(&BetaPosterior::uniform(), m0, calibration.shots)?.sample(rng));
        e1.push(beta_update(&BetaPosterior::uniform(), m1, calibration.shots)?.sample(rng));
    }
    Ok(ReadoutParams { e0, e1 })
}

/// Predictive replica of `measurement` corrected with `params`.
pub fn mitigate_with_params(
    measurement: &CountsRecord,
    params: &ReadoutParams,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let bits = params.e0.len();
    let counts = measurement.to_vector(bits)?;
    if measurement.shots == 0 {
        return Err(Error::input("measurement has no shots"));
    }
    let posterior = DirichletPosterior::new(counts.iter().map(|&c| 1.0 + c as f64).collect())?;
    let replica = predictive_draw(&posterior, measurement.shots, rng);
    let freqs: Vec<f64> = replica
        .iter()
        .map(|&c| c as f64 / measurement.shots as f64)
        .collect();
    readout_correction_map(params)?.apply(&freqs)
}

/// `replicas` readout-mitigated quasi-probability vectors for the bits of
/// `measurement`, which were read from the physical `qubits`.
pub fn mitigate_readout_ensemble(
    measurement: &CountsRecord,
    qubits: &[usize],
    calibration: &CalibrationRecord,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if replicas == 0 {
        return Err(Error::input("need at least one replica"));
    }
    let mut rng = rng::rng_from_seed(seed);
    (0..replicas)
        .map(|_| {
            let params = sample_readout_params(calibration, qubits, &mut rng)?;
            mitigate_with_params(measurement, &params, &mut rng)
        })
        .collect()
}
