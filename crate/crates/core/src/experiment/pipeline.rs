//! Simulate, tomograph, mitigate and extrapolate over a time grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Propagator};
use crate::circuit::{compile, gate_counts, swap_network_circuit, trotter_u1_circuit, Circuit};
use crate::error::{Error, Result};
use crate::mitigation::{
    ensemble_statistics, mitigate_with_params, readout_correction_map, sample_readout_params,
    EnsembleEstimate, Extrapolation, ReadoutParams,
};
use crate::model::{all_pairs, exact_evolve, NeutrinoModel};
use crate::noise::{
    amplify_noise, calibration_run, evolve_density, measured_distribution, CalibrationRecord,
    NoiseModel,
};
use crate::observables::{
    average_estimates, extended_concurrence, inversion_probability_from_distribution,
    von_neumann_entropy, MitigationTag, ObservableSeries,
};
use crate::qsim::{
    sample_counts_with, CountsRecord, DensityMatrix, Pauli, PauliString, Statevector,
};
use crate::rng::{derive_seed, derived_rng};
use crate::tomography::{
    measurement_settings, ml_reconstruct, setting_label, PairData, SettingData,
};

/// Stream labels for [`derive_seed`]; every stream also carries the time
/// index and the noise level.
const STREAM_SAMPLING: u64 = 1;
const STREAM_CALIBRATION: u64 = 2;
const STREAM_READOUT_DRAW: u64 = 3;
const STREAM_RESAMPLE: u64 = 4;

/// Compiled-circuit facts for one time point, before noise amplification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitInfo {
    pub time: f64,
    /// `None` for the exact propagator, which has no circuit.
    pub entanglers: Option<usize>,
    pub rotations: Option<usize>,
    /// 1-based neutrino at each physical position after the circuit.
    pub final_layout: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub circuits: Vec<CircuitInfo>,
    pub series: Vec<ObservableSeries>,
}

impl ResultsBundle {
    pub fn series(&self, name: &str, label: &str) -> Option<&ObservableSeries> {
        self.series
            .iter()
            .find(|s| s.name == name && s.label() == label)
    }
}

/// Final state of one time point at one noise level.
#[derive(Debug, Clone)]
pub struct PreparedState {
    /// Physical-order density matrix.
    pub rho: DensityMatrix,
    /// Logical qubit at each physical position.
    pub layout: Vec<usize>,
    pub circuit: Option<Circuit>,
}

/// Compiled single-step circuit for time `t`.
pub fn step_circuit(
    config: &ExperimentConfig,
    model: &NeutrinoModel,
    t: f64,
) -> Result<Option<Circuit>> {
    let raw = match config.propagator {
        Propagator::Exact => return Ok(None),
        Propagator::U1 => trotter_u1_circuit(model, t)?,
        Propagator::U2 => swap_network_circuit(model, t, &config.ordering_zero_based())?,
    };
    Ok(Some(compile(&raw)?))
}

pub fn prepare_state(
    config: &ExperimentConfig,
    model: &NeutrinoModel,
    noise: &NoiseModel,
    t: f64,
    r: u32,
) -> Result<PreparedState> {
    let n = config.model.n;
    match step_circuit(config, model, t)? {
        None => {
            let start = Statevector::new_basis_state(n, &config.initial_flavors)?;
            Ok(PreparedState {
                rho: exact_evolve(&start, model, t)?.to_density(),
                layout: (0..n).collect(),
                circuit: None,
            })
        }
        Some(circuit) => {
            let amplified = amplify_noise(&circuit, r)?;
            let start = Statevector::new_basis_state(
                n,
                &circuit.physical_input_bits(&config.initial_flavors)?,
            )?;
            Ok(PreparedState {
                rho: evolve_density(&amplified, &start, noise)?,
                layout: circuit.layout_out.clone(),
                circuit: Some(circuit),
            })
        }
    }
}

/// Outcomes of one measurement circuit restricted to the bits in use.
#[derive(Debug, Clone)]
struct Measurement {
    /// Physical qubits read, in bit order.
    qubits: Vec<usize>,
    /// Exact distribution, including readout corruption.
    exact: Vec<f64>,
    counts: Option<CountsRecord>,
}

/// All measurements of one time point at one noise level: index 0 is the
/// Z-basis register readout, then nine settings for each pair.
struct Dataset {
    layout: Vec<usize>,
    pairs: Vec<(usize, usize)>,
    measurements: Vec<Measurement>,
    calibration: Option<CalibrationRecord>,
}

fn pair_measurement_index(pair: usize, setting: usize) -> usize {
    1 + 9 * pair + setting
}

fn acquire(
    config: &ExperimentConfig,
    noise: &NoiseModel,
    state: &PreparedState,
    labels: [u64; 2],
) -> Result<Dataset> {
    let n = config.model.n;
    let position = |logical: usize| {
        state
            .layout
            .iter()
            .position(|&l| l == logical)
            .expect("layout is a permutation")
    };
    let pairs = all_pairs(n);
    let mut plan: Vec<(PauliString, Vec<usize>, String)> = Vec::with_capacity(1 + 9 * pairs.len());
    plan.push((
        PauliString(vec![Pauli::Z; n]),
        (0..n).collect(),
        "Z".repeat(n),
    ));
    for &(a, b) in &pairs {
        let (pa, pb) = (position(a), position(b));
        for bases in measurement_settings() {
            let setting = PauliString::sparse(n, &[(pa, bases[0]), (pb, bases[1])])?;
            let mut full = setting.clone();
            for (q, p) in full.0.iter_mut().enumerate() {
                if q != pa && q != pb {
                    *p = Pauli::Z;
                }
            }
            plan.push((full, vec![pa, pb], setting_label(bases)));
        }
    }
    let measurements = plan
        .into_iter()
        .enumerate()
        .map(|(i, (setting, qubits, label))| {
            let exact = measured_distribution(&state.rho, &setting, &qubits, noise)?;
            let counts = if config.exact_statistics {
                None
            } else {
                let mut rng = derived_rng(
                    config.seed,
                    &[labels[0], labels[1], STREAM_SAMPLING, i as u64],
                );
                Some(sample_counts_with(&exact, config.shots, &label, &mut rng)?)
            };
            Ok(Measurement {
                qubits,
                exact,
                counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let calibration = if config.exact_statistics || !config.readout_mitigation {
        None
    } else {
        let mut rng = derived_rng(config.seed, &[labels[0], labels[1], STREAM_CALIBRATION]);
        Some(calibration_run(
            noise,
            n,
            config.calibration_shots,
            &mut rng,
        )?)
    };
    Ok(Dataset {
        layout: state.layout.clone(),
        pairs,
        measurements,
        calibration,
    })
}

/// Observable values of one replica.
#[derive(Debug, Clone)]
struct ReplicaValues {
    inversion: Vec<f64>,
    /// Per pair: pair entropy, entropies of its first and second qubit, and
    /// extended concurrence.
    pairs: Vec<[f64; 4]>,
}

fn true_params(noise: &NoiseModel, qubits: &[usize], enabled: bool) -> ReadoutParams {
    let pick = |v: &[f64]| {
        qubits
            .iter()
            .map(|&q| if enabled { v[q] } else { 0.0 })
            .collect()
    };
    ReadoutParams {
        e0: pick(&noise.readout_e0),
        e1: pick(&noise.readout_e1),
    }
}

fn subset(params: &ReadoutParams, qubits: &[usize]) -> ReadoutParams {
    ReadoutParams {
        e0: qubits.iter().map(|&q| params.e0[q]).collect(),
        e1: qubits.iter().map(|&q| params.e1[q]).collect(),
    }
}

fn replica_values(
    config: &ExperimentConfig,
    noise: &NoiseModel,
    data: &Dataset,
    labels: [u64; 2],
    replica: usize,
) -> Result<ReplicaValues> {
    let n = config.model.n;
    let all: Vec<usize> = (0..n).collect();
    let corrected = |index: usize, params: &ReadoutParams| -> Result<Vec<f64>> {
        let m = &data.measurements[index];
        let local = subset(params, &m.qubits);
        match &m.counts {
            None => readout_correction_map(&local)?.apply(&m.exact),
            Some(counts) => {
                let seed = derive_seed(
                    config.seed,
                    &[
                        labels[0],
                        labels[1],
                        STREAM_RESAMPLE,
                        index as u64,
                        replica as u64,
                    ],
                );
                mitigate_with_params(counts, &local, &mut crate::rng::rng_from_seed(seed))
            }
        }
    };
    let params = match &data.calibration {
        Some(cal) => {
            let mut rng = derived_rng(
                config.seed,
                &[labels[0], labels[1], STREAM_READOUT_DRAW, replica as u64],
            );
            sample_readout_params(cal, &all, &mut rng)?
        }
        None => true_params(
            noise,
            &all,
            config.readout_mitigation && config.exact_statistics,
        ),
    };

    let z = corrected(0, &params)?;
    let inversion = (0..n)
        .map(|k| inversion_probability_from_distribution(&z, k, config.flavor(k), &data.layout))
        .collect::<Result<Vec<_>>>()?;

    let pairs = data
        .pairs
        .iter()
        .enumerate()
        .map(|(p, &(a, b))| {
            let settings = measurement_settings()
                .into_iter()
                .enumerate()
                .map(|(s, bases)| {
                    let q = corrected(pair_measurement_index(p, s), &params)?;
                    Ok(SettingData {
                        bases,
                        probabilities: [q[0], q[1], q[2], q[3]],
                        shots: config.shots as f64,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let rho = ml_reconstruct(&PairData::new(settings)).map_err(|e| {
                e.context(format!("pair ({}, {}), replica {replica}", a + 1, b + 1))
            })?;
            Ok([
                von_neumann_entropy(&rho)?,
                von_neumann_entropy(&rho.reduced(&[0])?)?,
                von_neumann_entropy(&rho.reduced(&[1])?)?,
                extended_concurrence(&rho)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicaValues { inversion, pairs })
}

/// Replica ensembles of every observable at one time and noise level.
fn time_point(
    config: &ExperimentConfig,
    model: &NeutrinoModel,
    noise: &NoiseModel,
    t_index: usize,
    r: u32,
) -> Result<Vec<ReplicaValues>> {
    let t = config.times[t_index];
    let labels = [t_index as u64, r as u64];
    let state = prepare_state(config, model, noise, t, r)?;
    let data = acquire(config, noise, &state, labels)?;
    let run = |j| replica_values(config, noise, &data, labels, j);
    let result = if config.exact_statistics {
        run(0).map(|v| vec![v; config.replicas])
    } else {
        (0..config.replicas).into_par_iter().map(run).collect()
    };
    result.map_err(|e| e.context(format!("t = {t}, r = {r}")))
}

fn tag_of(e: &Extrapolation) -> MitigationTag {
    match e {
        Extrapolation::Bare => MitigationTag::Bare,
        Extrapolation::Richardson => MitigationTag::Richardson,
        Extrapolation::Exp => MitigationTag::Exp,
        Extrapolation::ShiftedExp { .. } => MitigationTag::ShiftedExp,
    }
}

/// Replica-wise extrapolation from the two lowest noise levels; replicas
/// where the ansatz does not apply are returned as `None`.
fn extrapolate_samples(
    e: &Extrapolation,
    levels: [u32; 2],
    low: &[f64],
    high: &[f64],
) -> Result<Vec<Option<f64>>> {
    low.iter()
        .zip(high)
        .map(
            |(&v1, &v3)| match e.apply(&[(levels[0] as f64, v1), (levels[1] as f64, v3)]) {
                Ok(v) => Ok(Some(v)),
                Err(Error::AnsatzInapplicable(_)) => Ok(None),
                Err(other) => Err(other),
            },
        )
        .collect()
}

/// Collects the bare and mitigated series of each observable.
struct SeriesBuilder<'a> {
    config: &'a ExperimentConfig,
    series: Vec<ObservableSeries>,
}

impl SeriesBuilder<'_> {
    /// `values[r][t][source][replica]`; sources are averaged with the
    /// averaged-interval rule when there is more than one.
    fn add(
        &mut self,
        name: &str,
        values: &[Vec<Vec<Vec<f64>>>],
        recipe: &[Extrapolation],
        post: impl Fn(f64) -> f64,
    ) -> Result<()> {
        let times = self.config.times.clone();
        let nt = times.len();
        let estimate = |sources: &[Vec<f64>]| -> Result<Option<EnsembleEstimate>> {
            if sources.iter().any(|s| s.len() < 2) {
                return Ok(None);
            }
            let per = sources
                .iter()
                .map(|s| ensemble_statistics(s.iter().map(|&v| post(v)).collect()))
                .collect::<Result<Vec<_>>>()?;
            if per.len() == 1 {
                Ok(per.into_iter().next())
            } else {
                average_estimates(&per).map(Some)
            }
        };
        for (ri, &r) in self.config.noise_levels.iter().enumerate() {
            let estimates = (0..nt)
                .map(|ti| estimate(&values[ri][ti]))
                .collect::<Result<Vec<_>>>()?;
            self.series.push(ObservableSeries::new(
                name,
                times.clone(),
                estimates,
                r as f64,
                MitigationTag::Bare,
                vec![0; nt],
            )?);
        }
        if self.config.noise_levels.len() < 2 {
            return Ok(());
        }
        let levels = [self.config.noise_levels[0], self.config.noise_levels[1]];
        for e in recipe.iter().filter(|e| !matches!(e, Extrapolation::Bare)) {
            let mut estimates = Vec::with_capacity(nt);
            let mut dropped = Vec::with_capacity(nt);
            for (low_t, high_t) in values[0].iter().zip(&values[1]) {
                let per_source = low_t
                    .iter()
                    .zip(high_t)
                    .map(|(low, high)| extrapolate_samples(e, levels, low, high))
                    .collect::<Result<Vec<_>>>()?;
                let replicas = per_source.first().map_or(0, Vec::len);
                let keep: Vec<usize> = (0..replicas)
                    .filter(|&j| per_source.iter().all(|s| s[j].is_some()))
                    .collect();
                dropped.push(replicas - keep.len());
                let sources: Vec<Vec<f64>> = per_source
                    .iter()
                    .map(|s| keep.iter().map(|&j| s[j].expect("kept")).collect())
                    .collect();
                estimates.push(estimate(&sources)?);
            }
            self.series.push(ObservableSeries::new(
                name,
                times.clone(),
                estimates,
                0.0,
                tag_of(e),
                dropped,
            )?);
        }
        Ok(())
    }
}

/// Runs the full pipeline; deterministic for a given configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsBundle> {
    config.validate()?;
    let model = config.model()?;
    let noise = config.noise_model()?;
    let n = config.model.n;
    let nt = config.times.len();

    let jobs: Vec<(usize, usize)> = (0..config.noise_levels.len())
        .flat_map(|ri| (0..nt).map(move |ti| (ri, ti)))
        .collect();
    let results: Vec<Vec<ReplicaValues>> = jobs
        .par_iter()
        .map(|&(ri, ti)| time_point(config, &model, &noise, ti, config.noise_levels[ri]))
        .collect::<Result<_>>()?;
    let at = |ri: usize, ti: usize| &results[ri * nt + ti];
    let nr = config.noise_levels.len();
    let gather = |f: &dyn Fn(&ReplicaValues) -> Vec<f64>| -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..nr)
            .map(|ri| {
                (0..nt)
                    .map(|ti| {
                        let reps = at(ri, ti);
                        let width = reps.first().map_or(0, |v| f(v).len());
                        let rows: Vec<Vec<f64>> = reps.iter().map(f).collect();
                        (0..width)
                            .map(|s| rows.iter().map(|row| row[s]).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };

    let pairs = all_pairs(n);
    let mitigation = &config.mitigation;
    let mut builder = SeriesBuilder {
        config,
        series: Vec::new(),
    };
    for k in 0..n {
        let values = gather(&|v| vec![v.inversion[k]]);
        builder.add(
            &format!("p_inv_{}", k + 1),
            &values,
            &mitigation.inversion,
            |v| v,
        )?;
    }
    for k in 0..n {
        let sources: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter_map(|(p, &(a, b))| match (a == k, b == k) {
                (true, _) => Some((p, 1)),
                (_, true) => Some((p, 2)),
                _ => None,
            })
            .collect();
        let values = gather(&|v| sources.iter().map(|&(p, i)| v.pairs[p][i]).collect());
        builder.add(
            &format!("entropy_{}", k + 1),
            &values,
            &mitigation.single_spin_entropy,
            |v| v,
        )?;
    }
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let suffix = format!("{}{}", a + 1, b + 1);
        let entropy = gather(&|v| vec![v.pairs[p][0]]);
        builder.add(
            &format!("pair_entropy_{suffix}"),
            &entropy,
            &mitigation.pair_entropy,
            |v| v,
        )?;
        let ext = gather(&|v| vec![v.pairs[p][3]]);
        builder.add(
            &format!("extended_concurrence_{suffix}"),
            &ext,
            &mitigation.concurrence,
            |v| v,
        )?;
        builder.add(
            &format!("concurrence_{suffix}"),
            &ext,
            &mitigation.concurrence,
            |v| v.max(0.0),
        )?;
    }

    let circuits = config
        .times
        .iter()
        .map(|&t| {
            let circuit = step_circuit(config, &model, t)?;
            let (entanglers, rotations, layout) = match &circuit {
                Some(c) => {
                    let (e, r) = gate_counts(c)?;
                    (Some(e), Some(r), c.layout_out.clone())
                }
                None => (None, None, (0..n).collect()),
            };
            Ok(CircuitInfo {
                time: t,
                entanglers,
                rotations,
                final_layout: layout.iter().map(|l| l + 1).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ResultsBundle {
        config: config.clone(),
        config_hash: config.hash()?,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        circuits,
        series: builder.series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(propagator: Propagator) -> ExperimentConfig {
        ExperimentConfig {
            times: vec![0.0, 1.0],
            propagator,
            replicas: 8,
            shots: 512,
            calibration_shots: 512,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn exact_mode_starts_without_inversion() {
        let config = ExperimentConfig {
            noise: super::super::config::NoiseConfig {
                depol_2q: 0.0,
                readout_e0: 0.0,
                readout_e1: 0.0,
            },
            ..small(Propagator::Exact)
        };
        let exact = run_experiment(&ExperimentConfig {
            exact_statistics: true,
            ..config.clone()
        })
        .unwrap();
        let sampled = run_experiment(&config).unwrap();
        for k in 1..=4 {
            let name = format!("p_inv_{k}");
            assert!(
                exact.series(&name, "1").unwrap().estimates[0]
                    .as_ref()
                    .unwrap()
                    .mean
                    .abs()
                    < 1e-15
            );
            // the uniform prior puts a few pseudo-counts on flipped outcomes
            let m = sampled.series(&name, "1").unwrap().estimates[0]
                .as_ref()
                .unwrap()
                .mean;
            assert!(m.abs() < 0.03, "{m}");
        }
    }

    #[test]
    fn series_inventory() {
        let bundle = run_experiment(&small(Propagator::U2)).unwrap();
        let names: std::collections::BTreeSet<_> =
            bundle.series.iter().map(|s| s.name.clone()).collect();
        assert_eq!(names.iter().filter(|n| n.starts_with("p_inv_")).count(), 4);
        assert_eq!(
            names.iter().filter(|n| n.starts_with("entropy_")).count(),
            4
        );
        assert_eq!(
            names
                .iter()
                .filter(|n| n.starts_with("pair_entropy_"))
                .count(),
            6
        );
        assert_eq!(
            names
                .iter()
                .filter(|n| n.starts_with("concurrence_"))
                .count(),
            6
        );
        assert_eq!(bundle.circuits[1].entanglers, Some(18));
        assert_eq!(bundle.circuits[1].final_layout, vec![4, 2, 3, 1]);
    }
}
