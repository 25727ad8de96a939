use nuflavor::circuit::{logical_unitary, swap_network_circuit};
use nuflavor::experiment::output::{from_json, to_json};
use nuflavor::experiment::{emit_series, run_experiment, Manifest, Propagator};
use nuflavor::model::exact_evolve;
use nuflavor::observables::{inversion_probability_from_distribution, von_neumann_entropy};
use nuflavor::{ExperimentConfig, OutputFormat, Statevector};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        times: vec![0.0, 1.5, 3.0],
        replicas: 4,
        shots: 2048,
        calibration_shots: 2048,
        ..Default::default()
    }
}

fn noiseless_exact_statistics(propagator: Propagator) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        propagator,
        noise_levels: vec![1],
        exact_statistics: true,
        replicas: 2,
        ..small()
    };
    config.noise.depol_2q = 0.0;
    config.noise.readout_e0 = 0.0;
    config.noise.readout_e1 = 0.0;
    config
}

fn oracle_state(config: &ExperimentConfig, t: f64) -> Statevector {
    let model = config.model().unwrap();
    let mut state = Statevector::new_basis_state(4, &config.initial_flavors).unwrap();
    match config.propagator {
        Propagator::Exact => exact_evolve(&state, &model, t).unwrap(),
        Propagator::U2 => {
            let circuit = swap_network_circuit(&model, t, &config.ordering_zero_based()).unwrap();
            state
                .apply_operator(&logical_unitary(&circuit).unwrap())
                .unwrap();
            state
        }
        Propagator::U1 => unreachable!(),
    }
}

#[test]
fn noiseless_pipeline_matches_dense_oracle() {
    for propagator in [Propagator::Exact, Propagator::U2] {
        let config = noiseless_exact_statistics(propagator);
        let bundle = run_experiment(&config).unwrap();
        for (ti, &t) in config.times.iter().enumerate() {
            let state = oracle_state(&config, t);
            let probs = state.probabilities();
            let identity: Vec<usize> = (0..4).collect();
            for k in 0..4 {
                let expected =
                    inversion_probability_from_distribution(&probs, k, config.flavor(k), &identity)
                        .unwrap();
                let got = bundle
                    .series(&format!("p_inv_{}", k + 1), "1")
                    .unwrap()
                    .estimates[ti]
                    .as_ref()
                    .unwrap()
                    .mean;
                assert!(
                    (got - expected).abs() < 1e-6,
                    "{propagator:?} t={t} k={k}: {got} vs {expected}"
                );
            }
            for (a, b) in [(0, 1), (0, 3), (1, 2)] {
                let expected =
                    von_neumann_entropy(&state.reduced_density(&[a, b]).unwrap()).unwrap();
                let name = format!("pair_entropy_{}{}", a + 1, b + 1);
                let got = bundle.series(&name, "1").unwrap().estimates[ti]
                    .as_ref()
                    .unwrap()
                    .mean;
                assert!(
                    (got - expected).abs() < 1e-3,
                    "{name} t={t}: {got} vs {expected}"
                );
            }
        }
    }
}

#[test]
fn same_seed_same_bundle_and_different_seed_differs() {
    let config = small();
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    assert_eq!(a, b);
    let c = run_experiment(&ExperimentConfig {
        seed: config.seed + 1,
        ..config
    })
    .unwrap();
    assert_ne!(a.series, c.series);
}

#[test]
fn json_round_trip_preserves_bundle() {
    let bundle = run_experiment(&small()).unwrap();
    assert_eq!(from_json(&to_json(&bundle).unwrap()).unwrap(), bundle);
}

#[test]
fn csv_output_has_one_row_per_time_and_label() {
    let config = small();
    let bundle = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_series(&bundle, dir.path(), OutputFormat::Csv).unwrap();
    assert_eq!(files.len(), 4 + 4 + 6 + 6 + 6 + 1);

    let text = std::fs::read_to_string(dir.path().join("p_inv_1.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,r_or_tag,mean,ci_low,ci_high"));
    let labels: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    let levels = config.noise_levels.len() + config.mitigation.inversion.len();
    assert_eq!(labels.len(), config.times.len() * levels);
    assert!(labels.contains(&"1") && labels.contains(&"3") && labels.contains(&"richardson"));

    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.config_hash, config.hash().unwrap());
    assert_eq!(manifest.files.len(), files.len() - 1);
}

#[test]
fn confidence_intervals_bracket_means() {
    let bundle = run_experiment(&small()).unwrap();
    for s in &bundle.series {
        for e in s.estimates.iter().flatten() {
            assert!(
                e.ci_low <= e.mean && e.mean <= e.ci_high,
                "{}: {e:?}",
                s.name
            );
        }
    }
}
