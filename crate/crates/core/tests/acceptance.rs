//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nuflavor::circuit::{
    compile, gate_counts, logical_unitary, pair_unitary, swap_network_circuit,
    swap_network_schedule,
};
use nuflavor::experiment::config::time_grid;
use nuflavor::experiment::{
    compare_propagators, emit_series, run_experiment, u1_unitary, u2_unitary,
};
use nuflavor::linalg::{self, c, CMatrix};
use nuflavor::mitigation::bayes::{beta_update, dirichlet_update, sample_predictive};
use nuflavor::mitigation::readout::{mitigate_readout_ensemble, readout_correction_map};
use nuflavor::mitigation::stats::ensemble_statistics;
use nuflavor::mitigation::zne::{exp_extrapolate, richardson_extrapolate, shifted_exp_extrapolate};
use nuflavor::model::{build_model, exact_evolve, ExactPropagator};
use nuflavor::noise::{apply_readout_errors, calibration_run};
use nuflavor::observables::{concurrence, extended_concurrence};
use nuflavor::qsim::sample_counts_with;
use nuflavor::rng::rng_from_seed;
use nuflavor::tomography::{
    measurement_settings, ml_reconstruct, setting_distribution, setting_label,
};
use nuflavor::{
    BetaPosterior, CountsRecord, DensityMatrix, DirichletPosterior, ExperimentConfig, NoiseModel,
    OutputFormat, PairData, ReadoutParams, Result, Statevector,
};
use rand::Rng;

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn reference_model(n: usize) -> Result<nuflavor::NeutrinoModel> {
    build_model(n, 0.195, 0.9, 0.0)
}

fn default_ordering(n: usize) -> Vec<usize> {
    if n == 4 {
        vec![0, 2, 1, 3]
    } else {
        (0..n).collect()
    }
}

fn swap_network_exactness() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = rng_from_seed(11);
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        let model = reference_model(n)?;
        let ordering = default_ordering(n);
        for _ in 0..20 {
            let t: f64 = rng.random_range(0.0..8.0);
            let oracle = swap_network_schedule(n, &ordering)?.into_iter().try_fold(
                linalg::identity(1 << n),
                |acc, (p, q)| -> Result<CMatrix> {
                    Ok(linalg::embed(n, &[p, q], &pair_unitary(&model, p, q, t)?)? * acc)
                },
            )?;
            let compiled = compile(&swap_network_circuit(&model, t, &ordering)?)?;
            worst = worst.max(linalg::max_abs_diff(&logical_unitary(&compiled)?, &oracle));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        worst < 1e-8 && secs < 10.0,
        format!("max deviation {worst:.2e} over N = 2..5, 20 times each, {secs:.2} s"),
    ))
}

fn gate_count_bounds() -> Result<Outcome> {
    let model = reference_model(4)?;
    let mut rng = rng_from_seed(12);
    let mut times = time_grid(0.0, 8.0, 17);
    times.extend((0..20).map(|_| rng.random_range(0.0..8.0)));
    let (mut max_e, mut max_r) = (0, 0);
    for &t in &times {
        let (e, r) = gate_counts(&compile(&swap_network_circuit(&model, t, &[0, 2, 1, 3])?)?)?;
        max_e = max_e.max(e);
        max_r = max_r.max(r);
    }
    let mut general = true;
    let mut general_detail = Vec::new();
    for n in 2..=6 {
        let model = reference_model(n)?;
        let bound = 3 * n * (n - 1) / 2;
        let mut worst = 0;
        for _ in 0..5 {
            let t = rng.random_range(0.0..8.0);
            let (e, _) = gate_counts(&compile(&swap_network_circuit(
                &model,
                t,
                &default_ordering(n),
            )?)?)?;
            worst = worst.max(e);
        }
        general &= worst <= bound;
        general_detail.push(format!("N={n}: {worst}/{bound}"));
    }
    Ok(Outcome::new(
        max_e <= 18 && max_r <= 90 && general,
        format!(
            "N=4 worst {max_e} entanglers, {max_r} rotations; {}",
            general_detail.join(", ")
        ),
    ))
}

fn trotter_order() -> Result<Outcome> {
    let model = reference_model(4)?;
    let exact = ExactPropagator::new(&model);
    let err1 = |t: f64| -> Result<f64> {
        Ok(linalg::spectral_norm(
            &(&exact.unitary(t) - &u1_unitary(&model, t)?),
        ))
    };
    let err2 = |t: f64| -> Result<f64> {
        Ok(linalg::spectral_norm(
            &(&exact.unitary(t) - &u2_unitary(&model, t, &[0, 2, 1, 3])?),
        ))
    };
    let mut ratios = Vec::new();
    for t in [0.1, 0.05, 0.025] {
        ratios.push(("U1", t, err1(t)? / err1(t / 2.0)?));
        ratios.push(("U2", t, err2(t)? / err2(t / 2.0)?));
    }
    let passed = ratios.iter().all(|(_, _, r)| (r - 4.0).abs() <= 0.5);
    let detail = ratios
        .iter()
        .map(|(name, t, r)| format!("{name}@{t}: {r:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome::new(passed, detail))
}

fn pair_propagator_advantage() -> Result<Outcome> {
    let report = compare_propagators(&ExperimentConfig::default())?;
    let rows: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.ordering == [1, 3, 2, 4] && (4.0..=8.0).contains(&r.t))
        .collect();
    let losing: Vec<String> = rows
        .iter()
        .filter(|r| r.fidelity_u2 < r.fidelity_u1)
        .map(|r| {
            format!(
                "t={}: f2 {:.4} < f1 {:.4}",
                r.t, r.fidelity_u2, r.fidelity_u1
            )
        })
        .collect();
    let detail = if losing.is_empty() {
        format!("U2 fidelity >= U1 at all {} grid points", rows.len())
    } else {
        format!(
            "{} of {} points lose, e.g. {}",
            losing.len(),
            rows.len(),
            losing[0]
        )
    };
    Ok(Outcome::new(losing.is_empty(), detail))
}

fn symmetry() -> Result<Outcome> {
    let report = compare_propagators(&ExperimentConfig::default())?;
    let rows: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.ordering == [1, 3, 2, 4])
        .collect();
    let exact_gap = rows
        .iter()
        .map(|r| (r.p_inv_exact[0] - r.p_inv_exact[3]).abs())
        .fold(0.0, f64::max);
    let mut relative_14: f64 = 0.0;
    let mut absolute: f64 = 0.0;
    for r in rows.iter().filter(|r| r.t <= 6.0 && r.t > 0.0) {
        let (p1, p4) = (r.p_inv_u2[0], r.p_inv_u2[3]);
        relative_14 = relative_14.max((p1 - p4).abs() / (0.5 * (p1 + p4)));
        absolute = absolute
            .max((p1 - p4).abs())
            .max((r.p_inv_u2[1] - r.p_inv_u2[2]).abs());
    }
    Ok(Outcome::new(
        exact_gap < 1e-9 && relative_14 < 0.10 && absolute < 0.10,
        format!(
            "exact |P1-P4| max {exact_gap:.1e}; U2 for t <= 6: (1,4) relative {:.1}%, largest absolute gap over (1,4),(2,3) {absolute:.3}",
            100.0 * relative_14
        ),
    ))
}

fn depolarization_limits() -> Result<Outcome> {
    let mut config = ExperimentConfig {
        times: time_grid(1.0, 8.0, 8),
        noise_levels: vec![1],
        replicas: 2,
        exact_statistics: true,
        ..ExperimentConfig::default()
    };
    config.noise.depol_2q = 0.99;
    let bundle = run_experiment(&config)?;
    let mut worst = [0.0f64; 4];
    let targets = [
        ("p_inv_", 0.5),
        ("entropy_", 1.0),
        ("pair_entropy_", 2.0),
        ("extended_concurrence_", -0.5),
    ];
    for s in bundle.series.iter().filter(|s| s.label() == "1") {
        let Some(slot) = targets.iter().position(|(prefix, _)| {
            s.name.starts_with(prefix) && !(*prefix == "entropy_" && s.name.starts_with("pair_"))
        }) else {
            continue;
        };
        for e in s.estimates.iter().flatten() {
            worst[slot] = worst[slot].max((e.mean - targets[slot].1).abs());
        }
    }
    let passed = worst.iter().all(|&w| w <= 0.02);
    Ok(Outcome::new(
        passed,
        format!(
            "depol_2q = 0.99, max deviation: P_inv {:.1e}, single-spin entropy {:.1e}, pair entropy {:.1e}, extended concurrence {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn zne_recovery() -> Result<Outcome> {
    let (r1, r3) = (1.0, 3.0);
    let linear = |r: f64| 0.3 - 0.07 * r;
    let exp = |r: f64| 0.8 * (-0.2 * r).exp();
    let shifted = |r: f64| 1.0 - 0.6 * (-0.25 * r).exp();
    let synthetic = [
        (
            richardson_extrapolate(&[(r1, linear(r1)), (r3, linear(r3))])?,
            linear(0.0),
        ),
        (exp_extrapolate(exp(r1), exp(r3), r1, r3)?, exp(0.0)),
        (
            shifted_exp_extrapolate(shifted(r1), shifted(r3), r1, r3, 1.0)?,
            shifted(0.0),
        ),
    ];
    let synthetic_err = synthetic
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let times = vec![0.0, 2.0, 4.0, 6.0, 8.0];
    let replicas = 200;
    let mut worst_hits = usize::MAX;
    let mut total = 0;
    let mut hits_all = 0;
    for seed in 0..10u64 {
        let noisy = ExperimentConfig {
            seed: 7000 + seed,
            times: times.clone(),
            replicas,
            ..ExperimentConfig::default()
        };
        let mut clean = ExperimentConfig {
            seed: 9000 + seed,
            times: times.clone(),
            replicas,
            noise_levels: vec![1],
            readout_mitigation: false,
            ..ExperimentConfig::default()
        };
        clean.noise.depol_2q = 0.0;
        clean.noise.readout_e0 = 0.0;
        clean.noise.readout_e1 = 0.0;
        let (noisy, clean) = (run_experiment(&noisy)?, run_experiment(&clean)?);
        for k in 1..=4 {
            let name = format!("entropy_{k}");
            let mitigated = noisy
                .series(&name, "shifted-exp")
                .expect("mitigated entropy series");
            let reference = clean.series(&name, "1").expect("noiseless entropy series");
            let hits = mitigated
                .estimates
                .iter()
                .zip(&reference.estimates)
                .filter(|(m, r)| match (m, r) {
                    (Some(m), Some(r)) => {
                        let sigma = m.half_width().hypot(r.half_width());
                        (m.mean - r.mean).abs() <= 3.0 * sigma
                    }
                    _ => false,
                })
                .count();
            worst_hits = worst_hits.min(hits);
            hits_all += hits;
            total += times.len();
        }
    }
    Ok(Outcome::new(
        synthetic_err < 1e-10 && worst_hits >= 4,
        format!(
            "synthetic recovery error {synthetic_err:.1e}; shifted-exp entropy within 3 sigma at {hits_all}/{total} points, worst neutrino and seed {worst_hits}/5"
        ),
    ))
}

fn tomography_fidelity() -> Result<Outcome> {
    let start = Instant::now();
    let model = reference_model(4)?;
    let initial = Statevector::new_basis_state(4, "0011")?;
    let mut rng = rng_from_seed(13);
    let mut worst: f64 = 0.0;
    for t in time_grid(0.0, 8.0, 17) {
        let state = exact_evolve(&initial, &model, t)?;
        for a in 0..4 {
            for b in a + 1..4 {
                let exact = state.reduced_density(&[a, b])?;
                let records = measurement_settings()
                    .into_iter()
                    .map(|bases| {
                        let p = setting_distribution(exact.matrix(), bases);
                        sample_counts_with(&p, 8192, &setting_label(bases), &mut rng)
                    })
                    .collect::<Result<Vec<CountsRecord>>>()?;
                let fit = ml_reconstruct(&PairData::from_counts(&records)?)?;
                worst = worst.max(linalg::trace_distance(fit.matrix(), exact.matrix()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        worst <= 0.03 && secs < 120.0,
        format!("max trace distance {worst:.4} over 6 pairs x 17 times, {secs:.1} s"),
    ))
}

fn bayesian_layer() -> Result<Outcome> {
    let beta = beta_update(&BetaPosterior::uniform(), 37, 100)?;
    let dirichlet = dirichlet_update(&DirichletPosterior::uniform(4)?, &[3, 0, 5, 9])?;
    let exact_updates =
        beta.alpha == 38.0 && beta.beta == 64.0 && dirichlet.concentration == [4.0, 1.0, 6.0, 10.0];

    let n = 100u64;
    let (a, b) = (beta.alpha, beta.beta);
    let nf = n as f64;
    let beta_binomial = nf * a * b * (a + b + nf) / ((a + b).powi(2) * (a + b + 1.0));
    let draws = sample_predictive(&beta, n, 100_000, 14)?;
    let beta_rel = (variance(draws.iter().map(|d| d[0] as f64)) / beta_binomial - 1.0).abs();

    let alpha = &dirichlet.concentration;
    let a0: f64 = alpha.iter().sum();
    let draws = sample_predictive(&dirichlet, n, 100_000, 15)?;
    let mut dirichlet_rel: f64 = 0.0;
    for (i, &ai) in alpha.iter().enumerate() {
        let closed = nf * ai * (a0 - ai) * (nf + a0) / (a0 * a0 * (a0 + 1.0));
        dirichlet_rel =
            dirichlet_rel.max((variance(draws.iter().map(|d| d[i] as f64)) / closed - 1.0).abs());
    }
    Ok(Outcome::new(
        exact_updates && beta_rel < 0.02 && dirichlet_rel < 0.02,
        format!(
            "integer updates exact: {exact_updates}; predictive variance error beta {:.2}%, dirichlet {:.2}% at L = 1e5",
            100.0 * beta_rel,
            100.0 * dirichlet_rel
        ),
    ))
}

fn variance(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn readout_mitigation() -> Result<Outcome> {
    let model = reference_model(4)?;
    let state = exact_evolve(&Statevector::new_basis_state(4, "0011")?, &model, 3.0)?;
    let ideal = state.probabilities();
    let params = ReadoutParams {
        e0: vec![0.05; 4],
        e1: vec![0.05; 4],
    };
    let noisy = apply_readout_errors(&ideal, &params.e0, &params.e1);
    let back = readout_correction_map(&params)?.apply(&noisy)?;
    let round_trip = back
        .iter()
        .zip(&ideal)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let noise = NoiseModel::uniform(1, 0.0, 0.05, 0.05)?;
    let truth = [0.7, 0.3];
    let true_z = truth[0] - truth[1];
    let measured = apply_readout_errors(&truth, &noise.readout_e0, &noise.readout_e1);
    let trials = 200;
    let mut covered = 0;
    for trial in 0..trials {
        let mut rng = rng_from_seed(20_000 + trial);
        let counts = sample_counts_with(&measured, 8192, "Z", &mut rng)?;
        let calibration = calibration_run(&noise, 1, 8192, &mut rng)?;
        let ensemble =
            mitigate_readout_ensemble(&counts, &[0], &calibration, 1000, 30_000 + trial)?;
        let z = ensemble_statistics(ensemble.iter().map(|q| q[0] - q[1]).collect())?;
        covered += usize::from(z.contains(true_z));
    }
    let coverage = covered as f64 / trials as f64;
    Ok(Outcome::new(
        round_trip < 1e-12 && (0.60..=0.76).contains(&coverage),
        format!(
            "round trip error {round_trip:.1e}; 68% interval covers true <Z> in {covered}/{trials} trials ({:.1}%)",
            100.0 * coverage
        ),
    ))
}

fn concurrence_anchors() -> Result<Outcome> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = Statevector::from_amplitudes(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)])?
        .to_density();
    let bell_c = concurrence(&bell)?;
    let mut rng = rng_from_seed(16);
    let mut product_c: f64 = 0.0;
    for _ in 0..20 {
        let mut q = || {
            let (th, ph): (f64, f64) = (rng.random_range(0.0..3.2), rng.random_range(0.0..6.3));
            linalg::ry(th) * linalg::rz(ph)
        };
        let u = linalg::kron(&q(), &q());
        let mut s = Statevector::new_basis_state(2, "00")?;
        s.apply_operator(&u)?;
        product_c = product_c.max(concurrence(&s.to_density())?);
    }
    let mixed = extended_concurrence(&DensityMatrix::maximally_mixed(2))?;
    Ok(Outcome::new(
        (bell_c - 1.0).abs() < 1e-10 && product_c < 1e-6 && (mixed + 0.5).abs() < 1e-12,
        format!("Bell C = {bell_c:.12}; product states max C = {product_c:.1e}; maximally mixed extended C = {mixed}"),
    ))
}

fn determinism() -> Result<Outcome> {
    let config = ExperimentConfig::default();
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for dir in &dirs {
        emit_series(&run_experiment(&config)?, dir.path(), OutputFormat::Csv)?;
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let a = std::fs::read(dirs[0].path().join(name))?;
        let b = std::fs::read(dirs[1].path().join(name)).unwrap_or_default();
        if a != b {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    let second = std::fs::read_dir(dirs[1].path())?.count();
    Ok(Outcome::new(
        differing.is_empty() && second == names.len(),
        format!("{} files compared, {} differ", names.len(), differing.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("swap-network exactness", swap_network_exactness),
        ("gate-count bounds", gate_count_bounds),
        ("Trotter order", trotter_order),
        ("pair-propagator advantage", pair_propagator_advantage),
        ("symmetry", symmetry),
        ("depolarization limits", depolarization_limits),
        ("ZNE recovery", zne_recovery),
        ("tomography fidelity", tomography_fidelity),
        ("Bayesian layer", bayesian_layer),
        ("readout mitigation", readout_mitigation),
        ("concurrence anchors", concurrence_anchors),
        ("end-to-end determinism", determinism),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (i, (name, _)) in criteria.iter().enumerate() {
            println!("criterion {} {name}: test", i + 1);
        }
        return ExitCode::SUCCESS;
    }
    let only: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        failed += usize::from(!outcome.passed);
        println!(
            "{} {number:>2} {name}: {} [{:.1} s]",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
