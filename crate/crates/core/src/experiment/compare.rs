//! Single-step propagators against exact evolution.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::format_significant;
use crate::circuit::{logical_unitary, swap_network_circuit, trotter_u1_circuit};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{ExactPropagator, NeutrinoModel};
use crate::observables::inversion_probability_from_distribution;
use crate::qsim::Statevector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    /// 1-based swap-network ordering used for the pair propagator.
    pub ordering: Vec<usize>,
    /// Spectral norm of the difference from `e^{−iHt}`.
    pub norm_u1: f64,
    pub norm_u2: f64,
    pub fidelity_u1: f64,
    pub fidelity_u2: f64,
    pub p_inv_exact: Vec<f64>,
    pub p_inv_u1: Vec<f64>,
    pub p_inv_u2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

/// The swap-network unitary in logical qubit order.
pub fn u2_unitary(model: &NeutrinoModel, t: f64, ordering: &[usize]) -> Result<CMatrix> {
    logical_unitary(&swap_network_circuit(model, t, ordering)?)
}

pub fn u1_unitary(model: &NeutrinoModel, t: f64) -> Result<CMatrix> {
    logical_unitary(&trotter_u1_circuit(model, t)?)
}

fn inversions(state: &Statevector, config: &ExperimentConfig) -> Result<Vec<f64>> {
    let n = config.model.n;
    let layout: Vec<usize> = (0..n).collect();
    let probs = state.probabilities();
    (0..n)
        .map(|k| inversion_probability_from_distribution(&probs, k, config.flavor(k), &layout))
        .collect()
}

/// Rows for the configured ordering and, when different, the natural one.
pub fn compare_propagators(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let model = config.model()?;
    let n = config.model.n;
    let exact = ExactPropagator::new(&model);
    let start = Statevector::new_basis_state(n, &config.initial_flavors)?;
    let natural: Vec<usize> = (0..n).collect();
    let mut orderings = vec![config.ordering_zero_based()];
    if orderings[0] != natural {
        orderings.push(natural);
    }
    let evolve = |u: &CMatrix| -> Result<Statevector> {
        let mut s = start.clone();
        s.apply_operator(u)?;
        Ok(s)
    };
    let mut rows = Vec::new();
    for ordering in &orderings {
        for &t in &config.times {
            let ue = exact.unitary(t);
            let u1 = u1_unitary(&model, t)?;
            let u2 = u2_unitary(&model, t, ordering)?;
            let (se, s1, s2) = (evolve(&ue)?, evolve(&u1)?, evolve(&u2)?);
            rows.push(ComparisonRow {
                t,
                ordering: ordering.iter().map(|k| k + 1).collect(),
                norm_u1: linalg::spectral_norm(&(&ue - &u1)),
                norm_u2: linalg::spectral_norm(&(&ue - &u2)),
                fidelity_u1: se.fidelity(&s1),
                fidelity_u2: se.fidelity(&s2),
                p_inv_exact: inversions(&se, config)?,
                p_inv_u1: inversions(&s1, config)?,
                p_inv_u2: inversions(&s2, config)?,
            });
        }
    }
    Ok(ComparisonReport { rows })
}

/// Writes `propagators.csv` into `dir`.
pub fn emit_comparison(report: &ComparisonReport, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let n = report.rows.first().map_or(0, |r| r.p_inv_exact.len());
    let mut header: Vec<String> = [
        "t",
        "ordering",
        "norm_u1",
        "norm_u2",
        "fidelity_u1",
        "fidelity_u2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in 1..=n {
        for kind in ["exact", "u1", "u2"] {
            header.push(format!("p_inv_{k}_{kind}"));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    let f = |v: f64| format_significant(v, 12);
    for row in &report.rows {
        let ordering: Vec<String> = row.ordering.iter().map(|k| k.to_string()).collect();
        let mut rec = vec![
            f(row.t),
            ordering.join(" "),
            f(row.norm_u1),
            f(row.norm_u2),
            f(row.fidelity_u1),
            f(row.fidelity_u2),
        ];
        for k in 0..n {
            rec.extend([
                f(row.p_inv_exact[k]),
                f(row.p_inv_u1[k]),
                f(row.p_inv_u2[k]),
            ]);
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join("propagators.csv");
    std::fs::write(&path, body)?;
    Ok(path)
}
