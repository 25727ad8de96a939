//! CSV and JSON emission of result bundles.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::{CircuitInfo, ResultsBundle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

/// Decimal rendering with `digits` significant digits, switching to
/// exponent form for very large or small magnitudes.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value.is_nan() {
        return "nan".into();
    }
    if value.is_infinite() {
        return if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if value == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{value:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt(v: f64) -> String {
    format_significant(v, 12)
}

/// Run metadata written next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub circuits: Vec<CircuitInfo>,
    pub files: Vec<String>,
}

/// One CSV per observable with columns `t, r_or_tag, mean, ci_low,
/// ci_high`, plus `manifest.json`; or a single `bundle.json`.
pub fn emit_series(
    bundle: &ResultsBundle,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let write = |name: &str, body: &[u8]| -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, body)
            .map_err(|e| Error::from(e).context(format!("writing {}", path.display())))?;
        Ok(path)
    };
    match format {
        OutputFormat::Json => Ok(vec![write("bundle.json", to_json(bundle)?.as_bytes())?]),
        OutputFormat::Csv => {
            let mut grouped: BTreeMap<&str, Vec<_>> = BTreeMap::new();
            for s in &bundle.series {
                grouped.entry(s.name.as_str()).or_default().push(s);
            }
            let mut paths = Vec::with_capacity(grouped.len() + 1);
            for (name, series) in &grouped {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["t", "r_or_tag", "mean", "ci_low", "ci_high"])
                    .map_err(csv_error)?;
                for s in series {
                    let label = s.label();
                    for (t, e) in s.times.iter().zip(&s.estimates) {
                        let (mean, lo, hi) =
                            e.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |e| {
                                (e.mean, e.ci_low, e.ci_high)
                            });
                        w.write_record([fmt(*t), label.clone(), fmt(mean), fmt(lo), fmt(hi)])
                            .map_err(csv_error)?;
                    }
                }
                let body = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
                paths.push(write(&format!("{name}.csv"), &body)?);
            }
            let manifest = Manifest {
                config_hash: bundle.config_hash.clone(),
                seed: bundle.seed,
                version: bundle.version.clone(),
                circuits: bundle.circuits.clone(),
                files: grouped.keys().map(|n| format!("{n}.csv")).collect(),
            };
            paths.push(write(
                "manifest.json",
                serde_json::to_string_pretty(&manifest)?.as_bytes(),
            )?);
            Ok(paths)
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn to_json(bundle: &ResultsBundle) -> Result<String> {
    Ok(serde_json::to_string_pretty(bundle)?)
}

pub fn from_json(text: &str) -> Result<ResultsBundle> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_bundle(path: &Path) -> Result<ResultsBundle> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(1.0, 12), "1");
        assert_eq!(format_significant(0.5, 12), "0.5");
        assert_eq!(format_significant(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_significant(-2.0 / 3.0, 12), "-0.666666666667");
        assert_eq!(format_significant(123456.7890123456, 12), "123456.789012");
        assert_eq!(format_significant(1.5e-9, 12), "1.5e-9");
        assert_eq!(format_significant(f64::NAN, 12), "nan");
        assert_eq!(format_significant(9.9999999999999e-1, 12), "1");
    }
}
