//! Ensemble summaries: mean and central 68% interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper quantiles of the central 68% interval.
pub const CI_QUANTILES: (f64, f64) = (0.16, 0.84);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EnsembleEstimate {
    /// Half the interval width.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    /// Applies `f` to every sample and summarizes the result.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<EnsembleEstimate> {
        ensemble_statistics(self.samples.iter().map(|&x| f(x)).collect())
    }
}

/// Linear interpolation between order statistics of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn ensemble_statistics(samples: Vec<f64>) -> Result<EnsembleEstimate> {
    if samples.len() < 2 {
        return Err(Error::input(format!(
            "{} samples give no confidence interval",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("ensemble contains non-finite samples"));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let ci_low = quantile(&sorted, CI_QUANTILES.0).min(mean);
    let ci_high = quantile(&sorted, CI_QUANTILES.1).max(mean);
    Ok(EnsembleEstimate {
        samples,
        mean,
        ci_low,
        ci_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_samples_have_zero_width() {
        let e = ensemble_statistics(vec![0.25; 10]).unwrap();
        assert_eq!((e.mean, e.ci_low, e.ci_high), (0.25, 0.25, 0.25));
    }

    #[test]
    fn mean_is_arithmetic_mean() {
        let e = ensemble_statistics(vec![1.0, 2.0, 6.0]).unwrap();
        assert_eq!(e.mean, 3.0);
    }

    #[test]
    fn standard_normal_interval() {
        let mut r = rng::rng_from_seed(4);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| StandardNormal.sample(&mut r))
            .collect();
        let e = ensemble_statistics(xs).unwrap();
        assert!((e.ci_low + 1.0).abs() < 0.05 && (e.ci_high - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_sample_rejected() {
        assert!(ensemble_statistics(vec![1.0]).is_err());
    }

    #[test]
    fn interval_brackets_mean_for_skewed_data() {
        let mut xs = vec![0.0; 99];
        xs.push(1000.0);
        let e = ensemble_statistics(xs).unwrap();
        assert!(e.ci_low <= e.mean && e.mean <= e.ci_high);
    }
}
