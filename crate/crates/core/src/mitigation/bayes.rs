//! Conjugate posteriors for binomial and multinomial counts and posterior
//! predictive resampling.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim;
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPosterior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::input(format!(
                "beta parameters ({alpha}, {beta}) must be positive"
            )));
        }
        Ok(BetaPosterior { alpha, beta })
    }

    pub fn uniform() -> Self {
        BetaPosterior {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Beta::new(self.alpha, self.beta)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// `(α₀ + m, β₀ + M − m)` after `m` successes in `trials`.
pub fn beta_update(prior: &BetaPosterior, m: u64, trials: u64) -> Result<BetaPosterior> {
    if m > trials {
        return Err(Error::input(format!(
            "{m} successes out of {trials} trials"
        )));
    }
    BetaPosterior::new(prior.alpha + m as f64, prior.beta + (trials - m) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    pub concentration: Vec<f64>,
}

impl DirichletPosterior {
    pub fn new(concentration: Vec<f64>) -> Result<Self> {
        if concentration.len() < 2 {
            return Err(Error::input("a Dirichlet needs at least two categories"));
        }
        if concentration.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::input("Dirichlet concentrations must be positive"));
        }
        Ok(DirichletPosterior { concentration })
    }

    pub fn uniform(categories: usize) -> Result<Self> {
        Self::new(vec![1.0; categories])
    }

    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.concentration.iter().sum();
        self.concentration.iter().map(|a| a / total).collect()
    }

    /// Normalized Gamma variates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let draws: Vec<f64> = self
            .concentration
            .iter()
            .map(|&a| {
                Gamma::new(a, 1.0)
                    .expect("validated parameters")
                    .sample(rng)
            })
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            draws.into_iter().map(|g| g / total).collect()
        } else {
            // every shape underflowed; fall back to the largest concentration
            let k = self
                .concentration
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            (0..draws.len())
                .map(|i| if i == k { 1.0 } else { 0.0 })
                .collect()
        }
    }
}

pub fn dirichlet_update(prior: &DirichletPosterior, counts: &[u64]) -> Result<DirichletPosterior> {
    if counts.len() != prior.concentration.len() {
        return Err(Error::input(format!(
            "{} counts for {} categories",
            counts.len(),
            prior.concentration.len()
        )));
    }
    DirichletPosterior::new(
        prior
            .concentration
            .iter()
            .zip(counts)
            .map(|(a, &c)| a + c as f64)
            .collect(),
    )
}

/// A posterior over category probabilities.
pub trait PredictivePosterior {
    fn categories(&self) -> usize;
    fn sample_probabilities(&self, rng: &mut SimRng) -> Vec<f64>;
}

impl PredictivePosterior for BetaPosterior {
    fn categories(&self) -> usize {
        2
    }

    /// Category 0 is the success outcome.
    fn sample_probabilities(&self, rng: &mut SimRng) -> Vec<f64> {
        let p = self.sample(rng);
        vec![p, 1.0 - p]
    }
}

impl PredictivePosterior for DirichletPosterior {
    fn categories(&self) -> usize {
        self.concentration.len()
    }

    fn sample_probabilities(&self, rng: &mut SimRng) -> Vec<f64> {
        self.sample(rng)
    }
}

/// One replicated count vector: parameters from the posterior, then counts
/// from the likelihood at those parameters.
pub fn predictive_draw<P: PredictivePosterior + ?Sized>(
    posterior: &P,
    trials: u64,
    rng: &mut SimRng,
) -> Vec<u64> {
    let p = posterior.sample_probabilities(rng);
    qsim::multinomial(&p, trials, rng)
}

/// `replicas` posterior-predictive count vectors of `trials` trials each.
pub fn sample_predictive<P: PredictivePosterior + ?Sized>(
    posterior: &P,
    trials: u64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<u64>>> {
    if replicas == 0 {
        return Err(Error::input("need at least one replica"));
    }
    let mut rng = rng::rng_from_seed(seed);
    Ok((0..replicas)
        .map(|_| predictive_draw(posterior, trials, &mut rng))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_updates() {
        let u = BetaPosterior::uniform();
        assert_eq!(beta_update(&u, 0, 0).unwrap(), u);
        assert_eq!(
            beta_update(&u, 3, 10).unwrap(),
            BetaPosterior {
                alpha: 4.0,
                beta: 8.0
            }
        );
        assert!(beta_update(&u, 11, 10).is_err());
        let big = beta_update(&u, 300_000, 1_000_000).unwrap();
        assert!((big.mean() - 0.3).abs() < 1e-5);
        assert!(BetaPosterior::new(0.0, 1.0).is_err());
    }

    #[test]
    fn dirichlet_updates() {
        let u = DirichletPosterior::uniform(4).unwrap();
        assert_eq!(
            dirichlet_update(&u, &[5, 0, 2, 1]).unwrap().concentration,
            vec![6.0, 1.0, 3.0, 2.0]
        );
        assert_eq!(dirichlet_update(&u, &[0; 4]).unwrap(), u);
        let big = dirichlet_update(&u, &[100_000, 200_000, 300_000, 400_000]).unwrap();
        for (m, f) in big.mean().iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((m - f).abs() < 1e-5);
        }
        assert!(dirichlet_update(&u, &[1, 2]).is_err());
    }

    #[test]
    fn degenerate_posterior() {
        let post = BetaPosterior::new(1e9, 1e-9).unwrap();
        let reps = sample_predictive(&post, 50, 20, 1).unwrap();
        assert!(reps.iter().all(|r| r == &vec![50, 0]));
    }

    #[test]
    fn reproducible_and_overdispersed() {
        let post = beta_update(&BetaPosterior::uniform(), 30, 100).unwrap();
        let a = sample_predictive(&post, 100, 2000, 9).unwrap();
        assert_eq!(a, sample_predictive(&post, 100, 2000, 9).unwrap());
        let xs: Vec<f64> = a.iter().map(|r| r[0] as f64).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let p = post.mean();
        assert!(var > 100.0 * p * (1.0 - p));
    }

    #[test]
    fn dirichlet_samples_are_distributions() {
        let post = DirichletPosterior::new(vec![0.5, 2.0, 7.0]).unwrap();
        let mut rng = rng::rng_from_seed(3);
        for _ in 0..100 {
            let p = post.sample(&mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|x| *x >= 0.0));
        }
    }
}
