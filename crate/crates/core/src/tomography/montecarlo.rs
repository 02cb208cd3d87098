//! Poissonian Monte Carlo error bars.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{by_basis, mle_reconstruct, state_fidelity, CountRecord, TomoError};
use crate::qcore::Ket;
use crate::rng::{stream, Domain};

pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub sigma: f64,
    pub n_resamples: usize,
}

fn poisson<R: Rng + ?Sized>(mean: u64, rng: &mut R) -> u64 {
    if mean == 0 {
        return 0;
    }
    Poisson::new(mean as f64).expect("positive mean").sample(rng) as u64
}

/// Sample standard deviation with the `n − 1` normalization.
fn sample_sigma(xs: &[f64]) -> f64 {
    if xs.len() <= 1 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Resamples every count as an independent Poisson variate and reruns the MLE.
///
/// Resample `r` draws from stream `(seed, MonteCarlo, r)`. A resample that
/// empties a basis is redrawn from the same stream.
pub fn monte_carlo_sigma(
    counts: &[CountRecord],
    ideal: &Ket,
    n_resamples: usize,
    seed: u64,
) -> Result<FidelityEstimate, TomoError> {
    let base = by_basis(counts)?;
    let value = state_fidelity(&mle_reconstruct(&base)?.rho, ideal)?;
    let samples = (0..n_resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Domain::MonteCarlo, r);
            let resampled = base.map(|c| loop {
                let (a, b) = (poisson(c.n_first, &mut rng), poisson(c.n_second, &mut rng));
                if a + b > 0 {
                    break CountRecord::new(c.basis, a, b);
                }
            });
            state_fidelity(&mle_reconstruct(&resampled)?.rho, ideal)
        })
        .collect::<Result<Vec<f64>, TomoError>>()?;
    Ok(FidelityEstimate {
        value,
        sigma: sample_sigma(&samples),
        n_resamples,
    })
}

/// Fidelity as the fraction of first-outcome counts in the eigenbasis of the
/// ideal state, with a Poisson-resampled uncertainty.
pub fn binomial_fidelity(n_first: u64, n_second: u64, n_resamples: usize, seed: u64) -> FidelityEstimate {
    let total = n_first + n_second;
    let value = if total == 0 { 0.0 } else { n_first as f64 / total as f64 };
    let samples: Vec<f64> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Domain::MonteCarlo, r);
            loop {
                let (a, b) = (poisson(n_first, &mut rng), poisson(n_second, &mut rng));
                if a + b > 0 || total == 0 {
                    break if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
                }
            }
        })
        .collect();
    FidelityEstimate {
        value,
        sigma: sample_sigma(&samples),
        n_resamples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::MeasurementBasis;
    use crate::qcore::{DensityMatrix, PolarizationLabel};

    fn noisy_p_counts(scale: u64) -> Vec<CountRecord> {
        let p = PolarizationLabel::P.ket().projector();
        let rho = p.mix(&DensityMatrix::maximally_mixed(2), 0.28).unwrap();
        MeasurementBasis::ALL.iter().map(|&b| CountRecord::exact(&rho, b, 50 * scale)).collect()
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let c = noisy_p_counts(1);
        let ket = PolarizationLabel::P.ket();
        let a = monte_carlo_sigma(&c, &ket, 200, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| monte_carlo_sigma(&c, &ket, 200, 9).unwrap());
        assert_eq!(a, b);
        assert_ne!(a.sigma, monte_carlo_sigma(&c, &ket, 200, 10).unwrap().sigma);
    }

    #[test]
    fn single_resample_has_zero_sigma() {
        let r = monte_carlo_sigma(&noisy_p_counts(1), &PolarizationLabel::P.ket(), 1, 0).unwrap();
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.n_resamples, 1);
        assert_eq!(binomial_fidelity(30, 10, 1, 0).sigma, 0.0);
    }

    #[test]
    fn sigma_scales_as_inverse_root_counts() {
        let ket = PolarizationLabel::P.ket();
        let small = monte_carlo_sigma(&noisy_p_counts(1), &ket, 1000, 1).unwrap();
        let large = monte_carlo_sigma(&noisy_p_counts(100), &ket, 1000, 1).unwrap();
        let ratio = small.sigma / large.sigma;
        assert!((7.0..14.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn binomial_sigma_matches_closed_form() {
        let est = binomial_fidelity(380, 120, 4000, 2);
        let f: f64 = 0.76;
        let expected = (f * (1.0 - f) / 500.0).sqrt();
        assert!((est.value - f).abs() < 1e-12);
        assert!((est.sigma / expected - 1.0).abs() < 0.05, "{} vs {expected}", est.sigma);
    }
}
