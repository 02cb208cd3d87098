//! Stochastic quantum-link attenuation.
//!
//! The default model is an Ornstein-Uhlenbeck process around the mean loss
//! with stationary standard deviation `amplitude / 2`, read out clipped to
//! `mean ± amplitude`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{LossFluctuation, LossModel};

/// Sampled loss in dB on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTrajectory {
    mean_db: f64,
    lo_db: f64,
    hi_db: f64,
    step_s: f64,
    /// Unclipped process values.
    samples: Vec<f64>,
}

/// Grid spacing as a fraction of the correlation time.
const STEPS_PER_CORRELATION_TIME: f64 = 20.0;
const MAX_STEP_S: f64 = 1.0;

impl LossTrajectory {
    pub fn constant(mean_db: f64) -> Self {
        LossTrajectory {
            mean_db,
            lo_db: mean_db,
            hi_db: mean_db,
            step_s: f64::INFINITY,
            samples: vec![mean_db],
        }
    }

    pub fn generate<R: Rng + ?Sized>(mean_db: f64, fl: &LossFluctuation, duration_s: f64, rng: &mut R) -> Self {
        if fl.model == LossModel::Constant || fl.amplitude_db == 0.0 {
            return LossTrajectory::constant(mean_db);
        }
        let tau = fl.correlation_time_s;
        let step_s = (tau / STEPS_PER_CORRELATION_TIME).min(MAX_STEP_S);
        let n = (duration_s / step_s).ceil() as usize + 2;
        let sigma = fl.amplitude_db / 2.0;
        let decay = (-step_s / tau).exp();
        let kick = sigma * (1.0 - decay * decay).sqrt();
        let mut x = mean_db + sigma * rng.sample::<f64, _>(StandardNormal);
        let mut samples = Vec::with_capacity(n);
        samples.push(x);
        for _ in 1..n {
            let z: f64 = rng.sample(StandardNormal);
            x = mean_db + (x - mean_db) * decay + kick * z;
            samples.push(x);
        }
        LossTrajectory {
            mean_db,
            lo_db: mean_db - fl.amplitude_db,
            hi_db: mean_db + fl.amplitude_db,
            step_s,
            samples,
        }
    }

    /// Clipped loss at time `t_s`, linearly interpolated.
    pub fn loss_db(&self, t_s: f64) -> f64 {
        if self.samples.len() == 1 {
            return self.mean_db;
        }
        let pos = (t_s / self.step_s).max(0.0);
        let i = pos.floor() as usize;
        let raw = if i + 1 >= self.samples.len() {
            *self.samples.last().unwrap()
        } else {
            let f = pos - i as f64;
            self.samples[i] + f * (self.samples[i + 1] - self.samples[i])
        };
        raw.clamp(self.lo_db, self.hi_db)
    }

    /// Smallest loss the trajectory can return.
    pub fn min_loss_db(&self) -> f64 {
        self.lo_db
    }

    pub fn step_s(&self) -> f64 {
        self.step_s
    }

    /// Clipped grid values.
    pub fn clipped_samples(&self) -> Vec<f64> {
        self.samples.iter().map(|x| x.clamp(self.lo_db, self.hi_db)).collect()
    }
}

/// Mean of `f(clip(x))` for `x ~ N(mean, (amplitude/2)²)`, by Simpson's rule.
pub fn stationary_mean<F: Fn(f64) -> f64>(mean_db: f64, fl: &LossFluctuation, f: F) -> f64 {
    if fl.model == LossModel::Constant || fl.amplitude_db == 0.0 {
        return f(mean_db);
    }
    let sigma = fl.amplitude_db / 2.0;
    let (lo, hi) = (mean_db - fl.amplitude_db, mean_db + fl.amplitude_db);
    let n = 4000usize;
    let a = mean_db - 10.0 * sigma;
    let h = 20.0 * sigma / n as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut acc = 0.0;
    for k in 0..=n {
        let x = a + k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let pdf = norm * (-0.5 * ((x - mean_db) / sigma).powi(2)).exp();
        acc += w * pdf * f(x.clamp(lo, hi));
    }
    acc * h / 3.0
}
