//! GPS-disciplined clock model.
//!
//! Bob's local time is `true_time + offset(true_time)`. The offset drifts at
//! a rate that performs a reflected random walk inside
//! `±drift_bound_ps_per_epoch / epoch_s`, which bounds the offset change over
//! any window of `epoch_s` seconds by `drift_bound_ps_per_epoch`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const PS_PER_S: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockModel {
    pub initial_offset_ps: i64,
    /// Maximum offset change over one `epoch_s` window.
    pub drift_bound_ps_per_epoch: f64,
    pub epoch_s: f64,
    /// Drift rate at t = 0, in ps per second.
    pub initial_rate_ps_per_s: f64,
    /// Diffusion of the drift rate, in (ps/s) per √s.
    pub rate_walk_sigma: f64,
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel {
            initial_offset_ps: 0,
            drift_bound_ps_per_epoch: 5000.0,
            epoch_s: 990.0,
            initial_rate_ps_per_s: 0.0,
            rate_walk_sigma: 0.1,
        }
    }
}

impl ClockModel {
    /// A perfect clock with a fixed offset.
    pub fn fixed(offset_ps: i64) -> Self {
        ClockModel {
            initial_offset_ps: offset_ps,
            initial_rate_ps_per_s: 0.0,
            rate_walk_sigma: 0.0,
            ..ClockModel::default()
        }
    }

    /// Drift pinned at the positive rate bound for the whole run.
    pub fn at_drift_bound() -> Self {
        let base = ClockModel::default();
        ClockModel {
            initial_rate_ps_per_s: base.max_rate_ps_per_s(),
            rate_walk_sigma: 0.0,
            ..base
        }
    }

    pub fn max_rate_ps_per_s(&self) -> f64 {
        self.drift_bound_ps_per_epoch / self.epoch_s
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.drift_bound_ps_per_epoch >= 0.0 && self.epoch_s > 0.0 && self.rate_walk_sigma >= 0.0) {
            return Err("clock model needs non-negative drift bound and walk sigma, positive epoch".into());
        }
        if self.initial_rate_ps_per_s.abs() > self.max_rate_ps_per_s() + 1e-12 {
            return Err("initial drift rate exceeds the drift bound".into());
        }
        Ok(())
    }

    /// Samples an offset trajectory on a one-second grid covering `[0, duration_s]`.
    pub fn trajectory<R: Rng + ?Sized>(&self, duration_s: f64, rng: &mut R) -> ClockTrajectory {
        let step_s = 1.0;
        let n = (duration_s / step_s).ceil().max(1.0) as usize + 1;
        let r_max = self.max_rate_ps_per_s();
        let mut rate = self.initial_rate_ps_per_s.clamp(-r_max, r_max);
        let mut offset = self.initial_offset_ps as f64;
        let mut offsets = Vec::with_capacity(n);
        offsets.push(offset);
        for _ in 1..n {
            let next_rate = if self.rate_walk_sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                reflect(rate + self.rate_walk_sigma * step_s.sqrt() * z, r_max)
            } else {
                rate
            };
            // trapezoid keeps the per-window change within the bound
            offset += 0.5 * (rate + next_rate) * step_s;
            rate = next_rate;
            offsets.push(offset);
        }
        ClockTrajectory {
            step_ps: (step_s * PS_PER_S) as i64,
            offsets,
        }
    }
}

fn reflect(mut x: f64, bound: f64) -> f64 {
    if bound <= 0.0 {
        return 0.0;
    }
    // fold into [-bound, bound]
    let period = 4.0 * bound;
    x = (x + bound).rem_euclid(period);
    if x > 2.0 * bound {
        x = period - x;
    }
    x - bound
}

/// Sampled clock offset, linearly interpolated between grid points and held
/// constant past the end.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockTrajectory {
    step_ps: i64,
    offsets: Vec<f64>,
}

impl ClockTrajectory {
    pub fn constant(offset_ps: f64) -> Self {
        ClockTrajectory {
            step_ps: 1_000_000_000_000,
            offsets: vec![offset_ps],
        }
    }

    pub fn offset_at(&self, t_ps: i64) -> f64 {
        if t_ps <= 0 {
            return self.offsets[0];
        }
        let idx = (t_ps / self.step_ps) as usize;
        if idx + 1 >= self.offsets.len() {
            return *self.offsets.last().unwrap();
        }
        let frac = (t_ps % self.step_ps) as f64 / self.step_ps as f64;
        self.offsets[idx] + frac * (self.offsets[idx + 1] - self.offsets[idx])
    }

    /// True time to Bob-local time.
    pub fn to_local(&self, true_ps: i64) -> i64 {
        true_ps + self.offset_at(true_ps).round() as i64
    }

    pub fn samples(&self) -> &[f64] {
        &self.offsets
    }

    pub fn step_ps(&self) -> i64 {
        self.step_ps
    }
}
