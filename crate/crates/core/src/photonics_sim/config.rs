use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{MeasurementBasis, NoiseParams};
use crate::qcore::PolarizationLabel;
use crate::timesync::ClockModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parameter {name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("{source_name} source: pair probabilities sum to {total} > 1")]
    PairProbabilities { source_name: &'static str, total: f64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossModel {
    Constant,
    OrnsteinUhlenbeck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossFluctuation {
    pub model: LossModel,
    /// Half-width of the clipping band around the mean loss.
    pub amplitude_db: f64,
    pub correlation_time_s: f64,
}

impl Default for LossFluctuation {
    fn default() -> Self {
        LossFluctuation {
            model: LossModel::OrnsteinUhlenbeck,
            amplitude_db: 5.45,
            correlation_time_s: 60.0,
        }
    }
}

/// How much of the hidden event history to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthDetail {
    /// Events with an Alice three-fold record or a heralded-pair photon 3.
    #[default]
    Heralded,
    /// Every generated photon, including unheralded singles.
    All,
}

/// Full parameter set of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub pump_rep_rate_hz: f64,
    pub pair_prob_epr: f64,
    pub pair_prob_hsp: f64,
    /// Probability per pulse that a source emits two pairs.
    pub double_pair_prob: f64,
    pub detector_efficiency: f64,
    pub quantum_link_loss_db: f64,
    pub loss_fluctuation: LossFluctuation,
    /// Loss removed from the quantum link; Bob's dark and background rates
    /// are multiplied by the same factor so signal-to-noise is unchanged.
    pub desk_scale_db: f64,
    pub classical_link_efficiency: f64,
    pub dark_rate_intrinsic_hz: f64,
    pub background_rate_hz: f64,
    pub jitter_sigma_ps: f64,
    pub fiber_delay_ns: f64,
    pub propagation_delay_us: f64,
    /// Span allowed for Alice's trigger + BSM three-fold record.
    pub coincidence_window_ns: f64,
    pub feedforward_enabled: bool,
    pub eom_gate_width_ns: f64,
    /// Delay between the pump pulse and the classical pulse leaving Alice.
    pub feedforward_latency_ns: f64,
    /// Fraction of Alice detector-`a` singles written out for clock sync.
    pub sync_prescale: f64,
    pub noise: NoiseParams,
    pub clock: ClockModel,
    pub input_label: PolarizationLabel,
    pub analysis_basis: MeasurementBasis,
    pub duration_s: f64,
    pub seed: u64,
    pub truth_detail: TruthDetail,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pump_rep_rate_hz: 8e7,
            pair_prob_epr: 0.0194,
            pair_prob_hsp: 0.025,
            double_pair_prob: 4.9e-4,
            detector_efficiency: 0.3,
            quantum_link_loss_db: 33.55,
            loss_fluctuation: LossFluctuation::default(),
            desk_scale_db: 0.0,
            classical_link_efficiency: 0.213,
            dark_rate_intrinsic_hz: 15.0,
            background_rate_hz: 100.0,
            jitter_sigma_ps: 420.0,
            fiber_delay_ns: 500.0,
            propagation_delay_us: 477.0,
            coincidence_window_ns: 3.0,
            feedforward_enabled: false,
            eom_gate_width_ns: 10.0,
            feedforward_latency_ns: 100.0,
            sync_prescale: 0.01,
            noise: NoiseParams::default(),
            clock: ClockModel::default(),
            input_label: PolarizationLabel::P,
            analysis_basis: MeasurementBasis::PM,
            duration_s: 1.0,
            seed: 0,
            truth_detail: TruthDetail::Heralded,
        }
    }
}

fn check_prob(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { name, value })
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { name, value })
    }
}

fn check_pos(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { name, value })
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_pos("pump_rep_rate_hz", self.pump_rep_rate_hz)?;
        check_prob("pair_prob_epr", self.pair_prob_epr)?;
        check_prob("pair_prob_hsp", self.pair_prob_hsp)?;
        check_prob("double_pair_prob", self.double_pair_prob)?;
        for (source_name, p) in [("EPR", self.pair_prob_epr), ("HSP", self.pair_prob_hsp)] {
            let total = p + self.double_pair_prob;
            if total > 1.0 {
                return Err(ConfigError::PairProbabilities { source_name, total });
            }
        }
        check_prob("detector_efficiency", self.detector_efficiency)?;
        check_prob("classical_link_efficiency", self.classical_link_efficiency)?;
        check_prob("sync_prescale", self.sync_prescale)?;
        check_nonneg("quantum_link_loss_db", self.quantum_link_loss_db)?;
        check_nonneg("loss_fluctuation.amplitude_db", self.loss_fluctuation.amplitude_db)?;
        check_pos("loss_fluctuation.correlation_time_s", self.loss_fluctuation.correlation_time_s)?;
        check_nonneg("desk_scale_db", self.desk_scale_db)?;
        check_nonneg("dark_rate_intrinsic_hz", self.dark_rate_intrinsic_hz)?;
        check_nonneg("background_rate_hz", self.background_rate_hz)?;
        check_nonneg("jitter_sigma_ps", self.jitter_sigma_ps)?;
        check_pos("fiber_delay_ns", self.fiber_delay_ns)?;
        check_pos("propagation_delay_us", self.propagation_delay_us)?;
        check_pos("coincidence_window_ns", self.coincidence_window_ns)?;
        check_pos("eom_gate_width_ns", self.eom_gate_width_ns)?;
        check_nonneg("feedforward_latency_ns", self.feedforward_latency_ns)?;
        check_pos("duration_s", self.duration_s)?;
        if 1e12 / self.pump_rep_rate_hz < 1.0 {
            return Err(ConfigError::Invalid("pump period below 1 ps".into()));
        }
        self.noise
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.clock.validate().map_err(ConfigError::Invalid)?;
        if (self.clock.initial_offset_ps.unsigned_abs() as f64) >= 0.5 * self.photon3_latency_ps() as f64 {
            return Err(ConfigError::Invalid(
                "clock offset must be smaller than half the photon-3 latency".into(),
            ));
        }
        Ok(())
    }

    pub fn pulse_period_ps(&self) -> u64 {
        (1e12 / self.pump_rep_rate_hz).round() as u64
    }

    pub fn n_pulses(&self) -> u64 {
        (self.duration_s * self.pump_rep_rate_hz).floor() as u64
    }

    /// Pump pulse to photon-3 arrival at Bob, in true time.
    pub fn photon3_latency_ps(&self) -> i64 {
        (self.fiber_delay_ns * 1e3 + self.propagation_delay_us * 1e6).round() as i64
    }

    /// Pump pulse to feed-forward pulse arrival at Bob, in true time.
    pub fn feedforward_arrival_ps(&self) -> i64 {
        (self.feedforward_latency_ns * 1e3 + self.propagation_delay_us * 1e6).round() as i64
    }

    /// Expected separation between a feed-forward tag and its photon 3.
    pub fn eom_gate_delay_ps(&self) -> i64 {
        self.photon3_latency_ps() - self.feedforward_arrival_ps()
    }

    pub fn desk_factor(&self) -> f64 {
        10f64.powf(self.desk_scale_db / 10.0)
    }

    /// Quantum-link transmission for a given physical loss.
    pub fn transmission(&self, loss_db: f64) -> f64 {
        10f64.powf(-(loss_db - self.desk_scale_db) / 10.0).min(1.0)
    }

    /// Lower and upper edge of the loss band.
    pub fn loss_band(&self) -> (f64, f64) {
        let a = match self.loss_fluctuation.model {
            LossModel::Constant => 0.0,
            LossModel::OrnsteinUhlenbeck => self.loss_fluctuation.amplitude_db,
        };
        ((self.quantum_link_loss_db - a).max(0.0), self.quantum_link_loss_db + a)
    }

    /// Per-detector Bob noise rate in the scaled simulation.
    pub fn bob_noise_rate_hz(&self) -> f64 {
        (self.dark_rate_intrinsic_hz + self.background_rate_hz) * self.desk_factor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        assert_eq!(SimConfig::default().pulse_period_ps(), 12_500);
    }

    #[test]
    fn pair_probabilities_above_one_rejected() {
        let c = SimConfig {
            pair_prob_epr: 0.8,
            double_pair_prob: 0.3,
            ..SimConfig::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::PairProbabilities { .. })));
    }

    #[test]
    fn decibel_definition() {
        let c = SimConfig::default();
        let ratio = c.transmission(30.0) / c.transmission(0.0);
        assert!((ratio - 1e-3).abs() < 1e-15);
        let desk = SimConfig {
            desk_scale_db: 20.0,
            ..c
        };
        assert!((desk.transmission(33.0) - c.transmission(13.0)).abs() < 1e-15);
        assert_eq!(desk.transmission(5.0), 1.0);
        assert!((desk.bob_noise_rate_hz() - 11_500.0).abs() < 1e-6);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<SimConfig, _> = serde_json::from_str(r#"{"duration_s": 2.0, "bogus": 1}"#);
        assert!(r.is_err());
        let ok: SimConfig = serde_json::from_str(r#"{"duration_s": 2.0}"#).unwrap();
        assert_eq!(ok.duration_s, 2.0);
    }
}
