//! Scenario files: simulation parameters, analysis settings and the
//! schedule of (input state, analysis basis, duration) runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use teleport_core::photonics_sim::SimConfig;
use teleport_core::protocol::MeasurementBasis;
use teleport_core::qcore::PolarizationLabel;
use teleport_core::rng::derive_seed;
use teleport_core::timesync::xcorr::{MAX_RESYNC_S, MIN_RESYNC_S};
use teleport_core::timesync::SyncParams;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Which Bell outcome is analysed and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisMode {
    /// Ψ⁻ four-folds, full state tomography per input, process matrix.
    #[default]
    StateTomography,
    /// Ψ⁺ four-folds inside a feed-forward gate, eigenbasis counts only.
    Feedforward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub mode: AnalysisMode,
    pub window_ns: f64,
    pub resync_s: f64,
    pub sync_bin_ps: i64,
    pub sync_search_range_ps: i64,
    pub sync_threshold_sigma: f64,
    pub sync_min_peak_counts: u64,
    pub mc_resamples: usize,
    pub cp_project: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let sync = SyncParams::default();
        AnalysisConfig {
            mode: AnalysisMode::StateTomography,
            window_ns: 3.0,
            resync_s: 180.0,
            sync_bin_ps: sync.bin_ps,
            sync_search_range_ps: sync.search_range_ps,
            sync_threshold_sigma: sync.threshold_sigma,
            sync_min_peak_counts: sync.min_peak_counts,
            mc_resamples: 1000,
            cp_project: false,
        }
    }
}

impl AnalysisConfig {
    pub fn window_ps(&self) -> i64 {
        (self.window_ns * 1e3).round() as i64
    }
}

/// One schedule entry; expands to one run per basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub input: PolarizationLabel,
    pub bases: Vec<MeasurementBasis>,
    /// Simulated time per basis.
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub schedule: Vec<ScheduleEntry>,
}

/// A single simulated run of the expanded schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub index: usize,
    pub input: PolarizationLabel,
    pub basis: MeasurementBasis,
    pub duration_s: f64,
    pub seed: u64,
}

impl RunSpec {
    /// File stem shared by all artifacts of this run.
    pub fn stem(&self) -> String {
        format!("run{:02}_{}_{}", self.index, self.input, self.basis)
    }
}

/// Offset separating Monte Carlo seeds from run seeds.
const MC_SEED_BASE: u64 = 1 << 32;

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.schedule.is_empty() {
            return bad("schedule is empty".into());
        }
        let a = &self.analysis;
        if !(a.window_ns > 0.0) || a.sync_bin_ps <= 0 || a.sync_search_range_ps <= 0 {
            return bad("analysis window and sync bins must be positive".into());
        }
        if !(MIN_RESYNC_S..=MAX_RESYNC_S).contains(&a.resync_s) {
            return bad(format!(
                "resync_s = {} is outside [{MIN_RESYNC_S}, {MAX_RESYNC_S}] s",
                a.resync_s
            ));
        }
        let mut bases: BTreeMap<PolarizationLabel, BTreeSet<MeasurementBasis>> = BTreeMap::new();
        for e in &self.schedule {
            if !(e.duration_s > 0.0) {
                return bad(format!("schedule entry for {} has non-positive duration", e.input));
            }
            if e.bases.is_empty() {
                return bad(format!("schedule entry for {} lists no bases", e.input));
            }
            bases.entry(e.input).or_default().extend(e.bases.iter().copied());
        }
        match a.mode {
            AnalysisMode::StateTomography => {
                for (input, b) in &bases {
                    if b.len() != 3 {
                        return bad(format!("state tomography of {input} needs all three bases"));
                    }
                }
            }
            AnalysisMode::Feedforward => {
                if !self.sim.feedforward_enabled {
                    return bad("feed-forward analysis needs sim.feedforward_enabled = true".into());
                }
                for (input, b) in &bases {
                    let (eigen, _) = MeasurementBasis::eigenbasis_of(*input);
                    if b.iter().any(|&x| x != eigen) {
                        return bad(format!("feed-forward analysis of {input} is done in the {eigen} basis only"));
                    }
                }
            }
        }
        Ok(())
    }

    /// The schedule expanded into runs, each with its own derived seed.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for e in &self.schedule {
            for &basis in &e.bases {
                let index = out.len();
                out.push(RunSpec {
                    index,
                    input: e.input,
                    basis,
                    duration_s: e.duration_s,
                    seed: derive_seed(self.sim.seed, index as u64),
                });
            }
        }
        out
    }

    /// Inputs in first-scheduled order.
    pub fn inputs(&self) -> Vec<PolarizationLabel> {
        let mut seen = Vec::new();
        for e in &self.schedule {
            if !seen.contains(&e.input) {
                seen.push(e.input);
            }
        }
        seen
    }

    pub fn run_config(&self, run: &RunSpec) -> SimConfig {
        SimConfig {
            input_label: run.input,
            analysis_basis: run.basis,
            duration_s: run.duration_s,
            seed: run.seed,
            ..self.sim.clone()
        }
    }

    pub fn mc_seed(&self, input_index: usize) -> u64 {
        derive_seed(self.sim.seed, MC_SEED_BASE + input_index as u64)
    }

    pub fn sync_params(&self) -> SyncParams {
        let a = &self.analysis;
        SyncParams {
            bin_ps: a.sync_bin_ps,
            search_range_ps: a.sync_search_range_ps,
            prior_offset_ps: self.sim.clock.initial_offset_ps,
            latency_ps: self.sim.photon3_latency_ps(),
            threshold_sigma: a.sync_threshold_sigma,
            min_peak_counts: a.sync_min_peak_counts,
        }
    }
}

/// Pinned calibrated scenario without feed-forward: four inputs, Ψ⁻ only.
pub const STAGE1_TOML: &str = include_str!("../scenarios/stage1.toml");
/// Pinned calibrated scenario with feed-forward: |P⟩ and |R⟩, Ψ⁺ only.
pub const STAGE2_TOML: &str = include_str!("../scenarios/stage2.toml");
/// Small scenario for smoke tests and examples.
pub const DEMO_TOML: &str = include_str!("../scenarios/demo.toml");

pub fn stage1() -> Scenario {
    Scenario::from_toml(STAGE1_TOML).expect("embedded scenario is valid")
}

pub fn stage2() -> Scenario {
    Scenario::from_toml(STAGE2_TOML).expect("embedded scenario is valid")
}

pub fn demo() -> Scenario {
    Scenario::from_toml(DEMO_TOML).expect("embedded scenario is valid")
}
