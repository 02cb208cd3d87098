//! simulate → sync → coincide → tomography, one run at a time.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use teleport_core::photonics_sim::{run_sim, Channel, SimOutput, TimeTag};
use teleport_core::protocol::MeasurementBasis;
use teleport_core::qcore::{BellState, DensityMatrix, PolarizationLabel};
use teleport_core::timesync::{
    classify_threefolds, gate_on_feedforward, match_fourfolds, sync_track, Fourfold, OffsetTrack,
};
use teleport_core::tomography::{
    binomial_fidelity, matrix_to_pairs, mle_reconstruct, monte_carlo_sigma, process_fidelity,
    process_from_states, CountRecord,
};

use crate::scenario::{AnalysisMode, RunSpec, Scenario};
use crate::CliError;

pub const CLASSICAL_STATE_LIMIT: f64 = 2.0 / 3.0;
pub const CLASSICAL_PROCESS_LIMIT: f64 = 0.5;

/// Alice tags used for clock sync: triggers and detector-`a` singles.
pub fn alice_sync_times(alice: &[TimeTag]) -> Vec<i64> {
    alice
        .iter()
        .filter(|t| matches!(t.channel, Channel::T | Channel::A))
        .map(|t| t.time_ps as i64)
        .collect()
}

pub fn bob_photon_times(bob: &[TimeTag]) -> Vec<i64> {
    bob.iter()
        .filter(|t| matches!(t.channel, Channel::E | Channel::F))
        .map(|t| t.time_ps as i64)
        .collect()
}

pub fn simulate(scenario: &Scenario, run: &RunSpec) -> Result<SimOutput, CliError> {
    Ok(run_sim(&scenario.run_config(run))?)
}

pub fn sync(scenario: &Scenario, alice: &[TimeTag], bob: &[TimeTag]) -> Result<OffsetTrack, CliError> {
    let track = sync_track(
        &alice_sync_times(alice),
        &bob_photon_times(bob),
        scenario.analysis.resync_s,
        &scenario.sync_params(),
    )?;
    Ok(track)
}

/// Coincidence outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub run: RunSpec,
    pub threefolds: usize,
    pub discarded_threefolds: u64,
    /// Four-folds of every label before selection.
    pub fourfolds: usize,
    /// Four-folds kept by the analysis mode.
    pub selected: usize,
    pub n_first: u64,
    pub n_second: u64,
}

impl RunCounts {
    pub fn record(&self) -> CountRecord {
        CountRecord::new(self.run.basis, self.n_first, self.n_second)
    }
}

/// Four-folds kept by the analysis: Ψ⁻ for tomography, gated Ψ⁺ for feed-forward.
pub fn select_fourfolds(scenario: &Scenario, bob: &[TimeTag], fourfolds: &[Fourfold]) -> Vec<Fourfold> {
    match scenario.analysis.mode {
        AnalysisMode::StateTomography => fourfolds
            .iter()
            .filter(|f| f.bsm_label == BellState::PsiMinus)
            .copied()
            .collect(),
        AnalysisMode::Feedforward => {
            let cfg = &scenario.sim;
            let width = (cfg.eom_gate_width_ns * 1e3).round() as i64;
            let gated: HashSet<(u64, Channel)> = gate_on_feedforward(bob, cfg.eom_gate_delay_ps(), width)
                .into_iter()
                .map(|t| (t.time_ps, t.channel))
                .collect();
            fourfolds
                .iter()
                .filter(|f| f.bsm_label == BellState::PsiPlus)
                .filter(|f| gated.contains(&(f.bob_time_ps as u64, f.bob_channel)))
                .copied()
                .collect()
        }
    }
}

pub fn coincide(
    scenario: &Scenario,
    run: &RunSpec,
    alice: &[TimeTag],
    bob: &[TimeTag],
    track: &OffsetTrack,
) -> Result<(RunCounts, Vec<Fourfold>), CliError> {
    let window = scenario.analysis.window_ps();
    let three = classify_threefolds(alice, window)?;
    let latency = scenario.sim.photon3_latency_ps();
    let four = match_fourfolds(&three.events, bob, track, latency, window)?;
    let selected = select_fourfolds(scenario, bob, &four);
    let rec = CountRecord::from_channels(run.basis, selected.iter().map(|f| f.bob_channel));
    Ok((
        RunCounts {
            run: *run,
            threefolds: three.events.len(),
            discarded_threefolds: three.discarded,
            fourfolds: four.len(),
            selected: selected.len(),
            n_first: rec.n_first,
            n_second: rec.n_second,
        },
        selected,
    ))
}

/// Simulates, syncs and counts one run without touching the disk.
pub fn process_run(scenario: &Scenario, run: &RunSpec) -> Result<RunCounts, CliError> {
    let out = simulate(scenario, run)?;
    let track = sync(scenario, &out.alice, &out.bob)?;
    Ok(coincide(scenario, run, &out.alice, &out.bob, &track)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub input: PolarizationLabel,
    pub counts: Vec<CountRecord>,
    pub events: u64,
    pub fidelity: f64,
    pub sigma: f64,
    pub n_resamples: usize,
    /// Reconstructed density matrix as `[re, im]` pairs (tomography mode).
    pub rho: Option<Vec<Vec<[f64; 2]>>>,
    pub mle_converged: Option<bool>,
    pub mle_iterations: Option<usize>,
    pub above_classical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub chi: Vec<Vec<[f64; 2]>>,
    pub f_process: f64,
    pub cp_projected: bool,
    pub above_classical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub mode: AnalysisMode,
    pub seed: u64,
    pub runs: Vec<RunCounts>,
    pub states: Vec<StateReport>,
    pub mean_fidelity: f64,
    /// Uncertainty of the mean from the per-state sigmas.
    pub mean_sigma: f64,
    pub process: Option<ProcessReport>,
    pub classical_state_limit: f64,
    pub classical_process_limit: f64,
    pub all_above_classical: bool,
}

impl Report {
    pub fn state(&self, input: PolarizationLabel) -> Option<&StateReport> {
        self.states.iter().find(|s| s.input == input)
    }

    pub fn all_converged(&self) -> bool {
        self.states.iter().all(|s| s.mle_converged != Some(false))
    }
}

fn counts_for(runs: &[RunCounts], input: PolarizationLabel) -> Vec<CountRecord> {
    let mut out: Vec<CountRecord> = Vec::new();
    for r in runs.iter().filter(|r| r.run.input == input) {
        match out.iter_mut().find(|c| c.basis == r.run.basis) {
            Some(c) => {
                c.n_first += r.n_first;
                c.n_second += r.n_second;
            }
            None => out.push(r.record()),
        }
    }
    out.sort_by_key(|c| c.basis);
    out
}

/// Tomography of one input from its count table.
pub fn state_report(
    input: PolarizationLabel,
    counts: Vec<CountRecord>,
    n_resamples: usize,
    seed: u64,
) -> Result<(StateReport, DensityMatrix), CliError> {
    let ideal = input.ket();
    let mle = mle_reconstruct(&counts)?;
    let est = monte_carlo_sigma(&counts, &ideal, n_resamples, seed)?;
    Ok((
        StateReport {
            input,
            events: counts.iter().map(|c| c.total()).sum(),
            counts,
            fidelity: est.value,
            sigma: est.sigma,
            n_resamples: est.n_resamples,
            rho: Some(matrix_to_pairs(mle.rho.matrix())),
            mle_converged: Some(mle.converged),
            mle_iterations: Some(mle.iterations),
            above_classical: est.value > CLASSICAL_STATE_LIMIT,
        },
        mle.rho,
    ))
}

/// Builds the fidelity report from per-run counts.
pub fn analyze(scenario: &Scenario, runs: Vec<RunCounts>) -> Result<Report, CliError> {
    let a = &scenario.analysis;
    let mut states = Vec::new();
    let mut rhos = Vec::new();
    for (i, input) in scenario.inputs().into_iter().enumerate() {
        let counts = counts_for(&runs, input);
        let seed = scenario.mc_seed(i);
        match a.mode {
            AnalysisMode::StateTomography => {
                let (rep, rho) = state_report(input, counts, a.mc_resamples, seed)?;
                states.push(rep);
                rhos.push((input, rho));
            }
            AnalysisMode::Feedforward => {
                let (basis, first_is_ideal) = MeasurementBasis::eigenbasis_of(input);
                let c = counts.iter().find(|c| c.basis == basis).copied().unwrap_or(CountRecord::new(basis, 0, 0));
                let (good, bad) = if first_is_ideal { (c.n_first, c.n_second) } else { (c.n_second, c.n_first) };
                let est = binomial_fidelity(good, bad, a.mc_resamples, seed);
                states.push(StateReport {
                    input,
                    events: c.total(),
                    counts,
                    fidelity: est.value,
                    sigma: est.sigma,
                    n_resamples: est.n_resamples,
                    rho: None,
                    mle_converged: None,
                    mle_iterations: None,
                    above_classical: est.value > CLASSICAL_STATE_LIMIT,
                });
            }
        }
    }
    let n = states.len() as f64;
    let mean_fidelity = states.iter().map(|s| s.fidelity).sum::<f64>() / n;
    let mean_sigma = states.iter().map(|s| s.sigma * s.sigma).sum::<f64>().sqrt() / n;

    let process_inputs = [PolarizationLabel::H, PolarizationLabel::V, PolarizationLabel::P, PolarizationLabel::L];
    let process = if a.mode == AnalysisMode::StateTomography
        && rhos.len() == 4
        && process_inputs.iter().all(|l| rhos.iter().any(|(x, _)| x == l))
    {
        let chi = process_from_states(&rhos, a.cp_project)?;
        let f = process_fidelity(&chi);
        Some(ProcessReport {
            chi: matrix_to_pairs(chi.chi()),
            f_process: f,
            cp_projected: a.cp_project,
            above_classical: f > CLASSICAL_PROCESS_LIMIT,
        })
    } else {
        None
    };
    let all_above_classical =
        states.iter().all(|s| s.above_classical) && process.as_ref().is_none_or(|p| p.above_classical);
    Ok(Report {
        scenario: scenario.name.clone(),
        mode: a.mode,
        seed: scenario.sim.seed,
        runs,
        states,
        mean_fidelity,
        mean_sigma,
        process,
        classical_state_limit: CLASSICAL_STATE_LIMIT,
        classical_process_limit: CLASSICAL_PROCESS_LIMIT,
        all_above_classical,
    })
}

/// Runs the whole scenario in memory, one run at a time.
pub fn run_scenario(scenario: &Scenario) -> Result<Report, CliError> {
    let runs = scenario
        .runs()
        .iter()
        .map(|r| process_run(scenario, r))
        .collect::<Result<Vec<_>, _>>()?;
    analyze(scenario, runs)
}
