//! Subcommand implementations. Each returns the manifest it wrote.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use teleport_core::photonics_sim::{decode_ttag, write_truth_jsonl, write_ttag, TimeTag};
use teleport_core::protocol::MeasurementBasis;
use teleport_core::qcore::{DensityMatrix, PolarizationLabel};
use teleport_core::timesync::OffsetTrack;
use teleport_core::tomography::{
    matrix_from_pairs, matrix_to_pairs, process_fidelity, process_from_states, CountRecord,
};

use crate::manifest::{read_file, OutputDir, RunManifest};
use crate::pipeline::{self, Report, RunCounts, StateReport, CLASSICAL_PROCESS_LIMIT};
use crate::scenario::{self, RunSpec, Scenario};
use crate::CliError;

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub window_ns: Option<f64>,
    pub resync_s: Option<f64>,
}

/// Loads a scenario (the embedded demo when `path` is `None`) and applies overrides.
pub fn load_scenario(path: Option<&Path>, ov: &Overrides) -> Result<Scenario, CliError> {
    let mut s = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Scenario::from_toml(&text)?
        }
        None => scenario::demo(),
    };
    apply_overrides(&mut s, ov)?;
    Ok(s)
}

pub fn apply_overrides(s: &mut Scenario, ov: &Overrides) -> Result<(), CliError> {
    if let Some(seed) = ov.seed {
        s.sim.seed = seed;
    }
    if let Some(w) = ov.window_ns {
        s.analysis.window_ns = w;
    }
    if let Some(r) = ov.resync_s {
        s.analysis.resync_s = r;
    }
    s.validate()
}

/// Output directory: explicit flag, then the scenario's, then `out`.
pub fn output_root(s: Option<&Scenario>, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| s.and_then(|s| s.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn open(s: &Scenario, out: &Path, command: &str) -> Result<OutputDir, CliError> {
    let text = s.to_toml();
    OutputDir::create(out, RunManifest::new(command, Some(s.sim.seed), Some(&text)))
}

fn ttag_bytes(tags: &[TimeTag]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(14 + 10 * tags.len());
    write_ttag(&mut buf, tags).expect("writing to memory");
    buf
}

fn alice_name(r: &RunSpec) -> String {
    format!("{}.alice.ttag", r.stem())
}

fn bob_name(r: &RunSpec) -> String {
    format!("{}.bob.ttag", r.stem())
}

fn sync_name(r: &RunSpec) -> String {
    format!("{}.sync.json", r.stem())
}

/// Writes both stations' TTAG files and the truth log for every run.
pub fn cmd_simulate(s: &Scenario, out: &Path) -> Result<RunManifest, CliError> {
    let mut dir = open(s, out, "simulate")?;
    dir.write("scenario.toml", s.to_toml().as_bytes())?;
    for run in s.runs() {
        let sim = pipeline::simulate(s, &run)?;
        dir.write(&alice_name(&run), &ttag_bytes(&sim.alice))?;
        dir.write(&bob_name(&run), &ttag_bytes(&sim.bob))?;
        let mut truth = Vec::new();
        write_truth_jsonl(&mut truth, &sim.truth).expect("writing to memory");
        dir.write(&format!("{}.truth.jsonl", run.stem()), &truth)?;
    }
    dir.finish()
}

fn load_tags(dir: &OutputDir, name: &str) -> Result<Vec<TimeTag>, CliError> {
    let p = dir.path(name);
    Ok(decode_ttag(&read_file(&p)?).map_err(|e| CliError::Format(format!("{}: {e}", p.display())))?)
}

fn sync_runs(s: &Scenario, dir: &mut OutputDir) -> Result<Vec<OffsetTrack>, CliError> {
    let mut tracks = Vec::new();
    for run in s.runs() {
        let alice = load_tags(dir, &alice_name(&run))?;
        let bob = load_tags(dir, &bob_name(&run))?;
        let track = pipeline::sync(s, &alice, &bob)?;
        dir.write_json(&sync_name(&run), &track)?;
        tracks.push(track);
    }
    Ok(tracks)
}

/// Cross-correlation sync of every run from persisted TTAG files.
pub fn cmd_sync(s: &Scenario, out: &Path) -> Result<RunManifest, CliError> {
    let mut dir = open(s, out, "sync")?;
    sync_runs(s, &mut dir)?;
    dir.finish()
}

/// Flat CSV row of [`RunCounts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRow {
    pub run: usize,
    pub input: PolarizationLabel,
    pub basis: MeasurementBasis,
    pub duration_s: f64,
    pub threefolds: usize,
    pub discarded_threefolds: u64,
    pub fourfolds: usize,
    pub selected: usize,
    pub n_first: u64,
    pub n_second: u64,
}

impl From<&RunCounts> for CountsRow {
    fn from(c: &RunCounts) -> Self {
        CountsRow {
            run: c.run.index,
            input: c.run.input,
            basis: c.run.basis,
            duration_s: c.run.duration_s,
            threefolds: c.threefolds,
            discarded_threefolds: c.discarded_threefolds,
            fourfolds: c.fourfolds,
            selected: c.selected,
            n_first: c.n_first,
            n_second: c.n_second,
        }
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Format(e.to_string()))
}

/// Count table of one input as `basis,n_first,n_second`.
pub fn counts_csv(records: &[CountRecord]) -> Result<Vec<u8>, CliError> {
    csv_bytes(records)
}

pub fn read_counts_csv(path: &Path) -> Result<Vec<CountRecord>, CliError> {
    let bytes = read_file(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    r.deserialize()
        .collect::<Result<Vec<CountRecord>, _>>()
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn coincide_runs(s: &Scenario, dir: &mut OutputDir, tracks: Option<Vec<OffsetTrack>>) -> Result<Vec<RunCounts>, CliError> {
    let mut all = Vec::new();
    for (k, run) in s.runs().iter().enumerate() {
        let alice = load_tags(dir, &alice_name(run))?;
        let bob = load_tags(dir, &bob_name(run))?;
        let track = match &tracks {
            Some(t) => t[k].clone(),
            None => {
                let p = dir.path(&sync_name(run));
                serde_json::from_slice(&read_file(&p)?).map_err(|e| CliError::Format(format!("{}: {e}", p.display())))?
            }
        };
        let (counts, fourfolds) = pipeline::coincide(s, run, &alice, &bob, &track)?;
        dir.write(&format!("{}.fourfolds.csv", run.stem()), &csv_bytes(&fourfolds)?)?;
        all.push(counts);
    }
    let rows: Vec<CountsRow> = all.iter().map(CountsRow::from).collect();
    dir.write("counts.csv", &csv_bytes(&rows)?)?;
    for input in s.inputs() {
        let mut recs: Vec<CountRecord> = Vec::new();
        for c in all.iter().filter(|c| c.run.input == input) {
            match recs.iter_mut().find(|r| r.basis == c.run.basis) {
                Some(r) => {
                    r.n_first += c.n_first;
                    r.n_second += c.n_second;
                }
                None => recs.push(c.record()),
            }
        }
        dir.write(&format!("counts_{input}.csv"), &counts_csv(&recs)?)?;
    }
    Ok(all)
}

/// Three-fold classification and four-fold matching using persisted sync tracks.
pub fn cmd_coincide(s: &Scenario, out: &Path) -> Result<RunManifest, CliError> {
    let mut dir = open(s, out, "coincide")?;
    coincide_runs(s, &mut dir, None)?;
    dir.finish()
}

fn check_converged(report: &Report) -> Result<(), CliError> {
    let failed: Vec<String> = report
        .states
        .iter()
        .filter(|s| s.mle_converged == Some(false))
        .map(|s| s.input.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NonConvergence(failed.join(", ")))
    }
}

/// Sync, coincidence and tomography from persisted TTAG files; writes `report.json`.
pub fn cmd_analyze(s: &Scenario, out: &Path) -> Result<(RunManifest, Report), CliError> {
    let mut dir = open(s, out, "analyze")?;
    let tracks = sync_runs(s, &mut dir)?;
    let counts = coincide_runs(s, &mut dir, Some(tracks))?;
    let report = pipeline::analyze(s, counts)?;
    dir.write_json("report.json", &report)?;
    let m = dir.finish()?;
    check_converged(&report)?;
    Ok((m, report))
}

/// MLE state tomography of a single count table.
pub fn cmd_tomo_state(
    counts: &Path,
    ideal: PolarizationLabel,
    n_resamples: usize,
    seed: u64,
    out: &Path,
) -> Result<(RunManifest, StateReport), CliError> {
    let records = read_counts_csv(counts)?;
    let mut dir = OutputDir::create(out, RunManifest::new("tomo-state", Some(seed), None))?;
    let (report, _) = pipeline::state_report(ideal, records, n_resamples, seed)?;
    dir.write_json(&format!("state_{ideal}.json"), &report)?;
    let m = dir.finish()?;
    if report.mle_converged == Some(false) {
        return Err(CliError::NonConvergence(ideal.to_string()));
    }
    Ok((m, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessOutput {
    pub inputs: Vec<PolarizationLabel>,
    pub chi: Vec<Vec<[f64; 2]>>,
    pub f_process: f64,
    pub cp_projected: bool,
    pub above_classical: bool,
}

/// Process matrix from four `state_<X>.json` files for H, V, P, L.
pub fn cmd_tomo_process(states: &[PathBuf], cp_project: bool, out: &Path) -> Result<(RunManifest, ProcessOutput), CliError> {
    let mut pairs = Vec::new();
    for p in states {
        let rep: StateReport =
            serde_json::from_slice(&read_file(p)?).map_err(|e| CliError::Format(format!("{}: {e}", p.display())))?;
        let rho = rep
            .rho
            .ok_or_else(|| CliError::Format(format!("{}: no density matrix", p.display())))?;
        let rho = DensityMatrix::new(matrix_from_pairs(&rho)).map_err(|e| CliError::Format(e.to_string()))?;
        pairs.push((rep.input, rho));
    }
    let chi = process_from_states(&pairs, cp_project)?;
    let f = process_fidelity(&chi);
    let output = ProcessOutput {
        inputs: pairs.iter().map(|(l, _)| *l).collect(),
        chi: matrix_to_pairs(chi.chi()),
        f_process: f,
        cp_projected: cp_project,
        above_classical: f > CLASSICAL_PROCESS_LIMIT,
    };
    let mut dir = OutputDir::create(out, RunManifest::new("tomo-process", None, None))?;
    dir.write_json("process.json", &output)?;
    Ok((dir.finish()?, output))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FidelityRow {
    input: PolarizationLabel,
    fidelity: f64,
    sigma: f64,
    events: u64,
    above_classical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChiRow {
    l: usize,
    k: usize,
    re: f64,
    im: f64,
}

fn fidelity_rows(r: &Report) -> Vec<FidelityRow> {
    r.states
        .iter()
        .map(|s| FidelityRow {
            input: s.input,
            fidelity: s.fidelity,
            sigma: s.sigma,
            events: s.events,
            above_classical: s.above_classical,
        })
        .collect()
}

/// Both pinned calibrated scenarios, run in memory; emits the result tables.
pub fn cmd_reproduce(out: &Path, ov: &Overrides) -> Result<(RunManifest, Report, Report), CliError> {
    let mut s1 = scenario::stage1();
    let mut s2 = scenario::stage2();
    apply_overrides(&mut s1, ov)?;
    apply_overrides(&mut s2, ov)?;
    let config = format!("{}\n{}", s1.to_toml(), s2.to_toml());
    let mut dir = OutputDir::create(out, RunManifest::new("reproduce", Some(s1.sim.seed), Some(&config)))?;
    let r1 = pipeline::run_scenario(&s1)?;
    let r2 = pipeline::run_scenario(&s2)?;
    dir.write("stage1.csv", &csv_bytes(&fidelity_rows(&r1))?)?;
    dir.write("stage2.csv", &csv_bytes(&fidelity_rows(&r2))?)?;
    if let Some(p) = &r1.process {
        let rows: Vec<ChiRow> = (0..4)
            .flat_map(|l| (0..4).map(move |k| (l, k)))
            .map(|(l, k)| ChiRow {
                l,
                k,
                re: p.chi[l][k][0],
                im: p.chi[l][k][1],
            })
            .collect();
        dir.write("chi.csv", &csv_bytes(&rows)?)?;
    }
    dir.write_json("stage1_report.json", &r1)?;
    dir.write_json("stage2_report.json", &r2)?;
    let m = dir.finish()?;
    check_converged(&r1)?;
    Ok((m, r1, r2))
}
