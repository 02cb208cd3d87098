use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use teleport_cli::commands::{self, Overrides};
use teleport_cli::CliError;
use teleport_core::qcore::PolarizationLabel;
use teleport_core::tomography::montecarlo::DEFAULT_RESAMPLES;

/// Desk-scale teleportation simulator and analysis chain.
///
/// Every flag can also be set through an environment variable with the
/// `TELEPORT_` prefix, e.g. `TELEPORT_SEED=7` or `TELEPORT_THREADS=8`.
#[derive(Parser)]
#[command(name = "teleport", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "TELEPORT_THREADS", default_value_t = 1)]
    threads: usize,
    /// Output directory (defaults to the scenario's output_dir, then ./out).
    #[arg(long, global = true, env = "TELEPORT_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario TOML file; the built-in demo scenario is used when omitted.
    #[arg(long, env = "TELEPORT_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "TELEPORT_SEED")]
    seed: Option<u64>,
    /// Coincidence window in ns for three-folds and cross-site matching.
    #[arg(long, env = "TELEPORT_WINDOW_NS")]
    window_ns: Option<f64>,
    /// Clock resynchronization interval in seconds (45 to 180).
    #[arg(long, env = "TELEPORT_RESYNC_S")]
    resync_s: Option<f64>,
}

impl ScenarioArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            window_ns: self.window_ns,
            resync_s: self.resync_s,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every scheduled run and write TTAG files and truth logs.
    Simulate(ScenarioArgs),
    /// Synchronize the clocks of every run from its TTAG files.
    Sync(ScenarioArgs),
    /// Build three-folds and four-folds from TTAG files and sync tracks.
    Coincide(ScenarioArgs),
    /// Maximum-likelihood tomography of one count table.
    TomoState {
        /// CSV with columns basis,n_first,n_second.
        #[arg(long)]
        counts: PathBuf,
        /// Ideal state for the fidelity.
        #[arg(long)]
        ideal: PolarizationLabel,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, env = "TELEPORT_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Process matrix from the H, V, P and L state reports.
    TomoProcess {
        /// state_<X>.json files written by tomo-state or analyze.
        #[arg(long, num_args = 4, required = true)]
        states: Vec<PathBuf>,
        /// Clip χ to the completely positive cone before reporting.
        #[arg(long)]
        cp_project: bool,
    },
    /// sync + coincide + tomography from TTAG files; writes report.json.
    Analyze(ScenarioArgs),
    /// Run the pinned calibrated scenarios and write the result tables.
    Reproduce {
        #[arg(long, env = "TELEPORT_SEED")]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate(a) => {
            let s = commands::load_scenario(a.config.as_deref(), &a.overrides())?;
            let root = commands::output_root(Some(&s), out);
            let m = commands::cmd_simulate(&s, &root)?;
            eprintln!("wrote {} files to {}", m.files.len(), root.display());
        }
        Command::Sync(a) => {
            let s = commands::load_scenario(a.config.as_deref(), &a.overrides())?;
            let root = commands::output_root(Some(&s), out);
            commands::cmd_sync(&s, &root)?;
        }
        Command::Coincide(a) => {
            let s = commands::load_scenario(a.config.as_deref(), &a.overrides())?;
            let root = commands::output_root(Some(&s), out);
            commands::cmd_coincide(&s, &root)?;
        }
        Command::TomoState {
            counts,
            ideal,
            resamples,
            seed,
        } => {
            let root = commands::output_root(None, out);
            let (_, r) = commands::cmd_tomo_state(&counts, ideal, resamples, seed, &root)?;
            println!("{}: f = {:.4} ± {:.4}", r.input, r.fidelity, r.sigma);
        }
        Command::TomoProcess { states, cp_project } => {
            let root = commands::output_root(None, out);
            let (_, p) = commands::cmd_tomo_process(&states, cp_project, &root)?;
            println!("f_process = {:.4}", p.f_process);
        }
        Command::Analyze(a) => {
            let s = commands::load_scenario(a.config.as_deref(), &a.overrides())?;
            let root = commands::output_root(Some(&s), out);
            let (_, r) = commands::cmd_analyze(&s, &root)?;
            print_report(&r);
        }
        Command::Reproduce { seed } => {
            let root = commands::output_root(None, out);
            let ov = Overrides {
                seed,
                ..Overrides::default()
            };
            let (_, r1, r2) = commands::cmd_reproduce(&root, &ov)?;
            print_report(&r1);
            print_report(&r2);
        }
    }
    Ok(())
}

fn print_report(r: &teleport_cli::pipeline::Report) {
    println!("{} ({:?})", r.scenario, r.mode);
    for s in &r.states {
        println!("  {}  f = {:.3} ± {:.3}  events = {}", s.input, s.fidelity, s.sigma, s.events);
    }
    println!("  mean f = {:.3} ± {:.3}", r.mean_fidelity, r.mean_sigma);
    if let Some(p) = &r.process {
        println!("  f_process = {:.3}", p.f_process);
    }
    println!("  above classical limits: {}", r.all_above_classical);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
