use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use catnet::cascade::structural_stability_experiment;
use catnet::control::simulate_path;
use catnet::diagnostics::{diagnose, SingularityDiagnostics};
use catnet::network::find_equilibria;
use catnet::runner::ensemble::copula_summary;
use catnet::runner::output::{to_json_bytes, write_json};
use catnet::runner::{
    load_config, run_ensemble, run_single, write_ensemble, write_single, RunSummary, ScenarioConfig,
    SeriesFormat,
};
use catnet::Error;

#[derive(Parser)]
#[command(name = "catnet", version, about = "Coupled catastrophe network simulator")]
struct Cli {
    /// Overrides the path seed (`run`, `stability`) or the ensemble base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Time-series format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario.
    Run { config: PathBuf },
    /// Run the Monte Carlo ensemble.
    Ensemble { config: PathBuf },
    /// Print singularity diagnostics at every equilibrium for a control point.
    Diagnose {
        config: PathBuf,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
    },
    /// Fit copulas to the intensities in an ensemble summary.
    CopulaFit { summary: PathBuf },
    /// Perturb controls and coupling and check the graph partition persists.
    Stability {
        config: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
    Aborts(f64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e),
            e => Failure::Runtime(e),
        }
    }
}

fn out_dir(cli: &Cli, config: &ScenarioConfig) -> PathBuf {
    cli.out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let bytes = to_json_bytes(value)?;
    std::io::stdout().write_all(&bytes).map_err(Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct DiagnosedEquilibrium {
    x: Vec<f64>,
    is_minimum: bool,
    diagnostics: SingularityDiagnostics,
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = load_config(config)?;
            if let Some(s) = cli.seed {
                cfg.path.seed = s;
            }
            let report = run_single(&cfg)?;
            let dir = out_dir(cli, &cfg);
            let format = match cli.format {
                Format::Csv => SeriesFormat::Csv,
                Format::Json => SeriesFormat::Json,
            };
            write_single(&cfg, &report, &dir, format)?;
            println!(
                "{} events, {} apocalyptic times, components {:?} -> {}",
                report.events.len(),
                report.apocalyptic_times.len(),
                report.graph.components(),
                dir.display()
            );
        }
        Command::Ensemble { config } => {
            let mut cfg = load_config(config)?;
            if let Some(s) = cli.seed {
                cfg.ensemble.base_seed = s;
            }
            let run = run_ensemble(&cfg)?;
            let dir = out_dir(cli, &cfg);
            write_ensemble(&run, &dir)?;
            let s = &run.summary.stats;
            println!(
                "{} replicates ({} aborted), hitting {:.4}, co-event {:.4}, coverage {} -> {}",
                s.replicates,
                s.aborted,
                s.hitting_fraction,
                s.co_event_rate,
                s.coverage_fraction.map_or("n/a".into(), |c| format!("{c:.4}")),
                dir.join("summary.json").display()
            );
            let frac = run.summary.abort_fraction();
            if frac > cfg.ensemble.max_abort_fraction {
                return Err(Failure::Aborts(frac));
            }
        }
        Command::Diagnose { config, at } => {
            let cfg = load_config(config)?;
            let sys = cfg.system()?;
            if at.len() != sys.p() {
                return Err(Failure::Config(Error::Config {
                    field: "--at".into(),
                    message: format!("expected {} control values, got {}", sys.p(), at.len()),
                }));
            }
            let eqs = find_equilibria(&sys, at, cfg.cascade.search_box)?;
            let mut out = Vec::with_capacity(eqs.len());
            for eq in &eqs {
                let d = diagnose(&sys, eq, cfg.cascade.tol_rank)?;
                println!(
                    "x = {:?}: corank {}, dpi codim {}, min singular value {:e}",
                    eq.x,
                    d.corank,
                    d.dpi_codim,
                    d.min_singular_value()
                );
                out.push(DiagnosedEquilibrium {
                    x: eq.x.clone(),
                    is_minimum: eq.is_minimum(),
                    diagnostics: d,
                });
            }
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
                write_json(&dir.join("diagnostics.json"), &out)?;
            }
        }
        Command::CopulaFit { summary } => {
            let text = std::fs::read(summary).map_err(|e| {
                Error::Config {
                    field: "<summary>".into(),
                    message: format!("{}: {e}", summary.display()),
                }
            })?;
            let s: RunSummary = serde_json::from_slice(&text).map_err(|e| Error::Config {
                field: "<summary>".into(),
                message: e.to_string(),
            })?;
            let k = s.config.system.sectors.len();
            let fit = copula_summary(&s.digests, k);
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
                write_json(&dir.join("copula.json"), &fit)?;
            }
            print_json(&fit)?;
        }
        Command::Stability { config, eta, trials } => {
            let mut cfg = load_config(config)?;
            if let Some(s) = cli.seed {
                cfg.ensemble.base_seed = s;
            }
            let sys = cfg.system()?;
            let path = simulate_path(&cfg.path, &cfg.alpha0)?;
            let out = structural_stability_experiment(
                &sys,
                &path,
                &cfg.x0(&sys),
                &cfg.cascade,
                *eta,
                *trials,
                cfg.ensemble.base_seed,
            )?;
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
                write_json(&dir.join("stability.json"), &out)?;
            }
            println!(
                "partition {:?} preserved in {}/{} trials ({:.3})",
                out.baseline_partition, out.preserved, out.trials, out.fraction
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Aborts(f)) => {
            eprintln!("error: aborted-replicate fraction {f:.3} exceeds the configured maximum");
            ExitCode::from(3)
        }
    }
}
