//! Scenario files, Monte Carlo ensembles and persisted outputs.

pub mod config;
pub mod ensemble;
pub mod output;

use std::path::Path;

use serde::Serialize;

pub use config::{load_config, parse_config, ScenarioConfig};
pub use ensemble::{run_ensemble, write_ensemble, EnsembleRun, RunSummary};

use crate::cascade::{run_scenario, CascadeReport};
use crate::control::simulate_path;
use crate::Result;
use output::{write_json, write_timeseries_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeriesFormat {
    #[default]
    Csv,
    Json,
}

/// Report without the per-step series.
#[derive(Serialize)]
struct ReportSummary<'a> {
    config: &'a ScenarioConfig,
    k: usize,
    event_count: usize,
    graph: &'a crate::cascade::CatastropheGraph,
    components: Vec<Vec<usize>>,
    apocalyptic_times: &'a [crate::cascade::ApocalypticTime],
}

/// Runs one scenario with the path seed from the config.
pub fn run_single(config: &ScenarioConfig) -> Result<CascadeReport> {
    let sys = config.system()?;
    let path = simulate_path(&config.path, &config.alpha0)?;
    run_scenario(&sys, &path, &config.x0(&sys), &config.cascade)
}

/// Writes `events.json`, the time series and `report.json` into `dir`.
pub fn write_single(
    config: &ScenarioConfig,
    report: &CascadeReport,
    dir: &Path,
    format: SeriesFormat,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("events.json"), &report.events)?;
    match format {
        SeriesFormat::Csv => {
            let f = std::fs::File::create(dir.join("timeseries.csv"))?;
            write_timeseries_csv(std::io::BufWriter::new(f), report)?;
        }
        SeriesFormat::Json => write_json(&dir.join("timeseries.json"), &report.steps)?,
    }
    write_json(
        &dir.join("report.json"),
        &ReportSummary {
            config,
            k: report.k,
            event_count: report.events.len(),
            graph: &report.graph,
            components: report.graph.components(),
            apocalyptic_times: &report.apocalyptic_times,
        },
    )
}
