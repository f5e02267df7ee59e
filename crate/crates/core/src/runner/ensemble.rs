use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::output::{sha256_hex, to_json_bytes, write_json};
use crate::cascade::{cascade_coverage_check, run_scenario_with, CascadeReport};
use crate::control::{replicate_seed, simulate_path};
use crate::copula::{fit_by_tau, rank_transform, tau_matrix, Family, FitOutcome};
use crate::network::NetworkSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDigest {
    pub replicate: usize,
    pub seed: u64,
    /// Reason the replicate stopped early, if it did.
    pub aborted: Option<String>,
    pub event_count: usize,
    pub apocalyptic_count: usize,
    pub co_event: bool,
    /// `None` without apocalyptic times.
    pub coverage_ok: Option<bool>,
    /// Largest jump per sector.
    pub intensities: Vec<f64>,
    pub sha256: String,
    /// Replicate log, relative to the output directory.
    pub log: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            edges: (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect(),
            counts: vec![0; bins],
        }
    }

    /// Values outside the range land in the end bins.
    pub fn add(&mut self, v: f64) {
        if !v.is_finite() {
            return;
        }
        let bins = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        let i = (((v - lo) / (hi - lo)) * bins as f64).floor();
        self.counts[i.clamp(0.0, bins as f64 - 1.0) as usize] += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub replicates: usize,
    pub aborted: usize,
    /// Share of completed replicates with at least one event.
    pub hitting_fraction: f64,
    /// Share of completed replicates with an event in each sector.
    pub sector_event_rates: Vec<f64>,
    pub mean_events: f64,
    /// Share of completed replicates with events in two sectors within `tau_sync`.
    pub co_event_rate: f64,
    pub apocalyptic_fraction: f64,
    /// Share passing the coverage check among replicates with apocalyptic times.
    pub coverage_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSummary {
    pub degenerate: Vec<bool>,
    pub tau_matrix: Option<Vec<Vec<f64>>>,
    pub fits: Vec<FitOutcome>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticHistograms {
    /// `log10` of the smallest singular value of `H_ε` before each event.
    pub log10_min_singular_value: Histogram,
    /// Pairwise discriminant-normal angles (degrees) before each event.
    pub alignment_angle: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub stats: EnsembleStats,
    pub copula: CopulaSummary,
    pub histograms: DiagnosticHistograms,
    pub digests: Vec<ReplicateDigest>,
}

impl RunSummary {
    pub fn abort_fraction(&self) -> f64 {
        self.stats.aborted as f64 / self.stats.replicates.max(1) as f64
    }
}

pub struct EnsembleRun {
    pub summary: RunSummary,
    /// Completed reports in replicate order (`None` for aborts).
    pub reports: Vec<Option<CascadeReport>>,
    /// Serialized replicate logs, when enabled.
    pub logs: Vec<Option<Vec<u8>>>,
}

pub fn replicate_log_name(r: usize) -> String {
    format!("replicates/replicate_{r:05}.json")
}

/// One replicate; reports carry events but no step records.
pub fn run_replicate(
    config: &ScenarioConfig,
    sys: &NetworkSystem,
    seed: u64,
    record_steps: bool,
) -> Result<CascadeReport> {
    let path = simulate_path(&config.path_with_seed(seed), &config.alpha0)?;
    run_scenario_with(sys, &path, &config.x0(sys), &config.cascade, record_steps)
}

/// Runs every replicate in parallel and reduces in replicate order.
pub fn run_ensemble(config: &ScenarioConfig) -> Result<EnsembleRun> {
    let sys = config.system()?;
    let k = sys.k();
    let tau = config.cascade.tau_sync;
    let results: Vec<(ReplicateDigest, Option<CascadeReport>, Option<Vec<u8>>)> = (0..config.ensemble.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(config.ensemble.base_seed, r as u64);
            let outcome = run_replicate(config, &sys, seed, false);
            let (report, aborted) = match outcome {
                Ok(rep) => (Some(rep), None),
                Err(e @ (Error::Escaped { .. } | Error::Precondition(_))) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let bytes = match &report {
                Some(rep) => to_json_bytes(rep)?,
                None => to_json_bytes(&aborted)?,
            };
            let log = config.output.replicate_logs.then(|| replicate_log_name(r));
            let digest = ReplicateDigest {
                replicate: r,
                seed,
                aborted,
                event_count: report.as_ref().map_or(0, |x| x.events.len()),
                apocalyptic_count: report.as_ref().map_or(0, |x| x.apocalyptic_times.len()),
                co_event: report.as_ref().is_some_and(|x| x.has_co_event(tau)),
                coverage_ok: report
                    .as_ref()
                    .filter(|x| !x.apocalyptic_times.is_empty())
                    .map(|x| cascade_coverage_check(x, &x.graph)),
                intensities: report.as_ref().map_or_else(|| vec![0.0; k], |x| x.sector_intensities()),
                sha256: sha256_hex(&bytes),
                log,
            };
            let bytes = config.output.replicate_logs.then_some(bytes);
            Ok((digest, report, bytes))
        })
        .collect::<Result<_>>()?;

    let mut digests = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    let mut logs = Vec::with_capacity(results.len());
    for (d, r, l) in results {
        digests.push(d);
        reports.push(r);
        logs.push(l);
    }
    let stats = ensemble_stats(&digests, k);
    let copula = copula_summary(&digests, k);
    let histograms = diagnostic_histograms(reports.iter().flatten());
    Ok(EnsembleRun {
        summary: RunSummary {
            config: config.clone(),
            stats,
            copula,
            histograms,
            digests,
        },
        reports,
        logs,
    })
}

pub fn ensemble_stats(digests: &[ReplicateDigest], k: usize) -> EnsembleStats {
    let done: Vec<&ReplicateDigest> = digests.iter().filter(|d| d.aborted.is_none()).collect();
    let m = done.len().max(1) as f64;
    let frac = |f: &dyn Fn(&ReplicateDigest) -> bool| done.iter().filter(|d| f(d)).count() as f64 / m;
    let covered: Vec<bool> = done.iter().filter_map(|d| d.coverage_ok).collect();
    EnsembleStats {
        replicates: digests.len(),
        aborted: digests.len() - done.len(),
        hitting_fraction: frac(&|d| d.event_count > 0),
        sector_event_rates: (0..k).map(|i| frac(&|d| d.intensities[i] > 0.0)).collect(),
        mean_events: done.iter().map(|d| d.event_count as f64).sum::<f64>() / m,
        co_event_rate: frac(&|d| d.co_event),
        apocalyptic_fraction: frac(&|d| d.apocalyptic_count > 0),
        coverage_fraction: (!covered.is_empty())
            .then(|| covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64),
    }
}

/// Rank-transformed intensities of completed replicates, tau matrix and
/// Clayton/Gumbel fits.
pub fn copula_summary(digests: &[ReplicateDigest], k: usize) -> CopulaSummary {
    let rows: Vec<Vec<f64>> = digests
        .iter()
        .filter(|d| d.aborted.is_none())
        .map(|d| d.intensities.clone())
        .collect();
    let mut out = CopulaSummary {
        degenerate: vec![true; k],
        tau_matrix: None,
        fits: Vec::new(),
        note: None,
    };
    if k < 2 || rows.len() < 10 {
        out.note = Some("copula fit needs k >= 2 and at least 10 completed replicates".into());
        return out;
    }
    let pseudo = match rank_transform(&rows) {
        Ok(p) => p,
        Err(e) => {
            out.note = Some(e.to_string());
            return out;
        }
    };
    out.degenerate = (0..k)
        .map(|j| pseudo.degenerate[j] || rows.iter().all(|r| r[j] == 0.0))
        .collect();
    if out.degenerate.iter().any(|&d| d) {
        out.note = Some("degenerate intensity column (sector without events or without variation)".into());
        return out;
    }
    match tau_matrix(&pseudo) {
        Ok(m) => out.tau_matrix = Some(m),
        Err(e) => out.note = Some(e.to_string()),
    }
    for family in [Family::Clayton, Family::Gumbel] {
        match fit_by_tau(&pseudo, family) {
            Ok(f) => out.fits.push(f),
            Err(e) => out.note = Some(e.to_string()),
        }
    }
    out
}

pub fn diagnostic_histograms<'a>(reports: impl Iterator<Item = &'a CascadeReport>) -> DiagnosticHistograms {
    let mut sv = Histogram::uniform(-12.0, 2.0, 14);
    let mut ang = Histogram::uniform(0.0, 90.0, 18);
    for rep in reports {
        let mut last_step = None;
        for e in &rep.events {
            if last_step == Some(e.step) {
                continue;
            }
            last_step = Some(e.step);
            let d = &e.diagnostics;
            sv.add(d.min_singular_value().max(1e-300).log10());
            for i in 0..rep.k {
                for j in i + 1..rep.k {
                    if let Some(a) = d.angle(i, j) {
                        ang.add(a);
                    }
                }
            }
        }
    }
    DiagnosticHistograms {
        log10_min_singular_value: sv,
        alignment_angle: ang,
    }
}

/// Writes `summary.json` and, when enabled, the replicate logs.
pub fn write_ensemble(run: &EnsembleRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (d, bytes) in run.summary.digests.iter().zip(&run.logs) {
        if let (Some(name), Some(bytes)) = (&d.log, bytes) {
            let p = dir.join(name);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, bytes)?;
        }
    }
    write_json(&dir.join("summary.json"), &run.summary)
}
