use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeParams;
use crate::catastrophe::NormalForm;
use crate::control::{ellipticity_check, ControlPathSpec, PathKind, ELLIPTICITY_FLOOR};
use crate::linalg::from_rows;
use crate::network::{CouplingSpec, NetworkSystem};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// `cascade.tau_sync` defaults to this fraction of the path horizon.
pub const TAU_SYNC_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub sectors: Vec<NormalForm>,
    #[serde(default)]
    pub epsilon: f64,
    /// Defaults to all zeros.
    #[serde(default)]
    pub lambda: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Keyword(InitialKeyword),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialKeyword {
    #[serde(rename = "relax-from-origin")]
    RelaxFromOrigin,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Keyword(InitialKeyword::RelaxFromOrigin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub replicates: usize,
    pub base_seed: u64,
    /// Aborted-replicate share above which the ensemble command fails.
    pub max_abort_fraction: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            replicates: 1,
            base_seed: 0,
            max_abort_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub replicate_logs: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            replicate_logs: false,
        }
    }
}

/// Scenario validity flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFlags {
    /// `ε > 0` and some `λ_ij ≠ 0`.
    pub nontrivial_coupling: bool,
    /// Control noise is uniformly elliptic (false for deterministic ramps).
    pub elliptic_noise: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub system: SystemConfig,
    pub path: ControlPathSpec,
    /// Starting controls; ramps default to their start point.
    #[serde(default)]
    pub alpha0: Vec<f64>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub cascade: CascadeParams,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Recomputed on load; present in echoed configs.
    #[serde(default)]
    pub hypotheses: HypothesisFlags,
}

impl ScenarioConfig {
    pub fn system(&self) -> Result<NetworkSystem> {
        let coupling = CouplingSpec::new(self.system.epsilon, self.system.lambda.clone())?;
        NetworkSystem::new(self.system.sectors.clone(), coupling)
    }

    pub fn x0(&self, sys: &NetworkSystem) -> Vec<f64> {
        match &self.initial_state {
            InitialState::Vector(v) => v.clone(),
            InitialState::Keyword(InitialKeyword::RelaxFromOrigin) => vec![0.0; sys.n()],
        }
    }

    /// Path spec for replicate `seed`.
    pub fn path_with_seed(&self, seed: u64) -> ControlPathSpec {
        ControlPathSpec {
            seed,
            ..self.path.clone()
        }
    }
}

fn cfg(field: &str, e: impl std::fmt::Display) -> Error {
    Error::config(field, e.to_string())
}

/// Parses, fills defaults, validates and computes the hypothesis flags.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| cfg("<root>", e))?;
    let mut c: ScenarioConfig = serde_json::from_value(raw.clone()).map_err(|e| cfg("<root>", e))?;
    if c.schema_version != SCHEMA_VERSION {
        return Err(cfg(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", c.schema_version),
        ));
    }
    let k = c.system.sectors.len();
    if k == 0 {
        return Err(cfg("system.sectors", "at least one sector is required"));
    }
    if c.system.lambda.is_empty() {
        c.system.lambda = vec![vec![0.0; k]; k];
    }
    let sys = c.system().map_err(|e| cfg("system.lambda", e))?;

    if let PathKind::Diffusion { covariance, drift } = &c.path.kind {
        let dims_ok = covariance.len() == drift.len() && covariance.iter().all(|r| r.len() == drift.len());
        if dims_ok && !ellipticity_check(&from_rows(covariance), ELLIPTICITY_FLOOR).map_err(|e| cfg("path.covariance", e))? {
            return Err(cfg(
                "path.covariance",
                format!(
                    "ellipticity hypothesis violated: covariance must be uniformly elliptic (minimum eigenvalue >= {ELLIPTICITY_FLOOR})"
                ),
            ));
        }
    }
    c.path.validate().map_err(|e| cfg("path", e))?;
    if c.path.dim() != sys.p() {
        return Err(cfg("path", Error::dim("control path", sys.p(), c.path.dim())));
    }
    if raw.pointer("/cascade/tau_sync").is_none() {
        c.cascade.tau_sync = TAU_SYNC_FRACTION * c.path.horizon;
    }
    if c.alpha0.is_empty() {
        c.alpha0 = match &c.path.kind {
            PathKind::Ramp { start, .. } => start.clone(),
            PathKind::Diffusion { .. } => {
                return Err(cfg("alpha0", "required for diffusion paths"));
            }
        };
    }
    if c.alpha0.len() != sys.p() {
        return Err(cfg("alpha0", Error::dim("alpha0", sys.p(), c.alpha0.len())));
    }
    if let InitialState::Vector(v) = &c.initial_state {
        if v.len() != sys.n() {
            return Err(cfg("initial_state", Error::dim("initial_state", sys.n(), v.len())));
        }
    }
    let p = &c.cascade;
    if !(p.tau_sync > 0.0) {
        return Err(cfg("cascade.tau_sync", "must be > 0"));
    }
    if !(p.search_box.lo < p.search_box.hi) {
        return Err(cfg("cascade.search_box", "lo must be < hi"));
    }
    if !(p.escape_radius > 0.0) {
        return Err(cfg("cascade.escape_radius", "must be > 0"));
    }
    if c.ensemble.replicates == 0 {
        return Err(cfg("ensemble.replicates", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&c.ensemble.max_abort_fraction) {
        return Err(cfg("ensemble.max_abort_fraction", "must lie in [0, 1]"));
    }

    let mut flags = HypothesisFlags {
        nontrivial_coupling: sys.coupling().is_nontrivial(),
        elliptic_noise: matches!(c.path.kind, PathKind::Diffusion { .. }),
        warnings: Vec::new(),
    };
    if !flags.nontrivial_coupling && k > 1 {
        flags
            .warnings
            .push("coupling is trivial (epsilon = 0 or lambda = 0): sectors evolve independently".into());
    }
    if !flags.elliptic_noise {
        flags
            .warnings
            .push("deterministic control path: no elliptic noise".into());
    }
    c.hypotheses = flags;
    Ok(c)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| cfg("<file>", format!("{}: {e}", path.as_ref().display())))?;
    parse_config(&text)
}
