//! Catastrophe cascades along a control path.
//!
//! The runner follows the occupied equilibrium (the minimum the relaxed
//! state rests on) step by step. When Newton continuation reports that the
//! branch ended, or the continued point lost stability, the state relaxes by
//! gradient flow into a new basin and the affected sectors log catastrophe
//! events. Events falling in a trailing window of length `tau_sync` form the
//! synchronized set `A(t)`; the order parameter is `Φ(t) = |A(t)| / k`, and
//! an apocalyptic time is declared when `|A(t)|` (or `Φ`) reaches the
//! threshold.

use petgraph::unionfind::UnionFind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catastrophe::SearchBox;
use crate::control::{replicate_seed, ControlPath};
use crate::diagnostics::{diagnose, SingularityDiagnostics, TOL_RANK};
use crate::linalg::euclid;
use crate::network::{
    continue_equilibrium_with, gradient_flow, Continuation, ContinuationSettings, CouplingSpec,
    NetworkEquilibrium, NetworkSystem, RelaxFailure, RelaxSettings, Signature,
};
use crate::{Error, Result};

/// Block eigenvalue below which a joint fold is attributed to a sector.
pub const ATTRIBUTION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// `|A(t)| ≥ L_c`.
    Count(usize),
    /// `Φ(t) ≥ φ_c`.
    Fraction(f64),
}

impl Threshold {
    pub fn is_met(self, size: usize, k: usize) -> bool {
        match self {
            Threshold::Count(l) => size >= l,
            Threshold::Fraction(f) => size as f64 / k as f64 >= f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeParams {
    pub tau_sync: f64,
    pub threshold: Threshold,
    /// Degrees.
    pub angle_max: f64,
    pub search_box: SearchBox,
    pub escape_radius: f64,
    pub attribution_tol: f64,
    /// Sector displacement during relaxation above which the sector counts
    /// as having changed basin.
    pub jump_tol: f64,
    /// Largest displacement accepted from Newton continuation.
    pub max_jump: f64,
    pub tol_rank: f64,
}

impl Default for CascadeParams {
    fn default() -> Self {
        CascadeParams {
            tau_sync: 0.05,
            threshold: Threshold::Count(2),
            angle_max: 10.0,
            search_box: SearchBox::default(),
            escape_radius: 1e3,
            attribution_tol: ATTRIBUTION_TOL,
            jump_tol: 0.5,
            max_jump: 0.5,
            tol_rank: TOL_RANK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    FoldDisappearance,
    StabilityFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatastropheEvent {
    pub time: f64,
    pub step: usize,
    pub sector: usize,
    pub mechanism: Mechanism,
    pub pre_signature: Signature,
    pub post_signature: Signature,
    /// `‖Δx_sector‖` between the pre-event equilibrium and the relaxed state.
    pub jump_size: f64,
    /// Controls at the event step.
    pub alpha: Vec<f64>,
    /// Diagnostics at the last equilibrium before the event.
    pub diagnostics: SingularityDiagnostics,
}

impl CatastropheEvent {
    /// Event phase used by the synchronization condition: its time.
    pub fn phase(&self) -> f64 {
        self.time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub min_alignment_angle: Option<f64>,
    pub co_event_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatastropheGraph {
    pub k: usize,
    pub edges: Vec<GraphEdge>,
}

impl CatastropheGraph {
    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::<usize>::new(self.k);
        for e in &self.edges {
            uf.union(e.i, e.j);
        }
        let labels = uf.into_labeling();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut seen: Vec<Option<usize>> = vec![None; self.k];
        for node in 0..self.k {
            let root = labels[node];
            match seen[root] {
                Some(c) => comps[c].push(node),
                None => {
                    seen[root] = Some(comps.len());
                    comps.push(vec![node]);
                }
            }
        }
        comps
    }

    pub fn component_of(&self, node: usize) -> Vec<usize> {
        self.components()
            .into_iter()
            .find(|c| c.contains(&node))
            .unwrap_or_default()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges
            .iter()
            .any(|e| (e.i, e.j) == (i.min(j), i.max(j)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub alpha: Vec<f64>,
    pub x: Vec<f64>,
    /// `A(t)`, sorted.
    pub active: Vec<usize>,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApocalypticTime {
    pub time: f64,
    pub size: usize,
    pub phi: f64,
    /// Earliest-flipping sector in the window.
    pub first_sector: usize,
    pub active: Vec<usize>,
    pub triggered_component: Vec<usize>,
    /// Every graph component meeting `A(t)`.
    pub components_hit: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub k: usize,
    pub events: Vec<CatastropheEvent>,
    pub steps: Vec<StepRecord>,
    pub graph: CatastropheGraph,
    pub apocalyptic_times: Vec<ApocalypticTime>,
}

impl CascadeReport {
    /// Largest jump per sector (0 without events).
    pub fn sector_intensities(&self) -> Vec<f64> {
        let mut out = vec![0.0_f64; self.k];
        for e in &self.events {
            out[e.sector] = out[e.sector].max(e.jump_size);
        }
        out
    }

    /// Two distinct sectors have events within `tau` of each other.
    pub fn has_co_event(&self, tau: f64) -> bool {
        self.events.iter().enumerate().any(|(a, e)| {
            self.events[a + 1..]
                .iter()
                .any(|f| f.sector != e.sector && (f.time - e.time).abs() <= tau)
        })
    }
}

fn active_set(events: &[CatastropheEvent], t: f64, tau: f64) -> Vec<usize> {
    let mut a: Vec<usize> = events
        .iter()
        .filter(|e| e.time <= t && e.time > t - tau)
        .map(|e| e.sector)
        .collect();
    a.sort_unstable();
    a.dedup();
    a
}

fn escaped(time: f64, radius: f64) -> Error {
    Error::Escaped { time, radius }
}

/// Runs one scenario along `path` starting from the basin of `x0`.
pub fn run_scenario(
    sys: &NetworkSystem,
    path: &ControlPath,
    x0: &[f64],
    params: &CascadeParams,
) -> Result<CascadeReport> {
    run_scenario_with(sys, path, x0, params, true)
}

/// As [`run_scenario`]; with `record_steps = false` the report's `steps`
/// stay empty, which keeps long ensembles light.
pub fn run_scenario_with(
    sys: &NetworkSystem,
    path: &ControlPath,
    x0: &[f64],
    params: &CascadeParams,
    record_steps: bool,
) -> Result<CascadeReport> {
    if !(params.tau_sync > 0.0) {
        return Err(Error::Precondition("tau_sync must be > 0".into()));
    }
    if path.is_empty() {
        return Err(Error::Precondition("empty control path".into()));
    }
    if x0.len() != sys.n() {
        return Err(Error::dim("x0", sys.n(), x0.len()));
    }
    if path.values[0].len() != sys.p() {
        return Err(Error::dim("control path", sys.p(), path.values[0].len()));
    }
    let k = sys.k();
    let relax = RelaxSettings {
        escape_radius: params.escape_radius,
        ..RelaxSettings::default()
    };
    let cont = ContinuationSettings {
        max_jump: params.max_jump,
        ..ContinuationSettings::default()
    };
    let settle = |x: &[f64], alpha: &[f64], t: f64| -> Result<NetworkEquilibrium> {
        match gradient_flow(sys, x, alpha, &relax) {
            Ok(x) => sys.equilibrium_at(x, alpha.to_vec()),
            Err(RelaxFailure::Escaped) => Err(escaped(t, params.escape_radius)),
            Err(RelaxFailure::Budget) => Err(Error::Precondition(format!(
                "gradient flow did not settle at t = {t}"
            ))),
        }
    };
    let sector_jumps = |a: &[f64], b: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|i| {
                let r = sys.x_range(i);
                euclid(&a[r.clone()], &b[r])
            })
            .collect()
    };

    let mut occupied = settle(x0, &path.values[0], 0.0)?;
    let mut events: Vec<CatastropheEvent> = Vec::new();
    let mut steps = Vec::new();
    if record_steps {
        steps.reserve(path.len());
        steps.push(StepRecord {
        t: path.times[0],
        alpha: path.values[0].clone(),
        x: occupied.x.clone(),
            active: Vec::new(),
            phi: 0.0,
        });
    }

    for n in 1..path.len() {
        let t = path.times[n];
        let alpha = &path.values[n];
        let mut hits: Vec<(usize, Mechanism)> = Vec::new();
        let next = match continue_equilibrium_with(sys, &occupied, alpha, &cont)? {
            Continuation::Continued(eq) if eq.is_minimum() => eq,
            Continuation::Continued(eq) => {
                let relaxed = settle(&eq.x, alpha, t)?;
                let jumps = sector_jumps(&occupied.x, &relaxed.x);
                for i in 0..k {
                    let flipped = eq.sector_signatures[i].negative_eigenvalues
                        != occupied.sector_signatures[i].negative_eigenvalues;
                    if flipped || jumps[i] > params.jump_tol {
                        hits.push((i, Mechanism::StabilityFlip));
                    }
                }
                relaxed
            }
            Continuation::Fold(_) => {
                let relaxed = settle(&occupied.x, alpha, t)?;
                let jumps = sector_jumps(&occupied.x, &relaxed.x);
                let softest = (0..k)
                    .min_by(|&a, &b| {
                        occupied.sector_signatures[a]
                            .min_abs_eigenvalue
                            .total_cmp(&occupied.sector_signatures[b].min_abs_eigenvalue)
                    })
                    .unwrap_or(0);
                for i in 0..k {
                    let soft = occupied.sector_signatures[i].min_abs_eigenvalue < params.attribution_tol;
                    if i == softest || soft || jumps[i] > params.jump_tol {
                        hits.push((i, Mechanism::FoldDisappearance));
                    }
                }
                relaxed
            }
        };

        if !hits.is_empty() {
            let diag = diagnose(sys, &occupied, params.tol_rank)?;
            for (i, mechanism) in hits {
                let r = sys.x_range(i);
                events.push(CatastropheEvent {
                    time: t,
                    step: n,
                    sector: i,
                    mechanism,
                    pre_signature: occupied.sector_signatures[i],
                    post_signature: next.sector_signatures[i],
                    jump_size: euclid(&occupied.x[r.clone()], &next.x[r]),
                    alpha: alpha.clone(),
                    diagnostics: diag.clone(),
                });
            }
        }
        occupied = next;

        if record_steps {
            let active = active_set(&events, t, params.tau_sync);
            steps.push(StepRecord {
                t,
                alpha: alpha.clone(),
                x: occupied.x.clone(),
                phi: active.len() as f64 / k as f64,
                active,
            });
        }
    }

    let graph = build_graph(sys, &events, params.tau_sync, params.angle_max);
    let apocalyptic_times = declare_apocalyptic(&events, &graph, params, k);
    Ok(CascadeReport {
        k,
        events,
        steps,
        graph,
        apocalyptic_times,
    })
}

fn declare_apocalyptic(
    events: &[CatastropheEvent],
    graph: &CatastropheGraph,
    params: &CascadeParams,
    k: usize,
) -> Vec<ApocalypticTime> {
    let comps = graph.components();
    let mut event_times: Vec<f64> = events.iter().map(|e| e.time).collect();
    event_times.dedup();
    event_times
        .into_iter()
        .filter_map(|t| {
            let active = active_set(events, t, params.tau_sync);
            if !params.threshold.is_met(active.len(), k) {
                return None;
            }
            let first = events
                .iter()
                .filter(|e| e.time <= t && e.time > t - params.tau_sync)
                .min_by(|a, b| a.time.total_cmp(&b.time).then(a.sector.cmp(&b.sector)))?
                .sector;
            let triggered = comps.iter().find(|c| c.contains(&first)).cloned().unwrap_or_default();
            let hit = comps
                .iter()
                .filter(|c| c.iter().any(|n| active.contains(n)))
                .cloned()
                .collect();
            Some(ApocalypticTime {
                time: t,
                size: active.len(),
                phi: active.len() as f64 / k as f64,
                first_sector: first,
                active,
                triggered_component: triggered,
                components_hit: hit,
            })
        })
        .collect()
}

/// Catastrophe graph: `(i, j)` is an edge iff `ε λ_ij ≠ 0`, the two sectors
/// have events within `tau_sync` of each other, and at the earlier of the two
/// events either the joint corank is at least 2 or their discriminant
/// normals are within `angle_max` degrees.
pub fn build_graph(
    sys: &NetworkSystem,
    events: &[CatastropheEvent],
    tau_sync: f64,
    angle_max: f64,
) -> CatastropheGraph {
    let k = sys.k();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if sys.coupling().weight(i, j) == 0.0 {
                continue;
            }
            let mut count = 0;
            let mut min_angle: Option<f64> = None;
            for e in events.iter().filter(|e| e.sector == i) {
                for f in events.iter().filter(|f| f.sector == j) {
                    if (e.time - f.time).abs() > tau_sync {
                        continue;
                    }
                    let earlier = if f.time < e.time { f } else { e };
                    let d = &earlier.diagnostics;
                    let angle = d.angle(i, j);
                    if d.corank >= 2 || angle.is_some_and(|a| a <= angle_max) {
                        count += 1;
                        if let Some(a) = angle {
                            min_angle = Some(min_angle.map_or(a, |m: f64| m.min(a)));
                        }
                    }
                }
            }
            if count > 0 {
                edges.push(GraphEdge {
                    i,
                    j,
                    min_alignment_angle: min_angle,
                    co_event_count: count,
                });
            }
        }
    }
    CatastropheGraph { k, edges }
}

/// Every apocalyptic time's triggered component (the component of its first
/// flipping sector in `graph`) lies inside `A(t†)`. Vacuously true without
/// apocalyptic times.
pub fn cascade_coverage_check(report: &CascadeReport, graph: &CatastropheGraph) -> bool {
    report.apocalyptic_times.iter().all(|at| {
        graph
            .component_of(at.first_sector)
            .iter()
            .all(|n| at.active.contains(n))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    pub trials: usize,
    pub preserved: usize,
    pub fraction: f64,
    pub baseline_partition: Vec<Vec<usize>>,
}

/// Reruns the scenario with control offsets and coupling entries perturbed
/// by independent uniform noise in `[−eta, eta]` and reports how often the
/// catastrophe-graph component partition is unchanged.
pub fn structural_stability_experiment(
    sys: &NetworkSystem,
    path: &ControlPath,
    x0: &[f64],
    params: &CascadeParams,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<StabilityOutcome> {
    if !(eta >= 0.0) {
        return Err(Error::Precondition("eta must be >= 0".into()));
    }
    let baseline = run_scenario_with(sys, path, x0, params, false)?.graph.components();
    let k = sys.k();
    let mut preserved = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed, trial as u64));
        let mut draw = || if eta > 0.0 { rng.random_range(-eta..=eta) } else { 0.0 };
        let offset: Vec<f64> = (0..sys.p()).map(|_| draw()).collect();
        let mut lambda = sys.coupling().lambda.clone();
        for i in 0..k {
            for j in i + 1..k {
                let v = lambda[i][j] + draw();
                lambda[i][j] = v;
                lambda[j][i] = v;
            }
        }
        let perturbed = sys.with_coupling(CouplingSpec::new(sys.coupling().epsilon, lambda)?)?;
        let same = match run_scenario_with(&perturbed, &path.shifted(&offset), x0, params, false) {
            Ok(r) => r.graph.components() == baseline,
            Err(Error::Escaped { .. }) => false,
            Err(e) => return Err(e),
        };
        preserved += usize::from(same);
    }
    Ok(StabilityOutcome {
        trials,
        preserved,
        fraction: if trials == 0 { 1.0 } else { preserved as f64 / trials as f64 },
        baseline_partition: baseline,
    })
}
