use std::path::Path;

use catnet::cascade::{cascade_coverage_check, Mechanism};
use catnet::runner::{load_config, run_single, ScenarioConfig};

fn config(name: &str) -> ScenarioConfig {
    load_config(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

#[test]
fn coupled_ramp_links_both_sectors() {
    let cfg = config("two_cusp_ramp.json");
    let report = run_single(&cfg).unwrap();
    assert_eq!(report.events.len(), 2);
    assert!(report.events.iter().all(|e| e.mechanism == Mechanism::FoldDisappearance));
    assert!((report.events[0].time - report.events[1].time).abs() <= cfg.cascade.tau_sync);
    assert_eq!(report.graph.edges.len(), 1);
    let angle = report.graph.edges[0].min_alignment_angle.unwrap();
    assert!(angle < cfg.cascade.angle_max, "angle {angle}");
    assert_eq!(report.graph.components(), vec![vec![0, 1]]);
    assert_eq!(report.apocalyptic_times.len(), 1);
    assert_eq!(report.apocalyptic_times[0].triggered_component, vec![0, 1]);
    assert!(cascade_coverage_check(&report, &report.graph));
}

#[test]
fn decoupled_ramp_has_no_edges() {
    let mut cfg = config("two_cusp_ramp.json");
    cfg.system.epsilon = 0.0;
    let report = run_single(&cfg).unwrap();
    assert_eq!(report.events.len(), 2);
    assert!(report.graph.edges.is_empty());
    assert_eq!(report.graph.components(), vec![vec![0], vec![1]]);
}

#[test]
fn single_cusp_fold_happens_at_the_analytic_locus() {
    let cfg = config("single_cusp_ramp.json");
    let report = run_single(&cfg).unwrap();
    assert_eq!(report.events.len(), 1);
    let e = &report.events[0];
    assert_eq!(e.mechanism, Mechanism::FoldDisappearance);
    assert!((e.alpha[1] - (4.0_f64 / 27.0).sqrt()).abs() <= 4.0 * cfg.path.dt);
    assert!(e.jump_size > 1.0);
}
