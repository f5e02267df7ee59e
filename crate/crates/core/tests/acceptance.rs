//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use catnet::cascade::structural_stability_experiment;
use catnet::catastrophe::{cusp_discriminant, NormalForm, SearchBox};
use catnet::control::simulate_path;
use catnet::copula::{copula_cdf, kendall_tau, sample, CopulaModel};
use catnet::diagnostics::{dpi_codim, TOL_RANK};
use catnet::network::NetworkSystem;
use catnet::runner::output::sha256_hex;
use catnet::runner::{load_config, run_ensemble, run_single, write_ensemble, ScenarioConfig};
use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> ScenarioConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    load_config(p).expect("bundled config parses")
}

fn cusp_grid() -> Outcome {
    let n = 100;
    let mut mismatches = 0;
    let mut skipped = 0;
    for i in 0..n {
        for j in 0..n {
            let a = -2.0 + 4.0 * i as f64 / (n - 1) as f64;
            let b = -2.0 + 4.0 * j as f64 / (n - 1) as f64;
            let disc = cusp_discriminant(a, b);
            if disc.abs() < 1e-6 {
                skipped += 1;
                continue;
            }
            let count = NormalForm::Cusp
                .critical_points(&[a, b], SearchBox::default())
                .unwrap()
                .len();
            let expected = if disc < 0.0 { 3 } else { 1 };
            if count != expected {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches, {skipped} points on the locus skipped"),
    )
}

fn coupled_cusp_exactness() -> Outcome {
    let mut rng = rng(2);
    let mut worst_det = 0.0_f64;
    let mut worst_grad = 0.0_f64;
    for _ in 0..1000 {
        let eps = uniform_vec(&mut rng, 1, 0.0, 1.0)[0];
        let lam = uniform_vec(&mut rng, 1, -2.0, 2.0)[0];
        let sys = NetworkSystem::uniform(NormalForm::Cusp, 2, eps, lam).unwrap();
        let x = uniform_vec(&mut rng, 2, -2.0, 2.0);
        let a = uniform_vec(&mut rng, 4, -2.0, 2.0);
        let g = sys.gradient(&x, &a).unwrap();
        let g1 = x[0].powi(3) + a[0] * x[0] + a[1] + eps * lam * x[1];
        let g2 = x[1].powi(3) + a[2] * x[1] + a[3] + eps * lam * x[0];
        worst_grad = worst_grad.max((g[0] - g1).abs()).max((g[1] - g2).abs());
        let det = sys.hessian(&x, &a).unwrap().determinant();
        let closed = (3.0 * x[0] * x[0] + a[0]) * (3.0 * x[1] * x[1] + a[2]) - (eps * lam).powi(2);
        worst_det = worst_det.max((det - closed).abs());
    }
    outcome(
        worst_det <= 1e-12 && worst_grad <= 1e-12,
        format!("max |det error| {worst_det:.2e}, max |gradient error| {worst_grad:.2e}"),
    )
}

fn worst_derivative_error(sys: &NetworkSystem, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let x = uniform_vec(rng, sys.n(), -1.5, 1.5);
        let a = uniform_vec(rng, sys.p(), -1.5, 1.5);
        let g = sys.gradient(&x, &a).unwrap();
        let fd = fd_gradient(|y| sys.potential(y, &a).unwrap(), &x, 1e-5);
        for (u, v) in g.iter().zip(&fd) {
            worst = worst.max(rel_err(*u, *v));
        }
        let h = sys.hessian(&x, &a).unwrap();
        let fdh = fd_jacobian(|y| sys.gradient(y, &a).unwrap(), &x, 1e-5);
        for (u, v) in h.iter().zip(fdh.iter()) {
            worst = worst.max(rel_err(*u, *v));
        }
    }
    worst
}

fn derivative_checks() -> Outcome {
    let mut rng = rng(3);
    let mut worst = 0.0_f64;
    for form in NormalForm::ALL {
        let sys = system(&[form], 0.0, 0.0);
        worst = worst.max(worst_derivative_error(&sys, &mut rng));
    }
    for k in 2..=4 {
        let forms: Vec<NormalForm> = (0..k).map(|i| NormalForm::ALL[(i * 3 + k) % 7]).collect();
        let sys = system(&forms, 0.4, -0.8);
        worst = worst.max(worst_derivative_error(&sys, &mut rng));
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e}"))
}

fn fold_timing() -> Outcome {
    let cfg = config("single_cusp_ramp.json");
    let report = run_single(&cfg).unwrap();
    let Some(e) = report.events.first() else {
        return outcome(false, "no event detected");
    };
    let b = e.alpha[1];
    let expected = (4.0_f64 / 27.0).sqrt();
    let tol = 2.0 * 2.0 * cfg.path.dt;
    outcome(
        (b - expected).abs() <= tol && report.events.len() == 1,
        format!(
            "event at b = {b:.5}, expected {expected:.5} ± {tol}, {} events",
            report.events.len()
        ),
    )
}

fn hitting() -> Outcome {
    let cfg = config("two_cusp_diffusion.json");
    let run = run_ensemble(&cfg).unwrap();
    let s = &run.summary.stats;
    outcome(
        s.hitting_fraction >= 0.99,
        format!(
            "hitting fraction {:.4} over {} replicates ({} aborted)",
            s.hitting_fraction, s.replicates, s.aborted
        ),
    )
}

fn synchronization_and_coverage() -> (Outcome, Outcome) {
    let mut coupled = config("two_cusp_diffusion.json");
    coupled.ensemble.replicates = 500;
    let mut uncoupled = coupled.clone();
    uncoupled.system.epsilon = 0.0;
    let run1 = run_ensemble(&coupled).unwrap();
    let run0 = run_ensemble(&uncoupled).unwrap();
    let (s1, s0) = (&run1.summary.stats, &run0.summary.stats);
    let n1 = (s1.replicates - s1.aborted) as f64;
    let n0 = (s0.replicates - s0.aborted) as f64;
    let (p1, p0) = (s1.co_event_rate, s0.co_event_rate);
    let se = (p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0).sqrt();
    let gap = p1 - p0;
    let sync = outcome(
        gap - 1.96 * se > 0.0,
        format!("co-event rate {p1:.4} (ελ = 0.3) vs {p0:.4} (ελ = 0), gap {gap:.4}, 1.96·SE {:.4}", 1.96 * se),
    );

    for (d, report) in run1.summary.digests.iter().zip(&run1.reports) {
        if d.coverage_ok == Some(false) {
            let r = report.as_ref().unwrap();
            let angles: Vec<Option<f64>> = r.events.iter().map(|e| e.diagnostics.angle(0, 1)).collect();
            eprintln!(
                "  coverage miss: replicate {} seed {} events {} angles {:?} components {:?}",
                d.replicate,
                d.seed,
                r.events.len(),
                angles,
                r.graph.components()
            );
        }
    }
    let cov = match s1.coverage_fraction {
        Some(c) => outcome(
            c >= 0.9,
            format!(
                "coverage {c:.4} among {:.0} replicates with an apocalyptic time",
                s1.apocalyptic_fraction * n1
            ),
        ),
        None => outcome(false, "no replicate reached an apocalyptic time"),
    };
    (sync, cov)
}

fn dpi_oracle() -> Outcome {
    let mut bad = Vec::new();
    let mut lines = Vec::new();
    for (label, sys, x, a) in dpi_fixtures() {
        let g = sys.gradient(&x, &a).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{label} is not an equilibrium");
        let eq = sys.equilibrium_at(x.clone(), a.clone()).unwrap();
        let ours = dpi_codim(&sys, &eq, TOL_RANK).unwrap();
        let oracle = brute_force_dpi_codim(&sys, &x, &a, 1e-6);
        lines.push(format!("{label}: {ours}"));
        if ours != oracle {
            bad.push(format!("{label}: {ours} vs oracle {oracle}"));
        }
    }
    let double = dpi_fixtures()
        .into_iter()
        .find(|f| f.0 == "double cusp point")
        .map(|(_, sys, x, a)| dpi_codim(&sys, &sys.equilibrium_at(x, a).unwrap(), TOL_RANK).unwrap());
    outcome(
        bad.is_empty() && double == Some(2),
        if bad.is_empty() {
            format!("all {} fixtures agree ({})", lines.len(), lines.join(", "))
        } else {
            bad.join("; ")
        },
    )
}

fn copula_identities() -> Outcome {
    let mut worst_margin = 0.0_f64;
    for model in [CopulaModel::clayton(2.0).unwrap(), CopulaModel::gumbel(3.0).unwrap()] {
        for i in 0..=20 {
            let u = i as f64 / 20.0;
            let c = copula_cdf(&model, &[u, 1.0]).unwrap();
            worst_margin = worst_margin.max((c - u).abs());
        }
    }
    let c = copula_cdf(&CopulaModel::clayton(2.0).unwrap(), &[0.5, 0.5]).unwrap();
    let point_err = (c - 7f64.powf(-0.5)).abs();
    let mut worst_tau = 0.0_f64;
    let mut lines = Vec::new();
    for (i, model) in [
        CopulaModel::clayton(1.0).unwrap(),
        CopulaModel::clayton(2.0).unwrap(),
        CopulaModel::clayton(5.0).unwrap(),
        CopulaModel::gumbel(1.5).unwrap(),
        CopulaModel::gumbel(2.0).unwrap(),
        CopulaModel::gumbel(5.0).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let s = sample(&model, 2, 10_000, 100 + i as u64).unwrap();
        let x: Vec<f64> = s.iter().map(|r| r[0]).collect();
        let y: Vec<f64> = s.iter().map(|r| r[1]).collect();
        let tau = kendall_tau(&x, &y).unwrap();
        let err = (tau - model.kendall_tau()).abs();
        worst_tau = worst_tau.max(err);
        lines.push(format!("{:?}({}) {tau:.3}", model.family, model.theta));
    }
    outcome(
        worst_margin <= 1e-12 && point_err <= 1e-12 && worst_tau <= 0.02,
        format!(
            "|C(u,1) - u| ≤ {worst_margin:.1e}, |C(½,½) - 7^-½| = {point_err:.1e}, max tau error {worst_tau:.4} [{}]",
            lines.join(", ")
        ),
    )
}

fn stability() -> Outcome {
    let cfg = config("two_cusp_ramp.json");
    let sys = cfg.system().unwrap();
    let path = simulate_path(&cfg.path, &cfg.alpha0).unwrap();
    let out =
        structural_stability_experiment(&sys, &path, &cfg.x0(&sys), &cfg.cascade, 1e-3, 100, 7).unwrap();
    outcome(
        out.fraction >= 0.95,
        format!(
            "partition {:?} preserved in {}/{} trials",
            out.baseline_partition, out.preserved, out.trials
        ),
    )
}

fn tree_hashes(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let h = sha256_hex(&std::fs::read(&p).unwrap());
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), h));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let mut results = Vec::new();
    for (name, logs) in [("two_cusp_diffusion.json", false), ("two_cusp_ramp.json", true)] {
        let mut cfg = config(name);
        cfg.output.replicate_logs = logs;
        let mut hashes = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            write_ensemble(&run_ensemble(&cfg).unwrap(), dir.path()).unwrap();
            hashes.push(tree_hashes(dir.path()));
        }
        results.push((name, hashes[0].len(), hashes[0] == hashes[1]));
    }
    outcome(
        results.iter().all(|r| r.2 && r.1 > 0),
        results
            .iter()
            .map(|(n, files, same)| format!("{n}: {files} files {}", if *same { "identical" } else { "DIFFER" }))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn report(n: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    finish(n, name, limit, start.elapsed(), o)
}

fn finish(n: usize, name: &str, limit: Option<Duration>, took: Duration, o: Outcome) -> bool {
    let in_time = limit.is_none_or(|l| took <= l);
    let pass = o.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / {:.0}s", l.as_secs_f64()));
    println!(
        "{} {n:>2} {name}: {} [{:.2}s{budget}]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        took.as_secs_f64()
    );
    pass
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut ok = true;
    ok &= report(1, "cusp count vs discriminant", secs(5), cusp_grid);
    ok &= report(2, "coupled-cusp exactness", secs(1), coupled_cusp_exactness);
    ok &= report(3, "derivative checks", secs(10), derivative_checks);
    ok &= report(4, "fold timing", secs(1), fold_timing);
    ok &= report(5, "hitting evidence", secs(120), hitting);
    let start = Instant::now();
    let (sync, cov) = synchronization_and_coverage();
    let took = start.elapsed();
    ok &= finish(6, "synchronization under coupling", secs(300), took, sync);
    ok &= finish(7, "coverage", None, took, cov);
    ok &= report(8, "dpi codim oracle", None, dpi_oracle);
    ok &= report(9, "copula identities", secs(30), copula_identities);
    ok &= report(10, "structural stability", secs(60), stability);
    ok &= report(11, "determinism", None, determinism);
    if !ok {
        std::process::exit(1);
    }
}
