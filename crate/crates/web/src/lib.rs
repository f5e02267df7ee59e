//! Browser bindings for the catnet demo page. Every export returns a JSON
//! string; the `*_json` functions behind them are plain Rust so they can be
//! tested natively.

use catnet::cascade::{run_scenario, CascadeParams, Threshold};
use catnet::catastrophe::{cusp_discriminant, CriticalKind, NormalForm, SearchBox};
use catnet::control::{simulate_path, ControlPathSpec};
use catnet::copula::{kendall_tau, sample, CopulaModel, Family};
use catnet::network::NetworkSystem;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Equilibrium {
    x: f64,
    kind: CriticalKind,
}

#[derive(Serialize)]
struct CuspView {
    discriminant: f64,
    equilibria: Vec<Equilibrium>,
    /// Samples of `V(x)` on `[-2.5, 2.5]`.
    curve: Vec<[f64; 2]>,
}

pub fn cusp_json(a: f64, b: f64) -> Result<String, String> {
    let cps = NormalForm::Cusp
        .critical_points(&[a, b], SearchBox::default())
        .map_err(|e| e.to_string())?;
    let curve = (0..=200)
        .map(|i| {
            let x = -2.5 + 5.0 * i as f64 / 200.0;
            [x, NormalForm::Cusp.potential(&[x], &[a, b]).unwrap_or(f64::NAN)]
        })
        .collect();
    let view = CuspView {
        discriminant: cusp_discriminant(a, b),
        equilibria: cps
            .into_iter()
            .map(|c| Equilibrium {
                x: c.point.x[0],
                kind: c.class.kind,
            })
            .collect(),
        curve,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EventView {
    time: f64,
    sector: usize,
    jump: f64,
}

#[derive(Serialize)]
struct CascadeView {
    t: Vec<f64>,
    phi: Vec<f64>,
    x: Vec<Vec<f64>>,
    events: Vec<EventView>,
    components: Vec<Vec<usize>>,
    apocalyptic: Vec<f64>,
}

/// Two coupled cusps driven by an identity-covariance diffusion from
/// `(-1, 0, -1, 0)` for `horizon` time units.
pub fn coupled_cusps_json(epsilon: f64, lambda: f64, seed: u64, horizon: f64) -> Result<String, String> {
    let err = |e: catnet::Error| e.to_string();
    let sys = NetworkSystem::uniform(NormalForm::Cusp, 2, epsilon, lambda).map_err(err)?;
    let cov = (0..4)
        .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let spec = ControlPathSpec::diffusion(vec![0.0; 4], cov, horizon, 1e-3, seed).map_err(err)?;
    let path = simulate_path(&spec, &[-1.0, 0.0, -1.0, 0.0]).map_err(err)?;
    let params = CascadeParams {
        tau_sync: 0.01,
        threshold: Threshold::Count(2),
        ..CascadeParams::default()
    };
    let report = run_scenario(&sys, &path, &[1.0, 1.0], &params).map_err(err)?;
    let stride = (report.steps.len() / 1000).max(1);
    let kept = report.steps.iter().step_by(stride);
    let view = CascadeView {
        t: kept.clone().map(|s| s.t).collect(),
        phi: kept.clone().map(|s| s.phi).collect(),
        x: kept.map(|s| s.x.clone()).collect(),
        events: report
            .events
            .iter()
            .map(|e| EventView {
                time: e.time,
                sector: e.sector,
                jump: e.jump_size,
            })
            .collect(),
        components: report.graph.components(),
        apocalyptic: report.apocalyptic_times.iter().map(|a| a.time).collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CopulaView {
    points: Vec<[f64; 2]>,
    tau: f64,
    expected_tau: f64,
}

pub fn copula_json(family: &str, theta: f64, n: usize, seed: u64) -> Result<String, String> {
    let family = match family {
        "clayton" => Family::Clayton,
        "gumbel" => Family::Gumbel,
        "independence" => Family::Independence,
        other => return Err(format!("unknown family {other:?}")),
    };
    let model = CopulaModel::new(family, theta).map_err(|e| e.to_string())?;
    let rows = sample(&model, 2, n, seed).map_err(|e| e.to_string())?;
    let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let view = CopulaView {
        tau: kendall_tau(&x, &y).map_err(|e| e.to_string())?,
        expected_tau: model.kendall_tau(),
        points: rows.into_iter().map(|r| [r[0], r[1]]).collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn cusp(a: f64, b: f64) -> Result<String, JsError> {
    cusp_json(a, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coupled_cusps(epsilon: f64, lambda: f64, seed: u32, horizon: f64) -> Result<String, JsError> {
    coupled_cusps_json(epsilon, lambda, seed as u64, horizon).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn copula(family: &str, theta: f64, n: u32, seed: u32) -> Result<String, JsError> {
    copula_json(family, theta, n as usize, seed as u64).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn cusp_counts() {
        let v: Value = serde_json::from_str(&cusp_json(-1.0, 0.0).unwrap()).unwrap();
        assert_eq!(v["equilibria"].as_array().unwrap().len(), 3);
        let v: Value = serde_json::from_str(&cusp_json(1.0, 0.0).unwrap()).unwrap();
        assert_eq!(v["equilibria"].as_array().unwrap().len(), 1);
        assert_eq!(v["curve"].as_array().unwrap().len(), 201);
    }

    #[test]
    fn cascade_series_align() {
        let v: Value = serde_json::from_str(&coupled_cusps_json(0.3, 1.0, 4, 2.0).unwrap()).unwrap();
        let t = v["t"].as_array().unwrap().len();
        assert!(t > 0 && t <= 1001);
        assert_eq!(v["phi"].as_array().unwrap().len(), t);
    }

    #[test]
    fn copula_sample_shape() {
        let v: Value = serde_json::from_str(&copula_json("clayton", 2.0, 500, 1).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 500);
        assert_eq!(v["expected_tau"].as_f64().unwrap(), 0.5);
        assert!(copula_json("frank", 2.0, 10, 1).is_err());
    }
}
