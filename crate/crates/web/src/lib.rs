//! Browser bindings for the stabilization library. Every export returns a
//! JSON string; errors are returned as `{"error": "..."}`.

use serde_json::{json, Value};
use stabilize_core::experiments::default_truth;
use stabilize_core::linalg::to_rows;
use stabilize_core::rng::{substream, RoleStreams};
use stabilize_core::stabilizer::{explore, run_algorithm1, StabilizationConfig};
use stabilize_core::Result;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 1500;

fn config(tau: f64, n: u32, sigma_l: f64, sigma_eta: f64, r: f64, seed: u32) -> StabilizationConfig {
    let mut cfg = StabilizationConfig::new(3, 2);
    cfg.tau = tau;
    cfg.n_periods = n as usize;
    cfg.sigma_l = sigma_l;
    cfg.sigma_eta = sigma_eta;
    cfg.r_weight *= r;
    cfg.seed = u64::from(seed);
    cfg
}

fn respond(result: Result<Value>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Exploration trajectory, thinned to at most 1500 points.
#[wasm_bindgen]
pub fn simulate_run(tau: f64, n: u32, sigma_l: f64, sigma_eta: f64, seed: u32) -> String {
    respond((|| {
        let truth = default_truth();
        let cfg = config(tau, n, sigma_l, sigma_eta, 1.0, seed);
        let mut streams = RoleStreams::split(&mut substream(u64::from(seed), 0, 0));
        let ex = explore(&truth, &cfg, &mut streams)?;
        let traj = &ex.trajectory;
        let stride = (traj.times.len() / MAX_POINTS).max(1);
        let idx: Vec<usize> = (0..traj.times.len()).step_by(stride).collect();
        Ok(json!({
            "t": idx.iter().map(|&k| traj.times[k]).collect::<Vec<_>>(),
            "x": idx.iter().map(|&k| traj.state(k).to_vec()).collect::<Vec<_>>(),
            "overflowed": traj.overflowed,
            "feedbacks": ex.feedbacks.iter().map(to_rows).collect::<Vec<_>>(),
        }))
    })())
}

/// One full stabilization run.
#[wasm_bindgen]
pub fn run_once(tau: f64, n: u32, sigma_l: f64, sigma_eta: f64, r: f64, seed: u32) -> String {
    respond((|| {
        let cfg = config(tau, n, sigma_l, sigma_eta, r, seed);
        let outcome = run_algorithm1(&default_truth(), &cfg, &mut substream(u64::from(seed), 0, 0))?;
        Ok(serde_json::to_value(outcome).expect("outcome serializes"))
    })())
}

/// Success rate over `replicates` runs at each horizon in `taus`
/// (comma separated).
#[wasm_bindgen]
pub fn success_curve(taus: &str, n: u32, sigma_l: f64, sigma_eta: f64, replicates: u32, seed: u32) -> String {
    respond((|| {
        let truth = default_truth();
        let mut points = Vec::new();
        for (grid, field) in taus.split(',').map(str::trim).filter(|s| !s.is_empty()).enumerate() {
            let tau: f64 = field
                .parse()
                .map_err(|_| stabilize_core::Error::Config(format!("bad horizon '{field}'")))?;
            let cfg = config(tau, n, sigma_l, sigma_eta, 1.0, seed);
            let mut success = 0;
            for rep in 0..replicates {
                let out = run_algorithm1(&truth, &cfg, &mut substream(u64::from(seed), grid as u32, rep))?;
                success += usize::from(out.success);
            }
            points.push(json!({ "tau": tau, "success_rate": success as f64 / f64::from(replicates.max(1)) }));
        }
        Ok(Value::Array(points))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exports_return_json() {
        let v: Value = serde_json::from_str(&simulate_run(2.0, 2, 1.0, 1.0, 1)).unwrap();
        assert_eq!(v["t"].as_array().unwrap().len(), v["x"].as_array().unwrap().len());
        let v: Value = serde_json::from_str(&run_once(4.0, 4, 1.0, 1.0, 1.0, 1)).unwrap();
        assert!(v["success"].is_boolean());
        let v: Value = serde_json::from_str(&success_curve("2, 4", 4, 1.0, 1.0, 3, 0)).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
    }

    #[test]
    fn errors_are_reported_in_json() {
        let v: Value = serde_json::from_str(&run_once(-1.0, 4, 1.0, 1.0, 1.0, 1)).unwrap();
        assert!(v["error"].is_string());
        let v: Value = serde_json::from_str(&success_curve("x", 4, 1.0, 1.0, 3, 0)).unwrap();
        assert!(v["error"].is_string());
    }
}
