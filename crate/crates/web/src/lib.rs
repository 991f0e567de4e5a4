//! wasm-bindgen bindings behind `www/index.html`. Every export returns a JSON
//! string so the page only needs `JSON.parse`; seeds are `u32` to stay JS numbers.

use serde_json::json;
use uclab::bounds::{sample_size_ncc, sample_size_ncsc};
use uclab::experiments::{estimate_uniform_convergence_ncsc, fit_rate, ExperimentConfig};
use uclab::oracles::{primal_value, prox_point, InnerSolveConfig, Objective};
use uclab::problems::{make_sin_bilinear_ncc, Family, FamilySpec, MinimaxInstance};
use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// `Phi`, its Moreau envelope, the prox point and `||grad Phi^lambda||` along
/// `X = [-1, 1]` for the 1-d NC-C sin-bilinear family with instance seed `seed`.
/// `lambda_scale` is `lambda L`, in (0, 1).
pub fn moreau_profile_json(lambda_scale: f64, points: usize, seed: u64) -> Result<String, String> {
    if !(lambda_scale > 0.0 && lambda_scale < 1.0) {
        return Err(format!("lambda L must lie in (0, 1), got {lambda_scale}"));
    }
    if !(2..=2000).contains(&points) {
        return Err(format!("points must be in 2..=2000, got {points}"));
    }
    let inst = make_sin_bilinear_ncc(1, 1, 1.0, 1.0, seed).map_err(|e| e.to_string())?;
    let pop = Objective::population(&inst).map_err(|e| e.to_string())?;
    let lambda = lambda_scale / inst.constants().l;
    let cfg = InnerSolveConfig::default();
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let x = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
        let phi = primal_value(&pop, &[x], &cfg).map_err(|e| e.to_string())?;
        let p = prox_point(&pop, &[x], lambda, &cfg).map_err(|e| e.to_string())?;
        rows.push(json!({
            "x": x,
            "phi": phi,
            "envelope": p.envelope_value(),
            "prox": p.prox_point()[0],
            "moreau_grad": p.moreau_grad()[0],
        }));
    }
    Ok(json!({"lambda": lambda, "l": inst.constants().l, "rows": rows}).to_string())
}

/// Small NC-SC uniform-convergence curve (d = 2) with its log-log slope.
pub fn convergence_curve_json(replications: usize, net_radius: f64, seed: u64) -> Result<String, String> {
    if !(2..=200).contains(&replications) {
        return Err(format!("replications must be in 2..=200, got {replications}"));
    }
    if !(0.05..=1.0).contains(&net_radius) {
        return Err(format!("net radius must be in [0.05, 1], got {net_radius}"));
    }
    let mut cfg = ExperimentConfig::new(FamilySpec {
        family: Family::SinBilinearNcsc,
        d: 2,
        d_prime: Some(2),
        mu: 1.0,
        radius_x: 1.0,
        radius_y: 4.0,
        seed: 1,
        rho: None,
    });
    cfg.replications = replications;
    cfg.net.radius = net_radius;
    cfg.base_seed = seed;
    cfg.n_schedule = vec![16, 64, 256, 1024, 4096];
    let curve = estimate_uniform_convergence_ncsc(&cfg).map_err(|e| e.to_string())?;
    let fit = fit_rate(&curve).map_err(|e| e.to_string())?;
    let rows: Vec<_> = curve
        .rows
        .iter()
        .map(|r| json!({"n": r.n, "mean": r.mean, "std_error": r.std_error}))
        .collect();
    Ok(json!({
        "net_size": curve.net_size,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "slope_std_error": fit.slope_std_error,
        "rows": rows,
    })
    .to_string())
}

/// Sample sizes for both settings; `mu` is ignored for NC-C.
pub fn sample_size_json(d: usize, eps: f64, l: f64, mu: f64, g: f64, d_x: f64, d_y: f64) -> Result<String, String> {
    let ncsc = sample_size_ncsc(d, eps, l, mu, g).map_err(|e| e.to_string());
    let ncc = sample_size_ncc(d, eps, l, g, d_x, d_y).map_err(|e| e.to_string());
    Ok(json!({
        "ncsc": match ncsc { Ok(n) => json!({"n": n}), Err(e) => json!({"error": e}) },
        "ncc": match ncc {
            Ok(s) => json!({"n": s.n, "nu": s.nu, "lambda": s.lambda, "upsilon": s.upsilon}),
            Err(e) => json!({"error": e}),
        },
    })
    .to_string())
}

#[wasm_bindgen]
pub fn moreau_profile(lambda_scale: f64, points: usize, seed: u32) -> Result<String, JsError> {
    js(moreau_profile_json(lambda_scale, points, seed.into()))
}

#[wasm_bindgen]
pub fn convergence_curve(replications: usize, net_radius: f64, seed: u32) -> Result<String, JsError> {
    js(convergence_curve_json(replications, net_radius, seed.into()))
}

#[wasm_bindgen]
pub fn sample_size(d: usize, eps: f64, l: f64, mu: f64, g: f64, d_x: f64, d_y: f64) -> Result<String, JsError> {
    js(sample_size_json(d, eps, l, mu, g, d_x, d_y))
}
