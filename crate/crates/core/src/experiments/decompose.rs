use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_and_se, replicate_seed, ExperimentConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::oracles::{primal_grad_ncsc, InnerSolveConfig, Objective, SaddleFunction};
use crate::problems::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdmaxResult {
    /// Iterate with the smallest gradient-mapping norm seen.
    pub x: Vec<f64>,
    pub mapping_norm: f64,
    /// Index of that iterate (0 is the start).
    pub best_iteration: usize,
    /// Best mapping norm after each step, nonincreasing.
    pub history: Vec<f64>,
}

/// Projected gradient descent on `Phi` with step `1/L~` and Danskin gradients,
/// keeping the iterate with the smallest `||G_Phi||`. Uses `steps` gradient evaluations.
pub fn gdmax_solver<F: SaddleFunction + ?Sized>(
    f: &F,
    start: &[f64],
    steps: usize,
    cfg: &InnerSolveConfig,
) -> Result<GdmaxResult> {
    if steps == 0 {
        return Err(Error::invalid("gdmax needs at least one step"));
    }
    let l_tilde = f.l_tilde();
    let dom = f.x_domain();
    let mut x = dom.project(start)?;
    let mut best = (f64::INFINITY, x.clone(), 0);
    let mut history = Vec::with_capacity(steps);
    for k in 0..steps {
        let g = primal_grad_ncsc(f, &x, cfg)?;
        let next = dom.project(&linalg::axpy(&x, -1.0 / l_tilde, &g))?;
        let norm = l_tilde * linalg::dist(&x, &next);
        if norm < best.0 {
            best = (norm, x.clone(), k);
        }
        history.push(best.0);
        if norm == 0.0 {
            break;
        }
        x = next;
    }
    Ok(GdmaxResult {
        x: best.1,
        mapping_norm: best.0,
        best_iteration: best.2,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub n: u64,
    /// `||grad Phi(x_out)||`
    pub population: Vec<f64>,
    /// `||grad Phi_S(x_out)||`
    pub optimization: Vec<f64>,
    /// `||grad Phi(x_out) - grad Phi_S(x_out)||`
    pub generalization: Vec<f64>,
    /// Net supremum of the gradient deviation for the same dataset.
    pub net_sup: Vec<f64>,
    pub mean_population: f64,
    pub mean_optimization: f64,
    pub mean_generalization: f64,
    pub generalization_std_error: f64,
    pub mean_net_sup: f64,
    pub net_sup_std_error: f64,
    pub triangle_violations: usize,
    /// Replicates with `generalization > net_sup + correction`.
    pub net_violations: usize,
    pub correction: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub steps: usize,
    pub rows: Vec<DecompositionRow>,
    pub passed: bool,
}

/// For each `n` and replicate: run [`gdmax_solver`] on `Phi_S` from the center of
/// `X`, then split `||grad Phi(x_out)||` into the empirical term and the
/// generalization term. Passes when the triangle inequality holds for every
/// replicate and the mean generalization term is at most the mean net supremum.
pub fn run_decomposition(cfg: &ExperimentConfig, steps: usize) -> Result<DecompositionReport> {
    cfg.validate()?;
    let instance = cfg.build_instance()?;
    let inst = instance.as_ref();
    if !inst.constants().is_strongly_concave() {
        return Err(Error::Configuration("decomposition needs mu > 0".into()));
    }
    let net = cfg.build_net(inst)?;
    let population = Objective::population(inst)?;
    let pop_net = net
        .points()
        .par_iter()
        .map(|x| primal_grad_ncsc(&population, x, &cfg.inner))
        .collect::<Result<Vec<_>>>()?;
    let start = inst.x_domain().center();
    let correction = 2.0 * inst.constants().l_tilde * net.radius();
    let rows = cfg
        .n_schedule
        .iter()
        .map(|&n| {
            let reps = (0..cfg.replications)
                .into_par_iter()
                .map(|r| {
                    let data = Dataset::draw(inst, replicate_seed(cfg.base_seed, n, r), n as usize)?;
                    let emp = Objective::empirical(inst, &data)?;
                    let out = gdmax_solver(&emp, &start, steps, &cfg.inner)?;
                    let g = primal_grad_ncsc(&population, &out.x, &cfg.inner)?;
                    let gs = primal_grad_ncsc(&emp, &out.x, &cfg.inner)?;
                    let mut sup = 0.0f64;
                    for (x, gp) in net.points().iter().zip(&pop_net) {
                        sup = sup.max(linalg::dist(gp, &primal_grad_ncsc(&emp, x, &cfg.inner)?));
                    }
                    Ok([linalg::norm(&g), linalg::norm(&gs), linalg::dist(&g, &gs), sup])
                })
                .collect::<Vec<Result<[f64; 4]>>>()
                .into_iter()
                .enumerate()
                .map(|(r, v)| v.map_err(|e| e.context(format!("decomposition n = {n}, replicate {r}"))))
                .collect::<Result<Vec<_>>>()?;
            let col = |i: usize| reps.iter().map(|v| v[i]).collect::<Vec<f64>>();
            let (population, optimization, generalization, net_sup) = (col(0), col(1), col(2), col(3));
            let tol = 1e-12;
            let triangle_violations = reps.iter().filter(|v| v[0] > v[1] + v[2] + tol * (1.0 + v[0])).count();
            let net_violations = reps.iter().filter(|v| v[2] > v[3] + correction).count();
            let (mean_generalization, generalization_std_error) = mean_and_se(&generalization);
            let (mean_net_sup, net_sup_std_error) = mean_and_se(&net_sup);
            Ok(DecompositionRow {
                n,
                mean_population: mean_and_se(&population).0,
                mean_optimization: mean_and_se(&optimization).0,
                mean_generalization,
                generalization_std_error,
                mean_net_sup,
                net_sup_std_error,
                triangle_violations,
                net_violations,
                correction,
                passed: triangle_violations == 0 && mean_generalization <= mean_net_sup,
                population,
                optimization,
                generalization,
                net_sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionReport {
        steps,
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}
