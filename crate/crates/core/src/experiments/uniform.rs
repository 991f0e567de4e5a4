use rayon::prelude::*;

use super::{mean_and_se, replicate_seed, ConvergenceCurve, CurveRow, ExperimentConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::oracles::{primal_grad_ncsc, prox_point, Objective, SaddleFunction};
use crate::problems::{Dataset, MinimaxInstance};

/// Net supremum of `||grad Phi(x) - grad Phi_S(x)||`, averaged over replicates,
/// for every `n` in the schedule.
pub fn estimate_uniform_convergence_ncsc(cfg: &ExperimentConfig) -> Result<ConvergenceCurve> {
    cfg.validate()?;
    let instance = cfg.build_instance()?;
    let net = cfg.build_net(instance.as_ref())?;
    let mut curve = estimate_uniform_convergence_ncsc_on(instance.as_ref(), net.points(), cfg)?;
    curve.net_radius = net.radius();
    for row in &mut curve.rows {
        row.correction = 2.0 * instance.constants().l_tilde * net.radius();
    }
    Ok(curve)
}

/// As [`estimate_uniform_convergence_ncsc`] over explicit points; corrections are left at 0.
pub fn estimate_uniform_convergence_ncsc_on(
    instance: &dyn MinimaxInstance,
    points: &[Vec<f64>],
    cfg: &ExperimentConfig,
) -> Result<ConvergenceCurve> {
    if !instance.constants().is_strongly_concave() {
        return Err(Error::Configuration(format!(
            "{} is not strongly concave; use the NC-C estimator",
            instance.family()
        )));
    }
    let population = Objective::population(instance)?;
    let pop_grads = points
        .par_iter()
        .map(|x| primal_grad_ncsc(&population, x, &cfg.inner))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context("population gradients"))?;
    let rows = cfg
        .n_schedule
        .iter()
        .map(|&n| {
            let sups = (0..cfg.replications)
                .into_par_iter()
                .map(|r| {
                    let data = Dataset::draw(instance, replicate_seed(cfg.base_seed, n, r), n as usize)?;
                    let emp = Objective::empirical(instance, &data)?;
                    let mut sup = 0.0f64;
                    for (x, g) in points.iter().zip(&pop_grads) {
                        let gs = primal_grad_ncsc(&emp, x, &cfg.inner)?;
                        sup = sup.max(linalg::dist(g, &gs));
                    }
                    Ok(sup)
                })
                .collect::<Vec<Result<f64>>>()
                .into_iter()
                .enumerate()
                .map(|(r, v)| v.map_err(|e| e.context(format!("n = {n}, replicate {r}"))))
                .collect::<Result<Vec<f64>>>()?;
            Ok(row(n, sups, cfg.inner.max_iterations, 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceCurve {
        setting: "ncsc".into(),
        net_size: points.len(),
        net_radius: 0.0,
        lambda: None,
        rows,
    })
}

/// Net supremum of `||grad Phi^lambda(x) - grad Phi_S^lambda(x)||
/// = ||prox_{lambda Phi}(x) - prox_{lambda Phi_S}(x)|| / lambda`.
pub fn estimate_uniform_convergence_ncc(cfg: &ExperimentConfig) -> Result<ConvergenceCurve> {
    cfg.validate()?;
    let instance = cfg.build_instance()?;
    let net = cfg.build_net(instance.as_ref())?;
    let mut curve = estimate_uniform_convergence_ncc_on(instance.as_ref(), net.points(), cfg)?;
    let lambda = curve.lambda.expect("set by the estimator");
    let l = instance.constants().l;
    curve.net_radius = net.radius();
    for row in &mut curve.rows {
        row.correction = 2.0 * net.radius() / (lambda * (1.0 - lambda * l));
    }
    Ok(curve)
}

/// As [`estimate_uniform_convergence_ncc`] over explicit points; corrections are left at 0.
pub fn estimate_uniform_convergence_ncc_on(
    instance: &dyn MinimaxInstance,
    points: &[Vec<f64>],
    cfg: &ExperimentConfig,
) -> Result<ConvergenceCurve> {
    if instance.constants().mu != 0.0 {
        return Err(Error::Configuration(format!(
            "the NC-C estimator expects mu = 0, got {}",
            instance.constants().mu
        )));
    }
    let lambda = cfg.lambda_for(instance);
    let population = Objective::population(instance)?;
    let pop_prox = points
        .par_iter()
        .map(|x| prox_point(&population, x, lambda, &cfg.prox).map(|p| p.prox_point().to_vec()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context("population prox points"))?;
    let rows = cfg
        .n_schedule
        .iter()
        .map(|&n| {
            let sups = (0..cfg.replications)
                .into_par_iter()
                .map(|r| {
                    let data = Dataset::draw(instance, replicate_seed(cfg.base_seed, n, r), n as usize)?;
                    let emp = Objective::empirical(instance, &data)?;
                    let mut sup = 0.0f64;
                    for (x, p) in points.iter().zip(&pop_prox) {
                        let ps = prox_point(&emp, x, lambda, &cfg.prox)?;
                        sup = sup.max(linalg::dist(p, ps.prox_point()) / lambda);
                    }
                    Ok(sup)
                })
                .collect::<Vec<Result<f64>>>()
                .into_iter()
                .enumerate()
                .map(|(r, v)| v.map_err(|e| e.context(format!("n = {n}, replicate {r}"))))
                .collect::<Result<Vec<f64>>>()?;
            Ok(row(n, sups, cfg.prox.max_iterations, 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(population.smoothness() * lambda < 1.0);
    Ok(ConvergenceCurve {
        setting: "ncc".into(),
        net_size: points.len(),
        net_radius: 0.0,
        lambda: Some(lambda),
        rows,
    })
}

fn row(n: u64, replicates: Vec<f64>, budget: usize, correction: f64) -> CurveRow {
    let (mean, std_error) = mean_and_se(&replicates);
    CurveRow {
        n,
        mean,
        std_error,
        per_point_solver_budget: budget,
        correction,
        replicates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::InnerSolveConfig;
    use crate::problems::{Family, FamilySpec, SamplePoint};

    fn ncsc_config() -> ExperimentConfig {
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
        cfg.net.radius = 0.3;
        cfg.n_schedule = vec![64, 256, 1024];
        cfg.replications = 20;
        cfg
    }

    #[test]
    fn deterministic_replicates() {
        let mut cfg = ncsc_config();
        cfg.replications = 2;
        let a = estimate_uniform_convergence_ncsc(&cfg).unwrap();
        let b = estimate_uniform_convergence_ncsc(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3);
        assert!(a.rows.iter().all(|r| r.correction > 0.0 && r.replicates.len() == 2));
    }

    #[test]
    fn quadrupling_n_halves_the_mean() {
        let curve = estimate_uniform_convergence_ncsc(&ncsc_config()).unwrap();
        for w in curve.rows.windows(2) {
            let ratio = w[1].mean / w[0].mean;
            let se = (w[1].std_error / w[0].mean).hypot(w[0].std_error * w[1].mean / (w[0].mean * w[0].mean));
            assert!((ratio - 0.5).abs() <= 2.0 * se, "ratio {ratio}, se {se}");
        }
    }

    #[test]
    fn single_point_single_sample_matches_closed_form() {
        let mut cfg = ncsc_config();
        cfg.n_schedule = vec![1];
        cfg.replications = 2;
        let inst = cfg.build_instance().unwrap();
        let x = vec![0.2, -0.3];
        let curve = estimate_uniform_convergence_ncsc_on(inst.as_ref(), std::slice::from_ref(&x), &cfg).unwrap();
        for (r, sup) in curve.rows[0].replicates.iter().enumerate() {
            let xi: SamplePoint = inst.sample(replicate_seed(cfg.base_seed, 1, r), 0);
            let y = inst.argmax_y(&x, &xi, 0.0).unwrap();
            let g_xi = inst.grad_x(&x, &y, &xi);
            let pop = inst.population_sample().unwrap();
            let g_pop = inst.grad_x(&x, &inst.argmax_y(&x, &pop, 0.0).unwrap(), &pop);
            assert!((linalg::dist(&g_xi, &g_pop) - sup).abs() < 1e-12);
        }
    }

    #[test]
    fn ncc_curve_runs_and_rejects_the_ncsc_estimator() {
        let mut cfg = ExperimentConfig::new(FamilySpec {
            family: Family::SinBilinearNcc,
            d: 1,
            d_prime: Some(1),
            mu: 0.0,
            radius_x: 1.0,
            radius_y: 1.0,
            seed: 3,
            rho: None,
        });
        cfg.n_schedule = vec![16, 64, 256];
        cfg.replications = 4;
        cfg.net.radius = 0.25;
        cfg.prox = InnerSolveConfig::default();
        let curve = estimate_uniform_convergence_ncc(&cfg).unwrap();
        assert_eq!(curve.setting, "ncc");
        assert!(curve.rows.iter().all(|r| r.mean > 0.0));
        assert!(estimate_uniform_convergence_ncsc(&cfg).is_err());
    }
}
