use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{replicate_seed, ExperimentConfig};
use crate::bounds::{prox_reg_bound, stability_y_bound, subgaussian_variance_proxy_ncsc};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::oracles::{
    brute_force_prox_grid, mapping_from_gradient, primal_grad_ncsc, prox_point, solve_inner, InnerSolveConfig,
    Objective, SaddleFunction,
};
use crate::problems::{derive_seed, sample_rng, Dataset, MinimaxInstance};

/// Absolute floor added to inequality checks whose right side can vanish.
const ABS_FLOOR: f64 = 1e-12;

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs <= ABS_FLOOR {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: u64,
    pub trials: usize,
    pub bound: f64,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    pub max_ratio: f64,
    pub slack: f64,
    pub violations: usize,
    pub passed: bool,
}

/// Replace one sample and measure how far the empirical maximizer moves,
/// against `4G/(mu n)`.
pub fn verify_stability(
    instance: &dyn MinimaxInstance,
    x: &[f64],
    n: u64,
    trials: usize,
    seed: u64,
    cfg: &InnerSolveConfig,
    slack: f64,
) -> Result<StabilityReport> {
    let c = instance.constants();
    let bound = stability_y_bound(c.g, c.mu, n)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let deviations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let t = t as u64;
            let data = Dataset::draw(instance, derive_seed(&[seed, n, t]), n as usize)?;
            let i = sample_rng(derive_seed(&[seed, n, t, 1]), 0).random_range(0..n as usize);
            let fresh = instance.sample(derive_seed(&[seed, n, t, 2]), 0);
            let swapped = data.replace(i, fresh)?;
            let y = solve_inner(&Objective::empirical(instance, &data)?, x, cfg)?.y;
            let y_swapped = solve_inner(&Objective::empirical(instance, &swapped)?, x, cfg)?.y;
            Ok(linalg::dist(&y, &y_swapped))
        })
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| e.context(format!("stability at n = {n}")))?;
    let max_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    let violations = deviations.iter().filter(|d| **d > slack * bound).count();
    Ok(StabilityReport {
        n,
        trials,
        bound,
        mean_deviation: deviations.iter().sum::<f64>() / trials as f64,
        max_deviation,
        max_ratio: max_deviation / bound,
        slack,
        violations,
        passed: violations == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCase {
    pub x: Vec<f64>,
    pub nu: f64,
    /// `||prox_{lambda Phi}(x) - prox_{lambda Phi_hat}(x)||^2`
    pub squared_distance: f64,
    pub bound_squared: f64,
    pub ratio: f64,
    /// Same distance computed from the grid oracle, when run.
    pub grid_squared_distance: Option<f64>,
    /// Largest gap between solver and grid prox points for this case.
    pub grid_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lambda: f64,
    pub l: f64,
    pub d_y: f64,
    pub cases: Vec<LemmaCase>,
    pub max_ratio: f64,
    pub violations: usize,
    pub slack: f64,
    pub grid_resolution: Option<f64>,
    /// Allowed solver/grid disagreement given the grid resolution.
    pub grid_tolerance: Option<f64>,
    pub grid_agrees: bool,
    pub passed: bool,
}

/// Distance between proximal points of `Phi` and of its `nu`-regularized version
/// against `nu D_Y lambda / (1 - lambda (L + nu))`, on the population objective.
pub fn verify_prox_reg_lemma(
    instance: &dyn MinimaxInstance,
    x_list: &[Vec<f64>],
    nu_list: &[f64],
    lambda: f64,
    cfg: &InnerSolveConfig,
    slack: f64,
    grid_resolution: Option<f64>,
) -> Result<LemmaReport> {
    let c = instance.constants();
    if c.mu != 0.0 {
        return Err(Error::Configuration(format!(
            "the regularization lemma check expects mu = 0, got {}",
            c.mu
        )));
    }
    let nu_max = nu_list.iter().cloned().fold(0.0, f64::max);
    if !(lambda > 0.0 && lambda * (c.l + nu_max) < 1.0) {
        return Err(Error::invalid(format!(
            "lambda = {lambda} must be below 1/(L + max nu) = {}",
            1.0 / (c.l + nu_max)
        )));
    }
    let d = instance.x_domain().dim();
    let grid = grid_resolution.filter(|_| d <= 3);
    let population = Objective::population(instance)?;
    // grid prox error: value gap of the nearest grid point, converted with strong convexity m
    let m = 1.0 / lambda - c.l - nu_max;
    let grid_tolerance = grid.map(|h| {
        let delta = 0.5 * h * (d as f64).sqrt();
        let slope = c.g + instance.x_domain().diameter() / lambda;
        let err = slope * delta + delta * delta / (2.0 * lambda);
        (2.0 * err / m).sqrt() + cfg.tolerance
    });
    let prox = |f: &Objective, x: &[f64]| -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let p = prox_point(f, x, lambda, cfg)?.prox_point().to_vec();
        let g = match grid {
            Some(h) => Some(brute_force_prox_grid(f, x, lambda, h, cfg)?),
            None => None,
        };
        Ok((p, g))
    };
    let cases = x_list
        .par_iter()
        .map(|x| {
            check_dim(d, x.len())?;
            let (p, pg) = prox(&population, x)?;
            nu_list
                .iter()
                .map(|&nu| {
                    let (q, qg) = if nu == 0.0 {
                        (p.clone(), pg.clone())
                    } else {
                        prox(&population.regularized(nu)?, x)?
                    };
                    let squared_distance = linalg::norm_sq(&linalg::sub(&p, &q));
                    let bound_squared = prox_reg_bound(nu, c.d_y, lambda, c.l)?.powi(2);
                    let (grid_squared_distance, grid_discrepancy) = match (&pg, &qg) {
                        (Some(a), Some(b)) => (
                            Some(linalg::norm_sq(&linalg::sub(a, b))),
                            Some(linalg::dist(a, &p).max(linalg::dist(b, &q))),
                        ),
                        _ => (None, None),
                    };
                    Ok(LemmaCase {
                        x: x.clone(),
                        nu,
                        squared_distance,
                        bound_squared,
                        ratio: ratio(squared_distance, bound_squared),
                        grid_squared_distance,
                        grid_discrepancy,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let violations = cases
        .iter()
        .filter(|k| k.squared_distance > slack * k.bound_squared + ABS_FLOOR)
        .count();
    let grid_agrees = match grid_tolerance {
        Some(tol) => cases.iter().all(|k| k.grid_discrepancy.is_some_and(|g| g <= tol)),
        None => true,
    };
    Ok(LemmaReport {
        lambda,
        l: c.l,
        d_y: c.d_y,
        max_ratio: cases.iter().map(|k| k.ratio).fold(0.0, f64::max),
        cases,
        violations,
        slack,
        grid_resolution: grid,
        grid_tolerance,
        grid_agrees,
        passed: violations == 0 && grid_agrees,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MappingReport {
    /// Point evaluations performed (net points times datasets).
    pub evaluations: usize,
    pub violations: usize,
    /// Points where the two sides agree to rounding (interior behaviour).
    pub equalities: usize,
    pub max_ratio: f64,
    pub max_mapping_diff: f64,
    pub max_gradient_diff: f64,
    pub slack: f64,
    pub passed: bool,
}

impl MappingReport {
    fn merge(mut self, other: MappingReport) -> MappingReport {
        self.evaluations += other.evaluations;
        self.violations += other.violations;
        self.equalities += other.equalities;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        self.max_mapping_diff = self.max_mapping_diff.max(other.max_mapping_diff);
        self.max_gradient_diff = self.max_gradient_diff.max(other.max_gradient_diff);
        self.passed = self.violations == 0;
        self
    }
}

/// `||G_Phi(x) - G_{Phi_S}(x)|| <= ||grad Phi(x) - grad Phi_S(x)||` at each point.
pub fn verify_mapping_vs_gradient(
    instance: &dyn MinimaxInstance,
    dataset: &Dataset,
    points: &[Vec<f64>],
    cfg: &InnerSolveConfig,
    slack: f64,
) -> Result<MappingReport> {
    let population = Objective::population(instance)?;
    let empirical = Objective::empirical(instance, dataset)?;
    let l_tilde = population.l_tilde();
    let dom = instance.x_domain();
    let mut report = MappingReport {
        slack,
        ..Default::default()
    };
    for x in points {
        let g = primal_grad_ncsc(&population, x, cfg)?;
        let gs = primal_grad_ncsc(&empirical, x, cfg)?;
        let m = mapping_from_gradient(dom, x, &g, l_tilde)?;
        let ms = mapping_from_gradient(dom, x, &gs, l_tilde)?;
        let lhs = linalg::dist(&m, &ms);
        let rhs = linalg::dist(&g, &gs);
        report.evaluations += 1;
        if lhs > slack * rhs + ABS_FLOOR {
            report.violations += 1;
        }
        if (lhs - rhs).abs() <= 1e-12 * (1.0 + rhs) {
            report.equalities += 1;
        }
        report.max_ratio = report.max_ratio.max(ratio(lhs, rhs));
        report.max_mapping_diff = report.max_mapping_diff.max(lhs);
        report.max_gradient_diff = report.max_gradient_diff.max(rhs);
    }
    report.passed = report.violations == 0;
    Ok(report)
}

/// [`verify_mapping_vs_gradient`] over the configured net for `mapping.draws`
/// datasets at every `n` of the schedule.
pub fn verify_mapping_ordering(cfg: &ExperimentConfig) -> Result<MappingReport> {
    cfg.validate()?;
    let instance = cfg.build_instance()?;
    let net = cfg.build_net(instance.as_ref())?;
    let jobs: Vec<(u64, usize)> = cfg
        .n_schedule
        .iter()
        .flat_map(|&n| (0..cfg.mapping.draws).map(move |r| (n, r)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(n, r)| {
            let data = Dataset::draw(instance.as_ref(), replicate_seed(cfg.base_seed, n, r), n as usize)?;
            verify_mapping_vs_gradient(instance.as_ref(), &data, net.points(), &cfg.inner, cfg.slack)
                .map_err(|e| e.context(format!("n = {n}, draw {r}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reports.into_iter().fold(
        MappingReport {
            slack: cfg.slack,
            passed: true,
            ..Default::default()
        },
        MappingReport::merge,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub multiple: f64,
    pub t: f64,
    pub empirical: f64,
    /// `2 exp(-t^2 / (2 sigma^2))`
    pub theoretical: f64,
    pub binomial_std_error: f64,
    /// `empirical / (theoretical + 3 binomial_std_error)`
    pub ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub n: u64,
    pub draws: usize,
    pub sigma: f64,
    pub mean_deviation: f64,
    pub rows: Vec<TailRow>,
    pub deviations: Vec<f64>,
    pub passed: bool,
}

/// Tail frequencies of `D = ||grad Phi(x) - grad Phi_S(x)||` around its mean
/// against the sub-Gaussian bound with variance proxy `(2LG/mu + G)^2 / n`.
/// The binomial standard error uses the theoretical probability (capped at 1).
pub fn subgaussian_tail_check(
    instance: &dyn MinimaxInstance,
    x: &[f64],
    n: u64,
    draws: usize,
    seed: u64,
    multiples: &[f64],
    cfg: &InnerSolveConfig,
) -> Result<TailReport> {
    let c = instance.constants();
    let sigma = subgaussian_variance_proxy_ncsc(c.l, c.g, c.mu, n)?.sqrt();
    if draws == 0 {
        return Err(Error::invalid("draws must be >= 1"));
    }
    let population = Objective::population(instance)?;
    let g = primal_grad_ncsc(&population, x, cfg)?;
    let deviations = (0..draws)
        .into_par_iter()
        .map(|j| {
            let data = Dataset::draw(instance, derive_seed(&[seed, n, j as u64]), n as usize)?;
            let gs = primal_grad_ncsc(&Objective::empirical(instance, &data)?, x, cfg)?;
            Ok(linalg::dist(&g, &gs))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = deviations.iter().sum::<f64>() / draws as f64;
    let rows: Vec<TailRow> = multiples
        .iter()
        .map(|&k| {
            let t = k * sigma;
            let hits = deviations.iter().filter(|d| (**d - mean).abs() >= t).count();
            let empirical = hits as f64 / draws as f64;
            let theoretical = 2.0 * (-t * t / (2.0 * sigma * sigma)).exp();
            let p = theoretical.min(1.0);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let limit = theoretical + 3.0 * se;
            TailRow {
                multiple: k,
                t,
                empirical,
                theoretical,
                binomial_std_error: se,
                ratio: ratio(empirical, limit),
                passed: empirical <= limit,
            }
        })
        .collect();
    Ok(TailReport {
        n,
        draws,
        sigma,
        mean_deviation: mean,
        passed: rows.iter().all(|r| r.passed),
        rows,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::ConvexDomain;
    use crate::linalg::Matrix;
    use crate::problems::{make_quadratic_scsc, make_sin_bilinear_ncc, make_sin_bilinear_ncsc, SinBilinear, SinBilinearParams};

    #[test]
    fn stability_on_quadratic_family() {
        let q = make_quadratic_scsc(2, 1.0, 1.0, 1.0, 5.0, 0).unwrap();
        let cfg = InnerSolveConfig::default();
        let r10 = verify_stability(&q, &[0.0, 0.0], 10, 200, 1, &cfg, 1.05).unwrap();
        let r20 = verify_stability(&q, &[0.0, 0.0], 20, 200, 1, &cfg, 1.05).unwrap();
        assert!(r10.passed && r20.passed);
        // deviation = ||c_i - c_i'|| / (mu n) <= 2 / n here
        assert!(r10.max_deviation <= 2.0 / 10.0 + 1e-12);
        let halving = r20.mean_deviation / r10.mean_deviation;
        assert!((halving - 0.5).abs() < 0.1, "{halving}");
    }

    #[test]
    fn identical_replacement_gives_zero_deviation() {
        let q = make_quadratic_scsc(2, 1.0, 1.0, 1.0, 5.0, 0).unwrap();
        let data = Dataset::draw(&q, 3, 12).unwrap();
        let same = data.replace(4, data.samples()[4].clone()).unwrap();
        let cfg = InnerSolveConfig::default();
        let a = solve_inner(&Objective::empirical(&q, &data).unwrap(), &[0.1, 0.2], &cfg).unwrap();
        let b = solve_inner(&Objective::empirical(&q, &same).unwrap(), &[0.1, 0.2], &cfg).unwrap();
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn lemma_holds_and_shrinks_with_nu() {
        let inst = make_sin_bilinear_ncc(1, 1, 1.0, 1.0, 2).unwrap();
        let lambda = 0.5 / inst.constants().l;
        let xs: Vec<Vec<f64>> = vec![vec![-0.7], vec![0.05], vec![0.6]];
        let report = verify_prox_reg_lemma(
            &inst,
            &xs,
            &[0.0, 1e-1, 1e-2, 1e-3],
            lambda,
            &InnerSolveConfig::default(),
            1.05,
            Some(1e-3),
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        for k in report.cases.iter().filter(|k| k.nu == 0.0) {
            assert_eq!(k.squared_distance, 0.0);
        }
        for x in &xs {
            let d: Vec<f64> = report.cases.iter().filter(|k| &k.x == x && k.nu > 0.0).map(|k| k.squared_distance).collect();
            assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{d:?}");
        }
    }

    #[test]
    fn lemma_rejects_strongly_concave_and_large_lambda() {
        let inst = make_sin_bilinear_ncsc(1, 1, 1.0, 1.0, 5.0, 2).unwrap();
        assert!(verify_prox_reg_lemma(&inst, &[vec![0.0]], &[0.1], 0.1, &InnerSolveConfig::default(), 1.05, None).is_err());
        let inst = make_sin_bilinear_ncc(1, 1, 1.0, 1.0, 2).unwrap();
        let l = inst.constants().l;
        assert!(verify_prox_reg_lemma(&inst, &[vec![0.0]], &[0.1], 1.0 / l, &InnerSolveConfig::default(), 1.05, None).is_err());
    }

    #[test]
    fn mapping_ordering_with_active_clamp() {
        // on X = [0.2, 1] the primal gradient is positive, so steps from the left end clamp
        let inst = SinBilinear::new(SinBilinearParams {
            w: vec![1.0],
            coupling: Matrix::identity(1),
            mu: 0.5,
            a_min: 0.5,
            a_max: 1.5,
            b_radius: 0.5,
            x_domain: ConvexDomain::cube(1, 0.2, 1.0).unwrap(),
            y_domain: ConvexDomain::centered_ball(1, 10.0).unwrap(),
        })
        .unwrap();
        let points: Vec<Vec<f64>> = (0..=16).map(|i| vec![0.2 + 0.05 * i as f64]).collect();
        let cfg = InnerSolveConfig::default();
        let mut strict = 0;
        for seed in 0..10 {
            let data = Dataset::draw(&inst, seed, 8).unwrap();
            let r = verify_mapping_vs_gradient(&inst, &data, &points, &cfg, 1.0).unwrap();
            assert!(r.passed);
            strict += r.evaluations - r.equalities;
            assert!(r.equalities > 0);
        }
        assert!(strict > 0, "no point had an active clamp");
    }

    #[test]
    fn tails_at_three_sigma() {
        let inst = make_sin_bilinear_ncsc(2, 2, 1.0, 1.0, 5.0, 4).unwrap();
        let r = subgaussian_tail_check(&inst, &[0.1, 0.1], 50, 300, 9, &[0.0, 1.0, 2.0, 3.0], &InnerSolveConfig::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.rows[0].theoretical, 2.0);
        assert!((r.rows[3].theoretical - 2.0 * (-4.5f64).exp()).abs() < 1e-15);
        let r2 = subgaussian_tail_check(&inst, &[0.1, 0.1], 100, 10, 9, &[1.0], &InnerSolveConfig::default()).unwrap();
        assert!((r.sigma.powi(2) / r2.sigma.powi(2) - 2.0).abs() < 1e-12);
    }
}
