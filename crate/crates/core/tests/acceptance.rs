//! Acceptance criteria, one line per criterion. Custom harness: exits nonzero
//! if any criterion fails.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uclab::bounds::{ncc_chain_complexity, ncsc_chain_complexity, sample_size_ncc, sample_size_ncsc, ComplexityTemplate};
use uclab::experiments::{
    curve_csv, estimate_uniform_convergence_ncc, estimate_uniform_convergence_ncsc, fit_power_law, fit_rate,
    run_decomposition, subgaussian_tail_check, verify_mapping_ordering, verify_prox_reg_lemma, verify_stability,
    ConvergenceCurve, ExperimentConfig,
};
use uclab::linalg;
use uclab::oracles::{default_lambda, moreau_grad, primal_grad_ncsc, primal_value, prox_point, InnerSolveConfig, Objective};
use uclab::problems::{make_quadratic_scsc, make_sin_bilinear_ncc, make_sin_bilinear_ncsc, Dataset, Family, FamilySpec, MinimaxInstance};

type Criterion = fn() -> Outcome;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn ncsc_spec() -> FamilySpec {
    FamilySpec {
        family: Family::SinBilinearNcsc,
        d: 2,
        d_prime: Some(2),
        mu: 1.0,
        radius_x: 1.0,
        radius_y: 4.0,
        seed: 1,
        rho: None,
    }
}

fn ncc_spec(d: usize) -> FamilySpec {
    FamilySpec {
        family: Family::SinBilinearNcc,
        d,
        d_prime: Some(d),
        mu: 0.0,
        radius_x: 1.0,
        radius_y: 1.0,
        seed: 3,
        rho: None,
    }
}

fn criterion1_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ncsc_spec());
    cfg.net.radius = 0.11;
    cfg.n_schedule = vec![64, 256, 1024, 4096];
    cfg.replications = 50;
    cfg.base_seed = 2024;
    cfg
}

fn nonincreasing_within_2se(curve: &ConvergenceCurve) -> bool {
    curve
        .rows
        .windows(2)
        .all(|w| w[1].mean <= w[0].mean + 2.0 * w[0].std_error.hypot(w[1].std_error))
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn random_points(instance: &dyn MinimaxInstance, count: usize, seed: u64, shrink: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| linalg::scale(&instance.x_domain().sample_uniform(&mut rng), shrink))
        .collect()
}

fn criterion1() -> Outcome {
    let cfg = criterion1_config();
    let curve = estimate_uniform_convergence_ncsc(&cfg).expect("curve");
    let fit = fit_rate(&curve).expect("fit");
    let ok = curve.net_size <= 200 && (-0.65..=-0.35).contains(&fit.slope) && fit.slope_std_error <= 0.08;
    outcome(
        ok,
        format!("Q = {}, slope = {:.4}, slope se = {:.4}", curve.net_size, fit.slope, fit.slope_std_error),
    )
}

fn criterion2() -> Outcome {
    let mut cfg = ExperimentConfig::new(ncc_spec(1));
    cfg.net.radius = 0.05;
    cfg.n_schedule = vec![64, 256, 1024, 4096];
    cfg.replications = 30;
    cfg.base_seed = 7;
    let curve = estimate_uniform_convergence_ncc(&cfg).expect("curve");
    let fit = fit_rate(&curve).expect("fit");
    let mono = nonincreasing_within_2se(&curve);
    let means: Vec<String> = curve.rows.iter().map(|r| format!("{:.4}", r.mean)).collect();
    outcome(
        mono && fit.slope <= -0.2,
        format!("Q = {}, means = [{}], slope = {:.4}, nonincreasing = {mono}", curve.net_size, means.join(", "), fit.slope),
    )
}

fn criterion3() -> Outcome {
    let q = make_quadratic_scsc(2, 1.0, 1.0, 1.0, 5.0, 0).expect("instance");
    let x = q.x_domain().center();
    let mut ok = true;
    let mut parts = vec![];
    for n in [10, 100, 1000] {
        let r = verify_stability(&q, &x, n, 1000, 11, &InnerSolveConfig::default(), 1.05).expect("stability");
        ok &= r.passed;
        parts.push(format!("n={n}: max ratio {:.3}, violations {}", r.max_ratio, r.violations));
    }
    outcome(ok, parts.join("; "))
}

fn criterion4() -> Outcome {
    let inst = make_sin_bilinear_ncc(1, 1, 1.0, 1.0, 3).expect("instance");
    let lambda = 0.5 / inst.constants().l;
    let xs = random_points(&inst, 20, 5, 1.0);
    let r = verify_prox_reg_lemma(&inst, &xs, &[1e-1, 1e-2, 1e-3], lambda, &InnerSolveConfig::default(), 1.05, Some(1e-3))
        .expect("lemma");
    outcome(
        r.passed,
        format!(
            "{} cases, max ratio {:.4}, violations {}, grid agrees {} (tol {:.2e})",
            r.cases.len(),
            r.max_ratio,
            r.violations,
            r.grid_agrees,
            r.grid_tolerance.unwrap_or(f64::NAN)
        ),
    )
}

fn criterion5() -> Outcome {
    let cfg = InnerSolveConfig::default();
    let inst = make_sin_bilinear_ncsc(2, 2, 1.0, 1.0, 4.0, 1).expect("instance");
    let data = Dataset::draw(&inst, 17, 64).expect("data");
    let emp = Objective::empirical(&inst, &data).expect("objective");
    let mut danskin = 0.0f64;
    for x in random_points(&inst, 20, 21, 0.9) {
        let g = primal_grad_ncsc(&emp, &x, &cfg).expect("grad");
        let fd = central_diff(|z| primal_value(&emp, z, &cfg).expect("value"), &x, 1e-5);
        danskin = danskin.max(linalg::dist(&g, &fd) / (1.0 + linalg::norm(&g)));
    }
    let ncc = make_sin_bilinear_ncc(2, 2, 1.0, 1.0, 3).expect("instance");
    let pop = Objective::population(&ncc).expect("objective");
    let lambda = default_lambda(&pop);
    let mut moreau = 0.0f64;
    for x in random_points(&ncc, 20, 22, 0.9) {
        let g = moreau_grad(&pop, &x, lambda, &cfg).expect("moreau grad");
        let fd = central_diff(|z| prox_point(&pop, z, lambda, &cfg).expect("prox").envelope_value(), &x, 1e-5);
        moreau = moreau.max(linalg::dist(&g, &fd));
    }
    outcome(
        danskin <= 1e-4 && moreau <= 1e-3,
        format!("Danskin max rel err {danskin:.2e}, Moreau max err {moreau:.2e}"),
    )
}

fn criterion6() -> Outcome {
    let mut cfg = criterion1_config();
    cfg.n_schedule = vec![64];
    cfg.mapping.draws = 20;
    let r = verify_mapping_ordering(&cfg).expect("mapping");
    outcome(
        r.passed && r.violations == 0,
        format!(
            "{} evaluations, violations {}, equalities {}, max ratio {:.6}",
            r.evaluations, r.violations, r.equalities, r.max_ratio
        ),
    )
}

fn criterion7() -> Outcome {
    let mut cfg = criterion1_config();
    cfg.n_schedule = vec![1024];
    let r = run_decomposition(&cfg, 200).expect("decomposition");
    let row = &r.rows[0];
    outcome(
        r.passed,
        format!(
            "triangle violations {}/{}, mean generalization {:.5} vs mean net sup {:.5}",
            row.triangle_violations,
            row.generalization.len(),
            row.mean_generalization,
            row.mean_net_sup
        ),
    )
}

fn criterion8() -> Outcome {
    let inst = make_sin_bilinear_ncsc(2, 2, 1.0, 1.0, 4.0, 1).expect("instance");
    let r = subgaussian_tail_check(&inst, &[0.3, -0.2], 100, 1000, 31, &[1.0, 2.0, 3.0], &InnerSolveConfig::default())
        .expect("tails");
    let t3 = &r.rows[2];
    let ok = t3.empirical <= 2.0 * (-4.5f64).exp() + 3.0 * t3.binomial_std_error && r.passed;
    outcome(
        ok,
        format!(
            "sigma {:.4}, frequency at 3 sigma {:.4} vs bound {:.4} + 3 x {:.4}",
            r.sigma, t3.empirical, t3.theoretical, t3.binomial_std_error
        ),
    )
}

fn criterion9() -> Outcome {
    let exact = sample_size_ncsc(1, 1.0, 1.0, 1.0, 1.0).expect("n") == 38;
    // 27-point grid over (eps, d, mu); smaller mu means larger kappa
    let eps_grid = [0.2, 0.1, 0.05];
    let d_grid = [1usize, 2, 4];
    let mu_grid = [1.0, 0.5, 0.25];
    let n = |e: f64, d: usize, mu: f64| sample_size_ncsc(d, e, 1.0, mu, 1.0).expect("n");
    let mut mono = true;
    let mut points = 0;
    for (i, &e) in eps_grid.iter().enumerate() {
        for (j, &d) in d_grid.iter().enumerate() {
            for (k, &mu) in mu_grid.iter().enumerate() {
                points += 1;
                let here = n(e, d, mu);
                if i + 1 < eps_grid.len() {
                    mono &= n(eps_grid[i + 1], d, mu) > here;
                    mono &= sample_size_ncc(d, eps_grid[i + 1], 1.0, 1.0, 1.0, 1.0).expect("n").n
                        > sample_size_ncc(d, e, 1.0, 1.0, 1.0, 1.0).expect("n").n;
                }
                if j + 1 < d_grid.len() {
                    mono &= n(e, d_grid[j + 1], mu) > here;
                    mono &= sample_size_ncc(d_grid[j + 1], e, 1.0, 1.0, 1.0, 1.0).expect("n").n
                        > sample_size_ncc(d, e, 1.0, 1.0, 1.0, 1.0).expect("n").n;
                }
                if k + 1 < mu_grid.len() {
                    mono &= n(e, d, mu_grid[k + 1]) > here;
                }
            }
        }
    }
    let (l, mu, g) = (10.0, 1.0, 1.0);
    let sreda = ComplexityTemplate::sreda_ncsc();
    let catalyst = ComplexityTemplate::catalyst_ncc();
    let ncsc: Vec<(f64, f64)> = eps_grid
        .iter()
        .map(|&e| (e, ncsc_chain_complexity(1, e, l, mu, g, &sreda).expect("chain")))
        .collect();
    let ncc: Vec<(f64, f64)> = eps_grid
        .iter()
        .map(|&e| (e, ncc_chain_complexity(1, e, l, g, 1.0, 1.0, &catalyst).expect("chain")))
        .collect();
    let s1 = fit_power_law(&ncsc).expect("fit").slope;
    let s2 = fit_power_law(&ncc).expect("fit").slope;
    let ok = exact && mono && points == 27 && (s1 + 3.0).abs() <= 0.1 && (s2 + 6.0).abs() <= 0.2;
    outcome(
        ok,
        format!("n*(1,1,1,1,1) = 38: {exact}; monotone on {points} points: {mono}; eps exponents {s1:.3} (NC-SC), {s2:.3} (NC-C)"),
    )
}

fn criterion10() -> Outcome {
    let cfg = criterion1_config();
    let a = curve_csv(&estimate_uniform_convergence_ncsc(&cfg).expect("curve"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let b = pool.install(|| curve_csv(&estimate_uniform_convergence_ncsc(&cfg).expect("curve")));
    outcome(a == b, format!("{} bytes, identical across thread counts: {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("NC-SC uniform convergence rate", criterion1),
        ("NC-C uniform convergence rate", criterion2),
        ("stability inequality", criterion3),
        ("regularization lemma", criterion4),
        ("Danskin and Moreau identities", criterion5),
        ("gradient mapping ordering", criterion6),
        ("error decomposition", criterion7),
        ("sub-Gaussian tails", criterion8),
        ("calculators", criterion9),
        ("determinism", criterion10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let verdict = if out.passed { "PASS" } else { "FAIL" };
        println!("{id:>12} [{verdict}] {name}: {} ({:.1}s)", out.detail, start.elapsed().as_secs_f64());
        if !out.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
