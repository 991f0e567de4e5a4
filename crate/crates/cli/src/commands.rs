use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use uclab::bounds::{
    ncc_chain_complexity, ncsc_chain_complexity, prox_reg_bound, sample_size_ncc, sample_size_ncsc,
    stability_y_bound, ComplexityTemplate,
};
use uclab::domains::ConvexDomain;
use uclab::experiments::{
    curve_csv, estimate_uniform_convergence_ncc, estimate_uniform_convergence_ncsc, fit_rate, replicates_csv,
    run_decomposition, subgaussian_tail_check, verify_mapping_ordering, verify_prox_reg_lemma, verify_stability,
    ArtifactDir, ConvergenceCurve, ExperimentConfig, ReportBuilder,
};
use uclab::io::{content_hash, fmt_f64};
use uclab::linalg;
use uclab::oracles::{gradient_mapping, InnerSolveConfig, Objective};
use uclab::problems::{derive_seed, make_quadratic_scsc, Family, FamilySpec, MinimaxInstance};

use crate::config::resolve;
use crate::{Command, Failure};

pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
}

/// Runs `cmd`; `Ok(false)` means a verification failed after artifacts were written.
pub fn run(cmd: Command, opts: &RunOptions) -> Result<bool, Failure> {
    match cmd {
        Command::Calc => calc(opts),
        Command::Selftest => selftest(opts),
        _ => {
            let defaults = serde_json::to_value(default_config(cmd)).expect("config serializes");
            let cfg: ExperimentConfig =
                resolve(defaults, opts.config.as_deref(), opts.seed.map(|s| ("base_seed", s)), &opts.overrides)?;
            cfg.validate()?;
            let hash = content_hash(&cfg);
            let dir = run_dir(&opts.out, cmd)?;
            dir.write_json("config.json", &cfg)?;
            let passed = match cmd {
                Command::UcNcsc => uc_ncsc(&cfg, &dir, &hash)?,
                Command::UcNcc => uc_ncc(&cfg, &dir, &hash)?,
                Command::Stability => stability(&cfg, &dir, &hash)?,
                Command::LemmaProx => lemma(&cfg, &dir, &hash)?,
                Command::Decompose => decompose(&cfg, &dir, &hash)?,
                Command::Tails => tails(&cfg, &dir, &hash)?,
                Command::Calc | Command::Selftest => unreachable!(),
            };
            eprintln!("artifacts: {}", dir.path().display());
            Ok(passed)
        }
    }
}

fn family(family: Family, d: usize, mu: f64, radius_y: f64) -> FamilySpec {
    FamilySpec {
        family,
        d,
        d_prime: Some(d),
        mu,
        radius_x: 1.0,
        radius_y,
        seed: 1,
        rho: None,
    }
}

pub fn default_config(cmd: Command) -> ExperimentConfig {
    let ncsc = family(Family::SinBilinearNcsc, 2, 1.0, 4.0);
    let mut cfg = match cmd {
        Command::UcNcc | Command::LemmaProx => {
            let mut c = ExperimentConfig::new(family(Family::SinBilinearNcc, 1, 0.0, 1.0));
            c.net.radius = 0.05;
            c.replications = 30;
            c
        }
        Command::Stability => {
            let mut spec = family(Family::QuadraticScsc, 2, 1.0, 5.0);
            spec.rho = Some(1.0);
            ExperimentConfig::new(spec)
        }
        Command::Decompose => {
            let mut c = ExperimentConfig::new(ncsc);
            c.n_schedule = vec![1024];
            c
        }
        _ => ExperimentConfig::new(ncsc),
    };
    cfg.base_seed = 2024;
    cfg
}

fn run_dir(out: &Path, cmd: Command) -> Result<ArtifactDir, Failure> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let mut path = out.join(format!("{}-{stamp}", cmd.name()));
    let mut k = 1;
    while path.exists() {
        path = out.join(format!("{}-{stamp}-{k}", cmd.name()));
        k += 1;
    }
    Ok(ArtifactDir::create(path)?)
}

fn curve_table(curve: &ConvergenceCurve) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = curve
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt_f64(r.mean), fmt_f64(r.std_error), fmt_f64(r.correction)])
        .collect();
    (vec!["n", "mean sup deviation", "std error", "net correction"], rows)
}

fn write_curve(dir: &ArtifactDir, curve: &ConvergenceCurve) -> Result<uclab::experiments::RateFit, Failure> {
    dir.write_text("curve.csv", &curve_csv(curve))?;
    dir.write_text("replicates.csv", &replicates_csv(curve))?;
    let fit = fit_rate(curve)?;
    dir.write_json(
        "ratefit.json",
        &json!({
            "setting": curve.setting,
            "net_size": curve.net_size,
            "net_radius": curve.net_radius,
            "lambda": curve.lambda,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "slope_std_error": fit.slope_std_error,
        }),
    )?;
    Ok(fit)
}

fn uc_ncsc(cfg: &ExperimentConfig, dir: &ArtifactDir, hash: &str) -> Result<bool, Failure> {
    let curve = estimate_uniform_convergence_ncsc(cfg)?;
    let fit = write_curve(dir, &curve)?;
    let mapping = verify_mapping_ordering(cfg)?;
    dir.write_json("verify_mapping.json", &mapping)?;
    let mut rep = ReportBuilder::new("NC-SC uniform convergence", hash);
    rep.line(format!(
        "Sup over a {}-point net (radius {}) of ||grad Phi - grad Phi_S||, {} replications per n.",
        curve.net_size,
        fmt_f64(curve.net_radius),
        cfg.replications
    ))
    .line("The true sup exceeds the net sup by at most the correction 2 L (1 + kappa) upsilon, which is reported, not added.");
    let (h, rows) = curve_table(&curve);
    rep.section("Curve").table(&h, &rows);
    rep.section("Rate fit").line(format!(
        "log-log slope {} (std error {}); the predicted rate is n^(-1/2).",
        fmt_f64(fit.slope),
        fmt_f64(fit.slope_std_error)
    ));
    rep.section("Verifications")
        .verdict("mapping ordering ||G_Phi - G_Phi_S|| <= ||grad Phi - grad Phi_S||", mapping.passed, mapping.max_ratio, mapping.slack);
    dir.write_text("report.md", &rep.finish())?;
    Ok(mapping.passed)
}

#[derive(Serialize)]
struct MonotoneCheck {
    means: Vec<f64>,
    std_errors: Vec<f64>,
    /// Largest `mean[i+1] - mean[i]` in units of the combined std error.
    max_increase_in_se: f64,
    passed: bool,
}

fn uc_ncc(cfg: &ExperimentConfig, dir: &ArtifactDir, hash: &str) -> Result<bool, Failure> {
    let curve = estimate_uniform_convergence_ncc(cfg)?;
    let fit = write_curve(dir, &curve)?;
    let max_increase_in_se = curve
        .rows
        .windows(2)
        .map(|w| (w[1].mean - w[0].mean) / w[0].std_error.hypot(w[1].std_error).max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    let check = MonotoneCheck {
        means: curve.rows.iter().map(|r| r.mean).collect(),
        std_errors: curve.rows.iter().map(|r| r.std_error).collect(),
        max_increase_in_se,
        passed: curve.rows.len() < 2 || max_increase_in_se <= 2.0,
    };
    dir.write_json("verify_monotone.json", &check)?;
    let mut rep = ReportBuilder::new("NC-C uniform convergence (Moreau envelope)", hash);
    rep.line(format!(
        "Sup over a {}-point net of ||grad Phi^lambda - grad Phi_S^lambda|| with lambda = {}, {} replications per n.",
        curve.net_size,
        fmt_f64(curve.lambda.unwrap_or(f64::NAN)),
        cfg.replications
    ))
    .line("Correction 2 upsilon / (lambda (1 - lambda L)) is reported, not added.");
    let (h, rows) = curve_table(&curve);
    rep.section("Curve").table(&h, &rows);
    rep.section("Rate fit").line(format!(
        "log-log slope {} (std error {}); the predicted rate is n^(-1/4).",
        fmt_f64(fit.slope),
        fmt_f64(fit.slope_std_error)
    ));
    rep.section("Verifications").verdict(
        "curve nonincreasing within 2 std errors",
        check.passed,
        max_increase_in_se,
        2.0,
    );
    dir.write_text("report.md", &rep.finish())?;
    Ok(check.passed)
}

fn point_or_center(x: &Option<Vec<f64>>, inst: &dyn MinimaxInstance) -> Vec<f64> {
    x.clone().unwrap_or_else(|| inst.x_domain().center())
}

fn stability(cfg: &ExperimentConfig, dir: &ArtifactDir, hash: &str) -> Result<bool, Failure> {
    let inst = cfg.build_instance()?;
    let x = point_or_center(&cfg.stability.x, inst.as_ref());
    let reports = cfg
        .stability
        .n_values
        .iter()
        .map(|&n| verify_stability(inst.as_ref(), &x, n, cfg.stability.trials, cfg.base_seed, &cfg.inner, cfg.slack))
        .collect::<uclab::Result<Vec<_>>>()?;
    dir.write_json("verify_stability.json", &reports)?;
    let passed = reports.iter().all(|r| r.passed);
    let mut rep = ReportBuilder::new("Replace-one stability", hash);
    rep.line(format!(
        "{} trials per n at x = {:?}: ||y*_S(x) - y*_S'(x)|| against 4G/(mu n).",
        cfg.stability.trials, x
    ));
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.bound),
                fmt_f64(r.max_deviation),
                fmt_f64(r.max_ratio),
                r.violations.to_string(),
            ]
        })
        .collect();
    rep.section("Results").table(&["n", "bound", "max deviation", "max ratio", "violations"], &rows);
    rep.section("Verifications");
    for r in &reports {
        rep.verdict(&format!("n = {}", r.n), r.passed, r.max_ratio, r.slack);
    }
    dir.write_text("report.md", &rep.finish())?;
    Ok(passed)
}

fn lemma(cfg: &ExperimentConfig, dir: &ArtifactDir, hash: &str) -> Result<bool, Failure> {
    let inst = cfg.build_instance()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.base_seed, 4]));
    let xs: Vec<Vec<f64>> = (0..cfg.lemma.points).map(|_| inst.x_domain().sample_uniform(&mut rng)).collect();
    let lambda = cfg.lambda_for(inst.as_ref());
    let report = verify_prox_reg_lemma(
        inst.as_ref(),
        &xs,
        &cfg.nu_grid,
        lambda,
        &cfg.prox,
        cfg.slack,
        cfg.lemma.grid_resolution,
    )?;
    dir.write_json("verify_lemma.json", &report)?;
    let mut rep = ReportBuilder::new("Prox point under y-regularization", hash);
    rep.line(format!(
        "{} points, nu in {:?}, lambda = {}: ||prox_(lambda Phi)(x) - prox_(lambda Phi_nu)(x)||^2 against nu D_Y lambda / (1 - lambda (L + nu)).",
        xs.len(),
        cfg.nu_grid,
        fmt_f64(lambda)
    ));
    if let (Some(res), Some(tol)) = (report.grid_resolution, report.grid_tolerance) {
        rep.line(format!(
            "Grid cross-check at resolution {} (tolerance {}): {}.",
            fmt_f64(res),
            fmt_f64(tol),
            if report.grid_agrees { "agrees" } else { "DISAGREES" }
        ));
    }
    rep.section("Verifications")
        .verdict("squared prox distance <= slack x bound", report.violations == 0, report.max_ratio, report.slack);
    dir.write_text("report.md", &rep.finish())?;
    Ok(report.passed)
}

fn decompose(cfg: &ExperimentConfig, dir: &ArtifactDir, hash: &str) -> Result<bool, Failure> {
    let report = run_decomposition(cfg, cfg.decomposition.steps)?;
    dir.write_json("verify_decomposition.json", &report)?;
    let mut rep = ReportBuilder::new("Error decomposition", hash);
    rep.line(format!(
        "Baseline: projected gradient descent on Phi_S with {} steps, best gradient mapping kept.",
        report.steps
    ))
    .line("||grad Phi(x)|| <= ||grad Phi_S(x)|| + ||grad Phi(x) - grad Phi_S(x)|| per replicate; the mean last term should not exceed the mean net sup.");
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.mean_population),
                fmt_f64(r.mean_optimization),
                fmt_f64(r.mean_generalization),
                fmt_f64(r.mean_net_sup),
                r.triangle_violations.to_string(),
            ]
        })
        .collect();
    rep.section("Results").table(
        &["n", "population", "optimization", "generalization", "net sup", "triangle violations"],
        &rows,
    );
    rep.section("Verifications");
    for r in &report.rows {
        rep.verdict(
            &format!("n = {}", r.n),
            r.passed,
            r.mean_generalization / r.mean_net_sup,
            1.0,
        );
    }
    dir.write_text("report.md", &rep.finish())?;
    Ok(report.passed)
}

fn tails(cfg: &ExperimentConfig, dir: &ArtifactDir, hash: &str) -> Result<bool, Failure> {
    let inst = cfg.build_instance()?;
    let x = point_or_center(&cfg.tails.x, inst.as_ref());
    let report = subgaussian_tail_check(
        inst.as_ref(),
        &x,
        cfg.tails.n,
        cfg.tails.draws,
        cfg.base_seed,
        &cfg.tails.multiples,
        &cfg.inner,
    )?;
    dir.write_json("verify_tails.json", &report)?;
    let mut rep = ReportBuilder::new("Sub-Gaussian tails", hash);
    rep.line(format!(
        "{} datasets of size {} at x = {:?}; sigma = {}. Frequency of ||grad Phi - grad Phi_S|| > t against 2 exp(-t^2 / (2 sigma^2)).",
        report.draws,
        report.n,
        x,
        fmt_f64(report.sigma)
    ));
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.multiple),
                fmt_f64(r.empirical),
                fmt_f64(r.theoretical),
                fmt_f64(r.binomial_std_error),
            ]
        })
        .collect();
    rep.section("Results").table(&["t / sigma", "frequency", "bound", "binomial std error"], &rows);
    rep.section("Verifications");
    for r in &report.rows {
        rep.verdict(&format!("t = {} sigma", fmt_f64(r.multiple)), r.passed, r.ratio, 1.0);
    }
    dir.write_text("report.md", &rep.finish())?;
    Ok(report.passed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Setting {
    Ncsc,
    Ncc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Template {
    SredaNcsc,
    CatalystNcsc,
    CatalystNcc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalcConfig {
    setting: Setting,
    d: usize,
    eps: f64,
    l: f64,
    mu: f64,
    g: f64,
    d_x: f64,
    d_y: f64,
    /// Also report the induced gradient complexity for this solver template.
    template: Option<Template>,
}

impl Default for CalcConfig {
    fn default() -> Self {
        CalcConfig {
            setting: Setting::Ncsc,
            d: 1,
            eps: 1.0,
            l: 1.0,
            mu: 1.0,
            g: 1.0,
            d_x: 1.0,
            d_y: 1.0,
            template: None,
        }
    }
}

fn calc(opts: &RunOptions) -> Result<bool, Failure> {
    let defaults = serde_json::to_value(CalcConfig::default()).expect("config serializes");
    let c: CalcConfig = resolve(defaults, opts.config.as_deref(), None, &opts.overrides)?;
    let template = c.template.map(|t| match t {
        Template::SredaNcsc => ComplexityTemplate::sreda_ncsc(),
        Template::CatalystNcsc => ComplexityTemplate::catalyst_ncsc(),
        Template::CatalystNcc => ComplexityTemplate::catalyst_ncc(),
    });
    let out = match c.setting {
        Setting::Ncsc => {
            let n = sample_size_ncsc(c.d, c.eps, c.l, c.mu, c.g)?;
            let complexity = template
                .map(|t| ncsc_chain_complexity(c.d, c.eps, c.l, c.mu, c.g, &t))
                .transpose()?;
            json!({
                "setting": "ncsc",
                "n_star": n,
                "nu": Value::Null,
                "constants_used": {"d": c.d, "eps": c.eps, "L": c.l, "mu": c.mu, "G": c.g, "kappa": c.l / c.mu},
                "formula_citation": "n = ceil(2 d eps^-2 (2 L G / mu + G)^2 ln(4 L (1 + kappa) / eps)), kappa = L / mu",
                "gradient_complexity": complexity,
            })
        }
        Setting::Ncc => {
            let s = sample_size_ncc(c.d, c.eps, c.l, c.g, c.d_x, c.d_y)?;
            let complexity = template
                .map(|t| ncc_chain_complexity(c.d, c.eps, c.l, c.g, c.d_x, c.d_y, &t))
                .transpose()?;
            json!({
                "setting": "ncc",
                "n_star": s.n,
                "nu": s.nu,
                "lambda": s.lambda,
                "upsilon": s.upsilon,
                "log_q": s.log_q,
                "terms": s.terms,
                "constants_used": {"d": c.d, "eps": c.eps, "L": c.l, "G": c.g, "D_X": c.d_x, "D_Y": c.d_y},
                "formula_citation": "nu = eps^2 / (64 L D_Y), lambda = 1 / (2L), upsilon = eps / (32 L); n is the least integer with both sampling terms of the Moreau-gradient bound at most eps/8",
                "gradient_complexity": complexity,
            })
        }
    };
    let text = uclab::io::to_json(&out);
    println!("{text}");
    let dir = run_dir(&opts.out, Command::Calc)?;
    dir.write_json("config.json", &c)?;
    dir.write_text("calc.json", &format!("{text}\n"))?;
    eprintln!("artifacts: {}", dir.path().display());
    Ok(true)
}

type Check = Box<dyn Fn() -> uclab::Result<bool>>;

#[derive(Serialize)]
struct SelfCheck {
    name: &'static str,
    passed: bool,
}

fn selftest(opts: &RunOptions) -> Result<bool, Failure> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    let checks: Vec<(&'static str, Check)> = vec![
        ("sample_size_ncsc(1, 1, 1, 1, 1) = 38", Box::new(|| Ok(sample_size_ncsc(1, 1.0, 1.0, 1.0, 1.0)? == 38))),
        ("stability bound 4G/(mu n) at G = mu = 1, n = 4", Box::new(move || Ok(close(stability_y_bound(1.0, 1.0, 4)?, 1.0)))),
        ("prox bound vanishes at nu = 0", Box::new(|| Ok(prox_reg_bound(0.0, 1.0, 0.25, 1.0)? == 0.0))),
        (
            "projection onto the unit ball",
            Box::new(|| {
                let p = ConvexDomain::centered_ball(2, 1.0)?.project(&[3.0, 4.0])?;
                Ok(linalg::dist(&p, &[0.6, 0.8]) <= 1e-15)
            }),
        ),
        (
            "box projection clamps",
            Box::new(|| Ok(ConvexDomain::cube(2, -1.0, 1.0)?.project(&[2.0, -0.5])? == vec![1.0, -0.5])),
        ),
        (
            "net covers its domain",
            Box::new(|| {
                let dom = ConvexDomain::cube(2, 0.0, 1.0)?;
                let net = dom.covering_net(0.25)?;
                Ok(net.distance_to(&[0.9, 0.1]) <= 0.25 && net.distance_to(&[0.5, 0.5]) <= 0.25)
            }),
        ),
        (
            "gradient mapping vanishes at an interior saddle",
            Box::new(|| {
                let q = make_quadratic_scsc(2, 1.0, 1.0, 2.0, 10.0, 5)?;
                let pop = Objective::population(&q)?;
                let x = q.interior_saddle_x(&q.population_sample().expect("affine family"));
                Ok(linalg::norm(&gradient_mapping(&pop, &x, &InnerSolveConfig::default())?) <= 1e-9)
            }),
        ),
    ];
    let results = checks
        .iter()
        .map(|(name, f)| {
            Ok(SelfCheck {
                name,
                passed: f()?,
            })
        })
        .collect::<uclab::Result<Vec<_>>>()?;
    let passed = results.iter().all(|r| r.passed);
    let dir = run_dir(&opts.out, Command::Selftest)?;
    dir.write_json("selftest.json", &results)?;
    let mut rep = ReportBuilder::new("Self test", &content_hash(&results.iter().map(|r| r.name).collect::<Vec<_>>()));
    for r in &results {
        rep.line(format!("- {}: {}", r.name, if r.passed { "PASS" } else { "FAIL" }));
        println!("{}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
    }
    dir.write_text("report.md", &rep.finish())?;
    Ok(passed)
}
