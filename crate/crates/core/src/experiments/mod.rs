//! Monte Carlo experiments: uniform-convergence curves, rate fits, inequality
//! verifiers and the optimization/generalization decomposition.
//!
//! Replicate `r` at sample size `n` always uses the dataset seeded by
//! `derive_seed(&[base_seed, n, r])`, so results do not depend on scheduling.
//! Parallel loops collect in index order before any reduction.

mod artifacts;
mod decompose;
mod uniform;
mod verify;

use serde::{Deserialize, Serialize};

use crate::domains::{CoveringNet, DEFAULT_CAPACITY};
use crate::error::{Error, Result};
use crate::oracles::InnerSolveConfig;
use crate::problems::{derive_seed, FamilySpec, MinimaxInstance};

pub use artifacts::{curve_csv, replicates_csv, ArtifactDir, ReportBuilder};
pub use decompose::{gdmax_solver, run_decomposition, DecompositionReport, DecompositionRow, GdmaxResult};
pub use uniform::{
    estimate_uniform_convergence_ncc, estimate_uniform_convergence_ncc_on, estimate_uniform_convergence_ncsc,
    estimate_uniform_convergence_ncsc_on,
};
pub use verify::{
    subgaussian_tail_check, verify_mapping_ordering, verify_mapping_vs_gradient, verify_prox_reg_lemma,
    verify_stability, LemmaCase, LemmaReport, MappingReport, StabilityReport, TailReport, TailRow,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Covering radius `upsilon`.
    pub radius: f64,
    /// Keep only this many randomly chosen net points (voids the covering guarantee).
    pub subsample: Option<usize>,
    pub capacity: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            radius: 0.11,
            subsample: None,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityOptions {
    pub n_values: Vec<u64>,
    pub trials: usize,
    /// Evaluation point; the center of `X` when absent.
    pub x: Option<Vec<f64>>,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            n_values: vec![10, 100, 1000],
            trials: 1000,
            x: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaOptions {
    /// Number of random points in `X`.
    pub points: usize,
    /// Grid resolution of the brute-force cross-check (`d <= 3` only).
    pub grid_resolution: Option<f64>,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions {
            points: 20,
            grid_resolution: Some(1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionOptions {
    /// Gradient steps given to the baseline solver.
    pub steps: usize,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        DecompositionOptions { steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailOptions {
    pub n: u64,
    pub draws: usize,
    pub x: Option<Vec<f64>>,
    /// Thresholds as multiples of sigma.
    pub multiples: Vec<f64>,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            n: 100,
            draws: 1000,
            x: None,
            multiples: vec![1.0, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingOptions {
    /// Number of datasets drawn at each `n` of the schedule.
    pub draws: usize,
}

impl Default for MappingOptions {
    fn default() -> Self {
        MappingOptions { draws: 20 }
    }
}

/// Everything an experiment run depends on. Serialized form is hashed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: FamilySpec,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default = "default_schedule")]
    pub n_schedule: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub inner: InnerSolveConfig,
    #[serde(default)]
    pub prox: InnerSolveConfig,
    /// Envelope parameter; `1/(2L)` when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_nu_grid")]
    pub nu_grid: Vec<f64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default)]
    pub stability: StabilityOptions,
    #[serde(default)]
    pub lemma: LemmaOptions,
    #[serde(default)]
    pub decomposition: DecompositionOptions,
    #[serde(default)]
    pub tails: TailOptions,
    #[serde(default)]
    pub mapping: MappingOptions,
}

fn default_schedule() -> Vec<u64> {
    vec![64, 256, 1024, 4096]
}

fn default_replications() -> usize {
    50
}

fn default_nu_grid() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}

fn default_slack() -> f64 {
    1.05
}

impl ExperimentConfig {
    pub fn new(instance: FamilySpec) -> Self {
        ExperimentConfig {
            instance,
            net: NetConfig::default(),
            n_schedule: default_schedule(),
            replications: default_replications(),
            base_seed: 0,
            inner: InnerSolveConfig::default(),
            prox: InnerSolveConfig::default(),
            lambda: None,
            nu_grid: default_nu_grid(),
            slack: default_slack(),
            stability: StabilityOptions::default(),
            lemma: LemmaOptions::default(),
            decomposition: DecompositionOptions::default(),
            tails: TailOptions::default(),
            mapping: MappingOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Configuration(m));
        if self.n_schedule.is_empty() {
            return cfg_err("n_schedule is empty".into());
        }
        if self.n_schedule[0] == 0 {
            return cfg_err("n_schedule entries must be >= 1".into());
        }
        if self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return cfg_err(format!("n_schedule must be strictly increasing, got {:?}", self.n_schedule));
        }
        if self.replications < 2 {
            return cfg_err(format!("replications must be >= 2, got {}", self.replications));
        }
        if !(self.slack.is_finite() && self.slack >= 1.0) {
            return cfg_err(format!("slack must be >= 1, got {}", self.slack));
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l > 0.0) {
                return cfg_err(format!("lambda must be > 0, got {l}"));
            }
        }
        if self.nu_grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return cfg_err("nu_grid entries must be finite and >= 0".into());
        }
        self.inner.validate().map_err(|e| e.context("inner"))?;
        self.prox.validate().map_err(|e| e.context("prox"))?;
        Ok(())
    }

    pub fn build_instance(&self) -> Result<Box<dyn MinimaxInstance>> {
        self.instance.build().map_err(|e| e.context("instance"))
    }

    /// The configured net over `X`.
    pub fn build_net(&self, instance: &dyn MinimaxInstance) -> Result<CoveringNet> {
        let net = instance
            .x_domain()
            .covering_net_with_cap(self.net.radius, self.net.capacity)
            .map_err(|e| e.context("net"))?;
        Ok(match self.net.subsample {
            Some(k) => net.subsample(k, derive_seed(&[self.base_seed, u64::MAX])),
            None => net,
        })
    }

    /// `lambda`, or `1/(2L)` for `instance`.
    pub fn lambda_for(&self, instance: &dyn MinimaxInstance) -> f64 {
        self.lambda.unwrap_or(0.5 / instance.constants().l)
    }
}

/// Seed of replicate `r` at sample size `n`.
pub fn replicate_seed(base_seed: u64, n: u64, r: usize) -> u64 {
    derive_seed(&[base_seed, n, r as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: u64,
    /// Mean over replicates of the net supremum of the deviation.
    pub mean: f64,
    /// Sample standard deviation over `sqrt(R)`.
    pub std_error: f64,
    /// Iteration budget allotted to each oracle call at a net point.
    pub per_point_solver_budget: usize,
    /// Additive term bridging the net maximum and the supremum over `X`; reported, never applied.
    pub correction: f64,
    /// Per-replicate net suprema in replicate order.
    pub replicates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    /// `"ncsc"` (primal gradients) or `"ncc"` (Moreau gradients).
    pub setting: String,
    pub net_size: usize,
    pub net_radius: f64,
    pub lambda: Option<f64>,
    pub rows: Vec<CurveRow>,
}

/// Mean and standard error (`std / sqrt(len)`, `std` with `len - 1` denominator).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ordinary least squares of `ln mean` on `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
}

pub fn fit_rate(curve: &ConvergenceCurve) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.n as f64, r.mean)).collect();
    fit_power_law(&pts)
}

/// OLS fit of `ln y = intercept + slope ln x`; needs at least three points with positive `y`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("rate fit needs >= 3 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && y.is_finite())) {
        return Err(Error::invalid(format!("rate fit needs positive values, got ({x}, {y})")));
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct n"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        slope_std_error: (ssr / (k - 2.0) / sxx).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Family;

    fn curve(points: &[(u64, f64)]) -> ConvergenceCurve {
        ConvergenceCurve {
            setting: "ncsc".into(),
            net_size: 1,
            net_radius: 0.1,
            lambda: None,
            rows: points
                .iter()
                .map(|&(n, mean)| CurveRow {
                    n,
                    mean,
                    std_error: 0.0,
                    per_point_solver_budget: 0,
                    correction: 0.0,
                    replicates: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn exact_power_laws() {
        let ns = [64u64, 256, 1024, 4096];
        let half: Vec<_> = ns.iter().map(|&n| (n, 3.0 * (n as f64).powf(-0.5))).collect();
        let f = fit_rate(&curve(&half)).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!(f.slope_std_error < 1e-12);
        let quarter: Vec<_> = ns.iter().map(|&n| (n, 0.7 * (n as f64).powf(-0.25))).collect();
        assert!((fit_rate(&curve(&quarter)).unwrap().slope + 0.25).abs() < 1e-12);
        let flat: Vec<_> = ns.iter().map(|&n| (n, 2.0)).collect();
        assert!(fit_rate(&curve(&flat)).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn rate_fit_preconditions() {
        assert!(fit_rate(&curve(&[(1, 1.0), (2, 0.5)])).is_err());
        assert!(fit_rate(&curve(&[(1, 1.0), (2, 0.0), (4, 0.1)])).is_err());
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"instance":{"family":"sin_bilinear_ncsc","d":2,"mu":1.0,"radius_x":1.0,"radius_y":4.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.instance.family, Family::SinBilinearNcsc);
        assert_eq!(cfg.n_schedule, vec![64, 256, 1024, 4096]);
        assert_eq!(cfg.replications, 50);
        assert_eq!(cfg.slack, 1.05);
        cfg.validate().unwrap();
        let mut bad = cfg.clone();
        bad.n_schedule = vec![10, 10];
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.replications = 1;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.slack = 0.9;
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"instance":{"family":"sin_bilinear_ncsc","d":1,"radius_x":1,"radius_y":1},"typo":1}"#).is_err());
    }
}
