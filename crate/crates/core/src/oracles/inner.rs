use serde::{Deserialize, Serialize};

use super::{InnerSolveConfig, SaddleFunction, StepRule};
use crate::domains::ConvexDomain;
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Result of maximizing `F(x, .)` over `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub y: Vec<f64>,
    /// `F(x, y)` at the returned point.
    pub value: f64,
    /// Certified bound: `||y - y*(x)||` when `mu > 0`, value gap when `mu = 0`.
    /// Zero for closed-form maximizers.
    pub residual: f64,
    /// Bound on `max_y F(x, y) - value`.
    pub value_gap: f64,
    pub iterations: usize,
}

pub(crate) fn check_point(domain: &ConvexDomain, x: &[f64], what: &str) -> Result<()> {
    check_dim(domain.dim(), x.len())?;
    if !linalg::is_finite(x) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    if !domain.contains(x, 1e-9 * (1.0 + linalg::norm(x))) {
        return Err(Error::invalid(format!("{what} lies outside its domain")));
    }
    Ok(())
}

/// `argmax_{y in Y} F(x, y)` with a certificate.
///
/// Projected gradient ascent with step `1/L` (or backtracking). With `mu > 0`
/// it stops once `2 ||G(y)|| / mu <= tolerance`, which bounds the distance to the
/// maximizer; with `mu = 0` once `||G(y)|| diam(Y) <= tolerance`, which bounds the
/// value gap. `G` is the gradient mapping of the ascent step.
pub fn solve_inner<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], cfg: &InnerSolveConfig) -> Result<InnerSolution> {
    check_point(f.x_domain(), x, "x")?;
    solve_inner_from(f, x, None, cfg)
}

pub(crate) fn solve_inner_from<F: SaddleFunction + ?Sized>(
    f: &F,
    x: &[f64],
    start: Option<&[f64]>,
    cfg: &InnerSolveConfig,
) -> Result<InnerSolution> {
    cfg.validate()?;
    let y_dom = f.y_domain();
    if cfg.closed_form {
        if let Some(y) = f.argmax_y(x) {
            let value = f.value(x, &y);
            return Ok(InnerSolution {
                y,
                value,
                residual: 0.0,
                value_gap: 0.0,
                iterations: 0,
            });
        }
    }
    let mu = f.concavity();
    let l = f.smoothness();
    let diam = y_dom.diameter();
    let mut y = match start {
        Some(s) => y_dom.project_unchecked(s),
        None => y_dom.center(),
    };
    let mut lk = l;
    let mut fy = f.value(x, &y);
    let mut last = f64::INFINITY;
    for k in 1..=cfg.max_iterations {
        let g = f.grad_y(x, &y);
        let (y_next, f_next) = loop {
            let cand = y_dom.project_unchecked(&linalg::axpy(&y, 1.0 / lk, &g));
            let fc = f.value(x, &cand);
            if cfg.step_rule == StepRule::Fixed {
                break (cand, fc);
            }
            let step = linalg::sub(&cand, &y);
            let model = fy + linalg::dot(&g, &step) - 0.5 * lk * linalg::norm_sq(&step);
            if fc >= model - 1e-15 * (1.0 + fy.abs()) || lk > 1e12 * l.max(1.0) {
                break (cand, fc);
            }
            lk *= 2.0;
        };
        let mapping_norm = lk * linalg::dist(&y_next, &y);
        // ascent from y gives f(y+) - f(y*) >= -||G|| ||y - y*||
        let (residual, value_gap) = if mu > 0.0 {
            let r = 2.0 * mapping_norm / mu;
            (r, mapping_norm * r)
        } else {
            let gap = mapping_norm * diam;
            (gap, gap)
        };
        last = residual;
        y = y_next;
        fy = f_next;
        if residual <= cfg.tolerance {
            return Ok(InnerSolution {
                y,
                value: fy,
                residual,
                value_gap,
                iterations: k,
            });
        }
        if cfg.step_rule == StepRule::Backtracking {
            lk = (lk * 0.5).max(mu.max(1e-12 * l));
        }
    }
    Err(Error::Convergence {
        iterations: cfg.max_iterations,
        residual: last,
    })
}

/// `(y*(x), F(x, y*(x)))`
pub fn inner_max<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], cfg: &InnerSolveConfig) -> Result<(Vec<f64>, f64)> {
    let s = solve_inner(f, x, cfg)?;
    Ok((s.y, s.value))
}

/// `Phi(x) = max_y F(x, y)`
pub fn primal_value<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], cfg: &InnerSolveConfig) -> Result<f64> {
    Ok(solve_inner(f, x, cfg)?.value)
}

/// Danskin gradient `grad_x F(x, y*(x))`; error at most `L * tolerance`.
pub fn primal_grad_ncsc<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], cfg: &InnerSolveConfig) -> Result<Vec<f64>> {
    if f.concavity() <= 0.0 {
        return Err(Error::Unsupported(
            "primal gradient needs mu > 0; for mu = 0 use the Moreau envelope (moreau_grad)".into(),
        ));
    }
    let s = solve_inner(f, x, cfg)?;
    Ok(f.grad_x(x, &s.y))
}

/// `L~ (x - proj_X(x - grad / L~))`
pub fn mapping_from_gradient(x_domain: &ConvexDomain, x: &[f64], grad: &[f64], l_tilde: f64) -> Result<Vec<f64>> {
    check_dim(x_domain.dim(), x.len())?;
    check_dim(x.len(), grad.len())?;
    if !(l_tilde.is_finite() && l_tilde > 0.0) {
        return Err(Error::invalid(format!("L~ must be finite and positive, got {l_tilde}")));
    }
    let stepped = x_domain.project(&linalg::axpy(x, -1.0 / l_tilde, grad))?;
    Ok(linalg::scale(&linalg::sub(x, &stepped), l_tilde))
}

/// Gradient mapping of `Phi` with step `1/L~`, `L~ = L(1 + kappa)`.
pub fn gradient_mapping<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], cfg: &InnerSolveConfig) -> Result<Vec<f64>> {
    let grad = primal_grad_ncsc(f, x, cfg)?;
    mapping_from_gradient(f.x_domain(), x, &grad, f.l_tilde())
}
