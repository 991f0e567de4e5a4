use serde::Serialize;

use super::inner::{check_point, solve_inner_from};
use super::{InnerSolveConfig, SaddleFunction};
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Proximal point of `Phi` and the matching Moreau-envelope gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxResult {
    prox_point: Vec<f64>,
    moreau_grad: Vec<f64>,
    lambda: f64,
    envelope_value: f64,
    residual: f64,
    iterations: usize,
}

impl ProxResult {
    fn new(x: &[f64], prox_point: Vec<f64>, lambda: f64, envelope_value: f64, residual: f64, iterations: usize) -> Self {
        let moreau_grad = linalg::scale(&linalg::sub(x, &prox_point), 1.0 / lambda);
        ProxResult {
            prox_point,
            moreau_grad,
            lambda,
            envelope_value,
            residual,
            iterations,
        }
    }

    pub fn prox_point(&self) -> &[f64] {
        &self.prox_point
    }

    /// `(x - prox) / lambda`
    pub fn moreau_grad(&self) -> &[f64] {
        &self.moreau_grad
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Upper estimate of `Phi^lambda(x)`; exact up to the solver tolerances.
    pub fn envelope_value(&self) -> f64 {
        self.envelope_value
    }

    /// Certified bound on the distance from `prox_point` to the exact proximal point.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// `1 / (2L)`
pub fn default_lambda<F: SaddleFunction + ?Sized>(f: &F) -> f64 {
    0.5 / f.smoothness()
}

struct ZSolve {
    z: Vec<f64>,
    /// `min_z H(z, y)` lower bound
    psi_lower: f64,
    /// `H(z, y) - min_z H(., y)` bound
    slack: f64,
}

/// `min_{z in X} F(z, y) + ||z - x||^2 / (2 lambda)` by projected gradient descent.
/// The objective is `m`-strongly convex and `(L + 1/lambda)`-smooth.
fn solve_z<F: SaddleFunction + ?Sized>(
    f: &F,
    x: &[f64],
    lambda: f64,
    y: &[f64],
    start: &[f64],
    target: f64,
    max_iterations: usize,
) -> Result<ZSolve> {
    let dom = f.x_domain();
    let m = 1.0 / lambda - f.smoothness();
    let step = 1.0 / (f.smoothness() + 1.0 / lambda);
    let h = |z: &[f64]| f.value(z, y) + linalg::norm_sq(&linalg::sub(z, x)) / (2.0 * lambda);
    let mut z = start.to_vec();
    for _ in 0..max_iterations {
        let grad = linalg::axpy(&f.grad_x(&z, y), 1.0 / lambda, &linalg::sub(&z, x));
        let next = dom.project_unchecked(&linalg::axpy(&z, -step, &grad));
        let g_norm = linalg::dist(&next, &z) / step;
        z = next;
        // H(z+) - min H <= ||G|| ||z - z*|| <= 2 ||G||^2 / m
        let slack = 2.0 * g_norm * g_norm / m;
        if slack <= target {
            return Ok(ZSolve {
                psi_lower: h(&z) - slack,
                z,
                slack,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
        residual: f64::NAN,
    })
}

/// `prox_{lambda Phi}(x) = argmin_{z in X} Phi(z) + ||z - x||^2 / (2 lambda)` for `lambda < 1/L`.
///
/// Solved through the concave dual `psi(y) = min_z F(z, y) + ||z - x||^2 / (2 lambda)`
/// by accelerated projected ascent with restarts. The primal candidate
/// `z(y)` is certified by the duality gap: with `m = 1/lambda - L`,
/// `||z - prox|| <= sqrt(2 gap / m)`, and the loop stops once that bound is at
/// most `cfg.tolerance`. Rounding limits that certificate to roughly
/// `sqrt(2 eps_mach |F| / m)`, so tolerances much below `1e-7` may not be reachable.
pub fn prox_point<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], lambda: f64, cfg: &InnerSolveConfig) -> Result<ProxResult> {
    cfg.validate()?;
    let dom = f.x_domain();
    check_dim(dom.dim(), x.len())?;
    if !linalg::is_finite(x) {
        return Err(Error::invalid("x has non-finite entries"));
    }
    let l = f.smoothness();
    if !(lambda.is_finite() && lambda > 0.0 && lambda * l < 1.0) {
        return Err(Error::invalid(format!(
            "lambda = {lambda} must lie in (0, 1/L) = (0, {}): Phi is only L-weakly convex",
            1.0 / l
        )));
    }
    let m = 1.0 / lambda - l;
    let target_gap = 0.5 * m * cfg.tolerance * cfg.tolerance;
    let z_target = 0.01 * target_gap;
    let inner_cfg = cfg.with_tolerance((cfg.tolerance / 10.0).min(0.1 * target_gap / (1.0 + f.y_domain().diameter())));
    let y_dom = f.y_domain();
    let l_psi = l + l * l / m;

    let x_proj = dom.project_unchecked(x);
    check_point(dom, &x_proj, "projected x")?;
    let mut y = solve_inner_from(f, &x_proj, None, &inner_cfg)?.y;
    let mut v = y.clone();
    let mut t = 1.0f64;
    let mut z_warm = x_proj.clone();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut prev_psi = f64::NEG_INFINITY;
    let mut residual = f64::INFINITY;

    for k in 1..=cfg.max_iterations {
        let zv = solve_z(f, x, lambda, &v, &z_warm, z_target, cfg.max_iterations)?;
        let gy = f.grad_y(&zv.z, &v);
        let y_next = y_dom.project_unchecked(&linalg::axpy(&v, 1.0 / l_psi, &gy));
        let zy = solve_z(f, x, lambda, &y_next, &zv.z, z_target, cfg.max_iterations)?;
        z_warm = zy.z.clone();

        // P(z) - psi(y) for the pair (z(y), y): the proximal terms cancel, leaving
        // Phi(z) - F(z, y) plus the inner-solve slacks
        let inner = solve_inner_from(f, &zy.z, Some(&y_next), &inner_cfg)?;
        let gap = (inner.value - f.value(&zy.z, &y_next)).max(0.0) + inner.value_gap + zy.slack;
        let r = (2.0 * gap / m).sqrt();
        if best.as_ref().is_none_or(|(br, _, _)| r < *br) {
            let envelope = inner.value + inner.value_gap + linalg::norm_sq(&linalg::sub(&zy.z, x)) / (2.0 * lambda);
            best = Some((r, zy.z.clone(), envelope));
        }
        residual = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if residual <= cfg.tolerance {
            let (r, z, envelope) = best.take().expect("set above");
            return Ok(ProxResult::new(x, z, lambda, envelope, r, k));
        }

        if zy.psi_lower < prev_psi {
            // restart momentum
            t = 1.0;
            v = y_next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            v = y_dom.project_unchecked(&linalg::axpy(&y_next, beta, &linalg::sub(&y_next, &y)));
            t = t_next;
        }
        prev_psi = zy.psi_lower;
        y = y_next;
    }
    Err(Error::Convergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// `grad Phi^lambda(x) = (x - prox_{lambda Phi}(x)) / lambda`
pub fn moreau_grad<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], lambda: f64, cfg: &InnerSolveConfig) -> Result<Vec<f64>> {
    Ok(prox_point(f, x, lambda, cfg)?.moreau_grad)
}

/// `Phi^lambda(x) = min_z Phi(z) + ||z - x||^2 / (2 lambda)`
pub fn moreau_envelope<F: SaddleFunction + ?Sized>(f: &F, x: &[f64], lambda: f64, cfg: &InnerSolveConfig) -> Result<f64> {
    Ok(prox_point(f, x, lambda, cfg)?.envelope_value)
}
