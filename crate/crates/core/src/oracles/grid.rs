use rayon::prelude::*;

use super::{primal_value, InnerSolveConfig, SaddleFunction};
use crate::domains::{uniform_grid, ConvexDomain};
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Largest grid the exhaustive oracles will evaluate.
pub const GRID_CAPACITY: usize = 10_000_000;

const MAX_GRID_DIM: usize = 3;

fn domain_grid(domain: &ConvexDomain, resolution: f64) -> Result<Vec<Vec<f64>>> {
    if domain.dim() > MAX_GRID_DIM {
        return Err(Error::Unsupported(format!(
            "grid oracles handle dimension <= {MAX_GRID_DIM}, got {}",
            domain.dim()
        )));
    }
    let (lo, hi) = domain.bounding_box();
    let pts = uniform_grid(&lo, &hi, resolution, GRID_CAPACITY)?;
    Ok(pts.into_iter().filter(|p| domain.contains(p, 1e-12)).collect())
}

/// Exhaustive `argmax` of `func` over a uniform grid on `domain` (box points
/// clipped to the domain). Ties go to the first grid point in row-major order.
pub fn brute_force_max_grid(
    domain: &ConvexDomain,
    func: impl Fn(&[f64]) -> f64 + Sync,
    resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    let pts = domain_grid(domain, resolution)?;
    let values: Vec<f64> = pts.par_iter().map(|p| func(p)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    let v = *values
        .get(best)
        .ok_or_else(|| Error::invalid("grid has no points inside the domain"))?;
    Ok((pts[best].clone(), v))
}

/// Exhaustive minimizer of `Phi(z) + ||z - x||^2 / (2 lambda)` over a grid on `X`.
pub fn brute_force_prox_grid<F: SaddleFunction + ?Sized>(
    f: &F,
    x: &[f64],
    lambda: f64,
    resolution: f64,
    cfg: &InnerSolveConfig,
) -> Result<Vec<f64>> {
    check_dim(f.x_domain().dim(), x.len())?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    let pts = domain_grid(f.x_domain(), resolution)?;
    let values = pts
        .par_iter()
        .map(|z| Ok(primal_value(f, z, cfg)? + linalg::norm_sq(&linalg::sub(z, x)) / (2.0 * lambda)))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    pts.get(best)
        .cloned()
        .ok_or_else(|| Error::invalid("grid has no points inside the domain"))
}
