use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{maximize_isotropic, mean_params, ConstantsRegistry, MinimaxInstance, SamplePoint};
use crate::domains::ConvexDomain;
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Parameters of `f(x, y; c) = (rho/2)||x||^2 + x^T y - (mu/2)||y||^2 + c^T y`
/// with `c` uniform in the ball of radius `c_radius` around `c_center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticParams {
    pub rho: f64,
    pub mu: f64,
    pub c_center: Vec<f64>,
    pub c_radius: f64,
    pub x_domain: ConvexDomain,
    pub y_domain: ConvexDomain,
}

/// Strongly-convex-strongly-concave quadratic family with
/// `y*_S(x) = proj_Y((x + c_S) / mu)`.
///
/// `L = max(rho, mu) + 1`; `G = sqrt(gx^2 + gy^2)` with
/// `gx = rho sqrt(D_X) + sqrt(D_Y)`, `gy = sqrt(D_X) + mu sqrt(D_Y) + c_max`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    params: QuadraticParams,
    constants: ConstantsRegistry,
}

impl Quadratic {
    pub fn new(params: QuadraticParams) -> Result<Self> {
        let d = params.x_domain.dim();
        check_dim(d, params.y_domain.dim())?;
        check_dim(d, params.c_center.len())?;
        if !(params.rho.is_finite() && params.rho > 0.0) {
            return Err(Error::invalid(format!("rho must be > 0, got {}", params.rho)));
        }
        if !(params.mu.is_finite() && params.mu > 0.0) {
            return Err(Error::invalid(format!("mu must be > 0, got {}", params.mu)));
        }
        if !(params.c_radius.is_finite() && params.c_radius >= 0.0) {
            return Err(Error::invalid("c_radius must be finite and >= 0"));
        }
        let d_x = params.x_domain.squared_bound();
        let d_y = params.y_domain.squared_bound();
        let (rx, ry) = (d_x.sqrt(), d_y.sqrt());
        let c_max = linalg::norm(&params.c_center) + params.c_radius;
        let l = params.rho.max(params.mu) + 1.0;
        let gx = params.rho * rx + ry;
        let gy = rx + params.mu * ry + c_max;
        let g_phi = params.rho * rx + ry.min((rx + c_max) / params.mu);
        let constants = ConstantsRegistry::new(l, params.mu, gx.hypot(gy), g_phi, d_x, d_y)?;
        Ok(Quadratic { params, constants })
    }

    pub fn params(&self) -> &QuadraticParams {
        &self.params
    }

    /// Largest possible `||c||`.
    pub fn c_max(&self) -> f64 {
        linalg::norm(&self.params.c_center) + self.params.c_radius
    }

    /// Saddle point x-component of the sample-mean problem `c`, valid when both
    /// the saddle point and its maximizer are interior: `x* = -c / (1 + rho mu)`.
    pub fn interior_saddle_x(&self, c: &SamplePoint) -> Vec<f64> {
        linalg::scale(c.params(), -1.0 / (1.0 + self.params.rho * self.params.mu))
    }
}

impl MinimaxInstance for Quadratic {
    fn family(&self) -> &'static str {
        "quadratic_scsc"
    }

    fn x_domain(&self) -> &ConvexDomain {
        &self.params.x_domain
    }

    fn y_domain(&self) -> &ConvexDomain {
        &self.params.y_domain
    }

    fn constants(&self) -> &ConstantsRegistry {
        &self.constants
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> SamplePoint {
        let d = self.params.c_center.len();
        let noise = if self.params.c_radius > 0.0 {
            ConvexDomain::centered_ball(d, self.params.c_radius)
                .expect("positive radius")
                .sample_uniform(rng)
        } else {
            vec![0.0; d]
        };
        SamplePoint::new(linalg::add(&self.params.c_center, &noise))
    }

    fn value(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> f64 {
        0.5 * self.params.rho * linalg::norm_sq(x) + linalg::dot(x, y)
            - 0.5 * self.params.mu * linalg::norm_sq(y)
            + linalg::dot(xi.params(), y)
    }

    fn grad_x(&self, x: &[f64], y: &[f64], _xi: &SamplePoint) -> Vec<f64> {
        linalg::axpy(y, self.params.rho, x)
    }

    fn grad_y(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> Vec<f64> {
        let c = linalg::add(x, xi.params());
        linalg::axpy(&c, -self.params.mu, y)
    }

    fn average_sample(&self, samples: &[SamplePoint]) -> Option<SamplePoint> {
        mean_params(samples)
    }

    fn population_sample(&self) -> Option<SamplePoint> {
        Some(SamplePoint::new(self.params.c_center.clone()))
    }

    fn argmax_y(&self, x: &[f64], xi: &SamplePoint, extra_concavity: f64) -> Option<Vec<f64>> {
        let c = linalg::add(x, xi.params());
        Some(maximize_isotropic(
            &self.params.y_domain,
            &c,
            self.params.mu + extra_concavity,
        ))
    }
}

/// Quadratic SC-SC instance on centered balls; the noise center `c_0` has
/// entries `U[-0.5, 0.5]` drawn from `seed` and the noise radius is 1.
pub fn make_quadratic_scsc(
    d: usize,
    rho: f64,
    mu: f64,
    radius_x: f64,
    radius_y: f64,
    seed: u64,
) -> Result<Quadratic> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_center = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    Quadratic::new(QuadraticParams {
        rho,
        mu,
        c_center,
        c_radius: 1.0,
        x_domain: ConvexDomain::centered_ball(d, radius_x)?,
        y_domain: ConvexDomain::centered_ball(d, radius_y)?,
    })
}
