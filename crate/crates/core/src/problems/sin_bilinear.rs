use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{maximize_isotropic, mean_params, ConstantsRegistry, MinimaxInstance, SamplePoint};
use crate::domains::{ConvexDomain, Shape};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};

/// Parameters of `f(x, y; xi) = a sin(w^T x) + y^T (B x + b) - (mu/2)||y||^2`
/// with `xi = (a, b)`, `a ~ U[a_min, a_max]` and `b` uniform in the ball of
/// radius `b_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinBilinearParams {
    pub w: Vec<f64>,
    /// `d' x d` coupling matrix.
    pub coupling: Matrix,
    pub mu: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub b_radius: f64,
    pub x_domain: ConvexDomain,
    pub y_domain: ConvexDomain,
}

/// Sin-bilinear family. With `mu > 0` the primal function is
/// `Phi_S(x) = a_S sin(w^T x) + ||B x + b_S||^2 / (2 mu)` whenever the
/// maximizer is interior; with `mu = 0` and `Y` a centered ball of radius
/// `R_Y` it is `a_S sin(w^T x) + R_Y ||B x + b_S||`.
///
/// Constants (conservative):
/// `L = max(a_max ||w||^2, mu) + ||B||_F`,
/// `G = sqrt(gx^2 + gy^2)` with `gx = a_max ||w|| + ||B||_F sqrt(D_Y)` and
/// `gy = ||B||_F sqrt(D_X) + b_radius + mu sqrt(D_Y)`.
#[derive(Debug, Clone)]
pub struct SinBilinear {
    params: SinBilinearParams,
    constants: ConstantsRegistry,
}

impl SinBilinear {
    pub fn new(params: SinBilinearParams) -> Result<Self> {
        let d = params.x_domain.dim();
        let dp = params.y_domain.dim();
        check_dim(d, params.w.len())?;
        check_dim(d, params.coupling.cols())?;
        check_dim(dp, params.coupling.rows())?;
        if !(params.mu.is_finite() && params.mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", params.mu)));
        }
        if !(params.a_min <= params.a_max && params.a_min.is_finite() && params.a_max.is_finite()) {
            return Err(Error::invalid("need finite a_min <= a_max"));
        }
        if !(params.b_radius.is_finite() && params.b_radius >= 0.0) {
            return Err(Error::invalid("b_radius must be finite and >= 0"));
        }
        let a_abs = params.a_min.abs().max(params.a_max.abs());
        let w_norm = linalg::norm(&params.w);
        let b_norm = params.coupling.frobenius();
        let d_x = params.x_domain.squared_bound();
        let d_y = params.y_domain.squared_bound();
        let (rx, ry) = (d_x.sqrt(), d_y.sqrt());
        let l = (a_abs * w_norm * w_norm).max(params.mu) + b_norm;
        let gx = a_abs * w_norm + b_norm * ry;
        let gy = b_norm * rx + params.b_radius + params.mu * ry;
        let y_reach = if params.mu > 0.0 {
            ry.min((b_norm * rx + params.b_radius) / params.mu)
        } else {
            ry
        };
        let g_phi = a_abs * w_norm + b_norm * y_reach;
        // degenerate parameter choices (w = 0, B = 0) still need positive constants
        let floor = f64::EPSILON;
        let constants = ConstantsRegistry::new(
            l.max(floor),
            params.mu,
            gx.hypot(gy).max(floor),
            g_phi.max(floor),
            d_x,
            d_y,
        )?;
        Ok(SinBilinear { params, constants })
    }

    pub fn params(&self) -> &SinBilinearParams {
        &self.params
    }

    /// `B x + b`
    fn linear_term(&self, x: &[f64], xi: &SamplePoint) -> Vec<f64> {
        let mut c = self.params.coupling.mul_vec(x);
        for (ci, bi) in c.iter_mut().zip(&xi.params()[1..]) {
            *ci += bi;
        }
        c
    }

    /// Closed-form primal value at `x` for the objective `f(., .; xi)`:
    /// `a sin(w^T x) + ||c||^2/(2 mu)` when `c / mu` lies in `Y` (`mu > 0`), or
    /// `a sin(w^T x) + R_Y ||c||` for a centered ball `Y` (`mu = 0`), where `c = B x + b`.
    pub fn closed_form_primal(&self, x: &[f64], xi: &SamplePoint) -> Option<f64> {
        let a = xi.params()[0];
        let c = self.linear_term(x, xi);
        let smooth = a * linalg::dot(&self.params.w, x).sin();
        if self.params.mu > 0.0 {
            let y = linalg::scale(&c, 1.0 / self.params.mu);
            self.params
                .y_domain
                .contains(&y, 0.0)
                .then(|| smooth + linalg::norm_sq(&c) / (2.0 * self.params.mu))
        } else {
            match self.params.y_domain.shape() {
                Shape::Ball { center, radius } if linalg::norm(center) == 0.0 => {
                    Some(smooth + radius * linalg::norm(&c))
                }
                _ => None,
            }
        }
    }

    /// Closed-form primal gradient under the same conditions as
    /// [`closed_form_primal`](Self::closed_form_primal); for `mu = 0` it also
    /// requires `B x + b != 0`.
    pub fn closed_form_primal_grad(&self, x: &[f64], xi: &SamplePoint) -> Option<Vec<f64>> {
        let a = xi.params()[0];
        let c = self.linear_term(x, xi);
        let smooth = linalg::scale(&self.params.w, a * linalg::dot(&self.params.w, x).cos());
        if self.params.mu > 0.0 {
            let y = linalg::scale(&c, 1.0 / self.params.mu);
            if !self.params.y_domain.contains(&y, 0.0) {
                return None;
            }
            Some(linalg::add(&smooth, &self.params.coupling.mul_t_vec(&y)))
        } else {
            let cn = linalg::norm(&c);
            match self.params.y_domain.shape() {
                Shape::Ball { center, radius } if linalg::norm(center) == 0.0 && cn > 0.0 => {
                    let y = linalg::scale(&c, radius / cn);
                    Some(linalg::add(&smooth, &self.params.coupling.mul_t_vec(&y)))
                }
                _ => None,
            }
        }
    }

    /// `dist(0, dPhi(z) + N_X(z))` for the `mu = 0` family with a centered ball `Y`,
    /// where `Phi(z) = a sin(w^T z) + R_Y ||B z + b||` is evaluated at sample `xi`.
    /// The subdifferential of the norm term at a kink is `R_Y B^T u`, `||u|| <= 1`;
    /// on the boundary of a ball `X` the normal cone adds `t z_dir`, `t >= 0`.
    pub fn stationarity_measure(&self, z: &[f64], xi: &SamplePoint) -> Option<f64> {
        if self.params.mu != 0.0 {
            return None;
        }
        let radius_y = match self.params.y_domain.shape() {
            Shape::Ball { center, radius } if linalg::norm(center) == 0.0 => *radius,
            _ => return None,
        };
        let a = xi.params()[0];
        let smooth = linalg::scale(&self.params.w, a * linalg::dot(&self.params.w, z).cos());
        let c = self.linear_term(z, xi);
        let cn = linalg::norm(&c);
        let normal = match self.params.x_domain.shape() {
            Shape::Ball { center, radius } => {
                let off = linalg::sub(z, center);
                let r = linalg::norm(&off);
                (r >= radius * (1.0 - 1e-12)).then(|| linalg::scale(&off, 1.0 / r))
            }
            Shape::Box { .. } => None,
        };
        let b = &self.params.coupling;
        if cn > 1e-14 {
            let g = linalg::add(&smooth, &b.mul_t_vec(&linalg::scale(&c, radius_y / cn)));
            return Some(match normal {
                Some(n) => {
                    let t = (-linalg::dot(&g, &n)).max(0.0);
                    linalg::norm(&linalg::axpy(&g, t, &n))
                }
                None => linalg::norm(&g),
            });
        }
        // kink: min over ||u|| <= 1, t >= 0 of ||smooth + R B^T u + t n||, a small convex QP
        let dp = b.rows();
        let mut u = vec![0.0; dp];
        let mut t = 0.0;
        let lip = (radius_y * b.frobenius()).powi(2) + 1.0;
        let step = 1.0 / lip;
        for _ in 0..20_000 {
            let mut r = linalg::add(&smooth, &b.mul_t_vec(&linalg::scale(&u, radius_y)));
            if let Some(n) = &normal {
                r = linalg::axpy(&r, t, n);
            }
            let gu = linalg::scale(&b.mul_vec(&r), radius_y);
            let nu = linalg::axpy(&u, -step, &gu);
            let nn = linalg::norm(&nu);
            u = if nn > 1.0 { linalg::scale(&nu, 1.0 / nn) } else { nu };
            if let Some(n) = &normal {
                t = (t - step * linalg::dot(&r, n)).max(0.0);
            }
        }
        let mut r = linalg::add(&smooth, &b.mul_t_vec(&linalg::scale(&u, radius_y)));
        if let Some(n) = &normal {
            r = linalg::axpy(&r, t, n);
        }
        Some(linalg::norm(&r))
    }
}

impl MinimaxInstance for SinBilinear {
    fn family(&self) -> &'static str {
        if self.params.mu > 0.0 {
            "sin_bilinear_ncsc"
        } else {
            "sin_bilinear_ncc"
        }
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
        let a = if self.params.a_min < self.params.a_max {
            rng.random_range(self.params.a_min..self.params.a_max)
        } else {
            self.params.a_min
        };
        let dp = self.params.y_domain.dim();
        let mut p = Vec::with_capacity(dp + 1);
        p.push(a);
        if self.params.b_radius > 0.0 {
            let ball = ConvexDomain::centered_ball(dp, self.params.b_radius)
                .expect("positive radius");
            p.extend(ball.sample_uniform(rng));
        } else {
            p.extend(std::iter::repeat_n(0.0, dp));
        }
        SamplePoint::new(p)
    }

    fn value(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> f64 {
        let a = xi.params()[0];
        let c = self.linear_term(x, xi);
        a * linalg::dot(&self.params.w, x).sin() + linalg::dot(y, &c)
            - 0.5 * self.params.mu * linalg::norm_sq(y)
    }

    fn grad_x(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> Vec<f64> {
        let a = xi.params()[0];
        let s = a * linalg::dot(&self.params.w, x).cos();
        linalg::axpy(&self.params.coupling.mul_t_vec(y), s, &self.params.w)
    }

    fn grad_y(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> Vec<f64> {
        let c = self.linear_term(x, xi);
        linalg::axpy(&c, -self.params.mu, y)
    }

    fn average_sample(&self, samples: &[SamplePoint]) -> Option<SamplePoint> {
        mean_params(samples)
    }

    fn population_sample(&self) -> Option<SamplePoint> {
        let mut p = vec![0.5 * (self.params.a_min + self.params.a_max)];
        p.extend(std::iter::repeat_n(0.0, self.params.y_domain.dim()));
        Some(SamplePoint::new(p))
    }

    fn argmax_y(&self, x: &[f64], xi: &SamplePoint, extra_concavity: f64) -> Option<Vec<f64>> {
        let c = self.linear_term(x, xi);
        Some(maximize_isotropic(
            &self.params.y_domain,
            &c,
            self.params.mu + extra_concavity,
        ))
    }
}

fn seeded_params(d: usize, d_prime: usize, mu: f64, radius_x: f64, radius_y: f64, seed: u64) -> Result<SinBilinearParams> {
    if d == 0 || d_prime == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..d_prime)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Ok(SinBilinearParams {
        w: vec![1.0 / (d as f64).sqrt(); d],
        coupling: Matrix::from_rows(rows),
        mu,
        a_min: 0.5,
        a_max: 1.5,
        b_radius: 0.5,
        x_domain: ConvexDomain::centered_ball(d, radius_x)?,
        y_domain: ConvexDomain::centered_ball(d_prime, radius_y)?,
    })
}

/// NC-SC sin-bilinear instance: unit-norm `w = 1/sqrt(d)`, `B` with entries
/// `U[-1, 1]` drawn from `seed`, `a ~ U[0.5, 1.5]`, `b` uniform in the ball of
/// radius 0.5, centered balls for `X` and `Y`. Requires
/// `radius_y >= (||B||_F radius_x + 0.5) / mu` so the inner maximizer is interior.
pub fn make_sin_bilinear_ncsc(
    d: usize,
    d_prime: usize,
    mu: f64,
    radius_x: f64,
    radius_y: f64,
    seed: u64,
) -> Result<SinBilinear> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Configuration(format!(
            "NC-SC family needs mu > 0, got {mu}"
        )));
    }
    let params = seeded_params(d, d_prime, mu, radius_x, radius_y, seed)?;
    let needed = (params.coupling.frobenius() * radius_x + params.b_radius) / mu;
    if radius_y < needed {
        return Err(Error::Configuration(format!(
            "radius_y = {radius_y} is below (||B|| radius_x + b_max)/mu = {needed:.6}; the inner maximizer would not be interior"
        )));
    }
    SinBilinear::new(params)
}

/// NC-C sin-bilinear instance (`mu = 0`), same sampling as the NC-SC family.
pub fn make_sin_bilinear_ncc(
    d: usize,
    d_prime: usize,
    radius_x: f64,
    radius_y: f64,
    seed: u64,
) -> Result<SinBilinear> {
    SinBilinear::new(seeded_params(d, d_prime, 0.0, radius_x, radius_y, seed)?)
}
