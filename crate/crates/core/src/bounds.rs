//! Closed-form quantities from the uniform-convergence analysis: stability and
//! ERM-gap bounds, expected gradient deviation, the regularization bound on
//! proximal points, sub-Gaussian variance proxies, sample-size calculators and
//! plug-in gradient complexities.
//!
//! Wherever an `O(.)` wraps an expression whose constants are already explicit,
//! the hidden constant is taken to be 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard on `1 - lambda (L + nu)` below which the regularization bound is treated as divergent.
pub const DENOMINATOR_GUARD: f64 = 1e-9;

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and positive, got {v}")))
    }
}

fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn require_mu(mu: f64) -> Result<()> {
    if mu == 0.0 {
        return Err(Error::Unsupported(
            "bound requires strong concavity (mu > 0)".into(),
        ));
    }
    require_positive("mu", mu)
}

fn require_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("sample size n must be >= 1"))
    } else {
        Ok(())
    }
}

/// `||y*_{S^(i)}(x) - y*_S(x)|| <= 4G / (mu n)`.
pub fn stability_y_bound(g: f64, mu: f64, n: u64) -> Result<f64> {
    require_positive("G", g)?;
    require_mu(mu)?;
    require_n(n)?;
    Ok(4.0 * g / (mu * n as f64))
}

/// `E[F(x, y*(x)) - F(x, y*_S(x))] <= 4G^2 / (mu n)`.
pub fn erm_gap_bound(g: f64, mu: f64, n: u64) -> Result<f64> {
    require_positive("G", g)?;
    require_mu(mu)?;
    require_n(n)?;
    Ok(4.0 * g * g / (mu * n as f64))
}

/// `E||grad Phi(x) - grad Phi_S(x)|| <= G/sqrt(n) + L sqrt(8 G^2 / (mu^2 n))`
/// for `x` independent of `S`.
pub fn expected_grad_diff_bound(g: f64, l: f64, mu: f64, n: u64) -> Result<f64> {
    require_positive("G", g)?;
    require_positive("L", l)?;
    require_mu(mu)?;
    require_n(n)?;
    let n = n as f64;
    Ok(g / n.sqrt() + l * (8.0 * g * g / (mu * mu * n)).sqrt())
}

/// `||prox_{lambda Phi}(x) - prox_{lambda Phi_hat}(x)|| <= sqrt(nu D_Y lambda / (1 - lambda (L + nu)))`
/// where `Phi_hat` is the primal of the `nu`-regularized problem.
pub fn prox_reg_bound(nu: f64, d_y: f64, lambda: f64, l: f64) -> Result<f64> {
    require_nonnegative("nu", nu)?;
    require_positive("D_Y", d_y)?;
    require_positive("lambda", lambda)?;
    require_positive("L", l)?;
    let denom = 1.0 - lambda * (l + nu);
    if denom <= DENOMINATOR_GUARD {
        return Err(Error::invalid(format!(
            "lambda = {lambda} must be below 1/(L + nu) = {}",
            1.0 / (l + nu)
        )));
    }
    Ok((nu * d_y * lambda / denom).sqrt())
}

/// `sigma^2 = (2 L G / mu + G)^2 / n`.
pub fn subgaussian_variance_proxy_ncsc(l: f64, g: f64, mu: f64, n: u64) -> Result<f64> {
    require_positive("L", l)?;
    require_positive("G", g)?;
    require_mu(mu)?;
    require_n(n)?;
    Ok((2.0 * l * g / mu + g).powi(2) / n as f64)
}

/// Sample size making the expected NC-SC gradient deviation at most `eps`:
/// `ceil(2 d eps^-2 (2 L G / mu + G)^2 ln(4 L (1 + kappa) / eps))`.
pub fn sample_size_ncsc(d: usize, eps: f64, l: f64, mu: f64, g: f64) -> Result<u64> {
    if d == 0 {
        return Err(Error::invalid("dimension d must be >= 1"));
    }
    require_positive("eps", eps)?;
    require_positive("L", l)?;
    require_positive("G", g)?;
    require_mu(mu)?;
    let kappa = l / mu;
    let log_arg = 4.0 * l * (1.0 + kappa) / eps;
    if log_arg <= 1.0 {
        return Err(Error::invalid(format!(
            "4 L (1 + kappa) / eps = {log_arg} <= 1: eps too large for the sample-size formula"
        )));
    }
    let n = 2.0 * d as f64 / (eps * eps) * (2.0 * l * g / mu + g).powi(2) * log_arg.ln();
    Ok(n.ceil() as u64)
}

/// NC-C sample-size selection together with the parameters that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NccSampleSize {
    pub n: u64,
    /// Regularization `nu = eps^2 / (64 L D_Y)`.
    pub nu: f64,
    /// Envelope parameter, fixed at `1 / (2L)`.
    pub lambda: f64,
    /// Net radius `eps / (32 L)`.
    pub upsilon: f64,
    /// `ln Q` for the grid net over the bounding box of the ball of radius `sqrt(D_X)`.
    pub log_q: f64,
    /// Values of the four terms of the final NC-C bound at the returned `n`.
    pub terms: [f64; 4],
}

/// NC-C sample size with explicit constants.
///
/// With `lambda = 1/(2L)` the bound on the expected Moreau-gradient deviation is
/// `2 sqrt(4 L nu D_Y) + 4L sqrt(ln Q / (2n) (Lx^2/L^2 + Ly^2/(nu L)))
///  + 2L sqrt(4 sqrt2 / (L n) (Lx^2/L + Ly^2/nu)) + eps/4`
/// with `Lx = G + 4 L sqrt(D_X)` and `Ly = G + nu sqrt(D_Y)`.
/// `nu = eps^2/(64 L D_Y)` makes the first term `eps/2`; `n` is the smallest
/// integer making each middle term at most `eps/8`, so the total is at most `eps`.
pub fn sample_size_ncc(d: usize, eps: f64, l: f64, g: f64, d_x: f64, d_y: f64) -> Result<NccSampleSize> {
    if d == 0 {
        return Err(Error::invalid("dimension d must be >= 1"));
    }
    require_positive("eps", eps)?;
    require_positive("L", l)?;
    require_positive("G", g)?;
    require_positive("D_X", d_x)?;
    require_positive("D_Y", d_y)?;
    let nu = eps * eps / (64.0 * l * d_y);
    let lambda = 1.0 / (2.0 * l);
    let upsilon = eps / (32.0 * l);
    let width = 2.0 * d_x.sqrt();
    let per_axis = (width * (d as f64).sqrt() / (2.0 * upsilon)).ceil().max(1.0);
    let log_q = d as f64 * per_axis.ln();
    let lx = g + 4.0 * l * d_x.sqrt();
    let ly = g + nu * d_y.sqrt();
    let a = lx * lx / (l * l) + ly * ly / (nu * l);
    let b = lx * lx / l + ly * ly / nu;
    // 4L sqrt(log_q a / (2n)) <= eps/8  <=>  n >= 512 L^2 log_q a / eps^2
    let n_second = 512.0 * l * l * log_q * a / (eps * eps);
    // 2L sqrt(4 sqrt2 b / (L n)) <= eps/8  <=>  n >= 1024 sqrt2 L b / eps^2
    let n_third = 1024.0 * std::f64::consts::SQRT_2 * l * b / (eps * eps);
    let n = n_second.max(n_third).max(1.0).ceil() as u64;
    let nf = n as f64;
    let terms = [
        2.0 * (4.0 * l * nu * d_y).sqrt(),
        4.0 * l * (log_q / (2.0 * nf) * a).sqrt(),
        2.0 * l * (4.0 * std::f64::consts::SQRT_2 / (l * nf) * b).sqrt(),
        eps / 4.0,
    ];
    Ok(NccSampleSize {
        n,
        nu,
        lambda,
        upsilon,
        log_q,
        terms,
    })
}

/// One monomial `coef * n^n_exp * kappa^kappa_exp * eps^eps_exp` of a complexity template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTerm {
    pub coef: f64,
    pub n_exp: f64,
    pub kappa_exp: f64,
    pub eps_exp: f64,
}

/// Gradient complexity of an empirical-problem solver as a sum of monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTemplate {
    pub name: String,
    pub terms: Vec<ComplexityTerm>,
}

impl ComplexityTemplate {
    pub fn evaluate(&self, n: f64, eps: f64, kappa: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * n.powf(t.n_exp) * kappa.powf(t.kappa_exp) * eps.powf(t.eps_exp))
            .sum()
    }

    /// `sqrt(n) kappa^2 eps^-2`: finite-sum SREDA for NC-SC.
    pub fn sreda_ncsc() -> Self {
        ComplexityTemplate {
            name: "sreda_finite_sum_ncsc".into(),
            terms: vec![ComplexityTerm {
                coef: 1.0,
                n_exp: 0.5,
                kappa_exp: 2.0,
                eps_exp: -2.0,
            }],
        }
    }

    /// `n^{3/4} sqrt(kappa) eps^-2`: Catalyst-SVRG for NC-SC.
    pub fn catalyst_ncsc() -> Self {
        ComplexityTemplate {
            name: "catalyst_svrg_ncsc".into(),
            terms: vec![ComplexityTerm {
                coef: 1.0,
                n_exp: 0.75,
                kappa_exp: 0.5,
                eps_exp: -2.0,
            }],
        }
    }

    /// `n^{3/4} eps^-3 + n eps^-2`: Catalyst-SVRG for NC-C.
    pub fn catalyst_ncc() -> Self {
        ComplexityTemplate {
            name: "catalyst_svrg_ncc".into(),
            terms: vec![
                ComplexityTerm {
                    coef: 1.0,
                    n_exp: 0.75,
                    kappa_exp: 0.0,
                    eps_exp: -3.0,
                },
                ComplexityTerm {
                    coef: 1.0,
                    n_exp: 1.0,
                    kappa_exp: 0.0,
                    eps_exp: -2.0,
                },
            ],
        }
    }
}

/// Evaluate `template` at `n = n_star` (already including any multiplier) and accuracy `eps`.
pub fn induced_gradient_complexity(n_star: f64, eps: f64, kappa: f64, template: &ComplexityTemplate) -> Result<f64> {
    if !(n_star.is_finite() && n_star >= 1.0) {
        return Err(Error::invalid(format!("n_star must be >= 1, got {n_star}")));
    }
    require_positive("eps", eps)?;
    Ok(template.evaluate(n_star, eps, kappa))
}

/// Population-level gradient complexity of an NC-SC solver: run on
/// `4 n*_NCSC(eps)` samples to accuracy `eps/2`.
pub fn ncsc_chain_complexity(d: usize, eps: f64, l: f64, mu: f64, g: f64, template: &ComplexityTemplate) -> Result<f64> {
    let n_star = sample_size_ncsc(d, eps, l, mu, g)?;
    induced_gradient_complexity(4.0 * n_star as f64, eps / 2.0, l / mu, template)
}

/// Population-level gradient complexity of an NC-C solver: run on
/// `16 n*_NCC(eps)` samples to accuracy `eps/2`.
pub fn ncc_chain_complexity(
    d: usize,
    eps: f64,
    l: f64,
    g: f64,
    d_x: f64,
    d_y: f64,
    template: &ComplexityTemplate,
) -> Result<f64> {
    let sel = sample_size_ncc(d, eps, l, g, d_x, d_y)?;
    induced_gradient_complexity(16.0 * sel.n as f64, eps / 2.0, f64::INFINITY, template)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stability_and_erm_examples() {
        assert_relative_eq!(stability_y_bound(2.0, 0.5, 100).unwrap(), 0.16, epsilon = 1e-15);
        assert_eq!(stability_y_bound(1.0, 1.0, 4).unwrap(), 1.0);
        assert_eq!(
            stability_y_bound(1.0, 1.0, 200).unwrap() * 2.0,
            stability_y_bound(1.0, 1.0, 100).unwrap()
        );
        assert_eq!(erm_gap_bound(1.0, 1.0, 4).unwrap(), 1.0);
        assert_eq!(erm_gap_bound(2.0, 1.0, 16).unwrap(), 1.0);
        assert_eq!(erm_gap_bound(2.0, 1.0, 4).unwrap(), 4.0 * erm_gap_bound(1.0, 1.0, 4).unwrap());
        assert!(matches!(stability_y_bound(1.0, 0.0, 4), Err(Error::Unsupported(_))));
        assert!(matches!(erm_gap_bound(1.0, 0.0, 4), Err(Error::Unsupported(_))));
        assert!(stability_y_bound(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn expected_grad_diff_example() {
        let b = expected_grad_diff_bound(1.0, 1.0, 1.0, 100).unwrap();
        assert_relative_eq!(b, 0.1 + 0.08f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(b, 0.38284, epsilon = 1e-5);
        assert_relative_eq!(
            expected_grad_diff_bound(1.0, 1.0, 1.0, 400).unwrap(),
            b / 2.0,
            epsilon = 1e-15
        );
        // at least the stability-driven term alone
        assert!(b >= (8.0f64 / 100.0).sqrt());
    }

    #[test]
    fn prox_reg_examples() {
        assert_relative_eq!(
            prox_reg_bound(0.01, 1.0, 0.5, 1.0).unwrap(),
            (0.005f64 / 0.495).sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(prox_reg_bound(0.01, 1.0, 0.5, 1.0).unwrap(), 0.10050, epsilon = 1e-5);
        assert_eq!(prox_reg_bound(0.0, 1.0, 0.5, 1.0).unwrap(), 0.0);
        assert!(prox_reg_bound(0.01, 1.0, 1.0 / 1.01, 1.0).is_err());
        assert!(prox_reg_bound(0.01, 1.0, 1.0 / 1.01 - 1e-12, 1.0).is_err());
        assert!(prox_reg_bound(0.01, 1.0, 0.99, 1.0).unwrap() > 9.0);
    }

    #[test]
    fn variance_proxy_examples() {
        assert_eq!(subgaussian_variance_proxy_ncsc(1.0, 1.0, 1.0, 9).unwrap(), 1.0);
        assert_eq!(subgaussian_variance_proxy_ncsc(1.0, 1.0, 1.0, 36).unwrap(), 0.25);
    }

    #[test]
    fn sample_size_ncsc_examples() {
        // ceil(18 ln 8) = ceil(37.43) = 38
        assert_eq!(sample_size_ncsc(1, 1.0, 1.0, 1.0, 1.0).unwrap(), 38);
        let n1 = sample_size_ncsc(1, 0.1, 1.0, 1.0, 1.0).unwrap() as f64;
        let n2 = sample_size_ncsc(1, 0.05, 1.0, 1.0, 1.0).unwrap() as f64;
        let log_growth = 160f64.ln() / 80f64.ln();
        assert!(n2 / n1 > 4.0 && n2 / n1 < 4.0 * log_growth * 1.001);
        let d1 = sample_size_ncsc(1, 0.1, 1.0, 1.0, 1.0).unwrap();
        let d2 = sample_size_ncsc(2, 0.1, 1.0, 1.0, 1.0).unwrap();
        assert!(d2 == 2 * d1 || d2 == 2 * d1 - 1);
        assert!(sample_size_ncsc(1, 100.0, 1.0, 1.0, 1.0).is_err());
        assert!(sample_size_ncsc(1, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn sample_size_ncc_selection() {
        let eps = 0.1;
        let sel = sample_size_ncc(1, eps, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(2.0 * (4.0 * sel.nu).sqrt() <= eps / 2.0 * (1.0 + 1e-12));
        assert!(sel.terms.iter().sum::<f64>() <= eps * (1.0 + 1e-12));
        assert_eq!(sel.lambda, 0.5);
        let half = sample_size_ncc(1, eps / 2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let ratio = half.n as f64 / sel.n as f64;
        assert!(ratio > 16.0 && ratio < 20.0, "ratio {ratio}");
        let d2 = sample_size_ncc(2, eps, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = d2.n as f64 / sel.n as f64;
        assert!(r > 1.0 && r <= 2.2, "d ratio {r}");
    }

    #[test]
    fn complexity_template_arithmetic() {
        let t = ComplexityTemplate {
            name: "sqrt_n".into(),
            terms: vec![ComplexityTerm {
                coef: 1.0,
                n_exp: 0.5,
                kappa_exp: 0.0,
                eps_exp: -2.0,
            }],
        };
        assert_relative_eq!(induced_gradient_complexity(1e4, 0.1, 1.0, &t).unwrap(), 1e4, max_relative = 1e-12);
        assert!(induced_gradient_complexity(0.5, 0.1, 1.0, &t).is_err());
    }
}
