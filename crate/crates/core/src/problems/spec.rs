use serde::{Deserialize, Serialize};

use super::{make_quadratic_scsc, make_sin_bilinear_ncc, make_sin_bilinear_ncsc, MinimaxInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SinBilinearNcsc,
    SinBilinearNcc,
    QuadraticScsc,
}

/// JSON description of a built-in instance:
/// `{family, d, d_prime, mu, radius_x, radius_y, seed}` plus `rho` for the
/// quadratic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: Family,
    pub d: usize,
    #[serde(default)]
    pub d_prime: Option<usize>,
    #[serde(default)]
    pub mu: f64,
    pub radius_x: f64,
    pub radius_y: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl FamilySpec {
    pub fn build(&self) -> Result<Box<dyn MinimaxInstance>> {
        let d_prime = self.d_prime.unwrap_or(self.d);
        Ok(match self.family {
            Family::SinBilinearNcsc => Box::new(make_sin_bilinear_ncsc(
                self.d,
                d_prime,
                self.mu,
                self.radius_x,
                self.radius_y,
                self.seed,
            )?),
            Family::SinBilinearNcc => {
                if self.mu != 0.0 {
                    return Err(Error::Configuration(format!(
                        "sin_bilinear_ncc has mu = 0; got mu = {}",
                        self.mu
                    )));
                }
                Box::new(make_sin_bilinear_ncc(
                    self.d,
                    d_prime,
                    self.radius_x,
                    self.radius_y,
                    self.seed,
                )?)
            }
            Family::QuadraticScsc => {
                if d_prime != self.d {
                    return Err(Error::Configuration(
                        "quadratic_scsc needs d_prime == d".into(),
                    ));
                }
                Box::new(make_quadratic_scsc(
                    self.d,
                    self.rho.unwrap_or(1.0),
                    self.mu,
                    self.radius_x,
                    self.radius_y,
                    self.seed,
                )?)
            }
        })
    }
}
