//! Stochastic minimax instances `min_x max_y E f(x, y; xi)`, their sample-average
//! counterparts, and the built-in synthetic families.

mod quadratic;
mod sin_bilinear;
mod spec;

use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domains::ConvexDomain;
use crate::error::{check_dim, Error, Result};
use crate::io::fmt_f64;
use crate::linalg;

pub use quadratic::{make_quadratic_scsc, Quadratic, QuadraticParams};
pub use sin_bilinear::{make_sin_bilinear_ncc, make_sin_bilinear_ncsc, SinBilinear, SinBilinearParams};
pub use spec::{Family, FamilySpec};

/// One realization of the random variable `xi`; the meaning of each parameter
/// is family specific.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SamplePoint(Vec<f64>);

impl SamplePoint {
    pub fn new(params: Vec<f64>) -> Self {
        SamplePoint(params)
    }

    pub fn params(&self) -> &[f64] {
        &self.0
    }
}

/// Problem constants of a minimax instance.
///
/// `l` is the joint smoothness of `f(., .; xi)`, `mu` its strong-concavity
/// modulus in `y`, `g` bounds `||grad f||`, `g_phi` bounds `||grad Phi||`,
/// and `d_x`, `d_y` bound `||x||^2`, `||y||^2` over the domains.
/// `kappa = l / mu` (infinite when `mu = 0`) and `l_tilde = l (1 + kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRegistry {
    pub l: f64,
    pub mu: f64,
    pub g: f64,
    pub g_phi: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub kappa: f64,
    pub l_tilde: f64,
}

impl ConstantsRegistry {
    pub fn new(l: f64, mu: f64, g: f64, g_phi: f64, d_x: f64, d_y: f64) -> Result<Self> {
        let positive = [("L", l), ("G", g), ("G_Phi", g_phi), ("D_X", d_x), ("D_Y", d_y)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be finite and >= 0, got {mu}")));
        }
        let kappa = if mu > 0.0 { l / mu } else { f64::INFINITY };
        Ok(ConstantsRegistry {
            l,
            mu,
            g,
            g_phi,
            d_x,
            d_y,
            kappa,
            l_tilde: l * (1.0 + kappa),
        })
    }

    /// Constants after subtracting `(nu/2)||y||^2` from `f`.
    pub fn regularized(&self, nu: f64) -> Result<Self> {
        ConstantsRegistry::new(
            self.l + nu,
            self.mu + nu,
            self.g + nu * self.d_y.sqrt(),
            self.g_phi,
            self.d_x,
            self.d_y,
        )
    }

    pub fn is_strongly_concave(&self) -> bool {
        self.mu > 0.0
    }
}

/// A stochastic minimax problem: domains, a sampler for `xi`, and oracles for
/// `f(x, y; xi)` and its gradient.
pub trait MinimaxInstance: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    fn x_domain(&self) -> &ConvexDomain;

    fn y_domain(&self) -> &ConvexDomain;

    fn constants(&self) -> &ConstantsRegistry;

    /// Draw one `xi` from the family's distribution.
    fn draw(&self, rng: &mut ChaCha8Rng) -> SamplePoint;

    /// Sample `index` of the dataset with seed `seed`; a pure function of both.
    fn sample(&self, seed: u64, index: u64) -> SamplePoint {
        self.draw(&mut sample_rng(seed, index))
    }

    fn value(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> f64;

    fn grad_x(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> Vec<f64>;

    fn grad_y(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> Vec<f64>;

    fn grad(&self, x: &[f64], y: &[f64], xi: &SamplePoint) -> (Vec<f64>, Vec<f64>) {
        (self.grad_x(x, y, xi), self.grad_y(x, y, xi))
    }

    /// For families where `f` is affine in `xi`: the single sample whose `f`
    /// equals the average of `f` over `samples`.
    fn average_sample(&self, _samples: &[SamplePoint]) -> Option<SamplePoint> {
        None
    }

    /// For families where `f` is affine in `xi`: `E[xi]`, so that the
    /// population objective is `f(., .; E[xi])`.
    fn population_sample(&self) -> Option<SamplePoint> {
        None
    }

    /// Closed-form `argmax_{y in Y} f(x, y; xi) - (extra/2)||y||^2`, when the family has one.
    fn argmax_y(&self, _x: &[f64], _xi: &SamplePoint, _extra_concavity: f64) -> Option<Vec<f64>> {
        None
    }
}

/// Generator for sample `index` of the stream seeded by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mix a sequence of integers into one seed (SplitMix64 finalizer per word).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = splitmix64(h);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Componentwise mean of sample parameters.
pub(crate) fn mean_params(samples: &[SamplePoint]) -> Option<SamplePoint> {
    let first = samples.first()?;
    let mut acc = vec![0.0; first.0.len()];
    for s in samples {
        for (a, v) in acc.iter_mut().zip(&s.0) {
            *a += v;
        }
    }
    let n = samples.len() as f64;
    Some(SamplePoint(acc.into_iter().map(|a| a / n).collect()))
}

/// `argmax_{y in Y} <c, y> - (mu/2)||y||^2` for a ball or box `Y`.
/// For `mu > 0` this is the projection of `c / mu`; for `mu = 0` the support
/// point in direction `c` (the center, or the box midpoint per zero axis, when `c` vanishes).
pub(crate) fn maximize_isotropic(y_domain: &ConvexDomain, c: &[f64], mu: f64) -> Vec<f64> {
    use crate::domains::Shape;
    if mu > 0.0 {
        return y_domain.project_unchecked(&linalg::scale(c, 1.0 / mu));
    }
    match y_domain.shape() {
        Shape::Ball { center, radius } => {
            let n = linalg::norm(c);
            if n == 0.0 {
                center.clone()
            } else {
                linalg::axpy(center, radius / n, c)
            }
        }
        Shape::Box { lower, upper } => c
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(ci, (lo, hi))| {
                if *ci > 0.0 {
                    *hi
                } else if *ci < 0.0 {
                    *lo
                } else {
                    0.5 * (lo + hi)
                }
            })
            .collect(),
    }
}

/// An ordered list of `n` samples drawn with a provenance seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    seed: u64,
    samples: Vec<SamplePoint>,
}

impl Dataset {
    /// `n` i.i.d. samples; sample `i` is `instance.sample(seed, i)`.
    pub fn draw(instance: &dyn MinimaxInstance, seed: u64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        let samples = (0..n as u64).map(|i| instance.sample(seed, i)).collect();
        Ok(Dataset { seed, samples })
    }

    pub fn from_samples(samples: Vec<SamplePoint>, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        Ok(Dataset { seed, samples })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SamplePoint] {
        &self.samples
    }

    /// `S^(i)`: a copy with sample `i` replaced by `xi`.
    pub fn replace(&self, i: usize, xi: SamplePoint) -> Result<Dataset> {
        if i >= self.samples.len() {
            return Err(Error::invalid(format!(
                "replacement index {i} out of range for n = {}",
                self.samples.len()
            )));
        }
        let mut samples = self.samples.clone();
        samples[i] = xi;
        Ok(Dataset {
            seed: self.seed,
            samples,
        })
    }

    /// CSV with header `index,param_0,...`.
    pub fn to_csv(&self) -> String {
        let k = self.samples.first().map_or(0, |s| s.0.len());
        let mut out = String::from("index");
        for j in 0..k {
            let _ = write!(out, ",param_{j}");
        }
        out.push('\n');
        for (i, s) in self.samples.iter().enumerate() {
            let _ = write!(out, "{i}");
            for v in &s.0 {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Sample averages of `f` and its gradient over `dataset` at `(x, y)`.
pub fn empirical_value_grad(
    instance: &dyn MinimaxInstance,
    dataset: &Dataset,
    x: &[f64],
    y: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_dim(instance.x_domain().dim(), x.len())?;
    check_dim(instance.y_domain().dim(), y.len())?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let mut value = 0.0;
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; y.len()];
    for xi in dataset.samples() {
        value += instance.value(x, y, xi);
        let (a, b) = instance.grad(x, y, xi);
        gx.iter_mut().zip(&a).for_each(|(s, v)| *s += v);
        gy.iter_mut().zip(&b).for_each(|(s, v)| *s += v);
    }
    let n = dataset.len() as f64;
    Ok((
        value / n,
        gx.into_iter().map(|v| v / n).collect(),
        gy.into_iter().map(|v| v / n).collect(),
    ))
}
