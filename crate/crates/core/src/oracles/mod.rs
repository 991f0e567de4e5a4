//! First-order oracles built on top of a saddle function `F(x, y)`: inner
//! maximization, primal values and Danskin gradients, gradient mappings,
//! proximal points and Moreau-envelope gradients, plus exhaustive grid oracles
//! used as independent references.

mod grid;
mod inner;
mod prox;

use serde::{Deserialize, Serialize};

use crate::domains::ConvexDomain;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{ConstantsRegistry, Dataset, MinimaxInstance, SamplePoint};

pub use grid::{brute_force_max_grid, brute_force_prox_grid, GRID_CAPACITY};
pub use inner::{
    gradient_mapping, inner_max, mapping_from_gradient, primal_grad_ncsc, primal_value, solve_inner, InnerSolution,
};
pub use prox::{default_lambda, moreau_envelope, moreau_grad, prox_point, ProxResult};

/// A deterministic function `F(x, y)` on `X x Y` that is `L`-smooth jointly and
/// `mu`-strongly concave in `y` (`mu = 0` allowed).
pub trait SaddleFunction: Send + Sync {
    fn x_domain(&self) -> &ConvexDomain;
    fn y_domain(&self) -> &ConvexDomain;
    /// `L`
    fn smoothness(&self) -> f64;
    /// `mu`
    fn concavity(&self) -> f64;
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;

    /// Exact maximizer over `Y`, when one is known in closed form.
    fn argmax_y(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `L (1 + kappa)`, the smoothness of the primal function in the strongly concave case.
    fn l_tilde(&self) -> f64 {
        let l = self.smoothness();
        l * (1.0 + l / self.concavity())
    }
}

#[derive(Debug, Clone)]
enum Source<'a> {
    /// Families affine in `xi` collapse an average to a single parameter vector.
    Single(SamplePoint),
    Samples(&'a [SamplePoint]),
}

/// `F = E f(., .; xi)`, `F_S = (1/n) sum f(., .; xi_i)` or `f(., .; xi)`, optionally
/// minus `(nu/2)||y||^2`.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    instance: &'a dyn MinimaxInstance,
    source: Source<'a>,
    nu: f64,
    constants: ConstantsRegistry,
}

impl<'a> Objective<'a> {
    /// Population objective; needs a family with a known expectation.
    pub fn population(instance: &'a dyn MinimaxInstance) -> Result<Self> {
        let xi = instance.population_sample().ok_or_else(|| {
            Error::Unsupported(format!("{} has no closed-form population objective", instance.family()))
        })?;
        Ok(Self::at_sample(instance, xi))
    }

    /// Sample-average objective over `dataset`.
    pub fn empirical(instance: &'a dyn MinimaxInstance, dataset: &'a Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::invalid("empirical objective over an empty dataset"));
        }
        let source = match instance.average_sample(dataset.samples()) {
            Some(avg) => Source::Single(avg),
            None => Source::Samples(dataset.samples()),
        };
        Ok(Objective {
            instance,
            source,
            nu: 0.0,
            constants: *instance.constants(),
        })
    }

    /// `f(., .; xi)` for a single realization.
    pub fn at_sample(instance: &'a dyn MinimaxInstance, xi: SamplePoint) -> Self {
        Objective {
            instance,
            source: Source::Single(xi),
            nu: 0.0,
            constants: *instance.constants(),
        }
    }

    /// Subtract `(nu/2)||y||^2`; the constants become `L + nu`, `mu + nu`.
    pub fn regularized(&self, nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::invalid(format!("regularization nu must be > 0, got {nu}")));
        }
        Ok(Objective {
            instance: self.instance,
            source: self.source.clone(),
            nu: self.nu + nu,
            constants: self.constants.regularized(nu)?,
        })
    }

    pub fn constants(&self) -> &ConstantsRegistry {
        &self.constants
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn instance(&self) -> &'a dyn MinimaxInstance {
        self.instance
    }

    /// The single sample equivalent to this objective, if it has one.
    pub fn effective_sample(&self) -> Option<&SamplePoint> {
        match &self.source {
            Source::Single(xi) => Some(xi),
            Source::Samples(_) => None,
        }
    }

    fn average<T>(&self, eval: impl Fn(&SamplePoint) -> T, add: impl Fn(&mut T, T), scale: impl Fn(T, f64) -> T) -> T {
        match &self.source {
            Source::Single(xi) => eval(xi),
            Source::Samples(s) => {
                let mut acc = eval(&s[0]);
                for xi in &s[1..] {
                    add(&mut acc, eval(xi));
                }
                scale(acc, 1.0 / s.len() as f64)
            }
        }
    }

    fn average_vec(&self, eval: impl Fn(&SamplePoint) -> Vec<f64>) -> Vec<f64> {
        self.average(
            eval,
            |a, b| a.iter_mut().zip(b).for_each(|(u, v)| *u += v),
            |a, s| linalg::scale(&a, s),
        )
    }
}

impl SaddleFunction for Objective<'_> {
    fn x_domain(&self) -> &ConvexDomain {
        self.instance.x_domain()
    }

    fn y_domain(&self) -> &ConvexDomain {
        self.instance.y_domain()
    }

    fn smoothness(&self) -> f64 {
        self.constants.l
    }

    fn concavity(&self) -> f64 {
        self.constants.mu
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let v = self.average(|xi| self.instance.value(x, y, xi), |a, b| *a += b, |a, s| a * s);
        v - 0.5 * self.nu * linalg::norm_sq(y)
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.average_vec(|xi| self.instance.grad_x(x, y, xi))
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let g = self.average_vec(|xi| self.instance.grad_y(x, y, xi));
        linalg::axpy(&g, -self.nu, y)
    }

    fn argmax_y(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.source {
            Source::Single(xi) => self.instance.argmax_y(x, xi, self.nu),
            Source::Samples(_) => None,
        }
    }

    fn l_tilde(&self) -> f64 {
        self.constants.l_tilde
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step `1/L`.
    Fixed,
    /// Armijo-type backtracking on the local smoothness estimate.
    Backtracking,
}

/// Settings shared by the inner maximizer and the proximal solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerSolveConfig {
    /// Distance-to-maximizer target (`mu > 0`), value-gap target (`mu = 0`),
    /// or distance-to-prox-point target for the proximal solver.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_rule: StepRule,
    /// Use a closed-form maximizer when the objective provides one.
    pub closed_form: bool,
}

impl Default for InnerSolveConfig {
    fn default() -> Self {
        InnerSolveConfig {
            tolerance: 1e-7,
            max_iterations: 200_000,
            step_rule: StepRule::Fixed,
            closed_form: true,
        }
    }
}

impl InnerSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Configuration(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Configuration("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        InnerSolveConfig {
            tolerance,
            ..self.clone()
        }
    }

    /// Iterative solve only, ignoring closed forms.
    pub fn numeric(&self) -> Self {
        InnerSolveConfig {
            closed_form: false,
            ..self.clone()
        }
    }
}
