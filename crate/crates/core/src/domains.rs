//! Compact convex feasible sets, Euclidean projection and grid-based covering nets.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::io::fmt_f64;
use crate::linalg;

/// Default cap on the number of points a net or brute-force grid may allocate.
pub const DEFAULT_CAPACITY: usize = 10_000_000;

/// Net points closer than this are merged after projecting onto a ball.
const DEDUP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// A compact convex set: an axis-aligned box or a Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct ConvexDomain {
    shape: Shape,
}

impl TryFrom<Shape> for ConvexDomain {
    type Error = Error;

    fn try_from(shape: Shape) -> Result<Self> {
        match shape {
            Shape::Box { lower, upper } => ConvexDomain::new_box(lower, upper),
            Shape::Ball { center, radius } => ConvexDomain::ball(center, radius),
        }
    }
}

impl From<ConvexDomain> for Shape {
    fn from(d: ConvexDomain) -> Shape {
        d.shape
    }
}

impl ConvexDomain {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::invalid("box must have at least one dimension"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "box axis {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(ConvexDomain {
            shape: Shape::Box { lower, upper },
        })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball must have at least one dimension"));
        }
        if !linalg::is_finite(&center) {
            return Err(Error::invalid("ball center must be finite"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!(
                "ball radius must be finite and positive, got {radius}"
            )));
        }
        Ok(ConvexDomain {
            shape: Shape::Ball { center, radius },
        })
    }

    /// Ball of the given radius around the origin.
    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box { lower, .. } => lower.len(),
            Shape::Ball { center, .. } => center.len(),
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }

    /// Euclidean projection: per-coordinate clamp for a box, radial scaling for a ball.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), p.len())?;
        if !linalg::is_finite(p) {
            return Err(Error::invalid("cannot project a non-finite point"));
        }
        Ok(self.project_unchecked(p))
    }

    pub(crate) fn project_unchecked(&self, p: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
            Shape::Ball { center, radius } => {
                let offset = linalg::sub(p, center);
                let r = linalg::norm(&offset);
                if r <= *radius {
                    p.to_vec()
                } else {
                    linalg::axpy(center, radius / r, &offset)
                }
            }
        }
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        match &self.shape {
            Shape::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol),
            Shape::Ball { center, radius } => linalg::dist(p, center) <= radius + tol,
        }
    }

    /// `sup ||x||^2` over the set.
    pub fn squared_bound(&self) -> f64 {
        match &self.shape {
            Shape::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
                .sum(),
            Shape::Ball { center, radius } => (linalg::norm(center) + radius).powi(2),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Box { lower, upper } => linalg::dist(lower, upper),
            Shape::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Smallest axis-aligned box containing the set.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Box { lower, upper } => (lower.clone(), upper.clone()),
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Center of the bounding box (the ball center for balls).
    pub fn center(&self) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Uniform sample from the set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.shape {
            Shape::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                .collect(),
            Shape::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let n = linalg::norm(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                linalg::axpy(center, r / n, &dir)
            }
        }
    }

    /// Covering net of radius `upsilon` with the default capacity.
    pub fn covering_net(&self, upsilon: f64) -> Result<CoveringNet> {
        self.covering_net_with_cap(upsilon, DEFAULT_CAPACITY)
    }

    /// Axis-aligned grid of cell centers with per-axis spacing at most
    /// `2 upsilon / sqrt(d)`, so every point of the box is within `upsilon`
    /// of a net point. Balls reuse their bounding-box grid, projected onto
    /// the ball and deduplicated.
    pub fn covering_net_with_cap(&self, upsilon: f64, cap: usize) -> Result<CoveringNet> {
        if !(upsilon.is_finite() && upsilon > 0.0) {
            return Err(Error::invalid(format!(
                "net radius must be positive, got {upsilon}"
            )));
        }
        let (lower, upper) = self.bounding_box();
        let counts = grid_counts(&lower, &upper, upsilon);
        let required: f64 = counts.iter().map(|&c| c as f64).product();
        if required > cap as f64 {
            return Err(Error::Capacity {
                what: "covering net",
                required,
                cap,
            });
        }
        let spacing: Vec<f64> = lower
            .iter()
            .zip(&upper)
            .zip(&counts)
            .map(|((lo, hi), &m)| (hi - lo) / m as f64)
            .collect();
        let grid = GridIter::new(&counts).map(|idx| {
            idx.iter()
                .enumerate()
                .map(|(axis, &j)| lower[axis] + (j as f64 + 0.5) * spacing[axis])
                .collect::<Vec<f64>>()
        });
        let points = if self.is_ball() {
            let mut seen = HashSet::new();
            grid.map(|p| self.project_unchecked(&p))
                .filter(|p| seen.insert(dedup_key(p)))
                .collect()
        } else {
            grid.collect()
        };
        Ok(CoveringNet::new(points, upsilon))
    }
}

/// Points per axis, `ceil(width * sqrt(d) / (2 upsilon))`, at least one.
fn grid_counts(lower: &[f64], upper: &[f64], upsilon: f64) -> Vec<usize> {
    let root_d = (lower.len() as f64).sqrt();
    lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| {
            let m = ((hi - lo) * root_d / (2.0 * upsilon)).ceil();
            // saturates for absurdly small radii; the capacity check rejects those
            if m >= usize::MAX as f64 {
                usize::MAX
            } else {
                (m as usize).max(1)
            }
        })
        .collect()
}

fn dedup_key(p: &[f64]) -> Vec<i64> {
    p.iter()
        .map(|v| (v / DEDUP_TOLERANCE).round() as i64)
        .collect()
}

/// Row-major iterator over multi-indices `0..counts[0] x 0..counts[1] x ...`.
struct GridIter {
    counts: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl GridIter {
    fn new(counts: &[usize]) -> Self {
        let current = if counts.iter().all(|&c| c > 0) {
            Some(vec![0; counts.len()])
        } else {
            None
        };
        GridIter {
            counts: counts.to_vec(),
            current,
        }
    }
}

impl Iterator for GridIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                self.current = None;
                break;
            }
            axis -= 1;
            cur[axis] += 1;
            if cur[axis] < self.counts[axis] {
                break;
            }
            cur[axis] = 0;
        }
        Some(out)
    }
}

/// Uniform grid over a box: every axis gets `ceil(width / resolution) + 1`
/// points including both endpoints. Used by the brute-force oracles.
pub fn uniform_grid(lower: &[f64], upper: &[f64], resolution: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::invalid(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    let counts: Vec<usize> = lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| ((hi - lo) / resolution).ceil().min(1e18) as usize + 1)
        .collect();
    let required: f64 = counts.iter().map(|&c| c as f64).product();
    if required > cap as f64 {
        return Err(Error::Capacity {
            what: "brute-force grid",
            required,
            cap,
        });
    }
    Ok(GridIter::new(&counts)
        .map(|idx| {
            idx.iter()
                .enumerate()
                .map(|(axis, &j)| {
                    let m = counts[axis];
                    if m == 1 {
                        lower[axis]
                    } else {
                        lower[axis] + (upper[axis] - lower[axis]) * j as f64 / (m - 1) as f64
                    }
                })
                .collect()
        })
        .collect())
}

/// A finite point set covering its parent domain within `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringNet {
    points: Vec<Vec<f64>>,
    radius: f64,
    count: usize,
    /// True when the net was thinned by random subsampling and no longer
    /// carries the covering guarantee.
    #[serde(default)]
    subsampled: bool,
}

impl CoveringNet {
    fn new(points: Vec<Vec<f64>>, radius: f64) -> Self {
        let count = points.len();
        CoveringNet {
            points,
            radius,
            count,
            subsampled: false,
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_subsampled(&self) -> bool {
        self.subsampled
    }

    /// Distance from `p` to the closest net point.
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|q| linalg::dist(p, q))
            .fold(f64::INFINITY, f64::min)
    }

    /// Keep `count` points chosen uniformly without replacement (original order
    /// preserved). The result is an approximation: it no longer covers the domain.
    pub fn subsample(&self, count: usize, seed: u64) -> CoveringNet {
        if count >= self.count {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample_indices(&mut rng, self.count, count).into_vec();
        idx.sort_unstable();
        let points = idx.into_iter().map(|i| self.points[i].clone()).collect();
        CoveringNet {
            subsampled: true,
            ..CoveringNet::new(points, self.radius)
        }
    }

    /// CSV with header `index,x_0,...,x_{d-1}`.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, Vec::len);
        let mut out = String::from("index");
        for j in 0..d {
            let _ = write!(out, ",x_{j}");
        }
        out.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(out, "{i}");
            for v in p {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}
