//! Kernel estimators of the joint density and of the conditional density and
//! distribution of Y given the covariate subvectors of both agents in a dyad,
//! plus inversion of the estimated conditional distribution.
//!
//! For a conditioning point `(w1, w2)` every dyad `(i, j)` receives the weight
//! `K₂((w1 − W_i)/h_x, (w2 − W_j)/h_x)`, which factors into a per-sender and a
//! per-receiver term. The weights do not depend on `y`, so a
//! [`ConditionalDistribution`] computes them once and reuses them for every
//! CDF, density or quantile evaluation at that point.

use serde::{Deserialize, Serialize};

use crate::data::{DyadPanel, SubvectorSpec};
use crate::error::{Error, Result};
use crate::kernels::{Bandwidths, KernelSpec};

/// Kernel family plus bandwidth pair; everything a kernel sum needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoother {
    pub kernel: KernelSpec,
    pub bandwidths: Bandwidths,
}

impl Smoother {
    pub fn new(kernel: KernelSpec, bandwidths: Bandwidths) -> Self {
        Self { kernel, bandwidths }
    }

    pub fn h_x(&self) -> f64 {
        self.bandwidths.h_x
    }

    pub fn h_y(&self) -> f64 {
        self.bandwidths.h_y
    }
}

/// Values `(w1, w2)` of the subvector W for the sending and receiving agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningPoint {
    spec: SubvectorSpec,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl ConditioningPoint {
    pub fn new(spec: SubvectorSpec, w1: Vec<f64>, w2: Vec<f64>) -> Result<Self> {
        if w1.len() != spec.dim() || w2.len() != spec.dim() {
            return Err(Error::invalid(format!(
                "conditioning values have lengths {} and {}, expected {}",
                w1.len(),
                w2.len(),
                spec.dim()
            )));
        }
        if w1.iter().chain(&w2).any(|v| !v.is_finite()) {
            return Err(Error::invalid("conditioning values must be finite"));
        }
        Ok(Self { spec, w1, w2 })
    }

    /// Conditions on the complete covariate vectors.
    pub fn full(x1: &[f64], x2: &[f64]) -> Result<Self> {
        Self::new(SubvectorSpec::full(x1.len()), x1.to_vec(), x2.to_vec())
    }

    pub fn spec(&self) -> &SubvectorSpec {
        &self.spec
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    /// d_W.
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// The same point with the roles of sender and receiver swapped.
    pub fn swapped(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            w1: self.w2.clone(),
            w2: self.w1.clone(),
        }
    }
}

/// Estimated CDF evaluated on a sorted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

fn per_agent_kernel(panel: &DyadPanel, spec: &SubvectorSpec, at: &[f64], kernel: &KernelSpec, h_x: f64) -> Vec<f64> {
    let agents = panel.agents();
    let mut scaled = vec![0.0; spec.dim()];
    (0..agents.len())
        .map(|a| {
            let row = agents.row(a);
            for (slot, (&k, &w)) in scaled.iter_mut().zip(spec.indices().iter().zip(at)) {
                *slot = (w - row[k]) / h_x;
            }
            kernel.product_kernel(&scaled)
        })
        .collect()
}

/// Conditional distribution of Y given `(W_i, W_j) = (w1, w2)`, with the dyad
/// weights precomputed.
#[derive(Debug, Clone)]
pub struct ConditionalDistribution<'a> {
    panel: &'a DyadPanel,
    smoother: Smoother,
    dim: usize,
    weights: Vec<f64>,
    mass: f64,
}

impl<'a> ConditionalDistribution<'a> {
    pub fn new(panel: &'a DyadPanel, cond: &ConditioningPoint, smoother: &Smoother) -> Result<Self> {
        if let Some(&k) = cond.spec().indices().iter().find(|&&k| k >= panel.dim()) {
            return Err(Error::invalid(format!(
                "subvector index {k} out of range for dimension {}",
                panel.dim()
            )));
        }
        let h_x = smoother.h_x();
        let sender = per_agent_kernel(panel, cond.spec(), cond.w1(), &smoother.kernel, h_x);
        let receiver = per_agent_kernel(panel, cond.spec(), cond.w2(), &smoother.kernel, h_x);
        let weights: Vec<f64> = panel.dyads().iter().map(|d| sender[d.i] * receiver[d.j]).collect();
        let mass = panel.sum_over_dyads(|k| weights[k]);
        if !(mass > 0.0) {
            return Err(Error::NoLocalMass);
        }
        Ok(Self {
            panel,
            smoother: *smoother,
            dim: cond.dim(),
            weights,
            mass,
        })
    }

    /// Σ K₂ over all dyads: the denominator of every ratio at this point.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn panel(&self) -> &DyadPanel {
        self.panel
    }

    pub fn smoother(&self) -> &Smoother {
        &self.smoother
    }

    /// Kernel density of `(W_i, W_j)` at the conditioning point,
    /// `Σ K₂ / (n · h_x^{2 d_W})`.
    pub fn covariate_density(&self) -> f64 {
        let n = self.panel.n() as f64;
        self.mass / (n * self.smoother.h_x().powi(2 * self.dim as i32))
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let kernel = self.smoother.kernel;
        let h_y = self.smoother.h_y();
        let dyads = self.panel.dyads();
        let w = &self.weights;
        let num = self
            .panel
            .sum_over_dyads(|k| w[k] * kernel.k1_integrated((y - dyads[k].y) / h_y));
        (num / self.mass).clamp(0.0, 1.0)
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let kernel = self.smoother.kernel;
        let h_y = self.smoother.h_y();
        let dyads = self.panel.dyads();
        let w = &self.weights;
        let num = self
            .panel
            .sum_over_dyads(|k| w[k] * kernel.k1_density((y - dyads[k].y) / h_y));
        num / (h_y * self.mass)
    }

    /// CDF on a sorted grid; values are nondecreasing by construction.
    pub fn curve(&self, grid: &[f64]) -> CdfCurve {
        let mut values: Vec<f64> = grid.iter().map(|&y| self.cdf(y)).collect();
        for k in 1..values.len() {
            if values[k] < values[k - 1] {
                values[k] = values[k - 1];
            }
        }
        CdfCurve {
            grid: grid.to_vec(),
            values,
        }
    }

    /// Solves `cdf(y) = s` to within `tol` on the probability scale.
    ///
    /// The bracket starts at the outcome range widened by `h_y` and grows
    /// geometrically; bisection then narrows it. Under a compactly supported
    /// kernel a level attained on a flat stretch of the CDF resolves to the
    /// midpoint of that stretch.
    pub fn quantile(&self, s: f64, tol: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::BadProbability(s));
        }
        let h_y = self.smoother.h_y();
        let (y_min, y_max) = self.panel.outcome_range();
        let mut lo = y_min - h_y;
        let mut hi = y_max + h_y;

        let mut step = hi - lo;
        let mut expansions = 0;
        while self.cdf(lo) > s {
            if expansions == MAX_EXPANSIONS {
                return Err(Error::BracketFailure { level: s, expansions });
            }
            lo -= step;
            step *= 2.0;
            expansions += 1;
        }
        let mut step = hi - lo;
        let mut expansions = 0;
        while self.cdf(hi) < s {
            if expansions == MAX_EXPANSIONS {
                return Err(Error::BracketFailure { level: s, expansions });
            }
            hi += step;
            step *= 2.0;
            expansions += 1;
        }

        let root = loop {
            let mid = lo + 0.5 * (hi - lo);
            // bracket exhausted at floating-point resolution
            if mid <= lo || mid >= hi {
                break mid;
            }
            let f = self.cdf(mid);
            if (f - s).abs() <= tol {
                break mid;
            }
            if f < s {
                lo = mid;
            } else {
                hi = mid;
            }
        };

        if self.smoother.kernel.is_compact() && self.pdf(root) == 0.0 {
            return Ok(self.flat_stretch_midpoint(root));
        }
        Ok(root)
    }

    // With a kernel supported on [-1, 1] the CDF is constant around `y`
    // exactly when no weighted outcome lies within h_y of it.
    fn flat_stretch_midpoint(&self, y: f64) -> f64 {
        let h_y = self.smoother.h_y();
        let mut left = f64::NEG_INFINITY;
        let mut right = f64::INFINITY;
        for (d, &w) in self.panel.dyads().iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            if d.y + h_y <= y {
                left = left.max(d.y + h_y);
            }
            if d.y - h_y >= y {
                right = right.min(d.y - h_y);
            }
        }
        if left.is_finite() && right.is_finite() {
            0.5 * (left + right)
        } else {
            y
        }
    }
}

const MAX_EXPANSIONS: usize = 60;

/// Default inversion tolerance on the probability scale.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Kernel estimate of the joint density of `(Y_ij, X_i, X_j)` at `(y, x1, x2)`.
pub fn joint_density(panel: &DyadPanel, y: f64, x1: &[f64], x2: &[f64], smoother: &Smoother) -> Result<f64> {
    let k = panel.dim();
    if x1.len() != k || x2.len() != k {
        return Err(Error::invalid(format!("covariate vectors must have length {k}")));
    }
    let kernel = smoother.kernel;
    let (h_x, h_y) = (smoother.h_x(), smoother.h_y());
    let spec = SubvectorSpec::full(k);
    let sender = per_agent_kernel(panel, &spec, x1, &kernel, h_x);
    let receiver = per_agent_kernel(panel, &spec, x2, &kernel, h_x);
    let dyads = panel.dyads();
    let sum = panel.sum_over_dyads(|m| {
        let d = &dyads[m];
        kernel.k1_density((y - d.y) / h_y) * sender[d.i] * receiver[d.j]
    });
    let n = dyads.len() as f64;
    Ok(sum / (n * h_y * h_x.powi(2 * k as i32)))
}

pub fn conditional_cdf(panel: &DyadPanel, cond: &ConditioningPoint, y: f64, smoother: &Smoother) -> Result<f64> {
    Ok(ConditionalDistribution::new(panel, cond, smoother)?.cdf(y))
}

pub fn conditional_pdf(panel: &DyadPanel, cond: &ConditioningPoint, y: f64, smoother: &Smoother) -> Result<f64> {
    Ok(ConditionalDistribution::new(panel, cond, smoother)?.pdf(y))
}

pub fn invert_cdf(panel: &DyadPanel, cond: &ConditioningPoint, s: f64, smoother: &Smoother, tol: f64) -> Result<f64> {
    ConditionalDistribution::new(panel, cond, smoother)?.quantile(s, tol)
}
