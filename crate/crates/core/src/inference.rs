//! Plug-in asymptotic variances, normal-approximation confidence intervals,
//! and bandwidth rate diagnostics.
//!
//! The conditional CDF at `(w1, w2)` is treated as asymptotically normal with
//! variance `Σ_F / (n·h_x^{2 d_W})`, and ĝ with variance `Σ_g / (n·h_x^{2d})`,
//! `d = max(d_W, d_W̃)`. Both Σ are formed by plugging kernel estimates into
//! the limiting expressions.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::cond_dist::{ConditionalDistribution, ConditioningPoint, Smoother};
use crate::data::DyadPanel;
use crate::error::{Error, Result};
use crate::structural::{StructuralEstimate, StructuralModel};

const MIN_COVARIATE_DENSITY: f64 = 1e-300;
const MIN_OUTCOME_DENSITY: f64 = 1e-12;

/// A plug-in variance together with the rate it is scaled by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticVariance {
    pub sigma: f64,
    /// Rate dimension d.
    pub dimension: usize,
    /// n·h_x^{2d}.
    pub scale: f64,
}

impl AsymptoticVariance {
    /// Standard error √(sigma/scale).
    pub fn std_error(&self) -> f64 {
        (self.sigma / self.scale).sqrt()
    }

    pub fn half_width(&self, level: f64) -> Result<f64> {
        Ok(normal_quantile(level)? * self.std_error())
    }
}

fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::BadProbability(level));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(std.inverse_cdf(0.5 * (1.0 + level)))
}

fn scale(n: usize, h_x: f64, d: usize) -> f64 {
    n as f64 * h_x.powi(2 * d as i32)
}

/// Σ_F = F̂(1−F̂)/f̂(w1, w2) · R(2 d_W) at `(cond, y)`.
pub fn sigma_f(panel: &DyadPanel, cond: &ConditioningPoint, y: f64, smoother: &Smoother) -> Result<AsymptoticVariance> {
    let dist = ConditionalDistribution::new(panel, cond, smoother)?;
    sigma_f_from(&dist, cond.dim(), y)
}

fn sigma_f_from(dist: &ConditionalDistribution<'_>, d_w: usize, y: f64) -> Result<AsymptoticVariance> {
    let f_cov = dist.covariate_density();
    if !(f_cov >= MIN_COVARIATE_DENSITY) {
        return Err(Error::NoLocalMass);
    }
    let cdf = dist.cdf(y);
    let smoother = dist.smoother();
    let roughness = smoother.kernel.roughness_constant(2 * d_w as u32);
    Ok(AsymptoticVariance {
        sigma: cdf * (1.0 - cdf) / f_cov * roughness,
        dimension: d_w,
        scale: scale(dist.panel().n(), smoother.h_x(), d_w),
    })
}

/// Σ_F for the error-distribution estimate F̂_e(e) of `model`.
pub fn sigma_error_cdf(
    panel: &DyadPanel,
    model: &StructuralModel,
    e: f64,
    x0_pair: Option<&crate::structural::X0Pair>,
) -> Result<AsymptoticVariance> {
    let (cond, level) = model.reference_point(panel, e, x0_pair)?;
    sigma_f(panel, &cond, level, &model.smoother)
}

/// Σ_g at a g query, along with the estimate it refers to.
///
/// Σ_g = F̃(1−F̃)/f̂_{Y|w}(ĝ)² · [1(d = d_W)/f̂(w) + 1(d = d_W̃)/f̂(w̃)] · R(2d).
pub fn sigma_g(
    panel: &DyadPanel,
    model: &StructuralModel,
    x_i: &[f64],
    x_j: &[f64],
    e: f64,
) -> Result<(StructuralEstimate, AsymptoticVariance)> {
    let estimate = model.estimate_g(panel, x_i, x_j, e)?;
    let (reference, _, query) = model.g_points(panel, x_i, x_j, e)?;
    let smoother = &model.smoother;
    let ref_dist = ConditionalDistribution::new(panel, &reference, smoother)?;
    let query_dist = ConditionalDistribution::new(panel, &query, smoother)?;

    let pdf = query_dist.pdf(estimate.value);
    if !(pdf >= MIN_OUTCOME_DENSITY) {
        return Err(Error::DegenerateDensity(pdf));
    }
    let (d_w, d_ref) = (query.dim(), reference.dim());
    let d = d_w.max(d_ref);
    let mut bracket = 0.0;
    for (dim, dist) in [(d_w, &query_dist), (d_ref, &ref_dist)] {
        if dim == d {
            let f = dist.covariate_density();
            if !(f >= MIN_COVARIATE_DENSITY) {
                return Err(Error::NoLocalMass);
            }
            bracket += 1.0 / f;
        }
    }
    let level = estimate.level;
    let sigma = level * (1.0 - level) / (pdf * pdf) * bracket * smoother.kernel.roughness_constant(2 * d as u32);
    let av = AsymptoticVariance {
        sigma,
        dimension: d,
        scale: scale(panel.n(), smoother.h_x(), d),
    };
    Ok((estimate, av))
}

/// `estimate ∓ z_{(1+level)/2} · √(sigma/scale)`.
pub fn confidence_interval(estimate: f64, av: &AsymptoticVariance, level: f64) -> Result<(f64, f64)> {
    let half = av.half_width(level)?;
    Ok((estimate - half, estimate + half))
}

/// Rate expressions from the bandwidth conditions, evaluated at one `(N, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateDiagnostics {
    pub num_agents: usize,
    pub h: f64,
    /// ln(n)/(n·h^{2K+1}); should be small.
    pub uniform_rate: f64,
    /// n·h^{2 d_W}; should be large.
    pub variance_scale: f64,
    /// n·h^{2(d_W + s'')}; should be small (undersmoothing).
    pub bias_scale: f64,
    /// N·h⁴ (lower side of the density-estimator window).
    pub window_low: f64,
    /// N·h (upper side of the density-estimator window).
    pub window_high: f64,
    pub warnings: Vec<String>,
}

impl RateDiagnostics {
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("ln(n)/(n*h^(2K+1))", self.uniform_rate),
            ("n*h^(2*d_W)", self.variance_scale),
            ("n*h^(2*(d_W+s''))", self.bias_scale),
            ("N*h^4", self.window_low),
            ("N*h", self.window_high),
        ]
    }
}

pub const UNIFORM_RATE_WARNING: f64 = 0.1;

pub fn rate_diagnostics(num_agents: usize, k: usize, d_w: usize, order: u32, h: f64) -> Result<RateDiagnostics> {
    if num_agents < 2 || k == 0 || d_w == 0 || order == 0 || !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(
            "rate diagnostics need N >= 2, K, d_W, s'' >= 1 and h > 0",
        ));
    }
    let big_n = num_agents as f64;
    let n = big_n * (big_n - 1.0);
    let uniform_rate = n.ln() / (n * h.powi(2 * k as i32 + 1));
    let mut warnings = Vec::new();
    if uniform_rate > UNIFORM_RATE_WARNING {
        warnings.push(format!(
            "ln(n)/(n*h^(2K+1)) = {uniform_rate:.4} exceeds {UNIFORM_RATE_WARNING}: bandwidth too small for uniform consistency"
        ));
    }
    Ok(RateDiagnostics {
        num_agents,
        h,
        uniform_rate,
        variance_scale: n * h.powi(2 * d_w as i32),
        bias_scale: n * h.powi(2 * (d_w as i32 + order as i32)),
        window_low: big_n * h.powi(4),
        window_high: big_n * h,
        warnings,
    })
}
