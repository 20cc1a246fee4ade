//! Scalar and product kernels, the integrated kernel, bandwidth rules and the
//! roughness constant entering the plug-in variances.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "epanechnikov" => Ok(Self::Epanechnikov),
            other => Err(Error::invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Scalar kernel family plus its nominal order (2 for both families).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub order: u32,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::new(KernelFamily::Gaussian)
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Self {
        Self { family, order: 2 }
    }

    pub fn gaussian() -> Self {
        Self::new(KernelFamily::Gaussian)
    }

    pub fn epanechnikov() -> Self {
        Self::new(KernelFamily::Epanechnikov)
    }

    /// True when the kernel vanishes outside `[-1, 1]`.
    pub fn is_compact(&self) -> bool {
        self.family == KernelFamily::Epanechnikov
    }

    /// Scalar kernel K₁(u).
    #[inline]
    pub fn k1_density(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
            KernelFamily::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// Integrated kernel k₁(u) = ∫_{-∞}^u K₁(s) ds.
    #[inline]
    pub fn k1_integrated(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => normal_cdf(u),
            KernelFamily::Epanechnikov => {
                if u <= -1.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    0.5 + 0.75 * (u - u * u * u / 3.0)
                }
            }
        }
    }

    /// Product of scalar kernels over the coordinates of `u`.
    pub fn product_kernel(&self, u: &[f64]) -> f64 {
        u.iter().map(|&v| self.k1_density(v)).product()
    }

    /// ∫(∫K(s,t)dt)² ds over `d` product coordinates, i.e. (∫K₁²)^d.
    pub fn roughness_constant(&self, d: u32) -> f64 {
        let one = match self.family {
            KernelFamily::Gaussian => 1.0 / (2.0 * PI.sqrt()),
            KernelFamily::Epanechnikov => 0.6,
        };
        one.powi(d as i32)
    }
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(u: f64) -> f64 {
    // beyond these points the correctly rounded value is exactly 1 or 0
    if u > 8.5 {
        1.0
    } else if u < -40.0 {
        0.0
    } else {
        0.5 * erfc(-u / SQRT_2)
    }
}

/// h = 1.06 · size^{-1/5}.
pub fn rule_of_thumb(sample_size: usize) -> f64 {
    1.06 * (sample_size.max(1) as f64).powf(-0.2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthRule {
    /// h_x = 1.06 N^{-1/5}, h_y = 1.06 n^{-1/5}.
    #[default]
    Rot,
    Manual,
}

impl std::str::FromStr for BandwidthRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rot" => Ok(Self::Rot),
            "manual" => Ok(Self::Manual),
            other => Err(Error::invalid(format!("unknown bandwidth rule {other:?}"))),
        }
    }
}

/// Covariate bandwidth `h_x` (shared by all coordinates of both agents) and
/// outcome bandwidth `h_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h_x: f64,
    pub h_y: f64,
    pub rule: BandwidthRule,
}

impl Bandwidths {
    pub fn manual(h_x: f64, h_y: f64) -> Result<Self> {
        for (name, h) in [("h_x", h_x), ("h_y", h_y)] {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {h}")));
            }
        }
        Ok(Self {
            h_x,
            h_y,
            rule: BandwidthRule::Manual,
        })
    }

    /// Rule-of-thumb pair for `num_agents` agents and `num_dyads` dyads.
    pub fn rule_of_thumb(num_agents: usize, num_dyads: usize) -> Self {
        Self {
            h_x: rule_of_thumb(num_agents),
            h_y: rule_of_thumb(num_dyads),
            rule: BandwidthRule::Rot,
        }
    }
}
