//! Dyadic Nadaraya-Watson regression of Y_ij on (X_i, X_j), the benchmark for
//! the structural estimator of g.

use crate::cond_dist::Smoother;
use crate::data::DyadPanel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NwEstimate {
    pub value: f64,
    /// Σ K₂ at the query.
    pub mass: f64,
}

/// Kernel-weighted mean of the outcomes around `(x1, x2)`.
pub fn nw_mean(panel: &DyadPanel, x1: &[f64], x2: &[f64], smoother: &Smoother) -> Result<NwEstimate> {
    let k = panel.dim();
    if x1.len() != k || x2.len() != k {
        return Err(Error::invalid(format!("covariate vectors must have length {k}")));
    }
    let kernel = smoother.kernel;
    let h_x = smoother.h_x();
    let agents = panel.agents();
    let mut u = vec![0.0; k];
    let mut side = |at: &[f64]| -> Vec<f64> {
        (0..agents.len())
            .map(|a| {
                for ((slot, &w), &x) in u.iter_mut().zip(at).zip(agents.row(a)) {
                    *slot = (w - x) / h_x;
                }
                kernel.product_kernel(&u)
            })
            .collect()
    };
    let sender = side(x1);
    let receiver = side(x2);
    let dyads = panel.dyads();
    let weight = |m: usize| sender[dyads[m].i] * receiver[dyads[m].j];
    let mass = panel.sum_over_dyads(weight);
    if !(mass > 0.0) {
        return Err(Error::NoLocalMass);
    }
    // centre on one outcome so a constant panel reproduces its value exactly
    let anchor = dyads[0].y;
    let num = panel.sum_over_dyads(|m| weight(m) * (dyads[m].y - anchor));
    let (y_min, y_max) = panel.outcome_range();
    let value = (anchor + num / mass).clamp(y_min, y_max);
    Ok(NwEstimate { value, mass })
}
