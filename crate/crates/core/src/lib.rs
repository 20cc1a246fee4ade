//! Nonparametric estimation of nonseparable dyadic regression models
//! `Y_ij = g(X_i, X_j, e_ij)` with g increasing in the scalar error.
//!
//! The structural function g and the error distribution F_e are recovered
//! from kernel estimates of the conditional distribution of `Y_ij` given the
//! covariates of both agents, under a fixed-point or homogeneity
//! normalization. Plug-in asymptotic variances, a dyadic Nadaraya-Watson
//! benchmark and a reproducible Monte Carlo harness are included.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cond_dist;
pub mod data;
pub mod error;
pub mod inference;
pub mod kernels;
pub mod montecarlo;
pub mod structural;
pub mod sum;

pub use cond_dist::{CdfCurve, ConditionalDistribution, ConditioningPoint, Smoother};
pub use data::{AgentTable, DyadPanel, GridMode, Partition, SubvectorSpec};
pub use error::{Error, ErrorClass, Result};
pub use kernels::{BandwidthRule, Bandwidths, KernelFamily, KernelSpec};
pub use structural::{Independence, Normalization, Regime, StructuralEstimate, StructuralModel};
