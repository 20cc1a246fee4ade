use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dyadnp::cond_dist::DEFAULT_TOL;
use dyadnp::data::load_panel;
use dyadnp::{
    Bandwidths, DyadPanel, Independence, KernelFamily, KernelSpec, Normalization, Partition, Regime, Smoother,
    StructuralModel,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelOpt {
    Gaussian,
    Epanechnikov,
}

impl From<KernelOpt> for KernelFamily {
    fn from(k: KernelOpt) -> Self {
        match k {
            KernelOpt::Gaussian => KernelFamily::Gaussian,
            KernelOpt::Epanechnikov => KernelFamily::Epanechnikov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleOpt {
    Rot,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeOpt {
    /// Error independent of X1 given X0.
    CondX0,
    /// Error independent of all covariates.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormOpt {
    /// g equals e at the reference covariates.
    Fixed,
    /// g homogeneous of degree one in (x1, e).
    Homog,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Agents CSV (`agent_id,x_1,...,x_K`).
    #[arg(long)]
    pub agents: PathBuf,
    /// Dyads CSV (`i,j,y`).
    #[arg(long)]
    pub dyads: PathBuf,
}

impl PanelArgs {
    pub fn load(&self) -> Result<DyadPanel, CliError> {
        Ok(load_panel(&self.agents, &self.dyads)?)
    }
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelOpt,
    #[arg(long, value_enum, default_value = "rot")]
    pub bandwidth_rule: RuleOpt,
    #[arg(long)]
    pub h_x: Option<f64>,
    #[arg(long)]
    pub h_y: Option<f64>,
}

impl KernelArgs {
    pub fn smoother(&self, panel: &DyadPanel) -> Result<Smoother, CliError> {
        let bw = match self.bandwidth_rule {
            RuleOpt::Rot => {
                if self.h_x.is_some() || self.h_y.is_some() {
                    return Err(CliError::usage("--h-x/--h-y need --bandwidth-rule manual"));
                }
                Bandwidths::rule_of_thumb(panel.num_agents(), panel.n())
            }
            RuleOpt::Manual => {
                let h_x = self
                    .h_x
                    .ok_or_else(|| CliError::usage("--bandwidth-rule manual requires --h-x"))?;
                let h_y = self
                    .h_y
                    .ok_or_else(|| CliError::usage("--bandwidth-rule manual requires --h-y"))?;
                Bandwidths::manual(h_x, h_y)?
            }
        };
        Ok(Smoother::new(KernelSpec::new(self.kernel.into()), bw))
    }
}

#[derive(Debug, Args)]
pub struct StructuralArgs {
    #[arg(long, value_enum, default_value = "full")]
    pub regime: RegimeOpt,
    #[arg(long, value_enum, default_value = "fixed")]
    pub normalization: NormOpt,
    /// Covariate indices (0-based) forming X0; the rest form X1.
    #[arg(long, value_delimiter = ',')]
    pub partition: Vec<usize>,
    /// g does not take X0 as an argument.
    #[arg(long)]
    pub g_ignores_x0: bool,
    /// Reference X1 values of the sender.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub xbar1: Option<Vec<f64>>,
    /// Reference X1 values of the receiver (defaults to --xbar1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub xbar1_j: Option<Vec<f64>>,
    /// Reference X0 values under full independence (defaults to sample means).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub xbar0: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub ebar: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Inversion tolerance on the probability scale.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

impl StructuralArgs {
    pub fn model(&self, panel: &DyadPanel, smoother: Smoother) -> Result<StructuralModel, CliError> {
        let partition = Partition::new(
            self.partition.clone(),
            (0..panel.dim()).filter(|k| !self.partition.contains(k)).collect(),
            panel.dim(),
        )?;
        let xbar1 = self.xbar1.clone().ok_or_else(|| CliError::usage("missing --xbar1"))?;
        let xbar1_j = self.xbar1_j.clone().unwrap_or_else(|| xbar1.clone());
        let normalization = match self.normalization {
            NormOpt::Fixed => {
                if self.ebar.is_some() || self.alpha.is_some() {
                    return Err(CliError::usage("--ebar/--alpha apply only to --normalization homog"));
                }
                Normalization::fixed_point(partition, xbar1, xbar1_j)?
            }
            NormOpt::Homog => {
                let ebar = self
                    .ebar
                    .ok_or_else(|| CliError::usage("--normalization homog requires --ebar"))?;
                let alpha = self
                    .alpha
                    .ok_or_else(|| CliError::usage("--normalization homog requires --alpha"))?;
                Normalization::homogeneous(partition, xbar1, xbar1_j, ebar, alpha)?
            }
        };
        let independence = match self.regime {
            RegimeOpt::CondX0 => Independence::CondIndepOnX0,
            RegimeOpt::Full => Independence::FullIndep,
        };
        let regime = Regime::new(independence, !self.g_ignores_x0);
        let mut model = StructuralModel::new(regime, normalization, smoother)?.with_tol(self.tol);
        if let Some(x0) = &self.xbar0 {
            if self.regime != RegimeOpt::Full {
                return Err(CliError::usage("--xbar0 applies only to --regime full"));
            }
            model = model.with_reference_x0((x0.clone(), x0.clone()));
        }
        Ok(model)
    }
}

/// Parses `lo,hi,count` into an equispaced grid.
pub fn grid(flag: &str, spec: &[f64]) -> Result<Vec<f64>, CliError> {
    match spec {
        &[lo, hi, count] if count >= 1.0 && count.fract() == 0.0 => Ok(dyadnp::data::make_grid(
            lo,
            hi,
            count as usize,
            dyadnp::GridMode::Equispaced,
            0,
        )?),
        _ => Err(CliError::usage(format!("{flag} expects lo,hi,count"))),
    }
}
