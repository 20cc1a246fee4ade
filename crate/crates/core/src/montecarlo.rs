//! Monte Carlo study for the multiplicative design
//! `Y_ij = c · X_i² · X_j² · e_ij⁻³`, with `X_i` and `e_ij` normal.
//!
//! Each replication draws a complete panel, estimates three curves
//! (g in x, g in e, and F_e) plus the Nadaraya-Watson benchmark on the first,
//! and the study aggregates pointwise mean, bias and RMSE against the truth.
//! Replication `r` draws from ChaCha stream `r` under the master seed, so its
//! data never depends on how many other replications run or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::nw_mean;
use crate::cond_dist::{Smoother, DEFAULT_TOL};
use crate::data::{build_panel, make_grid, AgentTable, DyadPanel, GridMode, Partition};
use crate::error::{Error, Result};
use crate::inference::{confidence_interval, sigma_error_cdf};
use crate::kernels::{normal_cdf, BandwidthRule, Bandwidths, KernelFamily, KernelSpec};
use crate::structural::{CurveSlice, Independence, Normalization, Regime, StructuralModel};

const SINGULARITY_GUARD: f64 = 1e-8;

/// Data-generating process `Y = coefficient · x_i² · x_j² · e⁻³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dgp {
    pub coefficient: f64,
    pub x_mean: f64,
    pub x_sd: f64,
    pub e_mean: f64,
    pub e_sd: f64,
}

impl Default for Dgp {
    fn default() -> Self {
        Self {
            coefficient: -0.3,
            x_mean: 6.0,
            x_sd: 1.0,
            e_mean: -6.0,
            e_sd: 1.0,
        }
    }
}

/// A simulated panel plus the number of error draws redrawn at the singularity.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: DyadPanel,
    pub redraws: usize,
}

impl Dgp {
    pub fn true_g(&self, x_i: f64, x_j: f64, e: f64) -> Result<f64> {
        if e == 0.0 {
            return Err(Error::Singularity);
        }
        Ok(self.coefficient * x_i * x_i * x_j * x_j / (e * e * e))
    }

    /// F_e(e) for the normal error law.
    pub fn true_error_cdf(&self, e: f64) -> f64 {
        normal_cdf((e - self.e_mean) / self.e_sd)
    }

    pub fn simulate(&self, num_agents: usize, rng: &mut ChaCha8Rng) -> Result<SimulatedPanel> {
        if num_agents < 2 {
            return Err(Error::invalid("simulation needs at least two agents"));
        }
        let x_law = Normal::new(self.x_mean, self.x_sd).map_err(|e| Error::invalid(e.to_string()))?;
        let e_law = Normal::new(self.e_mean, self.e_sd).map_err(|e| Error::invalid(e.to_string()))?;
        let xs: Vec<f64> = (0..num_agents).map(|_| x_law.sample(rng)).collect();
        let mut redraws = 0;
        let mut records = Vec::with_capacity(num_agents * (num_agents - 1));
        for i in 0..num_agents {
            for j in 0..num_agents {
                if i == j {
                    continue;
                }
                let mut e = e_law.sample(rng);
                while e.abs() < SINGULARITY_GUARD {
                    redraws += 1;
                    e = e_law.sample(rng);
                }
                records.push((i, j, self.coefficient * xs[i] * xs[i] * xs[j] * xs[j] / (e * e * e)));
            }
        }
        let agents = AgentTable::from_rows(xs.into_iter().map(|x| vec![x]).collect())?;
        Ok(SimulatedPanel {
            panel: build_panel(agents, records)?,
            redraws,
        })
    }
}

/// Random stream for replication `index` under `master_seed`.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Draws a panel from the default design.
pub fn simulate_dgp(num_agents: usize, seed: u64) -> Result<SimulatedPanel> {
    Dgp::default().simulate(num_agents, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// g(x, y, e) = −0.3 x² y² e⁻³.
pub fn true_g(x: f64, y: f64, e: f64) -> Result<f64> {
    Dgp::default().true_g(x, y, e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub num_agents: usize,
    pub replications: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub grid_mode: GridMode,
    pub x_lo: f64,
    pub x_hi: f64,
    pub e_lo: f64,
    pub e_hi: f64,
    pub kernel: KernelFamily,
    pub bandwidth_rule: BandwidthRule,
    pub h_x: Option<f64>,
    pub h_y: Option<f64>,
    pub xbar1: f64,
    pub ebar: f64,
    /// `None` derives α = g(x̄¹, x̄¹, ē) from the design.
    pub alpha: Option<f64>,
    /// Fixed receiver covariate for the g slices.
    pub slice_x_j: f64,
    /// Fixed sender covariate for the g-in-e slice.
    pub slice_x_i: f64,
    /// Fixed error value for the g-in-x slice.
    pub slice_e: f64,
    pub tol: f64,
    pub coefficient: f64,
    pub x_mean: f64,
    pub x_sd: f64,
    pub e_mean: f64,
    pub e_sd: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            num_agents: 100,
            replications: 100,
            seed: 0,
            grid_points: 100,
            grid_mode: GridMode::Equispaced,
            x_lo: 4.0,
            x_hi: 8.0,
            e_lo: -8.0,
            e_hi: -4.0,
            kernel: KernelFamily::Gaussian,
            bandwidth_rule: BandwidthRule::Rot,
            h_x: None,
            h_y: None,
            xbar1: 6.0,
            ebar: -6.0,
            alpha: Some(1.8),
            slice_x_j: 5.0,
            slice_x_i: 4.0,
            slice_e: -6.0,
            tol: DEFAULT_TOL,
            coefficient: -0.3,
            x_mean: 6.0,
            x_sd: 1.0,
            e_mean: -6.0,
            e_sd: 1.0,
        }
    }
}

impl StudyConfig {
    pub fn dgp(&self) -> Dgp {
        Dgp {
            coefficient: self.coefficient,
            x_mean: self.x_mean,
            x_sd: self.x_sd,
            e_mean: self.e_mean,
            e_sd: self.e_sd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_agents < 2 {
            return Err(Error::invalid("num_agents must be at least 2"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.grid_points == 0 {
            return Err(Error::invalid("grid_points must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if self.bandwidth_rule == BandwidthRule::Manual && (self.h_x.is_none() || self.h_y.is_none()) {
            return Err(Error::invalid("manual bandwidth rule needs h_x and h_y"));
        }
        self.normalization()?;
        Ok(())
    }

    pub fn alpha(&self) -> Result<f64> {
        match self.alpha {
            Some(a) => Ok(a),
            None => self.dgp().true_g(self.xbar1, self.xbar1, self.ebar),
        }
    }

    pub fn normalization(&self) -> Result<Normalization> {
        Normalization::homogeneous(
            Partition::all_x1(1),
            vec![self.xbar1],
            vec![self.xbar1],
            self.ebar,
            self.alpha()?,
        )
    }

    pub fn bandwidths(&self) -> Result<Bandwidths> {
        let n_agents = self.num_agents;
        match self.bandwidth_rule {
            BandwidthRule::Rot => Ok(Bandwidths::rule_of_thumb(n_agents, n_agents * (n_agents - 1))),
            BandwidthRule::Manual => Bandwidths::manual(
                self.h_x.ok_or_else(|| Error::invalid("missing h_x"))?,
                self.h_y.ok_or_else(|| Error::invalid("missing h_y"))?,
            ),
        }
    }

    pub fn model(&self) -> Result<StructuralModel> {
        let smoother = Smoother::new(KernelSpec::new(self.kernel), self.bandwidths()?);
        Ok(StructuralModel::new(
            Regime::new(Independence::FullIndep, false),
            self.normalization()?,
            smoother,
        )?
        .with_tol(self.tol))
    }

    pub fn x_grid(&self) -> Result<Vec<f64>> {
        make_grid(self.x_lo, self.x_hi, self.grid_points, self.grid_mode, self.seed)
    }

    pub fn e_grid(&self) -> Result<Vec<f64>> {
        make_grid(
            self.e_lo,
            self.e_hi,
            self.grid_points,
            self.grid_mode,
            self.seed.wrapping_add(1),
        )
    }
}

/// Curves of one replication; `None` marks a failed grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationCurves {
    pub index: usize,
    pub g_in_x: Vec<Option<f64>>,
    pub nw_in_x: Vec<Option<f64>>,
    pub g_in_e: Vec<Option<f64>>,
    pub fe: Vec<Option<f64>>,
    /// ĝ(x̄¹, x̄¹, ē) − α.
    pub self_inversion_error: Option<f64>,
    pub redraws: usize,
}

/// Pointwise aggregate of one slice across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSummary {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub mean: Vec<Option<f64>>,
    pub bias: Vec<Option<f64>>,
    pub rmse: Vec<Option<f64>>,
    /// Replications contributing at each grid point.
    pub count: Vec<usize>,
}

impl SliceSummary {
    pub fn from_curves(grid: &[f64], truth: Vec<f64>, curves: &[&[Option<f64>]]) -> Self {
        let mut mean = Vec::with_capacity(grid.len());
        let mut bias = Vec::with_capacity(grid.len());
        let mut rmse = Vec::with_capacity(grid.len());
        let mut count = Vec::with_capacity(grid.len());
        for (p, &t) in truth.iter().enumerate() {
            let vals: Vec<f64> = curves.iter().filter_map(|c| c[p]).collect();
            count.push(vals.len());
            if vals.is_empty() {
                mean.push(None);
                bias.push(None);
                rmse.push(None);
                continue;
            }
            let c = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / c;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c;
            let b = m - t;
            mean.push(Some(m));
            bias.push(Some(b));
            // RMSE² = bias² + variance, so RMSE >= |bias| holds exactly
            rmse.push(Some((b * b + var).sqrt()));
        }
        Self {
            grid: grid.to_vec(),
            truth,
            mean,
            bias,
            rmse,
            count,
        }
    }

    /// Mean of the pointwise RMSE over grid points with estimates.
    pub fn grid_avg_rmse(&self) -> f64 {
        let v: Vec<f64> = self.rmse.iter().flatten().copied().collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// sup over the grid of |mean − truth|.
    pub fn sup_abs_bias(&self) -> f64 {
        self.bias.iter().flatten().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn missing(&self, replications: usize) -> usize {
        self.count.iter().map(|c| replications - c).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub bandwidths: Bandwidths,
    pub replications: Vec<ReplicationCurves>,
    pub g_in_x: SliceSummary,
    pub nw_in_x: SliceSummary,
    pub g_in_e: SliceSummary,
    pub fe: SliceSummary,
}

fn run_replication(
    cfg: &StudyConfig,
    model: &StructuralModel,
    x_grid: &[f64],
    e_grid: &[f64],
    index: usize,
) -> Result<ReplicationCurves> {
    let sim = cfg
        .dgp()
        .simulate(cfg.num_agents, &mut replication_rng(cfg.seed, index as u64))?;
    let panel = &sim.panel;
    let (x_j, x_i, e) = (cfg.slice_x_j, cfg.slice_x_i, cfg.slice_e);

    let g_in_x = model
        .estimate_curves(
            panel,
            &CurveSlice::GInX {
                x_i: vec![x_i],
                coordinate: 0,
                x_j: vec![x_j],
                e,
            },
            x_grid,
        )
        .estimates();
    let nw_in_x = x_grid
        .iter()
        .map(|&x| nw_mean(panel, &[x], &[x_j], &model.smoother).ok().map(|nw| nw.value))
        .collect();
    let g_in_e = model
        .estimate_curves(
            panel,
            &CurveSlice::GInE {
                x_i: vec![x_i],
                x_j: vec![x_j],
            },
            e_grid,
        )
        .estimates();
    let fe = model
        .estimate_curves(panel, &CurveSlice::Fe { x0_pair: None }, e_grid)
        .estimates();
    let alpha = cfg.alpha()?;
    let self_inversion_error = model
        .estimate_g(panel, &[cfg.xbar1], &[cfg.xbar1], cfg.ebar)
        .ok()
        .map(|g| g.value - alpha);
    Ok(ReplicationCurves {
        index,
        g_in_x,
        nw_in_x,
        g_in_e,
        fe,
        self_inversion_error,
        redraws: sim.redraws,
    })
}

/// Runs every replication (in parallel on the current rayon pool) and
/// aggregates in replication order.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let model = cfg.model()?;
    let x_grid = cfg.x_grid()?;
    let e_grid = cfg.e_grid()?;
    let replications = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, &model, &x_grid, &e_grid, r))
        .collect::<Result<Vec<_>>>()?;

    let dgp = cfg.dgp();
    let truth_x = x_grid
        .iter()
        .map(|&x| dgp.true_g(x, cfg.slice_x_j, cfg.slice_e))
        .collect::<Result<Vec<_>>>()?;
    let truth_e = e_grid
        .iter()
        .map(|&e| dgp.true_g(cfg.slice_x_i, cfg.slice_x_j, e))
        .collect::<Result<Vec<_>>>()?;
    let truth_fe = e_grid.iter().map(|&e| dgp.true_error_cdf(e)).collect();

    let pick =
        |f: fn(&ReplicationCurves) -> &[Option<f64>]| -> Vec<&[Option<f64>]> { replications.iter().map(f).collect() };
    Ok(StudyResult {
        g_in_x: SliceSummary::from_curves(&x_grid, truth_x.clone(), &pick(|r| &r.g_in_x)),
        nw_in_x: SliceSummary::from_curves(&x_grid, truth_x, &pick(|r| &r.nw_in_x)),
        g_in_e: SliceSummary::from_curves(&e_grid, truth_e, &pick(|r| &r.g_in_e)),
        fe: SliceSummary::from_curves(&e_grid, truth_fe, &pick(|r| &r.fe)),
        bandwidths: model.smoother.bandwidths,
        config: cfg.clone(),
        replications,
    })
}

/// One row of a per-slice summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub point: f64,
    pub truth: f64,
    pub mean: Option<f64>,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    pub nw_mean: Option<f64>,
    pub nw_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub g_in_x: Vec<SummaryRow>,
    pub g_in_e: Vec<SummaryRow>,
    pub fe: Vec<SummaryRow>,
    /// (slice name, grid-averaged RMSE, sup |bias|, missing points).
    pub aggregates: Vec<(&'static str, f64, f64, usize)>,
}

fn rows(s: &SliceSummary, nw: Option<&SliceSummary>) -> Vec<SummaryRow> {
    (0..s.grid.len())
        .map(|p| SummaryRow {
            point: s.grid[p],
            truth: s.truth[p],
            mean: s.mean[p],
            bias: s.bias[p],
            rmse: s.rmse[p],
            nw_mean: nw.and_then(|n| n.mean[p]),
            nw_rmse: nw.and_then(|n| n.rmse[p]),
        })
        .collect()
}

pub fn summarize(result: &StudyResult) -> StudySummary {
    let reps = result.replications.len();
    let agg = |name, s: &SliceSummary| (name, s.grid_avg_rmse(), s.sup_abs_bias(), s.missing(reps));
    StudySummary {
        g_in_x: rows(&result.g_in_x, Some(&result.nw_in_x)),
        g_in_e: rows(&result.g_in_e, None),
        fe: rows(&result.fe, None),
        aggregates: vec![
            agg("g_in_x", &result.g_in_x),
            agg("nw_in_x", &result.nw_in_x),
            agg("g_in_e", &result.g_in_e),
            agg("fe", &result.fe),
        ],
    }
}

/// Empirical behaviour of the plug-in interval for F_e at one error value.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub truth: f64,
    pub estimates: Vec<f64>,
    /// Plug-in variance sigma/scale for each replication.
    pub plug_in_variances: Vec<f64>,
    pub covered: usize,
    pub failures: usize,
}

impl CoverageResult {
    pub fn frequency(&self) -> f64 {
        self.covered as f64 / self.estimates.len() as f64
    }

    pub fn empirical_variance(&self) -> f64 {
        let c = self.estimates.len() as f64;
        let m = self.estimates.iter().sum::<f64>() / c;
        self.estimates.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (c - 1.0)
    }

    pub fn mean_plug_in_variance(&self) -> f64 {
        self.plug_in_variances.iter().sum::<f64>() / self.plug_in_variances.len() as f64
    }
}

/// Coverage of the `level` interval for F_e(e) across `cfg.replications` panels.
pub fn run_coverage(cfg: &StudyConfig, e: f64, level: f64) -> Result<CoverageResult> {
    cfg.validate()?;
    let model = cfg.model()?;
    let truth = cfg.dgp().true_error_cdf(e);
    let outcomes = (0..cfg.replications)
        .into_par_iter()
        .map(|r| -> Result<Option<(f64, f64, bool)>> {
            let sim = cfg
                .dgp()
                .simulate(cfg.num_agents, &mut replication_rng(cfg.seed, r as u64))?;
            let est = model.estimate_error_cdf(&sim.panel, e, None);
            let av = sigma_error_cdf(&sim.panel, &model, e, None);
            match (est, av) {
                (Ok(f), Ok(av)) => {
                    let (lo, hi) = confidence_interval(f, &av, level)?;
                    Ok(Some((f, av.sigma / av.scale, lo <= truth && truth <= hi)))
                }
                _ => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = CoverageResult {
        truth,
        estimates: Vec::new(),
        plug_in_variances: Vec::new(),
        covered: 0,
        failures: 0,
    };
    for o in outcomes {
        match o {
            Some((f, v, hit)) => {
                res.estimates.push(f);
                res.plug_in_variances.push(v);
                res.covered += hit as usize;
            }
            None => res.failures += 1,
        }
    }
    Ok(res)
}
