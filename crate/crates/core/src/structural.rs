//! Estimators of the error distribution F_e and of the structural function g.
//!
//! Both come from the quantile correspondence between the error and the
//! outcome: F_e(e) is a conditional CDF of Y at a reference point fixed by the
//! normalization, and g(x_i, x_j, e) is the conditional quantile of Y at
//! `(x_i, x_j)` at that same probability level.
//!
//! | normalization | reference covariates | evaluated at |
//! |---------------|----------------------|--------------|
//! | fixed point   | `(x⁰, x̄¹)`           | `e`          |
//! | homogeneous   | `(x⁰, λ·x̄¹)`, λ = e/ē | `λ·α`       |
//!
//! `x⁰` is the query's own X⁰ block under conditional independence and a
//! fixed reference `x̄⁰` under full independence. When g does not depend on
//! X⁰ the conditioning drops to the X¹ block alone.

use serde::{Deserialize, Serialize};

use crate::cond_dist::{ConditionalDistribution, ConditioningPoint, Smoother, DEFAULT_TOL};
use crate::data::{DyadPanel, Partition, SubvectorSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Independence {
    /// e_ij independent of (X¹_i, X¹_j) given (X⁰_i, X⁰_j).
    CondIndepOnX0,
    /// e_ij independent of (X_i, X_j).
    FullIndep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub independence: Independence,
    pub g_depends_on_x0: bool,
}

impl Regime {
    pub fn new(independence: Independence, g_depends_on_x0: bool) -> Self {
        Self {
            independence,
            g_depends_on_x0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// g(x⁰_i, x̄¹_i, x⁰_j, x̄¹_j, e) = e.
    FixedPoint {
        partition: Partition,
        xbar1_i: Vec<f64>,
        xbar1_j: Vec<f64>,
    },
    /// g(x⁰_i, λx̄¹_i, x⁰_j, λx̄¹_j, λē) = λα.
    Homogeneous {
        partition: Partition,
        xbar1_i: Vec<f64>,
        xbar1_j: Vec<f64>,
        ebar: f64,
        alpha: f64,
    },
}

impl Normalization {
    pub fn fixed_point(partition: Partition, xbar1_i: Vec<f64>, xbar1_j: Vec<f64>) -> Result<Self> {
        check_reference(&partition, &xbar1_i, &xbar1_j)?;
        Ok(Self::FixedPoint {
            partition,
            xbar1_i,
            xbar1_j,
        })
    }

    pub fn homogeneous(
        partition: Partition,
        xbar1_i: Vec<f64>,
        xbar1_j: Vec<f64>,
        ebar: f64,
        alpha: f64,
    ) -> Result<Self> {
        check_reference(&partition, &xbar1_i, &xbar1_j)?;
        if ebar == 0.0 || !ebar.is_finite() || !alpha.is_finite() {
            return Err(Error::invalid(
                "homogeneous normalization needs finite alpha and nonzero ebar",
            ));
        }
        Ok(Self::Homogeneous {
            partition,
            xbar1_i,
            xbar1_j,
            ebar,
            alpha,
        })
    }

    pub fn partition(&self) -> &Partition {
        match self {
            Self::FixedPoint { partition, .. } | Self::Homogeneous { partition, .. } => partition,
        }
    }

    fn xbar1(&self) -> (&[f64], &[f64]) {
        match self {
            Self::FixedPoint { xbar1_i, xbar1_j, .. } | Self::Homogeneous { xbar1_i, xbar1_j, .. } => {
                (xbar1_i, xbar1_j)
            }
        }
    }

    /// Scale λ on the X¹ block and the outcome level at which the reference
    /// CDF is read, for error value `e`.
    fn scale_and_level(&self, e: f64) -> Result<(f64, f64)> {
        match *self {
            Self::FixedPoint { .. } => Ok((1.0, e)),
            Self::Homogeneous { ebar, alpha, .. } => {
                let lambda = e / ebar;
                if !(lambda > 0.0) {
                    return Err(Error::SignMismatch { e, ebar });
                }
                Ok((lambda, lambda * alpha))
            }
        }
    }
}

fn check_reference(partition: &Partition, xbar1_i: &[f64], xbar1_j: &[f64]) -> Result<()> {
    let d1 = partition.x1().len();
    if xbar1_i.len() != d1 || xbar1_j.len() != d1 {
        return Err(Error::invalid(format!(
            "reference X1 values must have length {d1} (got {} and {})",
            xbar1_i.len(),
            xbar1_j.len()
        )));
    }
    if xbar1_i.iter().chain(xbar1_j).any(|v| !v.is_finite()) {
        return Err(Error::invalid("reference X1 values must be finite"));
    }
    Ok(())
}

/// X⁰ values for the sending and receiving agent.
pub type X0Pair = (Vec<f64>, Vec<f64>);

/// Result of one evaluation of ĝ.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEstimate {
    pub value: f64,
    pub x_i: Vec<f64>,
    pub x_j: Vec<f64>,
    pub e: f64,
    /// Smaller of the two kernel denominators involved.
    pub local_mass: f64,
    /// Probability level handed to the inversion, F̂ at the reference point.
    pub level: f64,
}

/// Regime, normalization and smoothing settings for the structural estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    pub regime: Regime,
    pub normalization: Normalization,
    pub smoother: Smoother,
    pub tol: f64,
    /// x̄⁰ under full independence; defaults to the sample mean of the X⁰ block.
    pub reference_x0: Option<X0Pair>,
}

impl StructuralModel {
    pub fn new(regime: Regime, normalization: Normalization, smoother: Smoother) -> Result<Self> {
        if regime.independence == Independence::CondIndepOnX0
            && regime.g_depends_on_x0
            && normalization.partition().x0().is_empty()
        {
            return Err(Error::invalid(
                "conditional independence on X0 with g depending on X0 needs a nonempty X0 block",
            ));
        }
        Ok(Self {
            regime,
            normalization,
            smoother,
            tol: DEFAULT_TOL,
            reference_x0: None,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_reference_x0(mut self, x0: X0Pair) -> Self {
        self.reference_x0 = Some(x0);
        self
    }

    fn partition(&self) -> &Partition {
        self.normalization.partition()
    }

    fn uses_x0(&self) -> bool {
        self.regime.g_depends_on_x0 && !self.partition().x0().is_empty()
    }

    /// Subvector the conditional distributions are built on: X⁰ then X¹ when
    /// g depends on X⁰, X¹ alone otherwise.
    pub fn conditioning_spec(&self) -> SubvectorSpec {
        let p = self.partition();
        let mut idx = Vec::with_capacity(p.dim());
        if self.uses_x0() {
            idx.extend_from_slice(p.x0());
        }
        idx.extend_from_slice(p.x1());
        SubvectorSpec::new(idx, p.dim()).expect("partition indices are valid")
    }

    fn check_panel(&self, panel: &DyadPanel) -> Result<()> {
        if panel.dim() != self.partition().dim() {
            return Err(Error::invalid(format!(
                "partition covers {} coordinates but the panel has {}",
                self.partition().dim(),
                panel.dim()
            )));
        }
        Ok(())
    }

    fn full_indep_x0(&self, panel: &DyadPanel) -> X0Pair {
        match &self.reference_x0 {
            Some(x0) => x0.clone(),
            None => {
                let means = panel.agents().column_means();
                let x0: Vec<f64> = self.partition().x0().iter().map(|&k| means[k]).collect();
                (x0.clone(), x0)
            }
        }
    }

    /// Reference conditioning point and outcome level for error value `e`.
    ///
    /// `x0_pair` supplies x⁰ under conditional independence (required there
    /// when g depends on X⁰) and overrides x̄⁰ under full independence.
    pub fn reference_point(
        &self,
        panel: &DyadPanel,
        e: f64,
        x0_pair: Option<&X0Pair>,
    ) -> Result<(ConditioningPoint, f64)> {
        self.check_panel(panel)?;
        let (lambda, level) = self.normalization.scale_and_level(e)?;
        let (xbar1_i, xbar1_j) = self.normalization.xbar1();
        let mut w1 = Vec::new();
        let mut w2 = Vec::new();
        if self.uses_x0() {
            let x0 = match (self.regime.independence, x0_pair) {
                (_, Some(pair)) => pair.clone(),
                (Independence::CondIndepOnX0, None) => {
                    return Err(Error::invalid(
                        "x0 values are required under conditional independence on X0",
                    ))
                }
                (Independence::FullIndep, None) => self.full_indep_x0(panel),
            };
            let d0 = self.partition().x0().len();
            if x0.0.len() != d0 || x0.1.len() != d0 {
                return Err(Error::invalid(format!("x0 values must have length {d0}")));
            }
            w1.extend_from_slice(&x0.0);
            w2.extend_from_slice(&x0.1);
        }
        w1.extend(xbar1_i.iter().map(|v| lambda * v));
        w2.extend(xbar1_j.iter().map(|v| lambda * v));
        Ok((ConditioningPoint::new(self.conditioning_spec(), w1, w2)?, level))
    }

    /// Conditioning point at the query covariates.
    pub fn query_point(&self, x_i: &[f64], x_j: &[f64]) -> Result<ConditioningPoint> {
        let k = self.partition().dim();
        if x_i.len() != k || x_j.len() != k {
            return Err(Error::invalid(format!("query covariates must have length {k}")));
        }
        let spec = self.conditioning_spec();
        let (w1, w2) = (spec.select(x_i), spec.select(x_j));
        ConditioningPoint::new(spec, w1, w2)
    }

    /// X⁰ values that fix the reference point for a g query.
    fn x0_for_query(&self, panel: &DyadPanel, x_i: &[f64], x_j: &[f64]) -> Option<X0Pair> {
        if !self.uses_x0() {
            return None;
        }
        match self.regime.independence {
            Independence::CondIndepOnX0 => {
                let x0 = self.partition().x0();
                Some((
                    x0.iter().map(|&k| x_i[k]).collect(),
                    x0.iter().map(|&k| x_j[k]).collect(),
                ))
            }
            Independence::FullIndep => Some(self.full_indep_x0(panel)),
        }
    }

    /// Both conditioning points of a g query plus the outcome level at the
    /// reference point.
    pub fn g_points(
        &self,
        panel: &DyadPanel,
        x_i: &[f64],
        x_j: &[f64],
        e: f64,
    ) -> Result<(ConditioningPoint, f64, ConditioningPoint)> {
        let query = self.query_point(x_i, x_j)?;
        let x0 = self.x0_for_query(panel, x_i, x_j);
        let (reference, level) = self.reference_point(panel, e, x0.as_ref())?;
        Ok((reference, level, query))
    }

    /// F̂_e(e), or F̂_{e|x⁰} under conditional independence with X⁰ in g.
    pub fn estimate_error_cdf(&self, panel: &DyadPanel, e: f64, x0_pair: Option<&X0Pair>) -> Result<f64> {
        self.error_cdf_with_mass(panel, e, x0_pair).map(|(f, _)| f)
    }

    /// F̂_e(e) together with its kernel denominator.
    pub fn error_cdf_with_mass(&self, panel: &DyadPanel, e: f64, x0_pair: Option<&X0Pair>) -> Result<(f64, f64)> {
        let (cond, level) = self.reference_point(panel, e, x0_pair)?;
        let dist = ConditionalDistribution::new(panel, &cond, &self.smoother)?;
        Ok((dist.cdf(level), dist.mass()))
    }

    /// ĝ(x_i, x_j, e) = F̂⁻¹_{Y|x_i,x_j}(F̂_{Y|reference}(level)).
    pub fn estimate_g(&self, panel: &DyadPanel, x_i: &[f64], x_j: &[f64], e: f64) -> Result<StructuralEstimate> {
        self.estimate_g_cached(panel, x_i, x_j, e, &mut DistCache::default())
    }

    /// As [`estimate_g`](Self::estimate_g), reusing conditional distributions
    /// from `cache` when consecutive queries share a conditioning point.
    pub fn estimate_g_cached<'p>(
        &self,
        panel: &'p DyadPanel,
        x_i: &[f64],
        x_j: &[f64],
        e: f64,
        cache: &mut DistCache<'p>,
    ) -> Result<StructuralEstimate> {
        if !x_i.iter().chain(x_j).all(|v| v.is_finite()) || !e.is_finite() {
            return Err(Error::invalid("query values must be finite"));
        }
        let (reference, y_ref, query) = self.g_points(panel, x_i, x_j, e)?;
        let ref_dist = cache.reference.get(panel, reference, &self.smoother)?;
        let level = ref_dist.cdf(y_ref);
        let ref_mass = ref_dist.mass();
        let query_dist = cache.query.get(panel, query, &self.smoother)?;
        let value = query_dist.quantile(level, self.tol)?;
        Ok(StructuralEstimate {
            value,
            x_i: x_i.to_vec(),
            x_j: x_j.to_vec(),
            e,
            local_mass: ref_mass.min(query_dist.mass()),
            level,
        })
    }

    /// Pointwise evaluation of a slice over `grid`; failures become missing
    /// entries tagged with the error's reason code.
    pub fn estimate_curves(&self, panel: &DyadPanel, slice: &CurveSlice, grid: &[f64]) -> CurveTable {
        let mut cache = DistCache::default();
        let points = grid
            .iter()
            .map(|&t| {
                let outcome = match slice {
                    CurveSlice::GInX {
                        x_i,
                        coordinate,
                        x_j,
                        e,
                    } => {
                        let mut xi = x_i.clone();
                        match xi.get_mut(*coordinate) {
                            Some(slot) => {
                                *slot = t;
                                self.estimate_g_cached(panel, &xi, x_j, *e, &mut cache)
                                    .map(|g| (g.value, g.local_mass))
                            }
                            None => Err(Error::invalid("slice coordinate out of range")),
                        }
                    }
                    CurveSlice::GInE { x_i, x_j } => self
                        .estimate_g_cached(panel, x_i, x_j, t, &mut cache)
                        .map(|g| (g.value, g.local_mass)),
                    CurveSlice::Fe { x0_pair } => self.error_cdf_with_mass(panel, t, x0_pair.as_ref()),
                };
                CurvePoint::from_result(t, outcome)
            })
            .collect();
        CurveTable { points }
    }
}

/// One-entry memo of a conditional distribution keyed by its conditioning point.
#[derive(Debug, Default)]
pub struct DistSlot<'p> {
    entry: Option<(ConditioningPoint, ConditionalDistribution<'p>)>,
}

impl<'p> DistSlot<'p> {
    fn get(
        &mut self,
        panel: &'p DyadPanel,
        cond: ConditioningPoint,
        smoother: &Smoother,
    ) -> Result<&ConditionalDistribution<'p>> {
        let hit = matches!(&self.entry, Some((c, d)) if *c == cond && std::ptr::eq(d.panel(), panel) && d.smoother() == smoother);
        if !hit {
            let dist = ConditionalDistribution::new(panel, &cond, smoother)?;
            self.entry = Some((cond, dist));
        }
        Ok(&self.entry.as_ref().expect("slot filled above").1)
    }
}

/// Memo for the reference and query distributions of consecutive g queries.
#[derive(Debug, Default)]
pub struct DistCache<'p> {
    reference: DistSlot<'p>,
    query: DistSlot<'p>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveSlice {
    /// g with coordinate `coordinate` of x_i running over the grid.
    GInX {
        x_i: Vec<f64>,
        coordinate: usize,
        x_j: Vec<f64>,
        e: f64,
    },
    /// g(x_i, x_j, e) with e running over the grid.
    GInE { x_i: Vec<f64>, x_j: Vec<f64> },
    /// F̂_e(e) with e running over the grid.
    Fe { x0_pair: Option<X0Pair> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub point: f64,
    pub estimate: Option<f64>,
    pub local_mass: Option<f64>,
    pub failure: Option<&'static str>,
}

impl CurvePoint {
    fn from_result(point: f64, outcome: Result<(f64, f64)>) -> Self {
        match outcome {
            Ok((estimate, mass)) => Self {
                point,
                estimate: Some(estimate),
                local_mass: Some(mass),
                failure: None,
            },
            Err(e) => Self {
                point,
                estimate: None,
                local_mass: None,
                failure: Some(e.reason_code()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub points: Vec<CurvePoint>,
}

impl CurveTable {
    pub fn estimates(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.estimate).collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.failure.is_some()).count()
    }

    /// Number of adjacent pairs along the grid where the estimate decreases.
    pub fn monotonicity_violations(&self) -> usize {
        let vals: Vec<f64> = self.points.iter().filter_map(|p| p.estimate).collect();
        vals.windows(2).filter(|w| w[1] < w[0]).count()
    }
}
