use std::fs;
use std::path::Path;

use dyadnp::baseline::nw_mean;
use dyadnp::inference::{confidence_interval, rate_diagnostics, sigma_error_cdf, sigma_g, AsymptoticVariance};
use dyadnp::kernels::rule_of_thumb;
use dyadnp::montecarlo::{replication_rng, run_study, summarize, StudyConfig, SummaryRow};
use dyadnp::structural::{CurvePoint, CurveSlice, X0Pair};
use dyadnp::{
    BandwidthRule, Bandwidths, ConditionalDistribution, ConditioningPoint, DyadPanel, Independence, KernelSpec, Regime,
    Smoother, StructuralModel, SubvectorSpec,
};
use serde::Serialize;

use crate::error::CliError;
use crate::options::grid;
use crate::output::{num, opt, Table};
use crate::{CdfArgs, CompareNwArgs, EstimateFeArgs, EstimateGArgs, RatesArgs};

const CURVE_HEADER: [&str; 4] = ["point", "estimate", "local_mass", "status"];
const CI_HEADER: [&str; 4] = ["lo", "hi", "sigma", "scale"];

fn check_level(ci: Option<f64>) -> Result<(), CliError> {
    match ci {
        Some(l) if !(l > 0.0 && l < 1.0) => Err(CliError::usage(format!("--ci must lie in (0, 1), got {l}"))),
        _ => Ok(()),
    }
}

fn curve_table(out: Option<&Path>, ci: bool) -> Result<Table, CliError> {
    let mut header = CURVE_HEADER.to_vec();
    if ci {
        header.extend(CI_HEADER);
    }
    Ok(Table::create(out, &header)?)
}

/// Writes one curve row; `interval` runs only for successful points.
fn curve_row(
    table: &mut Table,
    p: &CurvePoint,
    level: Option<f64>,
    interval: impl FnOnce(f64) -> dyadnp::Result<AsymptoticVariance>,
) -> Result<(), CliError> {
    let mut status = p.failure.unwrap_or("ok").to_string();
    let mut cells = vec![num(p.point), opt(p.estimate), opt(p.local_mass)];
    let mut ci_cells = Vec::new();
    if let Some(level) = level {
        ci_cells = vec![String::new(); 4];
        if let Some(est) = p.estimate {
            match interval(est) {
                Ok(av) => {
                    let (lo, hi) = confidence_interval(est, &av, level)?;
                    ci_cells = vec![num(lo), num(hi), num(av.sigma), num(av.scale)];
                }
                Err(e) => status = format!("ci-unavailable:{}", e.reason_code()),
            }
        }
    }
    cells.push(status);
    cells.extend(ci_cells);
    Ok(table.row(cells)?)
}

pub fn estimate_g(a: EstimateGArgs) -> Result<(), CliError> {
    check_level(a.ci)?;
    let panel = a.panel.load()?;
    let smoother = a.kernel.smoother(&panel)?;
    let model = a.structural.model(&panel, smoother)?;
    if a.xi.is_empty() || a.xj.is_empty() {
        return Err(CliError::usage("estimate g requires --xi and --xj"));
    }
    let (slice, points) = match (&a.x_grid, &a.e_grid) {
        (Some(_), Some(_)) => return Err(CliError::usage("use at most one of --x-grid and --e-grid")),
        (Some(g), None) => {
            let e = a.e.ok_or_else(|| CliError::usage("--x-grid requires --e"))?;
            let slice = CurveSlice::GInX {
                x_i: a.xi.clone(),
                coordinate: a.coordinate,
                x_j: a.xj.clone(),
                e,
            };
            (slice, grid("--x-grid", g)?)
        }
        (None, Some(g)) => {
            if a.e.is_some() {
                return Err(CliError::usage("--e conflicts with --e-grid"));
            }
            (
                CurveSlice::GInE {
                    x_i: a.xi.clone(),
                    x_j: a.xj.clone(),
                },
                grid("--e-grid", g)?,
            )
        }
        (None, None) => {
            let e =
                a.e.ok_or_else(|| CliError::usage("estimate g requires --e, --e-grid or --x-grid"))?;
            // single queries surface their error as the exit status
            model.estimate_g(&panel, &a.xi, &a.xj, e)?;
            (
                CurveSlice::GInE {
                    x_i: a.xi.clone(),
                    x_j: a.xj.clone(),
                },
                vec![e],
            )
        }
    };
    if let CurveSlice::GInX { coordinate, .. } = &slice {
        if *coordinate >= a.xi.len() {
            return Err(CliError::usage("--coordinate is out of range for --xi"));
        }
    }
    let curve = model.estimate_curves(&panel, &slice, &points);
    let mut table = curve_table(a.out.as_deref(), a.ci.is_some())?;
    for p in &curve.points {
        let (xi, e) = match &slice {
            CurveSlice::GInX { x_i, coordinate, e, .. } => {
                let mut xi = x_i.clone();
                xi[*coordinate] = p.point;
                (xi, *e)
            }
            _ => (a.xi.clone(), p.point),
        };
        curve_row(&mut table, p, a.ci, |_| {
            sigma_g(&panel, &model, &xi, &a.xj, e).map(|(_, av)| av)
        })?;
    }
    table.finish()?;
    report_failures(curve.failures(), points.len());
    Ok(())
}

pub fn estimate_fe(a: EstimateFeArgs) -> Result<(), CliError> {
    check_level(a.ci)?;
    let panel = a.panel.load()?;
    let smoother = a.kernel.smoother(&panel)?;
    let model = a.structural.model(&panel, smoother)?;
    let x0_pair: Option<X0Pair> = match (&a.x0_i, &a.x0_j) {
        (Some(i), Some(j)) => Some((i.clone(), j.clone())),
        (None, None) => None,
        _ => return Err(CliError::usage("--x0-i and --x0-j must be given together")),
    };
    let points = match (a.e, &a.e_grid) {
        (Some(_), Some(_)) => return Err(CliError::usage("--e conflicts with --e-grid")),
        (Some(e), None) => {
            model.estimate_error_cdf(&panel, e, x0_pair.as_ref())?;
            vec![e]
        }
        (None, Some(g)) => grid("--e-grid", g)?,
        (None, None) => return Err(CliError::usage("estimate fe requires --e or --e-grid")),
    };
    let slice = CurveSlice::Fe {
        x0_pair: x0_pair.clone(),
    };
    let curve = model.estimate_curves(&panel, &slice, &points);
    let mut table = curve_table(a.out.as_deref(), a.ci.is_some())?;
    for p in &curve.points {
        curve_row(&mut table, p, a.ci, |_| {
            sigma_error_cdf(&panel, &model, p.point, x0_pair.as_ref())
        })?;
    }
    table.finish()?;
    report_failures(curve.failures(), points.len());
    let violations = curve.monotonicity_violations();
    if violations > 0 {
        eprintln!("note: estimated F_e decreases at {violations} adjacent grid pairs");
    }
    Ok(())
}

fn report_failures(failures: usize, total: usize) {
    if failures > 0 {
        eprintln!("warning: {failures} of {total} points failed; see the status column");
    }
}

pub fn cdf(a: CdfArgs) -> Result<(), CliError> {
    let panel = a.panel.load()?;
    let smoother = a.kernel.smoother(&panel)?;
    let spec = match &a.subvector {
        Some(idx) => SubvectorSpec::new(idx.clone(), panel.dim())?,
        None => SubvectorSpec::full(panel.dim()),
    };
    let cond = ConditioningPoint::new(spec, a.w1.clone(), a.w2.clone())?;
    let dist = ConditionalDistribution::new(&panel, &cond, &smoother)?;
    println!("{}", num(dist.cdf(a.y)));
    match (&a.out, &a.y_grid) {
        (Some(out), Some(g)) => {
            let curve = dist.curve(&grid("--y-grid", g)?);
            let mut table = Table::create(Some(out), &["y", "value"])?;
            for (y, v) in curve.grid.iter().zip(&curve.values) {
                table.row([num(*y), num(*v)])?;
            }
            table.finish()?;
        }
        (None, None) => {}
        _ => return Err(CliError::usage("--out and --y-grid must be given together")),
    }
    Ok(())
}

/// Reads a flat JSON study configuration; also reports whether it set a seed.
fn read_config(path: Option<&Path>) -> Result<(StudyConfig, bool), CliError> {
    match path {
        None => Ok((StudyConfig::default(), false)),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let has_seed = value.get("seed").is_some();
            Ok((serde_json::from_value(value)?, has_seed))
        }
    }
}

fn resolve_seed(cfg: &mut StudyConfig, has_seed: bool, flag: Option<u64>) -> Result<(), CliError> {
    match (flag, has_seed) {
        (Some(s), _) => cfg.seed = s,
        (None, true) => {}
        (None, false) => {
            return Err(CliError::usage(
                "a seed is required: pass --seed or set \"seed\" in the config",
            ))
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    seed: u64,
    h_x: f64,
    h_y: f64,
    config: &'a StudyConfig,
}

fn write_rows(path: &Path, header: &[&str], rows: &[SummaryRow], nw: bool) -> Result<(), CliError> {
    let mut t = Table::create(Some(path), header)?;
    for r in rows {
        let mut cells = vec![num(r.point), num(r.truth), opt(r.mean)];
        if nw {
            cells.push(opt(r.nw_mean));
        }
        cells.extend([opt(r.bias), opt(r.rmse)]);
        if nw {
            cells.push(opt(r.nw_rmse));
        }
        t.row(cells)?;
    }
    Ok(t.finish()?)
}

pub fn simulate(config: Option<&Path>, out: &Path, seed: Option<u64>, threads: usize) -> Result<(), CliError> {
    let (mut cfg, has_seed) = read_config(config)?;
    resolve_seed(&mut cfg, has_seed, seed)?;
    cfg.validate()?;
    cfg.alpha = Some(cfg.alpha()?);
    let bw = cfg.bandwidths()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {threads} threads: {e}")))?;
    let result = pool.install(|| run_study(&cfg))?;
    let summary = summarize(&result);

    fs::create_dir_all(out)?;
    write_rows(
        &out.join("fig1.csv"),
        &["x", "true_g", "g_hat_mean", "nw_mean", "bias", "rmse", "nw_rmse"],
        &summary.g_in_x,
        true,
    )?;
    write_rows(
        &out.join("fig2.csv"),
        &["e", "true_g", "g_hat_mean", "bias", "rmse"],
        &summary.g_in_e,
        false,
    )?;
    write_rows(
        &out.join("fig3.csv"),
        &["e", "true_Fe", "Fe_hat_mean", "bias", "rmse"],
        &summary.fe,
        false,
    )?;
    let mut t = Table::create(
        Some(&out.join("summary.csv")),
        &["slice", "grid_avg_rmse", "sup_abs_bias", "missing"],
    )?;
    for (name, rmse, bias, missing) in &summary.aggregates {
        t.row([name.to_string(), num(*rmse), num(*bias), missing.to_string()])?;
    }
    t.finish()?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        h_x: bw.h_x,
        h_y: bw.h_y,
        config: &cfg,
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;

    let worst = result
        .replications
        .iter()
        .filter_map(|r| r.self_inversion_error)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let redraws: usize = result.replications.iter().map(|r| r.redraws).sum();
    eprintln!(
        "{} replications, N = {}, h_x = {}, h_y = {}; max |g(xbar, xbar, ebar) - alpha| = {worst:e}; {redraws} error redraws",
        cfg.replications, cfg.num_agents, bw.h_x, bw.h_y
    );
    Ok(())
}

pub fn compare_nw(a: CompareNwArgs) -> Result<(), CliError> {
    let (mut cfg, has_seed) = read_config(a.config.as_deref())?;
    let panel: DyadPanel = match (&a.agents, &a.dyads) {
        (Some(ag), Some(dy)) => dyadnp::data::load_panel(ag, dy)?,
        _ => {
            resolve_seed(&mut cfg, has_seed, a.seed)?;
            cfg.validate()?;
            cfg.dgp()
                .simulate(cfg.num_agents, &mut replication_rng(cfg.seed, 0))?
                .panel
        }
    };
    let bw = match cfg.bandwidth_rule {
        BandwidthRule::Rot => Bandwidths::rule_of_thumb(panel.num_agents(), panel.n()),
        BandwidthRule::Manual => cfg.bandwidths()?,
    };
    let smoother = Smoother::new(KernelSpec::new(cfg.kernel), bw);
    let model = StructuralModel::new(
        Regime::new(Independence::FullIndep, false),
        cfg.normalization()?,
        smoother,
    )?
    .with_tol(cfg.tol);
    let xs = cfg.x_grid()?;
    let slice = CurveSlice::GInX {
        x_i: vec![cfg.slice_x_i],
        coordinate: 0,
        x_j: vec![cfg.slice_x_j],
        e: cfg.slice_e,
    };
    let curve = model.estimate_curves(&panel, &slice, &xs);
    let dgp = cfg.dgp();
    let mut t = Table::create(a.out.as_deref(), &["x", "true_g", "g_hat", "nw_hat"])?;
    for (x, p) in xs.iter().zip(&curve.points) {
        let nw = nw_mean(&panel, &[*x], &[cfg.slice_x_j], &smoother)
            .ok()
            .map(|n| n.value);
        t.row([
            num(*x),
            num(dgp.true_g(*x, cfg.slice_x_j, cfg.slice_e)?),
            opt(p.estimate),
            opt(nw),
        ])?;
    }
    t.finish()?;
    report_failures(curve.failures(), xs.len());
    Ok(())
}

pub fn diagnose_rates(a: RatesArgs) -> Result<(), CliError> {
    let h = a.h.unwrap_or_else(|| rule_of_thumb(a.num_agents));
    let d = rate_diagnostics(a.num_agents, a.dim, a.d_w.unwrap_or(a.dim), a.order, h)?;
    let mut t = Table::create(None, &["quantity", "value"])?;
    for (name, v) in d.rows() {
        t.row([name.to_string(), num(v)])?;
    }
    t.finish()?;
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
