use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dyadnp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadnp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn toy_files(dir: &Path) {
    fs::write(dir.join("agents.csv"), "agent_id,x_1\n1,0\n2,1\n3,2\n").unwrap();
    fs::write(
        dir.join("dyads.csv"),
        "i,j,y\n1,2,0.5\n2,1,-0.5\n1,3,1.0\n3,1,-1.0\n2,3,0.25\n3,2,-0.25\n",
    )
    .unwrap();
}

const TOY: [&str; 4] = ["--agents", "agents.csv", "--dyads", "dyads.csv"];
const UNIT_BW: [&str; 6] = ["--bandwidth-rule", "manual", "--h-x", "1", "--h-y", "1"];

fn with<'a>(parts: &[&[&'a str]]) -> Vec<&'a str> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

#[test]
fn simulate_writes_figures_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("study.json"),
        r#"{"num_agents": 25, "replications": 2, "grid_points": 7, "seed": 5, "xbar1": 6.5, "alpha": null}"#,
    )
    .unwrap();
    let o = dyadnp(&["simulate", "--config", "study.json", "--out", "run1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("run1");
    let headers = [
        ("fig1.csv", "x,true_g,g_hat_mean,nw_mean,bias,rmse,nw_rmse"),
        ("fig2.csv", "e,true_g,g_hat_mean,bias,rmse"),
        ("fig3.csv", "e,true_Fe,Fe_hat_mean,bias,rmse"),
        ("summary.csv", "slice,grid_avg_rmse,sup_abs_bias,missing"),
    ];
    for (file, header) in headers {
        let text = fs::read_to_string(run.join(file)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header));
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), header.split(',').count());
            for c in cells.iter().skip(usize::from(file == "summary.csv")) {
                // full-precision cells parse back to the same text
                let v: f64 = c.parse().unwrap();
                assert_eq!(format!("{v}"), *c);
            }
        }
    }
    let fig3 = fs::read_to_string(run.join("fig3.csv")).unwrap();
    assert_eq!(fig3.lines().count(), 8);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let h_x = manifest["h_x"].as_f64().unwrap();
    assert_eq!(h_x, 1.06 * 25f64.powf(-0.2));
    assert_eq!(manifest["h_y"].as_f64().unwrap(), 1.06 * 600f64.powf(-0.2));
    assert_eq!(manifest["seed"].as_u64(), Some(5));
    assert_eq!(manifest["config"]["xbar1"].as_f64(), Some(6.5));
    // alpha resolved from the design at the overridden reference point
    let alpha = manifest["config"]["alpha"].as_f64().unwrap();
    assert!((alpha - 0.3 * 6.5f64.powi(4) / 216.0).abs() < 1e-12);
    assert!(manifest["version"].is_string());
}

#[test]
fn simulate_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("study.json"),
        r#"{"num_agents": 10, "replications": 1}"#,
    )
    .unwrap();
    let o = dyadnp(&["simulate", "--config", "study.json", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
    assert!(!dir.path().join("r").exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("study.json"), r#"{"seed": 1, "num_agent": 10}"#).unwrap();
    let o = dyadnp(&["simulate", "--config", "study.json", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("num_agent"));
}

#[test]
fn homogeneous_without_ebar_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    let args = with(&[
        &["estimate", "g"],
        &TOY,
        &[
            "--normalization",
            "homog",
            "--xbar1",
            "1",
            "--alpha",
            "1",
            "--xi",
            "1",
            "--xj",
            "1",
            "--e",
            "0.5",
        ],
    ]);
    let o = dyadnp(&args, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--ebar"), "{}", stderr(&o));
}

#[test]
fn self_loop_reports_line_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    fs::write(dir.path().join("dyads.csv"), "i,j,y\n1,2,0.5\n3,3,1.0\n").unwrap();
    let o = dyadnp(
        &with(&[&["estimate", "fe"], &TOY, &["--xbar1", "1", "--e", "0"]]),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(
        err.contains("line 3") && err.contains("self-loop") && err.contains("agent 3"),
        "{err}"
    );
}

#[test]
fn numeric_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    let args = with(&[
        &["estimate", "fe"],
        &TOY,
        &["--xbar1", "10", "--e", "0", "--kernel", "epanechnikov"],
        &["--bandwidth-rule", "manual", "--h-x", "0.5", "--h-y", "0.5"],
    ]);
    let o = dyadnp(&args, dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sign_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    let args = with(&[
        &["estimate", "fe"],
        &TOY,
        &[
            "--normalization",
            "homog",
            "--xbar1",
            "1",
            "--ebar",
            "-1",
            "--alpha",
            "1",
            "--e",
            "0.5",
        ],
    ]);
    assert_eq!(dyadnp(&args, dir.path()).status.code(), Some(2));
}

#[test]
fn cdf_on_toy_panel() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    let args = with(&[
        &["cdf"],
        &TOY,
        &UNIT_BW,
        &[
            "--y",
            "0",
            "--w1",
            "1",
            "--w2",
            "1",
            "--out",
            "curve.csv",
            "--y-grid",
            "-2,2,5",
        ],
    ]);
    let o = dyadnp(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.5).abs() < 1e-12);
    let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let rows: Vec<(f64, f64)> = curve
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(curve.lines().next(), Some("y,value"));
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));
    assert!((rows[2].1 - 0.5).abs() < 1e-12);
}

#[test]
fn estimate_g_with_interval_columns() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    let before = (
        fs::read(dir.path().join("agents.csv")).unwrap(),
        fs::read(dir.path().join("dyads.csv")).unwrap(),
    );
    let args = with(&[
        &["estimate", "g"],
        &TOY,
        &UNIT_BW,
        &[
            "--xbar1",
            "0",
            "--xbar1-j",
            "2",
            "--xi",
            "1",
            "--xj",
            "1",
            "--e",
            "0.3",
            "--ci",
            "0.95",
        ],
        &["--tol", "1e-13", "--out", "g.csv"],
    ]);
    let o = dyadnp(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("point,estimate,local_mass,status,lo,hi,sigma,scale"));
    let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(cells[0], "0.3");
    assert_eq!(cells[3], "ok");
    let g: f64 = cells[1].parse().unwrap();
    let (lo, hi): (f64, f64) = (cells[4].parse().unwrap(), cells[5].parse().unwrap());
    let sigma: f64 = cells[6].parse().unwrap();
    assert!((g + 0.30540471743690406).abs() < 1e-9);
    assert!((sigma - 4.878968213225923).abs() < 1e-6);
    assert_eq!(cells[7], "6");
    assert!(lo < g && g < hi);
    assert!(((hi - lo) / 2.0 - 1.959963984540054 * (sigma / 6.0).sqrt()).abs() < 1e-12);
    let after = (
        fs::read(dir.path().join("agents.csv")).unwrap(),
        fs::read(dir.path().join("dyads.csv")).unwrap(),
    );
    assert_eq!(before, after);
}

#[test]
fn estimate_fe_grid_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    let args = with(&[
        &["estimate", "fe"],
        &TOY,
        &UNIT_BW,
        &["--xbar1", "1", "--e-grid", "-1,1,3"],
    ]);
    let o = dyadnp(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "point,estimate,local_mass,status");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0,0.5"));
}

#[test]
fn grid_failures_are_recorded_per_point() {
    let dir = tempfile::tempdir().unwrap();
    toy_files(dir.path());
    let args = with(&[
        &["estimate", "fe"],
        &TOY,
        &[
            "--normalization",
            "homog",
            "--xbar1",
            "1",
            "--ebar",
            "1",
            "--alpha",
            "0.5",
        ],
        &["--e-grid", "-1,1,3"],
    ]);
    let o = dyadnp(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows[0], "-1,,,SignMismatch");
    assert_eq!(rows[1], "0,,,SignMismatch");
    assert!(rows[2].ends_with(",ok"));
}

#[test]
fn compare_nw_columns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"num_agents": 20, "grid_points": 4}"#).unwrap();
    let o = dyadnp(&["compare-nw", "--config", "c.json", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "x,true_g,g_hat,nw_hat");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("4,0.5555555555555556,"));
}

#[test]
fn diagnose_rates_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = dyadnp(&["diagnose-rates", "--num-agents", "10", "--h", "1"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("quantity,value"));
    let first: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 90f64.ln() / 90.0).abs() < 1e-15);

    let o = dyadnp(&["diagnose-rates", "--num-agents", "2", "--h", "0.01"], dir.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
}
