// Plug-in variance of F̂_e(−6) against its Monte Carlo spread at N = 100.

use dyadnp::montecarlo::{run_coverage, StudyConfig};

#[test]
fn plug_in_variance_within_factor_three_of_empirical() {
    let cfg = StudyConfig {
        num_agents: 100,
        replications: 200,
        seed: 20240611,
        ..StudyConfig::default()
    };
    let res = run_coverage(&cfg, -6.0, 0.95).unwrap();
    assert_eq!(res.failures, 0);
    let emp = res.empirical_variance();
    let plug = res.mean_plug_in_variance();
    let ratio = emp / plug;
    eprintln!("empirical {emp:.3e} plug-in {plug:.3e} ratio {ratio:.2}");
    assert!((1.0 / 3.0..=3.0).contains(&ratio), "ratio {ratio}");
}

// Same comparison with the agent covariates held fixed across replications:
// only the dyad errors are redrawn.
#[test]
fn plug_in_variance_matches_spread_given_covariates() {
    use dyadnp::data::{build_panel, AgentTable};
    use dyadnp::inference::sigma_error_cdf;
    use dyadnp::montecarlo::true_g;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    let cfg = StudyConfig {
        num_agents: 100,
        ..StudyConfig::default()
    };
    let model = cfg.model().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let x_law = Normal::new(6.0, 1.0).unwrap();
    let e_law = Normal::new(-6.0, 1.0).unwrap();
    let xs: Vec<f64> = (0..100).map(|_| x_law.sample(&mut rng)).collect();
    let (mut est, mut plug) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let agents = AgentTable::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap();
        let mut recs = Vec::with_capacity(9900);
        for i in 0..100 {
            for j in (0..100).filter(|&j| j != i) {
                recs.push((i, j, true_g(xs[i], xs[j], e_law.sample(&mut rng)).unwrap()));
            }
        }
        let panel = build_panel(agents, recs).unwrap();
        est.push(model.estimate_error_cdf(&panel, -6.0, None).unwrap());
        let av = sigma_error_cdf(&panel, &model, -6.0, None).unwrap();
        plug.push(av.sigma / av.scale);
    }
    let m = est.iter().sum::<f64>() / 200.0;
    let emp = est.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 199.0;
    let ratio = emp / (plug.iter().sum::<f64>() / 200.0);
    assert!((1.0 / 3.0..=3.0).contains(&ratio), "ratio {ratio}");
}
