// Three-agent toy panel checked against direct double-sum oracles.
// Frozen values were produced by an independent script (scipy) and are
// reproduced here by the in-file oracle as well.

use std::f64::consts::PI;

use dyadnp::baseline::nw_mean;
use dyadnp::cond_dist::{conditional_cdf, conditional_pdf, invert_cdf, joint_density, ConditioningPoint, Smoother};
use dyadnp::data::{build_panel, AgentTable, DyadPanel, Partition};
use dyadnp::inference::{sigma_f, sigma_g};
use dyadnp::kernels::{Bandwidths, KernelSpec};
use dyadnp::structural::{Independence, Normalization, Regime, StructuralModel};

const XS: [f64; 3] = [0.0, 1.0, 2.0];
const RECORDS: [(usize, usize, f64); 6] = [
    (0, 1, 0.5),
    (1, 0, -0.5),
    (0, 2, 1.0),
    (2, 0, -1.0),
    (1, 2, 0.25),
    (2, 1, -0.25),
];

fn toy() -> DyadPanel {
    let ids = vec!["1".into(), "2".into(), "3".into()];
    let agents = AgentTable::with_ids(ids, XS.iter().map(|&x| vec![x]).collect()).unwrap();
    build_panel(agents, RECORDS).unwrap()
}

fn unit() -> Smoother {
    Smoother::new(KernelSpec::gaussian(), Bandwidths::manual(1.0, 1.0).unwrap())
}

mod oracle {
    use super::*;

    pub fn phi(u: f64) -> f64 {
        (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
    }

    fn erf(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for n in 1..300 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / PI.sqrt() * sum
    }

    pub fn big_phi(u: f64) -> f64 {
        0.5 * (1.0 + erf(u / 2f64.sqrt()))
    }

    fn weight(w1: f64, w2: f64, i: usize, j: usize) -> f64 {
        phi(w1 - XS[i]) * phi(w2 - XS[j])
    }

    pub fn mass(w1: f64, w2: f64) -> f64 {
        RECORDS.iter().map(|&(i, j, _)| weight(w1, w2, i, j)).sum()
    }

    pub fn cov_density(w1: f64, w2: f64) -> f64 {
        mass(w1, w2) / RECORDS.len() as f64
    }

    pub fn joint(y: f64, w1: f64, w2: f64) -> f64 {
        RECORDS
            .iter()
            .map(|&(i, j, v)| weight(w1, w2, i, j) * phi(y - v))
            .sum::<f64>()
            / RECORDS.len() as f64
    }

    pub fn cdf(y: f64, w1: f64, w2: f64) -> f64 {
        RECORDS
            .iter()
            .map(|&(i, j, v)| weight(w1, w2, i, j) * big_phi(y - v))
            .sum::<f64>()
            / mass(w1, w2)
    }

    pub fn pdf(y: f64, w1: f64, w2: f64) -> f64 {
        joint(y, w1, w2) / cov_density(w1, w2)
    }

    pub fn nw(w1: f64, w2: f64) -> f64 {
        RECORDS.iter().map(|&(i, j, v)| weight(w1, w2, i, j) * v).sum::<f64>() / mass(w1, w2)
    }

    pub fn quantile(s: f64, w1: f64, w2: f64) -> f64 {
        let (mut lo, mut hi) = (-20.0, 20.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid, w1, w2) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    // roughness of the Gaussian product kernel over 2 coordinates
    pub const R2: f64 = 1.0 / (4.0 * PI);

    pub fn sigma_f(y: f64, w1: f64, w2: f64) -> f64 {
        let f = cdf(y, w1, w2);
        f * (1.0 - f) / cov_density(w1, w2) * R2
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn oracle_reproduces_frozen_values() {
    assert!(close(oracle::joint(0.0, 1.0, 1.0), 0.02849300747615044, 1e-13));
    assert!(close(oracle::cdf(0.0, 1.0, 1.0), 0.5, 1e-13));
    assert!(close(oracle::pdf(0.0, 1.0, 1.0), 0.3397221143136346, 1e-13));
    assert!(close(oracle::sigma_f(0.0, 1.0, 1.0), 0.23720053865804577, 1e-13));
    assert!(close(oracle::quantile(0.25, 1.0, 1.0), -0.7906491503963013, 1e-12));
    assert!(close(oracle::joint(0.2, 0.3, 1.7), 0.026080485833903697, 1e-13));
    assert!(close(oracle::cdf(0.2, 0.3, 1.7), 0.40637065779012876, 1e-13));
    assert!(close(oracle::pdf(0.2, 0.3, 1.7), 0.34680269286639714, 1e-13));
    assert!(close(oracle::nw(0.3, 1.7), 0.4518976205497146, 1e-13));
    assert!(close(oracle::sigma_f(0.2, 0.3, 1.7), 0.2552669686160958, 1e-13));
}

#[test]
fn kernel_sums_match_oracle() {
    let panel = toy();
    let sm = unit();
    for &(y, w1, w2) in &[(0.0, 1.0, 1.0), (0.2, 0.3, 1.7), (-0.8, 2.0, 0.0), (1.3, -0.5, 0.4)] {
        let cond = ConditioningPoint::full(&[w1], &[w2]).unwrap();
        let joint = joint_density(&panel, y, &[w1], &[w2], &sm).unwrap();
        assert!(close(joint, oracle::joint(y, w1, w2), 1e-12), "joint at {y},{w1},{w2}");
        let cdf = conditional_cdf(&panel, &cond, y, &sm).unwrap();
        assert!(close(cdf, oracle::cdf(y, w1, w2), 1e-12), "cdf at {y},{w1},{w2}");
        let pdf = conditional_pdf(&panel, &cond, y, &sm).unwrap();
        assert!(close(pdf, oracle::pdf(y, w1, w2), 1e-12), "pdf at {y},{w1},{w2}");
        let nw = nw_mean(&panel, &[w1], &[w2], &sm).unwrap().value;
        assert!(close(nw, oracle::nw(w1, w2), 1e-12), "nw at {w1},{w2}");
        let sf = sigma_f(&panel, &cond, y, &sm).unwrap();
        assert!(
            close(sf.sigma, oracle::sigma_f(y, w1, w2), 1e-12),
            "sigma_f at {y},{w1},{w2}"
        );
        assert_eq!(sf.dimension, 1);
        assert_eq!(sf.scale, 6.0);
    }
}

#[test]
fn frozen_values_at_the_centre() {
    let panel = toy();
    let sm = unit();
    let cond = ConditioningPoint::full(&[1.0], &[1.0]).unwrap();
    assert!(close(
        joint_density(&panel, 0.0, &[1.0], &[1.0], &sm).unwrap(),
        0.02849300747615044,
        1e-12
    ));
    assert!(close(conditional_cdf(&panel, &cond, 0.0, &sm).unwrap(), 0.5, 1e-12));
    assert!(close(
        conditional_pdf(&panel, &cond, 0.0, &sm).unwrap(),
        0.3397221143136346,
        1e-12
    ));
    assert!(nw_mean(&panel, &[1.0], &[1.0], &sm).unwrap().value.abs() <= 1e-12);
    let q = invert_cdf(&panel, &cond, 0.25, &sm, 1e-13).unwrap();
    assert!(close(q, -0.7906491503963013, 1e-9));
}

#[test]
fn sigma_g_matches_composed_oracle() {
    let panel = toy();
    let norm = Normalization::fixed_point(Partition::all_x1(1), vec![0.0], vec![2.0]).unwrap();
    let model = StructuralModel::new(Regime::new(Independence::FullIndep, false), norm, unit())
        .unwrap()
        .with_tol(1e-14);
    let e = 0.3;
    let (est, av) = sigma_g(&panel, &model, &[1.0], &[1.0], e).unwrap();

    let s = oracle::cdf(e, 0.0, 2.0);
    let g = oracle::quantile(s, 1.0, 1.0);
    let pdf = oracle::pdf(g, 1.0, 1.0);
    let bracket = 1.0 / oracle::cov_density(1.0, 1.0) + 1.0 / oracle::cov_density(0.0, 2.0);
    let sigma = s * (1.0 - s) / (pdf * pdf) * bracket * oracle::R2;

    assert!(close(s, 0.3973777444670572, 1e-13));
    assert!(close(g, -0.30540471743690406, 1e-11));
    assert!(close(sigma, 4.878968213225923, 1e-10));

    assert!(close(est.level, s, 1e-12));
    assert!(close(est.value, g, 1e-12));
    assert!(close(av.sigma, sigma, 1e-12));
    assert_eq!(av.dimension, 1);
}

#[test]
fn inversion_round_trip() {
    let panel = toy();
    let sm = unit();
    for &(w1, w2) in &[(1.0, 1.0), (0.3, 1.7)] {
        let cond = ConditioningPoint::full(&[w1], &[w2]).unwrap();
        for k in 1..=19 {
            let s = 0.05 * k as f64;
            let y = invert_cdf(&panel, &cond, s, &sm, 1e-10).unwrap();
            let back = conditional_cdf(&panel, &cond, y, &sm).unwrap();
            assert!((back - s).abs() <= 1e-8, "s={s} back={back}");
        }
    }
}
