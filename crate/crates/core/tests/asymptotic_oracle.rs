//! The quadrature coverage is checked against direct simulation of the
//! large-sample model, where the estimates are exactly normal with known
//! variances and the selection rule is applied literally.

use pretest_coverage::asymptotic::{asymptotic_coverage, asymptotic_params, no_pretest_coverage};
use pretest_coverage::quadrature::QuadratureSpec;
use pretest_coverage::{CellProbs, NormalQuantiles, StudyDesign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal_model_mc(design: &StudyDesign, p: &CellProbs, q: &NormalQuantiles, reps: u64, seed: u64) -> f64 {
    let a = asymptotic_params(design, p);
    let (s1, s2) = (a.sigma_sq1.sqrt(), a.sigma_sq2.sqrt());
    let pooled_sd = (1.0 / (1.0 / a.sigma_sq1 + 1.0 / a.sigma_sq2)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..reps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (t1, t2) = (a.theta1 + s1 * z1, a.theta2 + s2 * z2);
        let t = (t1 - t2) / (a.sigma_sq1 + a.sigma_sq2).sqrt();
        let covered = if t.abs() > q.c_beta {
            (t1 - a.theta1).abs() <= q.c_tilde_alpha * s1 && (t2 - a.theta2).abs() <= q.c_tilde_alpha * s2
        } else {
            let pooled = (t1 / a.sigma_sq1 + t2 / a.sigma_sq2) / (1.0 / a.sigma_sq1 + 1.0 / a.sigma_sq2);
            (pooled - a.theta1).abs() <= q.c_alpha * pooled_sd && (pooled - a.theta2).abs() <= q.c_alpha * pooled_sd
        };
        hits += covered as u64;
    }
    hits as f64 / reps as f64
}

#[test]
fn quadrature_matches_normal_model_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let quad = QuadratureSpec::default();
    let reps = 400_000;
    for _ in 0..6 {
        let d = StudyDesign::new(
            rng.random_range(50..2000),
            rng.random_range(50..2000),
            rng.random_range(50..2000),
            rng.random_range(50..2000),
        )
        .unwrap();
        let mut pr = || rng.random_range(0.05..0.95);
        let p = CellProbs::new(pr(), pr(), pr(), pr()).unwrap();
        let q = NormalQuantiles::new(rng.random_range(0.01..0.2), rng.random_range(0.01..0.5)).unwrap();
        let exact = asymptotic_coverage(&d, &p, &q, &quad).unwrap();
        let sim = normal_model_mc(&d, &p, &q, reps, rng.random());
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        assert!(
            (exact - sim).abs() <= 4.0 * se,
            "{d:?} {p:?}: quadrature {exact}, simulation {sim}"
        );
    }
}

#[test]
fn minimum_point_matches_simulation() {
    let d = StudyDesign::REFERENCE;
    let p = CellProbs::new(0.692, 0.596, 0.02, 0.02).unwrap();
    let q = NormalQuantiles::new(0.05, 0.05).unwrap();
    let exact = asymptotic_coverage(&d, &p, &q, &QuadratureSpec::default()).unwrap();
    let sim = normal_model_mc(&d, &p, &q, 1_000_000, 5);
    assert!(
        (exact - sim).abs() < 4.0 * (exact * (1.0 - exact) / 1e6).sqrt(),
        "{exact} vs {sim}"
    );
}

#[test]
fn never_rejecting_pretest_with_equal_odds_ratios_is_nominal() {
    let q = NormalQuantiles::new_allow_never_reject(0.05, 0.0).unwrap();
    // odds ratio 3/7 in both strata
    let odds2p = 1.5 / (3.0 / 7.0);
    let p = CellProbs::new(0.3, 0.5, 0.6, odds2p / (1.0 + odds2p)).unwrap();
    assert!((p.theta1() - p.theta2()).abs() < 1e-14);
    let c = asymptotic_coverage(&StudyDesign::REFERENCE, &p, &q, &QuadratureSpec::default()).unwrap();
    assert!((c - 0.95).abs() < 1e-9, "{c}");
}

#[test]
fn always_rejecting_pretest_is_nominal_everywhere() {
    let q = NormalQuantiles::new(0.05, 1.0).unwrap();
    assert!((no_pretest_coverage(&q) - 0.95).abs() < 1e-12);
    for p in [[0.1, 0.9, 0.5, 0.5], [0.692, 0.596, 0.02, 0.02]] {
        let p = CellProbs::from_array(p).unwrap();
        let c = asymptotic_coverage(&StudyDesign::REFERENCE, &p, &q, &QuadratureSpec::default()).unwrap();
        assert!((c - 0.95).abs() < 1e-9, "{c}");
    }
}
