use pretest_coverage::asymptotic::asymptotic_coverage;
use pretest_coverage::boundary_scan::{
    contour_grid, lambda_taylor, partial_min_coverage, scaling_study, scan_geometry, ScanSettings,
};
use pretest_coverage::quadrature::QuadratureSpec;
use pretest_coverage::{CellProbs, NormalQuantiles, StudyDesign};

fn settings() -> ScanSettings {
    ScanSettings::new(0.02, 0.05, 0.05, 80, QuadratureSpec::default()).unwrap()
}

#[test]
fn reference_geometry() {
    let g = scan_geometry(&StudyDesign::REFERENCE, 0.02).unwrap();
    assert_eq!(format!("{:.6}", g.delta_cap), "0.056062");
    assert_eq!(format!("{:.6}", g.r), "1.333316");
    assert_eq!(format!("{:.6}", g.delta_cap_prime), "0.074748");
}

#[test]
fn contour_is_below_nominal_and_mirror_symmetric() {
    let grid = contour_grid(&StudyDesign::REFERENCE, 6, &settings()).unwrap();
    let n = grid.p1_values.len();
    for i in 0..n {
        for j in 0..grid.p1p_values.len() {
            let v = grid.values[i][j];
            assert!(v < 0.95);
            let mirrored = grid.values[n - 1 - i][grid.p1p_values.len() - 1 - j];
            assert!((v - mirrored).abs() < 1e-6, "cell ({i},{j}): {v} vs {mirrored}");
        }
    }
}

#[test]
fn partial_minimum_does_not_exceed_unperturbed_coverage() {
    let q = NormalQuantiles::new(0.05, 0.05).unwrap();
    for (p1, p1p) in [(0.3, 0.4), (0.5, 0.5), (0.8, 0.2)] {
        let pm = partial_min_coverage(&StudyDesign::REFERENCE, p1, p1p, &settings()).unwrap();
        let at_zero = asymptotic_coverage(
            &StudyDesign::REFERENCE,
            &CellProbs::new(p1, p1p, p1, p1p).unwrap(),
            &q,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(pm.min_coverage <= at_zero + 1e-12);
    }
}

#[test]
fn scaling_converges_and_stays_harmful() {
    let scales = [1, 2, 4, 8, 16];
    let points = scaling_study(&StudyDesign::REFERENCE, &scales, 0.5, 0.5, &settings()).unwrap();
    let c: Vec<f64> = points.iter().map(|p| p.partial_min.unwrap().min_coverage).collect();
    let diffs: Vec<f64> = c.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{c:?}");
    assert!(diffs[3] < 0.005 && c[4] < 0.5, "{c:?}");
}

#[test]
fn taylor_bound_holds_on_a_grid() {
    let d = StudyDesign::REFERENCE;
    let g = scan_geometry(&d, 0.02).unwrap();
    for i in 0..=10 {
        for j in 0..=10 {
            let p1 = g.p1_range.lo + (g.p1_range.hi - g.p1_range.lo) * i as f64 / 10.0;
            let p1p = g.p1p_range.lo + (g.p1p_range.hi - g.p1p_range.lo) * j as f64 / 10.0;
            for k in 0..=40 {
                let delta = -g.delta_cap + 2.0 * g.delta_cap * k as f64 / 40.0;
                let lam = lambda_taylor(&d, p1, p1p, delta).unwrap();
                assert!(lam.abs() >= 2.0 * delta.abs() / g.delta_cap * (1.0 - 1e-12));
            }
        }
    }
}
