use subdetect::adaptive::*;
use subdetect::detectors::DEFAULT_ENUMERATION_CAP;
use subdetect::harness::{calibrate_adaptive, fresh_type_one, Procedure};
use subdetect::rates::log_binom;
use subdetect::{Matrix, ProblemShape, SeedSpec};

#[test]
fn dyadic_grids() {
    assert_eq!(dyadic_points(64), vec![64, 32, 16, 8, 4, 2, 1]);
    assert_eq!(dyadic_points(100), vec![100, 50, 25, 13, 7, 4, 2, 1]);
    let g = build_grid(64, 16, GridFlavor::Omega, 0.0).unwrap();
    assert_eq!(g.points.len(), 7 * 5);
    assert!(build_grid(0, 4, GridFlavor::Omega, 0.0).is_err());
}

#[test]
fn every_sparsity_is_covered() {
    for d in 1..=200 {
        for s in 1..=d {
            let (lo, hi) = covering_pair(d, s).unwrap();
            assert!(lo <= s && s <= hi && hi <= 2 * lo, "d={d} s={s}: {lo} {hi}");
        }
    }
}

#[test]
fn bar_grid_condition() {
    let g = build_grid(64, 64, GridFlavor::OmegaBar, 2.0).unwrap();
    assert!(!g.points.is_empty());
    for &(a, b) in &g.points {
        assert!(64.0 / (b * b) as f64 * log_binom(64, a as u64).unwrap() >= 2.0);
    }
}

#[test]
fn thresholds() {
    // C(8,2) = 28, log2 8 = 3
    let want = 2.0 * (2.0 * (28.0f64.ln() + 1.0 + 3f64.ln())).sqrt();
    assert!((adaptive_cutoff_max_lin(2, 8, 2.0).unwrap() - want).abs() < 1e-12);
    let tau = adaptive_tau_max_trunc(2, 2, 8, 8, 2.0).unwrap();
    let want = (2.0 * (1.0 + 2.0 * (28.0f64 * 9.0).ln()).ln()).sqrt();
    assert!((tau - want).abs() < 1e-12);
    assert!(adaptive_tau_max_trunc(1, 1, 1, 8, 2.0).is_err());
    let u = adaptive_cutoff_max_trunc(2, 2, 8, 8, tau, 0.1).unwrap();
    let l = 20f64.ln() + (28.0f64 * 9.0).ln();
    assert!((u - 9.0 * ((8.0 * (-tau * tau / 2.0).exp() * l).sqrt() + l)).abs() < 1e-9);
}

#[test]
fn zero_matrix_is_not_rejected() {
    let t = AdaptiveTest::new(16, 16, &AdaptiveConstants::default()).unwrap();
    assert_eq!(t.specs.len(), t.grid.points.len());
    let out = delta_star_ada(&Matrix::zeros(16, 16), &t, DEFAULT_ENUMERATION_CAP).unwrap();
    assert!(!out.reject);
    assert_eq!(out.point, (1, 1));
}

#[test]
fn strong_block_is_found() {
    let t = AdaptiveTest::new(16, 16, &AdaptiveConstants::default()).unwrap();
    let mut y = Matrix::zeros(16, 16);
    for i in 0..4 {
        for j in 0..4 {
            y.set(i, j, 50.0);
        }
    }
    assert!(delta_star_ada(&y, &t, DEFAULT_ENUMERATION_CAP).unwrap().reject);
}

#[test]
fn calibrated_adaptive_holds_level() {
    let t = AdaptiveTest::new(16, 16, &AdaptiveConstants::default()).unwrap();
    let seed = SeedSpec::new(3, 0);
    let (cal, factor) = calibrate_adaptive(&t, 0.1, 300, seed, DEFAULT_ENUMERATION_CAP).unwrap();
    assert!(factor.is_finite() && factor > 0.0);
    for (a, b) in t.specs.iter().zip(&cal.specs) {
        assert!((b.cutoff - a.cutoff * factor).abs() <= 1e-12 * b.cutoff.abs().max(1.0));
    }
    let sh = ProblemShape::new(16, 16, 1, 1).unwrap();
    let check = fresh_type_one(&Procedure::Adaptive(cal), &sh, 1000, seed, DEFAULT_ENUMERATION_CAP).unwrap();
    assert!(check.type_one <= 0.1 + 3.0 * check.se, "{check:?}");
}

#[test]
fn diagnostic() {
    let d = adaptivity_diagnostic(&ProblemShape::new(64, 64, 3, 3).unwrap(), 1.0);
    assert!(d.all_hold());
    let d = adaptivity_diagnostic(&ProblemShape::new(4, 64, 1, 3).unwrap(), 1.0);
    assert!(!d.dims_at_least_8 && !d.sparsity_at_least_3);
}
