use subdetect::detectors::*;
use subdetect::harness::*;
use subdetect::{ProblemShape, SeedSpec};

const CAP: u64 = DEFAULT_ENUMERATION_CAP;

fn shape(d1: usize, d2: usize, s1: usize, s2: usize) -> ProblemShape {
    ProblemShape::new(d1, d2, s1, s2).unwrap()
}

fn linear(sh: &ProblemShape) -> Procedure {
    Procedure::Fixed(DetectorSpec::theoretical(DetectorKind::Linear, sh, &Default::default()).unwrap())
}

#[test]
fn linear_calibrates_to_the_normal_quantile() {
    let sh = shape(8, 8, 2, 2);
    let spec = DetectorSpec::theoretical(DetectorKind::Linear, &sh, &Default::default()).unwrap();
    let cal = calibrate_cutoff(&spec, 0.05, 20_000, SeedSpec::new(1, 0), CAP).unwrap();
    assert!((cal.cutoff - 1.6448536269514722).abs() < 0.03, "{}", cal.cutoff);
    assert!(matches!(cal.cutoff_mode, CutoffMode::Calibrated { .. }));
    assert!(calibrate_cutoff(&spec, 0.05, 199, SeedSpec::new(1, 0), CAP).is_err());
    assert!(calibrate_cutoff(&spec, 1.5, 1000, SeedSpec::new(1, 0), CAP).is_err());
}

#[test]
fn huge_threshold_calibrates_to_zero() {
    let sh = shape(8, 8, 2, 2);
    let mut spec = DetectorSpec::theoretical(DetectorKind::TruncChi2Axis1, &sh, &Default::default()).unwrap();
    spec.tau = Some(subdetect::gauss::nu_tau(40.0).unwrap());
    let cal = calibrate_cutoff(&spec, 0.1, 200, SeedSpec::new(2, 0), CAP).unwrap();
    assert_eq!(cal.cutoff, 0.0);
    let t = fresh_type_one(&Procedure::Fixed(cal), &sh, 200, SeedSpec::new(2, 0), CAP).unwrap();
    assert_eq!(t.type_one, 0.0);
}

#[test]
fn no_signal_means_complementary_errors() {
    let sh = shape(10, 10, 3, 3);
    let spec = calibrated_delta_star(&sh, 0.1, 500, SeedSpec::new(3, 0), CAP).unwrap();
    let r = estimate_risk(&Procedure::Fixed(spec), &sh, 0.0, 2000, SeedSpec::new(3, 1), SupportPolicy::Canonical, CAP).unwrap();
    assert!((r.risk - 1.0).abs() < 4.0 * (r.type_one_se + r.type_two_se), "{r:?}");
}

#[test]
fn strong_signal_leaves_only_type_one() {
    let sh = shape(16, 16, 16, 16);
    let r = estimate_risk(&linear(&sh), &sh, 1.0, 500, SeedSpec::new(4, 0), SupportPolicy::Uniform, CAP).unwrap();
    assert_eq!(r.type_two, 0.0);
    assert!((r.risk - r.type_one).abs() < 1e-12);
}

#[test]
fn replicate_floor() {
    let sh = shape(4, 4, 1, 1);
    assert!(estimate_risk(&linear(&sh), &sh, 0.0, 99, SeedSpec::new(1, 0), SupportPolicy::Canonical, CAP).is_err());
    assert_eq!(binomial_se(0.5, 100), 0.05);
    assert!((binomial_se(0.3, 200).powi(2) * 2.0 - binomial_se(0.3, 100).powi(2)).abs() < 1e-15);
}

#[test]
fn thread_count_does_not_change_results() {
    let sh = shape(24, 24, 3, 2);
    let spec = calibrated_delta_star(&sh, 0.1, 200, SeedSpec::new(5, 0), CAP).unwrap();
    let proc = Procedure::Fixed(spec);
    let run = |t| {
        with_threads(Some(t), || mu_sweep(&proc, &sh, &[0.0, 2.0, 8.0], 150, SeedSpec::new(5, 1), SupportPolicy::Uniform, CAP, 0.2))
            .unwrap()
            .unwrap()
    };
    let a = run(1);
    assert_eq!(a, run(2));
    assert_eq!(a, run(5));
}

#[test]
fn sweep_behaves() {
    let sh = shape(32, 32, 4, 4);
    let spec = calibrated_delta_star(&sh, 0.1, 500, SeedSpec::new(6, 0), CAP).unwrap();
    let multiples = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];
    let s = mu_sweep(&Procedure::Fixed(spec), &sh, &multiples, 400, SeedSpec::new(6, 1), SupportPolicy::Canonical, CAP, 0.2).unwrap();
    assert_eq!(s.points.len(), 6);
    assert!((s.points[0].risk - 1.0).abs() < 0.1);
    for w in s.points.windows(2) {
        let noise = 3.0 * (w[0].type_one_se + w[0].type_two_se + w[1].type_one_se + w[1].type_two_se);
        assert!(w[1].risk <= w[0].risk + noise, "{} then {}", w[0].risk, w[1].risk);
    }
    assert!(s.points[5].risk <= 0.2);
    assert!(s.crossing.first_risk_below_eta.is_some());
    let mut buf = Vec::new();
    s.write_csv(&mut buf, &ArtifactMeta::new(b"x", 6)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER.join(","));
    assert!(mu_sweep(&linear(&sh), &sh, &[2.0, 1.0], 100, SeedSpec::new(6, 1), SupportPolicy::Canonical, CAP, 0.2).is_err());
}

#[test]
fn phase_grid_skips_capped_cells() {
    let cells = phase_grid(40, 40, &[(1, 1), (4, 4), (20, 1)], 4.0, 0.1, 100, 100, SeedSpec::new(7, 0), 1000).unwrap();
    assert_eq!(cells.len(), 3);
    assert!(cells.iter().any(|c| c.skipped.is_some()));
    assert!(cells.iter().any(|c| c.estimate.is_some()));
    let mut buf = Vec::new();
    write_phase_csv(&cells, &mut buf, &ArtifactMeta::new(b"x", 7)).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
}
