mod common;

use subdetect::gauss::*;

#[test]
fn nu_matches_quadrature_on_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..=32 {
        let tau = 0.25 * i as f64;
        let got = nu_tau(tau).unwrap().nu;
        worst = worst.max((got - common::nu_quadrature(tau)).abs());
    }
    assert!(worst <= 1e-8, "max abs error {worst:e}");
}

#[test]
fn nu_reference_values() {
    assert_eq!(nu_tau(0.0).unwrap().nu, 1.0);
    assert!((nu_tau(1.0).unwrap().nu - 2.525135276160981).abs() < 1e-12);
    assert!((nu_tau(1.0).unwrap().nu - common::nu_quadrature(1.0)).abs() < 1e-6);
    assert!(nu_tau(3.0).unwrap().nu > 9.0);
}

#[test]
fn nu_invariants() {
    let mut prev = 0.0;
    for i in 0..=160 {
        let tau = 0.05 * i as f64;
        let nu = nu_tau(tau).unwrap().nu;
        assert!(nu >= 1f64.max(tau * tau), "tau {tau}");
        assert!(nu > prev, "not increasing at {tau}");
        assert!(nu - tau * tau > 0.0);
        prev = nu;
    }
    assert!(nu_tau(20.0).unwrap().nu.is_finite());
    assert!(nu_tau(-1.0).is_err());
    assert!(nu_tau(f64::NAN).is_err());
}

#[test]
fn normal_functions() {
    assert_eq!(std_normal_cdf(0.0), 0.5);
    assert!((std_normal_tail(1.6448536) - 0.05).abs() < 1e-6);
    assert!((std_normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-5);
    for i in -80..=80 {
        let x = 0.1 * i as f64;
        assert!((std_normal_cdf(x) + std_normal_tail(x) - 1.0).abs() <= 1e-14);
        // Above zero, cdf(x) sits within a few ulps of 1, so invert the tail.
        let back = if x <= 0.0 {
            std_normal_quantile(std_normal_cdf(x)).unwrap()
        } else {
            std_normal_upper_quantile(std_normal_tail(x)).unwrap()
        };
        assert!((back - x).abs() < 1e-9, "x {x}");
        let p = common::integrate(&|t| std_normal_pdf(t), x, x + 40.0, 1e-13);
        let q = std_normal_tail(x);
        assert!((q - p).abs() <= 1e-12 * p, "x {x}: {q:e} vs {p:e}");
    }
    for p in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(std_normal_quantile(p).is_err());
    }
}
