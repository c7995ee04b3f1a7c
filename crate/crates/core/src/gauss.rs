//! Standard normal numerics and the truncated second moment `nu_tau`.

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this point tails are evaluated through the Mills ratio.
const MILLS_SWITCH: f64 = 6.0;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(Z > x)`.
pub fn std_normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `log P(Z > x)`, finite for every finite `x`.
pub fn std_normal_log_tail(x: f64) -> f64 {
    if x > MILLS_SWITCH {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
    } else {
        std_normal_tail(x).ln()
    }
}

/// Mills ratio `P(Z > x) / pdf(x)`.
pub fn mills_ratio(x: f64) -> f64 {
    if x > MILLS_SWITCH {
        // x + 1/(x + 2/(x + 3/(x + ...))), evaluated bottom-up.
        let mut acc = x;
        for k in (1..=200).rev() {
            acc = x + k as f64 / acc;
        }
        1.0 / acc
    } else {
        std_normal_tail(x) / std_normal_pdf(x)
    }
}

/// Inverse of [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile needs p in (0,1), got {p}"
        )));
    }
    Ok(if p < 0.5 {
        -upper_quantile_refined(p)
    } else {
        upper_quantile_refined(1.0 - p)
    })
}

/// Inverse of [`std_normal_tail`]: the `x` with `P(Z > x) = q`.
pub fn std_normal_upper_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "upper quantile needs q in (0,1), got {q}"
        )));
    }
    Ok(if q <= 0.5 {
        upper_quantile_refined(q)
    } else {
        -upper_quantile_refined(1.0 - q)
    })
}

/// `q <= 0.5`; one Newton step on the tail polishes the series inverse.
fn upper_quantile_refined(q: f64) -> f64 {
    let x = std::f64::consts::SQRT_2 * erfc_inv(2.0 * q);
    let step = (std_normal_tail(x) - q) / std_normal_pdf(x);
    if step.is_finite() {
        x + step
    } else {
        x
    }
}

/// Threshold `tau` with its centering constant `nu = E[Z^2 | |Z| > tau]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConstant {
    pub tau: f64,
    pub nu: f64,
}

/// `E[Z^2 | |Z| > tau] = 1 + tau / M(tau)` with `M` the Mills ratio.
pub fn nu_tau(tau: f64) -> Result<TruncationConstant> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tau must be finite and nonnegative, got {tau}"
        )));
    }
    let nu = if tau == 0.0 {
        1.0
    } else {
        1.0 + tau / mills_ratio(tau)
    };
    Ok(TruncationConstant { tau, nu })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_basics() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_tail(1.6448536) - 0.05).abs() < 1e-6);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-5);
        assert!((std_normal_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        for x in [-10.0, -3.0, -0.5, 0.0, 0.7, 2.0, 9.0] {
            assert!((std_normal_cdf(x) + std_normal_tail(x) - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        // Above ~5.5 the cdf rounds to within one ulp of 1; the upper
        // quantile covers that side.
        let mut x = -8.0;
        while x <= 5.0 {
            let back = std_normal_quantile(std_normal_cdf(x)).unwrap();
            assert!((back - x).abs() < 1e-9, "x={x} back={back}");
            x += 0.125;
        }
        let mut x = 0.0;
        while x <= 8.0 {
            let back = std_normal_upper_quantile(std_normal_tail(x)).unwrap();
            assert!((back - x).abs() < 1e-9, "x={x} back={back}");
            x += 0.125;
        }
    }

    #[test]
    fn quantile_domain() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
        assert!(std_normal_upper_quantile(1.5).is_err());
    }

    #[test]
    fn mills_ratio_branches_agree() {
        for x in [5.5, 6.0, 6.5] {
            let direct = std_normal_tail(x) / std_normal_pdf(x);
            let mut acc = x;
            for k in (1..=200).rev() {
                acc = x + k as f64 / acc;
            }
            assert!((direct * acc - 1.0).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn log_tail_is_finite_far_out() {
        let lt = std_normal_log_tail(40.0);
        assert!(lt.is_finite());
        // log Q(x) ~ -x^2/2 - log(x sqrt(2 pi)) for large x
        assert!((lt - (-800.0 - (40.0f64).ln() - LN_SQRT_2PI)).abs() < 1e-3);
        assert!((std_normal_log_tail(1.0) - std_normal_tail(1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn nu_tau_reference_values() {
        // Reference values from 30-digit quadrature.
        assert_eq!(nu_tau(0.0).unwrap().nu, 1.0);
        assert!((nu_tau(1.0).unwrap().nu - 2.525_135_276_160_981).abs() < 1e-12);
        assert!((nu_tau(3.0).unwrap().nu - 10.849_295_964_791_31).abs() < 1e-11);
        assert!((nu_tau(8.0).unwrap().nu - 65.970_944_897_888_90).abs() < 1e-10);
        assert!(nu_tau(3.0).unwrap().nu > 9.0);
    }

    #[test]
    fn nu_tau_invariants() {
        let mut prev = nu_tau(0.0).unwrap().nu;
        for i in 1..=400 {
            let tau = i as f64 * 0.1;
            let nu = nu_tau(tau).unwrap().nu;
            assert!(nu >= 1.0f64.max(tau * tau));
            assert!(nu > prev, "not increasing at tau={tau}");
            prev = nu;
        }
        assert!(nu_tau(-1.0).is_err());
        assert!(nu_tau(f64::INFINITY).is_err());
    }
}
