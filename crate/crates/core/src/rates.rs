//! Separation-rate functions and regime classification.
//!
//! Every rate is on the squared-signal scale (a value of `mu^2`).

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemShape;

/// `log n!` for small `n`, exact up to rounding.
const LN_FACT_TABLE_LEN: usize = 32;

fn ln_factorial_small(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Stirling remainder `log n! - [(n + 1/2) log n - n + log sqrt(2 pi)]`.
fn stirling_remainder(n: u64) -> f64 {
    if (n as usize) < LN_FACT_TABLE_LEN {
        if n == 0 {
            return 0.0;
        }
        let x = n as f64;
        return ln_factorial_small(n) - ((x + 0.5) * x.ln() - x + 0.918_938_533_204_672_8);
    }
    let x = n as f64;
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

/// `log C(n, k)`.
///
/// Written as `k log(n/k) + (n-k) log(n/(n-k)) + 1/2 log(n/(2 pi k (n-k)))`
/// plus Stirling remainders, so no large terms cancel.
pub fn log_binom(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "log_binom needs k <= n, got n={n}, k={k}"
        )));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if (n as usize) < LN_FACT_TABLE_LEN {
        return Ok(ln_factorial_small(n) - ln_factorial_small(k) - ln_factorial_small(n - k));
    }
    let (nf, kf, mf) = (n as f64, k as f64, (n - k) as f64);
    let main = kf * (nf / kf).ln() - mf * (-kf / nf).ln_1p();
    let half = 0.5 * (nf / (kf * mf)).ln() - 0.918_938_533_204_672_8;
    Ok(main + half + stirling_remainder(n) - stirling_remainder(k) - stirling_remainder(n - k))
}

/// `log(e * C(n, k)) = 1 + log C(n, k)`.
pub fn log_e_binom(n: u64, k: u64) -> Result<f64> {
    Ok(1.0 + log_binom(n, k)?)
}

fn check_args(s1: u64, s2: u64, d1: u64, d2: u64) -> Result<()> {
    if s1 == 0 || s2 == 0 || s1 > d1 || s2 > d2 {
        return Err(Error::InvalidShape(format!(
            "need 1 <= s1 <= d1 and 1 <= s2 <= d2, got s1={s1}, s2={s2}, d1={d1}, d2={d2}"
        )));
    }
    Ok(())
}

/// `psi = (1/s1) log(1 + (d2/s2^2) log(e C(d1,s1)))`.
pub fn psi(s1: u64, s2: u64, d1: u64, d2: u64) -> Result<f64> {
    check_args(s1, s2, d1, d2)?;
    let ratio = d2 as f64 / (s2 as f64 * s2 as f64);
    Ok((ratio * log_e_binom(d1, s1)?).ln_1p() / s1 as f64)
}

/// `phi = (d1/s1^2) log(1 + d2/s2^2)`.
pub fn phi(s1: u64, s2: u64, d1: u64, d2: u64) -> Result<f64> {
    check_args(s1, s2, d1, d2)?;
    let ratio = d2 as f64 / (s2 as f64 * s2 as f64);
    Ok(d1 as f64 / (s1 as f64 * s1 as f64) * ratio.ln_1p())
}

/// `beta = (1/(s1 s2)) log C(d2,s2) * 1{(d1/s1^2) log(e C(d2,s2)) > 1}`,
/// strict inequality.
pub fn beta(s1: u64, s2: u64, d1: u64, d2: u64) -> Result<f64> {
    check_args(s1, s2, d1, d2)?;
    let lb = log_binom(d2, s2)?;
    let gate = d1 as f64 / (s1 as f64 * s1 as f64) * (1.0 + lb);
    Ok(if gate > 1.0 {
        lb / (s1 as f64 * s2 as f64)
    } else {
        0.0
    })
}

/// Which term attains `R~`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `phi12`
    PhiA,
    /// `phi21`
    PhiB,
    /// `psi12 + beta21`
    PsiBetaC,
    /// `psi21 + beta12`
    PsiBetaD,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::PhiA, Regime::PhiB, Regime::PsiBetaC, Regime::PsiBetaD];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::PhiA => "PhiA",
            Regime::PhiB => "PhiB",
            Regime::PsiBetaC => "PsiBetaC",
            Regime::PsiBetaD => "PsiBetaD",
        }
    }

    /// The same regime after swapping the matrix axes.
    pub fn transpose(&self) -> Regime {
        match self {
            Regime::PhiA => Regime::PhiB,
            Regime::PhiB => Regime::PhiA,
            Regime::PsiBetaC => Regime::PsiBetaD,
            Regime::PsiBetaD => Regime::PsiBetaC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub shape: ProblemShape,
    pub psi12: f64,
    pub psi21: f64,
    pub phi12: f64,
    pub phi21: f64,
    pub beta12: f64,
    pub beta21: f64,
    /// `(psi12 + psi21) ^ phi12 ^ phi21`
    pub rate: f64,
    /// `(psi12 + beta21) ^ (psi21 + beta12) ^ phi12 ^ phi21`
    pub rate_tilde: f64,
    pub regime: Regime,
}

impl RateBreakdown {
    /// The four candidate terms of `R~` in tie-break priority order.
    pub fn tilde_terms(&self) -> [(Regime, f64); 4] {
        [
            (Regime::PhiA, self.phi12),
            (Regime::PhiB, self.phi21),
            (Regime::PsiBetaC, self.psi12 + self.beta21),
            (Regime::PsiBetaD, self.psi21 + self.beta12),
        ]
    }

    pub fn rate_from_terms(&self) -> f64 {
        (self.psi12 + self.psi21).min(self.phi12).min(self.phi21)
    }

    pub fn rate_tilde_from_terms(&self) -> f64 {
        self.tilde_terms()
            .iter()
            .map(|t| t.1)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn rate_breakdown(shape: &ProblemShape) -> Result<RateBreakdown> {
    shape.validate()?;
    let (d1, d2, s1, s2) = (shape.d1 as u64, shape.d2 as u64, shape.s1 as u64, shape.s2 as u64);
    let mut rb = RateBreakdown {
        shape: *shape,
        psi12: psi(s1, s2, d1, d2)?,
        psi21: psi(s2, s1, d2, d1)?,
        phi12: phi(s1, s2, d1, d2)?,
        phi21: phi(s2, s1, d2, d1)?,
        beta12: beta(s1, s2, d1, d2)?,
        beta21: beta(s2, s1, d2, d1)?,
        rate: 0.0,
        rate_tilde: 0.0,
        regime: Regime::PhiA,
    };
    rb.rate = rb.rate_from_terms();
    rb.rate_tilde = rb.rate_tilde_from_terms();
    rb.regime = rb
        .tilde_terms()
        .iter()
        .find(|t| t.1 == rb.rate_tilde)
        .map(|t| t.0)
        .expect("minimum is one of the terms");
    Ok(rb)
}

/// Asymptotic scan/linear rate
/// `d1 d2/(s1^2 s2^2) ^ 2((1/s2) log(d1/s1) + (1/s1) log(d2/s2))`.
pub fn bi_rate(shape: &ProblemShape) -> Result<f64> {
    shape.validate()?;
    if shape.s1 == shape.d1 || shape.s2 == shape.d2 {
        return Err(Error::InvalidShape(format!(
            "comparison rate needs s1 < d1 and s2 < d2, got {shape}"
        )));
    }
    let (d1, d2, s1, s2) = (shape.d1 as f64, shape.d2 as f64, shape.s1 as f64, shape.s2 as f64);
    let linear = d1 * d2 / (s1 * s1 * s2 * s2);
    let scan = 2.0 * ((d1 / s1).ln() / s2 + (d2 / s2).ln() / s1);
    Ok(linear.min(scan))
}

/// Rows of the `s1 = 1` regime table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingleRowRegime {
    /// `log(e d1) > s2`
    FewColumns,
    /// `log(e d1) <= s2` and `d2 log(e d1) / s2^2 <= 1`
    Dense,
    /// `log(e d1) <= s2` and `d2 log(e d1) / s2^2 > 1`
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleRowRate {
    pub regime: SingleRowRegime,
    pub rate: f64,
    pub optimal_test: crate::detectors::DetectorKind,
}

/// Closed-form rate when the planted block is a single row.
pub fn s1_equals_1_regime(shape: &ProblemShape) -> Result<SingleRowRate> {
    use crate::detectors::DetectorKind;
    shape.validate()?;
    if shape.s1 != 1 {
        return Err(Error::InvalidShape(format!("needs s1 = 1, got {shape}")));
    }
    let (d1, d2, s2) = (shape.d1 as f64, shape.d2 as f64, shape.s2 as f64);
    let log_ed1 = 1.0 + d1.ln();
    let effective = d2 * log_ed1 / (s2 * s2);
    Ok(if log_ed1 > s2 {
        SingleRowRate {
            regime: SingleRowRegime::FewColumns,
            rate: (E * d2 / s2).ln() + log_ed1 / s2,
            optimal_test: DetectorKind::MaxTruncChi2Axis1,
        }
    } else if effective <= 1.0 {
        SingleRowRate {
            regime: SingleRowRegime::Dense,
            rate: effective,
            optimal_test: DetectorKind::MaxLinAxis1,
        }
    } else {
        SingleRowRate {
            regime: SingleRowRegime::Sparse,
            rate: effective.ln_1p(),
            optimal_test: DetectorKind::MaxTruncChi2Axis1,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corollary {
    /// Agreement with the balanced asymptotic rate.
    Cor1,
    /// Phase transition at `s1^2 ~ d1 s2 log d2`.
    Cor2,
    /// `s1 = s2^2`, `d1 = d2^2`.
    Cor3,
    /// Linearized Cor2 regime.
    Cor4,
}

/// Constants the corollaries leave unspecified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryConstants {
    /// `s1^2 >= c_bar d1 s2` in Cor2.
    pub c_bar: f64,
    pub c1: f64,
    pub c2: f64,
    /// `d2 >= s2^(2 + alpha)`.
    pub alpha: f64,
    /// Balance `s1 log(d1/s1) ~ s2 log(d2/s2)` is read as a ratio in `[1/band, band]`.
    pub balance_band: f64,
}

impl Default for CorollaryConstants {
    fn default() -> Self {
        Self {
            c_bar: (2.0 * E).powi(-4),
            c1: 0.01,
            c2: 0.01,
            alpha: 0.5,
            balance_band: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorollaryCheck {
    pub assumptions_satisfied: bool,
    pub simplified_rate: f64,
}

pub fn corollary_rate(
    shape: &ProblemShape,
    which: Corollary,
    k: &CorollaryConstants,
) -> Result<CorollaryCheck> {
    shape.validate()?;
    let (d1, d2, s1, s2) = (shape.d1 as f64, shape.d2 as f64, shape.s1 as f64, shape.s2 as f64);
    let small = s1 <= k.c1 * d1 && s2 <= k.c2 * d2;
    let polynomial_gap = d2 >= s2.powf(2.0 + k.alpha);
    let row_aspect = d1 / s1 >= E * (d2 / s2).ln();
    let check = match which {
        Corollary::Cor1 => {
            let aspect = d1 / s1 >= E && d2 / s2 >= E;
            let (l1, l2) = ((d1 / s1).ln(), (d2 / s2).ln());
            let loglog = aspect && (l1.ln() / l2).max(l2.ln() / l1) <= 1.0;
            let balance = s1 * l1 / (s2 * l2);
            let balanced = balance >= 1.0 / k.balance_band && balance <= k.balance_band;
            let rate = (d1 * d2 / (s1 * s1 * s2 * s2)).min(l1 / s2 + l2 / s1);
            CorollaryCheck {
                assumptions_satisfied: aspect && loglog && balanced,
                simplified_rate: rate,
            }
        }
        Corollary::Cor2 => CorollaryCheck {
            assumptions_satisfied: s1 * s1 >= k.c_bar * d1 * s2
                && small
                && row_aspect
                && polynomial_gap,
            simplified_rate: (d1 * s2 * d2.ln() / (s1 * s1)).ln_1p() / s2,
        },
        Corollary::Cor3 => CorollaryCheck {
            assumptions_satisfied: shape.s1 == shape.s2 * shape.s2
                && shape.d1 == shape.d2 * shape.d2
                && d1 >= s1.powf(2.0 + k.alpha),
            simplified_rate: d1.ln() / s1.sqrt(),
        },
        Corollary::Cor4 => CorollaryCheck {
            assumptions_satisfied: s1 * s1 > d1 * s2 * d2.ln()
                && small
                && row_aspect
                && polynomial_gap,
            simplified_rate: d1 / (s1 * s1) * d2.ln(),
        },
    };
    Ok(check)
}
