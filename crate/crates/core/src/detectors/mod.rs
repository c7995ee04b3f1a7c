//! Constituent tests, their thresholds and cutoffs, and the optimal test.

mod bonferroni;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{nu_tau, TruncationConstant};
use crate::model::{Matrix, ProblemShape};
use crate::rates::{log_e_binom, RateBreakdown, Regime};

pub use stats::{
    col_means_full, col_means_subset, stat_linear, stat_max_lin, stat_max_trunc_chi2,
    stat_trunc_chi2, truncated_sum, Axis, MaxTruncResult,
};

/// Default bound on the number of subsets a Bonferroni scan may enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Linear,
    TruncChi2Axis1,
    TruncChi2Axis2,
    MaxLinAxis1,
    MaxLinAxis2,
    MaxTruncChi2Axis1,
    MaxTruncChi2Axis2,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::Linear,
        DetectorKind::TruncChi2Axis1,
        DetectorKind::TruncChi2Axis2,
        DetectorKind::MaxLinAxis1,
        DetectorKind::MaxLinAxis2,
        DetectorKind::MaxTruncChi2Axis1,
        DetectorKind::MaxTruncChi2Axis2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Linear => "linear",
            DetectorKind::TruncChi2Axis1 => "trunc-chi2-axis1",
            DetectorKind::TruncChi2Axis2 => "trunc-chi2-axis2",
            DetectorKind::MaxLinAxis1 => "max-lin-axis1",
            DetectorKind::MaxLinAxis2 => "max-lin-axis2",
            DetectorKind::MaxTruncChi2Axis1 => "max-trunc-chi2-axis1",
            DetectorKind::MaxTruncChi2Axis2 => "max-trunc-chi2-axis2",
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(
            self,
            DetectorKind::TruncChi2Axis1
                | DetectorKind::TruncChi2Axis2
                | DetectorKind::MaxTruncChi2Axis1
                | DetectorKind::MaxTruncChi2Axis2
        )
    }

    pub fn is_bonferroni(&self) -> bool {
        matches!(
            self,
            DetectorKind::MaxLinAxis1
                | DetectorKind::MaxLinAxis2
                | DetectorKind::MaxTruncChi2Axis1
                | DetectorKind::MaxTruncChi2Axis2
        )
    }

    /// The same test after swapping the matrix axes.
    pub fn transpose(&self) -> DetectorKind {
        match self {
            DetectorKind::Linear => DetectorKind::Linear,
            DetectorKind::TruncChi2Axis1 => DetectorKind::TruncChi2Axis2,
            DetectorKind::TruncChi2Axis2 => DetectorKind::TruncChi2Axis1,
            DetectorKind::MaxLinAxis1 => DetectorKind::MaxLinAxis2,
            DetectorKind::MaxLinAxis2 => DetectorKind::MaxLinAxis1,
            DetectorKind::MaxTruncChi2Axis1 => DetectorKind::MaxTruncChi2Axis2,
            DetectorKind::MaxTruncChi2Axis2 => DetectorKind::MaxTruncChi2Axis1,
        }
    }

    fn axis(&self) -> Axis {
        match self {
            DetectorKind::TruncChi2Axis2
            | DetectorKind::MaxLinAxis2
            | DetectorKind::MaxTruncChi2Axis2 => Axis::Cols,
            _ => Axis::Rows,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = DetectorKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown detector {s:?}, expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Multipliers for the theoretical cutoffs and the truncation constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffConstants {
    /// truncated chi-square, `h = c * s2 log(1 + d2/s2^2)`
    pub trunc: f64,
    /// linear, `h = c`
    pub linear: f64,
    /// Bonferroni truncated chi-square
    pub max_trunc: f64,
    /// Bonferroni linear, `h = c sqrt(log(e C(d1,s1)))`
    pub max_lin: f64,
    /// `C` inside every `tau = sqrt(C log(...))`
    pub tau: f64,
}

impl Default for CutoffConstants {
    fn default() -> Self {
        Self {
            trunc: 3.0,
            linear: 3.0,
            max_trunc: 3.0,
            max_lin: 3.0,
            tau: 2.0,
        }
    }
}

impl CutoffConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.trunc, self.linear, self.max_trunc, self.max_lin, self.tau];
        if all.iter().all(|c| c.is_finite() && *c > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "cutoff constants must be positive and finite, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CutoffMode {
    Theoretical(CutoffConstants),
    Calibrated { level: f64, n_reps: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub shape: ProblemShape,
    /// Present exactly for the truncated kinds.
    pub tau: Option<TruncationConstant>,
    pub cutoff: f64,
    pub cutoff_mode: CutoffMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub kind: DetectorKind,
    pub statistic: f64,
    pub cutoff: f64,
    pub reject: bool,
    pub subset_argmax: Option<Vec<usize>>,
    pub work_count: u64,
}

fn ratio(d: usize, s: usize) -> f64 {
    d as f64 / (s as f64 * s as f64)
}

/// `sqrt(c log(1 + d2/s2^2))`.
pub fn tau_trunc(d2: usize, s2: usize, c: f64) -> f64 {
    (c * ratio(d2, s2).ln_1p()).sqrt()
}

/// `sqrt(c log(1 + (d2/s2^2) log(e C(d1,s1))))`.
pub fn tau_max_trunc(shape: &ProblemShape, c: f64) -> Result<f64> {
    let le = log_e_binom(shape.d1 as u64, shape.s1 as u64)?;
    Ok((c * (ratio(shape.d2, shape.s2) * le).ln_1p()).sqrt())
}

/// `c s2 log(1 + d2/s2^2)`.
pub fn cutoff_trunc(d2: usize, s2: usize, c: f64) -> f64 {
    c * s2 as f64 * ratio(d2, s2).ln_1p()
}

/// `c (s2 log(1 + (d2/s2^2) log(e C(d1,s1))) + log(e C(d1,s1)))`.
pub fn cutoff_max_trunc(shape: &ProblemShape, c: f64) -> Result<f64> {
    let le = log_e_binom(shape.d1 as u64, shape.s1 as u64)?;
    Ok(c * (shape.s2 as f64 * (ratio(shape.d2, shape.s2) * le).ln_1p() + le))
}

/// `c sqrt(log(e C(d1,s1)))`.
pub fn cutoff_max_lin(shape: &ProblemShape, c: f64) -> Result<f64> {
    Ok(c * log_e_binom(shape.d1 as u64, shape.s1 as u64)?.sqrt())
}

/// Threshold of a truncated kind under the truncation constant `c`.
pub fn threshold_for(kind: DetectorKind, shape: &ProblemShape, c: f64) -> Result<Option<TruncationConstant>> {
    let tau = match kind {
        DetectorKind::TruncChi2Axis1 => tau_trunc(shape.d2, shape.s2, c),
        DetectorKind::TruncChi2Axis2 => tau_trunc(shape.d1, shape.s1, c),
        DetectorKind::MaxTruncChi2Axis1 => tau_max_trunc(shape, c)?,
        DetectorKind::MaxTruncChi2Axis2 => tau_max_trunc(&shape.transpose(), c)?,
        _ => return Ok(None),
    };
    nu_tau(tau).map(Some)
}

fn theoretical_cutoff(kind: DetectorKind, shape: &ProblemShape, k: &CutoffConstants) -> Result<f64> {
    let t = shape.transpose();
    match kind {
        DetectorKind::Linear => Ok(k.linear),
        DetectorKind::TruncChi2Axis1 => Ok(cutoff_trunc(shape.d2, shape.s2, k.trunc)),
        DetectorKind::TruncChi2Axis2 => Ok(cutoff_trunc(shape.d1, shape.s1, k.trunc)),
        DetectorKind::MaxLinAxis1 => cutoff_max_lin(shape, k.max_lin),
        DetectorKind::MaxLinAxis2 => cutoff_max_lin(&t, k.max_lin),
        DetectorKind::MaxTruncChi2Axis1 => cutoff_max_trunc(shape, k.max_trunc),
        DetectorKind::MaxTruncChi2Axis2 => cutoff_max_trunc(&t, k.max_trunc),
    }
}

impl DetectorSpec {
    pub fn theoretical(kind: DetectorKind, shape: &ProblemShape, k: &CutoffConstants) -> Result<Self> {
        shape.validate()?;
        k.validate()?;
        Ok(Self {
            kind,
            shape: *shape,
            tau: threshold_for(kind, shape, k.tau)?,
            cutoff: theoretical_cutoff(kind, shape, k)?,
            cutoff_mode: CutoffMode::Theoretical(*k),
        })
    }

    /// Same statistic and threshold with an externally determined cutoff.
    pub fn with_cutoff(&self, cutoff: f64, mode: CutoffMode) -> Self {
        Self {
            cutoff,
            cutoff_mode: mode,
            ..self.clone()
        }
    }

    fn tau_or_err(&self) -> Result<&TruncationConstant> {
        self.tau.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("{} needs a truncation threshold", self.kind))
        })
    }

    /// Subset size enumerated by a Bonferroni kind.
    fn subset_size(&self) -> usize {
        match self.kind.axis() {
            Axis::Rows => self.shape.s1,
            Axis::Cols => self.shape.s2,
        }
    }

    /// Compute the statistic on `y` and compare it with the cutoff.
    pub fn evaluate(&self, y: &Matrix, cap: u64) -> Result<TestOutcome> {
        if (y.rows(), y.cols()) != (self.shape.d1, self.shape.d2) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.shape.d1, self.shape.d2),
                got: format!("{}x{}", y.rows(), y.cols()),
            });
        }
        let axis = self.kind.axis();
        let (statistic, subset_argmax, work_count) = match self.kind {
            DetectorKind::Linear => (stat_linear(y), None, 1),
            DetectorKind::TruncChi2Axis1 | DetectorKind::TruncChi2Axis2 => {
                (stat_trunc_chi2(y, axis, self.tau_or_err()?), None, 1)
            }
            DetectorKind::MaxLinAxis1 | DetectorKind::MaxLinAxis2 => {
                let (v, sub) = stat_max_lin(y, axis, self.subset_size())?;
                (v, Some(sub), 1)
            }
            DetectorKind::MaxTruncChi2Axis1 | DetectorKind::MaxTruncChi2Axis2 => {
                let r = stat_max_trunc_chi2(y, axis, self.subset_size(), self.tau_or_err()?, cap)?;
                (r.statistic, Some(r.argmax), r.work_count)
            }
        };
        Ok(TestOutcome {
            kind: self.kind,
            statistic,
            cutoff: self.cutoff,
            reject: statistic > self.cutoff,
            subset_argmax,
            work_count,
        })
    }
}

/// One theoretical spec per constituent kind, in [`DetectorKind::ALL`] order.
pub fn theoretical_cutoffs(shape: &ProblemShape, k: &CutoffConstants) -> Result<Vec<DetectorSpec>> {
    DetectorKind::ALL
        .iter()
        .map(|&kind| DetectorSpec::theoretical(kind, shape, k))
        .collect()
}

/// The constituent the optimal test runs for this shape.
pub fn dispatch(rb: &RateBreakdown) -> DetectorKind {
    let sh = &rb.shape;
    match rb.regime {
        Regime::PhiA if ratio(sh.d2, sh.s2) >= 1.0 => DetectorKind::TruncChi2Axis1,
        Regime::PhiB if ratio(sh.d1, sh.s1) >= 1.0 => DetectorKind::TruncChi2Axis2,
        Regime::PhiA | Regime::PhiB => DetectorKind::Linear,
        Regime::PsiBetaC => {
            let le = log_e_binom(sh.d1 as u64, sh.s1 as u64).expect("validated shape");
            if ratio(sh.d2, sh.s2) * le >= 1.0 {
                DetectorKind::MaxTruncChi2Axis1
            } else {
                DetectorKind::MaxLinAxis1
            }
        }
        Regime::PsiBetaD => {
            let le = log_e_binom(sh.d2 as u64, sh.s2 as u64).expect("validated shape");
            if ratio(sh.d1, sh.s1) * le >= 1.0 {
                DetectorKind::MaxTruncChi2Axis2
            } else {
                DetectorKind::MaxLinAxis2
            }
        }
    }
}

/// Run the dispatched constituent from `specs`.
pub fn delta_star(y: &Matrix, rb: &RateBreakdown, specs: &[DetectorSpec], cap: u64) -> Result<TestOutcome> {
    let kind = dispatch(rb);
    let spec = specs
        .iter()
        .find(|s| s.kind == kind && s.shape == rb.shape)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("no spec for dispatched detector {kind} at {}", rb.shape))
        })?;
    spec.evaluate(y, cap)
}
