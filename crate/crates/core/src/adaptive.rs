//! Sparsity-agnostic tests: dyadic grids and the adaptive optimal test.

use serde::{Deserialize, Serialize};

use crate::detectors::{
    cutoff_trunc, dispatch, tau_trunc, CutoffConstants, CutoffMode, DetectorKind, DetectorSpec,
    TestOutcome,
};
use crate::error::{Error, Result};
use crate::gauss::nu_tau;
use crate::model::{Matrix, ProblemShape};
use crate::rates::{log_binom, log_e_binom, rate_breakdown};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridFlavor {
    /// full product grid
    Omega,
    /// row sizes only
    Omega1,
    /// column sizes with `c s2^2 <= d2` and `s2 >= 3`
    Omega2,
    /// product grid with `(d2/s2^2) log C(d1,s1) >= c`
    OmegaBar,
}

/// Candidate sparsity pairs. Single-axis flavors carry the other coordinate
/// at its full size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub d1: usize,
    pub d2: usize,
    pub flavor: GridFlavor,
    pub points: Vec<(usize, usize)>,
}

/// `ceil(d / 2^m)` for `m = 0, 1, ...` until it reaches 1, deduplicated,
/// largest first.
pub fn dyadic_points(d: usize) -> Vec<usize> {
    let mut out = vec![d];
    let mut m = 1u32;
    while *out.last().unwrap() > 1 {
        let p = d.div_ceil(1usize << m).max(1);
        if p != *out.last().unwrap() {
            out.push(p);
        }
        m += 1;
    }
    out
}

pub fn build_grid(d1: usize, d2: usize, flavor: GridFlavor, c: f64) -> Result<DyadicGrid> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidShape(format!("grid needs d1, d2 >= 1, got {d1}, {d2}")));
    }
    let (p1, p2) = (dyadic_points(d1), dyadic_points(d2));
    let points = match flavor {
        GridFlavor::Omega => p1
            .iter()
            .flat_map(|&a| p2.iter().map(move |&b| (a, b)))
            .collect(),
        GridFlavor::Omega1 => p1.iter().map(|&a| (a, d2)).collect(),
        GridFlavor::Omega2 => p2
            .iter()
            .filter(|&&b| c * (b * b) as f64 <= d2 as f64 && b >= 3)
            .map(|&b| (d1, b))
            .collect(),
        GridFlavor::OmegaBar => {
            let mut pts = Vec::new();
            for &a in &p1 {
                let lb = log_binom(d1 as u64, a as u64)?;
                for &b in &p2 {
                    if d2 as f64 / (b * b) as f64 * lb >= c {
                        pts.push((a, b));
                    }
                }
            }
            pts
        }
    };
    Ok(DyadicGrid {
        d1,
        d2,
        flavor,
        points,
    })
}

/// The grid points `s- <= s <= s+` bracketing `s`, with `s+ <= 2 s-`.
pub fn covering_pair(d: usize, s: usize) -> Option<(usize, usize)> {
    let pts = dyadic_points(d);
    let upper = pts.iter().rev().find(|&&p| p >= s)?;
    let lower = pts.iter().find(|&&p| p <= s)?;
    Some((*lower, *upper))
}

/// Multipliers for the sparsity-dependent cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveConstants {
    /// `h(s2) = c s2 log(1 + d2/s2^2)`
    pub trunc: f64,
    /// linear cutoff
    pub linear: f64,
    /// `h(s1) = c sqrt(2 log(e C(d1,s1) log2 d1))`
    pub max_lin: f64,
    /// multiplier on `u(s1, s2)`
    pub max_trunc: f64,
    /// `C` inside every threshold
    pub tau: f64,
    /// level inside `u(s1, s2)`
    pub alpha: f64,
}

impl Default for AdaptiveConstants {
    fn default() -> Self {
        Self {
            trunc: 3.0,
            linear: 3.0,
            max_lin: 1.5,
            max_trunc: 1.0,
            tau: 2.0,
            alpha: 0.1,
        }
    }
}

impl AdaptiveConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.trunc, self.linear, self.max_lin, self.max_trunc, self.tau];
        if all.iter().all(|c| c.is_finite() && *c > 0.0) && self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad adaptive constants {self:?}")))
        }
    }
}

fn check_log2(d1: usize, d2: usize) -> Result<()> {
    if d1 < 2 || d2 < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid-corrected thresholds need d1, d2 >= 2, got {d1}, {d2}"
        )));
    }
    Ok(())
}

/// `log(C(d1,s1) log2 d1 log2 d2)`.
fn log_grid_count(s1: usize, d1: usize, d2: usize) -> Result<f64> {
    Ok(log_binom(d1 as u64, s1 as u64)? + (d1 as f64).log2().ln() + (d2 as f64).log2().ln())
}

/// `sqrt(c log(1 + (d2/s2^2) log(C(d1,s1) log2 d1 log2 d2)))`, clamped at 0
/// when the inner logarithm is negative.
pub fn adaptive_tau_max_trunc(s1: usize, s2: usize, d1: usize, d2: usize, c: f64) -> Result<f64> {
    check_log2(d1, d2)?;
    ProblemShape::new(d1, d2, s1, s2)?;
    let inner = d2 as f64 / (s2 * s2) as f64 * log_grid_count(s1, d1, d2)?;
    Ok((c * inner.ln_1p()).max(0.0).sqrt())
}

/// `c sqrt(2 log(e C(d1,s1) log2 d1))`.
pub fn adaptive_cutoff_max_lin(s1: usize, d1: usize, c: f64) -> Result<f64> {
    if d1 < 2 {
        return Err(Error::InvalidArgument(format!("needs d1 >= 2, got {d1}")));
    }
    let inner = log_e_binom(d1 as u64, s1 as u64)? + (d1 as f64).log2().ln();
    Ok(c * (2.0 * inner).sqrt())
}

/// `9 (sqrt(d2 exp(-tau^2/2) L) + L)` with `L = log((2/alpha) C(d1,s1) log2 d1 log2 d2)`.
pub fn adaptive_cutoff_max_trunc(s1: usize, s2: usize, d1: usize, d2: usize, tau: f64, alpha: f64) -> Result<f64> {
    check_log2(d1, d2)?;
    ProblemShape::new(d1, d2, s1, s2)?;
    let l = (2.0 / alpha).ln() + log_grid_count(s1, d1, d2)?;
    Ok(9.0 * ((d2 as f64 * (-0.5 * tau * tau).exp() * l).sqrt() + l))
}

/// Spec of the constituent `Delta*(s1, s2)` runs at one grid point.
pub fn adaptive_spec(shape: &ProblemShape, k: &AdaptiveConstants) -> Result<DetectorSpec> {
    k.validate()?;
    let rb = rate_breakdown(shape)?;
    let kind = dispatch(&rb);
    let fallback = CutoffConstants {
        trunc: k.trunc,
        linear: k.linear,
        max_trunc: k.max_trunc,
        max_lin: k.max_lin,
        tau: k.tau,
    };
    let (d1, d2, s1, s2) = (shape.d1, shape.d2, shape.s1, shape.s2);
    if d1 < 2 || d2 < 2 {
        return DetectorSpec::theoretical(kind, shape, &fallback);
    }
    let (tau, cutoff) = match kind {
        DetectorKind::Linear => (None, k.linear),
        DetectorKind::TruncChi2Axis1 => (Some(tau_trunc(d2, s2, k.tau)), cutoff_trunc(d2, s2, k.trunc)),
        DetectorKind::TruncChi2Axis2 => (Some(tau_trunc(d1, s1, k.tau)), cutoff_trunc(d1, s1, k.trunc)),
        DetectorKind::MaxLinAxis1 => (None, adaptive_cutoff_max_lin(s1, d1, k.max_lin)?),
        DetectorKind::MaxLinAxis2 => (None, adaptive_cutoff_max_lin(s2, d2, k.max_lin)?),
        DetectorKind::MaxTruncChi2Axis1 => {
            let t = adaptive_tau_max_trunc(s1, s2, d1, d2, k.tau)?;
            (Some(t), k.max_trunc * adaptive_cutoff_max_trunc(s1, s2, d1, d2, t, k.alpha)?)
        }
        DetectorKind::MaxTruncChi2Axis2 => {
            let t = adaptive_tau_max_trunc(s2, s1, d2, d1, k.tau)?;
            (Some(t), k.max_trunc * adaptive_cutoff_max_trunc(s2, s1, d2, d1, t, k.alpha)?)
        }
    };
    Ok(DetectorSpec {
        kind,
        shape: *shape,
        tau: tau.map(nu_tau).transpose()?,
        cutoff,
        cutoff_mode: CutoffMode::Theoretical(fallback),
    })
}

/// One spec per point of the full grid, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTest {
    pub grid: DyadicGrid,
    pub specs: Vec<DetectorSpec>,
}

impl AdaptiveTest {
    pub fn new(d1: usize, d2: usize, k: &AdaptiveConstants) -> Result<Self> {
        let grid = build_grid(d1, d2, GridFlavor::Omega, 0.0)?;
        let specs = grid
            .points
            .iter()
            .map(|&(s1, s2)| adaptive_spec(&ProblemShape::new(d1, d2, s1, s2)?, k))
            .collect::<Result<_>>()?;
        Ok(Self { grid, specs })
    }

    /// Every cutoff multiplied by `factor`.
    pub fn scaled(&self, factor: f64, mode: CutoffMode) -> Self {
        Self {
            grid: self.grid.clone(),
            specs: self
                .specs
                .iter()
                .map(|s| s.with_cutoff(s.cutoff * factor, mode))
                .collect(),
        }
    }

    /// Every grid point's outcome, in grid order.
    pub fn evaluate_all(&self, y: &Matrix, cap: u64) -> Result<Vec<TestOutcome>> {
        self.specs.iter().map(|s| s.evaluate(y, cap)).collect()
    }
}

/// Result of the adaptive test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub reject: bool,
    /// First rejecting grid point and its outcome, else the last point.
    pub point: (usize, usize),
    pub outcome: TestOutcome,
    pub work_count: u64,
}

/// `max` over the grid of `Delta*(s1, s2)`.
pub fn delta_star_ada(y: &Matrix, test: &AdaptiveTest, cap: u64) -> Result<AdaptiveOutcome> {
    let mut work = 0;
    let mut last = None;
    for (&point, spec) in test.grid.points.iter().zip(&test.specs) {
        let out = spec.evaluate(y, cap)?;
        work += out.work_count;
        if out.reject {
            return Ok(AdaptiveOutcome {
                reject: true,
                point,
                outcome: out,
                work_count: work,
            });
        }
        last = Some((point, out));
    }
    let (point, outcome) = last.ok_or_else(|| Error::InvalidArgument("empty grid".into()))?;
    Ok(AdaptiveOutcome {
        reject: false,
        point,
        outcome,
        work_count: work,
    })
}

/// Side conditions under which the adaptive test attains the rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptivityDiagnostic {
    pub dims_at_least_8: bool,
    pub sparsity_at_least_3: bool,
    /// `s_i + log log d_j >= c' log log d_i` for both orderings
    pub loglog_balance: bool,
    pub c_prime: f64,
}

impl AdaptivityDiagnostic {
    pub fn all_hold(&self) -> bool {
        self.dims_at_least_8 && self.sparsity_at_least_3 && self.loglog_balance
    }
}

pub fn adaptivity_diagnostic(shape: &ProblemShape, c_prime: f64) -> AdaptivityDiagnostic {
    let ll = |d: usize| (d as f64).ln().ln();
    let bal = |s: usize, dj: usize, di: usize| s as f64 + ll(dj) >= c_prime * ll(di);
    AdaptivityDiagnostic {
        dims_at_least_8: shape.d1.min(shape.d2) >= 8,
        sparsity_at_least_3: shape.s1.min(shape.s2) >= 3,
        loglog_balance: bal(shape.s1, shape.d2, shape.d1) && bal(shape.s2, shape.d1, shape.d2),
        c_prime,
    }
}
