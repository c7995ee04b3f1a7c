use serde::{Deserialize, Serialize};

use super::output::{csv_float, ArtifactMeta, CSV_SCHEMA_VERSION};
use super::{calibrated_delta_star, estimate_risk, Procedure, RiskEstimate, SupportPolicy};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::model::ProblemShape;
use crate::rates::{rate_breakdown, Regime};
use crate::rng::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub eta: f64,
    /// Largest multiple whose risk is at least 1/2.
    pub last_risk_above_half: Option<f64>,
    /// Smallest multiple whose risk is at most `eta`.
    pub first_risk_below_eta: Option<f64>,
}

impl Crossing {
    pub fn from_points(multiples: &[f64], risks: &[f64], eta: f64) -> Self {
        let pairs = || multiples.iter().zip(risks);
        Self {
            eta,
            last_risk_above_half: pairs().filter(|(_, &r)| r >= 0.5).map(|(&m, _)| m).last(),
            first_risk_below_eta: pairs().find(|(_, &r)| r <= eta).map(|(&m, _)| m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub shape: ProblemShape,
    /// `R`; the sweep runs at `mu = m sqrt(R)`.
    pub rate: f64,
    pub multiples: Vec<f64>,
    pub points: Vec<RiskEstimate>,
    pub crossing: Crossing,
}

pub const SWEEP_HEADER: [&str; 17] = [
    "schema", "config_hash", "root_seed", "version", "d1", "d2", "s1", "s2", "detector", "multiple",
    "mu", "type_one", "type_one_se", "type_two", "type_two_se", "risk", "n_reps",
];

impl SweepResult {
    pub fn write_csv<W: std::io::Write>(&self, w: W, meta: &ArtifactMeta) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(SWEEP_HEADER).map_err(io)?;
        for (m, p) in self.multiples.iter().zip(&self.points) {
            let sh = &self.shape;
            out.write_record([
                CSV_SCHEMA_VERSION.to_string(),
                meta.config_hash.clone(),
                meta.root_seed.to_string(),
                meta.version.clone(),
                sh.d1.to_string(),
                sh.d2.to_string(),
                sh.s1.to_string(),
                sh.s2.to_string(),
                p.detector.clone(),
                csv_float(*m),
                csv_float(p.mu),
                csv_float(p.type_one),
                csv_float(p.type_one_se),
                csv_float(p.type_two),
                csv_float(p.type_two_se),
                csv_float(p.risk),
                p.n_reps.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Risk of `proc` at `mu = m sqrt(R)` for every multiple `m`.
#[allow(clippy::too_many_arguments)]
pub fn mu_sweep(
    proc: &Procedure,
    shape: &ProblemShape,
    multiples: &[f64],
    n_reps: usize,
    seed: SeedSpec,
    policy: SupportPolicy,
    cap: u64,
    eta: f64,
) -> Result<SweepResult> {
    if multiples.is_empty() || multiples.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidArgument("multiples must be finite and nonnegative".into()));
    }
    if multiples.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("multiples must be strictly increasing".into()));
    }
    let rate = rate_breakdown(shape)?.rate;
    let points = multiples
        .iter()
        .map(|m| estimate_risk(proc, shape, m * rate.sqrt(), n_reps, seed, policy, cap))
        .collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = points.iter().map(|p| p.risk).collect();
    Ok(SweepResult {
        shape: *shape,
        rate,
        multiples: multiples.to_vec(),
        crossing: Crossing::from_points(multiples, &risks, eta),
        points,
    })
}

/// One cell of the risk heat grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub shape: ProblemShape,
    pub regime: Regime,
    pub detector: DetectorKind,
    pub rate: f64,
    pub mu: f64,
    pub estimate: Option<RiskEstimate>,
    /// Why the cell was not run.
    pub skipped: Option<String>,
}

pub const PHASE_HEADER: [&str; 16] = [
    "schema", "config_hash", "root_seed", "version", "d1", "d2", "s1", "s2", "regime", "detector",
    "rate", "mu", "type_one", "type_two", "risk", "skipped",
];

/// Calibrated optimal test risk at `mu = multiple sqrt(R)` over `(s1, s2)`.
/// Cells whose scan exceeds the enumeration cap are recorded as skipped.
#[allow(clippy::too_many_arguments)]
pub fn phase_grid(
    d1: usize,
    d2: usize,
    pairs: &[(usize, usize)],
    multiple: f64,
    level: f64,
    n_calibration: usize,
    n_reps: usize,
    seed: SeedSpec,
    cap: u64,
) -> Result<Vec<PhaseCell>> {
    pairs
        .iter()
        .map(|&(s1, s2)| {
            let shape = ProblemShape::new(d1, d2, s1, s2)?;
            let rb = rate_breakdown(&shape)?;
            let mu = multiple * rb.rate.sqrt();
            let mut cell = PhaseCell {
                shape,
                regime: rb.regime,
                detector: crate::detectors::dispatch(&rb),
                rate: rb.rate,
                mu,
                estimate: None,
                skipped: None,
            };
            let run = calibrated_delta_star(&shape, level, n_calibration, seed, cap).and_then(|spec| {
                estimate_risk(&Procedure::Fixed(spec), &shape, mu, n_reps, seed, SupportPolicy::Canonical, cap)
            });
            match run {
                Ok(est) => cell.estimate = Some(est),
                Err(e @ Error::EnumerationCap { .. }) => cell.skipped = Some(e.to_string()),
                Err(e) => return Err(e),
            }
            Ok(cell)
        })
        .collect()
}

pub fn write_phase_csv<W: std::io::Write>(cells: &[PhaseCell], w: W, meta: &ArtifactMeta) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    out.write_record(PHASE_HEADER).map_err(io)?;
    for c in cells {
        let (t1, t2, risk) = c
            .estimate
            .as_ref()
            .map_or((String::new(), String::new(), String::new()), |e| {
                (csv_float(e.type_one), csv_float(e.type_two), csv_float(e.risk))
            });
        out.write_record([
            CSV_SCHEMA_VERSION.to_string(),
            meta.config_hash.clone(),
            meta.root_seed.to_string(),
            meta.version.clone(),
            c.shape.d1.to_string(),
            c.shape.d2.to_string(),
            c.shape.s1.to_string(),
            c.shape.s2.to_string(),
            c.regime.name().to_string(),
            c.detector.name().to_string(),
            csv_float(c.rate),
            csv_float(c.mu),
            t1,
            t2,
            risk,
            c.skipped.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}
