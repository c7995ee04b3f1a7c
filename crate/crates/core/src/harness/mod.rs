//! Monte Carlo risk estimation, cutoff calibration, sweeps and studies.
//!
//! Replicate `r` of every purpose draws from its own seed stream, results are
//! collected in replicate order and reduced sequentially, so outputs do not
//! depend on the number of worker threads.

mod output;
mod study;
mod sweep;

pub use output::{config_hash, svg_line_plot, ArtifactMeta, CSV_SCHEMA_VERSION};
pub use study::{
    cor1_grid, prop3_sequence, rate_comparison_study, s1_table_instances, Study, StudyRow,
    StudyTable, RATIO_BAND, STUDY_HEADER,
};
pub use sweep::{
    mu_sweep, phase_grid, write_phase_csv, Crossing, PhaseCell, SweepResult, PHASE_HEADER,
    SWEEP_HEADER,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::adaptive::{delta_star_ada, AdaptiveTest};
use crate::detectors::{dispatch, CutoffMode, DetectorSpec};
use crate::error::{Error, Result};
use crate::model::{sample_observation, sample_random_support, Matrix, PlantedMean, ProblemShape};
use crate::rates::rate_breakdown;
use crate::rng::{tags, SeedSpec};

/// Smallest replicate count accepted by [`estimate_risk`].
pub const MIN_RISK_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportPolicy {
    /// rows `0..s1`, columns `0..s2`
    Canonical,
    /// fresh uniform supports per replicate
    Uniform,
}

/// A test ready to be run on observations.
#[derive(Debug, Clone, PartialEq)]
pub enum Procedure {
    Fixed(DetectorSpec),
    Adaptive(AdaptiveTest),
}

impl Procedure {
    pub fn name(&self) -> String {
        match self {
            Procedure::Fixed(s) => s.kind.name().to_string(),
            Procedure::Adaptive(_) => "adaptive".to_string(),
        }
    }

    pub fn reject(&self, y: &Matrix, cap: u64) -> Result<bool> {
        match self {
            Procedure::Fixed(s) => Ok(s.evaluate(y, cap)?.reject),
            Procedure::Adaptive(t) => Ok(delta_star_ada(y, t, cap)?.reject),
        }
    }

    /// Statistic whose exceedance of the cutoff means rejection: the raw
    /// statistic, or for the adaptive test the largest statistic-to-cutoff
    /// ratio over the grid (reject iff it exceeds 1).
    pub fn score(&self, y: &Matrix, cap: u64) -> Result<f64> {
        match self {
            Procedure::Fixed(s) => Ok(s.evaluate(y, cap)?.statistic),
            Procedure::Adaptive(t) => Ok(t
                .evaluate_all(y, cap)?
                .iter()
                .map(|o| o.statistic / o.cutoff)
                .fold(f64::NEG_INFINITY, f64::max)),
        }
    }
}

/// The optimal test for `shape` with its cutoff calibrated under the null.
pub fn calibrated_delta_star(
    shape: &ProblemShape,
    level: f64,
    n_reps: usize,
    seed: SeedSpec,
    cap: u64,
) -> Result<DetectorSpec> {
    let kind = dispatch(&rate_breakdown(shape)?);
    let spec = DetectorSpec::theoretical(kind, shape, &Default::default())?;
    calibrate_cutoff(&spec, level, n_reps, seed, cap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub detector: String,
    pub shape: ProblemShape,
    pub mu: f64,
    pub type_one: f64,
    pub type_one_se: f64,
    pub type_two: f64,
    pub type_two_se: f64,
    pub risk: f64,
    pub n_reps: usize,
    pub root_seed: u64,
    pub support_policy: SupportPolicy,
}

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Run `f` on a pool with `threads` workers, or the global pool for `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn par_reps<T: Send>(n_reps: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n_reps as u64).into_par_iter().map(f).collect()
}

fn null_draw(shape: &ProblemShape, base: SeedSpec, r: u64) -> Result<Matrix> {
    Ok(sample_observation(shape, None, base.replicate(r))?.values)
}

fn planted_draw(shape: &ProblemShape, mu: f64, policy: SupportPolicy, seed: SeedSpec, r: u64) -> Result<Matrix> {
    let mean = match policy {
        SupportPolicy::Canonical => PlantedMean::canonical(*shape, mu)?,
        SupportPolicy::Uniform => {
            let (rows, cols) = sample_random_support(shape, seed.derive(tags::SUPPORT).replicate(r))?;
            PlantedMean::new(*shape, rows, cols, mu)?
        }
    };
    Ok(sample_observation(shape, Some(&mean), seed.derive(tags::ALTERNATIVE).replicate(r))?.values)
}

fn rejection_rates(procs: &[Procedure], draws: Vec<Vec<bool>>, n: usize) -> Vec<f64> {
    (0..procs.len())
        .map(|p| draws.iter().filter(|d| d[p]).count() as f64 / n as f64)
        .collect()
}

/// Risks of several procedures on shared samples.
#[allow(clippy::too_many_arguments)]
pub fn estimate_risks(
    procs: &[Procedure],
    shape: &ProblemShape,
    mu: f64,
    n_reps: usize,
    seed: SeedSpec,
    policy: SupportPolicy,
    cap: u64,
) -> Result<Vec<RiskEstimate>> {
    shape.validate()?;
    if n_reps < MIN_RISK_REPS {
        return Err(Error::InsufficientReplicates(format!(
            "risk estimation needs at least {MIN_RISK_REPS} replicates, got {n_reps}"
        )));
    }
    let run = |y: &Matrix| -> Result<Vec<bool>> { procs.iter().map(|p| p.reject(y, cap)).collect() };
    let null_base = seed.derive(tags::NULL);
    let nulls = par_reps(n_reps, |r| run(&null_draw(shape, null_base, r)?))?;
    let alts = par_reps(n_reps, |r| run(&planted_draw(shape, mu, policy, seed, r)?))?;
    let t1 = rejection_rates(procs, nulls, n_reps);
    let power = rejection_rates(procs, alts, n_reps);
    Ok(procs
        .iter()
        .zip(t1.iter().zip(&power))
        .map(|(p, (&a, &b))| RiskEstimate {
            detector: p.name(),
            shape: *shape,
            mu,
            type_one: a,
            type_one_se: binomial_se(a, n_reps),
            type_two: 1.0 - b,
            type_two_se: binomial_se(b, n_reps),
            risk: a + 1.0 - b,
            n_reps,
            root_seed: seed.root_seed,
            support_policy: policy,
        })
        .collect())
}

pub fn estimate_risk(
    proc: &Procedure,
    shape: &ProblemShape,
    mu: f64,
    n_reps: usize,
    seed: SeedSpec,
    policy: SupportPolicy,
    cap: u64,
) -> Result<RiskEstimate> {
    Ok(estimate_risks(std::slice::from_ref(proc), shape, mu, n_reps, seed, policy, cap)?.remove(0))
}

/// Type-I error on null samples independent of the calibration draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeOneCheck {
    pub type_one: f64,
    pub se: f64,
    pub n_reps: usize,
}

pub fn fresh_type_one(proc: &Procedure, shape: &ProblemShape, n_reps: usize, seed: SeedSpec, cap: u64) -> Result<TypeOneCheck> {
    let base = seed.derive(tags::FRESH);
    let rejects = par_reps(n_reps, |r| proc.reject(&null_draw(shape, base, r)?, cap))?;
    let p = rejects.iter().filter(|&&b| b).count() as f64 / n_reps as f64;
    Ok(TypeOneCheck {
        type_one: p,
        se: binomial_se(p, n_reps),
        n_reps,
    })
}

/// Confidence with which a calibrated cutoff holds its level.
pub const CALIBRATION_CONFIDENCE: f64 = 0.95;

/// Order statistic `X_(k)` of `n` null scores with the smallest `k` such
/// that the probability that a fresh score exceeds it is at most `level`
/// with probability [`CALIBRATION_CONFIDENCE`] over the null draws. The
/// exceedance of `X_(k)` is above `level` exactly when at most `n - k` of
/// the `n` scores fall in the top `level` mass, so `n - k` is the largest
/// `j` with `P(Bin(n, level) <= j) <= 1 - CALIBRATION_CONFIDENCE`.
pub fn conservative_quantile(scores: &mut [f64], level: f64) -> Result<f64> {
    let n = scores.len();
    let insufficient = || Error::InsufficientReplicates(format!("{n} replicates cannot certify level {level}"));
    let law = Binomial::new(level, n as u64).map_err(|_| insufficient())?;
    let alpha = 1.0 - CALIBRATION_CONFIDENCE;
    let j = (0..n as u64).take_while(|&j| law.cdf(j) <= alpha).last().ok_or_else(insufficient)?;
    scores.sort_by(f64::total_cmp);
    Ok(scores[n - 1 - j as usize])
}

fn check_level(level: f64, n_reps: usize) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0,1), got {level}")));
    }
    if (n_reps as f64) < 10.0 / level {
        return Err(Error::InsufficientReplicates(format!(
            "level {level} needs at least {} replicates, got {n_reps}",
            (10.0 / level).ceil()
        )));
    }
    Ok(())
}

fn null_scores(proc: &Procedure, shape: &ProblemShape, n_reps: usize, seed: SeedSpec, cap: u64) -> Result<Vec<f64>> {
    let base = seed.derive(tags::CALIBRATION);
    par_reps(n_reps, |r| proc.score(&null_draw(shape, base, r)?, cap))
}

/// `spec` with its cutoff replaced by a conservative null quantile.
pub fn calibrate_cutoff(spec: &DetectorSpec, level: f64, n_reps: usize, seed: SeedSpec, cap: u64) -> Result<DetectorSpec> {
    check_level(level, n_reps)?;
    let mut scores = null_scores(&Procedure::Fixed(spec.clone()), &spec.shape, n_reps, seed, cap)?;
    let cutoff = conservative_quantile(&mut scores, level)?;
    Ok(spec.with_cutoff(
        cutoff,
        CutoffMode::Calibrated {
            level,
            n_reps,
            seed: seed.root_seed,
        },
    ))
}

/// `test` with every cutoff scaled by one common factor chosen so the whole
/// grid has null rejection probability at most `level`.
pub fn calibrate_adaptive(test: &AdaptiveTest, level: f64, n_reps: usize, seed: SeedSpec, cap: u64) -> Result<(AdaptiveTest, f64)> {
    check_level(level, n_reps)?;
    let shape = ProblemShape::new(test.grid.d1, test.grid.d2, 1, 1)?;
    let mut scores = null_scores(&Procedure::Adaptive(test.clone()), &shape, n_reps, seed, cap)?;
    let factor = conservative_quantile(&mut scores, level)?;
    let mode = CutoffMode::Calibrated {
        level,
        n_reps,
        seed: seed.root_seed,
    };
    Ok((test.scaled(factor, mode), factor))
}
