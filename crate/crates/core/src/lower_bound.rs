//! Second moment of the likelihood ratio under the uniform prior on planted
//! supports, and the minimax risk lower bound it implies.
//!
//! Two independent uniform `s`-subsets of `[d]` overlap in `W ~
//! HyperGeometric(d, s, s)` elements: fix the first subset, then the second
//! picks `k` of its `s` members and `s - k` of the other `d - s`. The null
//! second moment is `E[exp(mu^2 W1 W2)]`.

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{noise_matrix, ProblemShape};
use crate::rates::log_binom;
use crate::rng::{tags, SeedSpec};
use crate::subsets::{check_enumeration_cap, ColexSubsets};

/// Law of `|S ∩ S'|` for independent uniform `s`-subsets of `[d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapLaw {
    pub d: usize,
    pub s: usize,
    /// Smallest possible overlap, `max(0, 2s - d)`.
    pub k_min: usize,
    /// `pmf[i]` is the probability of overlap `k_min + i`.
    pub pmf: Vec<f64>,
    pub log_pmf: Vec<f64>,
}

impl OverlapLaw {
    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.s
    }

    /// `P(W > t)`.
    pub fn upper_tail(&self, t: usize) -> f64 {
        let from = (t + 1).saturating_sub(self.k_min).min(self.pmf.len());
        self.pmf[from..].iter().rev().sum()
    }
}

pub fn hypergeom_overlap_pmf(d: usize, s: usize) -> Result<OverlapLaw> {
    if s == 0 || s > d {
        return Err(Error::InvalidArgument(format!("overlap law needs 1 <= s <= d, got d={d}, s={s}")));
    }
    let (du, su) = (d as u64, s as u64);
    let k_min = (2 * s).saturating_sub(d);
    let total = log_binom(du, su)?;
    let log_pmf = (k_min..=s)
        .map(|k| Ok(log_binom(su, k as u64)? + log_binom(du - su, (s - k) as u64)? - total))
        .collect::<Result<Vec<f64>>>()?;
    let pmf = log_pmf.iter().map(|l| l.exp()).collect();
    Ok(OverlapLaw {
        d,
        s,
        k_min,
        pmf,
        log_pmf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondMomentMethod {
    ExactHypergeometric,
    BinomialDominationBound,
    MonteCarloOverlap,
    MonteCarloLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentReport {
    pub shape: ProblemShape,
    pub mu: f64,
    /// `E_0[L^2]`; infinite when only the log fits in a float.
    pub second_moment: f64,
    pub log_second_moment: f64,
    /// Monte Carlo standard error of `second_moment`.
    pub standard_error: Option<f64>,
    /// `min(1, sqrt(E - 1) / 2)`.
    pub tv_upper_bound: f64,
    /// `1 - sqrt(E - 1) / 2`, clamped to `[0, 1]`.
    pub minimax_risk_lower_bound: f64,
    pub method: SecondMomentMethod,
}

/// `1 - sqrt(e - 1) / 2` clamped to `[0, 1]`.
pub fn risk_bound_from_moment(e: f64) -> f64 {
    (1.0 - 0.5 * (e - 1.0).max(0.0).sqrt()).clamp(0.0, 1.0)
}

fn report(
    shape: &ProblemShape,
    mu: f64,
    log_e: f64,
    standard_error: Option<f64>,
    method: SecondMomentMethod,
) -> SecondMomentReport {
    let e = log_e.exp();
    let tv = (0.5 * (e - 1.0).max(0.0).sqrt()).min(1.0);
    SecondMomentReport {
        shape: *shape,
        mu,
        second_moment: e,
        log_second_moment: log_e,
        standard_error,
        tv_upper_bound: tv,
        minimax_risk_lower_bound: risk_bound_from_moment(e),
        method,
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("mu must be finite and nonnegative, got {mu}")))
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `log E[exp(mu^2 W1 W2) 1(W1 in keep)]`.
fn log_moment_restricted(shape: &ProblemShape, mu: f64, keep: impl Fn(usize) -> bool) -> Result<f64> {
    shape.validate()?;
    check_mu(mu)?;
    let w1 = hypergeom_overlap_pmf(shape.d1, shape.s1)?;
    let w2 = hypergeom_overlap_pmf(shape.d2, shape.s2)?;
    let mu2 = mu * mu;
    let mut terms = Vec::with_capacity(w1.pmf.len() * w2.pmf.len());
    for (k1, l1) in w1.support().zip(&w1.log_pmf) {
        if !keep(k1) {
            continue;
        }
        for (k2, l2) in w2.support().zip(&w2.log_pmf) {
            terms.push(mu2 * (k1 * k2) as f64 + l1 + l2);
        }
    }
    Ok(log_sum_exp(terms.iter().copied()))
}

/// Exact `E_0[L^2]` through the overlap laws, summed in log space.
pub fn second_moment_exact(shape: &ProblemShape, mu: f64) -> Result<SecondMomentReport> {
    let log_e = if mu == 0.0 {
        0.0
    } else {
        log_moment_restricted(shape, mu, |_| true)?
    };
    Ok(report(shape, mu, log_e, None, SecondMomentMethod::ExactHypergeometric))
}

/// `E[exp(mu^2 W1 W2) 1(W1 in set)]` for the row overlaps in `set`.
pub fn partial_second_moment(shape: &ProblemShape, mu: f64, set: &[usize]) -> Result<f64> {
    Ok(log_moment_restricted(shape, mu, |k| set.contains(&k))?.exp())
}

pub fn risk_lower_bound(shape: &ProblemShape, mu: f64) -> Result<f64> {
    Ok(second_moment_exact(shape, mu)?.minimax_risk_lower_bound)
}

/// Success probability `s/(d - s)` of the dominating binomial.
fn domination_p(d: usize, s: usize) -> Result<f64> {
    if 2 * s > d {
        return Err(Error::InvalidArgument(format!(
            "binomial domination needs s <= d/2, got d={d}, s={s}"
        )));
    }
    Ok(s as f64 / (d - s) as f64)
}

fn binom_log_pmf(n: usize, p: f64) -> Result<Vec<f64>> {
    (0..=n)
        .map(|k| {
            if p >= 1.0 {
                return Ok(if k == n { 0.0 } else { f64::NEG_INFINITY });
            }
            let lc = log_binom(n as u64, k as u64)?;
            let a = if k == 0 { 0.0 } else { k as f64 * p.ln() };
            Ok(lc + a + (n - k) as f64 * (-p).ln_1p())
        })
        .collect()
}

/// `log(1 + p (e^x - 1))` for `x >= 0`.
fn log_mix(p: f64, x: f64) -> f64 {
    if x > 30.0 {
        x + (p + (1.0 - p) * (-x).exp()).ln()
    } else {
        (p * x.exp_m1()).ln_1p()
    }
}

/// `log E[exp(mu^2 X Y)]` with `X ~ Bin(s1, s1/(d1-s1))`, `Y ~ Bin(s2, s2/(d2-s2))`,
/// summing the binomial generating function in `Y` in closed form.
pub fn log_second_moment_binom_bound(shape: &ProblemShape, mu: f64) -> Result<f64> {
    shape.validate()?;
    check_mu(mu)?;
    let p1 = domination_p(shape.d1, shape.s1)?;
    let p2 = domination_p(shape.d2, shape.s2)?;
    let lp = binom_log_pmf(shape.s1, p1)?;
    let mu2 = mu * mu;
    let terms: Vec<f64> = lp
        .iter()
        .enumerate()
        .map(|(k, l)| l + shape.s2 as f64 * log_mix(p2, k as f64 * mu2))
        .collect();
    Ok(log_sum_exp(terms.iter().copied()))
}

pub fn second_moment_binom_bound(shape: &ProblemShape, mu: f64) -> Result<f64> {
    Ok(log_second_moment_binom_bound(shape, mu)?.exp())
}

pub fn binom_bound_report(shape: &ProblemShape, mu: f64) -> Result<SecondMomentReport> {
    let l = log_second_moment_binom_bound(shape, mu)?;
    Ok(report(shape, mu, l, None, SecondMomentMethod::BinomialDominationBound))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationCheck {
    pub holds: bool,
    /// `max_t P(W > t) - P(B > t)`.
    pub max_violation: f64,
}

/// Compare the overlap tail with that of `Bin(s, s/(d-s))` at every integer.
pub fn domination_check(d: usize, s: usize) -> Result<DominationCheck> {
    let w = hypergeom_overlap_pmf(d, s)?;
    let b: Vec<f64> = binom_log_pmf(s, domination_p(d, s)?)?
        .iter()
        .map(|l| l.exp())
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut b_tail = 0.0;
    for t in (0..=s).rev() {
        // b_tail is P(B > t)
        worst = worst.max(w.upper_tail(t) - b_tail);
        b_tail += b[t];
    }
    Ok(DominationCheck {
        holds: worst <= 1e-12,
        max_violation: worst,
    })
}

/// Sample mean with standard error; for a mean the jackknife SE coincides
/// with `sd / sqrt(n)`.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps < 2 {
        return Err(Error::InsufficientReplicates(format!("need at least 2 replicates, got {n_reps}")));
    }
    Ok(())
}

/// Average of `L(Y)^2` over null draws, with `L` the exact mixture likelihood
/// ratio over every support pair.
pub fn mc_second_moment_likelihood(
    shape: &ProblemShape,
    mu: f64,
    n_reps: usize,
    seed: SeedSpec,
    cap: u64,
) -> Result<SecondMomentReport> {
    shape.validate()?;
    check_mu(mu)?;
    check_reps(n_reps)?;
    let n1 = check_enumeration_cap(shape.d1 as u64, shape.s1 as u64, cap)?;
    let n2 = check_enumeration_cap(shape.d2 as u64, shape.s2 as u64, cap)?;
    if n1.saturating_mul(n2) > cap {
        return Err(Error::EnumerationCap {
            required: n1 as f64 * n2 as f64,
            cap,
        });
    }
    let rows: Vec<Vec<usize>> = ColexSubsets::new(shape.d1, shape.s1).collect();
    let cols: Vec<Vec<usize>> = ColexSubsets::new(shape.d2, shape.s2).collect();
    let offset = 0.5 * (shape.s1 * shape.s2) as f64 * mu * mu;
    let log_pairs = ((n1 * n2) as f64).ln();
    let base = seed.derive(tags::NULL);
    let values: Vec<f64> = (0..n_reps as u64)
        .into_par_iter()
        .map(|r| {
            let y = noise_matrix(shape.d1, shape.d2, &mut base.replicate(r).rng());
            let mut exps = Vec::with_capacity(rows.len() * cols.len());
            let mut sums = vec![0.0; shape.d2];
            for j1 in &rows {
                sums.iter_mut().for_each(|v| *v = 0.0);
                for &i in j1 {
                    for (a, v) in sums.iter_mut().zip(y.row(i)) {
                        *a += v;
                    }
                }
                for j2 in &cols {
                    let block: f64 = j2.iter().map(|&j| sums[j]).sum();
                    exps.push(mu * block - offset);
                }
            }
            let log_l = log_sum_exp(exps.iter().copied()) - log_pairs;
            (2.0 * log_l).exp()
        })
        .collect();
    let (mean, se) = mean_and_se(&values);
    Ok(report(shape, mu, mean.ln(), Some(se), SecondMomentMethod::MonteCarloLikelihood))
}

/// Average of `exp(mu^2 W1 W2)` over draws from the two overlap laws.
pub fn mc_second_moment_overlap(
    shape: &ProblemShape,
    mu: f64,
    n_reps: usize,
    seed: SeedSpec,
) -> Result<SecondMomentReport> {
    shape.validate()?;
    check_mu(mu)?;
    check_reps(n_reps)?;
    let w1 = hypergeom_overlap_pmf(shape.d1, shape.s1)?;
    let w2 = hypergeom_overlap_pmf(shape.d2, shape.s2)?;
    let dist = |w: &OverlapLaw| {
        WeightedIndex::new(&w.pmf).map_err(|e| Error::InvalidArgument(format!("overlap law: {e}")))
    };
    let (a, b) = (dist(&w1)?, dist(&w2)?);
    let base = seed.derive(tags::OVERLAP);
    let values: Vec<f64> = (0..n_reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = base.replicate(r).rng();
            let k1 = w1.k_min + a.sample(&mut rng);
            let k2 = w2.k_min + b.sample(&mut rng);
            (mu * mu * (k1 * k2) as f64).exp()
        })
        .collect();
    let (mean, se) = mean_and_se(&values);
    Ok(report(shape, mu, mean.ln(), Some(se), SecondMomentMethod::MonteCarloOverlap))
}
