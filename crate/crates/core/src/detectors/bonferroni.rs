//! Exact maximization of the truncated chi-square objective over row subsets.
//!
//! Subsets `c_1 < ... < c_s` are visited in colex order, i.e. by choosing
//! `c_s`, then `c_{s-1} < c_s`, and so on. With `l` rows still to choose from
//! the pool `0..m`, every column sum of a completion lies between the partial
//! sum plus the `l` smallest and plus the `l` largest pool entries of that
//! column. That interval bounds each truncated term, and a branch whose bound
//! cannot beat the incumbent is skipped. Skipped subsets score no more than the
//! incumbent and come later in colex order, so the first maximizer is the same
//! one a full scan would return.

use crate::error::{Error, Result};
use crate::gauss::TruncationConstant;
use crate::model::Matrix;
use crate::subsets::check_enumeration_cap;

use super::stats::MaxTruncResult;

/// Relative slack added to bounds so they dominate rounding in the partial sums.
const BOUND_SLACK: f64 = 1e-9;

struct Extremes {
    /// `(m * s + (l - 1)) * cols + j` holds the sum of the `l` largest
    /// (resp. smallest) entries of column `j` among rows `0..m`.
    top: Vec<f64>,
    bottom: Vec<f64>,
    s: usize,
    cols: usize,
}

impl Extremes {
    fn build(y: &Matrix, s: usize) -> Self {
        let (rows, cols) = (y.rows(), y.cols());
        let mut top = vec![f64::NAN; (rows + 1) * s * cols];
        let mut bottom = vec![f64::NAN; (rows + 1) * s * cols];
        // per column, sorted extreme values seen so far
        let mut hi: Vec<Vec<f64>> = vec![Vec::with_capacity(s + 1); cols];
        let mut lo: Vec<Vec<f64>> = vec![Vec::with_capacity(s + 1); cols];
        for m in 1..=rows {
            let row = y.row(m - 1);
            for j in 0..cols {
                insert_bounded(&mut hi[j], row[j], s, |a, b| a > b);
                insert_bounded(&mut lo[j], row[j], s, |a, b| a < b);
                let (mut th, mut tl) = (0.0, 0.0);
                for l in 1..=hi[j].len() {
                    th += hi[j][l - 1];
                    tl += lo[j][l - 1];
                    let at = (m * s + (l - 1)) * cols + j;
                    top[at] = th;
                    bottom[at] = tl;
                }
            }
        }
        Self {
            top,
            bottom,
            s,
            cols,
        }
    }

    fn slices(&self, pool: usize, remaining: usize) -> (&[f64], &[f64]) {
        let at = (pool * self.s + (remaining - 1)) * self.cols;
        (
            &self.top[at..at + self.cols],
            &self.bottom[at..at + self.cols],
        )
    }
}

/// Keep `v` sorted by `before` and no longer than `cap`.
fn insert_bounded(v: &mut Vec<f64>, x: f64, cap: usize, before: impl Fn(f64, f64) -> bool) {
    let pos = v.iter().position(|&e| before(x, e)).unwrap_or(v.len());
    if pos < cap {
        v.insert(pos, x);
        v.truncate(cap);
    }
}

struct Search<'a> {
    y: &'a Matrix,
    s: usize,
    sqrt_s: f64,
    tc: TruncationConstant,
    extremes: Extremes,
    /// partial column sums, one buffer per depth
    partial: Vec<Vec<f64>>,
    chosen: Vec<usize>,
    best: f64,
    best_subset: Vec<usize>,
    /// lower bound on the optimum from a heuristic start
    floor: f64,
    work: u64,
}

impl Search<'_> {
    fn bound(&self, partial: &[f64], pool: usize, remaining: usize) -> f64 {
        let (hi, lo) = self.extremes.slices(pool, remaining);
        let mut ub = 0.0;
        for j in 0..partial.len() {
            let (a, b) = (partial[j] + hi[j], partial[j] + lo[j]);
            let reach = a.abs().max(b.abs())
                + BOUND_SLACK * (1.0 + partial[j].abs() + hi[j].abs() + lo[j].abs());
            let m = reach / self.sqrt_s;
            if m > self.tc.tau {
                ub += (m * m - self.tc.nu).max(0.0);
            }
        }
        ub
    }

    fn prune(&self, ub: f64) -> bool {
        ub <= self.best || ub < self.floor
    }

    /// `depth` rows are already chosen (the largest indices); the next one is
    /// drawn from `0..limit`.
    fn descend(&mut self, depth: usize, limit: usize) {
        let remaining = self.s - depth;
        if remaining == 1 {
            self.leaves(depth, limit);
            return;
        }
        // the next index c must leave `remaining - 1` rows below it
        for c in (remaining - 1)..limit {
            self.push(depth, c);
            let ub = self.bound(&self.partial[depth + 1], c, remaining - 1);
            if !self.prune(ub) {
                self.chosen.push(c);
                self.descend(depth + 1, c);
                self.chosen.pop();
            }
        }
    }

    fn push(&mut self, depth: usize, c: usize) {
        let (lower, upper) = self.partial.split_at_mut(depth + 1);
        let next = &mut upper[0];
        let row = self.y.row(c);
        if depth == 0 {
            next.copy_from_slice(row);
        } else {
            for ((n, p), r) in next.iter_mut().zip(&lower[depth]).zip(row) {
                *n = p + r;
            }
        }
    }

    fn leaves(&mut self, depth: usize, limit: usize) {
        for c in 0..limit {
            let row = self.y.row(c);
            let mut total = 0.0;
            if depth == 0 {
                for &v in row {
                    let m = v / self.sqrt_s;
                    if m.abs() > self.tc.tau {
                        total += m * m - self.tc.nu;
                    }
                }
            } else {
                for (p, r) in self.partial[depth].iter().zip(row) {
                    let m = (p + r) / self.sqrt_s;
                    if m.abs() > self.tc.tau {
                        total += m * m - self.tc.nu;
                    }
                }
            }
            self.work += 1;
            if total > self.best {
                self.best = total;
                self.best_subset.clear();
                self.best_subset.push(c);
                self.best_subset.extend(self.chosen.iter().rev());
            }
        }
    }
}

/// Evaluate one subset with the same arithmetic as the scan.
fn subset_value(y: &Matrix, subset: &[usize], tc: &TruncationConstant) -> f64 {
    let sqrt_s = (subset.len() as f64).sqrt();
    let mut acc = vec![0.0; y.cols()];
    for &i in subset.iter().rev() {
        for (a, v) in acc.iter_mut().zip(y.row(i)) {
            *a += v;
        }
    }
    let mut total = 0.0;
    for a in acc {
        let m = a / sqrt_s;
        if m.abs() > tc.tau {
            total += m * m - tc.nu;
        }
    }
    total
}

/// Cheap candidates whose value seeds the pruning floor.
fn heuristic_floor(y: &Matrix, s: usize, tc: &TruncationConstant) -> f64 {
    let scores: [Box<dyn Fn(&[f64]) -> f64>; 2] = [
        Box::new(|r: &[f64]| r.iter().sum::<f64>()),
        Box::new(|r: &[f64]| r.iter().map(|v| v * v).sum::<f64>()),
    ];
    scores
        .iter()
        .map(|score| {
            let vals: Vec<f64> = (0..y.rows()).map(|i| score(y.row(i))).collect();
            let mut order: Vec<usize> = (0..y.rows()).collect();
            order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
            let mut pick = order[..s].to_vec();
            pick.sort_unstable();
            subset_value(y, &pick, tc)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn max_trunc_rows(
    y: &Matrix,
    s: usize,
    tc: &TruncationConstant,
    cap: u64,
) -> Result<MaxTruncResult> {
    let d = y.rows();
    if s == 0 || s > d {
        return Err(Error::InvalidArgument(format!(
            "subset size {s} out of range for {d} rows"
        )));
    }
    check_enumeration_cap(d as u64, s as u64, cap)?;
    let floor = heuristic_floor(y, s, tc);
    let mut search = Search {
        y,
        s,
        sqrt_s: (s as f64).sqrt(),
        tc: *tc,
        extremes: Extremes::build(y, s),
        partial: vec![vec![0.0; y.cols()]; s],
        chosen: Vec::with_capacity(s),
        best: f64::NEG_INFINITY,
        best_subset: Vec::with_capacity(s),
        floor,
        work: 0,
    };
    search.descend(0, d);
    Ok(MaxTruncResult {
        statistic: search.best,
        argmax: search.best_subset,
        work_count: search.work,
    })
}
