//! Constituent test statistics.
//!
//! Column sums always accumulate rows in descending index order. The
//! Bonferroni enumerator builds its partial sums the same way, so a
//! single-subset enumeration reproduces the full-axis statistic bit for bit.

use crate::error::{Error, Result};
use crate::gauss::TruncationConstant;
use crate::model::Matrix;

use super::bonferroni;

/// Which matrix axis a statistic aggregates over.
///
/// `Rows` is the axis-1 construction (normalized column means over rows,
/// truncation over columns); `Cols` is the same statistic on the transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Rows,
    Cols,
}

fn oriented(y: &Matrix, axis: Axis) -> std::borrow::Cow<'_, Matrix> {
    match axis {
        Axis::Rows => std::borrow::Cow::Borrowed(y),
        Axis::Cols => std::borrow::Cow::Owned(y.transpose()),
    }
}

/// `(1/sqrt(d1)) sum_i Y_ij` for every column `j`.
pub fn col_means_full(y: &Matrix) -> Vec<f64> {
    let rows: Vec<usize> = (0..y.rows()).collect();
    col_sums_desc(y, &rows, (y.rows() as f64).sqrt())
}

/// `(1/sqrt(|J|)) sum_{i in J} Y_ij` for every column `j`.
pub fn col_means_subset(y: &Matrix, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidSupport("row subset is empty".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&i| i >= y.rows()) {
        return Err(Error::InvalidSupport(format!(
            "row {bad} out of range for {} rows",
            y.rows()
        )));
    }
    if rows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSupport(
            "row subset must be strictly increasing".into(),
        ));
    }
    Ok(col_sums_desc(y, rows, (rows.len() as f64).sqrt()))
}

fn col_sums_desc(y: &Matrix, rows: &[usize], scale: f64) -> Vec<f64> {
    let mut acc = vec![0.0; y.cols()];
    for &i in rows.iter().rev() {
        for (a, v) in acc.iter_mut().zip(y.row(i)) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= scale);
    acc
}

/// `(1/sqrt(d1 d2)) sum_ij Y_ij`.
pub fn stat_linear(y: &Matrix) -> f64 {
    let total: f64 = y.as_slice().iter().sum();
    total / ((y.rows() * y.cols()) as f64).sqrt()
}

/// `sum_j (m_j^2 - nu) 1(|m_j| > tau)` over normalized means `m`.
pub fn truncated_sum(means: &[f64], tc: &TruncationConstant) -> f64 {
    let mut total = 0.0;
    for &m in means {
        if m.abs() > tc.tau {
            total += m * m - tc.nu;
        }
    }
    total
}

pub fn stat_trunc_chi2(y: &Matrix, axis: Axis, tc: &TruncationConstant) -> f64 {
    truncated_sum(&col_means_full(&oriented(y, axis)), tc)
}

/// Bonferroni-corrected linear statistic, maximized over `s`-subsets of the
/// enumerated axis.
///
/// The objective is increasing in the sum of the chosen row sums, so the
/// optimum is the `s` largest row sums (ties to the lower index).
pub fn stat_max_lin(y: &Matrix, axis: Axis, s: usize) -> Result<(f64, Vec<usize>)> {
    let y = oriented(y, axis);
    if s == 0 || s > y.rows() {
        return Err(Error::InvalidArgument(format!(
            "subset size {s} out of range for {} rows",
            y.rows()
        )));
    }
    let sums = row_sums(&y);
    let mut order: Vec<usize> = (0..y.rows()).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    let mut chosen = order[..s].to_vec();
    chosen.sort_unstable();
    Ok((max_lin_value(&sums, &chosen, y.cols()), chosen))
}

/// Row sums `sum_j Y_ij`, columns in ascending order.
pub fn row_sums(y: &Matrix) -> Vec<f64> {
    (0..y.rows()).map(|i| y.row(i).iter().sum()).collect()
}

/// Max-lin objective of one subset; rows summed in ascending order.
pub fn max_lin_value(row_sums: &[f64], subset: &[usize], cols: usize) -> f64 {
    let total: f64 = subset.iter().map(|&i| row_sums[i]).sum();
    total / ((subset.len() * cols) as f64).sqrt()
}

/// Result of the Bonferroni truncated chi-square scan.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxTruncResult {
    pub statistic: f64,
    /// First maximizer in colex order.
    pub argmax: Vec<usize>,
    /// Subsets whose statistic was evaluated in full.
    pub work_count: u64,
}

/// Bonferroni-corrected truncated chi-square statistic: the exact maximum over
/// all `s`-subsets of the enumerated axis, visited in colex order with
/// branch-and-bound pruning. Fails if `C(d, s)` exceeds `cap`.
pub fn stat_max_trunc_chi2(
    y: &Matrix,
    axis: Axis,
    s: usize,
    tc: &TruncationConstant,
    cap: u64,
) -> Result<MaxTruncResult> {
    let y = oriented(y, axis);
    bonferroni::max_trunc_rows(&y, s, tc, cap)
}
