//! Binomial counts and colexicographic subset enumeration.

use crate::error::{Error, Result};

/// Exact `C(n, k)`, or `None` when it does not fit in a `u128`.
pub fn binomial_count(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        // c * (n - k + i) is divisible by i after the multiply
        c = c.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(c)
}

/// Fails with [`Error::EnumerationCap`] when `C(n, k) > cap`.
pub fn check_enumeration_cap(n: u64, k: u64, cap: u64) -> Result<u64> {
    match binomial_count(n, k) {
        Some(c) if c <= cap as u128 => Ok(c as u64),
        Some(c) => Err(Error::EnumerationCap {
            required: c as f64,
            cap,
        }),
        None => Err(Error::EnumerationCap {
            required: crate::rates::log_binom(n, k).map_or(f64::INFINITY, f64::exp),
            cap,
        }),
    }
}

/// Advance a strictly increasing `k`-subset of `0..n` to its colex successor.
/// Returns `false` (leaving `subset` unchanged) after the last subset.
pub fn next_colex(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    if k == 0 {
        return false;
    }
    // smallest position that can move up without colliding
    let mut i = 0;
    while i + 1 < k && subset[i] + 1 == subset[i + 1] {
        i += 1;
    }
    if i + 1 == k && subset[i] + 1 >= n {
        return false;
    }
    subset[i] += 1;
    for (t, v) in subset.iter_mut().enumerate().take(i) {
        *v = t;
    }
    true
}

/// Iterator over all `k`-subsets of `0..n` in colex order.
pub struct ColexSubsets {
    n: usize,
    current: Vec<usize>,
    started: bool,
    done: bool,
}

impl ColexSubsets {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            started: false,
            done: k > n,
        }
    }
}

impl Iterator for ColexSubsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.started {
            if !next_colex(&mut self.current, self.n) {
                self.done = true;
                return None;
            }
        } else {
            self.started = true;
        }
        Some(self.current.clone())
    }
}
