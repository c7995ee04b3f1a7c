//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigUint;
use subdetect::Matrix;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let (f1, f2) = (f(c - h * XGK[i]), f(c + h * XGK[i]));
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7, 15) quadrature with bisection.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut parts = vec![(a, b, gk15(f, a, b))];
    for _ in 0..10_000 {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= rel_tol * total.abs() {
            return total;
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].2 .1.total_cmp(&parts[j].2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(f, lo, mid)));
        parts.push((mid, hi, gk15(f, mid, hi)));
    }
    panic!("quadrature did not converge");
}

/// `E[Z^2 | |Z| > tau]` as a ratio of two integrals over `[tau, tau + 40]`,
/// both scaled by `exp(tau^2 / 2)` so nothing underflows.
pub fn nu_quadrature(tau: f64) -> f64 {
    let w = |x: f64| (-(x * x - tau * tau) / 2.0).exp();
    let num = integrate(&|x| x * x * w(x), tau, tau + 40.0, 1e-13);
    let den = integrate(&w, tau, tau + 40.0, 1e-13);
    num / den
}

pub fn binom_big(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 60 {
        let v: u64 = x.try_into().unwrap();
        return (v as f64).ln();
    }
    let shift = bits - 60;
    let top: u64 = (x >> shift).try_into().unwrap();
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Every `k`-subset of `0..n` in lexicographic order.
pub fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Max-lin by trying every subset; row sums added in ascending order.
pub fn max_lin_brute(y: &Matrix, s: usize) -> (f64, Vec<usize>) {
    let sums: Vec<f64> = (0..y.rows()).map(|i| y.row(i).iter().sum()).collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for sub in all_subsets(y.rows(), s) {
        let total: f64 = sub.iter().map(|&i| sums[i]).sum();
        let v = total / ((s * y.cols()) as f64).sqrt();
        if v > best.0 {
            best = (v, sub);
        }
    }
    best
}

/// Bonferroni truncated chi-square by trying every subset. Column sums add
/// the chosen rows from the highest index down, matching the library's
/// summation order so results agree bit for bit.
pub fn max_trunc_brute(y: &Matrix, s: usize, tau: f64, nu: f64) -> (f64, Vec<usize>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for sub in all_subsets(y.rows(), s) {
        let mut total = 0.0;
        for j in 0..y.cols() {
            let mut a = 0.0;
            for &i in sub.iter().rev() {
                a += y.get(i, j);
            }
            let m = a / (s as f64).sqrt();
            if m.abs() > tau {
                total += m * m - nu;
            }
        }
        if total > best.0 {
            best = (total, sub);
        }
    }
    best
}

/// `E_0[L^2]` by counting the overlaps of every ordered pair of supports.
pub fn second_moment_pairs(d1: usize, d2: usize, s1: usize, s2: usize, mu: f64) -> f64 {
    let overlap_counts = |d: usize, s: usize| {
        let subs = all_subsets(d, s);
        let mut counts = vec![0u64; s + 1];
        for a in &subs {
            for b in &subs {
                counts[a.iter().filter(|i| b.contains(i)).count()] += 1;
            }
        }
        let total = (subs.len() * subs.len()) as f64;
        counts.into_iter().map(|c| c as f64 / total).collect::<Vec<_>>()
    };
    let (p1, p2) = (overlap_counts(d1, s1), overlap_counts(d2, s2));
    let mut e = 0.0;
    for (k1, a) in p1.iter().enumerate() {
        for (k2, b) in p2.iter().enumerate() {
            e += a * b * (mu * mu * (k1 * k2) as f64).exp();
        }
    }
    e
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-3.0..3.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}
