//! Problem shapes, planted means and sampled observations.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// Matrix dimensions `(d1, d2)` and block sparsities `(s1, s2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemShape {
    pub d1: usize,
    pub d2: usize,
    pub s1: usize,
    pub s2: usize,
}

impl ProblemShape {
    pub fn new(d1: usize, d2: usize, s1: usize, s2: usize) -> Result<Self> {
        let shape = Self { d1, d2, s1, s2 };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s1 == 0 || self.s2 == 0 {
            return Err(Error::InvalidShape(format!(
                "sparsities must be positive, got s1={}, s2={}",
                self.s1, self.s2
            )));
        }
        if self.s1 > self.d1 || self.s2 > self.d2 {
            return Err(Error::InvalidShape(format!(
                "need s1 <= d1 and s2 <= d2, got ({}, {}, {}, {})",
                self.d1, self.d2, self.s1, self.s2
            )));
        }
        Ok(())
    }

    /// Swap the row and column axes.
    pub fn transpose(&self) -> Self {
        Self {
            d1: self.d2,
            d2: self.d1,
            s1: self.s2,
            s2: self.s1,
        }
    }
}

impl std::fmt::Display for ProblemShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.d1, self.d2, self.s1, self.s2)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: format!("{cols} columns"),
                    got: format!("{} columns in row {i}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// First non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::NonFinite {
                row: p / self.cols,
                col: p % self.cols,
            }),
            None => Ok(()),
        }
    }
}

/// Least-favorable planted mean: exactly `mu` on `rows x cols`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedMean {
    pub shape: ProblemShape,
    pub row_support: Vec<usize>,
    pub col_support: Vec<usize>,
    pub mu: f64,
}

fn check_support(name: &str, support: &[usize], size: usize, dim: usize) -> Result<()> {
    if support.len() != size {
        return Err(Error::InvalidSupport(format!(
            "{name} support has {} indices, expected {size}",
            support.len()
        )));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= dim) {
        return Err(Error::InvalidSupport(format!(
            "{name} index {bad} out of range for dimension {dim}"
        )));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSupport(format!(
            "{name} support must be strictly increasing"
        )));
    }
    Ok(())
}

impl PlantedMean {
    pub fn new(
        shape: ProblemShape,
        row_support: Vec<usize>,
        col_support: Vec<usize>,
        mu: f64,
    ) -> Result<Self> {
        shape.validate()?;
        check_support("row", &row_support, shape.s1, shape.d1)?;
        check_support("column", &col_support, shape.s2, shape.d2)?;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu must be finite and nonnegative, got {mu}"
            )));
        }
        Ok(Self {
            shape,
            row_support,
            col_support,
            mu,
        })
    }

    /// Block on the first `s1` rows and first `s2` columns.
    pub fn canonical(shape: ProblemShape, mu: f64) -> Result<Self> {
        Self::new(shape, (0..shape.s1).collect(), (0..shape.s2).collect(), mu)
    }

    pub fn matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.shape.d1, self.shape.d2);
        self.add_to(&mut m);
        m
    }

    fn add_to(&self, m: &mut Matrix) {
        for &i in &self.row_support {
            for &j in &self.col_support {
                let v = m.get(i, j) + self.mu;
                m.set(i, j, v);
            }
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            shape: self.shape.transpose(),
            row_support: self.col_support.clone(),
            col_support: self.row_support.clone(),
            mu: self.mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Null,
    Planted(PlantedMean),
    /// Loaded from a file; no generating mean is known.
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub shape: ProblemShape,
    pub values: Matrix,
    pub provenance: Provenance,
    pub seed: Option<SeedSpec>,
}

impl Observation {
    /// Wrap an externally supplied matrix.
    pub fn from_matrix(shape: ProblemShape, values: Matrix) -> Result<Self> {
        shape.validate()?;
        if values.rows() != shape.d1 || values.cols() != shape.d2 {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", shape.d1, shape.d2),
                got: format!("{}x{}", values.rows(), values.cols()),
            });
        }
        values.check_finite()?;
        Ok(Self {
            shape,
            values,
            provenance: Provenance::External,
            seed: None,
        })
    }

    pub fn transpose(&self) -> Self {
        Self {
            shape: self.shape.transpose(),
            values: self.values.transpose(),
            provenance: match &self.provenance {
                Provenance::Planted(m) => Provenance::Planted(m.transpose()),
                p => p.clone(),
            },
            seed: self.seed,
        }
    }
}

/// Independent uniform supports of sizes `s1` and `s2`, each sorted.
pub fn sample_random_support(
    shape: &ProblemShape,
    seed: SeedSpec,
) -> Result<(Vec<usize>, Vec<usize>)> {
    shape.validate()?;
    let mut rng = seed.rng();
    Ok(random_support_with(shape, &mut rng))
}

pub(crate) fn random_support_with<R: Rng>(
    shape: &ProblemShape,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut rows = index::sample(rng, shape.d1, shape.s1).into_vec();
    let mut cols = index::sample(rng, shape.d2, shape.s2).into_vec();
    rows.sort_unstable();
    cols.sort_unstable();
    (rows, cols)
}

/// `Y = X + E` with i.i.d. standard Gaussian `E`; `mean = None` is the null.
pub fn sample_observation(
    shape: &ProblemShape,
    mean: Option<&PlantedMean>,
    seed: SeedSpec,
) -> Result<Observation> {
    shape.validate()?;
    if let Some(m) = mean {
        if m.shape != *shape {
            return Err(Error::DimensionMismatch {
                expected: shape.to_string(),
                got: m.shape.to_string(),
            });
        }
    }
    let mut rng = seed.rng();
    let mut values = noise_matrix(shape.d1, shape.d2, &mut rng);
    if let Some(m) = mean {
        m.add_to(&mut values);
    }
    Ok(Observation {
        shape: *shape,
        values,
        provenance: mean.map_or(Provenance::Null, |m| Provenance::Planted(m.clone())),
        seed: Some(seed),
    })
}

pub(crate) fn noise_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix { rows, cols, data }
}
