//! Observations, the columnar dataset, and task parameters.

use crate::bitset::BitColumn;
use crate::error::{Error, Result};
use crate::kdnf::MAX_ATTRIBUTES;
use crate::scalar::Real;

/// One observation: boolean attributes `x` (bit `i` is attribute `i`),
/// regression features `y`, and target `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub x: u64,
    pub y: Vec<T>,
    pub z: T,
}

impl<T: Real> Example<T> {
    pub fn new(x: u64, y: Vec<T>, z: T) -> Self {
        Self { x, y, z }
    }

    /// Builds an example from an explicit bit slice, `bits[i]` being attribute `i`.
    pub fn from_bits(bits: &[bool], y: Vec<T>, z: T) -> Result<Self> {
        if bits.len() > MAX_ATTRIBUTES {
            return Err(Error::TooManyAttributes {
                n: bits.len(),
                max: MAX_ATTRIBUTES,
            });
        }
        let x = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
        Ok(Self { x, y, z })
    }

    pub fn check(&self, n: usize, d: usize) -> Result<()> {
        if n < MAX_ATTRIBUTES && self.x >> n != 0 {
            return Err(Error::DimensionMismatch {
                what: "attribute bits",
                expected: n,
                found: 64 - self.x.leading_zeros() as usize,
            });
        }
        if self.y.len() != d {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: d,
                found: self.y.len(),
            });
        }
        if !self.z.is_finite() || self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("example"));
        }
        Ok(())
    }
}

/// Columnar collection of examples: one packed bit column per attribute,
/// one dense column per feature, plus the targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    n: usize,
    d: usize,
    x_cols: Vec<BitColumn>,
    y_cols: Vec<Vec<T>>,
    z: Vec<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        Self::with_capacity(n, d, 0)
    }

    pub fn with_capacity(n: usize, d: usize, capacity: usize) -> Result<Self> {
        if n > MAX_ATTRIBUTES {
            return Err(Error::TooManyAttributes {
                n,
                max: MAX_ATTRIBUTES,
            });
        }
        Ok(Self {
            n,
            d,
            x_cols: (0..n).map(|_| BitColumn::with_capacity(capacity)).collect(),
            y_cols: (0..d).map(|_| Vec::with_capacity(capacity)).collect(),
            z: Vec::with_capacity(capacity),
        })
    }

    pub fn from_examples(
        n: usize,
        d: usize,
        examples: impl IntoIterator<Item = Example<T>>,
    ) -> Result<Self> {
        let mut data = Self::new(n, d)?;
        for ex in examples {
            data.push_example(&ex)?;
        }
        Ok(data)
    }

    pub fn push_example(&mut self, ex: &Example<T>) -> Result<()> {
        self.push(ex.x, &ex.y, ex.z)
    }

    /// Appends one observation after validating it against `(n, d)`.
    pub fn push(&mut self, x: u64, y: &[T], z: T) -> Result<()> {
        if self.n < MAX_ATTRIBUTES && x >> self.n != 0 {
            return Err(Error::DimensionMismatch {
                what: "attribute bits",
                expected: self.n,
                found: 64 - x.leading_zeros() as usize,
            });
        }
        if y.len() != self.d {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: self.d,
                found: y.len(),
            });
        }
        if !z.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("example"));
        }
        for (i, col) in self.x_cols.iter_mut().enumerate() {
            col.push((x >> i) & 1 == 1);
        }
        for (col, &v) in self.y_cols.iter_mut().zip(y) {
            col.push(v);
        }
        self.z.push(z);
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of examples `m`.
    #[inline]
    pub fn len(&self) -> usize {
        self.z.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    #[inline]
    pub fn x_column(&self, attribute: usize) -> &BitColumn {
        &self.x_cols[attribute]
    }

    #[inline]
    pub fn y_column(&self, feature: usize) -> &[T] {
        &self.y_cols[feature]
    }

    #[inline]
    pub fn targets(&self) -> &[T] {
        &self.z
    }

    /// Attribute bits of example `j`, gathered from the columns.
    pub fn x_row(&self, j: usize) -> u64 {
        self.x_cols
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, col)| acc | ((col.get(j) as u64) << i))
    }

    pub fn y_row(&self, j: usize) -> Vec<T> {
        self.y_cols.iter().map(|col| col[j]).collect()
    }

    pub fn example(&self, j: usize) -> Example<T> {
        Example {
            x: self.x_row(j),
            y: self.y_row(j),
            z: self.z[j],
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = Example<T>> + '_ {
        (0..self.len()).map(|j| self.example(j))
    }

    /// Converts every real to another scalar type.
    pub fn cast<U: Real>(&self) -> Dataset<U> {
        Dataset {
            n: self.n,
            d: self.d,
            x_cols: self.x_cols.clone(),
            y_cols: self
                .y_cols
                .iter()
                .map(|col| col.iter().map(|&v| U::lit(v.as_f64())).collect())
                .collect(),
            z: self.z.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Task parameters shared by both algorithms.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskParams {
    /// Target fit.
    pub epsilon: f64,
    /// Lower bound on the condition's probability mass.
    pub mu: f64,
    /// Slack on both the conditional fit rate and the recovered mass.
    pub gamma: f64,
    /// Failure probability.
    pub delta: f64,
    pub sparsity: usize,
    pub k: usize,
    /// Norm bound `B`, only used by the expected-error task.
    pub norm_bound: Option<f64>,
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param(
                "epsilon",
                format!("{} is not > 0", self.epsilon),
            ));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::param("mu", format!("{} is not in (0, 1]", self.mu)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return Err(Error::param(
                "gamma",
                format!("{} is not in (0, 1/2]", self.gamma),
            ));
        }
        // delta = 1 is accepted so the sample-size bound can be probed at its floor.
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::param(
                "delta",
                format!("{} is not in (0, 1)", self.delta),
            ));
        }
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if let Some(b) = self.norm_bound {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::param("norm_bound", format!("{b} is not > 0")));
            }
        }
        Ok(())
    }

    /// Minimum coverage a returned condition must strictly exceed on `m`
    /// training examples: `(1 - gamma/2) * mu * m`.
    pub fn coverage_threshold(&self, m: usize) -> f64 {
        (1.0 - self.gamma / 2.0) * self.mu * m as f64
    }
}
