use crate::bitset::BitColumn;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepRule {
    /// Step `1/L` with `L = 2 * lambda_max(Gram)` from power iteration.
    FixedInverseLipschitz,
    /// Start at `1/L` and halve until the sufficient-decrease test holds.
    Backtracking,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgdConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_rule: StepRule,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            rel_tol: 1e-8,
            step_rule: StepRule::FixedInverseLipschitz,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::param("rel_tol", "must be > 0"));
        }
        Ok(())
    }
}

const POWER_ITERATIONS: usize = 50;

/// The least-squares objective `sum_j (<a, y_j> - z_j)^2` held as its
/// sufficient statistics: `a' G a - 2 a' h + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective<T> {
    d: usize,
    gram: Vec<T>,
    lin: Vec<T>,
    constant: T,
}

impl<T: Real> QuadraticObjective<T> {
    pub fn from_rows(rows: &[Vec<T>], targets: &[T]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                what: "targets",
                expected: rows.len(),
                found: targets.len(),
            });
        }
        let mut obj = Self::zeros(d);
        for (row, &z) in rows.iter().zip(targets) {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "row",
                    expected: d,
                    found: row.len(),
                });
            }
            if !z.is_finite() || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("least-squares input"));
            }
            obj.accumulate(|i| row[i], z);
        }
        Ok(obj)
    }

    /// Statistics over the examples of `data` selected by `mask`.
    pub fn from_dataset(data: &Dataset<T>, mask: &BitColumn) -> Self {
        let d = data.d();
        let cols: Vec<&[T]> = (0..d).map(|i| data.y_column(i)).collect();
        let z = data.targets();
        let mut obj = Self::zeros(d);
        for j in mask.iter_ones() {
            obj.accumulate(|i| cols[i][j], z[j]);
        }
        obj
    }

    fn zeros(d: usize) -> Self {
        Self {
            d,
            gram: vec![T::zero(); d * d],
            lin: vec![T::zero(); d],
            constant: T::zero(),
        }
    }

    #[inline]
    fn accumulate(&mut self, y: impl Fn(usize) -> T, z: T) {
        let d = self.d;
        for p in 0..d {
            let yp = y(p);
            for q in p..d {
                self.gram[p * d + q] = self.gram[p * d + q] + yp * y(q);
            }
            self.lin[p] = self.lin[p] + yp * z;
        }
        self.constant = self.constant + z * z;
    }

    fn gram_at(&self, p: usize, q: usize) -> T {
        if p <= q {
            self.gram[p * self.d + q]
        } else {
            self.gram[q * self.d + p]
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    fn gram_times(&self, a: &[T], out: &mut [T]) {
        for (p, o) in out.iter_mut().enumerate().take(self.d) {
            *o = (0..self.d).fold(T::zero(), |acc, q| acc + self.gram_at(p, q) * a[q]);
        }
    }

    pub fn value(&self, a: &[T]) -> T {
        let mut ga = vec![T::zero(); self.d];
        self.gram_times(a, &mut ga);
        let quad = (0..self.d).fold(T::zero(), |acc, p| acc + a[p] * ga[p]);
        let lin = (0..self.d).fold(T::zero(), |acc, p| acc + a[p] * self.lin[p]);
        quad - (lin + lin) + self.constant
    }

    /// `2 (G a - h)`.
    pub fn gradient(&self, a: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.d];
        self.gradient_into(a, &mut g);
        g
    }

    fn gradient_into(&self, a: &[T], out: &mut [T]) {
        self.gram_times(a, out);
        let two = T::lit(2.0);
        for (o, &h) in out.iter_mut().zip(&self.lin) {
            *o = two * (*o - h);
        }
    }

    /// Power-iteration estimate of the Gram matrix's largest eigenvalue.
    pub fn largest_eigenvalue(&self) -> T {
        let d = self.d;
        if d == 0 {
            return T::zero();
        }
        let mut v = vec![T::one(); d];
        let mut w = vec![T::zero(); d];
        let mut lambda = T::zero();
        for _ in 0..POWER_ITERATIONS {
            self.gram_times(&v, &mut w);
            let norm = norm2(&w);
            if norm == T::zero() {
                return T::zero();
            }
            let vnorm = norm2(&v);
            lambda = norm / vnorm;
            for (vi, &wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        lambda
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgdOutcome<T> {
    pub a: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iterate, starting with `a = 0`.
    pub trace: Vec<T>,
}

pub fn project_to_ball<T: Real>(a: &mut [T], radius: T) {
    let norm = norm2(a);
    if norm > radius {
        let scale = radius / norm;
        for v in a.iter_mut() {
            *v = *v * scale;
        }
    }
}

pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// Minimizes `obj` over the ball `||a|| <= radius` by projected gradient
/// descent started from the origin.
///
/// Every accepted step is non-increasing in the objective: a fixed step that
/// would increase it is halved and retried.
pub fn minimize_in_ball<T: Real>(
    obj: &QuadraticObjective<T>,
    radius: T,
    cfg: &PgdConfig,
) -> PgdOutcome<T> {
    let d = obj.dim();
    let mut a = vec![T::zero(); d];
    let mut f = obj.value(&a);
    let mut trace = vec![f];
    let lipschitz = T::lit(2.0) * obj.largest_eigenvalue();
    if d == 0 || !(lipschitz > T::zero()) {
        return PgdOutcome {
            a,
            objective: f,
            iterations: 0,
            converged: true,
            trace,
        };
    }
    let base_step = T::one() / lipschitz;
    let tol = T::lit(cfg.rel_tol);
    let half = T::lit(0.5);
    let mut grad = vec![T::zero(); d];
    let mut next = vec![T::zero(); d];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        obj.gradient_into(&a, &mut grad);
        let mut step = base_step;
        let mut accepted = false;
        for _ in 0..60 {
            for p in 0..d {
                next[p] = a[p] - step * grad[p];
            }
            project_to_ball(&mut next, radius);
            let f_next = obj.value(&next);
            let ok = match cfg.step_rule {
                StepRule::FixedInverseLipschitz => f_next <= f,
                StepRule::Backtracking => {
                    // f(a+) <= f(a) + <g, a+ - a> + ||a+ - a||^2 / (2 t)
                    let mut lin = T::zero();
                    let mut sq = T::zero();
                    for p in 0..d {
                        let diff = next[p] - a[p];
                        lin = lin + grad[p] * diff;
                        sq = sq + diff * diff;
                    }
                    f_next <= f + lin + sq / (step + step) && f_next <= f
                }
            };
            if ok {
                accepted = true;
                break;
            }
            step = step * half;
        }
        if !accepted {
            converged = true;
            break;
        }
        let mut moved = T::zero();
        for p in 0..d {
            let diff = next[p] - a[p];
            moved = moved + diff * diff;
        }
        a.copy_from_slice(&next);
        f = obj.value(&a);
        trace.push(f);
        if moved.sqrt() <= tol * T::one().max(norm2(&a)) {
            converged = true;
            break;
        }
    }
    PgdOutcome {
        a,
        objective: f,
        iterations,
        converged,
        trace,
    }
}

/// Least squares over `rows`/`targets` constrained to `||a|| <= radius`.
pub fn constrained_least_squares<T: Real>(
    rows: &[Vec<T>],
    targets: &[T],
    radius: T,
    cfg: &PgdConfig,
) -> Result<Vec<T>> {
    if !(radius.is_finite() && radius > T::zero()) {
        return Err(Error::param("norm_bound", "must be finite and > 0"));
    }
    if rows.is_empty() {
        return Err(Error::param("rows", "at least one row is required"));
    }
    cfg.validate()?;
    let obj = QuadraticObjective::from_rows(rows, targets)?;
    Ok(minimize_in_ball(&obj, radius, cfg).a)
}
