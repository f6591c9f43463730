use std::fmt;

use crate::scalar::Real;

/// Sign of a tight constraint in an extremal system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    #[inline]
    pub fn value<T: Real>(self) -> T {
        match self {
            Sign::Minus => -T::one(),
            Sign::Plus => T::one(),
        }
    }

    /// The `index`-th pattern of `len` signs in lexicographic order
    /// (`Minus < Plus`, first position most significant).
    pub fn pattern(index: usize, len: usize) -> Vec<Sign> {
        (0..len)
            .map(|l| {
                if (index >> (len - 1 - l)) & 1 == 1 {
                    Sign::Plus
                } else {
                    Sign::Minus
                }
            })
            .collect()
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Minus => "-",
            Sign::Plus => "+",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalFit<T> {
    /// Coefficients on the projected dimensions.
    pub a: Vec<T>,
    /// Common magnitude of the tight residuals.
    pub eps_prime: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExtremalError {
    #[error("extremal system is singular")]
    SingularSystem,
    #[error("extremal system solution has negative epsilon")]
    NegativeEpsPrime,
}

/// Reusable workspace for solving `<a, row_l> - z_l = sigma_l * eps'`,
/// `l = 1..=s+1`, in the unknowns `(a, eps')`.
///
/// Gaussian elimination with partial pivoting followed by one step of
/// iterative refinement. A pivot below `pivot_tolerance * max|entry|`
/// marks the system singular, as does a refined residual above
/// `residual_slack * max(1, |z_l|)`.
#[derive(Clone, Debug)]
pub struct ExtremalSolver<T> {
    s: usize,
    coef: Vec<T>,
    lu: Vec<T>,
    perm: Vec<usize>,
    x: Vec<T>,
    rhs: Vec<T>,
    work: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Real> ExtremalSolver<T> {
    pub fn new(s: usize) -> Self {
        let dim = s + 1;
        Self {
            s,
            coef: vec![T::zero(); dim * dim],
            lu: vec![T::zero(); dim * dim],
            perm: (0..dim).collect(),
            x: vec![T::zero(); dim],
            rhs: vec![T::zero(); dim],
            work: vec![T::zero(); dim],
            scratch: vec![T::zero(); dim],
        }
    }

    #[inline]
    pub fn sparsity(&self) -> usize {
        self.s
    }

    /// Solves the system whose `l`-th projected row is
    /// `rows[l*s..(l+1)*s]`. On success returns `eps'` and leaves the
    /// coefficients in [`ExtremalSolver::coefficients`].
    pub fn solve(&mut self, rows: &[T], targets: &[T], signs: &[Sign]) -> Result<T, ExtremalError> {
        let s = self.s;
        let dim = s + 1;
        debug_assert_eq!(rows.len(), dim * s);
        debug_assert_eq!(targets.len(), dim);
        debug_assert_eq!(signs.len(), dim);

        let mut scale = T::one();
        for l in 0..dim {
            for i in 0..s {
                let v = rows[l * s + i];
                self.coef[l * dim + i] = v;
                scale = scale.max(v.abs());
            }
            self.coef[l * dim + s] = -signs[l].value::<T>();
            self.rhs[l] = targets[l];
        }
        self.lu.copy_from_slice(&self.coef);
        self.factor(T::pivot_tolerance() * scale)?;

        self.x.copy_from_slice(&self.rhs);
        self.substitute_x();

        // One refinement step: x += A^{-1} (b - A x).
        for l in 0..dim {
            let mut r = self.rhs[l];
            for i in 0..dim {
                r = r - self.coef[l * dim + i] * self.x[i];
            }
            self.work[l] = r;
        }
        self.substitute_work();
        for i in 0..dim {
            self.x[i] = self.x[i] + self.work[i];
        }

        let slack = T::residual_slack();
        for l in 0..dim {
            let mut r = -self.rhs[l];
            for i in 0..dim {
                r = r + self.coef[l * dim + i] * self.x[i];
            }
            if !(r.abs() <= slack * T::one().max(self.rhs[l].abs())) {
                return Err(ExtremalError::SingularSystem);
            }
        }

        let eps = self.x[s];
        if eps < T::zero() {
            // Round-off around an exact fit; the tight residuals are still
            // within the slack after clamping.
            if -eps <= slack {
                self.x[s] = T::zero();
                return Ok(T::zero());
            }
            return Err(ExtremalError::NegativeEpsPrime);
        }
        Ok(eps)
    }

    /// Coefficients `a` of the last successful solve.
    #[inline]
    pub fn coefficients(&self) -> &[T] {
        &self.x[..self.s]
    }

    fn factor(&mut self, tol: T) -> Result<(), ExtremalError> {
        let dim = self.s + 1;
        for (i, p) in self.perm.iter_mut().enumerate() {
            *p = i;
        }
        for col in 0..dim {
            let mut best = col;
            let mut best_abs = self.lu[col * dim + col].abs();
            for row in col + 1..dim {
                let v = self.lu[row * dim + col].abs();
                if v > best_abs {
                    best = row;
                    best_abs = v;
                }
            }
            if !(best_abs > tol) {
                return Err(ExtremalError::SingularSystem);
            }
            if best != col {
                for i in 0..dim {
                    self.lu.swap(col * dim + i, best * dim + i);
                }
                self.perm.swap(col, best);
            }
            let pivot = self.lu[col * dim + col];
            for row in col + 1..dim {
                let factor = self.lu[row * dim + col] / pivot;
                self.lu[row * dim + col] = factor;
                for i in col + 1..dim {
                    let v = self.lu[col * dim + i];
                    self.lu[row * dim + i] = self.lu[row * dim + i] - factor * v;
                }
            }
        }
        Ok(())
    }

    fn substitute_x(&mut self) {
        let dim = self.s + 1;
        lu_solve(dim, &self.lu, &self.perm, &mut self.x, &mut self.scratch);
    }

    fn substitute_work(&mut self) {
        let dim = self.s + 1;
        lu_solve(dim, &self.lu, &self.perm, &mut self.work, &mut self.scratch);
    }
}

fn lu_solve<T: Real>(dim: usize, lu: &[T], perm: &[usize], b: &mut [T], scratch: &mut [T]) {
    for (dst, &p) in scratch.iter_mut().zip(perm) {
        *dst = b[p];
    }
    b.copy_from_slice(scratch);
    for row in 0..dim {
        let mut acc = b[row];
        for i in 0..row {
            acc = acc - lu[row * dim + i] * b[i];
        }
        b[row] = acc;
    }
    for row in (0..dim).rev() {
        let mut acc = b[row];
        for i in row + 1..dim {
            acc = acc - lu[row * dim + i] * b[i];
        }
        b[row] = acc / lu[row * dim + row];
    }
}

/// Solves one extremal system given its `s + 1` projected rows.
pub fn solve_extremal_system<T: Real>(
    projected_rows: &[Vec<T>],
    targets: &[T],
    signs: &[Sign],
) -> Result<ExtremalFit<T>, ExtremalError> {
    let dim = projected_rows.len();
    assert!(dim >= 1, "an extremal system has at least one row");
    let s = dim - 1;
    assert!(
        projected_rows.iter().all(|r| r.len() == s) && targets.len() == dim && signs.len() == dim,
        "extremal system needs s + 1 rows of length s, targets and signs"
    );
    let flat: Vec<T> = projected_rows.iter().flatten().copied().collect();
    let mut solver = ExtremalSolver::new(s);
    let eps_prime = solver.solve(&flat, targets, signs)?;
    Ok(ExtremalFit {
        a: solver.coefficients().to_vec(),
        eps_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sign::{Minus, Plus};

    #[test]
    fn two_by_two_hand_solved() {
        // 2a - 1 = eps, 4a - 5 = -eps  =>  a = 1, eps = 1.
        let fit =
            solve_extremal_system(&[vec![2.0f64], vec![4.0]], &[1.0, 5.0], &[Plus, Minus]).unwrap();
        assert!((fit.a[0] - 1.0).abs() < 1e-12);
        assert!((fit.eps_prime - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_has_zero_eps() {
        let fit =
            solve_extremal_system(&[vec![1.0], vec![2.0]], &[0.0, 0.0], &[Plus, Plus]).unwrap();
        assert_eq!(fit.a, vec![0.0]);
        assert_eq!(fit.eps_prime, 0.0);
    }

    #[test]
    fn identical_rows_with_equal_signs_are_singular() {
        let err = solve_extremal_system(&[vec![1.0], vec![1.0]], &[0.0, 2.0], &[Plus, Plus]);
        assert_eq!(err, Err(ExtremalError::SingularSystem));
    }

    #[test]
    fn negative_eps_is_rejected_and_mirror_accepted() {
        let rows = [vec![2.0], vec![4.0]];
        assert_eq!(
            solve_extremal_system(&rows, &[1.0, 5.0], &[Minus, Plus]),
            Err(ExtremalError::NegativeEpsPrime)
        );
        assert!(solve_extremal_system(&rows, &[1.0, 5.0], &[Plus, Minus]).is_ok());
    }

    #[test]
    fn zero_sparsity_is_constant_fit() {
        // -z = sigma * eps with z = -0.75 and sigma = +1.
        let fit = solve_extremal_system::<f64>(&[vec![]], &[-0.75], &[Plus]).unwrap();
        assert!(fit.a.is_empty());
        assert_eq!(fit.eps_prime, 0.75);
        assert_eq!(
            solve_extremal_system::<f64>(&[vec![]], &[0.75], &[Plus]),
            Err(ExtremalError::NegativeEpsPrime)
        );
    }

    #[test]
    fn single_precision_solves() {
        let fit =
            solve_extremal_system(&[vec![2.0f32], vec![4.0]], &[1.0, 5.0], &[Plus, Minus]).unwrap();
        assert!((fit.a[0] - 1.0).abs() < 1e-6);
        assert!((fit.eps_prime - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sign_patterns_are_lexicographic() {
        let all: Vec<_> = (0..4).map(|i| Sign::pattern(i, 2)).collect();
        assert_eq!(
            all,
            vec![
                vec![Minus, Minus],
                vec![Minus, Plus],
                vec![Plus, Minus],
                vec![Plus, Plus]
            ]
        );
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
    }
}
