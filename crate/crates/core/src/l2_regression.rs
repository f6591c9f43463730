//! Dense expected-error regression by pigeonhole over single terms (DERP).
//!
//! Every exactly-`k` term `T` is fitted by least squares over the examples
//! it selects, `S(T)`, constrained to `||a|| <= B`. A term passes when
//! `(1/m) * sum_{j in S(T)} (<a, y_j> - z_j)^2 <= 4 * mu * epsilon`; among
//! passing terms the one selecting the most examples wins, ties going to the
//! canonically first term.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kdnf::{KDnf, Term};
use crate::model::{Algorithm, ConditionalModel, SparseLinearRule};
use crate::parallel::with_threads;
use crate::scalar::Real;
use crate::smallsolve::{minimize_in_ball, PgdConfig, QuadraticObjective};
use crate::sup_regression::{finite_count, term_power};

/// Leading constant of the DERP sample-size bound.
pub const DERP_SAMPLE_SIZE_CONSTANT: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DerpParams {
    pub epsilon: f64,
    /// Lower end of the bracket `mu <= Pr[c(x) = 1] <= 2 mu`.
    pub mu: f64,
    pub norm_bound: f64,
    pub k: usize,
    pub pgd: PgdConfig,
}

impl DerpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::param(
                "epsilon",
                format!("{} is not >= 0", self.epsilon),
            ));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::param("mu", format!("{} is not in (0, 1]", self.mu)));
        }
        if !(self.norm_bound.is_finite() && self.norm_bound > 0.0) {
            return Err(Error::param(
                "norm_bound",
                format!("{} is not > 0", self.norm_bound),
            ));
        }
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        self.pgd.validate()
    }

    /// `4 * mu * epsilon`.
    pub fn threshold(&self) -> f64 {
        4.0 * self.mu * self.epsilon
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerpCandidate<T> {
    pub term: Term,
    pub rule: Vec<T>,
    /// `|S(T)|`.
    pub matched: usize,
    /// `(1/m) * sum_{j in S(T)} (<a, y_j> - z_j)^2`, summed in index order.
    pub scaled_sq_error: T,
}

impl<T: Real> DerpCandidate<T> {
    pub fn into_model(self, n: usize, k: usize, epsilon: f64) -> Result<ConditionalModel<T>> {
        let d = self.rule.len();
        let condition = KDnf::new(n, k, [self.term])?;
        ConditionalModel::new(
            d,
            condition,
            SparseLinearRule::dense(self.rule)?,
            T::lit(epsilon),
            Algorithm::L2,
        )
    }
}

/// Fits one term: constrained least squares on `S(T)` and its scaled error.
pub fn fit_term<T: Real>(data: &Dataset<T>, term: Term, params: &DerpParams) -> DerpCandidate<T> {
    let mask = term.mask(data);
    let matched = mask.count_ones();
    let obj = QuadraticObjective::from_dataset(data, &mask);
    let rule = minimize_in_ball(&obj, T::lit(params.norm_bound), &params.pgd).a;
    let cols: Vec<&[T]> = (0..data.d()).map(|i| data.y_column(i)).collect();
    let z = data.targets();
    let mut total = T::zero();
    for j in mask.iter_ones() {
        let pred = cols
            .iter()
            .zip(&rule)
            .fold(T::zero(), |acc, (col, &c)| acc + c * col[j]);
        let r = pred - z[j];
        total = total + r * r;
    }
    DerpCandidate {
        term,
        rule,
        matched,
        scaled_sq_error: total / T::lit(data.len() as f64),
    }
}

/// Whether `candidate` passes the `4 mu epsilon` test. Terms selecting no
/// example never pass.
pub fn passes<T: Real>(candidate: &DerpCandidate<T>, params: &DerpParams) -> bool {
    candidate.matched > 0 && candidate.scaled_sq_error.as_f64() <= params.threshold()
}

/// Every candidate in canonical term order.
pub fn fit_all_terms<T: Real>(
    data: &Dataset<T>,
    params: &DerpParams,
    threads: usize,
) -> Result<Vec<DerpCandidate<T>>> {
    check_inputs(data, params)?;
    let trivial = KDnf::trivial(data.n(), params.k)?;
    let terms = trivial.terms();
    Ok(with_threads(threads, || {
        if threads <= 1 {
            terms.iter().map(|&t| fit_term(data, t, params)).collect()
        } else {
            terms
                .par_iter()
                .map(|&t| fit_term(data, t, params))
                .collect()
        }
    }))
}

pub fn derp<T: Real>(data: &Dataset<T>, params: &DerpParams) -> Result<Option<DerpCandidate<T>>> {
    derp_threaded(data, params, 1)
}

pub fn derp_threaded<T: Real>(
    data: &Dataset<T>,
    params: &DerpParams,
    threads: usize,
) -> Result<Option<DerpCandidate<T>>> {
    if threads == 0 {
        return Err(Error::param("threads", "must be at least 1"));
    }
    let candidates = fit_all_terms(data, params, threads)?;
    let mut best: Option<DerpCandidate<T>> = None;
    for cand in candidates {
        if passes(&cand, params) && best.as_ref().is_none_or(|b| cand.matched > b.matched) {
            best = Some(cand);
        }
    }
    Ok(best)
}

/// Runs [`derp`] for `mu = 1, 1/2, 1/4, ...` down to `mu_floor` and returns
/// the first success together with its `mu`. `params.mu` is ignored.
pub fn derp_mu_search<T: Real>(
    data: &Dataset<T>,
    params: &DerpParams,
    mu_floor: f64,
    threads: usize,
) -> Result<Option<(DerpCandidate<T>, f64)>> {
    if !(mu_floor > 0.0 && mu_floor <= 1.0) {
        return Err(Error::param(
            "mu_floor",
            format!("{mu_floor} is not in (0, 1]"),
        ));
    }
    let mut mu = 1.0;
    while mu >= mu_floor {
        let at = DerpParams {
            mu,
            ..params.clone()
        };
        if let Some(found) = derp_threaded(data, &at, threads)? {
            return Ok(Some((found, mu)));
        }
        mu /= 2.0;
    }
    Ok(None)
}

/// `ceil(8 * B^8 n^k / (mu epsilon) * (k ln n + ln(1/delta)))`.
pub fn derp_sample_size(params: &DerpParams, n: usize, delta: f64) -> Result<u64> {
    params.validate()?;
    if !(params.epsilon > 0.0) {
        return Err(Error::param(
            "epsilon",
            "must be > 0 for the sample-size bound",
        ));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", format!("{delta} is not in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let power = term_power(n, params.k)?;
    let scale = params.norm_bound.powi(8) * power / (params.mu * params.epsilon);
    let bracket = params.k as f64 * (n as f64).ln() + (1.0 / delta).ln();
    finite_count((DERP_SAMPLE_SIZE_CONSTANT * scale * bracket).ceil())
}

fn check_inputs<T: Real>(data: &Dataset<T>, params: &DerpParams) -> Result<()> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::param("dataset", "at least one example is required"));
    }
    if params.k > data.n() {
        return Err(Error::KExceedsN {
            k: params.k,
            n: data.n(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;

    fn params(epsilon: f64, mu: f64) -> DerpParams {
        DerpParams {
            epsilon,
            mu,
            norm_bound: 2.0,
            k: 1,
            pgd: PgdConfig::default(),
        }
    }

    #[test]
    fn sample_size_regression_constant() {
        let p = DerpParams {
            norm_bound: 1.0,
            ..params(0.1, 0.25)
        };
        // 8 * (4 / 0.025) * (ln 4 + ln 10) = 4721.77...
        assert_eq!(derp_sample_size(&p, 4, 0.1).unwrap(), 4722);
    }

    #[test]
    fn sample_size_scales_with_b_to_the_eighth() {
        let p1 = DerpParams {
            norm_bound: 1.0,
            ..params(0.5, 0.5)
        };
        let p2 = DerpParams {
            norm_bound: 2.0,
            ..p1.clone()
        };
        let m1 = derp_sample_size(&p1, 2, 0.5).unwrap();
        let m2 = derp_sample_size(&p2, 2, 0.5).unwrap();
        assert!(m2.abs_diff(256 * m1) <= 256, "{m1} {m2}");
    }

    #[test]
    fn sample_size_floor() {
        let p = DerpParams {
            norm_bound: 1.0,
            ..params(0.5, 1.0)
        };
        assert_eq!(derp_sample_size(&p, 1, 1.0).unwrap(), 1);
        assert_eq!(derp_sample_size(&p, 1, 0.999_999).unwrap(), 1);
    }

    fn zero_target_data() -> Dataset<f64> {
        let examples = (0..24).map(|j| {
            let x = (j % 8) as u64;
            Example::new(x, vec![(j as f64).sin(), (j as f64 * 0.7).cos()], 0.0)
        });
        Dataset::from_examples(3, 2, examples).unwrap()
    }

    #[test]
    fn zero_targets_pick_first_max_coverage_term() {
        let data = zero_target_data();
        let best = derp(&data, &params(0.01, 0.25)).unwrap().unwrap();
        assert_eq!(best.scaled_sq_error, 0.0);
        assert!(best.rule.iter().all(|&a| a == 0.0));
        // Every single literal selects 12 of 24 examples; the first is !x0.
        assert_eq!(best.matched, 12);
        assert_eq!(best.term.to_string(), "!x0");
    }

    #[test]
    fn zero_epsilon_with_noise_is_infeasible() {
        let examples = (0..40).map(|j| {
            let x = (j % 4) as u64;
            Example::new(x, vec![1.0], if j % 3 == 0 { 1.0 } else { -0.5 })
        });
        let data = Dataset::from_examples(2, 1, examples).unwrap();
        assert!(derp(&data, &params(0.0, 0.5)).unwrap().is_none());
    }

    #[test]
    fn mu_search_floor_of_one() {
        let data = zero_target_data();
        let (found, mu) = derp_mu_search(&data, &params(0.01, 0.25), 1.0, 1)
            .unwrap()
            .unwrap();
        assert_eq!(mu, 1.0);
        assert_eq!(found.matched, 12);
        assert!(derp_mu_search(&data, &params(0.01, 0.25), 0.0, 1).is_err());
    }

    #[test]
    fn candidate_becomes_dense_model() {
        let data = zero_target_data();
        let best = derp(&data, &params(0.01, 0.25)).unwrap().unwrap();
        let model = best.into_model(3, 1, 0.01).unwrap();
        assert_eq!(model.algorithm(), Algorithm::L2);
        assert_eq!(model.rule().support(), &[0, 1]);
        assert_eq!(model.condition().len(), 1);
    }

    #[test]
    fn rejects_invalid_params() {
        let data = zero_target_data();
        assert!(derp(
            &data,
            &DerpParams {
                k: 4,
                ..params(0.1, 0.5)
            }
        )
        .is_err());
        assert!(derp(
            &data,
            &DerpParams {
                norm_bound: 0.0,
                ..params(0.1, 0.5)
            }
        )
        .is_err());
        assert!(derp(&data, &params(0.1, 1.5)).is_err());
        assert!(derp_threaded(&data, &params(0.1, 0.5), 0).is_err());
    }

    #[test]
    fn threads_do_not_change_the_result() {
        let examples = (0..200).map(|j| {
            let x = (j * 7 % 16) as u64;
            let y = vec![(j as f64 * 0.3).sin(), (j as f64 * 0.11).cos(), 0.5];
            let z = if x & 1 == 1 {
                0.4 * y[0] - 0.2 * y[1]
            } else {
                (j as f64).sin()
            };
            Example::new(x, y, z)
        });
        let data = Dataset::from_examples(4, 3, examples).unwrap();
        let p = params(0.05, 0.25);
        assert_eq!(
            derp_threaded(&data, &p, 1).unwrap(),
            derp_threaded(&data, &p, 3).unwrap()
        );
    }
}
