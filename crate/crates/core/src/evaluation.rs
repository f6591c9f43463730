//! Held-out measurement of coverage, conditional sup-norm hit rate and
//! conditional mean squared error.
//!
//! Sums run over examples in ascending index order with plain accumulation,
//! so a report is bit-reproducible for a given model and dataset.

use std::fmt;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kdnf::KDnf;
use crate::model::ConditionalModel;
use crate::scalar::Real;
use crate::synthetic::LabeledExample;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub m: usize,
    pub epsilon: f64,
    pub coverage: f64,
    pub sup_hit_rate: f64,
    pub cond_mse: f64,
    pub n_conditioned: usize,
}

impl EvalReport {
    /// Flat `key=value` block, one entry per line.
    pub fn to_kv(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "m={}", self.m)?;
        writeln!(f, "epsilon={}", self.epsilon)?;
        writeln!(f, "n_conditioned={}", self.n_conditioned)?;
        writeln!(f, "coverage={}", self.coverage)?;
        writeln!(f, "sup_hit_rate={}", self.sup_hit_rate)?;
        writeln!(f, "cond_mse={}", self.cond_mse)
    }
}

pub fn evaluate<T: Real>(
    model: &ConditionalModel<T>,
    data: &Dataset<T>,
    epsilon: T,
) -> Result<EvalReport> {
    if model.n() != data.n() {
        return Err(Error::DimensionMismatch {
            what: "attributes",
            expected: model.n(),
            found: data.n(),
        });
    }
    if model.d() != data.d() {
        return Err(Error::DimensionMismatch {
            what: "features",
            expected: model.d(),
            found: data.d(),
        });
    }
    if !(epsilon.is_finite() && epsilon >= T::zero()) {
        return Err(Error::param("epsilon", "must be finite and >= 0"));
    }
    let mask = model.condition().coverage_mask(data);
    let rule = model.rule();
    let cols: Vec<&[T]> = rule.support().iter().map(|&i| data.y_column(i)).collect();
    let z = data.targets();
    let mut conditioned = 0usize;
    let mut hits = 0usize;
    let mut sq = T::zero();
    for j in mask.iter_ones() {
        let pred = rule
            .coeffs()
            .iter()
            .zip(&cols)
            .fold(T::zero(), |acc, (&a, col)| acc + a * col[j]);
        let r = pred - z[j];
        conditioned += 1;
        if r.abs() <= epsilon {
            hits += 1;
        }
        sq = sq + r * r;
    }
    if conditioned == 0 {
        return Err(Error::EmptyConditioned);
    }
    Ok(EvalReport {
        m: data.len(),
        epsilon: epsilon.as_f64(),
        coverage: conditioned as f64 / data.len() as f64,
        sup_hit_rate: hits as f64 / conditioned as f64,
        cond_mse: sq.as_f64() / conditioned as f64,
        n_conditioned: conditioned,
    })
}

/// Conditional label rate on labeled data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelReport {
    pub m: usize,
    pub coverage: f64,
    /// Empirical `Pr[b = 1 | c(x) = 1]`.
    pub positive_rate: f64,
    pub n_conditioned: usize,
}

impl fmt::Display for LabelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "m={}", self.m)?;
        writeln!(f, "n_conditioned={}", self.n_conditioned)?;
        writeln!(f, "coverage={}", self.coverage)?;
        writeln!(f, "positive_rate={}", self.positive_rate)
    }
}

pub fn evaluate_labeled(condition: &KDnf, data: &[LabeledExample]) -> Result<LabelReport> {
    let mut conditioned = 0usize;
    let mut positive = 0usize;
    for ex in data {
        if condition.eval(ex.x) {
            conditioned += 1;
            positive += ex.b as usize;
        }
    }
    if conditioned == 0 {
        return Err(Error::EmptyConditioned);
    }
    Ok(LabelReport {
        m: data.len(),
        coverage: conditioned as f64 / data.len() as f64,
        positive_rate: positive as f64 / conditioned as f64,
        n_conditioned: conditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Algorithm, SparseLinearRule};

    fn data() -> Dataset<f64> {
        let mut d = Dataset::new(2, 2).unwrap();
        for j in 0..8u64 {
            let y = [j as f64, 1.0];
            d.push(
                j % 4,
                &y,
                2.0 * j as f64 + if j % 4 == 3 { 0.5 } else { 0.0 },
            )
            .unwrap();
        }
        d
    }

    fn model(condition: KDnf) -> ConditionalModel<f64> {
        let rule = SparseLinearRule::new(vec![0], vec![2.0]).unwrap();
        ConditionalModel::new(2, condition, rule, 0.1, Algorithm::SupNorm).unwrap()
    }

    #[test]
    fn trivial_condition_exact_rule() {
        let mut d = Dataset::new(2, 2).unwrap();
        for j in 0..4u64 {
            d.push(j, &[j as f64, 0.0], 2.0 * j as f64).unwrap();
        }
        let r = evaluate(&model(KDnf::trivial(2, 1).unwrap()), &d, 0.1).unwrap();
        assert_eq!(
            (r.coverage, r.sup_hit_rate, r.cond_mse, r.n_conditioned),
            (1.0, 1.0, 0.0, 4)
        );
    }

    #[test]
    fn empty_condition_is_an_error() {
        let err = evaluate(&model(KDnf::empty(2, 1).unwrap()), &data(), 0.1);
        assert!(matches!(err, Err(Error::EmptyConditioned)));
    }

    #[test]
    fn partial_fit_counts() {
        // x0 holds for x in {1, 3}; the x = 3 examples are off by 0.5.
        let r = evaluate(&model(KDnf::parse("x0", 2, 1).unwrap()), &data(), 0.1).unwrap();
        assert_eq!(r.n_conditioned, 4);
        assert_eq!(r.coverage, 0.5);
        assert_eq!(r.sup_hit_rate, 0.5);
        assert_eq!(r.cond_mse, 0.125);
        assert_eq!(r.coverage * r.m as f64, r.n_conditioned as f64);
        let text = r.to_kv();
        assert!(text.contains("sup_hit_rate=0.5\n") && text.contains("n_conditioned=4\n"));
    }

    #[test]
    fn dimension_mismatch() {
        let d = Dataset::<f64>::new(3, 2).unwrap();
        assert!(matches!(
            evaluate(&model(KDnf::trivial(2, 1).unwrap()), &d, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn labeled_rate() {
        let c = KDnf::parse("x0", 2, 1).unwrap();
        let data = [
            LabeledExample { x: 1, b: true },
            LabeledExample { x: 1, b: false },
            LabeledExample { x: 0, b: true },
            LabeledExample { x: 3, b: true },
        ];
        let r = evaluate_labeled(&c, &data).unwrap();
        assert_eq!(r.n_conditioned, 3);
        assert!((r.positive_rate - 2.0 / 3.0).abs() < 1e-15);
    }
}
