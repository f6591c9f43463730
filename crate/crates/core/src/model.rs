//! Linear rules, conditional models, and the model file format.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Error, Result};
use crate::kdnf::{KDnf, Term};
use crate::scalar::Real;

/// Linear predictor `<a, y>` stored as sorted support indices and aligned
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseLinearRule<T> {
    support: Vec<usize>,
    coeffs: Vec<T>,
}

impl<T: Real> SparseLinearRule<T> {
    pub fn new(support: Vec<usize>, coeffs: Vec<T>) -> Result<Self> {
        if support.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                what: "rule coefficients",
                expected: support.len(),
                found: coeffs.len(),
            });
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "support",
                "indices must be strictly increasing",
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("rule coefficients"));
        }
        Ok(Self { support, coeffs })
    }

    /// Rule over every feature `0..coeffs.len()`.
    pub fn dense(coeffs: Vec<T>) -> Result<Self> {
        Self::new((0..coeffs.len()).collect(), coeffs)
    }

    pub fn zero() -> Self {
        Self {
            support: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    #[inline]
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Number of stored coefficients.
    #[inline]
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Smallest feature count the rule is compatible with.
    pub fn min_dimension(&self) -> usize {
        self.support.last().map_or(0, |&i| i + 1)
    }

    /// `<a, y>`, summed in support order.
    #[inline]
    pub fn predict(&self, y: &[T]) -> T {
        self.support
            .iter()
            .zip(&self.coeffs)
            .fold(T::zero(), |acc, (&i, &c)| acc + c * y[i])
    }

    pub fn to_dense(&self, d: usize) -> Vec<T> {
        let mut out = vec![T::zero(); d];
        for (&i, &c) in self.support.iter().zip(&self.coeffs) {
            out[i] = c;
        }
        out
    }

    pub fn norm(&self) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, &c| acc + c * c)
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "sup-norm")]
    SupNorm,
    #[serde(rename = "l2")]
    L2,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::SupNorm => "sup-norm",
            Algorithm::L2 => "l2",
        })
    }
}

/// A condition together with the rule that is trusted where it holds.
///
/// Outside the condition the model abstains.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalModel<T> {
    d: usize,
    condition: KDnf,
    rule: SparseLinearRule<T>,
    epsilon: T,
    algorithm: Algorithm,
}

impl<T: Real> ConditionalModel<T> {
    pub fn new(
        d: usize,
        condition: KDnf,
        rule: SparseLinearRule<T>,
        epsilon: T,
        algorithm: Algorithm,
    ) -> Result<Self> {
        if rule.min_dimension() > d {
            return Err(Error::DimensionMismatch {
                what: "rule support",
                expected: d,
                found: rule.min_dimension(),
            });
        }
        if !epsilon.is_finite() || epsilon < T::zero() {
            return Err(Error::param("epsilon", "must be finite and non-negative"));
        }
        Ok(Self {
            d,
            condition,
            rule,
            epsilon,
            algorithm,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.condition.n()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn condition(&self) -> &KDnf {
        &self.condition
    }

    #[inline]
    pub fn rule(&self) -> &SparseLinearRule<T> {
        &self.rule
    }

    #[inline]
    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    #[inline]
    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// `Some(<a, y>)` where the condition holds, `None` (abstain) elsewhere.
    pub fn predict(&self, example: &Example<T>) -> Result<Option<T>> {
        example.check(self.n(), self.d)?;
        Ok(self
            .condition
            .eval(example.x)
            .then(|| self.rule.predict(&example.y)))
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            n: self.n(),
            d: self.d,
            k: self.condition.k(),
            epsilon: self.epsilon.as_f64(),
            algorithm: self.algorithm,
            terms: self
                .condition
                .terms()
                .iter()
                .map(|t| TermFile {
                    pos: t.positive_attributes(),
                    neg: t.negated_attributes(),
                })
                .collect(),
            support: self.rule.support().to_vec(),
            coeffs: self.rule.coeffs().iter().map(|c| c.as_f64()).collect(),
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        let terms = file
            .terms
            .iter()
            .map(|t| Term::from_literals(&t.pos, &t.neg))
            .collect::<Result<Vec<_>>>()?;
        let condition = KDnf::new(file.n, file.k, terms)?;
        let rule = SparseLinearRule::new(
            file.support.clone(),
            file.coeffs.iter().map(|&c| T::lit(c)).collect(),
        )?;
        Self::new(
            file.d,
            condition,
            rule,
            T::lit(file.epsilon),
            file.algorithm,
        )
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("model file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s).map_err(|e| Error::Model(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn read_json<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json(&s)
    }
}

/// On-disk model layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    pub algorithm: Algorithm,
    pub terms: Vec<TermFile>,
    pub support: Vec<usize>,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model(condition: KDnf) -> ConditionalModel<f64> {
        let rule = SparseLinearRule::new(vec![0], vec![1.0]).unwrap();
        ConditionalModel::new(2, condition, rule, 0.1, Algorithm::SupNorm).unwrap()
    }

    #[test]
    fn predict_inside_and_outside_condition() {
        let model = identity_model(KDnf::trivial(3, 1).unwrap());
        let ex = Example::new(0b101, vec![3.0, -7.0], 0.0);
        assert_eq!(model.predict(&ex).unwrap(), Some(3.0));

        let model = identity_model(KDnf::empty(3, 1).unwrap());
        assert_eq!(model.predict(&ex).unwrap(), None);
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let model = identity_model(KDnf::trivial(3, 1).unwrap());
        assert!(model.predict(&Example::new(0b1, vec![1.0], 0.0)).is_err());
        assert!(model
            .predict(&Example::new(0b1000, vec![1.0, 2.0], 0.0))
            .is_err());
    }

    #[test]
    fn rule_validation() {
        assert!(SparseLinearRule::new(vec![1, 0], vec![1.0, 2.0]).is_err());
        assert!(SparseLinearRule::new(vec![0, 0], vec![1.0, 2.0]).is_err());
        assert!(SparseLinearRule::new(vec![0], vec![1.0f64, 2.0]).is_err());
        assert!(SparseLinearRule::new(vec![0], vec![f64::INFINITY]).is_err());
        let rule = SparseLinearRule::new(vec![1, 3], vec![2.0, -1.0]).unwrap();
        assert_eq!(rule.predict(&[9.0, 1.5, 9.0, 4.0]), -1.0);
        assert_eq!(rule.to_dense(4), vec![0.0, 2.0, 0.0, -1.0]);
        assert_eq!(rule.min_dimension(), 4);
        let model = ConditionalModel::new(3, KDnf::empty(1, 1).unwrap(), rule, 0.0, Algorithm::L2);
        assert!(model.is_err());
    }

    #[test]
    fn json_layout() {
        let condition = KDnf::parse("x0&!x2 | x1&x2", 3, 2).unwrap();
        let rule = SparseLinearRule::new(vec![1], vec![0.1 + 0.2]).unwrap();
        let model = ConditionalModel::new(2, condition, rule, 0.05, Algorithm::SupNorm).unwrap();
        let json = model.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["algorithm"], "sup-norm");
        assert_eq!(value["terms"][0]["pos"], serde_json::json!([0]));
        assert_eq!(value["terms"][0]["neg"], serde_json::json!([2]));
        assert_eq!(value["support"], serde_json::json!([1]));
        let back = ConditionalModel::<f64>::from_json(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.rule().coeffs()[0].to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn json_rejects_unknown_and_invalid() {
        let bad = r#"{"n":2,"d":1,"k":1,"epsilon":0.1,"algorithm":"l2","terms":[{"pos":[0],"neg":[0]}],"support":[],"coeffs":[]}"#;
        assert!(ConditionalModel::<f64>::from_json(bad).is_err());
        let extra = r#"{"n":2,"d":1,"k":1,"epsilon":0.1,"algorithm":"l2","terms":[],"support":[],"coeffs":[],"x":1}"#;
        assert!(ConditionalModel::<f64>::from_json(extra).is_err());
        let algo = r#"{"n":2,"d":1,"k":1,"epsilon":0.1,"algorithm":"huber","terms":[],"support":[],"coeffs":[]}"#;
        assert!(ConditionalModel::<f64>::from_json(algo).is_err());
    }
}
