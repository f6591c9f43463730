//! Planted-model generators and the labeled-to-regression reduction sampler.
//!
//! Attributes are i.i.d. Bernoulli(p) with `p` tuned so the planted
//! condition holds with probability `mu_target`. All randomness comes from a
//! seeded ChaCha8 stream, so a `(spec, m)` pair always yields the same data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Example};
use crate::error::{Error, Result};
use crate::kdnf::{Combinations, KDnf, Term};
use crate::model::SparseLinearRule;

/// Identifier of the generator behind every synthetic dataset.
pub const RNG_ALGORITHM: &str = "ChaCha8";

/// Largest number of distinct attributes the planted condition may mention
/// (its mass is computed exactly over their truth table).
pub const MAX_CONDITION_ATTRIBUTES: usize = 20;

/// Allowed gap between the empirical and target condition mass.
pub const MASS_TOLERANCE: f64 = 0.05;

const MASS_ATTEMPTS: usize = 64;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub condition: KDnf,
    pub rule: SparseLinearRule<f64>,
    /// Sup-norm noise bound (sup generator) or noise variance (l2 generator)
    /// inside the condition.
    pub epsilon: f64,
    pub mu_target: f64,
    /// Half-width of the uniform target corruption outside the condition.
    pub off_condition_noise: f64,
    /// `B`; only used by the l2 generator.
    pub norm_bound: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.condition.n() != self.n || self.condition.k() != self.k {
            return Err(Error::param(
                "condition",
                "must be a k-DNF over n attributes",
            ));
        }
        if self.rule.min_dimension() > self.d {
            return Err(Error::param("rule", "support exceeds d"));
        }
        if self.rule.sparsity() > self.s {
            return Err(Error::param(
                "rule",
                format!("more than s = {} coefficients", self.s),
            ));
        }
        if !(self.mu_target > 0.0 && self.mu_target <= 1.0) {
            return Err(Error::param("mu_target", "must be in (0, 1]"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::param("epsilon", "must be >= 0"));
        }
        if !(self.off_condition_noise.is_finite() && self.off_condition_noise >= 0.0) {
            return Err(Error::param("off_condition_noise", "must be >= 0"));
        }
        Ok(())
    }
}

/// Generated data plus the provenance needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub dataset: Dataset<f64>,
    pub bernoulli_p: f64,
    pub rng_algorithm: &'static str,
    pub seed: u64,
}

/// Exact `Pr[c(x) = 1]` under i.i.d. Bernoulli(p) attributes.
pub fn condition_mass(condition: &KDnf, p: f64) -> Result<f64> {
    Ok(MassPolynomial::new(condition)?.eval(p))
}

/// Counts of satisfying assignments by weight over the attributes the
/// condition mentions; the remaining attributes marginalize out.
struct MassPolynomial {
    vars: usize,
    counts: Vec<u64>,
}

impl MassPolynomial {
    fn new(condition: &KDnf) -> Result<Self> {
        let used: u64 = condition
            .terms()
            .iter()
            .fold(0, |acc, t| acc | t.attributes());
        let attrs: Vec<usize> = (0..64).filter(|i| used >> i & 1 == 1).collect();
        if attrs.len() > MAX_CONDITION_ATTRIBUTES {
            return Err(Error::param(
                "condition",
                format!(
                    "mentions {} attributes, at most {MAX_CONDITION_ATTRIBUTES} supported",
                    attrs.len()
                ),
            ));
        }
        let vars = attrs.len();
        let mut counts = vec![0u64; vars + 1];
        for assignment in 0u64..1 << vars {
            let x = attrs
                .iter()
                .enumerate()
                .fold(0u64, |acc, (b, &i)| acc | ((assignment >> b & 1) << i));
            if condition.eval(x) {
                counts[assignment.count_ones() as usize] += 1;
            }
        }
        Ok(Self { vars, counts })
    }

    fn eval(&self, p: f64) -> f64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(w, &c)| c as f64 * p.powi(w as i32) * (1.0 - p).powi((self.vars - w) as i32))
            .sum()
    }
}

/// Bernoulli parameter giving the condition mass `target`, found by a grid
/// scan for a bracket followed by bisection.
pub fn tune_bernoulli(condition: &KDnf, target: f64) -> Result<f64> {
    let poly = MassPolynomial::new(condition)?;
    const GRID: usize = 1000;
    let values: Vec<f64> = (0..=GRID)
        .map(|i| poly.eval(i as f64 / GRID as f64))
        .collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    // Prefer p near 1/2 so attributes outside the condition stay informative.
    let mut order: Vec<usize> = (0..GRID).collect();
    order.sort_by_key(|&i| (2 * i + 1).abs_diff(GRID));
    for i in order {
        let (a, b) = (values[i] - target, values[i + 1] - target);
        if a == 0.0 {
            return Ok(i as f64 / GRID as f64);
        }
        if b == 0.0 {
            return Ok((i + 1) as f64 / GRID as f64);
        }
        if a.signum() != b.signum() {
            let (mut left, mut right) = (i as f64 / GRID as f64, (i + 1) as f64 / GRID as f64);
            let left_sign = a.signum();
            for _ in 0..100 {
                let mid = 0.5 * (left + right);
                if (poly.eval(mid) - target).signum() == left_sign {
                    left = mid;
                } else {
                    right = mid;
                }
            }
            return Ok(0.5 * (left + right));
        }
    }
    Err(Error::MuUnreachable { target, lo, hi })
}

fn draw_attributes(rng: &mut ChaCha8Rng, n: usize, p: f64) -> u64 {
    (0..n).fold(0u64, |acc, i| acc | ((rng.random_bool(p) as u64) << i))
}

/// Draws `m` attribute vectors, redrawing the whole batch while the
/// empirical condition mass is off target by more than [`MASS_TOLERANCE`];
/// after a bounded number of attempts the closest batch is kept.
fn draw_batch(
    rng: &mut ChaCha8Rng,
    condition: &KDnf,
    n: usize,
    p: f64,
    target: f64,
    m: usize,
) -> Vec<u64> {
    let mut best: Option<(f64, Vec<u64>)> = None;
    for _ in 0..MASS_ATTEMPTS {
        let xs: Vec<u64> = (0..m).map(|_| draw_attributes(rng, n, p)).collect();
        let hits = xs.iter().filter(|&&x| condition.eval(x)).count();
        let gap = (hits as f64 / m.max(1) as f64 - target).abs();
        if gap <= MASS_TOLERANCE {
            return xs;
        }
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, xs));
        }
    }
    best.map(|(_, xs)| xs).unwrap_or_default()
}

fn uniform_sym(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.random_range(-half_width..=half_width)
    }
}

/// Sup-norm planted data: `y ~ U[-1,1]^d`, `z = <a*, y> + u` with
/// `u ~ U[-epsilon, epsilon]` inside the condition and
/// `u ~ U[-off, off]` outside.
pub fn gen_planted_sup(spec: &PlantedSpec, m: usize) -> Result<Generated> {
    spec.validate()?;
    let p = tune_bernoulli(&spec.condition, spec.mu_target)?;
    let mut rng = rng_from_seed(spec.seed);
    let xs = draw_batch(&mut rng, &spec.condition, spec.n, p, spec.mu_target, m);
    let mut data = Dataset::with_capacity(spec.n, spec.d, m)?;
    let mut y = vec![0.0; spec.d];
    for &x in &xs {
        for v in y.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        let inside = spec.condition.eval(x);
        let noise = uniform_sym(
            &mut rng,
            if inside {
                spec.epsilon
            } else {
                spec.off_condition_noise
            },
        );
        data.push(x, &y, spec.rule.predict(&y) + noise)?;
    }
    Ok(Generated {
        dataset: data,
        bernoulli_p: p,
        rng_algorithm: RNG_ALGORITHM,
        seed: spec.seed,
    })
}

const REJECTION_ATTEMPTS: usize = 10_000;

/// Expected-error planted data: `y ~ U[-B/sqrt(d), B/sqrt(d)]^d` (so
/// `||y|| <= B`), redrawn until `|<a*, y>| <= B`; inside the condition
/// `z = <a*, y> + N(0, epsilon)`, outside `z = <a*, y> + U[-off, off]`, the
/// noise redrawn until `z` lies in `[-B, B]`.
pub fn gen_planted_l2(spec: &PlantedSpec, m: usize) -> Result<Generated> {
    spec.validate()?;
    let bound = spec.norm_bound;
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::param("norm_bound", "must be > 0"));
    }
    if spec.rule.norm() > bound * (1.0 + 1e-12) {
        return Err(Error::GeneratorSelfCheck(format!(
            "planted rule norm {} exceeds B = {bound}",
            spec.rule.norm()
        )));
    }
    let p = tune_bernoulli(&spec.condition, spec.mu_target)?;
    let mut rng = rng_from_seed(spec.seed);
    let xs = draw_batch(&mut rng, &spec.condition, spec.n, p, spec.mu_target, m);
    let gaussian = Normal::new(0.0, spec.epsilon.sqrt())
        .map_err(|e| Error::param("epsilon", e.to_string()))?;
    let half = if spec.d == 0 {
        0.0
    } else {
        bound / (spec.d as f64).sqrt()
    };
    let mut data = Dataset::with_capacity(spec.n, spec.d, m)?;
    let mut y = vec![0.0; spec.d];
    for &x in &xs {
        let mut clean = f64::NAN;
        for _ in 0..REJECTION_ATTEMPTS {
            for v in y.iter_mut() {
                *v = uniform_sym(&mut rng, half);
            }
            clean = spec.rule.predict(&y);
            if clean.abs() <= bound {
                break;
            }
        }
        if !(clean.abs() <= bound) {
            return Err(Error::GeneratorSelfCheck(
                "cannot keep <a*, y> inside [-B, B]".into(),
            ));
        }
        let inside = spec.condition.eval(x);
        let mut z = f64::NAN;
        for _ in 0..REJECTION_ATTEMPTS {
            let noise = if inside {
                gaussian.sample(&mut rng)
            } else {
                uniform_sym(&mut rng, spec.off_condition_noise)
            };
            z = clean + noise;
            if z.abs() <= bound {
                break;
            }
        }
        if !(z.abs() <= bound) {
            return Err(Error::GeneratorSelfCheck(
                "cannot keep z inside [-B, B]".into(),
            ));
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > bound * (1.0 + 1e-12) {
            return Err(Error::GeneratorSelfCheck(format!(
                "||y|| = {norm} exceeds B = {bound}"
            )));
        }
        data.push(x, &y, z)?;
    }
    Ok(Generated {
        dataset: data,
        bernoulli_p: p,
        rng_algorithm: RNG_ALGORITHM,
        seed: spec.seed,
    })
}

/// A random condition of `terms` distinct exactly-`k` terms over `n`
/// attributes and a random rule with support `support` and coefficients of
/// magnitude in `[0.5, 1.5]` with random signs.
pub fn random_planted(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    terms: usize,
    support: &[usize],
) -> Result<(KDnf, SparseLinearRule<f64>)> {
    let all = KDnf::trivial(n, k)?;
    if terms > all.len() {
        return Err(Error::param(
            "terms",
            format!("only {} terms exist", all.len()),
        ));
    }
    let picked = rand::seq::index::sample(rng, all.len(), terms)
        .into_iter()
        .map(|i| all.terms()[i]);
    let condition = KDnf::new(n, k, picked)?;
    let mut dims = support.to_vec();
    dims.sort_unstable();
    let coeffs = dims
        .iter()
        .map(|_| {
            let mag: f64 = rng.random_range(0.5..=1.5);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Ok((condition, SparseLinearRule::new(dims, coeffs)?))
}

/// A uniformly random `s`-subset of `0..d`, sorted.
pub fn random_support(rng: &mut ChaCha8Rng, d: usize, s: usize) -> Vec<usize> {
    let mut dims = rand::seq::index::sample(rng, d, s).into_vec();
    dims.sort_unstable();
    dims
}

/// A labeled example for conditional distribution search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LabeledExample {
    pub x: u64,
    pub b: bool,
}

/// Labeled data with `b = 1` wherever `condition` holds and
/// `b ~ Bernoulli(off_condition_positive_rate)` elsewhere.
pub fn gen_labeled(
    condition: &KDnf,
    mu_target: f64,
    off_condition_positive_rate: f64,
    m: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    if !(0.0..=1.0).contains(&off_condition_positive_rate) {
        return Err(Error::param(
            "off_condition_positive_rate",
            "must be in [0, 1]",
        ));
    }
    let p = tune_bernoulli(condition, mu_target)?;
    let mut rng = rng_from_seed(seed);
    let xs = draw_batch(&mut rng, condition, condition.n(), p, mu_target, m);
    Ok(xs
        .into_iter()
        .map(|x| LabeledExample {
            x,
            b: condition.eval(x) || rng.random_bool(off_condition_positive_rate),
        })
        .collect())
}

/// Maps `(x, 1)` to `(x, y = (1), z = 0)` and `(x, 0)` to
/// `(x, y = (1), z = b')` with `b'` a fair coin.
pub struct ReductionSampler<I> {
    inner: I,
    rng: ChaCha8Rng,
}

pub fn reduction_sampler<I>(labeled: I, seed: u64) -> ReductionSampler<I::IntoIter>
where
    I: IntoIterator<Item = LabeledExample>,
{
    ReductionSampler {
        inner: labeled.into_iter(),
        rng: rng_from_seed(seed),
    }
}

impl<I: Iterator<Item = LabeledExample>> Iterator for ReductionSampler<I> {
    type Item = Example<f64>;

    fn next(&mut self) -> Option<Example<f64>> {
        let ex = self.inner.next()?;
        let z = if ex.b {
            0.0
        } else if self.rng.random_bool(0.5) {
            1.0
        } else {
            0.0
        };
        Some(Example::new(ex.x, vec![1.0], z))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.inner.size_hint()
    }
}

/// Collects the reduced stream into a dataset over `n` attributes, `d = 1`.
pub fn reduce_to_dataset(labeled: &[LabeledExample], n: usize, seed: u64) -> Result<Dataset<f64>> {
    let mut data = Dataset::with_capacity(n, 1, labeled.len())?;
    for ex in reduction_sampler(labeled.iter().copied(), seed) {
        data.push_example(&ex)?;
    }
    Ok(data)
}

/// A random conjunction of exactly `k` literals over `n` attributes.
pub fn random_conjunction(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Result<Term> {
    let subsets: Vec<Vec<usize>> = Combinations::new(n, k).collect();
    if subsets.is_empty() {
        return Err(Error::KExceedsN { k, n });
    }
    let attrs = &subsets[rng.random_range(0..subsets.len())];
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for &i in attrs {
        if rng.random_bool(0.5) {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    Term::from_literals(&pos, &neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(epsilon: f64, off: f64) -> PlantedSpec {
        PlantedSpec {
            n: 6,
            d: 3,
            k: 1,
            s: 2,
            condition: KDnf::parse("x0 | x3", 6, 1).unwrap(),
            rule: SparseLinearRule::new(vec![0, 2], vec![0.8, -1.1]).unwrap(),
            epsilon,
            mu_target: 0.3,
            off_condition_noise: off,
            norm_bound: 2.0,
            seed: 11,
        }
    }

    #[test]
    fn mass_polynomial_matches_closed_form() {
        let c = KDnf::parse("x0 | x3", 6, 1).unwrap();
        for p in [0.0, 0.1, 0.5, 0.9] {
            let expected = 1.0 - (1.0 - p) * (1.0 - p);
            assert!((condition_mass(&c, p).unwrap() - expected).abs() < 1e-12);
        }
        let p = tune_bernoulli(&c, 0.3).unwrap();
        assert!((condition_mass(&c, p).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unreachable_mass_is_reported() {
        let c = KDnf::empty(4, 1).unwrap();
        assert!(matches!(
            tune_bernoulli(&c, 0.3),
            Err(Error::MuUnreachable { .. })
        ));
    }

    #[test]
    fn zero_noise_fits_exactly_inside_condition() {
        let g = gen_planted_sup(&spec(0.0, 1.0), 500).unwrap();
        let data = &g.dataset;
        let mut inside = 0;
        for ex in data.examples() {
            if spec(0.0, 1.0).condition.eval(ex.x) {
                inside += 1;
                assert_eq!(spec(0.0, 1.0).rule.predict(&ex.y), ex.z);
            }
        }
        assert!((inside as f64 / 500.0 - 0.3).abs() <= MASS_TOLERANCE);
        assert_eq!(g.rng_algorithm, "ChaCha8");
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let s = spec(0.05, 1.0);
        assert_eq!(
            gen_planted_sup(&s, 200).unwrap(),
            gen_planted_sup(&s, 200).unwrap()
        );
        let l2 = PlantedSpec {
            rule: SparseLinearRule::dense(vec![0.5, -0.5, 0.25]).unwrap(),
            s: 3,
            ..spec(0.01, 1.0)
        };
        assert_eq!(
            gen_planted_l2(&l2, 200).unwrap(),
            gen_planted_l2(&l2, 200).unwrap()
        );
        let other = PlantedSpec {
            seed: 12,
            ..s.clone()
        };
        assert_ne!(
            gen_planted_sup(&s, 200).unwrap().dataset,
            gen_planted_sup(&other, 200).unwrap().dataset
        );
    }

    #[test]
    fn l2_generator_respects_bounds() {
        let s = PlantedSpec {
            rule: SparseLinearRule::dense(vec![0.5, -0.5, 0.25]).unwrap(),
            s: 3,
            ..spec(0.01, 1.5)
        };
        let g = gen_planted_l2(&s, 2000).unwrap();
        let mut sq = 0.0;
        let mut inside = 0usize;
        for ex in g.dataset.examples() {
            let norm = ex.y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 2.0 * (1.0 + 1e-12));
            assert!(ex.z.abs() <= 2.0);
            if s.condition.eval(ex.x) {
                let r = s.rule.predict(&ex.y) - ex.z;
                sq += r * r;
                inside += 1;
            }
        }
        assert!(sq / inside as f64 <= 2.0 * 0.01);
    }

    #[test]
    fn l2_generator_rejects_oversized_rule() {
        let s = PlantedSpec {
            rule: SparseLinearRule::dense(vec![3.0, 0.0, 0.0]).unwrap(),
            s: 3,
            ..spec(0.01, 1.0)
        };
        assert!(matches!(
            gen_planted_l2(&s, 10),
            Err(Error::GeneratorSelfCheck(_))
        ));
    }

    #[test]
    fn reduction_of_positive_labels() {
        let labeled: Vec<_> = (0..50).map(|x| LabeledExample { x, b: true }).collect();
        for (ex, src) in reduction_sampler(labeled.iter().copied(), 3).zip(&labeled) {
            assert_eq!(ex.x, src.x);
            assert_eq!(ex.y, vec![1.0]);
            assert_eq!(ex.z, 0.0);
        }
    }

    #[test]
    fn reduction_coin_is_fair() {
        let labeled = (0..20_000).map(|x| LabeledExample { x: x % 8, b: false });
        let out: Vec<_> = reduction_sampler(labeled, 9).collect();
        assert_eq!(out.len(), 20_000);
        assert!(out.iter().all(|e| e.z == 0.0 || e.z == 1.0));
        let mean = out.iter().map(|e| e.z).sum::<f64>() / out.len() as f64;
        assert!((mean - 0.5).abs() <= 0.02, "{mean}");
    }

    #[test]
    fn labeled_generator_promise() {
        let c = KDnf::parse("x1&x4", 8, 2).unwrap();
        let data = gen_labeled(&c, 0.3, 0.5, 3000, 5).unwrap();
        assert!(data.iter().filter(|e| c.eval(e.x)).all(|e| e.b));
        let mass = data.iter().filter(|e| c.eval(e.x)).count() as f64 / 3000.0;
        assert!((mass - 0.3).abs() <= MASS_TOLERANCE);
    }

    #[test]
    fn random_planted_shapes() {
        let mut rng = rng_from_seed(1);
        let (c, rule) = random_planted(&mut rng, 8, 1, 2, &[3, 1]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(rule.support(), &[1, 3]);
        assert!(rule.coeffs().iter().all(|a| (0.5..=1.5).contains(&a.abs())));
        let t = random_conjunction(&mut rng, 8, 2).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(random_support(&mut rng, 6, 2).len(), 2);
    }
}
