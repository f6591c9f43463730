//! Find-and-eliminate: conditional sparse regression under the sup norm.
//!
//! For every choice of `s` feature dimensions, `s + 1` signs and `s + 1`
//! examples, the extremal system fixes a candidate rule `a` with tight
//! error `eps'`. Candidates with `eps' <= epsilon` then eliminate every
//! `k`-term satisfied by an example the rule misfits; the first candidate
//! (in canonical order) whose surviving terms cover more than
//! `(1 - gamma/2) * mu * m` examples is returned.
//!
//! Canonical order is dims-major: dimension subsets lexicographic, then
//! sign patterns lexicographic (`-` before `+`), then example subsets
//! lexicographic. Parallel runs split the space into units and keep the
//! canonically first hit, so the result does not depend on the schedule.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashSet;

use crate::bitset::BitColumn;
use crate::data::{Dataset, TaskParams};
use crate::error::{Error, Result};
use crate::kdnf::{binomial, Combinations, KDnf, Term};
use crate::model::{Algorithm, ConditionalModel, SparseLinearRule};
use crate::parallel::with_threads;
use crate::scalar::Real;
use crate::smallsolve::{ExtremalSolver, Sign};

/// Leading constant of the sample-size bound.
pub const SAMPLE_SIZE_CONSTANT: f64 = 6.0;

/// Largest `n^k` accepted by the sample-size bounds.
pub const MAX_TERM_POWER: u128 = 1 << 40;

const SAMPLED_CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateBasis {
    pub dims: Vec<usize>,
    pub signs: Vec<Sign>,
    pub example_ids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport<T> {
    pub model: ConditionalModel<T>,
    pub basis: CandidateBasis,
    pub train_coverage: usize,
    /// One-based canonical position of `basis` in the enumeration.
    pub bases_examined: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SupOutcome<T> {
    Found(FitReport<T>),
    Infeasible { bases_examined: u128 },
}

impl<T> SupOutcome<T> {
    pub fn found(self) -> Option<FitReport<T>> {
        match self {
            SupOutcome::Found(report) => Some(report),
            SupOutcome::Infeasible { .. } => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, SupOutcome::Infeasible { .. })
    }
}

/// Execution knobs that do not change the answer, except `max_bases`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FitOptions {
    pub threads: usize,
    /// When set and the number of example subsets exceeds it, only this many
    /// subsets, drawn uniformly with `seed`, are tried. The statistical
    /// guarantee no longer holds in that mode.
    pub max_bases: Option<u64>,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            max_bases: None,
            seed: 0,
        }
    }
}

/// `ceil(6/(mu*gamma) * (s ln max(s,2) + s ln d + n^k + ln(1/delta)))`.
pub fn sample_size(params: &TaskParams, n: usize, d: usize) -> Result<u64> {
    params.validate()?;
    let s = params.sparsity;
    if s > d {
        return Err(Error::param("sparsity", format!("s = {s} exceeds d = {d}")));
    }
    let power = term_power(n, params.k)?;
    let s_f = s as f64;
    let sparse_part = if s == 0 {
        0.0
    } else {
        s_f * (s.max(2) as f64).ln() + s_f * (d as f64).ln()
    };
    let bracket = sparse_part + power + (1.0 / params.delta).ln();
    let m = (SAMPLE_SIZE_CONSTANT / (params.mu * params.gamma) * bracket).ceil();
    finite_count(m)
}

pub(crate) fn term_power(n: usize, k: usize) -> Result<f64> {
    let power = (n as u128)
        .checked_pow(k as u32)
        .filter(|&p| p <= MAX_TERM_POWER);
    match power {
        Some(p) => Ok(p as f64),
        None => Err(Error::SampleSizeOverflow(format!(
            "n^k = {n}^{k} exceeds 2^40"
        ))),
    }
}

pub(crate) fn finite_count(m: f64) -> Result<u64> {
    if !m.is_finite() || m > u64::MAX as f64 {
        return Err(Error::SampleSizeOverflow(format!(
            "sample size {m} is not representable"
        )));
    }
    Ok((m as u64).max(1))
}

pub fn find_and_eliminate<T: Real>(
    data: &Dataset<T>,
    params: &TaskParams,
) -> Result<SupOutcome<T>> {
    find_and_eliminate_with(data, params, &FitOptions::default())
}

pub fn find_and_eliminate_with<T: Real>(
    data: &Dataset<T>,
    params: &TaskParams,
    options: &FitOptions,
) -> Result<SupOutcome<T>> {
    let search = Search::new(data, params, options)?;
    let total = search.total_bases();
    let units = search.unit_count();
    let hit = with_threads(options.threads, || {
        if options.threads <= 1 {
            (0..units).find_map(|u| search.run_unit(u))
        } else {
            (0..units)
                .into_par_iter()
                .find_map_first(|u| search.run_unit(u))
        }
    });
    let Some(hit) = hit else {
        return Ok(SupOutcome::Infeasible {
            bases_examined: total,
        });
    };
    let condition = KDnf::from_sorted_unchecked(data.n(), params.k, hit.survivors);
    let rule = SparseLinearRule::new(hit.basis.dims.clone(), hit.coeffs)?;
    let model = ConditionalModel::new(
        data.d(),
        condition,
        rule,
        T::lit(params.epsilon),
        Algorithm::SupNorm,
    )?;
    Ok(SupOutcome::Found(FitReport {
        model,
        basis: hit.basis,
        train_coverage: hit.coverage,
        bases_examined: hit.index,
    }))
}

/// Result of a single candidate basis that survived the `eps'` test.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateFit<T> {
    pub condition: KDnf,
    pub rule: SparseLinearRule<T>,
    pub coverage: usize,
}

/// Solves the basis' extremal system and, unless it is singular, has
/// negative `eps'`, or `eps' > epsilon` (all `None`), eliminates terms of
/// the trivial k-DNF against the examples the rule misfits.
pub fn inner_candidate_eval<T: Real>(
    data: &Dataset<T>,
    params: &TaskParams,
    basis: &CandidateBasis,
) -> Result<Option<CandidateFit<T>>> {
    let s = params.sparsity;
    if basis.dims.len() != s || basis.signs.len() != s + 1 || basis.example_ids.len() != s + 1 {
        return Err(Error::param(
            "basis",
            "lengths inconsistent with the sparsity",
        ));
    }
    if basis.dims.iter().any(|&i| i >= data.d())
        || basis.example_ids.iter().any(|&j| j >= data.len())
    {
        return Err(Error::param("basis", "index out of range"));
    }
    let options = FitOptions::default();
    let search = Search::new(data, params, &options)?;
    let mut worker = search.worker();
    if !worker.solve(&search, &basis.dims, &basis.signs, &basis.example_ids) {
        return Ok(None);
    }
    let coeffs = worker.solver.coefficients().to_vec();
    let (survivors, coverage) = search
        .eliminate(&mut worker, &basis.dims, &coeffs, None)
        .expect("no early exit requested");
    Ok(Some(CandidateFit {
        condition: KDnf::from_sorted_unchecked(data.n(), params.k, survivors),
        rule: SparseLinearRule::new(basis.dims.clone(), coeffs)?,
        coverage,
    }))
}

/// Eliminates terms of the trivial k-DNF against every example `rule`
/// misfits by more than `epsilon`; returns the surviving condition and its
/// coverage. The elimination step of the search, for an externally chosen
/// rule.
pub fn eliminate_for_rule<T: Real>(
    data: &Dataset<T>,
    rule: &SparseLinearRule<T>,
    epsilon: T,
    k: usize,
) -> Result<(KDnf, usize)> {
    if rule.min_dimension() > data.d() {
        return Err(Error::DimensionMismatch {
            what: "rule support",
            expected: data.d(),
            found: rule.min_dimension(),
        });
    }
    let trivial = KDnf::trivial(data.n(), k)?;
    let viol = violators(
        data,
        rule.support(),
        rule.coeffs(),
        epsilon + T::residual_slack(),
    );
    let mut cover = BitColumn::zeros(data.len());
    let mut survivors = Vec::new();
    for t in trivial.terms() {
        let mask = t.mask(data);
        if !mask.intersects(&viol) {
            cover.or_assign(&mask);
            survivors.push(*t);
        }
    }
    Ok((
        KDnf::from_sorted_unchecked(data.n(), k, survivors),
        cover.count_ones(),
    ))
}

/// Examples whose residual magnitude exceeds `bound`.
pub fn violators<T: Real>(data: &Dataset<T>, dims: &[usize], coeffs: &[T], bound: T) -> BitColumn {
    let cols: Vec<&[T]> = dims.iter().map(|&i| data.y_column(i)).collect();
    let z = data.targets();
    BitColumn::from_fn(data.len(), |j| {
        let pred = cols
            .iter()
            .zip(coeffs)
            .fold(T::zero(), |acc, (col, &c)| acc + c * col[j]);
        (pred - z[j]).abs() > bound
    })
}

/// Exact minimax (Chebyshev) fit on the given dimensions, by enumerating
/// every basis and keeping the feasible vertex with the smallest `eps'`.
/// `None` when no nonsingular basis is feasible (or `m < s + 1`).
pub fn chebyshev_fit<T: Real>(
    data: &Dataset<T>,
    dims: &[usize],
) -> Option<(SparseLinearRule<T>, T)> {
    let s = dims.len();
    let m = data.len();
    let mut solver = ExtremalSolver::<T>::new(s);
    let mut rows = vec![T::zero(); (s + 1) * s];
    let mut targets = vec![T::zero(); s + 1];
    let mut best: Option<(Vec<T>, T)> = None;
    for pattern in 0..1usize << (s + 1) {
        let signs = Sign::pattern(pattern, s + 1);
        for ids in Combinations::new(m, s + 1) {
            fill_system(data, dims, &ids, &mut rows, &mut targets);
            let Ok(eps) = solver.solve(&rows, &targets, &signs) else {
                continue;
            };
            let a = solver.coefficients();
            let worst = (0..m)
                .map(|j| {
                    let pred = dims
                        .iter()
                        .zip(a)
                        .fold(T::zero(), |acc, (&i, &c)| acc + c * data.y_column(i)[j]);
                    (pred - data.targets()[j]).abs()
                })
                .fold(T::zero(), T::max);
            let feasible = worst <= eps + T::residual_slack() * T::one().max(eps);
            if feasible && best.as_ref().is_none_or(|(_, b)| eps < *b) {
                best = Some((a.to_vec(), eps));
            }
        }
    }
    best.map(|(a, eps)| {
        (
            SparseLinearRule::new(dims.to_vec(), a).expect("finite coefficients on sorted dims"),
            eps,
        )
    })
}

fn fill_system<T: Real>(
    data: &Dataset<T>,
    dims: &[usize],
    ids: &[usize],
    rows: &mut [T],
    targets: &mut [T],
) {
    let s = dims.len();
    for (l, &j) in ids.iter().enumerate() {
        for (i, &dim) in dims.iter().enumerate() {
            rows[l * s + i] = data.y_column(dim)[j];
        }
        targets[l] = data.targets()[j];
    }
}

/// Advances `c` to the next lexicographic subset of `0..n`; false when done.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

enum ExampleTuples {
    Exhaustive,
    Sampled(Vec<Vec<usize>>),
}

struct Hit<T> {
    index: u128,
    basis: CandidateBasis,
    coeffs: Vec<T>,
    survivors: Vec<Term>,
    coverage: usize,
}

struct Search<'a, T> {
    data: &'a Dataset<T>,
    s: usize,
    terms: Vec<Term>,
    masks: Vec<BitColumn>,
    epsilon: T,
    violation_bound: T,
    threshold: f64,
    dim_sets: Vec<Vec<usize>>,
    sign_patterns: Vec<Vec<Sign>>,
    tuples: ExampleTuples,
}

struct Worker<T> {
    solver: ExtremalSolver<T>,
    rows: Vec<T>,
    targets: Vec<T>,
    viol: BitColumn,
    cover: BitColumn,
}

impl<'a, T: Real> Search<'a, T> {
    fn new(data: &'a Dataset<T>, params: &TaskParams, options: &FitOptions) -> Result<Self> {
        params.validate()?;
        if data.is_empty() {
            return Err(Error::param("dataset", "at least one example is required"));
        }
        let s = params.sparsity;
        if s > data.d() {
            return Err(Error::param(
                "sparsity",
                format!("s = {s} exceeds d = {}", data.d()),
            ));
        }
        if options.threads == 0 {
            return Err(Error::param("threads", "must be at least 1"));
        }
        let trivial = KDnf::trivial(data.n(), params.k)?;
        let masks = trivial.terms().iter().map(|t| t.mask(data)).collect();
        let m = data.len();
        let tuple_count = binomial(m as u128, (s + 1) as u128);
        let tuples = match options.max_bases {
            Some(0) => return Err(Error::param("max_bases", "must be at least 1")),
            Some(cap) if tuple_count > cap as u128 => {
                ExampleTuples::Sampled(sample_tuples(m, s + 1, cap as usize, options.seed))
            }
            _ => ExampleTuples::Exhaustive,
        };
        let epsilon = T::lit(params.epsilon);
        Ok(Self {
            data,
            s,
            terms: trivial.terms().to_vec(),
            masks,
            epsilon,
            violation_bound: epsilon + T::residual_slack(),
            threshold: params.coverage_threshold(m),
            dim_sets: Combinations::new(data.d(), s).collect(),
            sign_patterns: (0..1usize << (s + 1))
                .map(|p| Sign::pattern(p, s + 1))
                .collect(),
            tuples,
        })
    }

    fn worker(&self) -> Worker<T> {
        let s = self.s;
        Worker {
            solver: ExtremalSolver::new(s),
            rows: vec![T::zero(); (s + 1) * s],
            targets: vec![T::zero(); s + 1],
            viol: BitColumn::zeros(self.data.len()),
            cover: BitColumn::zeros(self.data.len()),
        }
    }

    fn blocks(&self) -> usize {
        self.dim_sets.len() * self.sign_patterns.len()
    }

    fn tuples_per_block(&self) -> u128 {
        match &self.tuples {
            ExampleTuples::Exhaustive => binomial(self.data.len() as u128, (self.s + 1) as u128),
            ExampleTuples::Sampled(list) => list.len() as u128,
        }
    }

    fn total_bases(&self) -> u128 {
        self.blocks() as u128 * self.tuples_per_block()
    }

    fn units_per_block(&self) -> usize {
        match &self.tuples {
            ExampleTuples::Exhaustive => self.data.len(),
            ExampleTuples::Sampled(list) => list.len().div_ceil(SAMPLED_CHUNK),
        }
    }

    fn unit_count(&self) -> usize {
        self.blocks() * self.units_per_block()
    }

    /// Scans one unit of the canonical order and returns its first hit.
    fn run_unit(&self, unit: usize) -> Option<Hit<T>> {
        let per_block = self.units_per_block();
        let block = unit / per_block;
        let within = unit % per_block;
        let dims = &self.dim_sets[block / self.sign_patterns.len()];
        let signs = &self.sign_patterns[block % self.sign_patterns.len()];
        let block_offset = block as u128 * self.tuples_per_block();
        let mut worker = self.worker();

        match &self.tuples {
            ExampleTuples::Exhaustive => {
                let m = self.data.len();
                let first = within;
                if first + self.s >= m {
                    return None;
                }
                let k = self.s as u128 + 1;
                let mut offset =
                    block_offset + binomial(m as u128, k) - binomial((m - first) as u128, k);
                let mut ids: Vec<usize> = (first..first + self.s + 1).collect();
                loop {
                    offset += 1;
                    if let Some(hit) = self.try_basis(&mut worker, dims, signs, &ids, offset) {
                        return Some(hit);
                    }
                    // Advance the tail while keeping ids[0] fixed.
                    if !next_combination(&mut ids[1..], m) || ids[1] <= first {
                        return None;
                    }
                }
            }
            ExampleTuples::Sampled(list) => {
                let start = within * SAMPLED_CHUNK;
                let end = (start + SAMPLED_CHUNK).min(list.len());
                (start..end).find_map(|t| {
                    self.try_basis(
                        &mut worker,
                        dims,
                        signs,
                        &list[t],
                        block_offset + t as u128 + 1,
                    )
                })
            }
        }
    }

    fn try_basis(
        &self,
        worker: &mut Worker<T>,
        dims: &[usize],
        signs: &[Sign],
        ids: &[usize],
        index: u128,
    ) -> Option<Hit<T>> {
        if !worker.solve(self, dims, signs, ids) {
            return None;
        }
        let coeffs = worker.solver.coefficients().to_vec();
        let max_violators = self.max_violators();
        let (survivors, coverage) = self.eliminate(worker, dims, &coeffs, Some(max_violators))?;
        if (coverage as f64) > self.threshold {
            Some(Hit {
                index,
                basis: CandidateBasis {
                    dims: dims.to_vec(),
                    signs: signs.to_vec(),
                    example_ids: ids.to_vec(),
                },
                coeffs,
                survivors,
                coverage,
            })
        } else {
            None
        }
    }

    /// Coverage is at most `m - |violators|`, so at this many violators the
    /// threshold is out of reach.
    fn max_violators(&self) -> usize {
        let m = self.data.len() as f64;
        let reach = (m - self.threshold).ceil();
        if reach <= 0.0 {
            0
        } else {
            reach as usize
        }
    }

    /// Marks violators, then keeps the terms no violator satisfies. With
    /// `bail_at`, stops early (returning `None`) once that many violators
    /// are found.
    #[allow(clippy::needless_range_loop)]
    fn eliminate(
        &self,
        worker: &mut Worker<T>,
        dims: &[usize],
        coeffs: &[T],
        bail_at: Option<usize>,
    ) -> Option<(Vec<Term>, usize)> {
        let data = self.data;
        let m = data.len();
        let z = data.targets();
        let bound = self.violation_bound;
        let mut count = 0usize;
        {
            let words = worker.viol.words_mut();
            for (w, word) in words.iter_mut().enumerate() {
                let base = w * 64;
                let end = (base + 64).min(m);
                let mut acc = 0u64;
                for j in base..end {
                    let mut pred = T::zero();
                    for (&dim, &c) in dims.iter().zip(coeffs) {
                        pred = pred + c * data.y_column(dim)[j];
                    }
                    acc |= (((pred - z[j]).abs() > bound) as u64) << (j - base);
                }
                *word = acc;
                count += acc.count_ones() as usize;
                if bail_at.is_some_and(|limit| count >= limit) {
                    return None;
                }
            }
        }
        let cover = &mut worker.cover;
        cover.words_mut().iter_mut().for_each(|w| *w = 0);
        let mut survivors = Vec::new();
        for (t, mask) in self.terms.iter().zip(&self.masks) {
            if !mask.intersects(&worker.viol) {
                cover.or_assign(mask);
                survivors.push(*t);
            }
        }
        Some((survivors, cover.count_ones()))
    }
}

impl<T: Real> Worker<T> {
    /// True when the system is nonsingular with `0 <= eps' <= epsilon`.
    fn solve(
        &mut self,
        search: &Search<'_, T>,
        dims: &[usize],
        signs: &[Sign],
        ids: &[usize],
    ) -> bool {
        fill_system(search.data, dims, ids, &mut self.rows, &mut self.targets);
        match self.solver.solve(&self.rows, &self.targets, signs) {
            Ok(eps) => eps <= search.epsilon,
            Err(_) => false,
        }
    }
}

fn sample_tuples(m: usize, size: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(count);
    while seen.len() < count {
        let mut ids = index::sample(&mut rng, m, size).into_vec();
        ids.sort_unstable();
        seen.insert(ids);
    }
    let mut list: Vec<Vec<usize>> = seen.into_iter().collect();
    list.sort_unstable();
    list
}
