//! k-DNF formulas over boolean attributes.
//!
//! A [`Term`] is a conjunction of literals stored as two bitmasks, one for
//! positive and one for negated attributes. A [`KDnf`] is a canonically
//! ordered set of terms with exactly `k` literals each. Evaluation against a
//! [`Dataset`] works column-wise on packed bits, which is what the
//! elimination loops spend their time on.

use std::fmt;
use std::str::FromStr;

use crate::bitset::BitColumn;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Attribute masks are `u64`, so at most 64 boolean attributes are supported.
pub const MAX_ATTRIBUTES: usize = 64;

/// Upper bound on the number of terms materialized by [`KDnf::trivial`].
pub const MAX_TERMS: u128 = 1 << 26;

/// A conjunction of literals. Ordering is lexicographic on `(pos, neg)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pos: u64,
    neg: u64,
}

impl Term {
    pub fn new(pos: u64, neg: u64) -> Result<Self> {
        if pos & neg != 0 {
            return Err(Error::InvalidTerm(format!(
                "attributes {:?} appear both positive and negated",
                bit_indices(pos & neg)
            )));
        }
        Ok(Self { pos, neg })
    }

    pub fn from_literals(pos: &[usize], neg: &[usize]) -> Result<Self> {
        let mask = |idx: &[usize]| -> Result<u64> {
            idx.iter().try_fold(0u64, |acc, &i| {
                if i >= MAX_ATTRIBUTES {
                    return Err(Error::TooManyAttributes {
                        n: i + 1,
                        max: MAX_ATTRIBUTES,
                    });
                }
                Ok(acc | (1u64 << i))
            })
        };
        Self::new(mask(pos)?, mask(neg)?)
    }

    /// The empty conjunction, true everywhere.
    pub const fn empty() -> Self {
        Self { pos: 0, neg: 0 }
    }

    #[inline]
    pub fn pos(&self) -> u64 {
        self.pos
    }

    #[inline]
    pub fn neg(&self) -> u64 {
        self.neg
    }

    /// Number of literals.
    #[inline]
    pub fn len(&self) -> usize {
        (self.pos.count_ones() + self.neg.count_ones()) as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pos == 0 && self.neg == 0
    }

    pub fn positive_attributes(&self) -> Vec<usize> {
        bit_indices(self.pos)
    }

    pub fn negated_attributes(&self) -> Vec<usize> {
        bit_indices(self.neg)
    }

    /// Union of the attributes mentioned by the term.
    #[inline]
    pub fn attributes(&self) -> u64 {
        self.pos | self.neg
    }

    #[inline]
    pub fn eval(&self, x: u64) -> bool {
        x & self.pos == self.pos && x & self.neg == 0
    }

    /// Examples of `data` satisfying the term, as a packed column.
    pub fn mask<T: Real>(&self, data: &Dataset<T>) -> BitColumn {
        let mut out = BitColumn::ones(data.len());
        for i in bit_indices(self.pos) {
            out.and_assign(data.x_column(i));
        }
        for i in bit_indices(self.neg) {
            out.and_not_assign(data.x_column(i));
        }
        out
    }
}

impl fmt::Display for Term {
    /// Literals joined by `&`, e.g. `x3&!x7`; the empty term prints `true`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("true");
        }
        let mut first = true;
        for i in 0..MAX_ATTRIBUTES {
            let bit = 1u64 << i;
            let negated = if self.pos & bit != 0 {
                false
            } else if self.neg & bit != 0 {
                true
            } else {
                continue;
            };
            if !first {
                f.write_str("&")?;
            }
            first = false;
            write!(f, "{}x{}", if negated { "!" } else { "" }, i)?;
        }
        Ok(())
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "true" {
            return Ok(Term::empty());
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for lit in s.split('&') {
            let lit = lit.trim();
            let (negated, rest) = match lit.strip_prefix('!') {
                Some(rest) => (true, rest.trim_start()),
                None => (false, lit),
            };
            let idx = rest
                .strip_prefix('x')
                .and_then(|digits| digits.parse::<usize>().ok())
                .ok_or_else(|| Error::InvalidTerm(format!("cannot parse literal {lit:?}")))?;
            if negated {
                neg.push(idx);
            } else {
                pos.push(idx);
            }
        }
        Term::from_literals(&pos, &neg)
    }
}

/// Disjunction of exactly-`k` terms over `n` attributes, kept sorted and
/// deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KDnf {
    n: usize,
    k: usize,
    terms: Vec<Term>,
}

impl KDnf {
    pub fn new(n: usize, k: usize, terms: impl IntoIterator<Item = Term>) -> Result<Self> {
        check_shape(n, k)?;
        let limit = attribute_mask(n);
        let mut terms: Vec<Term> = terms.into_iter().collect();
        for t in &terms {
            if t.attributes() & !limit != 0 {
                return Err(Error::InvalidTerm(format!(
                    "{t} mentions attributes beyond n = {n}"
                )));
            }
            if t.len() != k {
                return Err(Error::InvalidTerm(format!(
                    "{t} has {} literals, expected {k}",
                    t.len()
                )));
            }
        }
        terms.sort_unstable();
        terms.dedup();
        Ok(Self { n, k, terms })
    }

    /// The empty disjunction, false everywhere.
    pub fn empty(n: usize, k: usize) -> Result<Self> {
        check_shape(n, k)?;
        Ok(Self {
            n,
            k,
            terms: Vec::new(),
        })
    }

    /// Every non-contradictory term of exactly `k` literals over `n`
    /// attributes: `C(n, k) * 2^k` terms, a tautology for `k <= n`.
    pub fn trivial(n: usize, k: usize) -> Result<Self> {
        check_shape(n, k)?;
        let count = trivial_term_count(n, k);
        if count > MAX_TERMS {
            return Err(Error::TooManyTerms(count));
        }
        let mut terms = Vec::with_capacity(count as usize);
        for subset in Combinations::new(n, k) {
            let attrs: u64 = subset.iter().fold(0, |acc, &i| acc | (1u64 << i));
            // Enumerate every sign assignment over the chosen attributes.
            let mut pos = attrs;
            loop {
                terms.push(Term {
                    pos,
                    neg: attrs & !pos,
                });
                if pos == 0 {
                    break;
                }
                pos = (pos - 1) & attrs;
            }
        }
        terms.sort_unstable();
        Ok(Self { n, k, terms })
    }

    /// Parses `" | "`-separated terms, e.g. `x0&!x2 | x1&x3`; `false` is empty.
    pub fn parse(s: &str, n: usize, k: usize) -> Result<Self> {
        let s = s.trim();
        if s == "false" || s.is_empty() {
            return Self::empty(n, k);
        }
        let terms = s
            .split('|')
            .map(str::parse::<Term>)
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, k, terms)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &Term) -> bool {
        self.terms.binary_search(term).is_ok()
    }

    pub fn is_subset_of(&self, other: &KDnf) -> bool {
        self.terms.iter().all(|t| other.contains(t))
    }

    pub fn eval(&self, x: u64) -> bool {
        self.terms.iter().any(|t| t.eval(x))
    }

    /// Drops every term satisfied by at least one violator.
    pub fn eliminate_terms(&self, violators: &[u64]) -> KDnf {
        let terms = self
            .terms
            .iter()
            .copied()
            .filter(|t| violators.iter().all(|&v| !t.eval(v)))
            .collect();
        KDnf {
            n: self.n,
            k: self.k,
            terms,
        }
    }

    /// Examples of `data` satisfying the formula.
    pub fn coverage_mask<T: Real>(&self, data: &Dataset<T>) -> BitColumn {
        let mut out = BitColumn::zeros(data.len());
        for t in &self.terms {
            out.or_assign(&t.mask(data));
        }
        out
    }

    pub fn coverage_count<T: Real>(&self, data: &Dataset<T>) -> usize {
        self.coverage_mask(data).count_ones()
    }

    pub(crate) fn from_sorted_unchecked(n: usize, k: usize, terms: Vec<Term>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0] < w[1]));
        Self { n, k, terms }
    }
}

impl fmt::Display for KDnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("false");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// `C(n, k) * 2^k`, saturating.
pub fn trivial_term_count(n: usize, k: usize) -> u128 {
    binomial(n as u128, k as u128).saturating_mul(1u128.checked_shl(k as u32).unwrap_or(u128::MAX))
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn check_shape(n: usize, k: usize) -> Result<()> {
    if n > MAX_ATTRIBUTES {
        return Err(Error::TooManyAttributes {
            n,
            max: MAX_ATTRIBUTES,
        });
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    Ok(())
}

fn attribute_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn bit_indices(mut mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

/// Lexicographic `k`-subsets of `0..n`.
#[derive(Clone, Debug)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }

    /// Subsets of `start..n`, lexicographic.
    pub fn starting_at(start: usize, n: usize, k: usize) -> Self {
        Self {
            n,
            current: (start..start + k).collect(),
            done: start + k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
