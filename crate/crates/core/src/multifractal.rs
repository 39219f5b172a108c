//! Finite-depth pressure of the transfer-matrix cocycle and the multifractal
//! bounds built on it.
//!
//! For words `x ∈ Σ_σ^k` (alphabet `{0,1,2}` at base-3 levels, `{0,1,2,3}` at
//! base-4 levels) and `A_x = A_{σ_1}^{x_1} ⋯ A_{σ_k}^{x_k}`:
//!
//! * raw pressure `P̂(q,k) = (1/k) log Σ_x ‖A_x‖^q`,
//! * normalized pressure `P̃(q,k) = log Σ_x ‖A_x‖^q / (n_0(k) log 3 + n_1(k) log 4)`,
//!
//! so that `P̃(0,k) = 1` and `P̃(1,k) → dim F_σ`. Words with `‖A_x‖ = 0`
//! contribute nothing for `q ≠ 0`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{CheckedAdd, CheckedMul, One, Zero};
use rayon::prelude::*;

use crate::carpet::{carpet_dimension, MoranSequence};
use crate::error::{Error, Result};
use crate::scalar::{ln_biguint, ln_count, real, Real};
use crate::slicing::Slope;
use crate::transfer::{CountMatrix, TransferSet};

/// Default cap on enumerated words, `3^{n_0(k)} 4^{n_1(k)}`.
pub const DEFAULT_WORD_BUDGET: u128 = 20_000_000;

/// A word `x_1 … x_n` over the level alphabets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SymbolWord(pub Vec<u8>);

impl SymbolWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, sigma: &MoranSequence) -> Result<()> {
        for (i, &x) in self.0.iter().enumerate() {
            let base = sigma.tag(i + 1).base();
            if x >= base {
                return Err(Error::InvalidSymbol {
                    position: i + 1,
                    symbol: x,
                    base,
                });
            }
        }
        Ok(())
    }

    /// `‖A_x‖` for the whole word, exact.
    pub fn norm(&self, sigma: &MoranSequence, set: &TransferSet) -> Result<BigUint> {
        self.validate(sigma)?;
        let product = self
            .0
            .iter()
            .enumerate()
            .fold(CountMatrix::identity(set.order()), |acc, (i, &x)| {
                acc.mul_transfer(set.get(sigma.tag(i + 1), x))
            });
        Ok(product.norm())
    }
}

impl std::str::FromStr for SymbolWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                c.to_digit(10)
                    .filter(|d| *d < 4)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::parse("symbol word", s, "expected digits 0-3"))
            })
            .collect::<Result<Vec<_>>>()
            .map(SymbolWord)
    }
}

fn check_budget(sigma: &MoranSequence, k: usize, budget: u128) -> Result<()> {
    let words = sigma.word_count(k);
    if words > BigUint::from(budget) {
        return Err(Error::BudgetExceeded {
            what: "words",
            needed: words.try_into().unwrap_or(u128::MAX),
            budget,
        });
    }
    Ok(())
}

/// Accumulator for exact word norms.
trait Tally: Clone + Ord + Send + Sync + Zero + One + CheckedMul + CheckedAdd {
    fn from_entry(e: u32) -> Self;
    fn into_big(self) -> BigUint;
}

impl Tally for u128 {
    fn from_entry(e: u32) -> Self {
        e as u128
    }

    fn into_big(self) -> BigUint {
        BigUint::from(self)
    }
}

impl Tally for BigUint {
    fn from_entry(e: u32) -> Self {
        BigUint::from(e)
    }

    fn into_big(self) -> BigUint {
        self
    }
}

struct Walker<'a, T> {
    sigma: &'a MoranSequence,
    set: &'a TransferSet,
    depth: usize,
    /// Transfer entries lifted into the accumulator type, per tag and label.
    lifted: [Vec<Vec<T>>; 2],
}

impl<'a, T: Tally> Walker<'a, T> {
    fn new(sigma: &'a MoranSequence, set: &'a TransferSet, depth: usize) -> Self {
        use crate::carpet::LevelTag;
        let lift = |tag| {
            set.for_tag(tag)
                .iter()
                .map(|m| m.rows().flatten().map(|&e| T::from_entry(e)).collect())
                .collect()
        };
        Walker {
            sigma,
            set,
            depth,
            lifted: [lift(LevelTag::Zero), lift(LevelTag::One)],
        }
    }

    fn step(&self, prefix: &[T], level: usize, label: u8) -> Option<Vec<T>> {
        let n = self.set.order();
        let rhs = &self.lifted[self.sigma.tag(level).bit() as usize][label as usize];
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &prefix[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &rhs[k * n + j];
                    if !b.is_zero() {
                        let term = a.checked_mul(b)?;
                        out[i * n + j] = out[i * n + j].checked_add(&term)?;
                    }
                }
            }
        }
        Some(out)
    }

    fn walk(&self, prefix: Vec<T>, level: usize, tally: &mut BTreeMap<T, u64>) -> Option<()> {
        if level > self.depth {
            let norm = prefix
                .into_iter()
                .try_fold(T::zero(), |acc, e| acc.checked_add(&e))?;
            *tally.entry(norm).or_insert(0) += 1;
            return Some(());
        }
        for label in 0..self.sigma.tag(level).base() {
            let next = self.step(&prefix, level, label)?;
            self.walk(next, level + 1, tally)?;
        }
        Some(())
    }

    /// Walks the word tree, splitting the top two levels across threads.
    fn run(&self) -> Option<BTreeMap<T, u64>> {
        let n = self.set.order();
        let mut identity = vec![T::zero(); n * n];
        for i in 0..n {
            identity[i * n + i] = T::one();
        }
        let split = self.depth.min(2);
        let mut roots = vec![(identity, 1usize)];
        for _ in 0..split {
            let mut next = Vec::new();
            for (m, level) in roots {
                for label in 0..self.sigma.tag(level).base() {
                    next.push((self.step(&m, level, label)?, level + 1));
                }
            }
            roots = next;
        }
        let parts: Vec<Option<BTreeMap<T, u64>>> = roots
            .into_par_iter()
            .map(|(m, level)| {
                let mut tally = BTreeMap::new();
                self.walk(m, level, &mut tally).map(|_| tally)
            })
            .collect();
        let mut merged = BTreeMap::new();
        for part in parts {
            for (norm, count) in part? {
                *merged.entry(norm).or_insert(0) += count;
            }
        }
        Some(merged)
    }
}

/// Multiset of exact norms `‖A_x‖` over all words of one length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormDistribution {
    pub depth: usize,
    /// `(norm, multiplicity)`, ascending by norm.
    pub entries: Vec<(BigUint, u64)>,
}

impl NormDistribution {
    pub fn compute(
        sigma: &MoranSequence,
        set: &TransferSet,
        depth: usize,
        word_budget: u128,
    ) -> Result<Self> {
        check_budget(sigma, depth, word_budget)?;
        let entries = match Walker::<u128>::new(sigma, set, depth).run() {
            Some(map) => map.into_iter().map(|(n, c)| (n.into_big(), c)).collect(),
            None => Walker::<BigUint>::new(sigma, set, depth)
                .run()
                .expect("BigUint arithmetic does not overflow")
                .into_iter()
                .collect(),
        };
        Ok(NormDistribution { depth, entries })
    }

    pub fn word_count(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    /// `Σ_x ‖A_x‖`, exact.
    pub fn norm_sum(&self) -> BigUint {
        self.entries.iter().map(|(n, c)| n * *c).sum()
    }

    /// `log Σ_x ‖A_x‖^q`, summed in ascending-norm order.
    pub fn log_power_sum<F: Real>(&self, q: F) -> F {
        if q.is_zero() {
            return real::<F>(self.word_count() as f64).ln();
        }
        let terms: Vec<F> = self
            .entries
            .iter()
            .filter(|(n, _)| !n.is_zero())
            .map(|(n, c)| real::<F>(*c as f64).ln() + q * ln_count::<F>(n))
            .collect();
        log_sum_exp(&terms)
    }
}

fn log_sum_exp<F: Real>(terms: &[F]) -> F {
    let max = terms.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let sum = terms.iter().fold(F::zero(), |acc, &t| acc + (t - max).exp());
    max + sum.ln()
}

/// `‖∏_i Σ_j A_{σ_i}^j‖ = Σ_x ‖A_x‖`, valid at any depth.
pub fn norm_sum_fast(sigma: &MoranSequence, set: &TransferSet, depth: usize) -> BigUint {
    let sums = [
        set.label_sum(crate::carpet::LevelTag::Zero),
        set.label_sum(crate::carpet::LevelTag::One),
    ];
    sigma
        .tags(depth)
        .fold(CountMatrix::identity(set.order()), |acc, tag| {
            acc.mul(&sums[tag.bit() as usize])
        })
        .norm()
}

/// One point of the pressure curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureValue<F> {
    pub q: F,
    pub depth: usize,
    /// `(1/k) log Σ ‖A_x‖^q`.
    pub raw: F,
    /// Raw pressure divided by `(n_0(k) log 3 + n_1(k) log 4) / k`.
    pub normalized: F,
}

/// Pressure sampled on a `q` grid at a fixed depth.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureCurve<F> {
    pub depth: usize,
    pub points: Vec<PressureValue<F>>,
}

impl<F: Real> PressureCurve<F> {
    /// `q = 0` and `q = 1` use closed forms; any other `q` enumerates every
    /// word once, shared across the grid.
    pub fn compute(
        qs: &[F],
        sigma: &MoranSequence,
        slope: &Slope,
        depth: usize,
        word_budget: u128,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("pressure depth must be at least 1".into()));
        }
        let set = TransferSet::semantic(slope);
        let log_scale = sigma.log_scale::<F>(depth);
        let k = real::<F>(depth as f64);
        let needs_words = qs.iter().any(|q| !q.is_zero() && !q.is_one());
        let dist = if needs_words {
            Some(NormDistribution::compute(sigma, &set, depth, word_budget)?)
        } else {
            None
        };
        let points = qs
            .iter()
            .map(|&q| {
                if q.is_zero() {
                    return PressureValue {
                        q,
                        depth,
                        raw: log_scale / k,
                        normalized: F::one(),
                    };
                }
                let log_sum = match &dist {
                    Some(d) if !q.is_one() => d.log_power_sum(q),
                    _ => real::<F>(ln_biguint(&norm_sum_fast(sigma, &set, depth))),
                };
                PressureValue {
                    q,
                    depth,
                    raw: log_sum / k,
                    normalized: log_sum / log_scale,
                }
            })
            .collect();
        Ok(PressureCurve { depth, points })
    }

    /// `min_q { -q α + P̃(q,k) }` over the grid, with the minimizing `q`.
    pub fn upper_bound(&self, alpha: F) -> Result<(F, F)> {
        self.points
            .iter()
            .map(|p| (p.normalized - p.q * alpha, p.q))
            .fold(None, |best: Option<(F, F)>, cand| match best {
                Some(b) if b.0 <= cand.0 => Some(b),
                _ => Some(cand),
            })
            .ok_or_else(|| Error::InvalidArgument("q grid is empty".into()))
    }
}

/// `(raw, normalized)` pressure at one `q`.
pub fn pressure_estimate<F: Real>(
    q: F,
    sigma: &MoranSequence,
    slope: &Slope,
    depth: usize,
    word_budget: u128,
) -> Result<PressureValue<F>> {
    Ok(PressureCurve::compute(&[q], sigma, slope, depth, word_budget)?.points[0])
}

/// `(1/k) log ‖A_{x_1 … x_k}‖` for the first `k` symbols of `word`.
pub fn lyapunov_estimate<F: Real>(
    word: &SymbolWord,
    sigma: &MoranSequence,
    slope: &Slope,
    k: usize,
) -> Result<F> {
    if k == 0 || word.len() < k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= word length {}, got {k}",
            word.len()
        )));
    }
    let prefix = SymbolWord(word.0[..k].to_vec());
    let norm = prefix.norm(sigma, &TransferSet::semantic(slope))?;
    Ok(ln_count::<F>(&norm) / real::<F>(k as f64))
}

/// The probability weights `‖A_x‖^q / Σ_ω ‖A_ω‖^q` on cylinders of one length.
#[derive(Debug, Clone)]
pub struct CylinderMeasure<F> {
    q: F,
    depth: usize,
    sigma: MoranSequence,
    set: TransferSet,
    log_normalizer: F,
    word_count: BigUint,
}

impl<F: Real> CylinderMeasure<F> {
    pub fn new(
        q: F,
        sigma: &MoranSequence,
        slope: &Slope,
        depth: usize,
        word_budget: u128,
    ) -> Result<Self> {
        let set = TransferSet::semantic(slope);
        let log_normalizer = if q.is_zero() {
            F::zero()
        } else {
            NormDistribution::compute(sigma, &set, depth, word_budget)?.log_power_sum(q)
        };
        Ok(CylinderMeasure {
            q,
            depth,
            sigma: sigma.clone(),
            set,
            log_normalizer,
            word_count: sigma.word_count(depth),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn measure(&self, word: &SymbolWord) -> Result<F> {
        if word.len() != self.depth {
            return Err(Error::InvalidArgument(format!(
                "cylinder word has length {}, measure is on length {}",
                word.len(),
                self.depth
            )));
        }
        word.validate(&self.sigma)?;
        if self.q.is_zero() {
            return Ok(F::one() / real::<F>(ln_biguint(&self.word_count).exp()));
        }
        let norm = word.norm(&self.sigma, &self.set)?;
        if norm.is_zero() {
            return Ok(F::zero());
        }
        Ok((self.q * ln_count::<F>(&norm) - self.log_normalizer).exp())
    }
}

/// `μ_q([word])` computed from scratch.
pub fn cylinder_measure<F: Real>(
    word: &SymbolWord,
    q: F,
    sigma: &MoranSequence,
    slope: &Slope,
    word_budget: u128,
) -> Result<F> {
    CylinderMeasure::new(q, sigma, slope, word.len(), word_budget)?.measure(word)
}

/// Every symbol word of length `n`, lexicographic.
pub fn all_symbol_words(sigma: &MoranSequence, n: usize) -> Vec<SymbolWord> {
    let mut out = vec![SymbolWord::default()];
    for i in 1..=n {
        let base = sigma.tag(i).base();
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..base).map(move |x| {
                    let mut v = w.0.clone();
                    v.push(x);
                    SymbolWord(v)
                })
            })
            .collect();
    }
    out
}

/// Upper bound `min_{q ∈ grid} { -q α + P̃(q,k) }` on the dimension of the
/// intercepts whose slice has box dimension `α`, together with the minimizing
/// `q`. Meaningful only where that box dimension exists.
pub fn spectrum_upper_bound<F: Real>(
    alpha: F,
    sigma: &MoranSequence,
    slope: &Slope,
    depth: usize,
    q_grid: &[F],
    word_budget: u128,
) -> Result<(F, F)> {
    if q_grid.is_empty() {
        return Err(Error::InvalidArgument("q grid is empty".into()));
    }
    PressureCurve::compute(q_grid, sigma, slope, depth, word_budget)?.upper_bound(alpha)
}

/// One grid point of the chord comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordPoint<F> {
    pub q: F,
    pub normalized: F,
    /// `P̃(q,k) - ((s-1) q + 1)`; negative below the chord.
    pub margin: F,
}

/// Chord comparison of the normalized pressure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSearch<F> {
    /// Carpet dimension `s`.
    pub dimension: F,
    pub points: Vec<ChordPoint<F>>,
}

impl<F: Real> WitnessSearch<F> {
    /// The grid point with the most negative margin, if any margin is
    /// negative.
    pub fn witness(&self) -> Option<ChordPoint<F>> {
        self.points
            .iter()
            .copied()
            .filter(|p| p.margin < F::zero())
            .fold(None, |best: Option<ChordPoint<F>>, p| match best {
                Some(b) if b.margin <= p.margin => Some(b),
                _ => Some(p),
            })
    }
}

/// Looks for `q' ∈ [0,1]` with `P̃(q',k) < (s-1) q' + 1`, which certifies
/// that intercepts with slice dimension `s - 1` form a set of dimension
/// below one.
pub fn chord_witness<F: Real>(
    sigma: &MoranSequence,
    slope: &Slope,
    depth: usize,
    q_grid: &[F],
    word_budget: u128,
) -> Result<WitnessSearch<F>> {
    if q_grid.is_empty() || q_grid.iter().any(|q| *q < F::zero() || *q > F::one()) {
        return Err(Error::InvalidArgument(
            "witness grid must be nonempty and inside [0, 1]".into(),
        ));
    }
    let s = carpet_dimension::<F>(sigma);
    let curve = PressureCurve::compute(q_grid, sigma, slope, depth, word_budget)?;
    let points = curve
        .points
        .iter()
        .map(|p| ChordPoint {
            q: p.q,
            normalized: p.normalized,
            margin: p.normalized - ((s - F::one()) * p.q + F::one()),
        })
        .collect();
    Ok(WitnessSearch {
        dimension: s,
        points,
    })
}
