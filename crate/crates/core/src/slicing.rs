//! The line `L_a : y = (M/N) x + a`, the interval dynamics on
//! `J = [-M/N, 1]`, greedy expansions of intercepts and the brute-force
//! geometric count of cells met by the line.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::carpet::{Digit, LevelTag, MoranSequence, Rect};
use crate::error::{Error, Result};
use crate::scalar::{int, ExactInt};

/// Rational slope `M/N` in lowest terms, `M >= 0`, `N >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slope {
    m: u64,
    n: u64,
}

impl Slope {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDenominator);
        }
        if m.gcd(&n) != 1 {
            return Err(Error::SlopeNotReduced { m, n });
        }
        Ok(Slope { m, n })
    }

    pub fn rise(&self) -> u64 {
        self.m
    }

    pub fn run(&self) -> u64 {
        self.n
    }

    /// `N + M`: matrix order and lattice size.
    pub fn order(&self) -> usize {
        (self.m + self.n) as usize
    }

    pub fn tan<I: ExactInt>(&self) -> Ratio<I> {
        Ratio::new(int(self.m as i64), int(self.n as i64))
    }

    /// Left end of the intercept interval, `-M/N`.
    pub fn intercept_min<I: ExactInt>(&self) -> Ratio<I> {
        -self.tan::<I>()
    }

    pub fn contains<I: ExactInt>(&self, x: &Ratio<I>) -> bool {
        *x >= self.intercept_min() && *x <= Ratio::one()
    }

    /// Open interval `I_i = ((-M-1+i)/N, (-M+i)/N)`, `i` 1-based.
    pub fn unit_interval<I: ExactInt>(&self, i: usize) -> (Ratio<I>, Ratio<I>) {
        let n = int::<I>(self.n as i64);
        let lo = int::<I>(i as i64 - 1 - self.m as i64);
        (
            Ratio::new(lo.clone(), n.clone()),
            Ratio::new(lo + I::one(), n),
        )
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.m, self.n)
    }
}

impl FromStr for Slope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (m, n) = match s.split_once('/') {
            Some((m, n)) => (m, n),
            None => (s, "1"),
        };
        let digits = |part: &str| -> Result<u64> {
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::parse("slope", s, "expected M/N with M >= 0, N >= 1"));
            }
            part.parse()
                .map_err(|e: std::num::ParseIntError| Error::parse("slope", s, e.to_string()))
        };
        Slope::new(digits(m)?, digits(n)?)
    }
}

/// Parses `p/q` or an integer, with an optional leading minus.
pub fn parse_rational<I: ExactInt>(s: &str) -> Result<Ratio<I>> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (p, q) = body.split_once('/').unwrap_or((body, "1"));
    let parse = |part: &str| -> Result<I> {
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::parse("rational", s, "expected p/q or an integer"));
        }
        I::from_str_radix(part, 10).map_err(|_| Error::parse("rational", s, "value too large"))
    };
    let (p, q) = (parse(p)?, parse(q)?);
    if q.is_zero() {
        return Err(Error::parse("rational", s, "zero denominator"));
    }
    let r = Ratio::new(p, q);
    Ok(if neg { -r } else { r })
}

/// Intercept `a`, checked to lie in `[-M/N, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Intercept<I: ExactInt>(Ratio<I>);

impl<I: ExactInt> Intercept<I> {
    pub fn new(value: Ratio<I>, slope: &Slope) -> Result<Self> {
        if slope.contains(&value) {
            Ok(Intercept(value))
        } else {
            Err(Error::OutOfRange {
                value: value.to_string(),
                lo: slope.intercept_min::<I>().to_string(),
            })
        }
    }

    pub fn parse(s: &str, slope: &Slope) -> Result<Self> {
        Intercept::new(parse_rational(s)?, slope)
    }

    pub fn value(&self) -> &Ratio<I> {
        &self.0
    }

    /// The lattice index `k` with `a ∈ [(-M-1+k)/N, (-M+k)/N)`; `a = 1` maps
    /// to `N+M`.
    pub fn containing_index(&self, slope: &Slope) -> usize {
        let n = int::<I>(slope.run() as i64);
        let scaled = (self.0.clone() * Ratio::from_integer(n)).floor().to_integer();
        let k = scaled.to_i64().expect("index fits i64") + slope.rise() as i64 + 1;
        (k as usize).min(slope.order())
    }
}

impl<I: ExactInt> fmt::Display for Intercept<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn digit_offset<I: ExactInt>(d: Digit, slope: &Slope) -> Ratio<I> {
    Ratio::from_integer(int::<I>(d.x as i64)) * slope.tan::<I>()
        - Ratio::from_integer(int::<I>(d.y as i64))
}

/// `T_d(x) = b x + d¹ M/N - d²` with `b = 3` or `4`.
pub fn interval_map_forward<I: ExactInt>(
    tag: LevelTag,
    d: Digit,
    x: &Ratio<I>,
    slope: &Slope,
) -> Result<Ratio<I>> {
    d.check(tag)?;
    let b = Ratio::from_integer(int::<I>(tag.base() as i64));
    Ok(b * x.clone() + digit_offset(d, slope))
}

/// `S_d = T_d^{-1}`, `S_d(x) = (x - d¹ M/N + d²) / b`.
pub fn interval_map_inverse<I: ExactInt>(
    tag: LevelTag,
    d: Digit,
    x: &Ratio<I>,
    slope: &Slope,
) -> Result<Ratio<I>> {
    d.check(tag)?;
    let b = Ratio::from_integer(int::<I>(tag.base() as i64));
    Ok((x.clone() - digit_offset(d, slope)) / b)
}

/// Mixed-radix digits of an intercept within its lattice interval.
///
/// Digit `ξ_i` ranges over `0..3` at base-3 levels and `0..4` at base-4
/// levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyExpansion<I: ExactInt> {
    /// Containing lattice interval, 1-based.
    pub index: usize,
    pub digits: Vec<u8>,
    /// First depth (0 = the intercept itself) at which the orbit sits on a
    /// subinterval endpoint. Matrix constancy is only known away from these.
    pub first_boundary: Option<usize>,
    /// Normalized remainder in `[0, 1]` after the last digit.
    pub remainder: Ratio<I>,
}

impl<I: ExactInt> GreedyExpansion<I> {
    pub fn boundary_flag(&self) -> bool {
        self.first_boundary.is_some()
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn value(&self, sigma: &MoranSequence, slope: &Slope) -> Result<Ratio<I>> {
        expansion_value(self.index, &self.digits, sigma, slope)
    }
}

/// Greedy digits of `a` to the given depth.
///
/// With `r_0 = N a - (-M-1+k)`, each level takes `ξ = min(⌊b r⌋, b-1)` and
/// keeps `r ← b r - ξ`.
pub fn greedy_expand<I: ExactInt>(
    a: &Intercept<I>,
    sigma: &MoranSequence,
    slope: &Slope,
    depth: usize,
) -> GreedyExpansion<I> {
    let index = a.containing_index(slope);
    let n = Ratio::from_integer(int::<I>(slope.run() as i64));
    let base_point = Ratio::from_integer(int::<I>(index as i64 - 1 - slope.rise() as i64));
    let mut r = n * a.value().clone() - base_point;
    let at_edge = |r: &Ratio<I>| r.is_zero() || r.is_one();
    let mut first_boundary = at_edge(&r).then_some(0);
    let mut digits = Vec::with_capacity(depth);
    for i in 1..=depth {
        let b = sigma.tag(i).base();
        let scaled = r * Ratio::from_integer(int::<I>(b as i64));
        let floor = scaled.floor().to_integer().to_u8().unwrap_or(b);
        let xi = floor.min(b - 1);
        r = scaled - Ratio::from_integer(int::<I>(xi as i64));
        if first_boundary.is_none() && at_edge(&r) {
            first_boundary = Some(i);
        }
        digits.push(xi);
    }
    GreedyExpansion {
        index,
        digits,
        first_boundary,
        remainder: r,
    }
}

/// `(-M-1+k)/N + (1/N) Σ ξ_i / (3^{n_0(i)} 4^{n_1(i)})`.
pub fn expansion_value<I: ExactInt>(
    index: usize,
    digits: &[u8],
    sigma: &MoranSequence,
    slope: &Slope,
) -> Result<Ratio<I>> {
    let mut sum = Ratio::<I>::zero();
    let mut scale = I::one();
    for (i, &xi) in digits.iter().enumerate() {
        let b = sigma.tag(i + 1).base();
        if xi >= b {
            return Err(Error::InvalidSymbol {
                position: i + 1,
                symbol: xi,
                base: b,
            });
        }
        scale = scale * int::<I>(b as i64);
        sum = sum + Ratio::new(int::<I>(xi as i64), scale.clone());
    }
    let n = int::<I>(slope.run() as i64);
    let start = Ratio::new(int::<I>(index as i64 - 1 - slope.rise() as i64), n.clone());
    Ok(start + sum / Ratio::from_integer(n))
}

/// `1 / (N 3^{n_0(n)} 4^{n_1(n)})`: depth-`n` truncation bound of the
/// expansion.
pub fn truncation_bound<I: ExactInt>(sigma: &MoranSequence, slope: &Slope, n: usize) -> Ratio<I> {
    Ratio::new(
        I::one(),
        sigma.scale_int::<I>(n) * int::<I>(slope.run() as i64),
    )
}

/// The `N+M` translates `a + i/N` of the intercept, one per lattice interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaLattice<I: ExactInt> {
    pub points: Vec<Ratio<I>>,
    /// 1-based rank of `a` itself.
    pub i0: usize,
}

/// Builds the lattice with point `i` in `[(-M-1+i)/N, (-M+i)/N)`. When `a` is
/// itself a multiple of `1/N` the translate at the far end is dropped so that
/// exactly `N+M` points remain (`1` is kept only for `a = 1`).
pub fn gamma_lattice<I: ExactInt>(a: &Intercept<I>, slope: &Slope) -> GammaLattice<I> {
    let i0 = a.containing_index(slope);
    let n = int::<I>(slope.run() as i64);
    let points = (1..=slope.order())
        .map(|i| a.value().clone() + Ratio::new(int::<I>(i as i64 - i0 as i64), n.clone()))
        .collect();
    GammaLattice { points, i0 }
}

/// Whether the closed square meets the closed line:
/// `a ∈ [y_lo - (M/N) x_hi, y_hi - (M/N) x_lo]`.
pub fn line_cell_intersects<I: ExactInt>(rect: &Rect<I>, slope: &Slope, a: &Ratio<I>) -> bool {
    let t = slope.tan::<I>();
    let lo = rect.y_lo.clone() - t.clone() * rect.x_hi.clone();
    let hi = rect.y_hi.clone() - t * rect.x_lo.clone();
    lo <= *a && *a <= hi
}

/// Level-by-level counts `N_1 … N_depth` from the pruned geometric descent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRun {
    /// `counts[k]` is `N_k`; `counts[0] = 1`.
    pub counts: Vec<BigUint>,
    /// Child cells tested against the line.
    pub visited: u128,
    /// Set when the next level would exceed the cell budget.
    pub capped: bool,
}

/// Cells are kept as integer lower-left corners `(X, Y)` at scale
/// `D = 3^{n_0} 4^{n_1}`; the line test is the rational one multiplied
/// through by `N D q`.
struct LatticeLine<I> {
    m: I,
    n: I,
    p: I,
    q: I,
}

impl<I: ExactInt> LatticeLine<I> {
    fn new(a: &Ratio<I>, slope: &Slope) -> Self {
        LatticeLine {
            m: int(slope.rise() as i64),
            n: int(slope.run() as i64),
            p: a.numer().clone(),
            q: a.denom().clone(),
        }
    }

    fn meets(&self, x: &I, y: &I, ndp: &I) -> bool {
        let lo = (self.n.clone() * y.clone() - self.m.clone() * (x.clone() + I::one())) * self.q.clone();
        let hi = (self.n.clone() * (y.clone() + I::one()) - self.m.clone() * x.clone()) * self.q.clone();
        lo <= *ndp && *ndp <= hi
    }
}

/// Pruned descent: only children of cells met by the line are tested. Sound
/// because a cell contains its children.
pub fn oracle_counts<I: ExactInt>(
    a: &Intercept<I>,
    sigma: &MoranSequence,
    slope: &Slope,
    max_depth: usize,
    cell_budget: u128,
) -> OracleRun {
    let line = LatticeLine::new(a.value(), slope);
    let mut frontier: Vec<(I, I)> = vec![(I::zero(), I::zero())];
    let mut counts = vec![BigUint::one()];
    let mut scale = I::one();
    let mut visited: u128 = 0;
    for depth in 1..=max_depth {
        let tag = sigma.tag(depth);
        let next_visits = frontier.len() as u128 * tag.branching() as u128;
        if visited + next_visits > cell_budget {
            return OracleRun {
                counts,
                visited,
                capped: true,
            };
        }
        visited += next_visits;
        let b = int::<I>(tag.base() as i64);
        scale = scale * b.clone();
        let ndp = line.n.clone() * scale.clone() * line.p.clone();
        let digits = tag.digits();
        frontier = frontier
            .par_chunks(4096)
            .flat_map_iter(|chunk| {
                let mut out = Vec::new();
                for (x, y) in chunk {
                    let bx = b.clone() * x.clone();
                    let by = b.clone() * y.clone();
                    for d in digits {
                        let cx = bx.clone() + int::<I>(d.x as i64);
                        let cy = by.clone() + int::<I>(d.y as i64);
                        if line.meets(&cx, &cy, &ndp) {
                            out.push((cx, cy));
                        }
                    }
                }
                out
            })
            .collect();
        counts.push(BigUint::from(frontier.len()));
    }
    OracleRun {
        counts,
        visited,
        capped: false,
    }
}

/// `N_n(a)`: number of level-`n` cells whose closed square meets `L_a`.
pub fn count_oracle<I: ExactInt>(
    a: &Intercept<I>,
    sigma: &MoranSequence,
    slope: &Slope,
    n: usize,
) -> BigUint {
    oracle_counts(a, sigma, slope, n, u128::MAX)
        .counts
        .pop()
        .expect("counts always holds depth 0")
}

/// Same count through the interval maps: words `d_1 … d_n` with
/// `T_{d_n} ∘ … ∘ T_{d_1}(a) ∈ J`. Orbits that leave `J` are pruned, since
/// `S_{d_1 … d_n}(J) ⊆ S_{d_1}(J)`.
pub fn count_by_interval_maps<I: ExactInt>(
    a: &Intercept<I>,
    sigma: &MoranSequence,
    slope: &Slope,
    n: usize,
) -> BigUint {
    fn walk<I: ExactInt>(
        x: Ratio<I>,
        level: usize,
        n: usize,
        sigma: &MoranSequence,
        slope: &Slope,
    ) -> u64 {
        if level > n {
            return 1;
        }
        let tag = sigma.tag(level);
        tag.digits()
            .iter()
            .filter_map(|d| {
                let y = interval_map_forward(tag, *d, &x, slope).ok()?;
                slope.contains(&y).then_some(y)
            })
            .map(|y| walk(y, level + 1, n, sigma, slope))
            .sum()
    }
    BigUint::from(walk(a.value().clone(), 1, n, sigma, slope))
}
