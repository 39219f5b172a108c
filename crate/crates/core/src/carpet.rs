//! Combinatorial skeleton of the carpet: digit sets, the two contraction
//! families, the level sequence and exact cell geometry.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{int, real, ExactInt, Real};

/// Which contraction family acts at a level: base 3 with 8 digits, or base 4
/// with 12 digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LevelTag {
    Zero,
    One,
}

impl LevelTag {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(LevelTag::Zero),
            1 => Some(LevelTag::One),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            LevelTag::Zero => 0,
            LevelTag::One => 1,
        }
    }

    /// Contraction base: 3 or 4. Also the size of the expansion alphabet.
    pub fn base(self) -> u8 {
        match self {
            LevelTag::Zero => 3,
            LevelTag::One => 4,
        }
    }

    pub fn digits(self) -> &'static [Digit] {
        match self {
            LevelTag::Zero => &OMEGA_0,
            LevelTag::One => &OMEGA_1,
        }
    }

    /// Number of retained cells per subdivision: 8 or 12.
    pub fn branching(self) -> u32 {
        self.digits().len() as u32
    }
}

/// A digit `(d¹, d²)`: horizontal and vertical sub-square index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digit {
    pub x: u8,
    pub y: u8,
}

impl Digit {
    pub const fn new(x: u8, y: u8) -> Self {
        Digit { x, y }
    }

    pub fn is_valid(self, tag: LevelTag) -> bool {
        tag.digits().contains(&self)
    }

    pub(crate) fn check(self, tag: LevelTag) -> Result<()> {
        if self.is_valid(tag) {
            Ok(())
        } else {
            Err(Error::InvalidDigit {
                tag: tag.bit(),
                x: self.x,
                y: self.y,
            })
        }
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

const fn d(x: u8, y: u8) -> Digit {
    Digit::new(x, y)
}

/// Base-3 digits: the 3x3 grid without its center.
pub const OMEGA_0: [Digit; 8] = [
    d(0, 0),
    d(0, 1),
    d(0, 2),
    d(1, 0),
    d(1, 2),
    d(2, 0),
    d(2, 1),
    d(2, 2),
];

/// Base-4 digits. Not the boundary ring of the 4x4 grid: `(2,1)` is kept and
/// `(2,3)` is not.
pub const OMEGA_1: [Digit; 12] = [
    d(0, 0),
    d(0, 1),
    d(0, 2),
    d(0, 3),
    d(1, 0),
    d(1, 3),
    d(2, 0),
    d(2, 1),
    d(3, 0),
    d(3, 1),
    d(3, 2),
    d(3, 3),
];

pub fn digit_set(tag: LevelTag) -> &'static [Digit] {
    tag.digits()
}

/// Eventually periodic 0/1 level sequence, written `prefix(period)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MoranSequence {
    prefix: Vec<LevelTag>,
    period: Vec<LevelTag>,
}

impl MoranSequence {
    pub fn new(prefix: Vec<LevelTag>, period: Vec<LevelTag>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidArgument(
                "level sequence period must be nonempty".into(),
            ));
        }
        Ok(MoranSequence { prefix, period })
    }

    /// The constant sequence.
    pub fn constant(tag: LevelTag) -> Self {
        MoranSequence {
            prefix: Vec::new(),
            period: vec![tag],
        }
    }

    pub fn prefix(&self) -> &[LevelTag] {
        &self.prefix
    }

    pub fn period(&self) -> &[LevelTag] {
        &self.period
    }

    /// The tag `σ_i` for 1-based `i`.
    pub fn tag(&self, i: usize) -> LevelTag {
        assert!(i >= 1, "level index is 1-based");
        let i = i - 1;
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.period[(i - self.prefix.len()) % self.period.len()]
        }
    }

    /// Tags `σ_1 … σ_k`.
    pub fn tags(&self, k: usize) -> impl Iterator<Item = LevelTag> + '_ {
        (1..=k).map(move |i| self.tag(i))
    }

    /// `(n_0(k), n_1(k))`: zeros and ones among the first `k` levels.
    pub fn counts(&self, k: usize) -> (usize, usize) {
        let ones = |s: &[LevelTag]| s.iter().filter(|t| **t == LevelTag::One).count();
        let head = k.min(self.prefix.len());
        let mut n1 = ones(&self.prefix[..head]);
        let rest = k - head;
        let p = self.period.len();
        n1 += (rest / p) * ones(&self.period) + ones(&self.period[..rest % p]);
        (k - n1, n1)
    }

    /// Limiting frequencies `(n_0, n_1)`, exact.
    pub fn frequencies(&self) -> (Ratio<u64>, Ratio<u64>) {
        let p = self.period.len() as u64;
        let ones = self.period.iter().filter(|t| **t == LevelTag::One).count() as u64;
        (Ratio::new(p - ones, p), Ratio::new(ones, p))
    }

    /// Length of prefix plus period: depths that are a multiple of the period
    /// past this point have exact limiting frequencies.
    pub fn is_period_aligned(&self, k: usize) -> bool {
        k >= self.prefix.len() && (k - self.prefix.len()).is_multiple_of(self.period.len())
    }

    /// `3^{n_0(k)} 4^{n_1(k)}`: inverse side length of a level-`k` cell.
    pub fn scale(&self, k: usize) -> BigUint {
        let (n0, n1) = self.counts(k);
        BigUint::from(3u32).pow(n0 as u32) * BigUint::from(4u32).pow(n1 as u32)
    }

    /// `scale(k)` in an exact integer type.
    pub fn scale_int<I: ExactInt>(&self, k: usize) -> I {
        let mut acc = I::one();
        for t in self.tags(k) {
            acc = acc * int::<I>(t.base() as i64);
        }
        acc
    }

    /// `n_0(k) log 3 + n_1(k) log 4`.
    pub fn log_scale<F: Real>(&self, k: usize) -> F {
        let (n0, n1) = self.counts(k);
        real::<F>(n0 as f64) * real::<F>(3.0).ln() + real::<F>(n1 as f64) * real::<F>(4.0).ln()
    }

    /// Number of level-`n` cells: `8^{n_0(n)} 12^{n_1(n)}`.
    pub fn cell_count(&self, n: usize) -> BigUint {
        let (n0, n1) = self.counts(n);
        BigUint::from(8u32).pow(n0 as u32) * BigUint::from(12u32).pow(n1 as u32)
    }

    /// Number of symbol words of length `n`, equal to `scale(n)`.
    pub fn word_count(&self, n: usize) -> BigUint {
        self.scale(n)
    }
}

impl fmt::Display for MoranSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.prefix {
            write!(f, "{}", t.bit())?;
        }
        f.write_str("(")?;
        for t in &self.period {
            write!(f, "{}", t.bit())?;
        }
        f.write_str(")")
    }
}

impl FromStr for MoranSequence {
    type Err = Error;

    /// Parses `prefix(period)`, e.g. `(01)`, `110(0)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| Error::parse("level sequence", s, "missing '(' before the period"))?;
        if !s.ends_with(')') {
            return Err(Error::parse("level sequence", s, "must end with ')'"));
        }
        let bits = |part: &str| -> Result<Vec<LevelTag>> {
            part.chars()
                .map(|c| match c {
                    '0' => Ok(LevelTag::Zero),
                    '1' => Ok(LevelTag::One),
                    _ => Err(Error::parse(
                        "level sequence",
                        s,
                        format!("unexpected character {c:?}"),
                    )),
                })
                .collect()
        };
        let prefix = bits(&s[..open])?;
        let period = bits(&s[open + 1..s.len() - 1])?;
        if period.is_empty() {
            return Err(Error::parse("level sequence", s, "empty period"));
        }
        MoranSequence::new(prefix, period)
    }
}

/// `(n_0(k), n_1(k))` for the sequence.
pub fn sigma_counts(sigma: &MoranSequence, k: usize) -> (usize, usize) {
    sigma.counts(k)
}

/// A word `d_1 … d_n` addressing a level-`n` cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CellWord(pub Vec<Digit>);

impl CellWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, sigma: &MoranSequence) -> Result<()> {
        self.0
            .iter()
            .enumerate()
            .try_for_each(|(i, d)| d.check(sigma.tag(i + 1)))
    }
}

/// Closed axis-aligned square in unit-square coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rect<I: ExactInt> {
    pub x_lo: Ratio<I>,
    pub x_hi: Ratio<I>,
    pub y_lo: Ratio<I>,
    pub y_hi: Ratio<I>,
}

impl<I: ExactInt> Rect<I> {
    pub fn unit() -> Self {
        Rect {
            x_lo: Ratio::zero(),
            x_hi: Ratio::one(),
            y_lo: Ratio::zero(),
            y_hi: Ratio::one(),
        }
    }

    pub fn side(&self) -> Ratio<I> {
        self.x_hi.clone() - self.x_lo.clone()
    }

    pub fn contains(&self, other: &Rect<I>) -> bool {
        self.x_lo <= other.x_lo
            && other.x_hi <= self.x_hi
            && self.y_lo <= other.y_lo
            && other.y_hi <= self.y_hi
    }

    /// Image under `Φ_d(z) = (z + d) / base`, componentwise.
    pub fn contract(&self, tag: LevelTag, digit: Digit) -> Self {
        let b = Ratio::from_integer(int::<I>(tag.base() as i64));
        let dx = Ratio::from_integer(int::<I>(digit.x as i64));
        let dy = Ratio::from_integer(int::<I>(digit.y as i64));
        Rect {
            x_lo: (self.x_lo.clone() + dx.clone()) / b.clone(),
            x_hi: (self.x_hi.clone() + dx) / b.clone(),
            y_lo: (self.y_lo.clone() + dy.clone()) / b.clone(),
            y_hi: (self.y_hi.clone() + dy) / b,
        }
    }
}

/// `Φ_{d_1} ∘ … ∘ Φ_{d_n}` applied to the unit square.
pub fn cell_rect<I: ExactInt>(word: &CellWord, sigma: &MoranSequence) -> Result<Rect<I>> {
    word.validate(sigma)?;
    Ok(word
        .0
        .iter()
        .enumerate()
        .rev()
        .fold(Rect::unit(), |r, (i, d)| r.contract(sigma.tag(i + 1), *d)))
}

/// Every valid word of length `n`, in lexicographic digit order.
pub fn all_words(sigma: &MoranSequence, n: usize) -> Vec<CellWord> {
    let mut out = vec![CellWord::default()];
    for i in 1..=n {
        let digits = sigma.tag(i).digits();
        out = out
            .into_iter()
            .flat_map(|w| {
                digits.iter().map(move |d| {
                    let mut next = w.0.clone();
                    next.push(*d);
                    CellWord(next)
                })
            })
            .collect();
    }
    out
}

/// Box and Hausdorff dimension of the carpet,
/// `(n_0 log 8 + n_1 log 12) / (n_0 log 3 + n_1 log 4)`.
pub fn carpet_dimension<F: Real>(sigma: &MoranSequence) -> F {
    let (n0, n1) = sigma.frequencies();
    let f0 = real::<F>(*n0.numer() as f64 / *n0.denom() as f64);
    let f1 = real::<F>(*n1.numer() as f64 / *n1.denom() as f64);
    let ln = |v: f64| real::<F>(v).ln();
    (f0 * ln(8.0) + f1 * ln(12.0)) / (f0 * ln(3.0) + f1 * ln(4.0))
}

/// `log(cell count) / log(inverse side)` at depth `n`.
pub fn finite_depth_dimension<F: Real>(sigma: &MoranSequence, n: usize) -> F {
    let (n0, n1) = sigma.counts(n);
    let ln = |v: f64| real::<F>(v).ln();
    let k0 = real::<F>(n0 as f64);
    let k1 = real::<F>(n1 as f64);
    (k0 * ln(8.0) + k1 * ln(12.0)) / (k0 * ln(3.0) + k1 * ln(4.0))
}
