//! Transfer matrices `A_0^j`, `A_1^j` and the exact matrix-product count of
//! line-meeting cells.

use std::fmt;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::carpet::{LevelTag, MoranSequence};
use crate::error::{Error, Result};
use crate::scalar::ExactInt;
use crate::slicing::{greedy_expand, Intercept, Slope};

/// Square nonnegative integer matrix of order `N+M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransferMatrix {
    tag: LevelTag,
    label: u8,
    order: usize,
    entries: Vec<u32>,
}

impl TransferMatrix {
    pub fn tag(&self) -> LevelTag {
        self.tag
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry `(p, q)`, both 1-based.
    pub fn get(&self, p: usize, q: usize) -> u32 {
        self.entries[(p - 1) * self.order + (q - 1)]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.entries.chunks(self.order)
    }

    pub fn row_sum(&self, p: usize) -> u32 {
        self.rows().nth(p - 1).map(|r| r.iter().sum()).unwrap_or(0)
    }

    /// Sum of all entries.
    pub fn norm(&self) -> u64 {
        self.entries.iter().map(|&e| e as u64).sum()
    }

    pub fn to_nested(&self) -> Vec<Vec<u32>> {
        self.rows().map(<[u32]>::to_vec).collect()
    }
}

impl fmt::Display for TransferMatrix {
    /// One row per line, entries separated by single spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            f.write_str(&line.join(" "))?;
        }
        Ok(())
    }
}

fn check_label(tag: LevelTag, label: u8) -> Result<()> {
    if label < tag.base() {
        Ok(())
    } else {
        Err(Error::InvalidLabel {
            tag: tag.bit(),
            label,
        })
    }
}

/// Entry `(p, q)` counts digits `d` whose map `T_d` sends the open
/// subinterval of `I_p` with label `j` (its `j`-th third or quarter) exactly
/// onto `I_q`. Endpoints are compared as exact rationals.
pub fn build_matrix_semantic(tag: LevelTag, label: u8, slope: &Slope) -> Result<TransferMatrix> {
    check_label(tag, label)?;
    let order = slope.order();
    let b = tag.base() as i64;
    let n = slope.run() as i64;
    let targets: Vec<(Ratio<i64>, Ratio<i64>)> =
        (1..=order).map(|q| slope.unit_interval::<i64>(q)).collect();
    let t = slope.tan::<i64>();
    let mut entries = vec![0u32; order * order];
    for p in 1..=order {
        let (base, _) = slope.unit_interval::<i64>(p);
        let lo = base + Ratio::new(label as i64, b * n);
        let hi = lo + Ratio::new(1, b * n);
        for d in tag.digits() {
            let shift = Ratio::from_integer(d.x as i64) * t - Ratio::from_integer(d.y as i64);
            let image = (lo * b + shift, hi * b + shift);
            if let Some(q) = targets.iter().position(|iq| *iq == image) {
                entries[(p - 1) * order + q] += 1;
            }
        }
    }
    Ok(TransferMatrix {
        tag,
        label,
        order,
        entries,
    })
}

/// Entry `(p, q)` counts digits with
/// `d¹ M - d² N = (b-1)(M+1) + q - b p - j`, `b = 3` or `4`.
pub fn build_matrix_closed_form(tag: LevelTag, label: u8, slope: &Slope) -> Result<TransferMatrix> {
    check_label(tag, label)?;
    let order = slope.order();
    let (m, n) = (slope.rise() as i64, slope.run() as i64);
    let b = tag.base() as i64;
    let j = label as i64;
    let mut entries = vec![0u32; order * order];
    for p in 1..=order {
        for q in 1..=order {
            let target = (b - 1) * (m + 1) + q as i64 - b * p as i64 - j;
            entries[(p - 1) * order + (q - 1)] = tag
                .digits()
                .iter()
                .filter(|d| d.x as i64 * m - d.y as i64 * n == target)
                .count() as u32;
        }
    }
    Ok(TransferMatrix {
        tag,
        label,
        order,
        entries,
    })
}

/// All seven matrices of one slope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferSet {
    slope: Slope,
    zero: Vec<TransferMatrix>,
    one: Vec<TransferMatrix>,
}

impl TransferSet {
    pub fn semantic(slope: &Slope) -> Self {
        Self::build(slope, build_matrix_semantic)
    }

    pub fn closed_form(slope: &Slope) -> Self {
        Self::build(slope, build_matrix_closed_form)
    }

    fn build(slope: &Slope, f: fn(LevelTag, u8, &Slope) -> Result<TransferMatrix>) -> Self {
        let all = |tag: LevelTag| {
            (0..tag.base())
                .map(|j| f(tag, j, slope).expect("labels below base are valid"))
                .collect()
        };
        TransferSet {
            slope: *slope,
            zero: all(LevelTag::Zero),
            one: all(LevelTag::One),
        }
    }

    pub fn slope(&self) -> &Slope {
        &self.slope
    }

    pub fn order(&self) -> usize {
        self.slope.order()
    }

    pub fn get(&self, tag: LevelTag, label: u8) -> &TransferMatrix {
        match tag {
            LevelTag::Zero => &self.zero[label as usize],
            LevelTag::One => &self.one[label as usize],
        }
    }

    pub fn for_tag(&self, tag: LevelTag) -> &[TransferMatrix] {
        match tag {
            LevelTag::Zero => &self.zero,
            LevelTag::One => &self.one,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransferMatrix> {
        self.zero.iter().chain(self.one.iter())
    }

    /// `Σ_j A_tag^j`.
    pub fn label_sum(&self, tag: LevelTag) -> CountMatrix {
        let mut acc = CountMatrix::zero(self.order());
        for m in self.for_tag(tag) {
            for (a, &e) in acc.entries.iter_mut().zip(&m.entries) {
                *a += e;
            }
        }
        acc
    }
}

/// Row vector with arbitrary-precision entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector(pub Vec<BigUint>);

impl CountVector {
    /// The basis vector `e_row`, `row` 1-based.
    pub fn basis(order: usize, row: usize) -> Self {
        let mut v = vec![BigUint::zero(); order];
        v[row - 1] = BigUint::one();
        CountVector(v)
    }

    pub fn mul(&self, m: &TransferMatrix) -> Self {
        let order = m.order;
        let mut out = vec![BigUint::zero(); order];
        for (p, vp) in self.0.iter().enumerate() {
            if vp.is_zero() {
                continue;
            }
            for (q, &e) in m.entries[p * order..(p + 1) * order].iter().enumerate() {
                if e != 0 {
                    out[q] += vp * e;
                }
            }
        }
        CountVector(out)
    }

    pub fn norm(&self) -> BigUint {
        self.0.iter().sum()
    }
}

/// Square matrix with arbitrary-precision entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    order: usize,
    entries: Vec<BigUint>,
}

impl CountMatrix {
    pub fn zero(order: usize) -> Self {
        CountMatrix {
            order,
            entries: vec![BigUint::zero(); order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zero(order);
        for i in 0..order {
            m.entries[i * order + i] = BigUint::one();
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, p: usize, q: usize) -> &BigUint {
        &self.entries[(p - 1) * self.order + (q - 1)]
    }

    pub fn mul(&self, rhs: &CountMatrix) -> CountMatrix {
        let n = self.order;
        let mut out = CountMatrix::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.entries[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &rhs.entries[k * n + j];
                    if !b.is_zero() {
                        out.entries[i * n + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_transfer(&self, rhs: &TransferMatrix) -> CountMatrix {
        let n = self.order;
        let mut out = CountMatrix::zero(n);
        for i in 0..n {
            let row = CountVector(self.entries[i * n..(i + 1) * n].to_vec()).mul(rhs);
            out.entries[i * n..(i + 1) * n].clone_from_slice(&row.0);
        }
        out
    }

    pub fn norm(&self) -> BigUint {
        self.entries.iter().sum()
    }
}

impl From<&TransferMatrix> for CountMatrix {
    fn from(m: &TransferMatrix) -> Self {
        CountMatrix {
            order: m.order,
            entries: m.entries.iter().map(|&e| BigUint::from(e)).collect(),
        }
    }
}

/// `‖e_row A_1 A_2 … A_n‖`, the entry sum of a row of the product.
pub fn product_norm(matrices: &[&TransferMatrix], start_row: usize) -> Result<BigUint> {
    let Some(first) = matrices.first() else {
        return Ok(BigUint::one());
    };
    let order = first.order;
    if let Some(bad) = matrices.iter().find(|m| m.order != order) {
        return Err(Error::OrderMismatch {
            expected: order,
            found: bad.order,
        });
    }
    if start_row == 0 || start_row > order {
        return Err(Error::RowOutOfRange {
            row: start_row,
            order,
        });
    }
    Ok(matrices
        .iter()
        .fold(CountVector::basis(order, start_row), |v, m| v.mul(m))
        .norm())
}

/// Matrix-product counts for depths `0..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixCount {
    /// `counts[k] = ‖e_{i0} A_{σ_1}^{ξ_1} … A_{σ_k}^{ξ_k}‖`.
    pub counts: Vec<BigUint>,
    /// Starting row, the intercept's containing lattice index.
    pub start_row: usize,
    pub digits: Vec<u8>,
    /// First depth whose matrix is taken at a subinterval endpoint, where the
    /// product is not guaranteed to equal the geometric count.
    pub first_boundary: Option<usize>,
}

impl MatrixCount {
    pub fn last(&self) -> &BigUint {
        self.counts.last().expect("depth 0 always present")
    }

    /// Whether the count at `depth` is covered by the boundary warning.
    pub fn flagged_at(&self, depth: usize) -> bool {
        self.first_boundary.is_some_and(|b| b <= depth)
    }
}

/// Counts line-meeting cells through the greedy digits of `a`.
pub fn matrix_counts<I: ExactInt>(
    a: &Intercept<I>,
    sigma: &MoranSequence,
    set: &TransferSet,
    n: usize,
) -> MatrixCount {
    let exp = greedy_expand(a, sigma, set.slope(), n);
    let mut v = CountVector::basis(set.order(), exp.index);
    let mut counts = Vec::with_capacity(n + 1);
    counts.push(v.norm());
    for (i, &xi) in exp.digits.iter().enumerate() {
        v = v.mul(set.get(sigma.tag(i + 1), xi));
        counts.push(v.norm());
    }
    MatrixCount {
        counts,
        start_row: exp.index,
        digits: exp.digits,
        first_boundary: exp.first_boundary,
    }
}

/// `N_n(a)` from the matrix product, with the boundary flag.
pub fn matrix_count<I: ExactInt>(
    a: &Intercept<I>,
    sigma: &MoranSequence,
    slope: &Slope,
    n: usize,
) -> MatrixCount {
    matrix_counts(a, sigma, &TransferSet::semantic(slope), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn slope(s: &str) -> Slope {
        s.parse().unwrap()
    }

    fn nested(m: &TransferMatrix) -> Vec<Vec<u32>> {
        m.to_nested()
    }

    #[test]
    fn semantic_examples() {
        let s = slope("1/1");
        let z = LevelTag::Zero;
        assert_eq!(nested(&build_matrix_semantic(z, 0, &s).unwrap()), vec![vec![1, 0], vec![2, 2]]);
        assert_eq!(nested(&build_matrix_semantic(z, 1, &s).unwrap()), vec![vec![2, 1], vec![1, 2]]);
        let h = slope("0/1");
        let diag: Vec<_> = (0..3)
            .map(|j| nested(&build_matrix_semantic(z, j, &h).unwrap()))
            .collect();
        assert_eq!(diag, vec![vec![vec![3]], vec![vec![2]], vec![vec![3]]]);
    }

    #[test]
    fn closed_form_examples() {
        let s = slope("1/1");
        assert_eq!(
            nested(&build_matrix_closed_form(LevelTag::Zero, 2, &s).unwrap()),
            vec![vec![2, 2], vec![0, 1]]
        );
        assert_eq!(
            build_matrix_closed_form(LevelTag::One, 0, &s).unwrap(),
            build_matrix_semantic(LevelTag::One, 0, &s).unwrap()
        );
        let h = slope("0/1");
        for j in 0..3 {
            assert_eq!(
                build_matrix_closed_form(LevelTag::Zero, j, &h).unwrap(),
                build_matrix_semantic(LevelTag::Zero, j, &h).unwrap()
            );
        }
    }

    #[test]
    fn invalid_labels() {
        let s = slope("1/1");
        assert_eq!(
            build_matrix_semantic(LevelTag::Zero, 3, &s),
            Err(Error::InvalidLabel { tag: 0, label: 3 })
        );
        assert!(build_matrix_closed_form(LevelTag::One, 4, &s).is_err());
        assert!(build_matrix_closed_form(LevelTag::One, 3, &s).is_ok());
    }

    #[test]
    fn product_norm_examples() {
        let set = TransferSet::semantic(&slope("1/1"));
        let z = LevelTag::Zero;
        assert_eq!(product_norm(&[], 1).unwrap(), BigUint::one());
        assert_eq!(product_norm(&[set.get(z, 1)], 1).unwrap(), BigUint::from(3u32));
        assert_eq!(
            product_norm(&[set.get(z, 0), set.get(z, 2)], 2).unwrap(),
            BigUint::from(10u32)
        );
        let other = TransferSet::semantic(&slope("1/2"));
        assert_eq!(
            product_norm(&[set.get(z, 0), other.get(z, 0)], 1),
            Err(Error::OrderMismatch {
                expected: 2,
                found: 3
            })
        );
        assert!(product_norm(&[set.get(z, 0)], 3).is_err());
    }

    #[test]
    fn matrix_count_examples() {
        let s = slope("1/1");
        let a = Intercept::<BigInt>::parse("1/2", &s).unwrap();
        let c = matrix_count(&a, &"(0)".parse().unwrap(), &s, 2);
        let want: Vec<BigUint> = [1u32, 3, 9].into_iter().map(BigUint::from).collect();
        assert_eq!(c.counts, want);
        assert_eq!(c.first_boundary, None);
        assert_eq!(c.start_row, 2);
    }

    #[test]
    fn label_sum_for_unit_slope() {
        let set = TransferSet::semantic(&slope("1/1"));
        let s = set.label_sum(LevelTag::Zero);
        assert_eq!(
            (s.get(1, 1), s.get(1, 2), s.get(2, 1), s.get(2, 2)),
            (&BigUint::from(5u32), &BigUint::from(3u32), &BigUint::from(3u32), &BigUint::from(5u32))
        );
        let norms: Vec<u64> = set.for_tag(LevelTag::Zero).iter().map(TransferMatrix::norm).collect();
        assert_eq!(norms, vec![5, 6, 5]);
    }

    #[test]
    fn display_format() {
        let m = build_matrix_semantic(LevelTag::Zero, 0, &slope("1/1")).unwrap();
        assert_eq!(m.to_string(), "1 0\n2 2");
    }

    #[test]
    fn entries_bounded_by_branching() {
        for s in ["1/1", "1/2", "5/7", "0/1"].map(slope) {
            for m in TransferSet::semantic(&s).iter() {
                for p in 1..=m.order() {
                    assert!(m.row_sum(p) <= m.tag().branching());
                }
            }
        }
    }
}
