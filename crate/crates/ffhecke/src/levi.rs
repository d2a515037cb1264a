//! Block-diagonal Levi data `GL_{n1} x ... x GL_{nr}`, the rank-r character
//! lattice of its dual center, the map from a character to a bundle class
//! with its sorting permutation, and membership of a bundle in the image of
//! the basic classes of the Levi.

use crate::slope::{canonicalize, Bundle, Rat, SlopeError};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LeviError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("levi parts must be positive")]
    ZeroPart,
    #[error("levi must have at least one part")]
    Empty,
    #[error("bundle rank {bundle} does not match levi rank {levi}")]
    RankMismatch { bundle: u32, levi: u32 },
    #[error(transparent)]
    Slope(#[from] SlopeError),
}

/// An ordered composition `(n1, ..., nr)` of `n`. Part order is significant:
/// character indices refer to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(transparent)]
pub struct LeviDatum {
    parts: Vec<u32>,
}

impl LeviDatum {
    pub fn new(parts: Vec<u32>) -> Result<Self, LeviError> {
        if parts.is_empty() {
            return Err(LeviError::Empty);
        }
        if parts.contains(&0) {
            return Err(LeviError::ZeroPart);
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Number of factors `r`.
    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    /// Total rank `n`.
    pub fn rank(&self) -> u32 {
        self.parts
            .iter()
            .try_fold(0u32, |a, &b| a.checked_add(b))
            .expect("rank overflow")
    }
}

impl fmt::Display for LeviDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// An integer vector of length `r`, an element of the character lattice of
/// the dual center of the Levi. The group is written multiplicatively in the
/// source material; here product is componentwise addition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(transparent)]
pub struct Character {
    values: Vec<i64>,
}

impl Character {
    pub fn new(values: Vec<i64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> i64 {
        self.values[i]
    }

    /// The zero character of length `r`.
    pub fn zero(r: usize) -> Self {
        Self::new(vec![0; r])
    }

    /// Indicator character at index `c` (0-based).
    pub fn indicator(r: usize, c: usize) -> Self {
        assert!(c < r, "indicator index out of range");
        let mut v = vec![0; r];
        v[c] = 1;
        Self::new(v)
    }

    /// The determinant character: value `n_i` at each index.
    pub fn det(levi: &LeviDatum) -> Self {
        Self::new(levi.parts().iter().map(|&p| p as i64).collect())
    }

    /// Componentwise sum (the product of characters).
    pub fn mul(&self, other: &Character) -> Result<Character, LeviError> {
        if self.len() != other.len() {
            return Err(LeviError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(Character::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.checked_add(*b).expect("character overflow"))
                .collect(),
        ))
    }

    /// Componentwise negation (the inverse character).
    pub fn inverse(&self) -> Character {
        Character::new(
            self.values
                .iter()
                .map(|a| a.checked_neg().expect("character overflow"))
                .collect(),
        )
    }

    /// Componentwise comparison: every entry of `self` at least the matching
    /// entry of `other`.
    pub fn dominates(&self, other: &Character) -> Result<bool, LeviError> {
        if self.len() != other.len() {
            return Err(LeviError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(self.values.iter().zip(&other.values).all(|(a, b)| a >= b))
    }

    /// Whether every entry is non-negative.
    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0)
    }

    /// Sum of entries.
    pub fn total(&self) -> i64 {
        self.values
            .iter()
            .try_fold(0i64, |a, &b| a.checked_add(b))
            .expect("character overflow")
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", vals.join(","))
    }
}

/// A bijection of `{1..r}` in one-line notation (stored 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation {
    one_line: Vec<usize>,
}

impl Permutation {
    pub fn new(one_line: Vec<usize>) -> Option<Self> {
        let r = one_line.len();
        let mut seen = vec![false; r];
        for &i in &one_line {
            if i >= r || seen[i] {
                return None;
            }
            seen[i] = true;
        }
        Some(Self { one_line })
    }

    pub fn identity(r: usize) -> Self {
        Self {
            one_line: (0..r).collect(),
        }
    }

    /// Image of `i` (0-based).
    pub fn apply(&self, i: usize) -> usize {
        self.one_line[i]
    }

    /// One-line notation with 1-based entries, for display and JSON output.
    pub fn one_line_one_based(&self) -> Vec<usize> {
        self.one_line.iter().map(|&i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.one_line.len()
    }

    pub fn is_empty(&self) -> bool {
        self.one_line.is_empty()
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self
            .one_line_one_based()
            .iter()
            .map(|v| v.to_string())
            .collect();
        write!(f, "({})", vals.join(","))
    }
}

/// Slope of factor `i` under character `chi`: `chi(i) / n_i`.
pub fn factor_slope(levi: &LeviDatum, chi: &Character, i: usize) -> Rat {
    BigRational::new(BigInt::from(chi.get(i)), BigInt::from(levi.parts()[i]))
}

/// The bundle attached to a character: the canonical form of the pieces
/// `(chi(i)/n_i, n_i)`, together with the stable-sort permutation `w`
/// realizing the weakly ascending slope convention (position i holds the
/// factor with the i-th smallest slope; ties keep original factor order).
pub fn b_of_chi(levi: &LeviDatum, chi: &Character) -> Result<(Bundle, Permutation), LeviError> {
    if levi.num_parts() != chi.len() {
        return Err(LeviError::LengthMismatch {
            left: levi.num_parts(),
            right: chi.len(),
        });
    }
    let bundle = canonicalize(
        (0..levi.num_parts()).map(|i| (factor_slope(levi, chi, i), levi.parts()[i])),
    )?;
    let mut order: Vec<usize> = (0..levi.num_parts()).collect();
    order.sort_by_key(|&a| factor_slope(levi, chi, a));
    let w = Permutation::new(order).expect("sort permutation is a bijection");
    Ok((bundle, w))
}

/// All characters `chi` with `b_of_chi(levi, chi) = b`, found by exact-cover
/// matching of each isoclinic piece against sub-multisets of parts. An empty
/// result means `b` is not in the image of the basic classes of the Levi.
pub fn in_bgl(levi: &LeviDatum, b: &Bundle) -> Result<Vec<Character>, LeviError> {
    if levi.rank() != b.rank() {
        return Err(LeviError::RankMismatch {
            bundle: b.rank(),
            levi: levi.rank(),
        });
    }
    let r = levi.num_parts();
    let pieces = b.pieces();
    // piece_of[i] = which piece part i is assigned to.
    let mut piece_of = vec![usize::MAX; r];
    let mut remaining: Vec<u32> = pieces.iter().map(|p| p.rank()).collect();
    let mut results: Vec<Character> = Vec::new();

    fn valid_part_in_piece(levi: &LeviDatum, b: &Bundle, i: usize, j: usize) -> Option<i64> {
        // Part i can sit in piece j iff n_i * slope_j is an integer; the
        // character value is that integer.
        let n_i = levi.parts()[i];
        let v = b.pieces()[j].slope().clone() * BigInt::from(n_i);
        if v.is_integer() {
            Some(
                i64::try_from(&v.to_integer())
                    .expect("character value exceeds i64"),
            )
        } else {
            None
        }
    }

    fn go(
        levi: &LeviDatum,
        b: &Bundle,
        i: usize,
        piece_of: &mut Vec<usize>,
        remaining: &mut Vec<u32>,
        results: &mut Vec<Character>,
    ) {
        let r = levi.num_parts();
        if i == r {
            if remaining.iter().all(|&x| x == 0) {
                let chi = Character::new(
                    (0..r)
                        .map(|i| {
                            valid_part_in_piece(levi, b, i, piece_of[i])
                                .expect("assignment validated")
                        })
                        .collect(),
                );
                results.push(chi);
            }
            return;
        }
        for j in 0..b.pieces().len() {
            let n_i = levi.parts()[i];
            if remaining[j] >= n_i && valid_part_in_piece(levi, b, i, j).is_some() {
                remaining[j] -= n_i;
                piece_of[i] = j;
                go(levi, b, i + 1, piece_of, remaining, results);
                piece_of[i] = usize::MAX;
                remaining[j] += n_i;
            }
        }
    }

    go(levi, b, 0, &mut piece_of, &mut remaining, &mut results);
    results.sort();
    results.dedup();
    Ok(results)
}

/// Whether `b` is in the image of the basic classes of the Levi.
pub fn is_in_bgl(levi: &LeviDatum, b: &Bundle) -> Result<bool, LeviError> {
    Ok(!in_bgl(levi, b)?.is_empty())
}

/// Smallest `k >= 0` such that `chi + k * (n1, ..., nr)` is non-negative,
/// together with the normalized character.
pub fn det_normalize(levi: &LeviDatum, chi: &Character) -> Result<(Character, i64), LeviError> {
    if levi.num_parts() != chi.len() {
        return Err(LeviError::LengthMismatch {
            left: levi.num_parts(),
            right: chi.len(),
        });
    }
    let mut k = 0i64;
    for (i, &v) in chi.values().iter().enumerate() {
        if v < 0 {
            let n = levi.parts()[i] as i64;
            // ceil(-v / n)
            let need = (-v + n - 1) / n;
            k = k.max(need);
        }
    }
    let det = Character::det(levi);
    let mut norm = chi.clone();
    for _ in 0..k {
        norm = norm.mul(&det)?;
    }
    Ok((norm, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slope::{rat, rint, Bundle};

    fn levi(parts: &[u32]) -> LeviDatum {
        LeviDatum::new(parts.to_vec()).unwrap()
    }

    fn chi(v: &[i64]) -> Character {
        Character::new(v.to_vec())
    }

    #[test]
    fn chi_ops_examples() {
        let a = chi(&[2, 2, 2]);
        let b = chi(&[0, 0, 1]);
        assert_eq!(a.mul(&b.inverse()).unwrap(), chi(&[2, 2, 1]));
        assert_eq!(chi(&[2, 2, 1]).total(), 5);
        assert_eq!(Character::det(&levi(&[2, 3, 3])), chi(&[2, 3, 3]));
        assert!(a.dominates(&b).unwrap());
        assert!(!b.dominates(&a).unwrap());
        assert_eq!(Character::indicator(3, 2), chi(&[0, 0, 1]));
        assert!(a.mul(&chi(&[1])).is_err());
    }

    #[test]
    fn b_of_chi_examples() {
        let l = levi(&[2, 3, 3]);
        let (b, w) = b_of_chi(&l, &chi(&[2, 2, 1])).unwrap();
        let expect = crate::slope::canonicalize([(rint(1), 2), (rat(2, 3), 3), (rat(1, 3), 3)])
            .unwrap();
        assert_eq!(b, expect);
        // Ascending slopes: factor 3 (1/3), factor 2 (2/3), factor 1 (1).
        assert_eq!(w.one_line_one_based(), vec![3, 2, 1]);
        assert_eq!(b.kappa(), num_bigint::BigInt::from(5));

        let (b, w) = b_of_chi(&l, &Character::zero(3)).unwrap();
        assert_eq!(b, Bundle::trivial(8));
        assert_eq!(w, Permutation::identity(3));

        // Slopes (1/2, 1, 0): ascending order is factor 3, factor 1, factor 2.
        let (b, w) = b_of_chi(&l, &chi(&[1, 3, 0])).unwrap();
        let expect =
            crate::slope::canonicalize([(rint(1), 3), (rat(1, 2), 2), (rint(0), 3)]).unwrap();
        assert_eq!(b, expect);
        assert_eq!(w.one_line_one_based(), vec![3, 1, 2]);
    }

    #[test]
    fn kappa_equals_total() {
        let l = levi(&[2, 3, 3]);
        for c in [chi(&[0, 0, 0]), chi(&[2, 2, 1]), chi(&[-1, 4, 0])] {
            let (b, _) = b_of_chi(&l, &c).unwrap();
            assert_eq!(b.kappa(), num_bigint::BigInt::from(c.total()));
        }
    }

    #[test]
    fn in_bgl_examples() {
        let l = levi(&[2, 3]);
        let b = Bundle::isoclinic(rat(1, 2), 2)
            .unwrap()
            .direct_sum(&Bundle::isoclinic(rat(1, 3), 3).unwrap());
        assert_eq!(in_bgl(&l, &b).unwrap(), vec![chi(&[1, 1])]);

        let b = Bundle::isoclinic(rat(1, 5), 5).unwrap();
        assert!(in_bgl(&l, &b).unwrap().is_empty());

        let l = levi(&[2, 2]);
        let b = Bundle::isoclinic(rat(1, 2), 4).unwrap();
        assert_eq!(in_bgl(&l, &b).unwrap(), vec![chi(&[1, 1])]);
    }

    #[test]
    fn in_bgl_contains_origin_character() {
        let l = levi(&[2, 3, 3]);
        for c in [chi(&[2, 2, 1]), chi(&[0, 0, 0]), chi(&[1, 3, 0]), chi(&[-1, 0, 2])] {
            let (b, _) = b_of_chi(&l, &c).unwrap();
            assert!(in_bgl(&l, &b).unwrap().contains(&c));
        }
    }

    #[test]
    fn in_bgl_symmetric_characters() {
        // Distinct factor assignments of equal-rank parts produce the full
        // set of matching characters.
        let l = levi(&[1, 1]);
        let b = crate::slope::canonicalize([(rint(1), 1), (rint(0), 1)]).unwrap();
        assert_eq!(in_bgl(&l, &b).unwrap(), vec![chi(&[0, 1]), chi(&[1, 0])]);
    }

    #[test]
    fn det_normalize_examples() {
        let l = levi(&[2, 3]);
        let (norm, k) = det_normalize(&l, &chi(&[-1, 0])).unwrap();
        assert_eq!((norm, k), (chi(&[1, 3]), 1));

        let (norm, k) = det_normalize(&l, &chi(&[2, 0])).unwrap();
        assert_eq!((norm, k), (chi(&[2, 0]), 0));

        let l = levi(&[2, 3, 3]);
        let (norm, k) = det_normalize(&l, &chi(&[-4, -6, -6])).unwrap();
        assert_eq!((norm, k), (chi(&[0, 0, 0]), 2));
    }

    #[test]
    fn b_of_chi_symmetric_under_simultaneous_permutation() {
        let l1 = levi(&[2, 3, 3]);
        let l2 = levi(&[3, 2, 3]);
        let (b1, _) = b_of_chi(&l1, &chi(&[2, 2, 1])).unwrap();
        let (b2, _) = b_of_chi(&l2, &chi(&[2, 2, 1])).unwrap();
        assert_eq!(b1, b2);
    }
}
