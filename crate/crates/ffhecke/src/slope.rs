//! Exact rational slope arithmetic, canonical bundle forms, Newton polygons,
//! numerical invariants, dominance comparisons, and bounded enumeration of
//! rank-n bundle classes.
//!
//! Every quantity is an exact `BigRational`; there is no floating point
//! anywhere in this crate. A bundle class is stored in canonical
//! Harder-Narasimhan form: a non-empty list of isoclinic pieces with strictly
//! decreasing slopes, each piece contributing an integral degree.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Exact rational number used for all slopes and pairings.
pub type Rat = BigRational;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Convenience constructor for integral rationals.
pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SlopeError {
    /// A piece whose slope times rank is not an integer.
    #[error("non-integral piece: slope {slope} times rank {rank} is not an integer")]
    NonIntegralPiece { slope: String, rank: u32 },
    /// A bundle must have at least one piece.
    #[error("empty bundle")]
    EmptyBundle,
    /// A piece of rank zero.
    #[error("piece with rank 0")]
    ZeroRankPiece,
    /// Vectors of different lengths compared.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// A semistable isoclinic piece: all `rank` summands share one `slope`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IsoclinicPiece {
    slope: Rat,
    rank: u32,
}

impl IsoclinicPiece {
    pub fn new(slope: Rat, rank: u32) -> Result<Self, SlopeError> {
        if rank == 0 {
            return Err(SlopeError::ZeroRankPiece);
        }
        if !(slope.clone() * BigInt::from(rank)).is_integer() {
            return Err(SlopeError::NonIntegralPiece {
                slope: slope.to_string(),
                rank,
            });
        }
        Ok(Self { slope, rank })
    }

    pub fn slope(&self) -> &Rat {
        &self.slope
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Integral degree of the piece: slope times rank.
    pub fn degree(&self) -> BigInt {
        (self.slope.clone() * BigInt::from(self.rank)).to_integer()
    }
}

/// A bundle class in canonical Harder-Narasimhan form: non-empty pieces with
/// strictly decreasing slopes. Equal bundles compare equal as values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bundle {
    pieces: Vec<IsoclinicPiece>,
}

/// Merge equal slopes and sort strictly decreasing. Idempotent and
/// order-insensitive on inputs.
pub fn canonicalize<I>(pieces: I) -> Result<Bundle, SlopeError>
where
    I: IntoIterator<Item = (Rat, u32)>,
{
    let mut checked: Vec<IsoclinicPiece> = Vec::new();
    for (slope, rank) in pieces {
        checked.push(IsoclinicPiece::new(slope, rank)?);
    }
    if checked.is_empty() {
        return Err(SlopeError::EmptyBundle);
    }
    checked.sort_by(|a, b| b.slope.cmp(&a.slope));
    let mut merged: Vec<IsoclinicPiece> = Vec::new();
    for p in checked {
        match merged.last_mut() {
            Some(last) if last.slope == p.slope => {
                last.rank = last
                    .rank
                    .checked_add(p.rank)
                    .expect("rank overflow while merging pieces");
            }
            _ => merged.push(p),
        }
    }
    Ok(Bundle { pieces: merged })
}

impl Bundle {
    /// Canonical pieces, slopes strictly decreasing.
    pub fn pieces(&self) -> &[IsoclinicPiece] {
        &self.pieces
    }

    /// A single isoclinic piece of the given slope and rank.
    pub fn isoclinic(slope: Rat, rank: u32) -> Result<Self, SlopeError> {
        canonicalize([(slope, rank)])
    }

    /// The rank-n slope-zero bundle.
    pub fn trivial(rank: u32) -> Self {
        Bundle::isoclinic(Rat::zero(), rank).expect("trivial bundle")
    }

    /// Total rank.
    pub fn rank(&self) -> u32 {
        self.pieces
            .iter()
            .map(|p| p.rank)
            .try_fold(0u32, u32::checked_add)
            .expect("rank overflow")
    }

    /// Whether the bundle has a single slope.
    pub fn is_semistable(&self) -> bool {
        self.pieces.len() == 1
    }

    /// Slope vector: each slope repeated by its rank, weakly decreasing.
    pub fn newton_point(&self) -> Vec<Rat> {
        let mut v = Vec::with_capacity(self.rank() as usize);
        for p in &self.pieces {
            for _ in 0..p.rank {
                v.push(p.slope.clone());
            }
        }
        v
    }

    /// Maximal slope.
    pub fn nu_max(&self) -> Rat {
        self.pieces.first().expect("non-empty").slope.clone()
    }

    /// Minimal slope.
    pub fn nu_min(&self) -> Rat {
        self.pieces.last().expect("non-empty").slope.clone()
    }

    /// Rank of the minimal-slope piece.
    pub fn rk_min(&self) -> u32 {
        self.pieces.last().expect("non-empty").rank
    }

    /// Degree of the minimal-slope piece.
    pub fn deg_min(&self) -> BigInt {
        self.pieces.last().expect("non-empty").degree()
    }

    /// Total degree. Sign convention: the slope-1 line bundle has degree 1.
    pub fn kappa(&self) -> BigInt {
        self.pieces.iter().map(|p| p.degree()).sum()
    }

    /// Slope-negated, order-reversed bundle.
    pub fn dual(&self) -> Bundle {
        canonicalize(self.pieces.iter().map(|p| (-p.slope.clone(), p.rank)))
            .expect("dual of canonical bundle")
    }

    /// Add the integer `k` to every slope.
    pub fn twist(&self, k: i64) -> Bundle {
        canonicalize(
            self.pieces
                .iter()
                .map(|p| (p.slope.clone() + rint(k), p.rank)),
        )
        .expect("twist of canonical bundle")
    }

    /// Canonicalized union of the pieces of `self` and `other`.
    pub fn direct_sum(&self, other: &Bundle) -> Bundle {
        canonicalize(
            self.pieces
                .iter()
                .chain(other.pieces.iter())
                .map(|p| (p.slope.clone(), p.rank)),
        )
        .expect("direct sum of canonical bundles")
    }

    /// The concave upper hull of the slope data.
    pub fn newton_polygon(&self) -> NewtonPolygon {
        let mut breakpoints = vec![(0u32, Rat::zero())];
        let mut x = 0u32;
        let mut y = Rat::zero();
        for p in &self.pieces {
            x = x.checked_add(p.rank).expect("rank overflow");
            y += Rat::from_integer(p.degree());
            breakpoints.push((x, y.clone()));
        }
        NewtonPolygon { breakpoints }
    }

    /// Hull value at integer `k` in `0..=rank`: maximal degree over the
    /// top-k-rank part, i.e. the sum of the top `k` slope-vector entries.
    pub fn hn(&self, k: u32) -> Rat {
        assert!(k <= self.rank(), "hn index out of range");
        let mut remaining = k;
        let mut acc = Rat::zero();
        for p in &self.pieces {
            if remaining == 0 {
                break;
            }
            let take = remaining.min(p.rank);
            acc += p.slope.clone() * BigInt::from(take);
            remaining -= take;
        }
        acc
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .pieces
            .iter()
            .map(|p| format!("O({}|{})", p.degree(), p.rank))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Breakpoints of the concave upper hull `k -> hn(k)`.
///
/// The x-coordinates strictly increase from 0 to the rank, the value at 0 is
/// 0, segment slopes strictly decrease, and the value at the rank is the
/// total degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewtonPolygon {
    breakpoints: Vec<(u32, Rat)>,
}

impl NewtonPolygon {
    pub fn breakpoints(&self) -> &[(u32, Rat)] {
        &self.breakpoints
    }
}

/// `Σ_{i<j} (v_i − v_j)`, computed on the vector as given (no resorting).
pub fn two_rho_pairing(v: &[Rat]) -> Rat {
    // The coefficient of v_i is (n-1) - 2i for 0-based i.
    let n = v.len() as i64;
    let mut acc = Rat::zero();
    for (i, x) in v.iter().enumerate() {
        let coeff = (n - 1) - 2 * (i as i64);
        acc += x.clone() * BigInt::from(coeff);
    }
    acc
}

/// Weakly-decreasing resort of a slope vector.
pub fn dominant_sort(v: &[Rat]) -> Vec<Rat> {
    let mut w = v.to_vec();
    w.sort_by(|a, b| b.cmp(a));
    w
}

/// Dominance order on weakly decreasing vectors of equal length and total:
/// true iff every partial sum of `u` is at most the matching partial sum of
/// `v` and the totals are equal.
pub fn dominance_leq(u: &[Rat], v: &[Rat]) -> Result<bool, SlopeError> {
    if u.len() != v.len() {
        return Err(SlopeError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut su = Rat::zero();
    let mut sv = Rat::zero();
    for (a, b) in u.iter().zip(v.iter()) {
        su += a.clone();
        sv += b.clone();
        if su > sv {
            return Ok(false);
        }
    }
    Ok(su == sv)
}

/// A slope bound that may be infinite; the minimal slope of a zero bundle is
/// plus infinity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExtendedSlope {
    Finite(Rat),
    Infinity,
}

impl ExtendedSlope {
    /// Minimal slope of an optional bundle, infinite for the zero bundle.
    pub fn nu_min(b: Option<&Bundle>) -> ExtendedSlope {
        match b {
            Some(b) => ExtendedSlope::Finite(b.nu_min()),
            None => ExtendedSlope::Infinity,
        }
    }
}

impl fmt::Display for ExtendedSlope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedSlope::Finite(r) => write!(f, "{r}"),
            ExtendedSlope::Infinity => write!(f, "inf"),
        }
    }
}

/// All canonical bundles of rank `n` and degree `d` whose slopes lie in
/// `[window.0, window.1]`, in a deterministic order.
///
/// A canonical bundle is equivalent to a strictly decreasing sequence of
/// (slope, rank) pieces with integral piece degrees, so the enumeration walks
/// piece (rank, degree) pairs top-down. The window is required because the
/// set of all rank-n degree-d classes is infinite.
pub fn enumerate_bundles(n: u32, d: i64, window: (&Rat, &Rat)) -> Vec<Bundle> {
    let (lo, hi) = window;
    let mut out = Vec::new();
    if n == 0 || lo > hi {
        return out;
    }
    let mut stack: Vec<(Rat, u32)> = Vec::new();
    // Recursive enumeration: pick the next piece (rank r, integral degree e)
    // with slope e/r strictly below the previous slope and within the window,
    // pruning by what the remaining rank can still achieve.
    fn go(
        remaining_rank: u32,
        remaining_deg: Rat,
        max_slope_excl: Option<&Rat>, // next slope must be strictly below this
        lo: &Rat,
        hi: &Rat,
        stack: &mut Vec<(Rat, u32)>,
        out: &mut Vec<Bundle>,
    ) {
        if remaining_rank == 0 {
            if remaining_deg.is_zero() {
                out.push(
                    canonicalize(stack.iter().cloned()).expect("enumerated pieces are canonical"),
                );
            }
            return;
        }
        // Feasibility pruning: remaining degree must fit between
        // lo * remaining and (strict upper bound) * remaining.
        let rem = BigInt::from(remaining_rank);
        if remaining_deg < lo.clone() * rem.clone() {
            return;
        }
        if let Some(m) = max_slope_excl {
            // All remaining slopes are strictly below m.
            if remaining_deg >= m.clone() * rem.clone() {
                return;
            }
        } else if remaining_deg > hi.clone() * rem.clone() {
            return;
        }
        for r in 1..=remaining_rank {
            // Integral degree e for this piece, slope e/r in [lo, upper).
            let rb = BigInt::from(r);
            // e <= floor(upper_bound * r), strictly below max_slope_excl.
            let e_hi = match max_slope_excl {
                Some(m) => {
                    let bound = m.clone() * rb.clone();
                    if bound.is_integer() {
                        bound.to_integer() - 1
                    } else {
                        bound.floor().to_integer()
                    }
                }
                None => (hi.clone() * rb.clone()).floor().to_integer(),
            };
            let e_lo = (lo.clone() * rb.clone()).ceil().to_integer();
            let mut e = e_hi.clone();
            while e >= e_lo {
                let slope = Rat::new(e.clone(), rb.clone());
                stack.push((slope.clone(), r));
                go(
                    remaining_rank - r,
                    remaining_deg.clone() - Rat::from_integer(e.clone()),
                    Some(&slope),
                    lo,
                    hi,
                    stack,
                    out,
                );
                stack.pop();
                e -= BigInt::one();
            }
        }
    }
    go(
        n,
        rint(d),
        None,
        lo,
        hi,
        &mut stack,
        &mut out,
    );
    // Deterministic order and duplicate elimination. Distinct piece sequences
    // give distinct canonical bundles, but dedup keeps the contract explicit.
    out.sort();
    out.dedup();
    out
}

// JSON encoding: {"pieces":[{"slope":{"num":N,"den":D},"rank":R},...]} with
// canonical order enforced on read.

#[derive(Serialize, Deserialize)]
struct RatJson {
    num: i64,
    den: i64,
}

#[derive(Serialize, Deserialize)]
struct PieceJson {
    slope: RatJson,
    rank: u32,
}

#[derive(Serialize, Deserialize)]
struct BundleJson {
    pieces: Vec<PieceJson>,
}

pub(crate) fn rat_to_json_parts(r: &Rat) -> (i64, i64) {
    let num = i64::try_from(r.numer()).expect("slope numerator exceeds i64 for JSON encoding");
    let den = i64::try_from(r.denom()).expect("slope denominator exceeds i64 for JSON encoding");
    (num, den)
}

pub(crate) fn rat_from_json_parts(num: i64, den: i64) -> Result<Rat, String> {
    if den <= 0 {
        return Err(format!("denominator must be positive, got {den}"));
    }
    let r = Rat::new(BigInt::from(num), BigInt::from(den));
    if i64::try_from(r.denom()) != Ok(den) && num != 0 {
        // Not reduced; accept but the canonical value is the reduced one.
        // Reject to keep encodings unique.
        return Err(format!("rational {num}/{den} is not in lowest terms"));
    }
    if num == 0 && den != 1 {
        return Err(format!("rational 0/{den} is not in lowest terms"));
    }
    Ok(r)
}

/// Serde adapter encoding a `Rat` as a two-element `[num, den]` array in
/// lowest terms with a positive denominator. Use with
/// `#[serde(with = "crate::slope::rat_serde")]`.
pub mod rat_serde {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rat, serializer: S) -> Result<S::Ok, S::Error> {
        rat_to_json_parts(r).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
        let (num, den) = <(i64, i64)>::deserialize(deserializer)?;
        rat_from_json_parts(num, den).map_err(D::Error::custom)
    }
}

/// Serde adapter for `Vec<Rat>` with each entry encoded as `[num, den]`.
pub mod rat_vec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rat], serializer: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(rat_to_json_parts)
            .collect::<Vec<_>>()
            .serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Rat>, D::Error> {
        let parts = Vec::<(i64, i64)>::deserialize(deserializer)?;
        parts
            .into_iter()
            .map(|(num, den)| rat_from_json_parts(num, den).map_err(D::Error::custom))
            .collect()
    }
}

impl Serialize for Bundle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let json = BundleJson {
            pieces: self
                .pieces
                .iter()
                .map(|p| {
                    let (num, den) = rat_to_json_parts(&p.slope);
                    PieceJson {
                        slope: RatJson { num, den },
                        rank: p.rank,
                    }
                })
                .collect(),
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = BundleJson::deserialize(deserializer)?;
        let mut pieces = Vec::new();
        for p in json.pieces {
            let slope =
                rat_from_json_parts(p.slope.num, p.slope.den).map_err(D::Error::custom)?;
            pieces.push((slope, p.rank));
        }
        canonicalize(pieces).map_err(|e| D::Error::custom(e.to_string()))
    }
}
