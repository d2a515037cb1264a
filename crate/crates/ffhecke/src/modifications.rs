//! Existence and enumeration of colength-one bundle modifications, the exact
//! rule for semistable sources, Hodge-Newton-style reducibility
//! classification with verified reduction witnesses, and the shift ledger of
//! the parabolic transport.

use crate::slope::{
    canonicalize, dominance_leq, dominant_sort, enumerate_bundles, rint, two_rho_pairing, Bundle,
    Rat,
};
use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModError {
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: u32, right: u32 },
    #[error("source bundle is not semistable")]
    NotSemistable,
    #[error("no modification between the given bundles")]
    NoModification,
    #[error("reduction datum violates its invariants: {0}")]
    InvalidReduction(String),
    #[error("transport shift is not an integer: {0}")]
    NonIntegralShift(String),
}

/// The three modification types: the colength-one elementary modification
/// raising the degree by one (`Std`), its inverse direction (`StdDual`), and
/// the determinant twist (`Det`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModType {
    Std,
    StdDual,
    Det,
}

/// Which of the two reducibility patterns a witness realizes: the bottom
/// block is preserved (`Hn`) or the top block is preserved (`OmegaHn`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReductionKind {
    Hn,
    OmegaHn,
}

/// Witness of reducibility of a colength-one modification through a two-block
/// Levi `GL_{m1} x GL_{m2}`.
///
/// Invariants (checked on construction):
/// - `Hn`: `theta.1 == theta_prime.1`, `kappa(theta_prime.0) == kappa(theta.0) + 1`,
///   `nu_max(theta_prime.1) < nu_min(theta_prime.0)`, `nu_max(theta.1) <= nu_min(theta.0)`.
/// - `OmegaHn`: `theta.0 == theta_prime.0`, `kappa(theta_prime.1) == kappa(theta.1) + 1`,
///   `nu_max(theta.1) < nu_min(theta.0)`, `nu_max(theta_prime.1) <= nu_min(theta_prime.0)`.
///
/// The elementary cocharacter reduces to the first factor for `Hn` and to the
/// second factor for `OmegaHn`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionDatum {
    pub kind: ReductionKind,
    pub m1: u32,
    pub m2: u32,
    pub theta: (Bundle, Bundle),
    pub theta_prime: (Bundle, Bundle),
}

impl ReductionDatum {
    pub fn new(
        kind: ReductionKind,
        theta: (Bundle, Bundle),
        theta_prime: (Bundle, Bundle),
    ) -> Result<Self, ModError> {
        let m1 = theta.0.rank();
        let m2 = theta.1.rank();
        let d = Self {
            kind,
            m1,
            m2,
            theta,
            theta_prime,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ModError> {
        let err = |msg: String| Err(ModError::InvalidReduction(msg));
        if self.m1 == 0 || self.m2 == 0 {
            return err("block sizes must be positive".into());
        }
        if self.theta.0.rank() != self.m1
            || self.theta_prime.0.rank() != self.m1
            || self.theta.1.rank() != self.m2
            || self.theta_prime.1.rank() != self.m2
        {
            return err("block ranks do not match the factors".into());
        }
        match self.kind {
            ReductionKind::Hn => {
                if self.theta.1 != self.theta_prime.1 {
                    return err("bottom factors must agree".into());
                }
                if self.theta_prime.0.kappa() != self.theta.0.kappa() + BigInt::one() {
                    return err("top factor degree must rise by one".into());
                }
                if self.theta_prime.1.nu_max() >= self.theta_prime.0.nu_min() {
                    return err("target blocks must be strictly separated".into());
                }
                if self.theta.1.nu_max() > self.theta.0.nu_min() {
                    return err("source blocks must be weakly separated".into());
                }
            }
            ReductionKind::OmegaHn => {
                if self.theta.0 != self.theta_prime.0 {
                    return err("top factors must agree".into());
                }
                if self.theta_prime.1.kappa() != self.theta.1.kappa() + BigInt::one() {
                    return err("bottom factor degree must rise by one".into());
                }
                if self.theta.1.nu_max() >= self.theta.0.nu_min() {
                    return err("source blocks must be strictly separated".into());
                }
                if self.theta_prime.1.nu_max() > self.theta_prime.0.nu_min() {
                    return err("target blocks must be weakly separated".into());
                }
            }
        }
        Ok(())
    }

    /// Source bundle `theta.0 + theta.1`.
    pub fn source(&self) -> Bundle {
        self.theta.0.direct_sum(&self.theta.1)
    }

    /// Target bundle `theta_prime.0 + theta_prime.1`.
    pub fn target(&self) -> Bundle {
        self.theta_prime.0.direct_sum(&self.theta_prime.1)
    }

    /// Index (0 or 1) of the factor carrying the elementary cocharacter.
    pub fn mu_factor(&self) -> usize {
        match self.kind {
            ReductionKind::Hn => 0,
            ReductionKind::OmegaHn => 1,
        }
    }
}

/// Per-index margins of the polygon sandwich `hull_b(k) <= hull_b'(k) <=
/// hull_b(k) + 1`, usable as machine-checkable evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichMargins {
    pub k: Vec<u32>,
    /// `hull_b'(k) - hull_b(k)`, each `>= 0`.
    #[serde(with = "crate::slope::rat_vec_serde")]
    pub lower_margin: Vec<Rat>,
    /// `hull_b(k) + 1 - hull_b'(k)`, each `>= 0`.
    #[serde(with = "crate::slope::rat_vec_serde")]
    pub upper_margin: Vec<Rat>,
}

/// Total rank of the pieces of `b` with slope `>= lambda` (or `> lambda`
/// when `strict`).
fn rank_above(b: &Bundle, lambda: &Rat, strict: bool) -> u32 {
    b.pieces()
        .iter()
        .filter(|p| {
            if strict {
                p.slope() > lambda
            } else {
                p.slope() >= lambda
            }
        })
        .map(|p| p.rank())
        .sum()
}

/// An injection of sheaves can only raise slopes, so it restricts to the
/// upper slope truncations: a modification from `b` to `b_prime` forces
/// `rk(b^{>=lambda}) <= rk(b_prime^{>=lambda})` (and the strict variant) for
/// every slope `lambda`.
fn truncation_ranks_ok(b: &Bundle, b_prime: &Bundle) -> bool {
    b.pieces()
        .iter()
        .chain(b_prime.pieces())
        .all(|p| {
            rank_above(b, p.slope(), false) <= rank_above(b_prime, p.slope(), false)
                && rank_above(b, p.slope(), true) <= rank_above(b_prime, p.slope(), true)
        })
}

fn sandwich(b: &Bundle, b_prime: &Bundle) -> Option<SandwichMargins> {
    let n = b.rank();
    if b_prime.kappa() != b.kappa() + BigInt::one() {
        return None;
    }
    if !truncation_ranks_ok(b, b_prime) {
        return None;
    }
    let mut k = Vec::with_capacity(n as usize);
    let mut lower = Vec::with_capacity(n as usize);
    let mut upper = Vec::with_capacity(n as usize);
    for i in 1..=n {
        let lo = b_prime.hn(i) - b.hn(i);
        let hi = rint(1) - lo.clone();
        if lo < rint(0) || hi < rint(0) {
            return None;
        }
        k.push(i);
        lower.push(lo);
        upper.push(hi);
    }
    Some(SandwichMargins {
        k,
        lower_margin: lower,
        upper_margin: upper,
    })
}

/// Whether a modification of the given type exists from `b` to `b_prime`.
///
/// For `Std` the implemented criterion is the polygon sandwich: equal rank,
/// degree raised by one, and `hull_b(k) <= hull_b'(k) <= hull_b(k) + 1` for
/// every `k`. This is a sound over-approximation of reachability in general
/// and exact on semistable sources (see [`basic_reach_exact`]). For `Det` the
/// target must be exactly the twist of the source by one; `StdDual` is the
/// dualized `Std` criterion.
pub fn exists_mod(b: &Bundle, b_prime: &Bundle, mu: ModType) -> Result<bool, ModError> {
    if b.rank() != b_prime.rank() {
        return Err(ModError::RankMismatch {
            left: b.rank(),
            right: b_prime.rank(),
        });
    }
    Ok(match mu {
        ModType::Std => sandwich(b, b_prime).is_some(),
        ModType::StdDual => sandwich(&b.dual(), &b_prime.dual()).is_some(),
        ModType::Det => *b_prime == b.twist(1),
    })
}

/// Sandwich margins as evidence for an existing `Std` modification.
pub fn std_mod_evidence(b: &Bundle, b_prime: &Bundle) -> Result<Option<SandwichMargins>, ModError> {
    if b.rank() != b_prime.rank() {
        return Err(ModError::RankMismatch {
            left: b.rank(),
            right: b_prime.rank(),
        });
    }
    Ok(sandwich(b, b_prime))
}

/// The enumeration window justified by slope monotonicity plus the one-step
/// polygon bound: slopes in `[nu_min(b), max(nu_max(b) + 1, 1)]`.
pub fn reach_window(b: &Bundle) -> (Rat, Rat) {
    let lo = b.nu_min();
    let hi = (b.nu_max() + rint(1)).max(rint(1));
    (lo, hi)
}

/// All degree-plus-one targets passing the `Std` sandwich, in deterministic
/// order. Every member has the rank of `b`, degree `kappa(b) + 1`, and weakly
/// larger extreme slopes.
pub fn reach_over(b: &Bundle) -> Vec<Bundle> {
    let (lo, hi) = reach_window(b);
    let d = i64::try_from(&(b.kappa() + BigInt::one())).expect("degree exceeds i64");
    enumerate_bundles(b.rank(), d, (&lo, &hi))
        .into_iter()
        .filter(|c| sandwich(b, c).is_some())
        .collect()
}

/// Exact reachability from a semistable source: all targets with degree
/// raised by one whose slope vector is dominated by the dominant resort of
/// `nu_b` plus the elementary cocharacter `(1, 0, ..., 0)`.
pub fn basic_reach_exact(b: &Bundle) -> Result<Vec<Bundle>, ModError> {
    if !b.is_semistable() {
        return Err(ModError::NotSemistable);
    }
    let mut bound = b.newton_point();
    bound[0] += rint(1);
    let bound = dominant_sort(&bound);
    let (lo, hi) = reach_window(b);
    let d = i64::try_from(&(b.kappa() + BigInt::one())).expect("degree exceeds i64");
    Ok(enumerate_bundles(b.rank(), d, (&lo, &hi))
        .into_iter()
        .filter(|c| dominance_leq(&c.newton_point(), &bound).expect("equal lengths"))
        .collect())
}

/// Classify the reducibility of the `Std` modification from `b` to `b_prime`.
///
/// Returns an `Hn` witness when the minimal slopes agree (split both bundles
/// at the bottom piece boundary of the target), an `OmegaHn` witness when the
/// maximal slopes agree (split at the top piece of the source), and `None`
/// when neither. When both apply, the `Hn` witness is returned.
pub fn classify_reducibility(
    b: &Bundle,
    b_prime: &Bundle,
) -> Result<Option<ReductionDatum>, ModError> {
    if !exists_mod(b, b_prime, ModType::Std)? {
        return Err(ModError::NoModification);
    }
    if b.nu_min() == b_prime.nu_min() {
        return Ok(Some(split_hn(b, b_prime)?));
    }
    if b.nu_max() == b_prime.nu_max() {
        return Ok(Some(split_omega_hn(b, b_prime)?));
    }
    Ok(None)
}

/// Split off the bottom `m2` ranks of a bundle whose minimal slope fills at
/// least that rank: returns (top remainder, bottom part).
fn split_bottom(b: &Bundle, m2: u32) -> Result<(Bundle, Bundle), ModError> {
    let bottom_piece = b.pieces().last().expect("non-empty");
    if bottom_piece.rank() < m2 || b.rank() <= m2 {
        return Err(ModError::InvalidReduction(format!(
            "cannot split {m2} ranks off the bottom of {b}"
        )));
    }
    let bottom = Bundle::isoclinic(bottom_piece.slope().clone(), m2)
        .expect("bottom slope times full piece rank is integral");
    let top = canonicalize(
        b.pieces()
            .iter()
            .map(|p| (p.slope().clone(), p.rank()))
            .take(b.pieces().len() - 1)
            .chain(
                (bottom_piece.rank() > m2)
                    .then(|| (bottom_piece.slope().clone(), bottom_piece.rank() - m2)),
            ),
    )
    .map_err(|e| ModError::InvalidReduction(e.to_string()))?;
    Ok((top, bottom))
}

/// Split off the top `m1` ranks: returns (top part, bottom remainder).
fn split_top(b: &Bundle, m1: u32) -> Result<(Bundle, Bundle), ModError> {
    let (bottom_dual, top_dual) = split_bottom(&b.dual(), m1)?;
    Ok((top_dual.dual(), bottom_dual.dual()))
}

fn split_hn(b: &Bundle, b_prime: &Bundle) -> Result<ReductionDatum, ModError> {
    // Equal minimal slopes: share the bottom piece of the target.
    let m2 = b_prime.rk_min();
    let (target_top, target_bottom) = split_bottom(b_prime, m2)?;
    let (source_top, source_bottom) = split_bottom(b, m2)?;
    debug_assert_eq!(source_bottom, target_bottom);
    ReductionDatum::new(
        ReductionKind::Hn,
        (source_top, source_bottom),
        (target_top, target_bottom),
    )
}

fn split_omega_hn(b: &Bundle, b_prime: &Bundle) -> Result<ReductionDatum, ModError> {
    // Equal maximal slopes: share the top piece of the source.
    let m1 = b.pieces().first().expect("non-empty").rank();
    let (source_top, source_bottom) = split_top(b, m1)?;
    let (target_top, target_bottom) = split_top(b_prime, m1)?;
    debug_assert_eq!(source_top, target_top);
    ReductionDatum::new(
        ReductionKind::OmegaHn,
        (source_top, source_bottom),
        (target_top, target_bottom),
    )
}

/// The two factor-wise pairs of a reduction together with the integer ledger
/// shift of the parabolic transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transport {
    /// `(theta_i, theta_prime_i, carries_mu)` per factor.
    pub subclaims: Vec<(Bundle, Bundle, bool)>,
    pub shift: BigInt,
}

/// Evaluate the transport shift
/// `<2rho_G, nu_b' - mu - nu_b> - <2rho_M, nu_theta' - mu_M - nu_theta>`
/// with every vector taken in its dominant coordinates per group factor, and
/// assert the result is an integer.
pub fn reduction_transport(d: &ReductionDatum) -> Result<Transport, ModError> {
    d.validate()?;
    let b = d.source();
    let b_prime = d.target();
    let n = b.rank() as usize;

    let pair_g = |v: &[Rat]| two_rho_pairing(&dominant_sort(v));
    let mut mu_g = vec![rint(0); n];
    mu_g[0] = rint(1);

    let g_part = pair_g(&b_prime.newton_point()) - pair_g(&mu_g) - pair_g(&b.newton_point());

    // The Levi-side pairing is the sum over the two blocks; the reduced
    // cocharacter is the elementary one on the mu factor and zero elsewhere.
    let m_pair = |top: &Bundle, bottom: &Bundle| {
        pair_g(&top.newton_point()) + pair_g(&bottom.newton_point())
    };
    let mu_factor = d.mu_factor();
    let mu_m_pairing = if mu_factor == 0 {
        rint(d.m1 as i64 - 1)
    } else {
        rint(d.m2 as i64 - 1)
    };
    let m_part = m_pair(&d.theta_prime.0, &d.theta_prime.1)
        - mu_m_pairing
        - m_pair(&d.theta.0, &d.theta.1);

    let shift = g_part - m_part;
    if !shift.is_integer() {
        return Err(ModError::NonIntegralShift(shift.to_string()));
    }
    Ok(Transport {
        subclaims: vec![
            (d.theta.0.clone(), d.theta_prime.0.clone(), mu_factor == 0),
            (d.theta.1.clone(), d.theta_prime.1.clone(), mu_factor == 1),
        ],
        shift: shift.to_integer(),
    })
}
