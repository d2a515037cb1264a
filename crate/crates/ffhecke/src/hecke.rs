//! Symbolic stalk calculus on formal category labels: the label attached to a
//! block character, the degree-shifting stalk map, greedy factorization of a
//! non-negative character into elementary steps, and the isotypic
//! decomposition of the standard representation restricted to block scalars.
//!
//! Galois-theoretic factors are opaque string labels carrying only a validity
//! promise (`lst_valid`); no representation theory is computed here.

use crate::levi::{b_of_chi, factor_slope, Character, LeviDatum, LeviError};
use crate::slope::{Bundle, Rat};
use num_bigint::BigInt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeckeError {
    #[error("parameter datum is not marked Langlands-Shahidi valid")]
    InvalidParameter,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("character has a negative entry: {0}")]
    NegativeCharacter(String),
    #[error("invalid category label: {0}")]
    InvalidLabel(String),
    #[error("stalk composition disagrees with the direct computation: {0}")]
    CoherenceFailure(String),
    #[error(transparent)]
    Levi(#[from] LeviError),
}

/// Block shape plus opaque factor labels with the pairwise-distinctness
/// promise required for the stalk calculus to apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterDatum {
    levi: LeviDatum,
    factor_ids: Vec<String>,
    lst_valid: bool,
}

impl ParameterDatum {
    pub fn new(
        levi: LeviDatum,
        factor_ids: Vec<String>,
        lst_valid: bool,
    ) -> Result<Self, HeckeError> {
        if factor_ids.len() != levi.num_parts() {
            return Err(HeckeError::LengthMismatch {
                expected: levi.num_parts(),
                got: factor_ids.len(),
            });
        }
        let mut seen = factor_ids.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != factor_ids.len() {
            return Err(HeckeError::InvalidParameter);
        }
        Ok(Self {
            levi,
            factor_ids,
            lst_valid,
        })
    }

    /// Convenience constructor with generated factor labels `phi1..phir` and
    /// the validity promise set.
    pub fn generic(levi: LeviDatum) -> Self {
        let ids = (1..=levi.num_parts()).map(|i| format!("phi{i}")).collect();
        Self::new(levi, ids, true).expect("generated labels are distinct")
    }

    pub fn levi(&self) -> &LeviDatum {
        &self.levi
    }

    pub fn factor_ids(&self) -> &[String] {
        &self.factor_ids
    }

    pub fn lst_valid(&self) -> bool {
        self.lst_valid
    }
}

/// A formal object label: a bundle together with an exact tiling of its
/// pieces by the block factors, or the distinguished absorbing `Zero`.
///
/// The assignment stores, per isoclinic piece (in the bundle's canonical
/// order), the sorted factor indices (0-based) living on that piece; the
/// factor ranks tile the piece rank exactly and each factor's degree on its
/// piece is an integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CategoryLabel {
    Zero,
    Label { bundle: Bundle, assignment: Vec<Vec<usize>> },
}

impl CategoryLabel {
    pub fn new(levi: &LeviDatum, bundle: Bundle, assignment: Vec<Vec<usize>>) -> Result<Self, HeckeError> {
        let label = CategoryLabel::Label { bundle, assignment };
        label.validate(levi)?;
        Ok(label)
    }

    pub fn validate(&self, levi: &LeviDatum) -> Result<(), HeckeError> {
        let CategoryLabel::Label { bundle, assignment } = self else {
            return Ok(());
        };
        let err = |msg: String| Err(HeckeError::InvalidLabel(msg));
        if assignment.len() != bundle.pieces().len() {
            return err(format!(
                "assignment has {} groups for {} pieces",
                assignment.len(),
                bundle.pieces().len()
            ));
        }
        let mut used = vec![false; levi.num_parts()];
        for (piece, group) in bundle.pieces().iter().zip(assignment) {
            if group.windows(2).any(|w| w[0] >= w[1]) {
                return err("factor indices in a group must be strictly increasing".into());
            }
            let mut total: u64 = 0;
            for &i in group {
                if i >= levi.num_parts() {
                    return err(format!("factor index {i} out of range"));
                }
                if std::mem::replace(&mut used[i], true) {
                    return err(format!("factor index {i} used twice"));
                }
                let n_i = levi.parts()[i];
                let degree = piece.slope() * Rat::from_integer(BigInt::from(n_i));
                if !degree.is_integer() {
                    return err(format!(
                        "factor {i} of rank {n_i} has non-integral degree on slope {}",
                        piece.slope()
                    ));
                }
                total += u64::from(n_i);
            }
            if total != u64::from(piece.rank()) {
                return err(format!(
                    "group ranks sum to {total} but the piece has rank {}",
                    piece.rank()
                ));
            }
        }
        if used.iter().any(|u| !u) {
            return err("every factor must appear exactly once".into());
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CategoryLabel::Zero)
    }

    pub fn bundle(&self) -> Option<&Bundle> {
        match self {
            CategoryLabel::Zero => None,
            CategoryLabel::Label { bundle, .. } => Some(bundle),
        }
    }

    pub fn assignment(&self) -> Option<&[Vec<usize>]> {
        match self {
            CategoryLabel::Zero => None,
            CategoryLabel::Label { assignment, .. } => Some(assignment),
        }
    }

    /// The per-factor degree vector read off the label: factor `i` on a piece
    /// of slope `s` carries degree `s * n_i` (integral by the invariant).
    pub fn factor_degrees(&self, levi: &LeviDatum) -> Option<Character> {
        let CategoryLabel::Label { bundle, assignment } = self else {
            return None;
        };
        let mut values = vec![0i64; levi.num_parts()];
        for (piece, group) in bundle.pieces().iter().zip(assignment) {
            for &i in group {
                let deg = piece.slope() * Rat::from_integer(BigInt::from(levi.parts()[i]));
                values[i] = i64::try_from(&deg.to_integer()).expect("factor degree exceeds i64");
            }
        }
        Some(Character::new(values))
    }
}

/// The canonical label on `b_{chi,L}`: factors are grouped by slope onto the
/// canonical pieces of the attached bundle.
pub fn label_of_chi(levi: &LeviDatum, chi: &Character) -> Result<CategoryLabel, HeckeError> {
    if chi.len() != levi.num_parts() {
        return Err(HeckeError::LengthMismatch {
            expected: levi.num_parts(),
            got: chi.len(),
        });
    }
    let (bundle, _) = b_of_chi(levi, chi)?;
    let assignment = bundle
        .pieces()
        .iter()
        .map(|piece| {
            (0..levi.num_parts())
                .filter(|&i| factor_slope(levi, chi, i) == *piece.slope())
                .collect()
        })
        .collect();
    CategoryLabel::new(levi, bundle, assignment)
}

/// The trivial label: every factor sits on the slope-zero bundle.
pub fn trivial_label(levi: &LeviDatum) -> CategoryLabel {
    label_of_chi(levi, &Character::zero(levi.num_parts())).expect("zero character is valid")
}

/// Outcome of a stalk computation: the unique non-vanishing target label (or
/// `Zero`), whether the restricted functor is an equivalence onto it, and the
/// integer shift ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StalkResult {
    pub target: CategoryLabel,
    pub is_equivalence: bool,
    pub shift_ledger: i64,
}

impl StalkResult {
    fn zero() -> Self {
        StalkResult {
            target: CategoryLabel::Zero,
            is_equivalence: false,
            shift_ledger: 0,
        }
    }
}

/// The stalk map on labels: each factor's degree moves by the corresponding
/// character entry and the target is the canonical label on the new bundle.
/// `Zero` is absorbing.
pub fn stalk(
    phi: &ParameterDatum,
    chi: &Character,
    source: &CategoryLabel,
) -> Result<StalkResult, HeckeError> {
    if !phi.lst_valid() {
        return Err(HeckeError::InvalidParameter);
    }
    if chi.len() != phi.levi().num_parts() {
        return Err(HeckeError::LengthMismatch {
            expected: phi.levi().num_parts(),
            got: chi.len(),
        });
    }
    source.validate(phi.levi())?;
    let Some(degrees) = source.factor_degrees(phi.levi()) else {
        return Ok(StalkResult::zero());
    };
    let new_degrees = degrees.mul(chi)?;
    let target = label_of_chi(phi.levi(), &new_degrees)?;
    Ok(StalkResult {
        target,
        is_equivalence: true,
        shift_ledger: 0,
    })
}

/// Stalk probed at a specific target bundle: the non-`Zero` result only when
/// the probe is the unique non-vanishing target.
pub fn stalk_probe(
    phi: &ParameterDatum,
    chi: &Character,
    source: &CategoryLabel,
    probe: &Bundle,
) -> Result<StalkResult, HeckeError> {
    let direct = stalk(phi, chi, source)?;
    if direct.target.bundle() == Some(probe) {
        Ok(direct)
    } else {
        Ok(StalkResult::zero())
    }
}

/// Restriction of the standard representation to the block scalars: one
/// summand per block, with character the indicator of that block and
/// multiplicity its rank.
pub fn decompose_std(phi: &ParameterDatum) -> Result<Vec<(Character, u32, String)>, HeckeError> {
    if !phi.lst_valid() {
        return Err(HeckeError::InvalidParameter);
    }
    let r = phi.levi().num_parts();
    Ok((0..r)
        .map(|c| {
            (
                Character::indicator(r, c),
                phi.levi().parts()[c],
                phi.factor_ids()[c].clone(),
            )
        })
        .collect())
}

/// Greedy factorization of a non-negative character into elementary indicator
/// steps `chi = chi_{c_1} * ... * chi_{c_k}` with `k = |chi|`.
///
/// Factors are chosen from the last step backwards: at each state, among the
/// indices with positive remaining value, pick the one of minimal slope
/// `chi(c)/n_c`, breaking ties by minimal block rank `n_c`, then by smallest
/// index. The returned sequence is in application order (first applied
/// first); its last entry is the pinned "final factor".
pub fn factor_chi(levi: &LeviDatum, chi: &Character) -> Result<Vec<usize>, HeckeError> {
    if chi.len() != levi.num_parts() {
        return Err(HeckeError::LengthMismatch {
            expected: levi.num_parts(),
            got: chi.len(),
        });
    }
    if !chi.is_nonnegative() {
        return Err(HeckeError::NegativeCharacter(chi.to_string()));
    }
    let mut state = chi.clone();
    let mut picks = Vec::with_capacity(usize::try_from(chi.total()).unwrap());
    while state.total() > 0 {
        let c = final_factor(levi, &state).expect("positive total has a positive entry");
        picks.push(c);
        state = state.mul(&Character::indicator(state.len(), c).inverse())?;
    }
    picks.reverse();
    Ok(picks)
}

/// The pinned minimizer used as the last factor of [`factor_chi`]: among
/// indices with `chi(c) > 0`, minimal `chi(c)/n_c`, then minimal `n_c`, then
/// smallest index. `None` when `chi` has no positive entry.
pub fn final_factor(levi: &LeviDatum, chi: &Character) -> Option<usize> {
    (0..levi.num_parts())
        .filter(|&c| chi.get(c) > 0)
        .min_by_key(|&c| (factor_slope(levi, chi, c), levi.parts()[c]))
}

/// All indices tied with the pinned minimizer on (slope, rank); used by the
/// certifier's tie-break fallback.
pub fn final_factor_candidates(levi: &LeviDatum, chi: &Character) -> Vec<usize> {
    let Some(best) = final_factor(levi, chi) else {
        return Vec::new();
    };
    let key = (factor_slope(levi, chi, best), levi.parts()[best]);
    (0..levi.num_parts())
        .filter(|&c| chi.get(c) > 0 && (factor_slope(levi, chi, c), levi.parts()[c]) == key)
        .collect()
}

/// Composite stalk computed by chaining, asserted to agree with the direct
/// computation on the product character.
pub fn compose(
    phi: &ParameterDatum,
    chi: &Character,
    chi_prime: &Character,
    source: &CategoryLabel,
) -> Result<StalkResult, HeckeError> {
    let first = stalk(phi, chi, source)?;
    let chained = stalk(phi, chi_prime, &first.target)?;
    let direct = stalk(phi, &chi.mul(chi_prime)?, source)?;
    if chained.target != direct.target {
        return Err(HeckeError::CoherenceFailure(format!(
            "chained target differs from direct target for chi={chi}, chi'={chi_prime}"
        )));
    }
    Ok(direct)
}

// JSON encoding: Zero as the string "zero", otherwise
// {"bundle": ..., "assignment": [[1],[2,3]]} with 1-based factor indices.
#[derive(Serialize, Deserialize)]
struct LabelJson {
    bundle: Bundle,
    assignment: Vec<Vec<usize>>,
}

impl Serialize for CategoryLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CategoryLabel::Zero => "zero".serialize(serializer),
            CategoryLabel::Label { bundle, assignment } => LabelJson {
                bundle: bundle.clone(),
                assignment: assignment
                    .iter()
                    .map(|g| g.iter().map(|&i| i + 1).collect())
                    .collect(),
            }
            .serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for CategoryLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Zero(String),
            Label(LabelJson),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Zero(s) if s == "zero" => Ok(CategoryLabel::Zero),
            Repr::Zero(s) => Err(D::Error::custom(format!("unknown label tag {s:?}"))),
            Repr::Label(l) => {
                let mut assignment = Vec::with_capacity(l.assignment.len());
                for group in l.assignment {
                    let mut g = Vec::with_capacity(group.len());
                    for i in group {
                        if i == 0 {
                            return Err(D::Error::custom("factor indices are 1-based"));
                        }
                        g.push(i - 1);
                    }
                    assignment.push(g);
                }
                Ok(CategoryLabel::Label {
                    bundle: l.bundle,
                    assignment,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levi::det_normalize;
    use crate::slope::{canonicalize, rat, rint};

    fn levi(parts: &[u32]) -> LeviDatum {
        LeviDatum::new(parts.to_vec()).unwrap()
    }

    fn chi(v: &[i64]) -> Character {
        Character::new(v.to_vec())
    }

    fn b(pieces: &[(i64, i64, u32)]) -> Bundle {
        canonicalize(pieces.iter().map(|&(n, d, r)| (rat(n, d), r))).unwrap()
    }

    #[test]
    fn trivial_label_covers_all_factors() {
        let l = levi(&[2, 3, 3]);
        let t = trivial_label(&l);
        assert_eq!(t.bundle().unwrap(), &Bundle::trivial(8));
        assert_eq!(t.assignment().unwrap(), &[vec![0, 1, 2]]);
        assert_eq!(
            t.factor_degrees(&l).unwrap(),
            Character::zero(3)
        );
    }

    #[test]
    fn stalk_worked_example() {
        // L=(2,3,3), chi=(2,2,2) from the trivial source: slopes (1, 2/3)
        // with factor 1 on the slope-1 piece and factors 2,3 sharing 2/3.
        let l = levi(&[2, 3, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let res = stalk(&phi, &chi(&[2, 2, 2]), &trivial_label(&l)).unwrap();
        assert!(res.is_equivalence);
        assert_eq!(res.shift_ledger, 0);
        assert_eq!(res.target.bundle().unwrap(), &b(&[(1, 1, 2), (2, 3, 6)]));
        assert_eq!(res.target.assignment().unwrap(), &[vec![0], vec![1, 2]]);
    }

    #[test]
    fn stalk_identity_and_zero() {
        let l = levi(&[2, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let src = trivial_label(&l);
        let res = stalk(&phi, &Character::zero(2), &src).unwrap();
        assert_eq!(res.target, src);
        assert!(res.is_equivalence);

        let res = stalk(&phi, &chi(&[1, 0]), &CategoryLabel::Zero).unwrap();
        assert!(res.target.is_zero());
        assert!(!res.is_equivalence);

        let invalid = ParameterDatum::new(l.clone(), vec!["a".into(), "b".into()], false).unwrap();
        assert_eq!(
            stalk(&invalid, &chi(&[1, 0]), &src),
            Err(HeckeError::InvalidParameter)
        );
    }

    #[test]
    fn stalk_probe_vanishing_example() {
        // L=(3,4), chi=(2,2) from the trivial source lands on b_{(2,2),L};
        // probing b_{(1,3),L} sees Zero.
        let l = levi(&[3, 4]);
        let phi = ParameterDatum::generic(l.clone());
        let src = trivial_label(&l);
        let probe = b_of_chi(&l, &chi(&[1, 3])).unwrap().0;
        let res = stalk_probe(&phi, &chi(&[2, 2]), &src, &probe).unwrap();
        assert!(res.target.is_zero());
        let direct = stalk(&phi, &chi(&[2, 2]), &src).unwrap();
        let hit = stalk_probe(&phi, &chi(&[2, 2]), &src, direct.target.bundle().unwrap()).unwrap();
        assert_eq!(hit, direct);
    }

    #[test]
    fn decompose_std_examples() {
        let phi = ParameterDatum::generic(levi(&[2, 3, 3]));
        let d = decompose_std(&phi).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[0], (Character::indicator(3, 0), 2, "phi1".into()));
        assert_eq!(d[1], (Character::indicator(3, 1), 3, "phi2".into()));
        assert_eq!(d[2], (Character::indicator(3, 2), 3, "phi3".into()));
        assert_eq!(d.iter().map(|x| x.1).sum::<u32>(), 8);

        let d = decompose_std(&ParameterDatum::generic(levi(&[5]))).unwrap();
        assert_eq!(d, vec![(Character::indicator(1, 0), 5, "phi1".into())]);

        let d = decompose_std(&ParameterDatum::generic(levi(&[1, 1]))).unwrap();
        assert_eq!(d.iter().map(|x| x.1).sum::<u32>(), 2);
    }

    #[test]
    fn factor_chi_examples() {
        // Final factor for L=(3,4), chi=(2,2) is block 2 (slope 1/2 < 2/3).
        let l = levi(&[3, 4]);
        let seq = factor_chi(&l, &chi(&[2, 2])).unwrap();
        assert_eq!(seq.len(), 4);
        assert_eq!(*seq.last().unwrap(), 1);
        let mut counts = [0usize; 2];
        for c in &seq {
            counts[*c] += 1;
        }
        assert_eq!(counts, [2, 2]);

        // Single elementary character.
        let l = levi(&[2, 3, 3]);
        assert_eq!(
            factor_chi(&l, &Character::indicator(3, 1)).unwrap(),
            vec![1]
        );

        // Tie on slope 2/3 between blocks 2 and 3 resolves to the smaller
        // index, so the final factor is block 2 (0-based index 1).
        let seq = factor_chi(&l, &chi(&[2, 2, 2])).unwrap();
        assert_eq!(seq.len(), 6);
        assert_eq!(*seq.last().unwrap(), 1);
        assert_eq!(final_factor_candidates(&l, &chi(&[2, 2, 2])), vec![1, 2]);

        assert!(factor_chi(&l, &chi(&[1, -1, 0])).is_err());
    }

    #[test]
    fn compose_examples() {
        let l = levi(&[2, 3, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let src = trivial_label(&l);
        let direct = stalk(&phi, &chi(&[2, 2, 2]), &src).unwrap();
        let composed = compose(&phi, &chi(&[2, 2, 1]), &chi(&[0, 0, 1]), &src).unwrap();
        assert_eq!(composed, direct);

        let composed = compose(&phi, &chi(&[1, 0, 2]), &Character::zero(3), &src).unwrap();
        assert_eq!(composed, stalk(&phi, &chi(&[1, 0, 2]), &src).unwrap());
    }

    #[test]
    fn stalk_round_trip_is_identity() {
        let l = levi(&[2, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let src = trivial_label(&l);
        let x = chi(&[3, 1]);
        let fwd = stalk(&phi, &x, &src).unwrap();
        assert!(fwd.is_equivalence);
        let back = stalk(&phi, &x.inverse(), &fwd.target).unwrap();
        assert!(back.is_equivalence);
        assert_eq!(back.target, src);
    }

    #[test]
    fn kappa_moves_by_chi_total() {
        let l = levi(&[2, 3, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let src = trivial_label(&l);
        for x in [chi(&[2, 2, 2]), chi(&[0, 1, 4]), chi(&[-1, 2, 0])] {
            let res = stalk(&phi, &x, &src).unwrap();
            let diff = res.target.bundle().unwrap().kappa()
                - src.bundle().unwrap().kappa();
            assert_eq!(diff, BigInt::from(x.total()));
        }
    }

    #[test]
    fn sigma_equivariance_on_equal_parts() {
        // Swapping the two rank-3 blocks of L=(2,3,3) together with chi
        // leaves the target bundle fixed and permutes the assignment.
        let l = levi(&[2, 3, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let src = trivial_label(&l);
        let a = stalk(&phi, &chi(&[1, 2, 4]), &src).unwrap();
        let b = stalk(&phi, &chi(&[1, 4, 2]), &src).unwrap();
        assert_eq!(a.target.bundle(), b.target.bundle());
        let swap = |g: &Vec<usize>| {
            let mut h: Vec<usize> = g
                .iter()
                .map(|&i| match i {
                    1 => 2,
                    2 => 1,
                    other => other,
                })
                .collect();
            h.sort();
            h
        };
        let swapped: Vec<Vec<usize>> = a.target.assignment().unwrap().iter().map(swap).collect();
        assert_eq!(swapped, b.target.assignment().unwrap());
    }

    #[test]
    fn det_normalize_round_trip() {
        // Applying the normalized character then un-twisting by the
        // determinant power reproduces the direct target bundle.
        let l = levi(&[2, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let src = trivial_label(&l);
        let x = chi(&[-1, 0]);
        let (x_norm, k) = det_normalize(&l, &x).unwrap();
        assert_eq!((x_norm.clone(), k), (chi(&[1, 3]), 1));
        let direct = stalk(&phi, &x, &src).unwrap();
        let via_norm = stalk(&phi, &x_norm, &src).unwrap();
        assert_eq!(
            &via_norm.target.bundle().unwrap().twist(-k),
            direct.target.bundle().unwrap()
        );
    }

    #[test]
    fn label_json_round_trip() {
        let l = levi(&[2, 3, 3]);
        let phi = ParameterDatum::generic(l.clone());
        let res = stalk(&phi, &chi(&[2, 2, 2]), &trivial_label(&l)).unwrap();
        let text = serde_json::to_string(&res.target).unwrap();
        assert!(text.contains("\"assignment\":[[1],[2,3]]"));
        let back: CategoryLabel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, res.target);

        let z = serde_json::to_string(&CategoryLabel::Zero).unwrap();
        assert_eq!(z, "\"zero\"");
        let back: CategoryLabel = serde_json::from_str(&z).unwrap();
        assert!(back.is_zero());

        // 0-based indices in JSON are rejected.
        assert!(serde_json::from_str::<CategoryLabel>(
            "{\"bundle\":{\"pieces\":[{\"slope\":{\"num\":0,\"den\":1},\"rank\":2}]},\"assignment\":[[0,1]]}"
        )
        .is_err());
        let _ = rint(0);
    }
}
