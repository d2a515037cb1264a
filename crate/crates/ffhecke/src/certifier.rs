//! Recursive case-analysis engine certifying, instance by instance, the
//! stalk statement for a block shape and character: every candidate target of
//! the elementary modification step is either the unique non-vanishing one or
//! is discharged by an explicit, independently re-checkable rule.
//!
//! The emitted [`DerivationNode`] tree stores every number the argument uses
//! (exact rationals, reduction witnesses, shift ledgers, candidate sets);
//! [`check_trace`] re-verifies all of them by recomputation, with the
//! explicitly marked exceptions of the two axiom rules ([`Rule::BaseR1Axiom`]
//! and [`Rule::Axiom11Case`]) and the reduction-transport rule itself.
//!
//! "Certified" therefore means: the combinatorial skeleton of the case
//! analysis closes for this instance, relative to the axiom nodes and the
//! transport rule — not a proof of the categorical statement.

use crate::hecke::final_factor_candidates;
use crate::levi::{b_of_chi, det_normalize, in_bgl, Character, LeviDatum};
use crate::modifications::{
    classify_reducibility, reach_over, reach_window, reduction_transport, ReductionDatum,
};
use crate::slope::{rat_serde, rint, Bundle, Rat};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// The statement being certified: for the given block shape and character,
/// with trivial source, every target of the composite elementary operator
/// vanishes except the canonical one, where the result is an equivalence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Claim {
    pub levi: LeviDatum,
    pub chi: Character,
}

impl Claim {
    pub fn new(levi: LeviDatum, chi: Character) -> Self {
        Claim { levi, chi }
    }
}

impl std::fmt::Display for Claim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(L={}, chi={})", self.levi, self.chi)
    }
}

/// Search limits: maximum recursion depth and maximum candidate-set size per
/// node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_depth: usize,
    pub max_candidates: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_depth: 64,
            max_candidates: 100_000,
        }
    }
}

/// Derivation rules. Each maps to one step of the case analysis; see the
/// matching [`Evidence`] variant for what is recorded and re-checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Reduce a character with negative entries to a non-negative one by a
    /// determinant twist.
    DetTwist,
    /// Base case: the character is zero or elementary.
    BaseChiC,
    /// Axiom: a single block (irreducible cuspidal support).
    BaseR1Axiom,
    /// Handle a candidate through a reducible two-block modification from a
    /// colength-one predecessor and the transport rule.
    ReduceViaHN,
    /// Documentation node: the enumeration window covers every reachable
    /// target, so unlisted bundles receive the zero stalk.
    NoModification,
    /// Discharge: the candidate matches no character of the block shape.
    NotInBGL,
    /// Discharge: the candidate has a negative minimal slope while the
    /// character is non-negative.
    NegativeMinSlope,
    /// Discharge the residual finite set of candidates by the four closure /
    /// separation conditions.
    ExceptionalSet,
    /// Inductive step: split off one elementary factor and analyze every
    /// candidate of the resulting elementary modification.
    CombineChi,
    /// Axiom: the two-block hom-vanishing case with character (1,1).
    Axiom11Case,
}

/// Which side of a [`Rule::ReduceViaHN`] node a candidate is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// The candidate is the canonical target: the reduction carries the
    /// non-vanishing stalk.
    Target,
    /// The candidate is not the canonical target: the reduction transports
    /// the vanishing statement.
    Discharge,
}

/// Exact-value closure evidence for an exceptional candidate: one of its
/// extreme slopes strictly exceeds the canonical target's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum ClosureEvidence {
    NuMaxGreater {
        #[serde(with = "rat_serde")]
        lhs: Rat,
        #[serde(with = "rat_serde")]
        rhs: Rat,
    },
    NuMinGreater {
        #[serde(with = "rat_serde")]
        lhs: Rat,
        #[serde(with = "rat_serde")]
        rhs: Rat,
    },
}

/// Separation evidence for one matching character of an exceptional
/// candidate: after cancelling one shared elementary factor `d`, the two
/// bundles are separated by an extreme slope — or the two-block (1,1) axiom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum Separation {
    NuMaxGreater {
        d: usize,
        #[serde(with = "rat_serde")]
        lhs: Rat,
        #[serde(with = "rat_serde")]
        rhs: Rat,
    },
    NuMinGreater {
        d: usize,
        #[serde(with = "rat_serde")]
        lhs: Rat,
        #[serde(with = "rat_serde")]
        rhs: Rat,
    },
    Axiom11 { child: usize },
}

/// One matching character of an exceptional candidate together with the
/// index of its sub-certification child and its separation evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalChi {
    pub chi: Character,
    pub child: usize,
    pub separation: Separation,
}

/// One member of the exceptional set with its four recorded conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalElement {
    pub bundle: Bundle,
    #[serde(with = "rat_serde")]
    pub nu_min: Rat,
    pub closure: ClosureEvidence,
    pub chis: Vec<ExceptionalChi>,
}

/// Typed numeric evidence, one variant per rule. Everything stored here is
/// recomputed by [`check_trace`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Evidence {
    DetTwist {
        det_power: i64,
        chi_norm: Character,
    },
    BaseChiC {
        total: i64,
    },
    BaseR1Axiom,
    CombineChi {
        /// Chosen final factor (0-based), drawn from the tie candidates.
        c: usize,
        chi_minor: Character,
        source: Bundle,
        #[serde(with = "rat_serde")]
        window_lo: Rat,
        #[serde(with = "rat_serde")]
        window_hi: Rat,
        /// All indices tied under the pinned minimizer rule, for the logged
        /// tie-break fallback.
        tie_candidates: Vec<usize>,
    },
    NoModification {
        source: Bundle,
        #[serde(with = "rat_serde")]
        window_lo: Rat,
        #[serde(with = "rat_serde")]
        window_hi: Rat,
        candidate_count: usize,
    },
    /// The candidate admits a reducible modification from the enclosing
    /// node's source bundle; the reduction datum and the integer shift of
    /// the transport are recorded.
    ReduceViaHN {
        role: Role,
        candidate: Bundle,
        datum: ReductionDatum,
        shift: i64,
    },
    NotInBGL {
        candidate: Bundle,
    },
    NegativeMinSlope {
        candidate: Bundle,
        #[serde(with = "rat_serde")]
        nu_min: Rat,
    },
    ExceptionalSet {
        elements: Vec<ExceptionalElement>,
    },
    Axiom11Case,
}

impl Evidence {
    pub fn rule(&self) -> Rule {
        match self {
            Evidence::DetTwist { .. } => Rule::DetTwist,
            Evidence::BaseChiC { .. } => Rule::BaseChiC,
            Evidence::BaseR1Axiom => Rule::BaseR1Axiom,
            Evidence::CombineChi { .. } => Rule::CombineChi,
            Evidence::NoModification { .. } => Rule::NoModification,
            Evidence::ReduceViaHN { .. } => Rule::ReduceViaHN,
            Evidence::NotInBGL { .. } => Rule::NotInBGL,
            Evidence::NegativeMinSlope { .. } => Rule::NegativeMinSlope,
            Evidence::ExceptionalSet { .. } => Rule::ExceptionalSet,
            Evidence::Axiom11Case => Rule::Axiom11Case,
        }
    }
}

/// One node of a derivation trace. Candidate-level nodes (`ReduceViaHN`,
/// `NoModification`, `NotInBGL`, `NegativeMinSlope`, `ExceptionalSet`) carry
/// the claim of the enclosing `CombineChi` node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationNode {
    pub rule: Rule,
    pub claim: Claim,
    pub evidence: Evidence,
    pub children: Vec<DerivationNode>,
}

impl DerivationNode {
    /// Depth-first listing of the whole trace.
    pub fn walk(&self) -> Vec<&DerivationNode> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let node = out[i];
            out.extend(node.children.iter());
            i += 1;
        }
        out
    }
}

/// Result of a certification run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Certified(Box<DerivationNode>),
    Failed { claim: Claim, reason: String },
    OutOfBudget,
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified(_))
    }
}

#[derive(Debug, Clone)]
enum Failure {
    Failed { claim: Claim, reason: String },
    OutOfBudget,
}

type CResult = Result<DerivationNode, Failure>;

/// Termination measure: lexicographic
/// (has-negative-entry, total rank, |chi|, #zero entries, minimal block rank
/// among the minimal-slope indices).
pub fn claim_measure(levi: &LeviDatum, chi: &Character) -> (u8, u32, i64, usize, u32) {
    let det = u8::from(chi.values().iter().any(|&v| v < 0));
    let n = levi.rank();
    let total = chi.values().iter().map(|v| v.abs()).sum();
    let zeros = chi.values().iter().filter(|&&v| v == 0).count();
    let nmin = if chi.values().iter().all(|&v| v == 0) {
        0
    } else {
        let min_slope = (0..levi.num_parts())
            .map(|d| crate::levi::factor_slope(levi, chi, d))
            .min()
            .expect("non-empty");
        (0..levi.num_parts())
            .filter(|&d| crate::levi::factor_slope(levi, chi, d) == min_slope)
            .map(|d| levi.parts()[d])
            .min()
            .expect("non-empty")
    };
    (det, n, total, zeros, nmin)
}

fn bundle_of(levi: &LeviDatum, chi: &Character) -> Bundle {
    b_of_chi(levi, chi).expect("valid character").0
}

struct Ctx<'a> {
    budget: &'a Budget,
    memo: HashMap<Claim, Result<DerivationNode, Failure>>,
}

/// Certify a claim within the given budget. Deterministic: identical inputs
/// produce identical traces.
pub fn certify(claim: &Claim, budget: &Budget) -> Verdict {
    if claim.chi.len() != claim.levi.num_parts() {
        return Verdict::Failed {
            claim: claim.clone(),
            reason: format!(
                "character length {} does not match {} blocks",
                claim.chi.len(),
                claim.levi.num_parts()
            ),
        };
    }
    let mut ctx = Ctx {
        budget,
        memo: HashMap::new(),
    };
    match certify_claim(&mut ctx, &claim.levi, &claim.chi, 0) {
        Ok(node) => Verdict::Certified(Box::new(node)),
        Err(Failure::Failed { claim, reason }) => Verdict::Failed { claim, reason },
        Err(Failure::OutOfBudget) => Verdict::OutOfBudget,
    }
}

fn certify_claim(ctx: &mut Ctx, levi: &LeviDatum, chi: &Character, depth: usize) -> CResult {
    if depth > ctx.budget.max_depth {
        return Err(Failure::OutOfBudget);
    }
    let key = Claim::new(levi.clone(), chi.clone());
    if let Some(cached) = ctx.memo.get(&key) {
        return cached.clone();
    }
    let result = build_node(ctx, levi, chi, depth);
    ctx.memo.insert(key, result.clone());
    result
}

fn build_node(ctx: &mut Ctx, levi: &LeviDatum, chi: &Character, depth: usize) -> CResult {
    let claim = Claim::new(levi.clone(), chi.clone());
    // (i) Characters with negative entries: determinant twist first.
    if chi.values().iter().any(|&v| v < 0) {
        let (chi_norm, det_power) =
            det_normalize(levi, chi).expect("lengths match by construction");
        let child = certify_claim(ctx, levi, &chi_norm, depth + 1)?;
        return Ok(DerivationNode {
            rule: Rule::DetTwist,
            claim,
            evidence: Evidence::DetTwist {
                det_power,
                chi_norm,
            },
            children: vec![child],
        });
    }
    // (ii) Base cases.
    let total = chi.total();
    if total <= 1 {
        return Ok(DerivationNode {
            rule: Rule::BaseChiC,
            claim,
            evidence: Evidence::BaseChiC { total },
            children: Vec::new(),
        });
    }
    if levi.num_parts() == 1 {
        return Ok(DerivationNode {
            rule: Rule::BaseR1Axiom,
            claim,
            evidence: Evidence::BaseR1Axiom,
            children: Vec::new(),
        });
    }
    // (iii) Choose the final factor; on failure retry the other tied
    // minimizers before giving up (the retry is visible in the trace through
    // the chosen index versus the tie list).
    let ties = final_factor_candidates(levi, chi);
    let mut first_failure: Option<Failure> = None;
    for &c in &ties {
        match attempt_combine(ctx, levi, chi, c, &ties, depth) {
            Ok(node) => return Ok(node),
            Err(Failure::OutOfBudget) => return Err(Failure::OutOfBudget),
            Err(f) => {
                if first_failure.is_none() {
                    first_failure = Some(f);
                }
            }
        }
    }
    Err(first_failure.unwrap_or(Failure::Failed {
        claim,
        reason: "no positive entry to factor out".into(),
    }))
}

fn attempt_combine(
    ctx: &mut Ctx,
    levi: &LeviDatum,
    chi: &Character,
    c: usize,
    ties: &[usize],
    depth: usize,
) -> CResult {
    let claim = Claim::new(levi.clone(), chi.clone());
    let fail = |reason: String| Failure::Failed {
        claim: Claim::new(levi.clone(), chi.clone()),
        reason,
    };
    let chi_minor = chi
        .mul(&Character::indicator(chi.len(), c).inverse())
        .expect("lengths match");
    let minor = certify_claim(ctx, levi, &chi_minor, depth + 1)?;
    let source = bundle_of(levi, &chi_minor);
    let target_bundle = bundle_of(levi, chi);
    let (window_lo, window_hi) = reach_window(&source);
    let reach = reach_over(&source);
    if reach.len() > ctx.budget.max_candidates {
        return Err(Failure::OutOfBudget);
    }
    if !reach.contains(&target_bundle) {
        return Err(fail(format!(
            "canonical target {target_bundle} missing from the candidate set"
        )));
    }

    let mut children = vec![
        minor,
        DerivationNode {
            rule: Rule::NoModification,
            claim: claim.clone(),
            evidence: Evidence::NoModification {
                source: source.clone(),
                window_lo: window_lo.clone(),
                window_hi: window_hi.clone(),
                candidate_count: reach.len(),
            },
            children: Vec::new(),
        },
    ];
    let mut exceptional: Vec<Bundle> = Vec::new();

    for cand in &reach {
        let role = if *cand == target_bundle {
            Role::Target
        } else {
            Role::Discharge
        };
        if role == Role::Discharge {
            let matches = in_bgl(levi, cand).expect("rank matches");
            if matches.is_empty() {
                children.push(DerivationNode {
                    rule: Rule::NotInBGL,
                    claim: claim.clone(),
                    evidence: Evidence::NotInBGL {
                        candidate: cand.clone(),
                    },
                    children: Vec::new(),
                });
                continue;
            }
            if cand.nu_min() < rint(0) {
                children.push(DerivationNode {
                    rule: Rule::NegativeMinSlope,
                    claim: claim.clone(),
                    evidence: Evidence::NegativeMinSlope {
                        candidate: cand.clone(),
                        nu_min: cand.nu_min(),
                    },
                    children: Vec::new(),
                });
                continue;
            }
        }
        match classify_reducibility(&source, cand) {
            Ok(Some(datum)) => {
                let transport = reduction_transport(&datum)
                    .map_err(|e| fail(format!("transport failed on {cand}: {e}")))?;
                let shift = i64::try_from(&transport.shift).expect("shift fits in i64");
                children.push(DerivationNode {
                    rule: Rule::ReduceViaHN,
                    claim: claim.clone(),
                    evidence: Evidence::ReduceViaHN {
                        role,
                        candidate: cand.clone(),
                        datum,
                        shift,
                    },
                    children: Vec::new(),
                });
            }
            Ok(None) if role == Role::Target => {
                return Err(fail(format!(
                    "the canonical target {cand} is not reducible from {source}"
                )));
            }
            Ok(None) => exceptional.push(cand.clone()),
            Err(e) => {
                return Err(fail(format!("classification failed on {cand}: {e}")));
            }
        }
    }

    if !exceptional.is_empty() {
        children.push(exceptional_node(
            ctx,
            levi,
            chi,
            &target_bundle,
            &exceptional,
            depth,
        )?);
    }

    Ok(DerivationNode {
        rule: Rule::CombineChi,
        claim,
        evidence: Evidence::CombineChi {
            c,
            chi_minor,
            source,
            window_lo,
            window_hi,
            tie_candidates: ties.to_vec(),
        },
        children,
    })
}

fn exceptional_node(
    ctx: &mut Ctx,
    levi: &LeviDatum,
    chi: &Character,
    target_bundle: &Bundle,
    members: &[Bundle],
    depth: usize,
) -> CResult {
    let claim = Claim::new(levi.clone(), chi.clone());
    let fail = |reason: String| Failure::Failed {
        claim: Claim::new(levi.clone(), chi.clone()),
        reason,
    };
    let parent_measure = claim_measure(levi, chi);
    let mut elements = Vec::with_capacity(members.len());
    let mut children: Vec<DerivationNode> = Vec::new();
    for bundle in members {
        let nu_min = bundle.nu_min();
        if nu_min < rint(0) {
            return Err(fail(format!(
                "exceptional candidate {bundle} has negative minimal slope"
            )));
        }
        let closure = if bundle.nu_max() > target_bundle.nu_max() {
            ClosureEvidence::NuMaxGreater {
                lhs: bundle.nu_max(),
                rhs: target_bundle.nu_max(),
            }
        } else if bundle.nu_min() > target_bundle.nu_min() {
            ClosureEvidence::NuMinGreater {
                lhs: bundle.nu_min(),
                rhs: target_bundle.nu_min(),
            }
        } else {
            return Err(fail(format!(
                "no closure evidence separates {bundle} from {target_bundle}"
            )));
        };
        let mut chis = Vec::new();
        for xi in in_bgl(levi, bundle).expect("rank matches") {
            let xi_measure = claim_measure(levi, &xi);
            if (xi_measure.3, xi_measure.4) >= (parent_measure.3, parent_measure.4) {
                return Err(fail(format!(
                    "measure does not decrease for matching character {xi} of {bundle}"
                )));
            }
            let child_node = certify_claim(ctx, levi, &xi, depth + 1)?;
            let child = children.len();
            children.push(child_node);
            let separation = match separation_evidence(levi, chi, &xi) {
                Some(sep) => sep,
                None => {
                    if levi.num_parts() == 2 && xi.values() == [1, 1] {
                        let axiom = DerivationNode {
                            rule: Rule::Axiom11Case,
                            claim: Claim::new(levi.clone(), xi.clone()),
                            evidence: Evidence::Axiom11Case,
                            children: Vec::new(),
                        };
                        let idx = children.len();
                        children.push(axiom);
                        Separation::Axiom11 { child: idx }
                    } else {
                        return Err(fail(format!(
                            "no separation evidence for character {xi} of {bundle}"
                        )));
                    }
                }
            };
            chis.push(ExceptionalChi {
                chi: xi,
                child,
                separation,
            });
        }
        elements.push(ExceptionalElement {
            bundle: bundle.clone(),
            nu_min,
            closure,
            chis,
        });
    }
    Ok(DerivationNode {
        rule: Rule::ExceptionalSet,
        claim,
        evidence: Evidence::ExceptionalSet { elements },
        children,
    })
}

/// The canonical separation evidence search: ascending over shared positive
/// indices `d`, try the maximal-slope comparison then the minimal-slope one.
fn separation_evidence(levi: &LeviDatum, chi: &Character, xi: &Character) -> Option<Separation> {
    for d in 0..levi.num_parts() {
        if chi.get(d) <= 0 || xi.get(d) <= 0 {
            continue;
        }
        let cancel = Character::indicator(chi.len(), d).inverse();
        let b_xi = bundle_of(levi, &xi.mul(&cancel).expect("lengths match"));
        let b_chi = bundle_of(levi, &chi.mul(&cancel).expect("lengths match"));
        if b_xi.nu_max() > b_chi.nu_max() {
            return Some(Separation::NuMaxGreater {
                d,
                lhs: b_xi.nu_max(),
                rhs: b_chi.nu_max(),
            });
        }
        if b_xi.nu_min() > b_chi.nu_min() {
            return Some(Separation::NuMinGreater {
                d,
                lhs: b_xi.nu_min(),
                rhs: b_chi.nu_min(),
            });
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Independent trace checking.
// ---------------------------------------------------------------------------

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

/// Re-verify a derivation trace: every stored number, inequality, candidate
/// set, reduction datum, shift, child claim, and termination-measure decrease
/// is recomputed with exact arithmetic. Returns the first failure found.
pub fn check_trace(trace: &DerivationNode) -> Result<(), String> {
    check_claim_node(trace)
}

fn check_claim_node(node: &DerivationNode) -> Result<(), String> {
    ensure!(
        node.rule == node.evidence.rule(),
        "rule tag {:?} does not match evidence {:?}",
        node.rule,
        node.evidence.rule()
    );
    let levi = &node.claim.levi;
    let chi = &node.claim.chi;
    ensure!(
        chi.len() == levi.num_parts(),
        "claim {} has mismatched lengths",
        node.claim
    );
    match &node.evidence {
        Evidence::DetTwist {
            det_power,
            chi_norm,
        } => {
            ensure!(
                chi.values().iter().any(|&v| v < 0),
                "DetTwist on a non-negative character {chi}"
            );
            let (norm, k) = det_normalize(levi, chi).map_err(|e| e.to_string())?;
            ensure!(
                norm == *chi_norm && k == *det_power,
                "DetTwist evidence ({chi_norm}, {det_power}) differs from recomputation ({norm}, {k})"
            );
            ensure!(node.children.len() == 1, "DetTwist needs exactly one child");
            let child = &node.children[0];
            ensure!(
                child.claim == Claim::new(levi.clone(), norm),
                "DetTwist child claim mismatch"
            );
            check_claim_node(child)
        }
        Evidence::BaseChiC { total } => {
            ensure!(chi.is_nonnegative(), "BaseChiC on negative character {chi}");
            ensure!(
                *total == chi.total() && *total <= 1,
                "BaseChiC total {total} is wrong for {chi}"
            );
            ensure!(node.children.is_empty(), "BaseChiC must be a leaf");
            Ok(())
        }
        Evidence::BaseR1Axiom => {
            ensure!(
                levi.num_parts() == 1,
                "BaseR1Axiom on {} blocks",
                levi.num_parts()
            );
            ensure!(chi.is_nonnegative(), "BaseR1Axiom on negative character");
            ensure!(node.children.is_empty(), "BaseR1Axiom must be a leaf");
            Ok(())
        }
        Evidence::CombineChi {
            c,
            chi_minor,
            source,
            window_lo,
            window_hi,
            tie_candidates,
        } => check_combine(
            node,
            levi,
            chi,
            *c,
            chi_minor,
            source,
            window_lo,
            window_hi,
            tie_candidates,
        ),
        other => Err(format!(
            "rule {:?} is not valid at claim level",
            other.rule()
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn check_combine(
    node: &DerivationNode,
    levi: &LeviDatum,
    chi: &Character,
    c: usize,
    chi_minor: &Character,
    source: &Bundle,
    window_lo: &Rat,
    window_hi: &Rat,
    tie_candidates: &[usize],
) -> Result<(), String> {
    ensure!(
        chi.is_nonnegative() && chi.total() >= 2 && levi.num_parts() >= 2,
        "CombineChi preconditions fail for {}",
        node.claim
    );
    let ties = final_factor_candidates(levi, chi);
    ensure!(
        ties == tie_candidates,
        "tie candidate list differs from the pinned minimizer rule"
    );
    ensure!(ties.contains(&c), "chosen factor {c} is not a tied minimizer");
    let minor = chi
        .mul(&Character::indicator(chi.len(), c).inverse())
        .map_err(|e| e.to_string())?;
    ensure!(
        minor == *chi_minor,
        "stored minor character {chi_minor} differs from {minor}"
    );
    let src = bundle_of(levi, &minor);
    ensure!(*source == src, "stored source bundle differs");
    let (lo, hi) = reach_window(&src);
    ensure!(
        lo == *window_lo && hi == *window_hi,
        "stored window differs from the recomputed one"
    );
    let reach = reach_over(&src);
    let target_bundle = bundle_of(levi, chi);
    ensure!(
        reach.contains(&target_bundle),
        "canonical target missing from recomputed candidates"
    );

    ensure!(
        node.children.len() >= 2,
        "CombineChi needs at least two children"
    );
    let minor_child = &node.children[0];
    ensure!(
        minor_child.claim == Claim::new(levi.clone(), minor.clone()),
        "minor child claim mismatch"
    );
    ensure!(
        minor.total() < chi.total(),
        "measure does not decrease on the minor edge"
    );
    check_claim_node(minor_child)?;

    let nomod = &node.children[1];
    match &nomod.evidence {
        Evidence::NoModification {
            source: s,
            window_lo: wl,
            window_hi: wh,
            candidate_count,
        } => {
            ensure!(
                nomod.rule == Rule::NoModification,
                "window node rule mismatch"
            );
            ensure!(nomod.claim == node.claim, "window node claim mismatch");
            ensure!(nomod.children.is_empty(), "window node must be a leaf");
            ensure!(
                *s == src && *wl == lo && *wh == hi && *candidate_count == reach.len(),
                "window node contents differ from recomputation"
            );
        }
        _ => return Err("second child must be the window documentation node".into()),
    }

    // Coverage: every recomputed candidate is handled by exactly one of the
    // remaining children.
    let mut covered: Vec<Bundle> = Vec::new();
    for child in &node.children[2..] {
        ensure!(child.claim == node.claim, "candidate node claim mismatch");
        match &child.evidence {
            Evidence::ReduceViaHN {
                role, candidate, ..
            } => {
                match role {
                    Role::Target => ensure!(
                        *candidate == target_bundle,
                        "Target role on a non-canonical candidate {candidate}"
                    ),
                    Role::Discharge => ensure!(
                        *candidate != target_bundle,
                        "Discharge role on the canonical target"
                    ),
                }
                covered.push(candidate.clone());
                check_reduce(child, &src)?;
            }
            Evidence::NotInBGL { candidate } => {
                ensure!(child.rule == Rule::NotInBGL, "rule tag mismatch");
                ensure!(child.children.is_empty(), "NotInBGL must be a leaf");
                let matches = in_bgl(levi, candidate).map_err(|e| e.to_string())?;
                ensure!(
                    matches.is_empty(),
                    "candidate {candidate} does match the block shape"
                );
                covered.push(candidate.clone());
            }
            Evidence::NegativeMinSlope { candidate, nu_min } => {
                ensure!(child.rule == Rule::NegativeMinSlope, "rule tag mismatch");
                ensure!(child.children.is_empty(), "NegativeMinSlope must be a leaf");
                ensure!(
                    *nu_min == candidate.nu_min() && *nu_min < rint(0),
                    "negative-slope evidence fails for {candidate}"
                );
                covered.push(candidate.clone());
            }
            Evidence::ExceptionalSet { elements } => {
                for e in elements {
                    ensure!(
                        e.bundle != target_bundle,
                        "the canonical target cannot be exceptional"
                    );
                    covered.push(e.bundle.clone());
                }
                check_exceptional(child, levi, chi, &target_bundle)?;
            }
            other => {
                return Err(format!(
                    "rule {:?} is not valid at candidate level",
                    other.rule()
                ))
            }
        }
    }
    covered.sort();
    ensure!(
        covered.windows(2).all(|w| w[0] != w[1]),
        "a candidate is covered twice"
    );
    let mut expected = reach.clone();
    expected.sort();
    ensure!(
        covered == expected,
        "candidate coverage differs from the recomputed reachable set"
    );
    Ok(())
}

fn check_reduce(node: &DerivationNode, source: &Bundle) -> Result<(), String> {
    let Evidence::ReduceViaHN {
        candidate,
        datum,
        shift,
        ..
    } = &node.evidence
    else {
        unreachable!("caller matched the variant");
    };
    ensure!(node.rule == Rule::ReduceViaHN, "rule tag mismatch");
    ensure!(node.children.is_empty(), "ReduceViaHN must be a leaf");
    let recomputed = classify_reducibility(source, candidate)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("candidate {candidate} is not reducible from {source}"))?;
    ensure!(
        recomputed == *datum,
        "stored reduction datum differs from classification"
    );
    datum.validate().map_err(|e| e.to_string())?;
    let transport = reduction_transport(datum).map_err(|e| e.to_string())?;
    ensure!(
        transport.shift == (*shift).into(),
        "stored shift {shift} differs from the transported value {}",
        transport.shift
    );
    Ok(())
}

fn check_exceptional(
    node: &DerivationNode,
    levi: &LeviDatum,
    chi: &Character,
    target_bundle: &Bundle,
) -> Result<(), String> {
    let Evidence::ExceptionalSet { elements } = &node.evidence else {
        unreachable!("caller matched the variant");
    };
    ensure!(node.rule == Rule::ExceptionalSet, "rule tag mismatch");
    let parent_measure = claim_measure(levi, chi);
    let mut used_children = vec![false; node.children.len()];
    for e in elements {
        ensure!(
            e.nu_min == e.bundle.nu_min() && e.nu_min >= rint(0),
            "condition (1) fails for {}",
            e.bundle
        );
        match &e.closure {
            ClosureEvidence::NuMaxGreater { lhs, rhs } => ensure!(
                *lhs == e.bundle.nu_max() && *rhs == target_bundle.nu_max() && lhs > rhs,
                "closure evidence (max form) fails for {}",
                e.bundle
            ),
            ClosureEvidence::NuMinGreater { lhs, rhs } => ensure!(
                *lhs == e.bundle.nu_min() && *rhs == target_bundle.nu_min() && lhs > rhs,
                "closure evidence (min form) fails for {}",
                e.bundle
            ),
        }
        let matches = in_bgl(levi, &e.bundle).map_err(|e| e.to_string())?;
        ensure!(
            !matches.is_empty(),
            "exceptional candidate {} matches no character",
            e.bundle
        );
        ensure!(
            e.chis.len() == matches.len()
                && e.chis.iter().zip(&matches).all(|(ec, m)| ec.chi == *m),
            "stored matching characters differ from recomputation for {}",
            e.bundle
        );
        for ec in &e.chis {
            let xi_measure = claim_measure(levi, &ec.chi);
            ensure!(
                (xi_measure.0, xi_measure.1, xi_measure.2)
                    == (parent_measure.0, parent_measure.1, parent_measure.2)
                    && (xi_measure.3, xi_measure.4) < (parent_measure.3, parent_measure.4),
                "measure does not decrease for matching character {}",
                ec.chi
            );
            ensure!(
                ec.child < node.children.len() && !used_children[ec.child],
                "bad or reused child index {}",
                ec.child
            );
            used_children[ec.child] = true;
            let child_node = &node.children[ec.child];
            ensure!(
                child_node.claim == Claim::new(levi.clone(), ec.chi.clone()),
                "exceptional child claim mismatch"
            );
            check_claim_node(child_node)?;
            match &ec.separation {
                Separation::NuMaxGreater { d, lhs, rhs }
                | Separation::NuMinGreater { d, lhs, rhs } => {
                    ensure!(
                        chi.get(*d) > 0 && ec.chi.get(*d) > 0,
                        "separation index {d} is not shared-positive"
                    );
                    let cancel = Character::indicator(chi.len(), *d).inverse();
                    let b_xi = bundle_of(levi, &ec.chi.mul(&cancel).map_err(|e| e.to_string())?);
                    let b_chi = bundle_of(levi, &chi.mul(&cancel).map_err(|e| e.to_string())?);
                    match &ec.separation {
                        Separation::NuMaxGreater { .. } => ensure!(
                            *lhs == b_xi.nu_max() && *rhs == b_chi.nu_max() && lhs > rhs,
                            "separation evidence (max form) fails for {}",
                            ec.chi
                        ),
                        Separation::NuMinGreater { .. } => ensure!(
                            *lhs == b_xi.nu_min() && *rhs == b_chi.nu_min() && lhs > rhs,
                            "separation evidence (min form) fails for {}",
                            ec.chi
                        ),
                        Separation::Axiom11 { .. } => unreachable!(),
                    }
                }
                Separation::Axiom11 { child } => {
                    ensure!(
                        levi.num_parts() == 2 && ec.chi.values() == [1, 1],
                        "Axiom11 outside the two-block (1,1) case"
                    );
                    ensure!(
                        *child < node.children.len() && !used_children[*child],
                        "bad or reused child index {child}"
                    );
                    used_children[*child] = true;
                    let axiom = &node.children[*child];
                    ensure!(
                        axiom.rule == Rule::Axiom11Case
                            && matches!(axiom.evidence, Evidence::Axiom11Case)
                            && axiom.children.is_empty()
                            && axiom.claim == Claim::new(levi.clone(), ec.chi.clone()),
                        "malformed Axiom11 node"
                    );
                }
            }
        }
    }
    ensure!(
        used_children.iter().all(|&u| u),
        "unreferenced child on an exceptional node"
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levi(parts: &[u32]) -> LeviDatum {
        LeviDatum::new(parts.to_vec()).unwrap()
    }

    fn chi(v: &[i64]) -> Character {
        Character::new(v.to_vec())
    }

    fn certified(l: &[u32], x: &[i64]) -> DerivationNode {
        let claim = Claim::new(levi(l), chi(x));
        match certify(&claim, &Budget::default()) {
            Verdict::Certified(node) => {
                check_trace(&node).expect("certified trace must check");
                *node
            }
            other => panic!("expected Certified for {claim}, got {other:?}"),
        }
    }

    #[test]
    fn base_cases() {
        let t = certified(&[2, 3], &[0, 0]);
        assert_eq!(t.rule, Rule::BaseChiC);
        let t = certified(&[2, 3], &[0, 1]);
        assert_eq!(t.rule, Rule::BaseChiC);
        let t = certified(&[5], &[4]);
        assert_eq!(t.rule, Rule::BaseR1Axiom);
    }

    #[test]
    fn det_twist_root() {
        let t = certified(&[2, 3], &[-1, 0]);
        assert_eq!(t.rule, Rule::DetTwist);
        match &t.evidence {
            Evidence::DetTwist {
                det_power,
                chi_norm,
            } => {
                assert_eq!(*det_power, 1);
                assert_eq!(chi_norm, &chi(&[1, 3]));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn worked_instance_two_blocks() {
        // Blocks (3,4), character (2,2): the residual set is exactly the
        // bundle attached to (1,3), separated by its larger maximal slope.
        let t = certified(&[3, 4], &[2, 2]);
        let b13 = bundle_of(&levi(&[3, 4]), &chi(&[1, 3]));
        let mut found = false;
        for node in t.walk() {
            if let Evidence::ExceptionalSet { elements } = &node.evidence {
                if node.claim == Claim::new(levi(&[3, 4]), chi(&[2, 2])) {
                    assert_eq!(elements.len(), 1);
                    assert_eq!(elements[0].bundle, b13);
                    assert!(matches!(
                        elements[0].closure,
                        ClosureEvidence::NuMaxGreater { .. }
                    ));
                    found = true;
                }
            }
        }
        assert!(found, "expected the residual singleton for ((3,4),(2,2))");
    }

    #[test]
    fn worked_instance_three_blocks() {
        let t = certified(&[2, 3, 3], &[2, 2, 2]);
        // The trace must close and contain at least one genuine two-block
        // reduction node.
        assert!(t
            .walk()
            .iter()
            .any(|n| matches!(n.evidence, Evidence::ReduceViaHN { .. })));
    }

    #[test]
    fn determinism() {
        let claim = Claim::new(levi(&[2, 3]), chi(&[2, 1]));
        let a = certify(&claim, &Budget::default());
        let b = certify(&claim, &Budget::default());
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_budget_on_zero_depth() {
        let claim = Claim::new(levi(&[2, 3]), chi(&[2, 2]));
        let v = certify(
            &claim,
            &Budget {
                max_depth: 0,
                max_candidates: 100_000,
            },
        );
        // Depth 0 still allows the root node but not its recursion.
        assert!(matches!(v, Verdict::OutOfBudget));
    }

    #[test]
    fn trace_json_round_trip() {
        let t = certified(&[3, 4], &[2, 2]);
        let text = serde_json::to_string(&t).unwrap();
        let back: DerivationNode = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        check_trace(&back).unwrap();
    }

    #[test]
    fn flipped_evidence_is_rejected() {
        let mut t = certified(&[3, 4], &[2, 2]);
        // Flip one closure inequality in place.
        fn flip(node: &mut DerivationNode) -> bool {
            if let Evidence::ExceptionalSet { elements } = &mut node.evidence {
                if let Some(e) = elements.first_mut() {
                    if let ClosureEvidence::NuMaxGreater { lhs, rhs } = &mut e.closure {
                        std::mem::swap(lhs, rhs);
                        return true;
                    }
                }
            }
            node.children.iter_mut().any(flip)
        }
        assert!(flip(&mut t));
        assert!(check_trace(&t).is_err());
    }

    #[test]
    fn omitted_recursion_is_rejected() {
        let mut t = certified(&[3, 4], &[2, 2]);
        fn drop_exceptional_children(node: &mut DerivationNode) -> bool {
            if matches!(node.evidence, Evidence::ExceptionalSet { .. }) {
                node.children.clear();
                return true;
            }
            node.children.iter_mut().any(drop_exceptional_children)
        }
        assert!(drop_exceptional_children(&mut t));
        assert!(check_trace(&t).is_err());
    }
}
