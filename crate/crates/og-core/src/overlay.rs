//! Rule composition, overlay rules, and overlay graphs.
//!
//! Composing two chained derivations yields one rule whose single application
//! takes the first host straight to the second result. The composition is
//! computed per atom pair, in the coordinates of the first host: each pair
//! contributes a three-stage order trajectory (before, between, after), and
//! the composed rule keeps a bond in its invariant part only when the order
//! never drops to zero and never changes before the final stage. Pairs bonded
//! somewhere in the middle but on neither end become explicit non-bond
//! constraints on both sides, which is how a composed rule remembers that its
//! action relies on transiently formed bonds.
//!
//! Folding composition over a whole mechanism gives the overlay rule; the
//! overlay graph is its one-graph presentation with every bond sorted into
//! one of five classes (formed, broken, context, transiently modified,
//! transiently formed).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mixture::{AtomId, AtomLabel, AtomMap, AtomPair, BondOrder, Mixture};
use crate::rule::{apply, Derivation, Mechanism, Rule, RuleError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComposeError {
    #[error("second derivation's host is not the first derivation's result")]
    ChainBreak,
    #[error("overlap maps atom {from} to {to}, whose labels differ")]
    OverlapLabelMismatch { from: AtomId, to: AtomId },
    #[error("overlap is order-inconsistent on pair {0}")]
    OverlapOrderMismatch(AtomPair),
    #[error("overlap entry {0} is not an atom of the respective rule side")]
    OverlapDangling(AtomId),
    #[error("composed parts do not form a valid rule: {0}")]
    InvalidRule(#[from] RuleError),
}

// ---------------------------------------------------------------------------
// pair-trajectory composition core

/// Involvement of one rule with one atom pair, in track coordinates.
#[derive(Debug, Clone, Copy)]
struct PairState {
    /// order on the rule's left side, 0 = absent
    before: u8,
    /// order on the rule's right side
    after: u8,
    /// invariant (context) bond
    keeps_identity: bool,
    /// explicit constraint flags
    constrained: bool,
}

impl PairState {
    fn pass_through(order: u8) -> PairState {
        PairState {
            before: order,
            after: order,
            keeps_identity: true,
            constrained: false,
        }
    }
}

/// Label trajectory of one atom track across a composition operand.
#[derive(Debug, Clone, Copy)]
struct AtomState {
    before: Option<AtomLabel>,
    after: Option<AtomLabel>,
}

/// One composition operand: a rule re-expressed in shared track coordinates.
#[derive(Debug, Default)]
struct Operand {
    atoms: BTreeMap<AtomId, AtomState>,
    pairs: BTreeMap<AtomPair, PairState>,
}

impl Operand {
    fn from_rule(rule: &Rule, track: &BTreeMap<AtomId, AtomId>) -> Operand {
        let mut op = Operand::default();
        for id in rule.left().atom_ids().chain(rule.right().atom_ids()) {
            let t = track[&id];
            op.atoms.entry(t).or_insert(AtomState {
                before: rule.left().label(id),
                after: rule.right().label(id),
            });
        }
        for pair in rule.all_pairs() {
            let t = pair.map(|id| track[&id]).expect("track maps are injective");
            op.pairs.insert(
                t,
                PairState {
                    before: rule.left().bond(pair).map_or(0, BondOrder::value),
                    after: rule.right().bond(pair).map_or(0, BondOrder::value),
                    keeps_identity: rule.context_bonds().contains(&pair),
                    constrained: rule.nonbond_left().contains(&pair)
                        || rule.nonbond_right().contains(&pair),
                },
            );
        }
        op
    }
}

/// Composes two operands over a seam described by `seam_order` and
/// `seam_label` (the state between them, for pairs and atoms only one
/// operand touches).
fn compose_operands(
    first: &Operand,
    second: &Operand,
    seam_order: impl Fn(AtomPair) -> u8,
    seam_label: impl Fn(AtomId) -> Option<AtomLabel>,
) -> Result<Rule, ComposeError> {
    let tracks: BTreeSet<AtomId> = first
        .atoms
        .keys()
        .chain(second.atoms.keys())
        .copied()
        .collect();

    let mut left = Mixture::new();
    let mut right = Mixture::new();
    for &t in &tracks {
        let s1 = first.atoms.get(&t).copied().unwrap_or_else(|| {
            // same tracing as for pairs: prefer the seam, fall back to the
            // second rule's left side for atoms the seam never saw
            let label = seam_label(t)
                .or_else(|| second.atoms.get(&t).and_then(|s| s.before));
            AtomState {
                before: label,
                after: label,
            }
        });
        let s2 = second.atoms.get(&t).copied().unwrap_or(AtomState {
            before: s1.after,
            after: s1.after,
        });
        if let Some(label) = s1.before {
            left.add_atom(t, label).expect("tracks are unique");
        }
        if let Some(label) = s2.after {
            right.add_atom(t, label).expect("tracks are unique");
        }
    }

    let pairs: BTreeSet<AtomPair> = first
        .pairs
        .keys()
        .chain(second.pairs.keys())
        .copied()
        .collect();
    let mut context_bonds = Vec::new();
    let mut nonbond_left = Vec::new();
    let mut nonbond_right = Vec::new();
    for &pair in &pairs {
        let s1 = first.pairs.get(&pair).copied().unwrap_or_else(|| {
            // untouched by the first rule; the seam graph only speaks for
            // atoms it contains, anything else traces back unchanged from
            // the second rule's left side
            let seam_knows =
                seam_label(pair.lo()).is_some() && seam_label(pair.hi()).is_some();
            if seam_knows {
                PairState::pass_through(seam_order(pair))
            } else {
                PairState::pass_through(second.pairs.get(&pair).map_or(0, |s| s.before))
            }
        });
        let s2 = second.pairs.get(&pair).copied().unwrap_or_else(|| {
            // untouched by the second rule: carry the seam state forward
            PairState::pass_through(s1.after)
        });
        if s1.after != s2.before {
            return Err(ComposeError::OverlapOrderMismatch(pair));
        }
        let before = s1.before;
        let after = s2.after;
        if before > 0 {
            left.add_bond(pair.lo(), pair.hi(), BondOrder::new(before).unwrap())
                .expect("pair endpoints exist on the left");
        }
        if after > 0 {
            right
                .add_bond(pair.lo(), pair.hi(), BondOrder::new(after).unwrap())
                .expect("pair endpoints exist on the right");
        }
        // invariant-bond bookkeeping: the first operand's whole stretch
        // becomes interior, so it must be fully constant, while the second
        // operand may still change the order at its final stage
        let s1_constant = s1.keeps_identity && s1.before == s1.after;
        let keeps_identity = s1_constant && s2.keeps_identity;
        if before > 0 && after > 0 && keeps_identity {
            context_bonds.push(pair);
        }
        // unbonded on both ends but bonded or constrained in between: the
        // dependency survives as an explicit constraint
        let evidence = s1.after > 0 || s1.constrained || s2.constrained;
        if before == 0 && after == 0 && evidence {
            if left.has_atom(pair.lo()) && left.has_atom(pair.hi()) {
                nonbond_left.push(pair);
            }
            if right.has_atom(pair.lo()) && right.has_atom(pair.hi()) {
                nonbond_right.push(pair);
            }
        }
    }

    Ok(Rule::new(
        left,
        right,
        context_bonds,
        nonbond_left,
        nonbond_right,
    )?)
}

/// Track coordinates for a derivation: matched atoms live under their host
/// ids, created atoms under their result ids.
fn derivation_tracks(d: &Derivation) -> BTreeMap<AtomId, AtomId> {
    let mut track = BTreeMap::new();
    for (rule_id, host_id) in d.match_map.pairs() {
        track.insert(rule_id, host_id);
    }
    for (rule_id, result_id) in d.comatch.pairs() {
        track.entry(rule_id).or_insert(result_id);
    }
    track
}

/// Composes two chained derivations into a single rule together with the
/// derivation that applies it, sending `d1.host` directly to `d2.result`.
/// The composed rule's atom ids are `d1.host` ids (fresh result ids for
/// created atoms).
pub fn compose(d1: &Derivation, d2: &Derivation) -> Result<(Rule, Derivation), ComposeError> {
    if d1.result != d2.host {
        return Err(ComposeError::ChainBreak);
    }
    let seam = &d1.result;

    let tracks1 = derivation_tracks(d1);
    let first = Operand::from_rule(&d1.rule, &tracks1);

    // second rule: matched atoms sit in seam coordinates, which equal track
    // coordinates because tracking maps are the identity on survivors;
    // atoms created by the second rule get their result ids, nudged out of
    // the way if deletion freed a colliding id earlier
    let used: BTreeSet<AtomId> = d1
        .host
        .atom_ids()
        .chain(seam.atom_ids())
        .chain(d2.result.atom_ids())
        .collect();
    let mut next_fresh = used.iter().next_back().map_or(0, |m| m.0 + 1);
    let mut tracks2 = BTreeMap::new();
    let mut created_track_to_result = BTreeMap::new();
    for (rule_id, seam_id) in d2.match_map.pairs() {
        tracks2.insert(rule_id, seam_id);
    }
    for (rule_id, result_id) in d2.comatch.pairs() {
        if tracks2.contains_key(&rule_id) {
            continue;
        }
        let track = if d1.host.has_atom(result_id) || tracks1.values().any(|&t| t == result_id) {
            let fresh = AtomId(next_fresh);
            next_fresh += 1;
            fresh
        } else {
            result_id
        };
        tracks2.insert(rule_id, track);
        created_track_to_result.insert(track, result_id);
    }
    let second = Operand::from_rule(&d2.rule, &tracks2);

    let rule = compose_operands(
        &first,
        &second,
        |pair| seam.order_or_zero(pair.lo(), pair.hi()),
        |id| seam.label(id),
    )?;

    let match_map = AtomMap::identity(rule.left().atom_ids());
    let comatch = AtomMap::from_pairs(rule.right().atom_ids().map(|id| {
        (
            id,
            created_track_to_result.get(&id).copied().unwrap_or(id),
        )
    }))
    .expect("composed right embedding is injective");
    let tracking = d1.tracking.then(&d2.tracking);
    let composed = Derivation {
        rule: rule.clone(),
        host: d1.host.clone(),
        match_map: match_map.clone(),
        comatch,
        result: d2.result.clone(),
        tracking,
    };

    // the composed derivation must be reproducible by a plain application
    if rule.is_conservative() && d1.rule.is_conservative() && d2.rule.is_conservative() {
        let check = apply(&rule, &d1.host, &match_map)
            .expect("composed rule applies at its own match");
        assert_eq!(check.result, d2.result, "composition lost information");
    }

    Ok((rule, composed))
}

/// The identity derivation on a mixture: empty rule, no change.
pub fn identity_derivation(host: &Mixture) -> Derivation {
    Derivation {
        rule: Rule::empty(),
        host: host.clone(),
        match_map: AtomMap::new(),
        comatch: AtomMap::new(),
        result: host.clone(),
        tracking: AtomMap::identity(host.atom_ids()),
    }
}

/// Left-fold of [`compose`] over a whole mechanism. The overlay rule's single
/// application reproduces the mechanism's effect; the returned derivation
/// (the overlay derivation) sends the educts directly to the final products.
pub fn overlay_rule(m: &Mechanism) -> Result<(Rule, Derivation), ComposeError> {
    let Some(first) = m.derivations().first() else {
        let od = identity_derivation(m.educts());
        return Ok((od.rule.clone(), od));
    };
    let mut acc = first.clone();
    for d in &m.derivations()[1..] {
        let (_, next) = compose(&acc, d)?;
        acc = next;
    }
    Ok((acc.rule.clone(), acc))
}

/// Right-fold counterpart of [`overlay_rule`], used as an associativity
/// witness in tests.
pub fn overlay_rule_rfold(m: &Mechanism) -> Result<(Rule, Derivation), ComposeError> {
    let Some(last) = m.derivations().last() else {
        let od = identity_derivation(m.educts());
        return Ok((od.rule.clone(), od));
    };
    let mut acc = last.clone();
    let n = m.derivations().len();
    for d in m.derivations()[..n - 1].iter().rev() {
        let (_, next) = compose(d, &acc)?;
        acc = next;
    }
    Ok((acc.rule.clone(), acc))
}

/// Composes two rules over a caller-supplied overlap (a map from atoms of
/// `r1.right` to atoms of `r2.left`), without any host graphs. Used to
/// enrich rules with follow-up steps. Atoms of `r2` outside the overlap are
/// brought in under fresh ids.
pub fn compose_rules_with_overlap(
    r1: &Rule,
    r2: &Rule,
    overlap: &AtomMap,
) -> Result<Rule, ComposeError> {
    // validate the overlap and build track coordinates for r2
    for (from, to) in overlap.pairs() {
        if !r1.right().has_atom(from) {
            return Err(ComposeError::OverlapDangling(from));
        }
        if !r2.left().has_atom(to) {
            return Err(ComposeError::OverlapDangling(to));
        }
        if r1.right().label(from) != r2.left().label(to) {
            return Err(ComposeError::OverlapLabelMismatch { from, to });
        }
    }
    let back: BTreeMap<AtomId, AtomId> = overlap.pairs().map(|(a, b)| (b, a)).collect();
    let r1_ids: BTreeSet<AtomId> = r1
        .left()
        .atom_ids()
        .chain(r1.right().atom_ids())
        .collect();
    let mut next_fresh = r1_ids.iter().next_back().map_or(0, |m| m.0 + 1);
    let mut tracks1 = BTreeMap::new();
    for id in &r1_ids {
        tracks1.insert(*id, *id);
    }
    let mut tracks2 = BTreeMap::new();
    for id in r2.left().atom_ids().chain(r2.right().atom_ids()) {
        if tracks2.contains_key(&id) {
            continue;
        }
        let track = match back.get(&id) {
            Some(&r1_id) => r1_id,
            None => {
                let fresh = AtomId(next_fresh);
                next_fresh += 1;
                fresh
            }
        };
        tracks2.insert(id, track);
    }

    // order consistency inside the overlap: where both rules state an order
    // it must be equal, and pairs the second rule forbids must be unbonded
    let overlap_tracks: BTreeSet<AtomId> = back.values().copied().collect();
    for pair in r2.all_pairs() {
        let t = pair.map(|id| tracks2[&id]).expect("injective");
        if !(overlap_tracks.contains(&t.lo()) && overlap_tracks.contains(&t.hi())) {
            continue;
        }
        let seam_order = r1.right().order_or_zero(t.lo(), t.hi());
        if let Some(order) = r2.left().bond(pair) {
            if seam_order != order.value() {
                return Err(ComposeError::OverlapOrderMismatch(t));
            }
        }
    }
    for pair in r2.forbidden_left_pairs() {
        let t = pair.map(|id| tracks2[&id]).expect("injective");
        if overlap_tracks.contains(&t.lo())
            && overlap_tracks.contains(&t.hi())
            && r1.right().order_or_zero(t.lo(), t.hi()) != 0
        {
            return Err(ComposeError::OverlapOrderMismatch(t));
        }
    }

    let first = Operand::from_rule(r1, &tracks1);
    let second = Operand::from_rule(r2, &tracks2);
    // outside both rules there is no seam information: the seam is exactly
    // r1.right (plus r2's own untouched atoms, handled by the operands)
    compose_operands(
        &first,
        &second,
        |pair| r1.right().order_or_zero(pair.lo(), pair.hi()),
        |id| r1.right().label(id),
    )
}

// ---------------------------------------------------------------------------
// bond histories and the overlay graph

/// Per-stage bond orders of one atom pair along a mechanism (0 = absent).
/// Length is always `steps + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BondHistory {
    pub pair: AtomPair,
    pub orders: Vec<u8>,
}

/// Five-way classification of a bond's treatment by a mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondClass {
    Formed,
    Broken,
    Context,
    TransientModified,
    TransientFormed,
}

/// Classifies a history by its endpoints and interior.
pub fn classify_bond(history: &BondHistory) -> BondClass {
    let orders = &history.orders;
    let first = *orders.first().expect("history is non-empty");
    let last = *orders.last().unwrap();
    let constant = orders.iter().all(|&o| o == first);
    match (first, last) {
        (0, l) if l > 0 => BondClass::Formed,
        (f, 0) if f > 0 => BondClass::Broken,
        (0, 0) => BondClass::TransientFormed,
        (f, l) if f < l => BondClass::Formed,
        (f, l) if f > l => BondClass::Broken,
        _ if constant => BondClass::Context,
        _ => BondClass::TransientModified,
    }
}

/// True when the classification alone understates the interior: transient
/// classes, and action bonds that fully vanish somewhere in between.
pub fn is_transient(history: &BondHistory) -> bool {
    let class = classify_bond(history);
    match class {
        BondClass::TransientFormed | BondClass::TransientModified => true,
        _ => {
            let first = *history.orders.first().unwrap();
            let last = *history.orders.last().unwrap();
            first > 0 && last > 0 && history.orders.contains(&0)
        }
    }
}

/// One history per atom pair that is ever bonded along the mechanism (plus
/// explicitly constrained rule pairs), ordered by pair.
pub fn bond_histories(m: &Mechanism) -> Vec<BondHistory> {
    let stages = m.step_count() + 1;
    let mut pairs: BTreeSet<AtomPair> = BTreeSet::new();
    for i in 0..stages {
        pairs.extend(m.stage(i).bonds().map(|(p, _)| p));
    }
    for d in m.derivations() {
        let tracks = derivation_tracks(d);
        for pair in d.rule.all_pairs() {
            pairs.insert(pair.map(|id| tracks[&id]).expect("injective"));
        }
    }
    pairs
        .into_iter()
        .map(|pair| BondHistory {
            pair,
            orders: (0..stages)
                .map(|i| m.stage(i).order_or_zero(pair.lo(), pair.hi()))
                .collect(),
        })
        .collect()
}

/// Reconstructs the overlay rule directly from the trajectories, without any
/// pairwise composition. Serves as the independent oracle for the
/// composition algebra.
pub fn rule_from_trajectories(m: &Mechanism) -> Rule {
    let stages = m.step_count() + 1;
    let mut touched_atoms: BTreeSet<AtomId> = BTreeSet::new();
    let mut touched_pairs: BTreeSet<AtomPair> = BTreeSet::new();
    let mut constrained_pairs: BTreeSet<AtomPair> = BTreeSet::new();
    for d in m.derivations() {
        let tracks = derivation_tracks(d);
        for t in tracks.values() {
            touched_atoms.insert(*t);
        }
        for pair in d.rule.all_pairs() {
            touched_pairs.insert(pair.map(|id| tracks[&id]).expect("injective"));
        }
        for pair in d.rule.nonbond_left().iter().chain(d.rule.nonbond_right()) {
            constrained_pairs.insert(pair.map(|id| tracks[&id]).expect("injective"));
        }
    }

    let mut left = Mixture::new();
    let mut right = Mixture::new();
    for &id in &touched_atoms {
        left.add_atom(id, m.stage(0).label(id).unwrap()).unwrap();
        right
            .add_atom(id, m.stage(stages - 1).label(id).unwrap())
            .unwrap();
    }
    let mut context_bonds = Vec::new();
    let mut nonbond = Vec::new();
    for &pair in &touched_pairs {
        let orders: Vec<u8> = (0..stages)
            .map(|i| m.stage(i).order_or_zero(pair.lo(), pair.hi()))
            .collect();
        let first = orders[0];
        let last = *orders.last().unwrap();
        if first > 0 {
            left.add_bond(pair.lo(), pair.hi(), BondOrder::new(first).unwrap())
                .unwrap();
        }
        if last > 0 {
            right
                .add_bond(pair.lo(), pair.hi(), BondOrder::new(last).unwrap())
                .unwrap();
        }
        let all_present = orders.iter().all(|&o| o > 0);
        let stable_interior = orders[..stages - 1].iter().all(|&o| o == first);
        if all_present && stable_interior {
            context_bonds.push(pair);
        }
        let ever = orders.iter().any(|&o| o > 0) || constrained_pairs.contains(&pair);
        if first == 0 && last == 0 && ever {
            nonbond.push(pair);
        }
    }
    Rule::new(left, right, context_bonds, nonbond.clone(), nonbond).unwrap()
}

/// Created/deleted marker carried by substrate-rule atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstrateFlag {
    Created,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OgAtom {
    pub id: AtomId,
    pub start: Option<AtomLabel>,
    pub end: Option<AtomLabel>,
    pub substrate_flag: Option<SubstrateFlag>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OgBond {
    pub pair: AtomPair,
    pub start_order: u8,
    pub end_order: u8,
    pub class: BondClass,
    pub transient: bool,
}

/// The one-graph presentation of an overlay rule: all rule atoms with their
/// start/end labels, all rule pairs with a bond class each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayGraph {
    pub atoms: Vec<OgAtom>,
    pub bonds: Vec<OgBond>,
}

impl OverlayGraph {
    pub fn bonds_of_class(&self, class: BondClass) -> Vec<&OgBond> {
        self.bonds.iter().filter(|b| b.class == class).collect()
    }

    /// Derives an overlay graph from a rule alone. Without trajectories the
    /// transient flag falls back to "bond identity not preserved".
    pub fn from_rule(rule: &Rule) -> OverlayGraph {
        let combined = rule.combined_graph();
        let atoms = combined
            .atoms
            .iter()
            .map(|a| OgAtom {
                id: a.id,
                start: a.left,
                end: a.right,
                substrate_flag: match (a.left, a.right) {
                    (None, Some(_)) => Some(SubstrateFlag::Created),
                    (Some(_), None) => Some(SubstrateFlag::Deleted),
                    _ => None,
                },
            })
            .collect();
        let bonds = rule
            .all_pairs()
            .into_iter()
            .map(|pair| {
                let start = rule.left().bond(pair).map_or(0, BondOrder::value);
                let end = rule.right().bond(pair).map_or(0, BondOrder::value);
                let in_k = rule.context_bonds().contains(&pair);
                let class = match (start, end) {
                    (0, 0) => BondClass::TransientFormed,
                    (0, _) => BondClass::Formed,
                    (_, 0) => BondClass::Broken,
                    (s, e) if s < e => BondClass::Formed,
                    (s, e) if s > e => BondClass::Broken,
                    _ if in_k => BondClass::Context,
                    _ => BondClass::TransientModified,
                };
                let transient = matches!(
                    class,
                    BondClass::TransientFormed | BondClass::TransientModified
                ) || (start > 0 && end > 0 && start != end && !in_k);
                OgBond {
                    pair,
                    start_order: start,
                    end_order: end,
                    class,
                    transient,
                }
            })
            .collect();
        OverlayGraph { atoms, bonds }
    }
}

/// Builds the overlay graph of a mechanism from its bond histories and
/// cross-checks it against the overlay rule's structure: the class partition
/// derived from trajectories must coincide with what the composed rule
/// encodes.
pub fn build_og(m: &Mechanism) -> Result<OverlayGraph, ComposeError> {
    let (rule, _) = overlay_rule(m)?;
    let stages = m.step_count() + 1;
    let rule_pairs = rule.all_pairs();

    let atoms = rule
        .left()
        .atom_ids()
        .chain(rule.right().atom_ids())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|id| OgAtom {
            id,
            start: m.stage(0).label(id),
            end: m.stage(stages - 1).label(id),
            substrate_flag: None,
        })
        .collect();

    let mut bonds = Vec::new();
    for pair in rule_pairs {
        let history = BondHistory {
            pair,
            orders: (0..stages)
                .map(|i| m.stage(i).order_or_zero(pair.lo(), pair.hi()))
                .collect(),
        };
        let class = classify_bond(&history);
        let transient = is_transient(&history);

        // agreement with the rule structure
        let start = rule.left().bond(pair).map_or(0, BondOrder::value);
        let end = rule.right().bond(pair).map_or(0, BondOrder::value);
        let in_k = rule.context_bonds().contains(&pair);
        let from_rule = match (start, end) {
            (0, 0) => BondClass::TransientFormed,
            (0, _) => BondClass::Formed,
            (_, 0) => BondClass::Broken,
            (s, e) if s < e => BondClass::Formed,
            (s, e) if s > e => BondClass::Broken,
            _ if in_k => BondClass::Context,
            _ => BondClass::TransientModified,
        };
        assert_eq!(
            class, from_rule,
            "trajectory class and rule structure disagree on {pair}"
        );
        assert_eq!(history.orders[0], start, "left order mismatch on {pair}");
        assert_eq!(
            *history.orders.last().unwrap(),
            end,
            "right order mismatch on {pair}"
        );
        if class == BondClass::TransientFormed {
            assert!(
                rule.nonbond_left().contains(&pair) && rule.nonbond_right().contains(&pair),
                "transient pair {pair} lost its constraint"
            );
        }

        bonds.push(OgBond {
            pair,
            start_order: history.orders[0],
            end_order: *history.orders.last().unwrap(),
            class,
            transient,
        });
    }
    Ok(OverlayGraph { atoms, bonds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{Charge, Element};
    use crate::rule::{execute, rules_isomorphic, StepDelta};

    fn label(e: Element) -> AtomLabel {
        AtomLabel::neutral(e)
    }

    fn pair(a: u32, b: u32) -> AtomPair {
        AtomPair::new(AtomId(a), AtomId(b)).unwrap()
    }

    /// Protonate-then-deprotonate toy: C-N(H2) plus a free proton. `same_h`
    /// controls whether step 2 removes the hydrogen attached in step 1 or
    /// one of the original ones.
    fn amine_shuttle(same_h: bool) -> Mechanism {
        let educts = Mixture::from_parts(
            [
                (AtomId(0), label(Element::C)),
                (AtomId(1), label(Element::N)),
                (AtomId(2), label(Element::H)),
                (AtomId(3), label(Element::H)),
                (AtomId(4), AtomLabel::new(Element::H, Charge::new(1).unwrap())),
            ],
            [
                (AtomId(0), AtomId(1), BondOrder::SINGLE),
                (AtomId(1), AtomId(2), BondOrder::SINGLE),
                (AtomId(1), AtomId(3), BondOrder::SINGLE),
            ],
        )
        .unwrap();
        let attach = StepDelta {
            bond_changes: vec![(pair(1, 4), 0, 1)],
            charge_changes: vec![(AtomId(1), 0, 1), (AtomId(4), 1, 0)],
        };
        let removed = if same_h { 4 } else { 2 };
        let detach = StepDelta {
            bond_changes: vec![(pair(1, removed), 1, 0)],
            charge_changes: vec![(AtomId(1), 1, 0), (AtomId(removed), 0, 1)],
        };
        Mechanism::from_deltas(educts, &[attach, detach]).unwrap()
    }

    #[test]
    fn compose_two_steps_directly_reaches_the_result() {
        let m = amine_shuttle(true);
        let (rule, composed) = compose(&m.derivations()[0], &m.derivations()[1]).unwrap();
        assert_eq!(composed.result, *m.final_mixture());
        assert_eq!(composed.host, *m.educts());
        // attach-then-detach of the same H leaves an empty action with one
        // transient constraint on both sides
        assert_eq!(rule.left().bond_count(), 0);
        assert_eq!(rule.right().bond_count(), 0);
        assert_eq!(rule.nonbond_left().len(), 1);
        assert!(rule.nonbond_left().contains(&pair(1, 4)));
        assert_eq!(rule.nonbond_right().len(), 1);
    }

    #[test]
    fn same_h_and_different_h_compose_to_distinct_rules() {
        let (ra, _) = overlay_rule(&amine_shuttle(true)).unwrap();
        let (rb, _) = overlay_rule(&amine_shuttle(false)).unwrap();
        assert!(!rules_isomorphic(&ra, &rb));
        // the different-H variant breaks one N-H and forms another
        assert_eq!(rb.left().bond_count(), 1);
        assert_eq!(rb.right().bond_count(), 1);
        assert!(rb.nonbond_left().is_empty());
    }

    #[test]
    fn compose_with_identity_is_isomorphic_to_the_step() {
        let m = amine_shuttle(true);
        let d = &m.derivations()[0];
        let (left_id, _) = compose(&identity_derivation(&d.host), d).unwrap();
        let (right_id, _) = compose(d, &identity_derivation(&d.result)).unwrap();
        assert!(rules_isomorphic(&left_id, &d.rule));
        assert!(rules_isomorphic(&right_id, &d.rule));
    }

    #[test]
    fn overlay_rule_of_empty_mechanism_is_empty() {
        let educts = Mixture::from_parts([(AtomId(0), label(Element::C))], []).unwrap();
        let m = Mechanism::from_deltas(educts.clone(), &[]).unwrap();
        let (rule, od) = overlay_rule(&m).unwrap();
        assert!(rule.left().is_empty() && rule.right().is_empty());
        assert_eq!(od.result, educts);
    }

    #[test]
    fn overlay_derivation_matches_execution() {
        for same_h in [true, false] {
            let m = amine_shuttle(same_h);
            let (rule, od) = overlay_rule(&m).unwrap();
            let (final_mixture, _) = execute(&m);
            assert_eq!(od.result, final_mixture);
            let d = apply(&rule, m.educts(), &od.match_map).unwrap();
            assert_eq!(d.result, final_mixture);
        }
    }

    #[test]
    fn folds_and_trajectories_agree() {
        for same_h in [true, false] {
            let m = amine_shuttle(same_h);
            let (lf, _) = overlay_rule(&m).unwrap();
            let (rf, _) = overlay_rule_rfold(&m).unwrap();
            let tr = rule_from_trajectories(&m);
            assert_eq!(lf, rf);
            assert_eq!(lf, tr);
            assert!(rules_isomorphic(&lf, &tr));
        }
    }

    #[test]
    fn classify_bond_cases() {
        let h = |orders: &[u8]| BondHistory {
            pair: pair(0, 1),
            orders: orders.to_vec(),
        };
        assert_eq!(classify_bond(&h(&[1, 1, 0, 0, 0])), BondClass::Broken);
        assert_eq!(classify_bond(&h(&[0, 1, 0, 0, 0])), BondClass::TransientFormed);
        assert_eq!(classify_bond(&h(&[2, 1, 1, 1, 2])), BondClass::TransientModified);
        assert_eq!(classify_bond(&h(&[1, 1, 1])), BondClass::Context);
        assert_eq!(classify_bond(&h(&[0, 0, 1])), BondClass::Formed);
        assert_eq!(classify_bond(&h(&[1, 2])), BondClass::Formed);
        assert_eq!(classify_bond(&h(&[2, 1])), BondClass::Broken);
        assert!(is_transient(&h(&[1, 0, 2])));
        assert!(!is_transient(&h(&[1, 1, 2])));
    }

    #[test]
    fn og_of_do_undo_mechanism_is_one_transient_bond() {
        // form then break the same bond
        let educts = Mixture::from_parts(
            [
                (AtomId(0), label(Element::O)),
                (AtomId(1), label(Element::H)),
                (AtomId(2), label(Element::O)),
            ],
            [(AtomId(0), AtomId(1), BondOrder::SINGLE)],
        )
        .unwrap();
        let form = StepDelta {
            bond_changes: vec![(pair(1, 2), 0, 1)],
            ..Default::default()
        };
        let brk = StepDelta {
            bond_changes: vec![(pair(1, 2), 1, 0)],
            ..Default::default()
        };
        let m = Mechanism::from_deltas(educts, &[form, brk]).unwrap();
        let og = build_og(&m).unwrap();
        let transient = og.bonds_of_class(BondClass::TransientFormed);
        assert_eq!(transient.len(), 1);
        assert_eq!(transient[0].pair, pair(1, 2));
        let (rule, _) = overlay_rule(&m).unwrap();
        assert!(crate::iso::is_isomorphic(rule.left(), rule.right()));
    }

    #[test]
    fn single_step_og_has_no_transients() {
        let m = {
            let educts = Mixture::from_parts(
                [
                    (AtomId(0), label(Element::O)),
                    (AtomId(1), label(Element::H)),
                    (AtomId(2), label(Element::N)),
                ],
                [(AtomId(0), AtomId(1), BondOrder::SINGLE)],
            )
            .unwrap();
            let step = StepDelta {
                bond_changes: vec![(pair(0, 1), 1, 0), (pair(1, 2), 0, 1)],
                charge_changes: vec![(AtomId(0), 0, -1), (AtomId(2), 0, 1)],
            };
            Mechanism::from_deltas(educts, &[step]).unwrap()
        };
        let og = build_og(&m).unwrap();
        assert!(og.bonds_of_class(BondClass::TransientFormed).is_empty());
        assert!(og.bonds_of_class(BondClass::TransientModified).is_empty());
        let (rule, _) = overlay_rule(&m).unwrap();
        assert!(rules_isomorphic(&rule, &m.derivations()[0].rule));
    }

    #[test]
    fn disjoint_overlap_composition_is_parallel_union() {
        let left = Mixture::from_parts(
            [
                (AtomId(0), label(Element::O)),
                (AtomId(1), label(Element::H)),
            ],
            [(AtomId(0), AtomId(1), BondOrder::SINGLE)],
        )
        .unwrap();
        let mut right = left.clone();
        right.remove_bond(pair(0, 1)).unwrap();
        let a = Rule::new(left, right, [], [], []).unwrap();
        let composed = compose_rules_with_overlap(&a, &a, &AtomMap::new()).unwrap();
        assert_eq!(composed.left().atom_count(), 4);
        assert_eq!(composed.left().bond_count(), 2);
        assert_eq!(composed.right().bond_count(), 0);
    }

    #[test]
    fn full_overlap_with_inverse_cancels_the_action() {
        let m = amine_shuttle(false);
        let step = &m.derivations()[0].rule;
        let inverse = step.invert();
        let overlap = AtomMap::identity(step.right().atom_ids());
        let composed = compose_rules_with_overlap(step, &inverse, &overlap).unwrap();
        assert!(crate::iso::is_isomorphic(composed.left(), composed.right()));
        // the transiently formed bond is remembered as a constraint
        assert!(composed.nonbond_left().contains(&pair(1, 4)));
    }
}
