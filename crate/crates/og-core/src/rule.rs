//! Rewrite rules over mixtures, their application, and chained derivations.
//!
//! A [`Rule`] is a span of two patterns sharing one atom-id space: an id
//! present in both `left` and `right` denotes the same preserved atom, and
//! the set of those ids forms the untyped invariant part. Because the
//! invariant part carries no labels, a preserved atom may change charge and a
//! preserved bond (a `context_bonds` entry) may change order across an
//! application. Ids present on only one side are deleted respectively created
//! by the rule; rules arising from reaction mechanisms never do either, but
//! substrate rules and compositions of them may.
//!
//! Non-bond constraints require a pair of pattern atoms to be unbonded in the
//! host. Every bond the rule creates induces an implicit constraint on the
//! left side (and symmetrically for deleted bonds on the right side); the
//! explicit sets exist for pairs that are unbonded on both sides yet still
//! constrained, which is how composed rules remember transiently formed
//! bonds.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::iso::Digest;
use crate::mixture::{
    AtomId, AtomLabel, AtomMap, AtomPair, BondOrder, Charge, Element, Mixture, MixtureError,
};
use crate::search::{self, LabeledGraph, SearchOptions, SearchOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("context atom set must equal the shared left/right ids (offending id {0})")]
    ContextAtomMismatch(AtomId),
    #[error("context atom {0} changes element across the rule")]
    ElementChange(AtomId),
    #[error("context bond {0} is not bonded on both sides")]
    ContextBondUnbonded(AtomPair),
    #[error("non-bond constraint {0} references a missing atom")]
    ConstraintDangling(AtomPair),
    #[error("non-bond constraint {0} contradicts an existing bond")]
    ConstraintBonded(AtomPair),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("match does not cover pattern atom {0}")]
    IncompleteMatch(AtomId),
    #[error("match sends pattern atom {pattern} to {host}, which mismatches the host")]
    LabelMismatch { pattern: AtomId, host: AtomId },
    #[error("pattern bond {0} is not matched by an equal-order host bond")]
    BondMismatch(AtomPair),
    #[error("non-bond constraint {0} is violated by the match")]
    ConstraintViolation(AtomPair),
    #[error("deleting atom {0} would leave dangling host bonds")]
    Dangling(AtomId),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MechanismError {
    #[error("step {step}: bond {pair} has order {actual}, delta claims {claimed}")]
    InconsistentBond {
        step: usize,
        pair: AtomPair,
        claimed: u8,
        actual: u8,
    },
    #[error("step {step}: atom {atom} has charge {actual}, delta claims {claimed}")]
    InconsistentCharge {
        step: usize,
        atom: AtomId,
        claimed: i8,
        actual: i8,
    },
    #[error("step {step}: bond change on {pair} has equal before/after order {order}")]
    NullBondChange { step: usize, pair: AtomPair, order: u8 },
    #[error("step {step}: atom {atom} does not exist in the current mixture")]
    UnknownAtom { step: usize, atom: AtomId },
    #[error("step {step}: derivation host is not the previous result")]
    ChainBreak { step: usize },
    #[error("step {step}: mechanism steps may not create or delete atoms")]
    NonConservative { step: usize },
    #[error("step {step}: {source}")]
    Apply {
        step: usize,
        #[source]
        source: ApplyError,
    },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// A rewrite rule; see the module docs for the shape.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    left: Mixture,
    right: Mixture,
    context_atoms: BTreeSet<AtomId>,
    context_bonds: BTreeSet<AtomPair>,
    nonbond_left: BTreeSet<AtomPair>,
    nonbond_right: BTreeSet<AtomPair>,
}

impl Rule {
    /// Validates and normalizes the parts into a rule.
    ///
    /// Explicit constraint entries that coincide with implicit ones (pairs
    /// bonded on the opposite side) are dropped, so structurally equal rules
    /// compare equal regardless of how redundantly they were stated.
    pub fn new(
        left: Mixture,
        right: Mixture,
        context_bonds: impl IntoIterator<Item = AtomPair>,
        nonbond_left: impl IntoIterator<Item = AtomPair>,
        nonbond_right: impl IntoIterator<Item = AtomPair>,
    ) -> Result<Rule, RuleError> {
        let shared: BTreeSet<AtomId> = left
            .atom_ids()
            .filter(|id| right.has_atom(*id))
            .collect();
        for id in &shared {
            let l = left.label(*id).unwrap();
            let r = right.label(*id).unwrap();
            if l.element != r.element {
                return Err(RuleError::ElementChange(*id));
            }
        }
        let mut ctx_bonds = BTreeSet::new();
        for pair in context_bonds {
            if left.bond(pair).is_none() || right.bond(pair).is_none() {
                return Err(RuleError::ContextBondUnbonded(pair));
            }
            ctx_bonds.insert(pair);
        }
        let mut nb_left = BTreeSet::new();
        for pair in nonbond_left {
            if !left.has_atom(pair.lo()) || !left.has_atom(pair.hi()) {
                return Err(RuleError::ConstraintDangling(pair));
            }
            if left.bond(pair).is_some() {
                return Err(RuleError::ConstraintBonded(pair));
            }
            // implicit when the right side bonds the pair
            if right.bond(pair).is_none() {
                nb_left.insert(pair);
            }
        }
        let mut nb_right = BTreeSet::new();
        for pair in nonbond_right {
            if !right.has_atom(pair.lo()) || !right.has_atom(pair.hi()) {
                return Err(RuleError::ConstraintDangling(pair));
            }
            if right.bond(pair).is_some() {
                return Err(RuleError::ConstraintBonded(pair));
            }
            if left.bond(pair).is_none() {
                nb_right.insert(pair);
            }
        }
        Ok(Rule {
            left,
            right,
            context_atoms: shared,
            context_bonds: ctx_bonds,
            nonbond_left: nb_left,
            nonbond_right: nb_right,
        })
    }

    /// Rule constructor that also checks a caller-supplied context atom set
    /// against the shared ids, for loading serialized rules.
    pub fn with_context_atoms(
        left: Mixture,
        right: Mixture,
        context_atoms: impl IntoIterator<Item = AtomId>,
        context_bonds: impl IntoIterator<Item = AtomPair>,
        nonbond_left: impl IntoIterator<Item = AtomPair>,
        nonbond_right: impl IntoIterator<Item = AtomPair>,
    ) -> Result<Rule, RuleError> {
        let declared: BTreeSet<AtomId> = context_atoms.into_iter().collect();
        let rule = Rule::new(left, right, context_bonds, nonbond_left, nonbond_right)?;
        if declared != rule.context_atoms {
            let offending = declared
                .symmetric_difference(&rule.context_atoms)
                .next()
                .copied()
                .unwrap_or(AtomId(0));
            return Err(RuleError::ContextAtomMismatch(offending));
        }
        Ok(rule)
    }

    /// The identity rule on the empty pattern; matches anything, changes
    /// nothing.
    pub fn empty() -> Rule {
        Rule::new(Mixture::new(), Mixture::new(), [], [], []).unwrap()
    }

    pub fn left(&self) -> &Mixture {
        &self.left
    }

    pub fn right(&self) -> &Mixture {
        &self.right
    }

    pub fn context_atoms(&self) -> &BTreeSet<AtomId> {
        &self.context_atoms
    }

    pub fn context_bonds(&self) -> &BTreeSet<AtomPair> {
        &self.context_bonds
    }

    pub fn nonbond_left(&self) -> &BTreeSet<AtomPair> {
        &self.nonbond_left
    }

    pub fn nonbond_right(&self) -> &BTreeSet<AtomPair> {
        &self.nonbond_right
    }

    /// Atoms present only on the right side (materialized by application).
    pub fn created_atoms(&self) -> Vec<AtomId> {
        self.right
            .atom_ids()
            .filter(|id| !self.left.has_atom(*id))
            .collect()
    }

    /// Atoms present only on the left side (removed by application).
    pub fn deleted_atoms(&self) -> Vec<AtomId> {
        self.left
            .atom_ids()
            .filter(|id| !self.right.has_atom(*id))
            .collect()
    }

    /// True when the rule neither creates nor deletes atoms.
    pub fn is_conservative(&self) -> bool {
        self.created_atoms().is_empty() && self.deleted_atoms().is_empty()
    }

    /// Element multisets of created and deleted atoms.
    pub fn exchange_multisets(&self) -> (BTreeMap<Element, usize>, BTreeMap<Element, usize>) {
        let count = |ids: &[AtomId], side: &Mixture| {
            let mut out = BTreeMap::new();
            for id in ids {
                *out.entry(side.label(*id).unwrap().element).or_insert(0) += 1;
            }
            out
        };
        (
            count(&self.created_atoms(), &self.right),
            count(&self.deleted_atoms(), &self.left),
        )
    }

    /// All pairs the matcher must verify as unbonded: explicit left
    /// constraints plus pairs bonded only on the right side.
    pub fn forbidden_left_pairs(&self) -> Vec<AtomPair> {
        let mut out: BTreeSet<AtomPair> = self.nonbond_left.clone();
        for (pair, _) in self.right.bonds() {
            if self.left.has_atom(pair.lo())
                && self.left.has_atom(pair.hi())
                && self.left.bond(pair).is_none()
            {
                out.insert(pair);
            }
        }
        out.into_iter().collect()
    }

    /// Swaps the two sides; the invariant part is untouched.
    pub fn invert(&self) -> Rule {
        Rule {
            left: self.right.clone(),
            right: self.left.clone(),
            context_atoms: self.context_atoms.clone(),
            context_bonds: self.context_bonds.clone(),
            nonbond_left: self.nonbond_right.clone(),
            nonbond_right: self.nonbond_left.clone(),
        }
    }

    /// Collapses the rule into one graph with per-element before/after
    /// labels.
    pub fn combined_graph(&self) -> CombinedGraph {
        let mut atoms = Vec::new();
        let ids: BTreeSet<AtomId> = self
            .left
            .atom_ids()
            .chain(self.right.atom_ids())
            .collect();
        for id in &ids {
            atoms.push(CombinedAtom {
                id: *id,
                left: self.left.label(*id),
                right: self.right.label(*id),
            });
        }
        let pairs: BTreeSet<AtomPair> = self
            .left
            .bonds()
            .map(|(p, _)| p)
            .chain(self.right.bonds().map(|(p, _)| p))
            .collect();
        let mut bonds = Vec::new();
        for pair in pairs {
            bonds.push(CombinedBond {
                pair,
                left_order: self.left.bond(pair),
                right_order: self.right.bond(pair),
            });
        }
        CombinedGraph { atoms, bonds }
    }

    /// Restriction of the rule to the invariant atoms (dropping everything
    /// else), preserving only structure that survives on the kept atoms.
    pub(crate) fn all_pairs(&self) -> BTreeSet<AtomPair> {
        self.left
            .bonds()
            .map(|(p, _)| p)
            .chain(self.right.bonds().map(|(p, _)| p))
            .chain(self.nonbond_left.iter().copied())
            .chain(self.nonbond_right.iter().copied())
            .collect()
    }
}

/// One rule presented as a single graph: every atom and bond appears once,
/// labeled by its left and right versions (absent side = `None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinedGraph {
    pub atoms: Vec<CombinedAtom>,
    pub bonds: Vec<CombinedBond>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinedAtom {
    pub id: AtomId,
    pub left: Option<AtomLabel>,
    pub right: Option<AtomLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinedBond {
    pub pair: AtomPair,
    pub left_order: Option<BondOrder>,
    pub right_order: Option<BondOrder>,
}

/// Enumerates the matches of a rule's left side in a host, honoring explicit
/// and implicit non-bond constraints. For atom-deleting rules, matches that
/// would leave dangling host bonds are filtered out, so every returned match
/// is applicable.
pub fn find_rule_matches(rule: &Rule, host: &Mixture) -> Vec<AtomMap> {
    let maps = crate::iso::find_monomorphisms(&rule.left, host, &rule.forbidden_left_pairs());
    let deleted = rule.deleted_atoms();
    if deleted.is_empty() {
        return maps;
    }
    maps.into_iter()
        .filter(|m| {
            deleted
                .iter()
                .all(|id| host.degree(m.get(*id).unwrap()) == rule.left.degree(*id))
        })
        .collect()
}

/// One rule application: `result` is `host` rewritten at `match_map`, and
/// `tracking` sends each surviving host atom to its result id. For
/// conservative rules the tracking map is the identity on the host's ids.
/// `comatch` is the right-side counterpart of the match, embedding the
/// rule's right pattern into the result.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Derivation {
    pub rule: Rule,
    pub host: Mixture,
    pub match_map: AtomMap,
    pub comatch: AtomMap,
    pub result: Mixture,
    pub tracking: AtomMap,
}

fn verify_match(rule: &Rule, host: &Mixture, m: &AtomMap) -> Result<(), ApplyError> {
    for (id, label) in rule.left.atoms() {
        let image = m.get(id).ok_or(ApplyError::IncompleteMatch(id))?;
        if host.label(image) != Some(label) {
            return Err(ApplyError::LabelMismatch {
                pattern: id,
                host: image,
            });
        }
    }
    for (pair, order) in rule.left.bonds() {
        let a = m.get(pair.lo()).ok_or(ApplyError::IncompleteMatch(pair.lo()))?;
        let b = m.get(pair.hi()).ok_or(ApplyError::IncompleteMatch(pair.hi()))?;
        if host.order_or_zero(a, b) != order.value() {
            return Err(ApplyError::BondMismatch(pair));
        }
    }
    for pair in rule.forbidden_left_pairs() {
        let (Some(a), Some(b)) = (m.get(pair.lo()), m.get(pair.hi())) else {
            continue;
        };
        if host.order_or_zero(a, b) != 0 {
            return Err(ApplyError::ConstraintViolation(pair));
        }
    }
    // deletion is only allowed when every incident host bond is matched by
    // the pattern, otherwise edges would dangle
    for id in rule.deleted_atoms() {
        let image = m.get(id).unwrap();
        let matched_degree = rule.left.degree(id);
        if host.degree(image) != matched_degree {
            return Err(ApplyError::Dangling(image));
        }
    }
    Ok(())
}

/// Applies `rule` at `match_map`. Bonds present only on the left are removed,
/// bonds present only on the right are added, preserved atoms and bonds are
/// relabeled to their right-side charge and order, deleted atoms vanish and
/// created atoms are materialized under fresh ids (`max host id + 1`
/// onwards, in ascending right-id order).
pub fn apply(rule: &Rule, host: &Mixture, match_map: &AtomMap) -> Result<Derivation, ApplyError> {
    verify_match(rule, host, match_map)?;
    let mut result = host.clone();

    for id in rule.deleted_atoms() {
        result.remove_atom(match_map.get(id).unwrap())?;
    }

    // fresh ids for created atoms, allocated past the original host range
    let mut extended = match_map.clone();
    let first_fresh = host.max_atom_id().map_or(0, |m| m.0 + 1);
    for (offset, id) in rule.created_atoms().into_iter().enumerate() {
        let fresh = AtomId(first_fresh + offset as u32);
        result.add_atom(fresh, rule.right.label(id).unwrap())?;
        extended
            .insert(id, fresh)
            .expect("fresh ids cannot collide");
    }

    for (pair, order) in rule.left.bonds() {
        let host_pair = pair.map(|id| match_map.get(id).unwrap())?;
        match rule.right.bond(pair) {
            None => {
                // removed, unless the deletion of an endpoint already took it
                if result.bond(host_pair).is_some() {
                    result.remove_bond(host_pair)?;
                }
            }
            Some(r_order) if r_order != order => {
                result.set_bond_order(host_pair, r_order)?;
            }
            Some(_) => {}
        }
    }
    for (pair, order) in rule.right.bonds() {
        if rule.left.bond(pair).is_some() {
            continue;
        }
        let host_pair = pair.map(|id| extended.get(id).unwrap())?;
        result.add_bond(host_pair.lo(), host_pair.hi(), order)?;
    }
    for id in rule.context_atoms() {
        let l = rule.left.label(*id).unwrap();
        let r = rule.right.label(*id).unwrap();
        if l.charge != r.charge {
            result.set_charge(match_map.get(*id).unwrap(), r.charge)?;
        }
    }

    let deleted: BTreeSet<AtomId> = rule
        .deleted_atoms()
        .iter()
        .map(|id| match_map.get(*id).unwrap())
        .collect();
    let tracking = AtomMap::identity(host.atom_ids().filter(|id| !deleted.contains(id)));
    let comatch = AtomMap::from_pairs(
        rule.right
            .atom_ids()
            .map(|id| (id, extended.get(id).unwrap())),
    )
    .expect("right-side embedding is injective");

    Ok(Derivation {
        rule: rule.clone(),
        host: host.clone(),
        match_map: match_map.clone(),
        comatch,
        result,
        tracking,
    })
}

/// Elementary change of one reaction step, expressed on stable atom ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepDelta {
    /// (pair, order before, order after); 0 encodes absence
    pub bond_changes: Vec<(AtomPair, u8, u8)>,
    /// (atom, charge before, charge after)
    pub charge_changes: Vec<(AtomId, i8, i8)>,
}

/// A chained sequence of derivations from an educt mixture, where each step's
/// host is id-identical to the previous step's result.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mechanism {
    educts: Mixture,
    derivations: Vec<Derivation>,
}

impl Mechanism {
    /// Wraps pre-built derivations, verifying the chain and conservativeness.
    pub fn from_derivations(
        educts: Mixture,
        derivations: Vec<Derivation>,
    ) -> Result<Mechanism, MechanismError> {
        let mut current = &educts;
        for (i, d) in derivations.iter().enumerate() {
            if &d.host != current {
                return Err(MechanismError::ChainBreak { step: i });
            }
            if !d.rule.is_conservative() {
                return Err(MechanismError::NonConservative { step: i });
            }
            current = &d.result;
        }
        Ok(Mechanism {
            educts,
            derivations,
        })
    }

    /// Builds a mechanism from per-step deltas. Each step's rule is minimal:
    /// exactly the atoms incident to a change, the changed bonds and charge
    /// relabels, and nothing else.
    pub fn from_deltas(educts: Mixture, steps: &[StepDelta]) -> Result<Mechanism, MechanismError> {
        let mut derivations = Vec::with_capacity(steps.len());
        let mut current = educts.clone();
        for (step, delta) in steps.iter().enumerate() {
            let rule = step_rule(&current, delta, step)?;
            let match_map = AtomMap::identity(rule.left.atom_ids());
            let derivation = apply(&rule, &current, &match_map)
                .map_err(|source| MechanismError::Apply { step, source })?;
            current = derivation.result.clone();
            derivations.push(derivation);
        }
        Ok(Mechanism {
            educts,
            derivations,
        })
    }

    pub fn educts(&self) -> &Mixture {
        &self.educts
    }

    pub fn derivations(&self) -> &[Derivation] {
        &self.derivations
    }

    pub fn step_count(&self) -> usize {
        self.derivations.len()
    }

    /// The mixture after step `i` (stage 0 is the educts).
    pub fn stage(&self, i: usize) -> &Mixture {
        if i == 0 {
            &self.educts
        } else {
            &self.derivations[i - 1].result
        }
    }

    pub fn final_mixture(&self) -> &Mixture {
        self.stage(self.step_count())
    }
}

/// Builds the minimal rule induced by a delta against the current mixture.
fn step_rule(current: &Mixture, delta: &StepDelta, step: usize) -> Result<Rule, MechanismError> {
    let mut atoms: BTreeSet<AtomId> = BTreeSet::new();
    for (pair, claimed_from, _) in &delta.bond_changes {
        for id in [pair.lo(), pair.hi()] {
            if !current.has_atom(id) {
                return Err(MechanismError::UnknownAtom { step, atom: id });
            }
            atoms.insert(id);
        }
        let actual = current.order_or_zero(pair.lo(), pair.hi());
        if actual != *claimed_from {
            return Err(MechanismError::InconsistentBond {
                step,
                pair: *pair,
                claimed: *claimed_from,
                actual,
            });
        }
    }
    for (pair, from, to) in &delta.bond_changes {
        if from == to {
            return Err(MechanismError::NullBondChange {
                step,
                pair: *pair,
                order: *from,
            });
        }
    }
    for (id, claimed_from, _) in &delta.charge_changes {
        let label = current
            .label(*id)
            .ok_or(MechanismError::UnknownAtom { step, atom: *id })?;
        if label.charge.value() != *claimed_from {
            return Err(MechanismError::InconsistentCharge {
                step,
                atom: *id,
                claimed: *claimed_from,
                actual: label.charge.value(),
            });
        }
        atoms.insert(*id);
    }

    let mut left = Mixture::new();
    let mut right = Mixture::new();
    for id in &atoms {
        let label = current.label(*id).unwrap();
        left.add_atom(*id, label)?;
        right.add_atom(*id, label)?;
    }
    for (id, _, to) in &delta.charge_changes {
        right.set_charge(*id, Charge::new(*to)?)?;
    }
    let mut context_bonds = Vec::new();
    for (pair, from, to) in &delta.bond_changes {
        if *from > 0 {
            left.add_bond(pair.lo(), pair.hi(), BondOrder::new(*from)?)?;
        }
        if *to > 0 {
            right.add_bond(pair.lo(), pair.hi(), BondOrder::new(*to)?)?;
        }
        // an order change preserves the bond's identity
        if *from > 0 && *to > 0 {
            context_bonds.push(*pair);
        }
    }
    Ok(Rule::new(left, right, context_bonds, [], [])?)
}

/// Runs the mechanism, returning the final mixture and the composite atom
/// map from the educts to it.
pub fn execute(m: &Mechanism) -> (Mixture, AtomMap) {
    let mut map = AtomMap::identity(m.educts().atom_ids());
    for d in m.derivations() {
        map = map.then(&d.tracking);
    }
    (m.final_mixture().clone(), map)
}

// ---------------------------------------------------------------------------
// rule isomorphism

/// Node label of the annotated combined graph: left/right atom labels with
/// `None` for an absent side.
type RuleNodeLabel = (Option<(Element, i8)>, Option<(Element, i8)>);
/// Edge label: left/right order (0 = absent) plus explicit constraint flags.
type RuleEdgeLabel = (u8, u8, bool, bool);

fn rule_graph(rule: &Rule) -> (Vec<AtomId>, LabeledGraph<RuleNodeLabel, RuleEdgeLabel>) {
    let ids: Vec<AtomId> = rule
        .left()
        .atom_ids()
        .chain(rule.right().atom_ids())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index_of = |id: AtomId| ids.binary_search(&id).unwrap();
    let mut graph = LabeledGraph::new();
    for id in &ids {
        let enc = |label: Option<AtomLabel>| {
            label.map(|l| (l.element, l.charge.value()))
        };
        graph.add_node((enc(rule.left().label(*id)), enc(rule.right().label(*id))));
    }
    for pair in rule.all_pairs() {
        let label = (
            rule.left().bond(pair).map_or(0, BondOrder::value),
            rule.right().bond(pair).map_or(0, BondOrder::value),
            rule.nonbond_left().contains(&pair),
            rule.nonbond_right().contains(&pair),
        );
        graph.add_edge(index_of(pair.lo()), index_of(pair.hi()), label);
    }
    (ids, graph)
}

fn rule_node_bytes(label: &RuleNodeLabel) -> Vec<u8> {
    let mut out = Vec::new();
    for side in [label.0, label.1] {
        match side {
            None => out.push(0),
            Some((element, charge)) => {
                out.push(1);
                out.extend_from_slice(element.symbol().as_bytes());
                out.push(charge as u8);
            }
        }
    }
    out
}

fn rule_edge_bytes(label: &RuleEdgeLabel) -> Vec<u8> {
    vec![label.0, label.1, label.2 as u8, label.3 as u8]
}

/// Isomorphism-invariant digest of a rule, used as a deduplication prefilter
/// and as the stable ordering key for rule sets.
pub fn rule_hash(rule: &Rule) -> Digest {
    let (_, graph) = rule_graph(rule);
    Digest(search::refinement_digest(
        &graph,
        rule_node_bytes,
        rule_edge_bytes,
    ))
}

/// Rule isomorphism: an id bijection preserving left/right labels on atoms
/// and bonds as well as the explicit constraint pairs.
pub fn rules_isomorphic(a: &Rule, b: &Rule) -> bool {
    let (_, ga) = rule_graph(a);
    let (_, gb) = rule_graph(b);
    if ga.node_count() != gb.node_count() || ga.edge_count() != gb.edge_count() {
        return false;
    }
    match search::monomorphisms(&ga, &gb, &SearchOptions::default()) {
        // equal counts: any mono between the annotated graphs is an iso
        SearchOutcome::Complete(maps) => !maps.is_empty(),
        SearchOutcome::TimedOut => unreachable!("no deadline configured"),
    }
}

/// Monomorphisms between annotated combined graphs, exposed for refinement
/// checks.
pub(crate) fn rule_monomorphisms(a: &Rule, b: &Rule) -> Vec<BTreeMap<AtomId, AtomId>> {
    let (ids_a, ga) = rule_graph(a);
    let (ids_b, gb) = rule_graph(b);
    match search::monomorphisms(&ga, &gb, &SearchOptions::default()) {
        SearchOutcome::Complete(maps) => maps
            .into_iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .map(|(i, &j)| (ids_a[i], ids_b[j]))
                    .collect()
            })
            .collect(),
        SearchOutcome::TimedOut => unreachable!("no deadline configured"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iso::is_isomorphic;

    fn label(e: Element) -> AtomLabel {
        AtomLabel::neutral(e)
    }

    fn charged(e: Element, q: i8) -> AtomLabel {
        AtomLabel::new(e, Charge::new(q).unwrap())
    }

    fn pair(a: u32, b: u32) -> AtomPair {
        AtomPair::new(AtomId(a), AtomId(b)).unwrap()
    }

    /// Proton transfer D-H + A -> D + A-H (A = N, D = O), as a rule.
    fn proton_transfer() -> Rule {
        let left = Mixture::from_parts(
            [
                (AtomId(0), label(Element::O)),
                (AtomId(1), label(Element::H)),
                (AtomId(2), label(Element::N)),
            ],
            [(AtomId(0), AtomId(1), BondOrder::SINGLE)],
        )
        .unwrap();
        let right = Mixture::from_parts(
            [
                (AtomId(0), charged(Element::O, -1)),
                (AtomId(1), label(Element::H)),
                (AtomId(2), charged(Element::N, 1)),
            ],
            [(AtomId(1), AtomId(2), BondOrder::SINGLE)],
        )
        .unwrap();
        Rule::new(left, right, [], [], []).unwrap()
    }

    fn methanol_amine_host() -> Mixture {
        Mixture::from_parts(
            [
                (AtomId(10), label(Element::C)),
                (AtomId(11), label(Element::O)),
                (AtomId(12), label(Element::H)),
                (AtomId(20), label(Element::N)),
                (AtomId(21), label(Element::H)),
            ],
            [
                (AtomId(10), AtomId(11), BondOrder::SINGLE),
                (AtomId(11), AtomId(12), BondOrder::SINGLE),
                (AtomId(20), AtomId(21), BondOrder::SINGLE),
            ],
        )
        .unwrap()
    }

    #[test]
    fn implicit_constraint_excludes_bonded_candidates() {
        let rule = proton_transfer();
        // implicit: H and N must not already be bonded
        assert_eq!(rule.forbidden_left_pairs(), vec![pair(1, 2)]);
        let host = methanol_amine_host();
        let matches = find_rule_matches(&rule, &host);
        assert_eq!(matches.len(), 1);
        // a host where the only N is already bonded to the candidate H
        let bonded = Mixture::from_parts(
            [
                (AtomId(0), label(Element::O)),
                (AtomId(1), label(Element::H)),
                (AtomId(2), label(Element::N)),
            ],
            [
                (AtomId(0), AtomId(1), BondOrder::SINGLE),
                (AtomId(1), AtomId(2), BondOrder::SINGLE),
            ],
        )
        .unwrap();
        assert!(find_rule_matches(&rule, &bonded).is_empty());
    }

    #[test]
    fn empty_rule_matches_once() {
        let host = methanol_amine_host();
        assert_eq!(find_rule_matches(&Rule::empty(), &host).len(), 1);
    }

    #[test]
    fn apply_transfers_proton_and_relabels() {
        let rule = proton_transfer();
        let host = methanol_amine_host();
        let m = &find_rule_matches(&rule, &host)[0];
        let d = apply(&rule, &host, m).unwrap();
        assert_eq!(d.result.order_or_zero(AtomId(11), AtomId(12)), 0);
        assert_eq!(d.result.order_or_zero(AtomId(12), AtomId(20)), 1);
        assert_eq!(d.result.label(AtomId(11)).unwrap().charge.value(), -1);
        assert_eq!(d.result.label(AtomId(20)).unwrap().charge.value(), 1);
        // mass conservation and identity tracking
        assert_eq!(d.result.atom_count(), host.atom_count());
        assert_eq!(d.tracking, AtomMap::identity(host.atom_ids()));
    }

    #[test]
    fn identity_rule_preserves_host() {
        let host = methanol_amine_host();
        let left = host.clone();
        let right = host.clone();
        let ctx: Vec<AtomPair> = host.bonds().map(|(p, _)| p).collect();
        let rule = Rule::new(left, right, ctx, [], []).unwrap();
        let m = AtomMap::identity(host.atom_ids());
        let d = apply(&rule, &host, &m).unwrap();
        assert_eq!(d.result, host);
    }

    #[test]
    fn invert_roundtrip() {
        let rule = proton_transfer();
        assert_eq!(rule.invert().invert(), rule);
        let host = methanol_amine_host();
        let m = &find_rule_matches(&rule, &host)[0];
        let d = apply(&rule, &host, m).unwrap();
        let inverse = rule.invert();
        let back = apply(&inverse, &d.result, m).unwrap();
        assert_eq!(back.result, host);
    }

    #[test]
    fn combined_graph_labels() {
        let rule = proton_transfer();
        let cg = rule.combined_graph();
        assert_eq!(cg.atoms.len(), 3);
        let n = cg.atoms.iter().find(|a| a.id == AtomId(2)).unwrap();
        assert_eq!(n.left.unwrap().charge.value(), 0);
        assert_eq!(n.right.unwrap().charge.value(), 1);
        let oh = cg.bonds.iter().find(|b| b.pair == pair(0, 1)).unwrap();
        assert_eq!(oh.left_order, Some(BondOrder::SINGLE));
        assert_eq!(oh.right_order, None);
        // inversion swaps all pairs
        let inv = rule.invert().combined_graph();
        let oh_inv = inv.bonds.iter().find(|b| b.pair == pair(0, 1)).unwrap();
        assert_eq!(oh_inv.left_order, None);
        assert_eq!(oh_inv.right_order, Some(BondOrder::SINGLE));
    }

    #[test]
    fn mechanism_from_deltas_checks_consistency() {
        let host = methanol_amine_host();
        // claims the O-H bond is double
        let bad = StepDelta {
            bond_changes: vec![(pair(11, 12), 2, 0)],
            charge_changes: vec![],
        };
        let err = Mechanism::from_deltas(host.clone(), &[bad]).unwrap_err();
        assert!(matches!(err, MechanismError::InconsistentBond { step: 0, .. }));

        let good = StepDelta {
            bond_changes: vec![(pair(11, 12), 1, 0), (pair(12, 20), 0, 1)],
            charge_changes: vec![(AtomId(11), 0, -1), (AtomId(20), 0, 1)],
        };
        let mech = Mechanism::from_deltas(host.clone(), &[good]).unwrap();
        assert_eq!(mech.step_count(), 1);
        let (final_mixture, map) = execute(&mech);
        assert_eq!(final_mixture.order_or_zero(AtomId(12), AtomId(20)), 1);
        assert_eq!(map.len(), host.atom_count());
    }

    #[test]
    fn empty_mechanism_executes_to_educts() {
        let host = methanol_amine_host();
        let mech = Mechanism::from_deltas(host.clone(), &[]).unwrap();
        let (final_mixture, map) = execute(&mech);
        assert_eq!(final_mixture, host);
        assert_eq!(map, AtomMap::identity(host.atom_ids()));
    }

    /// Naive edit-script oracle for apply on conservative rules.
    fn naive_apply(rule: &Rule, host: &Mixture, m: &AtomMap) -> Mixture {
        let mut g = host.clone();
        for (p, _) in rule.left().bonds() {
            if rule.right().bond(p).is_none() {
                g.remove_bond(p.map(|id| m.get(id).unwrap()).unwrap()).unwrap();
            }
        }
        for (p, o) in rule.right().bonds() {
            let hp = p.map(|id| m.get(id).unwrap()).unwrap();
            match rule.left().bond(p) {
                None => g.add_bond(hp.lo(), hp.hi(), o).unwrap(),
                Some(lo) if lo != o => g.set_bond_order(hp, o).unwrap(),
                Some(_) => {}
            }
        }
        for (id, r) in rule.right().atoms() {
            if rule.left().has_atom(id) {
                g.set_charge(m.get(id).unwrap(), r.charge).unwrap();
            }
        }
        g
    }

    #[test]
    fn apply_agrees_with_naive_editor() {
        let rule = proton_transfer();
        let host = methanol_amine_host();
        for m in find_rule_matches(&rule, &host) {
            let d = apply(&rule, &host, &m).unwrap();
            assert_eq!(d.result, naive_apply(&rule, &host, &m));
        }
    }

    #[test]
    fn rule_isomorphism_ignores_ids_but_not_structure() {
        let rule = proton_transfer();
        let shifted = Rule::new(
            rule.left().relabel_ids(|id| AtomId(id.0 + 40)).unwrap(),
            rule.right().relabel_ids(|id| AtomId(id.0 + 40)).unwrap(),
            [],
            [],
            [],
        )
        .unwrap();
        assert!(rules_isomorphic(&rule, &shifted));
        assert_eq!(rule_hash(&rule), rule_hash(&shifted));
        assert!(!rules_isomorphic(&rule, &rule.invert()));
    }

    #[test]
    fn rule_isomorphism_sees_constraints() {
        let atoms = [
            (AtomId(0), label(Element::N)),
            (AtomId(1), label(Element::H)),
        ];
        let plain = Rule::new(
            Mixture::from_parts(atoms, []).unwrap(),
            Mixture::from_parts(atoms, []).unwrap(),
            [],
            [],
            [],
        )
        .unwrap();
        let constrained = Rule::new(
            Mixture::from_parts(atoms, []).unwrap(),
            Mixture::from_parts(atoms, []).unwrap(),
            [],
            [pair(0, 1)],
            [pair(0, 1)],
        )
        .unwrap();
        assert!(!rules_isomorphic(&plain, &constrained));
        assert_ne!(rule_hash(&plain), rule_hash(&constrained));
    }

    #[test]
    fn non_conservative_apply_creates_and_deletes() {
        // swap one H for a fresh one: left O-H, right O-H' (different id)
        let left = Mixture::from_parts(
            [
                (AtomId(0), label(Element::O)),
                (AtomId(1), label(Element::H)),
            ],
            [(AtomId(0), AtomId(1), BondOrder::SINGLE)],
        )
        .unwrap();
        let right = Mixture::from_parts(
            [
                (AtomId(0), label(Element::O)),
                (AtomId(2), label(Element::H)),
            ],
            [(AtomId(0), AtomId(2), BondOrder::SINGLE)],
        )
        .unwrap();
        let rule = Rule::new(left, right, [], [], []).unwrap();
        assert_eq!(rule.created_atoms(), vec![AtomId(2)]);
        assert_eq!(rule.deleted_atoms(), vec![AtomId(1)]);

        let water = Mixture::from_parts(
            [
                (AtomId(5), label(Element::O)),
                (AtomId(6), label(Element::H)),
                (AtomId(7), label(Element::H)),
            ],
            [
                (AtomId(5), AtomId(6), BondOrder::SINGLE),
                (AtomId(5), AtomId(7), BondOrder::SINGLE),
            ],
        )
        .unwrap();
        let matches = find_rule_matches(&rule, &water);
        assert_eq!(matches.len(), 2);
        let d = apply(&rule, &water, &matches[0]).unwrap();
        assert!(is_isomorphic(&d.result, &water));
        // tracking omits the deleted hydrogen
        assert_eq!(d.tracking.len(), 2);
        // the fresh atom took the next free id
        assert!(d.result.has_atom(AtomId(8)));
    }

    #[test]
    fn dangling_deletion_rejected() {
        // delete a carbon that has unmatched host bonds
        let left = Mixture::from_parts([(AtomId(0), label(Element::C))], []).unwrap();
        let right = Mixture::new();
        let rule = Rule::new(left, right, [], [], []).unwrap();
        let host = Mixture::from_parts(
            [
                (AtomId(0), label(Element::C)),
                (AtomId(1), label(Element::C)),
            ],
            [(AtomId(0), AtomId(1), BondOrder::SINGLE)],
        )
        .unwrap();
        let m = AtomMap::from_pairs([(AtomId(0), AtomId(0))]).unwrap();
        assert!(matches!(
            apply(&rule, &host, &m),
            Err(ApplyError::Dangling(AtomId(0)))
        ));
        // and the matcher refuses to offer such matches
        assert!(find_rule_matches(&rule, &host).is_empty());
    }
}
