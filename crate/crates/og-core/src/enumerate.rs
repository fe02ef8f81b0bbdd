//! Enumerating the mechanisms consistent with a reaction sequence.
//!
//! Curated mechanism databases specify each reaction step with its own atom
//! map, but leave the correspondence between the products of one step and
//! the educts of the next implicit. Every choice of those inter-step
//! linkings (isomorphisms between the seam mixtures) yields a concrete
//! mechanism, and symmetric molecules make the choice ambiguous: chemically
//! different mechanisms can arise from the same sequence. This module
//! enumerates all linkings, builds each mechanism, and deduplicates the
//! resulting overlay rules up to rule isomorphism. Partial links (pinned
//! atom correspondences) cut the ambiguity down.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::iso::{find_monomorphisms_bounded, Digest, MatchOutcome};
use crate::mixture::{AtomId, AtomMap, AtomPair, Mixture};
use crate::overlay::overlay_rule;
use crate::rule::{rule_hash, rules_isomorphic, Mechanism, MechanismError, Rule, StepDelta};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SequenceError {
    #[error("step {step}: atom map is not a bijection between educts and products")]
    NonBijectiveMap { step: usize },
    #[error("step {step}: atom map changes the element of atom {atom}")]
    ElementChange { step: usize, atom: AtomId },
    #[error("steps {step} and {next}: products and educts have different label or bond multisets")]
    MultisetMismatch { step: usize, next: usize },
    #[error("partial link references step {0}, which has no following step")]
    LinkStepOutOfRange(usize),
    #[error("partial link references missing atom {0}")]
    LinkDanglingAtom(AtomId),
    #[error("contradictory pins on step {step}: {detail}")]
    ContradictoryPin { step: usize, detail: String },
    #[error("no linking between the products of step {seam} and the next educts")]
    NoLinking { seam: usize },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

/// One reaction step: educts, products, and the step's own atom map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceStep {
    pub educts: Mixture,
    pub products: Mixture,
    pub step_map: AtomMap,
}

/// A pinned atom correspondence across one seam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PartialLink {
    pub step_index: usize,
    pub product_atom: AtomId,
    pub next_educt_atom: AtomId,
}

/// A list of reaction steps with per-step atom maps but no inter-step maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionSequence {
    steps: Vec<SequenceStep>,
    partial_links: Vec<PartialLink>,
}

impl ReactionSequence {
    pub fn new(
        steps: Vec<SequenceStep>,
        partial_links: Vec<PartialLink>,
    ) -> Result<ReactionSequence, SequenceError> {
        for (i, step) in steps.iter().enumerate() {
            // the step map must be a bijection between the step's own educt
            // and product atoms, preserving elements
            if step.step_map.len() != step.educts.atom_count()
                || step.educts.atom_count() != step.products.atom_count()
            {
                return Err(SequenceError::NonBijectiveMap { step: i });
            }
            for (src, dst) in step.step_map.pairs() {
                let (Some(e), Some(p)) = (step.educts.label(src), step.products.label(dst))
                else {
                    return Err(SequenceError::NonBijectiveMap { step: i });
                };
                if e.element != p.element {
                    return Err(SequenceError::ElementChange { step: i, atom: src });
                }
            }
        }
        for i in 1..steps.len() {
            let prev = &steps[i - 1].products;
            let next = &steps[i].educts;
            if prev.label_multiset() != next.label_multiset()
                || prev.order_multiset() != next.order_multiset()
            {
                return Err(SequenceError::MultisetMismatch { step: i - 1, next: i });
            }
        }
        let seq = ReactionSequence {
            steps,
            partial_links: Vec::new(),
        };
        seq.with_pins(&partial_links)
    }

    pub fn steps(&self) -> &[SequenceStep] {
        &self.steps
    }

    pub fn partial_links(&self) -> &[PartialLink] {
        &self.partial_links
    }

    /// Returns a copy of the sequence with additional pins, validated
    /// against the steps and against each other.
    pub fn with_pins(&self, pins: &[PartialLink]) -> Result<ReactionSequence, SequenceError> {
        let mut all: Vec<PartialLink> = self.partial_links.clone();
        all.extend_from_slice(pins);
        all.sort();
        all.dedup();
        let mut by_product: BTreeMap<(usize, AtomId), AtomId> = BTreeMap::new();
        let mut by_educt: BTreeMap<(usize, AtomId), AtomId> = BTreeMap::new();
        for link in &all {
            if link.step_index + 1 >= self.steps.len() {
                return Err(SequenceError::LinkStepOutOfRange(link.step_index));
            }
            let products = &self.steps[link.step_index].products;
            let educts = &self.steps[link.step_index + 1].educts;
            let (Some(pl), Some(el)) = (
                products.label(link.product_atom),
                educts.label(link.next_educt_atom),
            ) else {
                return Err(SequenceError::LinkDanglingAtom(link.product_atom));
            };
            if pl != el {
                return Err(SequenceError::ContradictoryPin {
                    step: link.step_index,
                    detail: format!(
                        "cannot link {} ({pl}) to {} ({el})",
                        link.product_atom, link.next_educt_atom
                    ),
                });
            }
            if let Some(prev) =
                by_product.insert((link.step_index, link.product_atom), link.next_educt_atom)
            {
                if prev != link.next_educt_atom {
                    return Err(SequenceError::ContradictoryPin {
                        step: link.step_index,
                        detail: format!("product atom {} pinned twice", link.product_atom),
                    });
                }
            }
            if let Some(prev) =
                by_educt.insert((link.step_index, link.next_educt_atom), link.product_atom)
            {
                if prev != link.product_atom {
                    return Err(SequenceError::ContradictoryPin {
                        step: link.step_index,
                        detail: format!("educt atom {} pinned twice", link.next_educt_atom),
                    });
                }
            }
        }
        Ok(ReactionSequence {
            steps: self.steps.clone(),
            partial_links: all,
        })
    }
}

/// Adds pins to a sequence; enumeration honors them afterwards.
pub fn apply_partial_map(
    seq: &ReactionSequence,
    pins: &[PartialLink],
) -> Result<ReactionSequence, SequenceError> {
    seq.with_pins(pins)
}

/// All isomorphisms from `prev_products` onto `next_educts` that honor the
/// forced pairs, deterministically ordered.
pub fn link_steps(
    prev_products: &Mixture,
    next_educts: &Mixture,
    forced: &[(AtomId, AtomId)],
) -> Vec<AtomMap> {
    if prev_products.atom_count() != next_educts.atom_count()
        || prev_products.bond_count() != next_educts.bond_count()
        || prev_products.label_multiset() != next_educts.label_multiset()
        || prev_products.order_multiset() != next_educts.order_multiset()
    {
        return Vec::new();
    }
    match find_monomorphisms_bounded(prev_products, next_educts, &[], forced, None) {
        MatchOutcome::Complete(maps) => maps,
        MatchOutcome::TimedOut => unreachable!("no deadline configured"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnumerationCounts {
    /// product over seams of the available linkings
    pub total_linkings: u64,
    /// mechanisms distinct as derivation sequences
    pub distinct_mechanisms: usize,
    /// overlay rules distinct up to rule isomorphism
    pub distinct_overlay_rules: usize,
}

#[derive(Debug, Clone)]
pub struct EnumerationResult {
    /// distinct mechanisms, in first-encountered order
    pub mechanisms: Vec<Mechanism>,
    /// pairwise non-isomorphic overlay rules, sorted by canonical hash
    pub overlay_rules: Vec<Rule>,
    pub counts: EnumerationCounts,
}

/// Builds the mechanism for one complete choice of seam linkings.
///
/// The mechanism lives in the coordinates of the first step's educts; each
/// step delta is translated through the accumulated coordinate map.
fn mechanism_for_linking(
    seq: &ReactionSequence,
    linkings: &[AtomMap],
) -> Result<Mechanism, SequenceError> {
    let educts = seq.steps[0].educts.clone();
    let mut to_mechanism = AtomMap::identity(educts.atom_ids());
    let mut deltas: Vec<StepDelta> = Vec::new();
    for (i, step) in seq.steps.iter().enumerate() {
        deltas.push(translate_delta(step, &to_mechanism));
        if i + 1 < seq.steps.len() {
            // educts[i+1] -> products[i] -> educts[i] -> mechanism
            to_mechanism = linkings[i]
                .invert()
                .then(&step.step_map.invert())
                .then(&to_mechanism);
        }
    }
    Ok(Mechanism::from_deltas(educts, &deltas)?)
}

/// The delta of one step, re-expressed in mechanism coordinates.
fn translate_delta(step: &SequenceStep, to_mechanism: &AtomMap) -> StepDelta {
    let mut delta = StepDelta::default();
    let mut seen: HashSet<AtomPair> = HashSet::new();
    let back = step.step_map.invert();
    for (pair, order) in step.educts.bonds() {
        let after = step.products.order_or_zero(
            step.step_map.get(pair.lo()).unwrap(),
            step.step_map.get(pair.hi()).unwrap(),
        );
        if after != order.value() {
            let mpair = pair.map(|id| to_mechanism.get(id).unwrap()).unwrap();
            delta.bond_changes.push((mpair, order.value(), after));
        }
        seen.insert(pair);
    }
    for (ppair, order) in step.products.bonds() {
        let epair = ppair.map(|id| back.get(id).unwrap()).unwrap();
        if seen.contains(&epair) {
            continue;
        }
        // bond absent among the educts, formed by the step
        let mpair = epair.map(|id| to_mechanism.get(id).unwrap()).unwrap();
        delta.bond_changes.push((mpair, 0, order.value()));
    }
    for (id, el) in step.educts.atoms() {
        let pl = step.products.label(step.step_map.get(id).unwrap()).unwrap();
        if el.charge != pl.charge {
            delta.charge_changes.push((
                to_mechanism.get(id).unwrap(),
                el.charge.value(),
                pl.charge.value(),
            ));
        }
    }
    delta.bond_changes.sort();
    delta.charge_changes.sort();
    delta
}

/// Enumerates every mechanism consistent with the sequence and collects the
/// distinct overlay rules.
pub fn enumerate_overlays(seq: &ReactionSequence) -> Result<EnumerationResult, SequenceError> {
    let n = seq.steps.len();
    let mut seam_linkings: Vec<Vec<AtomMap>> = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let forced: Vec<(AtomId, AtomId)> = seq
            .partial_links
            .iter()
            .filter(|l| l.step_index == i)
            .map(|l| (l.product_atom, l.next_educt_atom))
            .collect();
        let linkings = link_steps(&seq.steps[i].products, &seq.steps[i + 1].educts, &forced);
        if linkings.is_empty() {
            return Err(SequenceError::NoLinking { seam: i });
        }
        seam_linkings.push(linkings);
    }

    let total_linkings = seam_linkings
        .iter()
        .map(|l| l.len() as u64)
        .product::<u64>();

    let mut mechanisms: Vec<Mechanism> = Vec::new();
    let mut seen_mechanisms: HashSet<Mechanism> = HashSet::new();
    let mut combo: Vec<AtomMap> = Vec::new();
    collect_mechanisms(
        seq,
        &seam_linkings,
        &mut combo,
        &mut seen_mechanisms,
        &mut mechanisms,
    )?;

    // dedup overlay rules: hash buckets first, exact isomorphism inside
    let mut buckets: BTreeMap<Digest, Vec<usize>> = BTreeMap::new();
    let mut rules: Vec<Rule> = Vec::new();
    for m in &mechanisms {
        let (rule, _) = overlay_rule(m).expect("enumerated mechanisms chain correctly");
        let hash = rule_hash(&rule);
        let bucket = buckets.entry(hash).or_default();
        if !bucket.iter().any(|&ri| rules_isomorphic(&rules[ri], &rule)) {
            rules.push(rule);
            bucket.push(rules.len() - 1);
        }
    }
    // stable output order: by canonical hash (bucket order), then insertion
    let overlay_rules: Vec<Rule> = buckets
        .values()
        .flat_map(|bucket| bucket.iter().map(|&ri| rules[ri].clone()))
        .collect();

    let counts = EnumerationCounts {
        total_linkings,
        distinct_mechanisms: mechanisms.len(),
        distinct_overlay_rules: overlay_rules.len(),
    };
    Ok(EnumerationResult {
        mechanisms,
        overlay_rules,
        counts,
    })
}

fn collect_mechanisms(
    seq: &ReactionSequence,
    seam_linkings: &[Vec<AtomMap>],
    combo: &mut Vec<AtomMap>,
    seen: &mut HashSet<Mechanism>,
    out: &mut Vec<Mechanism>,
) -> Result<(), SequenceError> {
    if combo.len() == seam_linkings.len() {
        let mechanism = mechanism_for_linking(seq, combo)?;
        if seen.insert(mechanism.clone()) {
            out.push(mechanism);
        }
        return Ok(());
    }
    for linking in &seam_linkings[combo.len()] {
        combo.push(linking.clone());
        collect_mechanisms(seq, seam_linkings, combo, seen, out)?;
        combo.pop();
    }
    Ok(())
}
