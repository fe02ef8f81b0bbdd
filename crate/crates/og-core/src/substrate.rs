//! Catalyst detection and substrate rule extraction.
//!
//! A catalyst, at the level of an overall reaction, is a molecule that shows
//! up in the exact same configuration among both the educts and the
//! products. Removing all catalytic components from an overlay rule leaves
//! the substrate rule: the part of the mechanism playing out within the
//! substrate molecules. Because catalysts may trade atoms with substrates
//! (a proton handed over here, another one returned there), the two sides
//! are restricted independently, and the resulting rule may delete atoms
//! that depart into the catalyst and create atoms that arrive from it. The
//! catalyst being regenerated makes the exchange mass invariant.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::iso::{canonical_hash, find_isomorphism, find_isomorphisms};
use crate::mixture::{AtomId, AtomMap, Mixture};
use crate::rule::{Derivation, Rule, RuleError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubstrateError {
    #[error("catalyst atom {0} is not part of the expected mixture")]
    AssignmentMismatch(AtomId),
    #[error("no assignments to condense")]
    EmptyInput,
    #[error("educt component {0} has no isomorphic, unused product component")]
    NoPartner(usize),
    #[error("component index {0} out of range")]
    BadComponentIndex(usize),
    #[error("created and deleted atoms have different element multisets")]
    MassImbalance,
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// A choice of catalytic components: the subgraph `catalyst` (in educt
/// coordinates) together with its embeddings into the educts and products.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalystAssignment {
    catalyst: Mixture,
    into_educts: AtomMap,
    into_products: AtomMap,
    /// paired (educt component, product component) indices, for reporting
    component_pairs: Vec<(usize, usize)>,
}

impl CatalystAssignment {
    pub fn catalyst(&self) -> &Mixture {
        &self.catalyst
    }

    pub fn into_educts(&self) -> &AtomMap {
        &self.into_educts
    }

    pub fn into_products(&self) -> &AtomMap {
        &self.into_products
    }

    pub fn component_pairs(&self) -> &[(usize, usize)] {
        &self.component_pairs
    }

    pub fn educt_atom_set(&self) -> BTreeSet<AtomId> {
        self.into_educts.pairs().map(|(_, e)| e).collect()
    }

    pub fn product_atom_set(&self) -> BTreeSet<AtomId> {
        self.into_products.pairs().map(|(_, p)| p).collect()
    }
}

fn build_assignment(
    educt_components: &[Mixture],
    product_components: &[Mixture],
    pairs: &[(usize, usize)],
) -> CatalystAssignment {
    let mut catalyst = Mixture::new();
    let mut into_educts = AtomMap::new();
    let mut into_products = AtomMap::new();
    for &(ei, pi) in pairs {
        let ecomp = &educt_components[ei];
        let pcomp = &product_components[pi];
        // the catalyst graph reuses educt ids, so c1 is an inclusion
        catalyst = catalyst.union(ecomp).expect("components are disjoint");
        let iso = find_isomorphism(ecomp, pcomp)
            .expect("paired components are isomorphic by construction");
        for (a, b) in iso.pairs() {
            into_educts.insert(a, a).expect("components are disjoint");
            into_products.insert(a, b).expect("components are disjoint");
        }
    }
    CatalystAssignment {
        catalyst,
        into_educts,
        into_products,
        component_pairs: pairs.to_vec(),
    }
}

/// Enumerates all maximal catalyst assignments between an educt and a
/// product mixture: per isomorphism class of components, as many educt
/// copies as possible are paired with product copies, and every choice of
/// copies and pairing yields one assignment. Deterministic order (by the
/// paired component index lists).
pub fn detect_catalysts(educts: &Mixture, products: &Mixture) -> Vec<CatalystAssignment> {
    let ecomps = educts.components();
    let pcomps = products.components();

    // group mutually isomorphic components, hash first
    let mut classes: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut class_reps: Vec<(usize, bool)> = Vec::new(); // (index, from educts)
    let ehash: Vec<_> = ecomps.iter().map(canonical_hash).collect();
    let phash: Vec<_> = pcomps.iter().map(canonical_hash).collect();
    let rep_matches = |rep: &(usize, bool),
                       hash: crate::iso::Digest,
                       graph: &Mixture,
                       ecomps: &[Mixture],
                       pcomps: &[Mixture]|
     -> bool {
        let (rep_graph, rep_hash) = if rep.1 {
            (&ecomps[rep.0], ehash[rep.0])
        } else {
            (&pcomps[rep.0], phash[rep.0])
        };
        rep_hash == hash && crate::iso::is_isomorphic(rep_graph, graph)
    };
    for (i, comp) in ecomps.iter().enumerate() {
        match class_reps
            .iter()
            .position(|rep| rep_matches(rep, ehash[i], comp, &ecomps, &pcomps))
        {
            Some(c) => classes[c].0.push(i),
            None => {
                class_reps.push((i, true));
                classes.push((vec![i], Vec::new()));
            }
        }
    }
    for (j, comp) in pcomps.iter().enumerate() {
        match class_reps
            .iter()
            .position(|rep| rep_matches(rep, phash[j], comp, &ecomps, &pcomps))
        {
            Some(c) => classes[c].1.push(j),
            None => {
                class_reps.push((j, false));
                classes.push((Vec::new(), vec![j]));
            }
        }
    }

    // per class: every maximum pairing between educt and product copies
    let mut per_class: Vec<Vec<Vec<(usize, usize)>>> = Vec::new();
    for (eis, pis) in &classes {
        let k = eis.len().min(pis.len());
        if k == 0 {
            continue;
        }
        let mut pairings = Vec::new();
        pick_pairings(eis, pis, k, &mut Vec::new(), &mut pairings);
        per_class.push(pairings);
    }
    if per_class.is_empty() {
        return Vec::new();
    }

    // cartesian product across classes
    let mut combos: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for class_pairings in &per_class {
        let mut next = Vec::new();
        for combo in &combos {
            for pairing in class_pairings {
                let mut extended = combo.clone();
                extended.extend_from_slice(pairing);
                next.push(extended);
            }
        }
        combos = next;
    }
    for combo in &mut combos {
        combo.sort();
    }
    combos.sort();
    combos.dedup();

    combos
        .into_iter()
        .map(|pairs| build_assignment(&ecomps, &pcomps, &pairs))
        .collect()
}

/// All ways to choose `k` educt copies and `k` product copies and pair them
/// up bijectively.
fn pick_pairings(
    eis: &[usize],
    pis: &[usize],
    k: usize,
    acc: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if acc.len() == k {
        out.push(acc.clone());
        return;
    }
    let remaining: Vec<usize> = eis
        .iter()
        .copied()
        .filter(|e| !acc.iter().any(|(ae, _)| ae == e))
        .collect();
    let slots = k - acc.len();
    // iterate over which remaining educt copy is used next; copies before
    // it are skipped for good, so keep enough for the rest
    for (idx, &e) in remaining.iter().enumerate() {
        if remaining.len() - idx < slots {
            break;
        }
        for &p in pis {
            if acc.iter().any(|(_, ap)| *ap == p) {
                continue;
            }
            acc.push((e, p));
            // the skipped copies stay skipped: restrict recursion to later ones
            let rest: Vec<usize> = remaining[idx + 1..].to_vec();
            pick_pairings(&rest, pis, k, acc, out);
            acc.pop();
        }
    }
}

/// Picks the assignment whose catalyst atoms agree the most with the overlay
/// derivation's atom map (the "most condensed" choice), re-optimizing the
/// product-side embedding per component. Ties break on the smallest paired
/// component-index list.
pub fn condense(
    assignments: &[CatalystAssignment],
    od: &Derivation,
) -> Result<CatalystAssignment, SubstrateError> {
    if assignments.is_empty() {
        return Err(SubstrateError::EmptyInput);
    }
    type Ranked = (usize, Vec<(usize, usize)>, CatalystAssignment);
    let mut best: Option<Ranked> = None;
    for assignment in assignments {
        let mut optimized_products = AtomMap::new();
        let mut fixed_points = 0usize;
        for ecomp in assignment.catalyst.components() {
            let atoms: BTreeSet<AtomId> = ecomp.atom_ids().collect();
            // rebuild the product component graph from the embedding
            let mut pcomp = Mixture::new();
            for a in &atoms {
                let p = assignment.into_products.get(*a).unwrap();
                pcomp.add_atom(p, ecomp.label(*a).unwrap()).unwrap();
            }
            for (pair, order) in ecomp.bonds() {
                let p = pair
                    .map(|id| assignment.into_products.get(id).unwrap())
                    .unwrap();
                pcomp.add_bond(p.lo(), p.hi(), order).unwrap();
            }
            let isos = find_isomorphisms(&ecomp, &pcomp);
            let (best_iso, best_agree) = isos
                .into_iter()
                .map(|iso| {
                    let agree = iso
                        .pairs()
                        .filter(|(a, b)| od.tracking.get(*a) == Some(*b))
                        .count();
                    (iso, agree)
                })
                .max_by(|(ia, aa), (ib, ab)| aa.cmp(ab).then_with(|| ib.cmp(ia)))
                .expect("a component is isomorphic to its own relabeling");
            fixed_points += best_agree;
            for (a, b) in best_iso.pairs() {
                optimized_products.insert(a, b).unwrap();
            }
        }
        let candidate = CatalystAssignment {
            catalyst: assignment.catalyst.clone(),
            into_educts: assignment.into_educts.clone(),
            into_products: optimized_products,
            component_pairs: assignment.component_pairs.clone(),
        };
        let key = assignment.component_pairs.clone();
        let better = match &best {
            None => true,
            Some((best_fp, best_key, _)) => {
                fixed_points > *best_fp || (fixed_points == *best_fp && key < *best_key)
            }
        };
        if better {
            best = Some((fixed_points, key, candidate));
        }
    }
    Ok(best.unwrap().2)
}

/// Builds an assignment from explicit educt component indices, pairing each
/// with the first unused isomorphic product component.
pub fn assignment_from_components(
    educts: &Mixture,
    products: &Mixture,
    educt_indices: &[usize],
) -> Result<CatalystAssignment, SubstrateError> {
    let ecomps = educts.components();
    let pcomps = products.components();
    let mut used_p: BTreeSet<usize> = BTreeSet::new();
    let mut pairs = Vec::new();
    for &ei in educt_indices {
        if ei >= ecomps.len() {
            return Err(SubstrateError::BadComponentIndex(ei));
        }
        let partner = (0..pcomps.len())
            .find(|pi| {
                !used_p.contains(pi) && crate::iso::is_isomorphic(&ecomps[ei], &pcomps[*pi])
            })
            .ok_or(SubstrateError::NoPartner(ei))?;
        used_p.insert(partner);
        pairs.push((ei, partner));
    }
    pairs.sort();
    Ok(build_assignment(&ecomps, &pcomps, &pairs))
}

/// Projects an overlay rule onto its substrate part: the catalyst atoms are
/// removed per side, constraints touching them are dropped, and atoms that
/// change sides (traded with the catalyst) become created/deleted atoms of
/// the resulting rule.
pub fn substrate_rule(
    overlay: &Rule,
    od: &Derivation,
    ca: &CatalystAssignment,
) -> Result<Rule, SubstrateError> {
    let cat_e = ca.educt_atom_set();
    let cat_p = ca.product_atom_set();
    for id in &cat_e {
        if !od.host.has_atom(*id) {
            return Err(SubstrateError::AssignmentMismatch(*id));
        }
    }
    for id in &cat_p {
        if !od.result.has_atom(*id) {
            return Err(SubstrateError::AssignmentMismatch(*id));
        }
    }

    // rule atoms kept per side, in rule coordinates
    let keep_left: BTreeSet<AtomId> = overlay
        .left()
        .atom_ids()
        .filter(|id| {
            od.match_map
                .get(*id)
                .map(|e| !cat_e.contains(&e))
                .unwrap_or(false)
        })
        .collect();
    let keep_right: BTreeSet<AtomId> = overlay
        .right()
        .atom_ids()
        .filter(|id| {
            od.comatch
                .get(*id)
                .map(|p| !cat_p.contains(&p))
                .unwrap_or(false)
        })
        .collect();

    let left = overlay.left().induced_subgraph(&keep_left);
    let right = overlay.right().induced_subgraph(&keep_right);
    let context_bonds: Vec<_> = overlay
        .context_bonds()
        .iter()
        .copied()
        .filter(|p| left.bond(*p).is_some() && right.bond(*p).is_some())
        .collect();
    let nonbond_left: Vec<_> = overlay
        .nonbond_left()
        .iter()
        .copied()
        .filter(|p| keep_left.contains(&p.lo()) && keep_left.contains(&p.hi()))
        .collect();
    let nonbond_right: Vec<_> = overlay
        .nonbond_right()
        .iter()
        .copied()
        .filter(|p| keep_right.contains(&p.lo()) && keep_right.contains(&p.hi()))
        .collect();

    let rule = Rule::new(left, right, context_bonds, nonbond_left, nonbond_right)?;
    let (created, deleted) = rule.exchange_multisets();
    if created != deleted {
        return Err(SubstrateError::MassImbalance);
    }
    Ok(rule)
}

/// One-stop extraction: detect catalysts on the overall reaction of a
/// mechanism's overlay derivation, condense, and project.
pub fn extract_substrate_rule(
    overlay: &Rule,
    od: &Derivation,
) -> Result<(Rule, CatalystAssignment), SubstrateError> {
    let assignments = detect_catalysts(&od.host, &od.result);
    let ca = condense(&assignments, od)?;
    let rule = substrate_rule(overlay, od, &ca)?;
    Ok((rule, ca))
}
