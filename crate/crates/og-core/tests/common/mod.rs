//! Shared generators for randomized tests.
#![allow(dead_code)]

use og_core::mixture::{AtomId, AtomLabel, AtomPair, BondOrder, Charge, Element, Mixture};
use og_core::rule::{Mechanism, StepDelta};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random small mixture: up to `max_atoms` atoms, sparse random bonds,
/// occasional charges.
pub fn random_mixture(rng: &mut ChaCha8Rng, max_atoms: usize) -> Mixture {
    let elements = [Element::C, Element::N, Element::O, Element::S, Element::H];
    let n = rng.gen_range(3..=max_atoms.max(3));
    let mut g = Mixture::new();
    for i in 0..n {
        let element = *elements.choose(rng).unwrap();
        let charge = if rng.gen_bool(0.15) {
            Charge::new(if rng.gen_bool(0.5) { 1 } else { -1 }).unwrap()
        } else {
            Charge::ZERO
        };
        g.add_atom(AtomId(i as u32), AtomLabel::new(element, charge))
            .unwrap();
    }
    let attempts = rng.gen_range(0..=n + 2);
    for _ in 0..attempts {
        let a = rng.gen_range(0..n) as u32;
        let b = rng.gen_range(0..n) as u32;
        if a == b {
            continue;
        }
        let order = BondOrder::new(rng.gen_range(1..=2)).unwrap();
        let _ = g.add_bond(AtomId(a), AtomId(b), order);
    }
    g
}

/// A random valid delta against the current mixture: one to three changes
/// among bond breaking/forming/relabeling and charge steps.
pub fn random_delta(rng: &mut ChaCha8Rng, current: &Mixture) -> Option<StepDelta> {
    let ids: Vec<AtomId> = current.atom_ids().collect();
    if ids.len() < 2 {
        return None;
    }
    let mut delta = StepDelta::default();
    let changes = rng.gen_range(1..=3);
    let mut used_pairs: Vec<AtomPair> = Vec::new();
    let mut used_atoms: Vec<AtomId> = Vec::new();
    for _ in 0..changes {
        match rng.gen_range(0..4) {
            // break an existing bond
            0 => {
                let bonds: Vec<(AtomPair, BondOrder)> = current
                    .bonds()
                    .filter(|(p, _)| !used_pairs.contains(p))
                    .collect();
                if let Some((pair, order)) = bonds.choose(rng) {
                    used_pairs.push(*pair);
                    delta.bond_changes.push((*pair, order.value(), 0));
                }
            }
            // form an absent bond
            1 => {
                for _ in 0..8 {
                    let a = *ids.choose(rng).unwrap();
                    let b = *ids.choose(rng).unwrap();
                    if a == b {
                        continue;
                    }
                    let pair = AtomPair::new(a, b).unwrap();
                    if current.bond(pair).is_some() || used_pairs.contains(&pair) {
                        continue;
                    }
                    used_pairs.push(pair);
                    delta
                        .bond_changes
                        .push((pair, 0, rng.gen_range(1..=2)));
                    break;
                }
            }
            // change the order of an existing bond
            2 => {
                let bonds: Vec<(AtomPair, BondOrder)> = current
                    .bonds()
                    .filter(|(p, _)| !used_pairs.contains(p))
                    .collect();
                if let Some((pair, order)) = bonds.choose(rng) {
                    let to = if order.value() == 1 { 2 } else { order.value() - 1 };
                    used_pairs.push(*pair);
                    delta.bond_changes.push((*pair, order.value(), to));
                }
            }
            // nudge a charge
            _ => {
                for _ in 0..8 {
                    let id = *ids.choose(rng).unwrap();
                    if used_atoms.contains(&id) {
                        continue;
                    }
                    let from = current.label(id).unwrap().charge.value();
                    let to = from + if rng.gen_bool(0.5) { 1 } else { -1 };
                    if !(-4..=4).contains(&to) {
                        continue;
                    }
                    used_atoms.push(id);
                    delta.charge_changes.push((id, from, to));
                    break;
                }
            }
        }
    }
    if delta.bond_changes.is_empty() && delta.charge_changes.is_empty() {
        None
    } else {
        Some(delta)
    }
}

/// A random mechanism with up to `max_steps` steps over up to `max_atoms`
/// atoms. Steps that fail to generate are skipped, so shorter mechanisms
/// (including empty ones) occur naturally.
pub fn random_mechanism(rng: &mut ChaCha8Rng, max_atoms: usize, max_steps: usize) -> Mechanism {
    let educts = random_mixture(rng, max_atoms);
    let steps = rng.gen_range(0..=max_steps);
    let mut deltas = Vec::new();
    let mut current = educts.clone();
    for _ in 0..steps {
        if let Some(delta) = random_delta(rng, &current) {
            let staged = Mechanism::from_deltas(current.clone(), std::slice::from_ref(&delta))
                .expect("generated deltas are consistent");
            current = staged.final_mixture().clone();
            deltas.push(delta);
        }
    }
    Mechanism::from_deltas(educts, &deltas).expect("generated mechanisms are consistent")
}
