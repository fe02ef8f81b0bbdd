//! Isomorphism, monomorphism enumeration and canonical hashing for mixtures.

use std::fmt;
use std::time::Instant;

use crate::mixture::{AtomId, AtomMap, AtomPair, Mixture};
use crate::search::{self, LabeledGraph, SearchOptions, SearchOutcome};

/// Fixed-width mixture digest. Equal for isomorphic mixtures; a collision
/// between non-isomorphic mixtures is possible (though rare), so the digest
/// is only ever a prefilter and the final word belongs to [`is_isomorphic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Index-based view of a mixture for the generic matcher. The id vector maps
/// dense indices back to atom ids (ascending, so index order is stable).
pub(crate) struct IndexedMixture {
    pub ids: Vec<AtomId>,
    pub graph: LabeledGraph<(crate::mixture::Element, i8), u8>,
}

pub(crate) fn index_mixture(g: &Mixture) -> IndexedMixture {
    let ids: Vec<AtomId> = g.atom_ids().collect();
    let index_of = |id: AtomId| ids.binary_search(&id).unwrap();
    let mut graph = LabeledGraph::new();
    for &id in &ids {
        let label = g.label(id).unwrap();
        graph.add_node((label.element, label.charge.value()));
    }
    for (pair, order) in g.bonds() {
        graph.add_edge(index_of(pair.lo()), index_of(pair.hi()), order.value());
    }
    IndexedMixture { ids, graph }
}

/// Outcome of a deadline-bounded search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchOutcome {
    Complete(Vec<AtomMap>),
    TimedOut,
}

impl MatchOutcome {
    pub fn expect_complete(self) -> Vec<AtomMap> {
        match self {
            MatchOutcome::Complete(maps) => maps,
            MatchOutcome::TimedOut => panic!("search timed out without a deadline"),
        }
    }
}

/// Enumerates every injective, label- and order-preserving embedding of
/// `pattern` into `host` whose image keeps each `forbidden_pairs` entry
/// unbonded. The result is exhaustive and deterministically ordered by the
/// tuple of image ids taken in ascending pattern-id order.
pub fn find_monomorphisms(
    pattern: &Mixture,
    host: &Mixture,
    forbidden_pairs: &[AtomPair],
) -> Vec<AtomMap> {
    find_monomorphisms_bounded(pattern, host, forbidden_pairs, &[], None).expect_complete()
}

/// [`find_monomorphisms`] with pinned assignments and an optional deadline.
pub fn find_monomorphisms_bounded(
    pattern: &Mixture,
    host: &Mixture,
    forbidden_pairs: &[AtomPair],
    pinned: &[(AtomId, AtomId)],
    deadline: Option<Instant>,
) -> MatchOutcome {
    let p = index_mixture(pattern);
    let h = index_mixture(host);
    let pattern_index = |id: AtomId| p.ids.binary_search(&id).ok();
    let host_index = |id: AtomId| h.ids.binary_search(&id).ok();

    let mut options = SearchOptions {
        deadline,
        ..Default::default()
    };
    for pair in forbidden_pairs {
        // a forbidden pair referencing a missing pattern atom can never be
        // violated by an embedding of the pattern
        if let (Some(a), Some(b)) = (pattern_index(pair.lo()), pattern_index(pair.hi())) {
            options.forbidden.push((a, b));
        }
    }
    for &(pa, ha) in pinned {
        match (pattern_index(pa), host_index(ha)) {
            (Some(a), Some(b)) => options.pinned.push((a, b)),
            // unsatisfiable pin
            _ => return MatchOutcome::Complete(Vec::new()),
        }
    }

    match search::monomorphisms(&p.graph, &h.graph, &options) {
        SearchOutcome::TimedOut => MatchOutcome::TimedOut,
        SearchOutcome::Complete(raw) => MatchOutcome::Complete(
            raw.into_iter()
                .map(|mapping| {
                    AtomMap::from_pairs(
                        mapping
                            .iter()
                            .enumerate()
                            .map(|(pi, &hi)| (p.ids[pi], h.ids[hi])),
                    )
                    .expect("search produces injective maps")
                })
                .collect(),
        ),
    }
}

/// True iff a label- and order-preserving bijection between the two mixtures
/// exists.
pub fn is_isomorphic(a: &Mixture, b: &Mixture) -> bool {
    find_isomorphism(a, b).is_some()
}

/// Returns one isomorphism a -> b if any exists (the least one in the
/// deterministic search order).
pub fn find_isomorphism(a: &Mixture, b: &Mixture) -> Option<AtomMap> {
    if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
        return None;
    }
    if a.label_multiset() != b.label_multiset() || a.order_multiset() != b.order_multiset() {
        return None;
    }
    // equal atom and bond counts make every monomorphism a bijection that
    // also reflects bonds
    find_monomorphisms(a, b, &[]).into_iter().next()
}

/// Enumerates all isomorphisms a -> b (empty when none exist).
pub fn find_isomorphisms(a: &Mixture, b: &Mixture) -> Vec<AtomMap> {
    if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
        return Vec::new();
    }
    if a.label_multiset() != b.label_multiset() || a.order_multiset() != b.order_multiset() {
        return Vec::new();
    }
    find_monomorphisms(a, b, &[])
}

/// Isomorphism-invariant digest of a mixture.
///
/// The empty mixture always hashes to the same constant.
pub fn canonical_hash(g: &Mixture) -> Digest {
    let indexed = index_mixture(g);
    let bytes = search::refinement_digest(
        &indexed.graph,
        |(element, charge)| {
            let mut out = element.symbol().as_bytes().to_vec();
            out.push(*charge as u8);
            out
        },
        |order| vec![*order],
    );
    Digest(bytes)
}
