//! Molecular graphs.
//!
//! A [`Mixture`] is an undirected, possibly disconnected graph whose vertices
//! are atoms (element + formal charge) and whose edges are bonds with an
//! integer order. Connected components are the individual molecules. Atom
//! identifiers are stable: every operation in this crate that transforms a
//! mixture keeps the ids of surviving atoms, which is what makes atom maps
//! across derivations meaningful.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable atom identifier, unique within its containing mixture.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct AtomId(pub u32);

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Supported chemical elements. Aromatic and metal species are out of scope;
/// anything outside this table is rejected at the parsing boundary.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    F,
    Si,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 12] = [
        Element::H,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == s)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Formal charge, restricted to [-4, +4].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "i8", into = "i8")]
pub struct Charge(i8);

impl Charge {
    pub const ZERO: Charge = Charge(0);
    pub const MIN: i8 = -4;
    pub const MAX: i8 = 4;

    pub fn new(value: i8) -> Result<Charge, MixtureError> {
        if (Charge::MIN..=Charge::MAX).contains(&value) {
            Ok(Charge(value))
        } else {
            Err(MixtureError::ChargeOutOfRange(value))
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }
}

impl TryFrom<i8> for Charge {
    type Error = MixtureError;
    fn try_from(value: i8) -> Result<Charge, MixtureError> {
        Charge::new(value)
    }
}

impl From<Charge> for i8 {
    fn from(c: Charge) -> i8 {
        c.0
    }
}

impl fmt::Display for Charge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => Ok(()),
            1 => write!(f, "+"),
            -1 => write!(f, "-"),
            n if n > 0 => write!(f, "+{n}"),
            n => write!(f, "{n}"),
        }
    }
}

/// Bond order: single, double or triple. Order 0 never appears on a stored
/// bond; absence of a bond is encoded by absence of the edge.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub struct BondOrder(u8);

impl BondOrder {
    pub const SINGLE: BondOrder = BondOrder(1);
    pub const DOUBLE: BondOrder = BondOrder(2);
    pub const TRIPLE: BondOrder = BondOrder(3);

    pub fn new(value: u8) -> Result<BondOrder, MixtureError> {
        if (1..=3).contains(&value) {
            Ok(BondOrder(value))
        } else {
            Err(MixtureError::InvalidBondOrder(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for BondOrder {
    type Error = MixtureError;
    fn try_from(value: u8) -> Result<BondOrder, MixtureError> {
        BondOrder::new(value)
    }
}

impl From<BondOrder> for u8 {
    fn from(o: BondOrder) -> u8 {
        o.0
    }
}

/// Atom label: element plus formal charge.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct AtomLabel {
    pub element: Element,
    pub charge: Charge,
}

impl AtomLabel {
    pub fn new(element: Element, charge: Charge) -> AtomLabel {
        AtomLabel { element, charge }
    }

    pub fn neutral(element: Element) -> AtomLabel {
        AtomLabel {
            element,
            charge: Charge::ZERO,
        }
    }
}

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.element, self.charge)
    }
}

/// Unordered atom pair, normalized so the smaller id comes first.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct AtomPair(AtomId, AtomId);

impl AtomPair {
    pub fn new(a: AtomId, b: AtomId) -> Result<AtomPair, MixtureError> {
        if a == b {
            return Err(MixtureError::SelfLoop(a));
        }
        Ok(if a < b { AtomPair(a, b) } else { AtomPair(b, a) })
    }

    pub fn lo(self) -> AtomId {
        self.0
    }

    pub fn hi(self) -> AtomId {
        self.1
    }

    pub fn other(self, id: AtomId) -> AtomId {
        if id == self.0 {
            self.1
        } else {
            self.0
        }
    }

    pub fn contains(self, id: AtomId) -> bool {
        self.0 == id || self.1 == id
    }

    /// Applies `f` to both endpoints, renormalizing the pair.
    pub fn map(self, mut f: impl FnMut(AtomId) -> AtomId) -> Result<AtomPair, MixtureError> {
        AtomPair::new(f(self.0), f(self.1))
    }
}

impl fmt::Display for AtomPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MixtureError {
    #[error("duplicate atom id {0}")]
    DuplicateAtom(AtomId),
    #[error("atom id {0} does not exist")]
    MissingAtom(AtomId),
    #[error("bond {0}-{0} would be a self-loop")]
    SelfLoop(AtomId),
    #[error("parallel bond on pair {0}")]
    ParallelBond(AtomPair),
    #[error("no bond on pair {0}")]
    MissingBond(AtomPair),
    #[error("charge {0} outside [-4, +4]")]
    ChargeOutOfRange(i8),
    #[error("bond order {0} outside {{1, 2, 3}}")]
    InvalidBondOrder(u8),
}

/// A typed, undirected, possibly disconnected molecular graph.
///
/// Immutable by convention once fully built: all transforming operations in
/// this crate clone the mixture and edit the clone, so shared references are
/// safe across threads.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mixture {
    atoms: BTreeMap<AtomId, AtomLabel>,
    bonds: BTreeMap<AtomPair, BondOrder>,
    // adjacency mirror of `bonds`, kept in sync by the mutators below
    adjacency: BTreeMap<AtomId, BTreeMap<AtomId, BondOrder>>,
}

impl Mixture {
    pub fn new() -> Mixture {
        Mixture::default()
    }

    /// Builds a mixture from explicit atom and bond lists.
    pub fn from_parts(
        atoms: impl IntoIterator<Item = (AtomId, AtomLabel)>,
        bonds: impl IntoIterator<Item = (AtomId, AtomId, BondOrder)>,
    ) -> Result<Mixture, MixtureError> {
        let mut g = Mixture::new();
        for (id, label) in atoms {
            g.add_atom(id, label)?;
        }
        for (a, b, order) in bonds {
            g.add_bond(a, b, order)?;
        }
        Ok(g)
    }

    pub fn add_atom(&mut self, id: AtomId, label: AtomLabel) -> Result<(), MixtureError> {
        if self.atoms.contains_key(&id) {
            return Err(MixtureError::DuplicateAtom(id));
        }
        self.atoms.insert(id, label);
        self.adjacency.insert(id, BTreeMap::new());
        Ok(())
    }

    pub fn add_bond(
        &mut self,
        a: AtomId,
        b: AtomId,
        order: BondOrder,
    ) -> Result<(), MixtureError> {
        let pair = AtomPair::new(a, b)?;
        if !self.atoms.contains_key(&a) {
            return Err(MixtureError::MissingAtom(a));
        }
        if !self.atoms.contains_key(&b) {
            return Err(MixtureError::MissingAtom(b));
        }
        if self.bonds.contains_key(&pair) {
            return Err(MixtureError::ParallelBond(pair));
        }
        self.bonds.insert(pair, order);
        self.adjacency.get_mut(&a).unwrap().insert(b, order);
        self.adjacency.get_mut(&b).unwrap().insert(a, order);
        Ok(())
    }

    pub fn remove_bond(&mut self, pair: AtomPair) -> Result<BondOrder, MixtureError> {
        let order = self
            .bonds
            .remove(&pair)
            .ok_or(MixtureError::MissingBond(pair))?;
        self.adjacency.get_mut(&pair.lo()).unwrap().remove(&pair.hi());
        self.adjacency.get_mut(&pair.hi()).unwrap().remove(&pair.lo());
        Ok(order)
    }

    pub fn set_bond_order(
        &mut self,
        pair: AtomPair,
        order: BondOrder,
    ) -> Result<(), MixtureError> {
        if !self.bonds.contains_key(&pair) {
            return Err(MixtureError::MissingBond(pair));
        }
        self.bonds.insert(pair, order);
        self.adjacency
            .get_mut(&pair.lo())
            .unwrap()
            .insert(pair.hi(), order);
        self.adjacency
            .get_mut(&pair.hi())
            .unwrap()
            .insert(pair.lo(), order);
        Ok(())
    }

    pub fn set_charge(&mut self, id: AtomId, charge: Charge) -> Result<(), MixtureError> {
        let label = self
            .atoms
            .get_mut(&id)
            .ok_or(MixtureError::MissingAtom(id))?;
        label.charge = charge;
        Ok(())
    }

    /// Removes an atom together with all its incident bonds.
    pub fn remove_atom(&mut self, id: AtomId) -> Result<AtomLabel, MixtureError> {
        let label = self.atoms.remove(&id).ok_or(MixtureError::MissingAtom(id))?;
        let neighbors: Vec<AtomId> = self.adjacency[&id].keys().copied().collect();
        for n in neighbors {
            let pair = AtomPair::new(id, n).unwrap();
            self.bonds.remove(&pair);
            self.adjacency.get_mut(&n).unwrap().remove(&id);
        }
        self.adjacency.remove(&id);
        Ok(label)
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn has_atom(&self, id: AtomId) -> bool {
        self.atoms.contains_key(&id)
    }

    pub fn label(&self, id: AtomId) -> Option<AtomLabel> {
        self.atoms.get(&id).copied()
    }

    pub fn bond(&self, pair: AtomPair) -> Option<BondOrder> {
        self.bonds.get(&pair).copied()
    }

    /// Bond order between two atoms as a plain integer, with 0 for "absent".
    pub fn order_or_zero(&self, a: AtomId, b: AtomId) -> u8 {
        AtomPair::new(a, b)
            .ok()
            .and_then(|p| self.bond(p))
            .map_or(0, BondOrder::value)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (AtomId, AtomLabel)> + '_ {
        self.atoms.iter().map(|(id, label)| (*id, *label))
    }

    pub fn atom_ids(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.atoms.keys().copied()
    }

    pub fn bonds(&self) -> impl Iterator<Item = (AtomPair, BondOrder)> + '_ {
        self.bonds.iter().map(|(pair, order)| (*pair, *order))
    }

    pub fn neighbors(&self, id: AtomId) -> impl Iterator<Item = (AtomId, BondOrder)> + '_ {
        self.adjacency
            .get(&id)
            .into_iter()
            .flat_map(|m| m.iter().map(|(n, o)| (*n, *o)))
    }

    pub fn degree(&self, id: AtomId) -> usize {
        self.adjacency.get(&id).map_or(0, BTreeMap::len)
    }

    /// Sum of incident bond orders.
    pub fn valence_sum(&self, id: AtomId) -> u32 {
        self.neighbors(id).map(|(_, o)| o.value() as u32).sum()
    }

    pub fn max_atom_id(&self) -> Option<AtomId> {
        self.atoms.keys().next_back().copied()
    }

    /// Multiset of atom labels, useful as a cheap isomorphism invariant.
    pub fn label_multiset(&self) -> BTreeMap<AtomLabel, usize> {
        let mut out = BTreeMap::new();
        for (_, label) in self.atoms() {
            *out.entry(label).or_insert(0) += 1;
        }
        out
    }

    /// Multiset of bond orders.
    pub fn order_multiset(&self) -> BTreeMap<BondOrder, usize> {
        let mut out = BTreeMap::new();
        for (_, order) in self.bonds() {
            *out.entry(order).or_insert(0) += 1;
        }
        out
    }

    /// Splits the mixture into its connected components, ordered by their
    /// smallest contained atom id. Atom ids are preserved, so the components
    /// form a partition of `self`.
    pub fn components(&self) -> Vec<Mixture> {
        let mut seen: BTreeSet<AtomId> = BTreeSet::new();
        let mut out = Vec::new();
        for start in self.atoms.keys().copied() {
            if seen.contains(&start) {
                continue;
            }
            let mut stack = vec![start];
            let mut member: BTreeSet<AtomId> = BTreeSet::new();
            while let Some(id) = stack.pop() {
                if !member.insert(id) {
                    continue;
                }
                for (n, _) in self.neighbors(id) {
                    if !member.contains(&n) {
                        stack.push(n);
                    }
                }
            }
            seen.extend(member.iter().copied());
            out.push(self.induced_subgraph(&member));
        }
        out
    }

    /// Subgraph induced by the given atom set (ids preserved).
    pub fn induced_subgraph(&self, keep: &BTreeSet<AtomId>) -> Mixture {
        let mut g = Mixture::new();
        for (id, label) in self.atoms() {
            if keep.contains(&id) {
                g.add_atom(id, label).unwrap();
            }
        }
        for (pair, order) in self.bonds() {
            if keep.contains(&pair.lo()) && keep.contains(&pair.hi()) {
                g.add_bond(pair.lo(), pair.hi(), order).unwrap();
            }
        }
        g
    }

    /// Disjoint union; fails on id collisions.
    pub fn union(&self, other: &Mixture) -> Result<Mixture, MixtureError> {
        let mut g = self.clone();
        for (id, label) in other.atoms() {
            g.add_atom(id, label)?;
        }
        for (pair, order) in other.bonds() {
            g.add_bond(pair.lo(), pair.hi(), order)?;
        }
        Ok(g)
    }

    /// Rewrites every atom id through `f`, which must be injective.
    pub fn relabel_ids(
        &self,
        mut f: impl FnMut(AtomId) -> AtomId,
    ) -> Result<Mixture, MixtureError> {
        let mut g = Mixture::new();
        for (id, label) in self.atoms() {
            g.add_atom(f(id), label)?;
        }
        for (pair, order) in self.bonds() {
            g.add_bond(f(pair.lo()), f(pair.hi()), order)?;
        }
        Ok(g)
    }
}

/// An injective association between atom ids of two mixtures.
///
/// Total over its declared domain; `compose` and `invert` treat it as a
/// partial bijection.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomMap {
    pairs: BTreeMap<AtomId, AtomId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AtomMapError {
    #[error("atom {0} is mapped twice")]
    DuplicateSource(AtomId),
    #[error("image atom {0} has two preimages")]
    DuplicateImage(AtomId),
    #[error("atom {0} is not in the map's domain")]
    NotInDomain(AtomId),
}

impl AtomMap {
    pub fn new() -> AtomMap {
        AtomMap::default()
    }

    pub fn identity(ids: impl IntoIterator<Item = AtomId>) -> AtomMap {
        let mut map = AtomMap::new();
        for id in ids {
            map.pairs.insert(id, id);
        }
        map
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (AtomId, AtomId)>,
    ) -> Result<AtomMap, AtomMapError> {
        let mut map = AtomMap::new();
        let mut images = BTreeSet::new();
        for (src, dst) in pairs {
            if map.pairs.insert(src, dst).is_some() {
                return Err(AtomMapError::DuplicateSource(src));
            }
            if !images.insert(dst) {
                return Err(AtomMapError::DuplicateImage(dst));
            }
        }
        Ok(map)
    }

    pub fn insert(&mut self, src: AtomId, dst: AtomId) -> Result<(), AtomMapError> {
        if self.pairs.contains_key(&src) {
            return Err(AtomMapError::DuplicateSource(src));
        }
        if self.pairs.values().any(|&v| v == dst) {
            return Err(AtomMapError::DuplicateImage(dst));
        }
        self.pairs.insert(src, dst);
        Ok(())
    }

    pub fn get(&self, src: AtomId) -> Option<AtomId> {
        self.pairs.get(&src).copied()
    }

    pub fn apply(&self, src: AtomId) -> Result<AtomId, AtomMapError> {
        self.get(src).ok_or(AtomMapError::NotInDomain(src))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (AtomId, AtomId)> + '_ {
        self.pairs.iter().map(|(a, b)| (*a, *b))
    }

    pub fn domain(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.pairs.keys().copied()
    }

    pub fn contains(&self, src: AtomId) -> bool {
        self.pairs.contains_key(&src)
    }

    pub fn invert(&self) -> AtomMap {
        AtomMap {
            pairs: self.pairs.iter().map(|(a, b)| (*b, *a)).collect(),
        }
    }

    /// `self` then `next`; entries falling outside `next`'s domain are dropped.
    pub fn then(&self, next: &AtomMap) -> AtomMap {
        let mut out = AtomMap::new();
        for (src, mid) in self.pairs() {
            if let Some(dst) = next.get(mid) {
                out.pairs.insert(src, dst);
            }
        }
        out
    }
}
