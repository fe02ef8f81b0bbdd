//! Double-pushout rewriting for stepwise reaction mechanisms.
//!
//! The crate models reaction mechanisms as chained rule applications over
//! molecular graphs and collapses them into single *overlay rules* whose one
//! application reproduces the whole mechanism. On top of that sit: overlay
//! graphs with a five-class bond annotation, substrate rules with the
//! catalytic context stripped, enumeration of all mechanisms consistent with
//! an under-specified reaction sequence, and matching of overlay rules
//! against bare overall reactions.
//!
//! Modules, bottom up:
//!
//! * [`mixture`] — molecular graphs with stable atom ids.
//! * [`iso`] — isomorphism, monomorphism enumeration, canonical hashing.
//! * [`smiles`] / [`codec`] — input formats.
//! * [`rule`] — rewrite rules, application, derivations, mechanisms.
//! * [`overlay`] — rule composition, overlay rules and overlay graphs.
//! * [`substrate`] — catalyst detection and substrate rule extraction.
//! * [`enumerate`] — all-atom-map enumeration over reaction sequences.
//! * [`matcher`] — explaining overall reactions with overlay rules.
//!
//! # Example
//!
//! A proton hops from methanol onto methylamine and back; the overlay graph
//! of the two-step round trip records the nitrogen-hydrogen bond as
//! transiently formed and leaves no net action:
//!
//! ```
//! use og_core::mixture::{AtomId, AtomPair};
//! use og_core::overlay::{build_og, overlay_rule, BondClass};
//! use og_core::rule::{Mechanism, StepDelta};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let educts = og_core::smiles::parse_smiles("CO.CN")?;
//! let o = AtomId(1);   // methanol oxygen
//! let n = AtomId(3);   // amine nitrogen
//! let h = AtomId(7);   // the hydroxyl hydrogen
//! let hop = StepDelta {
//!     bond_changes: vec![
//!         (AtomPair::new(o, h)?, 1, 0),
//!         (AtomPair::new(n, h)?, 0, 1),
//!     ],
//!     charge_changes: vec![(o, 0, -1), (n, 0, 1)],
//! };
//! let back = StepDelta {
//!     bond_changes: vec![
//!         (AtomPair::new(n, h)?, 1, 0),
//!         (AtomPair::new(o, h)?, 0, 1),
//!     ],
//!     charge_changes: vec![(n, 1, 0), (o, -1, 0)],
//! };
//! let mechanism = Mechanism::from_deltas(educts, &[hop, back])?;
//!
//! let (rule, _) = overlay_rule(&mechanism)?;
//! assert!(og_core::is_isomorphic(rule.left(), rule.right()));
//!
//! let og = build_og(&mechanism)?;
//! assert_eq!(og.bonds_of_class(BondClass::TransientFormed).len(), 1);
//! # Ok(())
//! # }
//! ```

pub mod codec;
pub mod enumerate;
pub mod iso;
pub mod matcher;
pub mod mixture;
pub mod overlay;
pub mod rule;
mod search;
pub mod smiles;
pub mod substrate;

pub use iso::{canonical_hash, find_monomorphisms, is_isomorphic, Digest};
pub use mixture::{AtomId, AtomLabel, AtomMap, AtomPair, BondOrder, Charge, Element, Mixture};
pub use rule::{apply, execute, find_rule_matches, Derivation, Mechanism, Rule};
