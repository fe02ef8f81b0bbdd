//! JSON documents for mixtures, rules, mechanisms, reaction sequences and
//! overlay graphs.
//!
//! Writers are bit-exact: UTF-8, LF line endings, two-space indentation,
//! object keys sorted, arrays sorted by ids, one trailing newline. Reading a
//! written document restores the value id-for-id, and rewriting a normalized
//! document reproduces it byte-for-byte.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerate::{PartialLink, ReactionSequence, SequenceError, SequenceStep};
use crate::mixture::{
    AtomId, AtomLabel, AtomMap, AtomMapError, AtomPair, BondOrder, Charge, Element, Mixture,
    MixtureError,
};
use crate::overlay::{OverlayGraph, SubstrateFlag};
use crate::rule::{Mechanism, MechanismError, Rule, RuleError, StepDelta};

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("unknown element '{0}'")]
    UnknownElement(String),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    AtomMap(#[from] AtomMapError),
    #[error("rule document declares {field} inconsistent with its sides")]
    ExchangeMismatch { field: &'static str },
}

fn to_pretty(value: &impl Serialize) -> String {
    // serde_json maps are ordered, so keys come out sorted
    let mut out = serde_json::to_string_pretty(value).expect("document types serialize");
    out.push('\n');
    out
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, DocumentError> {
    serde_json::from_str(text).map_err(|e| DocumentError::Json(e.to_string()))
}

// ---------------------------------------------------------------------------
// mixtures

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDocument {
    pub charge: i8,
    pub element: String,
    pub id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub dst: u32,
    pub order: u8,
    pub src: u32,
}

/// The on-disk mixture shape (`*.mix.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDocument {
    pub edges: Vec<EdgeDocument>,
    pub vertices: Vec<VertexDocument>,
}

impl MixtureDocument {
    pub fn from_mixture(g: &Mixture) -> MixtureDocument {
        MixtureDocument {
            edges: g
                .bonds()
                .map(|(pair, order)| EdgeDocument {
                    dst: pair.hi().0,
                    order: order.value(),
                    src: pair.lo().0,
                })
                .collect(),
            vertices: g
                .atoms()
                .map(|(id, label)| VertexDocument {
                    charge: label.charge.value(),
                    element: label.element.symbol().to_string(),
                    id: id.0,
                })
                .collect(),
        }
    }

    pub fn to_mixture(&self) -> Result<Mixture, DocumentError> {
        let mut g = Mixture::new();
        for v in &self.vertices {
            let element = Element::from_symbol(&v.element)
                .ok_or_else(|| DocumentError::UnknownElement(v.element.clone()))?;
            g.add_atom(AtomId(v.id), AtomLabel::new(element, Charge::new(v.charge)?))?;
        }
        for e in &self.edges {
            g.add_bond(AtomId(e.src), AtomId(e.dst), BondOrder::new(e.order)?)?;
        }
        Ok(g)
    }
}

pub fn read_mixture(text: &str) -> Result<Mixture, DocumentError> {
    from_json::<MixtureDocument>(text)?.to_mixture()
}

pub fn write_mixture(g: &Mixture) -> String {
    to_pretty(&MixtureDocument::from_mixture(g))
}

// ---------------------------------------------------------------------------
// rules

fn pair_list(pairs: impl IntoIterator<Item = AtomPair>) -> Vec<[u32; 2]> {
    pairs
        .into_iter()
        .map(|p| [p.lo().0, p.hi().0])
        .collect()
}

fn pairs_from_list(list: &[[u32; 2]]) -> Result<Vec<AtomPair>, DocumentError> {
    list.iter()
        .map(|[a, b]| Ok(AtomPair::new(AtomId(*a), AtomId(*b))?))
        .collect()
}

/// The on-disk rule shape (`*.rule.json`); substrate rules
/// (`*.srule.json`) additionally carry the created/deleted atom lists.
/// Implicit non-bond constraints are never serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDocument {
    pub context_atoms: Vec<u32>,
    pub context_bonds: Vec<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_atoms: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deleted_atoms: Option<Vec<u32>>,
    pub left: MixtureDocument,
    pub nonbond_left: Vec<[u32; 2]>,
    pub nonbond_right: Vec<[u32; 2]>,
    pub right: MixtureDocument,
}

impl RuleDocument {
    pub fn from_rule(rule: &Rule, with_exchange: bool) -> RuleDocument {
        RuleDocument {
            context_atoms: rule.context_atoms().iter().map(|id| id.0).collect(),
            context_bonds: pair_list(rule.context_bonds().iter().copied()),
            created_atoms: with_exchange
                .then(|| rule.created_atoms().iter().map(|id| id.0).collect()),
            deleted_atoms: with_exchange
                .then(|| rule.deleted_atoms().iter().map(|id| id.0).collect()),
            left: MixtureDocument::from_mixture(rule.left()),
            nonbond_left: pair_list(rule.nonbond_left().iter().copied()),
            nonbond_right: pair_list(rule.nonbond_right().iter().copied()),
            right: MixtureDocument::from_mixture(rule.right()),
        }
    }

    pub fn to_rule(&self) -> Result<Rule, DocumentError> {
        let rule = Rule::with_context_atoms(
            self.left.to_mixture()?,
            self.right.to_mixture()?,
            self.context_atoms.iter().map(|id| AtomId(*id)),
            pairs_from_list(&self.context_bonds)?,
            pairs_from_list(&self.nonbond_left)?,
            pairs_from_list(&self.nonbond_right)?,
        )?;
        if let Some(created) = &self.created_atoms {
            let declared: BTreeSet<u32> = created.iter().copied().collect();
            let actual: BTreeSet<u32> = rule.created_atoms().iter().map(|id| id.0).collect();
            if declared != actual {
                return Err(DocumentError::ExchangeMismatch {
                    field: "created_atoms",
                });
            }
        }
        if let Some(deleted) = &self.deleted_atoms {
            let declared: BTreeSet<u32> = deleted.iter().copied().collect();
            let actual: BTreeSet<u32> = rule.deleted_atoms().iter().map(|id| id.0).collect();
            if declared != actual {
                return Err(DocumentError::ExchangeMismatch {
                    field: "deleted_atoms",
                });
            }
        }
        Ok(rule)
    }
}

pub fn read_rule(text: &str) -> Result<Rule, DocumentError> {
    from_json::<RuleDocument>(text)?.to_rule()
}

/// Writes a plain rule document.
pub fn write_rule(rule: &Rule) -> String {
    to_pretty(&RuleDocument::from_rule(rule, false))
}

/// Writes a substrate rule document (with created/deleted atom lists).
pub fn write_substrate_rule(rule: &Rule) -> String {
    to_pretty(&RuleDocument::from_rule(rule, true))
}

// ---------------------------------------------------------------------------
// mechanisms

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondChangeDocument {
    pub dst: u32,
    pub from: u8,
    pub src: u32,
    pub to: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeChangeDocument {
    pub from: i8,
    pub id: u32,
    pub to: i8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDeltaDocument {
    pub bond_changes: Vec<BondChangeDocument>,
    pub charge_changes: Vec<ChargeChangeDocument>,
}

/// The on-disk mechanism shape (`*.mech.json`): educts plus per-step deltas
/// on stable atom ids. The stable ids across steps are the atom map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismDocument {
    pub educts: MixtureDocument,
    pub steps: Vec<StepDeltaDocument>,
}

impl MechanismDocument {
    pub fn from_mechanism(m: &Mechanism) -> MechanismDocument {
        let mut steps = Vec::new();
        for d in m.derivations() {
            let mut bond_changes = Vec::new();
            for pair in d.rule.all_pairs() {
                let host_pair = pair
                    .map(|id| d.match_map.get(id).unwrap())
                    .expect("mechanism matches are injective");
                let from = d.rule.left().bond(pair).map_or(0, BondOrder::value);
                let to = d.rule.right().bond(pair).map_or(0, BondOrder::value);
                if from != to {
                    bond_changes.push(BondChangeDocument {
                        dst: host_pair.hi().0,
                        from,
                        src: host_pair.lo().0,
                        to,
                    });
                }
            }
            bond_changes.sort_by_key(|c| (c.src, c.dst));
            let mut charge_changes = Vec::new();
            for id in d.rule.context_atoms() {
                let from = d.rule.left().label(*id).unwrap().charge.value();
                let to = d.rule.right().label(*id).unwrap().charge.value();
                if from != to {
                    charge_changes.push(ChargeChangeDocument {
                        from,
                        id: d.match_map.get(*id).unwrap().0,
                        to,
                    });
                }
            }
            charge_changes.sort_by_key(|c| c.id);
            steps.push(StepDeltaDocument {
                bond_changes,
                charge_changes,
            });
        }
        MechanismDocument {
            educts: MixtureDocument::from_mixture(m.educts()),
            steps,
        }
    }

    pub fn to_mechanism(&self) -> Result<Mechanism, DocumentError> {
        let educts = self.educts.to_mixture()?;
        let mut deltas = Vec::new();
        for step in &self.steps {
            let mut delta = StepDelta::default();
            for c in &step.bond_changes {
                delta.bond_changes.push((
                    AtomPair::new(AtomId(c.src), AtomId(c.dst))?,
                    c.from,
                    c.to,
                ));
            }
            for c in &step.charge_changes {
                delta.charge_changes.push((AtomId(c.id), c.from, c.to));
            }
            deltas.push(delta);
        }
        Ok(Mechanism::from_deltas(educts, &deltas)?)
    }
}

pub fn read_mechanism(text: &str) -> Result<Mechanism, DocumentError> {
    from_json::<MechanismDocument>(text)?.to_mechanism()
}

pub fn write_mechanism(m: &Mechanism) -> String {
    to_pretty(&MechanismDocument::from_mechanism(m))
}

// ---------------------------------------------------------------------------
// reaction sequences

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceStepDocument {
    pub educts: MixtureDocument,
    /// pairs [educt atom, product atom]
    pub map: Vec<[u32; 2]>,
    pub products: MixtureDocument,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialLinkDocument {
    pub next_educt_atom: u32,
    pub product_atom: u32,
    pub step_index: usize,
}

/// The on-disk reaction-sequence shape (`*.seq.json`): per-step atom maps
/// are given, inter-step maps are deliberately absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSequenceDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_links: Option<Vec<PartialLinkDocument>>,
    pub steps: Vec<SequenceStepDocument>,
}

impl ReactionSequenceDocument {
    pub fn from_sequence(seq: &ReactionSequence) -> ReactionSequenceDocument {
        let links: Vec<PartialLinkDocument> = seq
            .partial_links()
            .iter()
            .map(|l| PartialLinkDocument {
                next_educt_atom: l.next_educt_atom.0,
                product_atom: l.product_atom.0,
                step_index: l.step_index,
            })
            .collect();
        ReactionSequenceDocument {
            partial_links: (!links.is_empty()).then_some(links),
            steps: seq
                .steps()
                .iter()
                .map(|s| SequenceStepDocument {
                    educts: MixtureDocument::from_mixture(&s.educts),
                    map: s.step_map.pairs().map(|(a, b)| [a.0, b.0]).collect(),
                    products: MixtureDocument::from_mixture(&s.products),
                })
                .collect(),
        }
    }

    pub fn to_sequence(&self) -> Result<ReactionSequence, DocumentError> {
        let mut steps = Vec::new();
        for s in &self.steps {
            steps.push(SequenceStep {
                educts: s.educts.to_mixture()?,
                products: s.products.to_mixture()?,
                step_map: AtomMap::from_pairs(
                    s.map.iter().map(|[a, b]| (AtomId(*a), AtomId(*b))),
                )?,
            });
        }
        let links = self
            .partial_links
            .iter()
            .flatten()
            .map(|l| PartialLink {
                step_index: l.step_index,
                product_atom: AtomId(l.product_atom),
                next_educt_atom: AtomId(l.next_educt_atom),
            })
            .collect();
        Ok(ReactionSequence::new(steps, links)?)
    }
}

pub fn read_reaction_sequence(text: &str) -> Result<ReactionSequence, DocumentError> {
    from_json::<ReactionSequenceDocument>(text)?.to_sequence()
}

pub fn write_reaction_sequence(seq: &ReactionSequence) -> String {
    to_pretty(&ReactionSequenceDocument::from_sequence(seq))
}

// ---------------------------------------------------------------------------
// overlay graphs

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OgLabelDocument {
    pub charge: i8,
    pub element: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OgAtomDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<OgLabelDocument>,
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<OgLabelDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substrate_flag: Option<SubstrateFlag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OgBondDocument {
    pub class: crate::overlay::BondClass,
    pub end_order: u8,
    pub pair: [u32; 2],
    pub start_order: u8,
    pub transient: bool,
}

/// The on-disk overlay-graph shape (`*.og.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlayGraphDocument {
    pub atoms: Vec<OgAtomDocument>,
    pub bonds: Vec<OgBondDocument>,
}

impl OverlayGraphDocument {
    pub fn from_og(og: &OverlayGraph) -> OverlayGraphDocument {
        let label = |l: Option<AtomLabel>| {
            l.map(|l| OgLabelDocument {
                charge: l.charge.value(),
                element: l.element.symbol().to_string(),
            })
        };
        OverlayGraphDocument {
            atoms: og
                .atoms
                .iter()
                .map(|a| OgAtomDocument {
                    end: label(a.end),
                    id: a.id.0,
                    start: label(a.start),
                    substrate_flag: a.substrate_flag,
                })
                .collect(),
            bonds: og
                .bonds
                .iter()
                .map(|b| OgBondDocument {
                    class: b.class,
                    end_order: b.end_order,
                    pair: [b.pair.lo().0, b.pair.hi().0],
                    start_order: b.start_order,
                    transient: b.transient,
                })
                .collect(),
        }
    }
}

pub fn write_overlay_graph(og: &OverlayGraph) -> String {
    to_pretty(&OverlayGraphDocument::from_og(og))
}

pub fn read_overlay_graph_document(text: &str) -> Result<OverlayGraphDocument, DocumentError> {
    from_json(text)
}
