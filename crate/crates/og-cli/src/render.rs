//! DOT rendering of overlay graphs.
//!
//! Bond classes map onto edge colors: formed green, broken red, context
//! gray, transiently modified black, transiently formed blue (dashed, since
//! it is a constraint rather than a bond). Action bonds are drawn with
//! penwidth 2; created and deleted atoms get green respectively red node
//! outlines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use og_core::codec::{OgAtomDocument, OgBondDocument, OverlayGraphDocument};
use og_core::overlay::{BondClass, SubstrateFlag};

fn class_color(class: BondClass) -> &'static str {
    match class {
        BondClass::Formed => "green",
        BondClass::Broken => "red",
        BondClass::Context => "gray",
        BondClass::TransientModified => "black",
        BondClass::TransientFormed => "blue",
    }
}

fn is_action(class: BondClass) -> bool {
    matches!(class, BondClass::Formed | BondClass::Broken)
}

fn atom_text(atom: &OgAtomDocument) -> String {
    let side = |l: &Option<og_core::codec::OgLabelDocument>| {
        l.as_ref().map(|l| {
            let charge = match l.charge {
                0 => String::new(),
                1 => "+".to_string(),
                -1 => "-".to_string(),
                n if n > 0 => format!("+{n}"),
                n => n.to_string(),
            };
            format!("{}{}", l.element, charge)
        })
    };
    match (side(&atom.start), side(&atom.end)) {
        (Some(a), Some(b)) if a == b => a,
        (Some(a), Some(b)) => format!("{a};{b}"),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => String::from("?"),
    }
}

/// True for hydrogens that only ever sit in unchanged context: safe to fold
/// into their neighbor when rendering.
fn is_inert_hydrogen(atom: &OgAtomDocument, bonds: &[&OgBondDocument]) -> bool {
    let hydrogen = matches!((&atom.start, &atom.end), (Some(s), Some(e))
        if s.element == "H" && e.element == "H" && s.charge == 0 && e.charge == 0);
    hydrogen
        && atom.substrate_flag.is_none()
        && !bonds.is_empty()
        && bonds.iter().all(|b| b.class == BondClass::Context)
}

/// Renders the overlay-graph document as an undirected DOT graph.
pub fn render_dot(og: &OverlayGraphDocument, collapse_hydrogens: bool) -> String {
    let bonds_of = |id: u32| -> Vec<&OgBondDocument> {
        og.bonds.iter().filter(|b| b.pair.contains(&id)).collect()
    };

    let mut hidden: BTreeMap<u32, u32> = BTreeMap::new(); // hydrogen -> neighbor
    if collapse_hydrogens {
        for atom in &og.atoms {
            let incident = bonds_of(atom.id);
            if is_inert_hydrogen(atom, &incident) && incident.len() == 1 {
                let other = if incident[0].pair[0] == atom.id {
                    incident[0].pair[1]
                } else {
                    incident[0].pair[0]
                };
                hidden.insert(atom.id, other);
            }
        }
    }
    let mut folded: BTreeMap<u32, usize> = BTreeMap::new();
    for neighbor in hidden.values() {
        *folded.entry(*neighbor).or_insert(0) += 1;
    }

    let mut out = String::from("graph overlay {\n");
    out.push_str("  node [shape=circle, fontsize=11];\n");
    for atom in &og.atoms {
        if hidden.contains_key(&atom.id) {
            continue;
        }
        let mut label = atom_text(atom);
        if let Some(n) = folded.get(&atom.id) {
            if *n == 1 {
                label.push('H');
            } else {
                let _ = write!(label, "H{n}");
            }
        }
        let mut attrs = vec![format!("label=\"{label}\"")];
        match atom.substrate_flag {
            Some(SubstrateFlag::Created) => {
                attrs.push("color=green".into());
                attrs.push("penwidth=2".into());
            }
            Some(SubstrateFlag::Deleted) => {
                attrs.push("color=red".into());
                attrs.push("penwidth=2".into());
            }
            None => {}
        }
        let _ = writeln!(out, "  v{} [{}];", atom.id, attrs.join(", "));
    }
    for bond in &og.bonds {
        if hidden.contains_key(&bond.pair[0]) || hidden.contains_key(&bond.pair[1]) {
            continue;
        }
        let mut attrs = vec![format!("color={}", class_color(bond.class))];
        if is_action(bond.class) {
            attrs.push("penwidth=2".into());
        }
        if bond.class == BondClass::TransientFormed {
            attrs.push("style=dashed".into());
        }
        if bond.start_order.max(bond.end_order) > 1 {
            attrs.push(format!(
                "label=\"{}\"",
                order_text(bond.start_order, bond.end_order)
            ));
        }
        let _ = writeln!(
            out,
            "  v{} -- v{} [{}];",
            bond.pair[0],
            bond.pair[1],
            attrs.join(", ")
        );
    }
    out.push_str("}\n");
    out
}

fn order_text(start: u8, end: u8) -> String {
    if start == end {
        format!("{start}")
    } else {
        format!("{start};{end}")
    }
}
