//! A SMILES subset parser producing explicit-hydrogen mixtures.
//!
//! Supported: the neutral organic subset (B, C, N, O, P, S, F, Cl, Br, I),
//! bracket atoms with an explicit hydrogen count and charge, bond symbols
//! `-`, `=`, `#`, branches, single-digit ring closures, and `.` separated
//! components. Aromatic (lowercase) atoms, stereo markers, isotopes and
//! wildcards are rejected with a named error; molecules whose bond-order sum
//! cannot be reconciled with the charge-adjusted valence table are rejected
//! rather than silently patched.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mixture::{AtomId, AtomLabel, BondOrder, Charge, Element, Mixture};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("lexical error at position {position}: {message}")]
    Lexical { position: usize, message: String },
    #[error("unsupported feature at position {position}: {feature}")]
    Unsupported { position: usize, feature: String },
    #[error("unknown element '{symbol}' at position {position}")]
    UnknownElement { position: usize, symbol: String },
    #[error("charge {0} outside [-4, +4]")]
    ChargeOutOfRange(i16),
    #[error("ring bond {digit} opened at position {position} but never closed")]
    UnclosedRing { digit: u8, position: usize },
    #[error("ring bond {digit} at position {position} closes with conflicting orders")]
    RingOrderConflict { digit: u8, position: usize },
    #[error(
        "valence violation on atom {atom} ({element}{charge:+}): bond order sum {seen} does not fit"
    )]
    Valence {
        atom: AtomId,
        element: Element,
        charge: i8,
        seen: u32,
    },
}

/// Allowed bond-order sums for an element at a given charge; empty means the
/// charge state itself is not representable.
fn allowed_valences(element: Element, charge: i8) -> Vec<u32> {
    let shift = |base: i16, delta: i16| -> Vec<u32> {
        let v = base + delta;
        if v < 0 {
            Vec::new()
        } else {
            vec![v as u32]
        }
    };
    let q = charge as i16;
    match element {
        Element::H => shift(1, -q.abs()),
        Element::B => shift(3, -q),
        Element::C => shift(4, -q.abs()),
        Element::Si => shift(4, -q.abs()),
        Element::N => shift(3, q),
        Element::P => [3i16, 5]
            .iter()
            .filter_map(|b| u32::try_from(b + q).ok())
            .collect(),
        Element::O => shift(2, q),
        Element::S => [2i16, 4, 6]
            .iter()
            .filter_map(|b| u32::try_from(b + q).ok())
            .collect(),
        Element::F | Element::Cl | Element::Br | Element::I => shift(1, q),
    }
}

struct PendingAtom {
    label: AtomLabel,
    /// explicit hydrogen count from a bracket atom
    bracket_h: Option<u32>,
    position: usize,
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<PendingAtom>,
    bonds: Vec<(usize, usize, BondOrder)>,
    /// digit -> (open atom index, open position, declared order)
    open_rings: BTreeMap<u8, (usize, usize, Option<BondOrder>)>,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Parser<'a> {
        Parser {
            input: input.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            open_rings: BTreeMap::new(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn lexical(&self, message: impl Into<String>) -> SmilesError {
        SmilesError::Lexical {
            position: self.pos,
            message: message.into(),
        }
    }

    fn unsupported(&self, feature: impl Into<String>) -> SmilesError {
        SmilesError::Unsupported {
            position: self.pos,
            feature: feature.into(),
        }
    }

    fn parse(mut self) -> Result<Mixture, SmilesError> {
        self.component()?;
        while let Some(c) = self.peek() {
            if c == b'.' {
                self.bump();
                self.component()?;
            } else {
                return Err(self.lexical(format!("unexpected character '{}'", c as char)));
            }
        }
        if let Some((&digit, &(_, position, _))) = self.open_rings.iter().next() {
            return Err(SmilesError::UnclosedRing { digit, position });
        }
        self.build()
    }

    /// One dot-free component: a chain with branches and ring bonds.
    fn component(&mut self) -> Result<(), SmilesError> {
        let first = self.atom()?;
        self.chain(first)?;
        Ok(())
    }

    fn chain(&mut self, mut prev: usize) -> Result<(), SmilesError> {
        loop {
            match self.peek() {
                None | Some(b'.') => return Ok(()),
                Some(b')') => return Ok(()),
                Some(b'(') => {
                    self.bump();
                    let order = self.bond_symbol()?;
                    let branch_first = self.atom()?;
                    self.push_bond(prev, branch_first, order);
                    self.chain(branch_first)?;
                    match self.bump() {
                        Some(b')') => {}
                        _ => return Err(self.lexical("expected ')'")),
                    }
                }
                Some(c) if c.is_ascii_digit() => {
                    self.ring_closure(prev, None)?;
                }
                Some(_) => {
                    let order = self.bond_symbol()?;
                    if let Some(c) = self.peek() {
                        if c.is_ascii_digit() {
                            self.ring_closure(prev, order)?;
                            continue;
                        }
                    }
                    let next = self.atom()?;
                    self.push_bond(prev, next, order);
                    prev = next;
                }
            }
        }
    }

    fn push_bond(&mut self, a: usize, b: usize, order: Option<BondOrder>) {
        self.bonds.push((a, b, order.unwrap_or(BondOrder::SINGLE)));
    }

    fn bond_symbol(&mut self) -> Result<Option<BondOrder>, SmilesError> {
        match self.peek() {
            Some(b'-') => {
                self.bump();
                Ok(Some(BondOrder::SINGLE))
            }
            Some(b'=') => {
                self.bump();
                Ok(Some(BondOrder::DOUBLE))
            }
            Some(b'#') => {
                self.bump();
                Ok(Some(BondOrder::TRIPLE))
            }
            Some(b':') => Err(self.unsupported("aromatic bond ':'")),
            Some(b'/') | Some(b'\\') => Err(self.unsupported("stereo bond marker")),
            _ => Ok(None),
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        order: Option<BondOrder>,
    ) -> Result<(), SmilesError> {
        let position = self.pos;
        let digit = self.bump().unwrap() - b'0';
        match self.open_rings.remove(&digit) {
            None => {
                self.open_rings.insert(digit, (atom, position, order));
            }
            Some((other, _, open_order)) => {
                if other == atom {
                    return Err(SmilesError::Lexical {
                        position,
                        message: format!("ring bond {digit} closes on its own atom"),
                    });
                }
                let resolved = match (open_order, order) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(SmilesError::RingOrderConflict { digit, position })
                    }
                    (Some(a), _) => Some(a),
                    (None, b) => b,
                };
                self.push_bond(other, atom, resolved);
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<usize, SmilesError> {
        match self.peek() {
            Some(b'[') => self.bracket_atom(),
            Some(b'*') => Err(self.unsupported("wildcard atom '*'")),
            Some(c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's')) => {
                Err(self.unsupported(format!("aromatic atom '{}'", c as char)))
            }
            Some(c) if c.is_ascii_uppercase() => {
                let start = self.pos;
                self.bump();
                // two-letter organic-subset symbols
                let symbol = match (c, self.peek()) {
                    (b'C', Some(b'l')) => {
                        self.bump();
                        "Cl".to_string()
                    }
                    (b'B', Some(b'r')) => {
                        self.bump();
                        "Br".to_string()
                    }
                    _ => (c as char).to_string(),
                };
                let element = Element::from_symbol(&symbol).ok_or(SmilesError::UnknownElement {
                    position: start,
                    symbol: symbol.clone(),
                })?;
                const ORGANIC: [Element; 10] = [
                    Element::B,
                    Element::C,
                    Element::N,
                    Element::O,
                    Element::P,
                    Element::S,
                    Element::F,
                    Element::Cl,
                    Element::Br,
                    Element::I,
                ];
                if !ORGANIC.contains(&element) {
                    return Err(SmilesError::Unsupported {
                        position: start,
                        feature: format!("'{symbol}' outside brackets"),
                    });
                }
                self.atoms.push(PendingAtom {
                    label: AtomLabel::neutral(element),
                    bracket_h: None,
                    position: start,
                });
                Ok(self.atoms.len() - 1)
            }
            Some(c) => Err(self.lexical(format!("unexpected character '{}'", c as char))),
            None => Err(self.lexical("unexpected end of input")),
        }
    }

    fn bracket_atom(&mut self) -> Result<usize, SmilesError> {
        let start = self.pos;
        self.bump(); // '['
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            return Err(self.unsupported("isotope label"));
        }
        let symbol_start = self.pos;
        let first = self.bump().ok_or_else(|| self.lexical("unterminated bracket atom"))?;
        if first.is_ascii_lowercase() {
            return Err(SmilesError::Unsupported {
                position: symbol_start,
                feature: format!("aromatic atom '{}'", first as char),
            });
        }
        let mut symbol = (first as char).to_string();
        if matches!(self.peek(), Some(c) if c.is_ascii_lowercase()) {
            let candidate = format!("{}{}", symbol, self.peek().unwrap() as char);
            if Element::from_symbol(&candidate).is_some() {
                self.bump();
                symbol = candidate;
            }
        }
        let element = Element::from_symbol(&symbol).ok_or(SmilesError::UnknownElement {
            position: symbol_start,
            symbol: symbol.clone(),
        })?;
        if matches!(self.peek(), Some(b'@')) {
            return Err(self.unsupported("stereo marker '@'"));
        }
        // hydrogen count ('H' optionally followed by digits); [H] itself is
        // a hydrogen atom, not a count
        let mut bracket_h = 0u32;
        if element != Element::H && self.peek() == Some(b'H') {
            self.bump();
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    bracket_h = bracket_h * 10 + (self.bump().unwrap() - b'0') as u32;
                }
            } else {
                bracket_h = 1;
            }
        }
        // charge: '+', '-', repeated, or with a digit
        let mut charge: i16 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit: i16 = if sign == b'+' { 1 } else { -1 };
            self.bump();
            charge = unit;
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                let mut magnitude = 0i16;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    magnitude = magnitude * 10 + (self.bump().unwrap() - b'0') as i16;
                }
                charge = unit * magnitude;
            } else {
                while self.peek() == Some(sign) {
                    self.bump();
                    charge += unit;
                }
            }
        }
        match self.bump() {
            Some(b']') => {}
            _ => {
                return Err(SmilesError::Lexical {
                    position: start,
                    message: "unterminated bracket atom".into(),
                })
            }
        }
        let charge = i8::try_from(charge)
            .ok()
            .and_then(|c| Charge::new(c).ok())
            .ok_or(SmilesError::ChargeOutOfRange(charge))?;
        self.atoms.push(PendingAtom {
            label: AtomLabel::new(element, charge),
            bracket_h: Some(bracket_h),
            position: start,
        });
        Ok(self.atoms.len() - 1)
    }

    /// Expands hydrogens and validates valences. Token atoms receive ids in
    /// token order; generated hydrogens are appended afterwards, grouped by
    /// their heavy atom.
    fn build(self) -> Result<Mixture, SmilesError> {
        let mut g = Mixture::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            g.add_atom(AtomId(i as u32), atom.label)
                .map_err(|_| SmilesError::Lexical {
                    position: atom.position,
                    message: "internal id clash".into(),
                })?;
        }
        for &(a, b, order) in &self.bonds {
            g.add_bond(AtomId(a as u32), AtomId(b as u32), order)
                .map_err(|e| SmilesError::Lexical {
                    position: self.atoms[b].position,
                    message: e.to_string(),
                })?;
        }

        let mut next_id = self.atoms.len() as u32;
        for (i, atom) in self.atoms.iter().enumerate() {
            let id = AtomId(i as u32);
            let element = atom.label.element;
            let charge = atom.label.charge.value();
            let seen = g.valence_sum(id);
            let allowed = allowed_valences(element, charge);
            let hydrogens = match atom.bracket_h {
                Some(h) => {
                    // bracket atoms state their hydrogen count; the total
                    // must land exactly on an allowed valence
                    if !allowed.contains(&(seen + h)) {
                        return Err(SmilesError::Valence {
                            atom: id,
                            element,
                            charge,
                            seen: seen + h,
                        });
                    }
                    h
                }
                None => {
                    // organic subset: fill up to the lowest fitting valence
                    match allowed.iter().find(|&&v| v >= seen) {
                        Some(&v) => v - seen,
                        None => {
                            return Err(SmilesError::Valence {
                                atom: id,
                                element,
                                charge,
                                seen,
                            })
                        }
                    }
                }
            };
            for _ in 0..hydrogens {
                let h_id = AtomId(next_id);
                next_id += 1;
                g.add_atom(h_id, AtomLabel::neutral(Element::H)).unwrap();
                g.add_bond(id, h_id, BondOrder::SINGLE).unwrap();
            }
        }
        Ok(g)
    }
}

/// Parses a SMILES string into an explicit-hydrogen mixture.
pub fn parse_smiles(text: &str) -> Result<Mixture, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Lexical {
            position: 0,
            message: "empty input".into(),
        });
    }
    Parser::new(text).parse()
}
