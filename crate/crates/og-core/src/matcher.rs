//! Explaining overall reactions with overlay rules.
//!
//! A bare reaction is just an educt and a product mixture. A rule explains
//! it when some single application of the rule to the educts produces a
//! mixture isomorphic to the products; each witnessing match pins the
//! mechanism's electron movements onto the educt atoms. Matching is
//! product-verified: educt-side matches are enumerated first and each
//! candidate's application result is checked against the declared products.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::iso::{find_monomorphisms_bounded, is_isomorphic, MatchOutcome};
use crate::mixture::{AtomMap, Element, Mixture};
use crate::rule::{apply, rule_hash, rule_monomorphisms, rules_isomorphic, Rule};
use crate::smiles::parse_smiles;

/// An overall reaction: educts, products, and free-form metadata tags.
#[derive(Debug, Clone)]
pub struct Reaction {
    pub id: String,
    pub educts: Mixture,
    pub products: Mixture,
    pub metadata: BTreeMap<String, String>,
}

impl Reaction {
    pub fn new(id: impl Into<String>, educts: Mixture, products: Mixture) -> Reaction {
        Reaction {
            id: id.into(),
            educts,
            products,
            metadata: BTreeMap::new(),
        }
    }

    /// Mass/charge imbalance between the two sides, if any. Curated
    /// databases contain abstractions, so an imbalance is reported rather
    /// than rejected.
    pub fn balance_warning(&self) -> Option<String> {
        let count = |g: &Mixture| {
            let mut elements: BTreeMap<Element, usize> = BTreeMap::new();
            let mut charge: i32 = 0;
            for (_, label) in g.atoms() {
                *elements.entry(label.element).or_insert(0) += 1;
                charge += label.charge.value() as i32;
            }
            (elements, charge)
        };
        let (ee, ec) = count(&self.educts);
        let (pe, pc) = count(&self.products);
        if ee == pe && ec == pc {
            return None;
        }
        let mut notes = Vec::new();
        if ee != pe {
            notes.push("element multisets differ".to_string());
        }
        if ec != pc {
            notes.push(format!("total charge {ec} vs {pc}"));
        }
        Some(format!("reaction {}: {}", self.id, notes.join("; ")))
    }
}

/// All matches of `rule` in the reaction's educts whose application result
/// is isomorphic to the reaction's products.
pub fn match_reaction(rule: &Rule, reaction: &Reaction) -> Vec<AtomMap> {
    match match_reaction_bounded(rule, reaction, None) {
        MatchOutcome::Complete(maps) => maps,
        MatchOutcome::TimedOut => unreachable!("no deadline configured"),
    }
}

/// [`match_reaction`] with a deadline.
pub fn match_reaction_bounded(
    rule: &Rule,
    reaction: &Reaction,
    deadline: Option<Instant>,
) -> MatchOutcome {
    let candidates = match find_monomorphisms_bounded(
        rule.left(),
        &reaction.educts,
        &rule.forbidden_left_pairs(),
        &[],
        deadline,
    ) {
        MatchOutcome::TimedOut => return MatchOutcome::TimedOut,
        MatchOutcome::Complete(maps) => maps,
    };
    let mut witnesses = Vec::new();
    for candidate in candidates {
        if let Some(deadline) = deadline {
            if Instant::now() >= deadline {
                return MatchOutcome::TimedOut;
            }
        }
        // rules that delete atoms impose the dangling condition, under
        // which apply can fail; such candidates are simply not witnesses
        let Ok(derivation) = apply(rule, &reaction.educts, &candidate) else {
            continue;
        };
        if is_isomorphic(&derivation.result, &reaction.products) {
            witnesses.push(candidate);
        }
    }
    MatchOutcome::Complete(witnesses)
}

/// True iff `fine` refines `coarse`: an embedding of the coarse rule into
/// the fine rule exists that preserves left/right labels and constraint
/// pairs and covers the fine rule's whole action. A refinement applies only
/// where the coarse rule applies and produces the same result.
pub fn is_refinement(coarse: &Rule, fine: &Rule) -> bool {
    let fine_action_atoms: BTreeSet<_> = fine
        .combined_graph()
        .atoms
        .iter()
        .filter(|a| match (a.left, a.right) {
            (Some(l), Some(r)) => l != r,
            _ => true,
        })
        .map(|a| a.id)
        .collect();
    let fine_action_bonds: BTreeSet<_> = fine
        .combined_graph()
        .bonds
        .iter()
        .filter(|b| b.left_order != b.right_order)
        .map(|b| b.pair)
        .collect();

    'mono: for embedding in rule_monomorphisms(coarse, fine) {
        let image_atoms: BTreeSet<_> = embedding.values().copied().collect();
        for atom in &fine_action_atoms {
            if !image_atoms.contains(atom) {
                continue 'mono;
            }
        }
        for pair in &fine_action_bonds {
            let covered = coarse.all_pairs().iter().any(|p| {
                let mapped = p.map(|id| embedding[&id]).unwrap();
                mapped == *pair
            });
            if !covered {
                continue 'mono;
            }
        }
        return true;
    }
    false
}

/// Keeps only the monomorphism-minimal rules: any rule that refines another
/// (non-isomorphic) rule in the set is dropped, and isomorphic duplicates
/// collapse to their first representative. Every reaction matched by a
/// dropped rule is matched by a retained one with the same products.
pub fn prune_refinements(rules: &[Rule]) -> Vec<Rule> {
    let classes = classify_rules(rules);
    let reps: Vec<usize> = classes.classes.iter().map(|c| c[0]).collect();
    let mut keep = Vec::new();
    for (ci, &rep) in reps.iter().enumerate() {
        let refined = reps.iter().enumerate().any(|(cj, &other)| {
            ci != cj && is_refinement(&rules[other], &rules[rep])
        });
        if !refined {
            keep.push(rep);
        }
    }
    keep.sort();
    keep.into_iter().map(|i| rules[i].clone()).collect()
}

/// Rule-isomorphism classes plus the refinement order between their
/// representatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleClasses {
    /// member indices per class, in first-encountered order
    pub classes: Vec<Vec<usize>>,
    /// (coarse class, fine class): the fine representative refines the coarse one
    pub refinement_edges: Vec<(usize, usize)>,
}

/// Partitions rules into isomorphism classes (hash prefilter, exact check)
/// and reports the refinement partial order between class representatives.
pub fn classify_rules(rules: &[Rule]) -> RuleClasses {
    let hashes: Vec<_> = rules.iter().map(rule_hash).collect();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        let found = classes.iter().position(|class| {
            let rep = class[0];
            hashes[rep] == hashes[i] && rules_isomorphic(&rules[rep], rule)
        });
        match found {
            Some(c) => classes[c].push(i),
            None => classes.push(vec![i]),
        }
    }
    let mut refinement_edges = Vec::new();
    for (ci, a) in classes.iter().enumerate() {
        for (cj, b) in classes.iter().enumerate() {
            if ci != cj && is_refinement(&rules[a[0]], &rules[b[0]]) {
                refinement_edges.push((ci, cj));
            }
        }
    }
    RuleClasses {
        classes,
        refinement_edges,
    }
}

// ---------------------------------------------------------------------------
// batch matching over a reaction corpus

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    Empty,
    #[error("line {line}: expected 4 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("missing header row 'id\teducts\tproducts\tlabel'")]
    BadHeader,
    #[error("line {line}: cannot load referenced file {path}: {message}")]
    FileRef {
        line: usize,
        path: String,
        message: String,
    },
}

/// One corpus row; structures may have failed to parse, which keeps the row
/// reportable without aborting the batch.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub label: String,
    pub reaction: Result<Reaction, String>,
}

/// Reads the tab-separated corpus format: header `id educts products label`,
/// one reaction per line, structures as dot-separated SMILES or `@file`
/// references to mixture documents (resolved against `base_dir`).
pub fn read_corpus(text: &str, base_dir: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CorpusError::Empty)?;
    if header.split('\t').collect::<Vec<_>>() != ["id", "educts", "products", "label"] {
        return Err(CorpusError::BadHeader);
    }
    let mut entries = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 4 {
            return Err(CorpusError::ColumnCount {
                line: idx + 1,
                found: columns.len(),
            });
        }
        let (id, educts, products, label) = (columns[0], columns[1], columns[2], columns[3]);
        let parse_side = |field: &str| -> Result<Mixture, String> {
            if let Some(path) = field.strip_prefix('@') {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| format!("cannot read {}: {e}", full.display()))?;
                crate::codec::read_mixture(&text).map_err(|e| e.to_string())
            } else {
                parse_smiles(field).map_err(|e| e.to_string())
            }
        };
        let reaction = match (parse_side(educts), parse_side(products)) {
            (Ok(e), Ok(p)) => Ok(Reaction::new(id, e, p)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
        entries.push(CorpusEntry {
            id: id.to_string(),
            label: label.to_string(),
            reaction,
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    Matched,
    NoMatch,
    ParseError,
}

impl MatchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchStatus::Matched => "matched",
            MatchStatus::NoMatch => "no_match",
            MatchStatus::ParseError => "parse_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub reaction_id: String,
    pub rule_id: String,
    pub n_matches: usize,
    pub status: MatchStatus,
    /// the pair hit its deadline; reported as no_match in the row status
    pub timed_out: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MatchReport {
    /// one row per (reaction, rule) pair, sorted by reaction id then rule id
    pub rows: Vec<ReportRow>,
    /// label histogram over matched reactions
    pub summary: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub timeout: Option<Duration>,
    pub parallel: bool,
}

impl Default for BatchOptions {
    fn default() -> BatchOptions {
        BatchOptions {
            timeout: Some(Duration::from_secs(10)),
            parallel: false,
        }
    }
}

/// Matches every rule against every corpus entry. Parse failures become
/// `parse_error` rows; deadline hits become `no_match` rows with the
/// timeout flag set. Row order and content are independent of `parallel`.
pub fn batch_match(
    rules: &[(String, Rule)],
    entries: &[CorpusEntry],
    options: &BatchOptions,
) -> MatchReport {
    let pairs: Vec<(&CorpusEntry, &(String, Rule))> = entries
        .iter()
        .flat_map(|e| rules.iter().map(move |r| (e, r)))
        .collect();
    let evaluate = |(entry, (rule_id, rule)): &(&CorpusEntry, &(String, Rule))| -> ReportRow {
        match &entry.reaction {
            Err(_) => ReportRow {
                reaction_id: entry.id.clone(),
                rule_id: rule_id.clone(),
                n_matches: 0,
                status: MatchStatus::ParseError,
                timed_out: false,
            },
            Ok(reaction) => {
                let deadline = options.timeout.map(|t| Instant::now() + t);
                match match_reaction_bounded(rule, reaction, deadline) {
                    MatchOutcome::TimedOut => ReportRow {
                        reaction_id: entry.id.clone(),
                        rule_id: rule_id.clone(),
                        n_matches: 0,
                        status: MatchStatus::NoMatch,
                        timed_out: true,
                    },
                    MatchOutcome::Complete(maps) => ReportRow {
                        reaction_id: entry.id.clone(),
                        rule_id: rule_id.clone(),
                        n_matches: maps.len(),
                        status: if maps.is_empty() {
                            MatchStatus::NoMatch
                        } else {
                            MatchStatus::Matched
                        },
                        timed_out: false,
                    },
                }
            }
        }
    };
    let mut rows: Vec<ReportRow> = if options.parallel {
        pairs.par_iter().map(evaluate).collect()
    } else {
        pairs.iter().map(evaluate).collect()
    };
    rows.sort_by(|a, b| {
        (a.reaction_id.as_str(), a.rule_id.as_str())
            .cmp(&(b.reaction_id.as_str(), b.rule_id.as_str()))
    });

    let mut summary: BTreeMap<String, usize> = BTreeMap::new();
    let matched: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.status == MatchStatus::Matched)
        .map(|r| r.reaction_id.as_str())
        .collect();
    for entry in entries {
        if matched.contains(entry.id.as_str()) {
            *summary.entry(entry.label.clone()).or_insert(0) += 1;
        }
    }
    MatchReport { rows, summary }
}

/// Renders the report as the tab-separated table
/// `reaction_id rule_id n_matches status`.
pub fn write_report_tsv(report: &MatchReport) -> String {
    let mut out = String::from("reaction_id\trule_id\tn_matches\tstatus\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            row.reaction_id,
            row.rule_id,
            row.n_matches,
            row.status.as_str()
        ));
    }
    out
}

/// Renders the label histogram plus bookkeeping as JSON.
pub fn write_summary_json(report: &MatchReport) -> String {
    #[derive(Serialize)]
    struct Summary<'a> {
        labels: &'a BTreeMap<String, usize>,
        matched_reactions: usize,
        timeouts: Vec<[&'a str; 2]>,
    }
    let matched: BTreeSet<&str> = report
        .rows
        .iter()
        .filter(|r| r.status == MatchStatus::Matched)
        .map(|r| r.reaction_id.as_str())
        .collect();
    let summary = Summary {
        labels: &report.summary,
        matched_reactions: matched.len(),
        timeouts: report
            .rows
            .iter()
            .filter(|r| r.timed_out)
            .map(|r| [r.reaction_id.as_str(), r.rule_id.as_str()])
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&summary).expect("summary serializes");
    out.push('\n');
    out
}
