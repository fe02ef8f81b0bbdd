//! Command-line surface for the overlay-rule pipeline.
//!
//! Every subcommand is a thin adapter over `og-core`: read inputs, call one
//! library entry point, write outputs. Domain failures exit with code 1 and
//! a machine-parseable `ERROR:<code>:` line on stderr; usage errors exit
//! with code 2.

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use og_core::codec;
use og_core::enumerate::{enumerate_overlays, PartialLink};
use og_core::matcher::{batch_match, classify_rules, read_corpus, BatchOptions};
use og_core::mixture::{AtomId, AtomMap};
use og_core::overlay::{build_og, compose_rules_with_overlap, overlay_rule};
use og_core::rule::Rule;
use og_core::substrate::{assignment_from_components, condense, detect_catalysts, substrate_rule};

#[derive(Parser)]
#[command(name = "og", version, about = "Overlay rules for reaction mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a molecule into a mixture document
    Parse(ParseArgs),
    /// Build the overlay rule and overlay graph of a mechanism
    Overlay(OverlayArgs),
    /// Compose two rules over an explicit overlap
    Compose(ComposeArgs),
    /// Extract the substrate rule of a mechanism
    Substrate(SubstrateArgs),
    /// Enumerate all overlay rules consistent with a reaction sequence
    Enumerate(EnumerateArgs),
    /// Match a rule directory against a reaction corpus
    Match(MatchArgs),
    /// Group rules into isomorphism classes
    Classify(ClassifyArgs),
    /// Render an overlay graph as DOT
    Render(RenderArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// SMILES input
    #[arg(long, conflicts_with = "json")]
    smiles: Option<String>,
    /// mixture document input (validates and normalizes)
    #[arg(long)]
    json: Option<PathBuf>,
    /// output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverlayArgs {
    /// mechanism document
    #[arg(long)]
    mech: PathBuf,
    /// overlay rule output
    #[arg(long)]
    rule: PathBuf,
    /// overlay graph output
    #[arg(long)]
    og: PathBuf,
}

#[derive(Args)]
struct ComposeArgs {
    /// the two rules, first then second
    #[arg(long = "rule", action = clap::ArgAction::Append, required = true)]
    rules: Vec<PathBuf>,
    /// overlap map: JSON list of [first-rule right atom, second-rule left atom]
    #[arg(long)]
    overlap: PathBuf,
    /// composed rule output
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SubstrateArgs {
    /// mechanism document
    #[arg(long)]
    mech: PathBuf,
    /// AUTO, or comma-separated educt component indices
    #[arg(long, default_value = "AUTO")]
    catalysts: String,
    /// substrate rule output
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnumerateArgs {
    /// reaction sequence document
    #[arg(long)]
    seq: PathBuf,
    /// output directory for rule files and the summary
    #[arg(long)]
    outdir: PathBuf,
    /// extra partial links: JSON list of {step_index, product_atom, next_educt_atom}
    #[arg(long)]
    pins: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    /// directory of *.rule.json / *.srule.json files
    #[arg(long)]
    rules: PathBuf,
    /// corpus TSV (id, educts, products, label)
    #[arg(long)]
    corpus: PathBuf,
    /// report TSV output
    #[arg(long)]
    report: PathBuf,
    /// summary JSON output; defaults to the report path with .summary.json
    #[arg(long)]
    summary: Option<PathBuf>,
    /// worker threads; 1 = serial
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// per-pair timeout in seconds; 0 disables it
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
}

#[derive(Args)]
struct ClassifyArgs {
    /// directory of rule files
    #[arg(long)]
    rules: PathBuf,
    /// classification JSON output
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// overlay graph document
    #[arg(long)]
    og: PathBuf,
    /// DOT output
    #[arg(long)]
    dot: PathBuf,
    /// fold chemically inert hydrogens into their neighbors
    #[arg(long)]
    collapse_h: bool,
}

/// A domain failure: stable short code plus a human-readable message.
struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(code: &'static str, message: impl std::fmt::Display) -> Failure {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

type RunResult = Result<(), Failure>;

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> RunResult {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Failure::new("io", format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn load_rule(path: &Path) -> Result<Rule, Failure> {
    codec::read_rule(&read_file(path)?)
        .map_err(|e| Failure::new("rule", format!("{}: {e}", path.display())))
}

/// Rules from a directory, keyed by file stem, sorted by key.
fn load_rule_dir(dir: &Path) -> Result<Vec<(String, Rule)>, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::new("io", format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.ends_with(".rule.json") || n.ends_with(".srule.json"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::new(
            "rules",
            format!("no rule files in {}", dir.display()),
        ));
    }
    let mut rules = Vec::new();
    for path in paths {
        let name = path
            .file_name()
            .unwrap()
            .to_string_lossy()
            .trim_end_matches(".srule.json")
            .trim_end_matches(".rule.json")
            .to_string();
        rules.push((name, load_rule(&path)?));
    }
    Ok(rules)
}

fn cmd_parse(args: &ParseArgs) -> RunResult {
    let mixture = match (&args.smiles, &args.json) {
        (Some(text), None) => {
            og_core::smiles::parse_smiles(text).map_err(|e| Failure::new("parse", e))?
        }
        (None, Some(path)) => {
            codec::read_mixture(&read_file(path)?).map_err(|e| Failure::new("document", e))?
        }
        _ => {
            return Err(Failure::new(
                "usage",
                "exactly one of --smiles or --json is required",
            ))
        }
    };
    let text = codec::write_mixture(&mixture);
    match &args.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_overlay(args: &OverlayArgs) -> RunResult {
    let mechanism =
        codec::read_mechanism(&read_file(&args.mech)?).map_err(|e| Failure::new("mechanism", e))?;
    let (rule, _) = overlay_rule(&mechanism).map_err(|e| Failure::new("compose", e))?;
    let og = build_og(&mechanism).map_err(|e| Failure::new("compose", e))?;
    write_file(&args.rule, &codec::write_rule(&rule))?;
    write_file(&args.og, &codec::write_overlay_graph(&og))
}

fn cmd_compose(args: &ComposeArgs) -> RunResult {
    if args.rules.len() != 2 {
        return Err(Failure::new("usage", "compose needs exactly two --rule"));
    }
    let first = load_rule(&args.rules[0])?;
    let second = load_rule(&args.rules[1])?;
    let overlap_pairs: Vec<[u32; 2]> = serde_json::from_str(&read_file(&args.overlap)?)
        .map_err(|e| Failure::new("document", e))?;
    let overlap =
        AtomMap::from_pairs(overlap_pairs.iter().map(|[a, b]| (AtomId(*a), AtomId(*b))))
            .map_err(|e| Failure::new("document", e))?;
    let composed = compose_rules_with_overlap(&first, &second, &overlap)
        .map_err(|e| Failure::new("compose", e))?;
    let text = if composed.is_conservative() {
        codec::write_rule(&composed)
    } else {
        codec::write_substrate_rule(&composed)
    };
    write_file(&args.out, &text)
}

fn cmd_substrate(args: &SubstrateArgs) -> RunResult {
    let mechanism =
        codec::read_mechanism(&read_file(&args.mech)?).map_err(|e| Failure::new("mechanism", e))?;
    let (rule, od) = overlay_rule(&mechanism).map_err(|e| Failure::new("compose", e))?;
    let assignment = if args.catalysts.eq_ignore_ascii_case("auto") {
        let assignments = detect_catalysts(&od.host, &od.result);
        condense(&assignments, &od).map_err(|e| Failure::new("substrate", e))?
    } else {
        let indices: Vec<usize> = args
            .catalysts
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::new("usage", format!("--catalysts: {e}")))?;
        assignment_from_components(&od.host, &od.result, &indices)
            .map_err(|e| Failure::new("substrate", e))?
    };
    let srule =
        substrate_rule(&rule, &od, &assignment).map_err(|e| Failure::new("substrate", e))?;
    write_file(&args.out, &codec::write_substrate_rule(&srule))
}

fn cmd_enumerate(args: &EnumerateArgs) -> RunResult {
    let mut sequence = codec::read_reaction_sequence(&read_file(&args.seq)?)
        .map_err(|e| Failure::new("sequence", e))?;
    if let Some(pins_path) = &args.pins {
        let pins: Vec<codec::PartialLinkDocument> =
            serde_json::from_str(&read_file(pins_path)?)
                .map_err(|e| Failure::new("document", e))?;
        let pins: Vec<PartialLink> = pins
            .iter()
            .map(|p| PartialLink {
                step_index: p.step_index,
                product_atom: AtomId(p.product_atom),
                next_educt_atom: AtomId(p.next_educt_atom),
            })
            .collect();
        sequence = og_core::enumerate::apply_partial_map(&sequence, &pins)
            .map_err(|e| Failure::new("sequence", e))?;
    }
    let result = enumerate_overlays(&sequence).map_err(|e| Failure::new("sequence", e))?;
    for (i, rule) in result.overlay_rules.iter().enumerate() {
        let path = args.outdir.join(format!("rule_{i:03}.rule.json"));
        write_file(&path, &codec::write_rule(rule))?;
    }
    let summary = serde_json::json!({
        "distinct_mechanisms": result.counts.distinct_mechanisms,
        "distinct_overlay_rules": result.counts.distinct_overlay_rules,
        "total_linkings": result.counts.total_linkings,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write_file(&args.outdir.join("summary.json"), &text)
}

fn cmd_match(args: &MatchArgs) -> RunResult {
    let rules = load_rule_dir(&args.rules)?;
    let corpus_text = read_file(&args.corpus)?;
    let base = args
        .corpus
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let entries = read_corpus(&corpus_text, &base).map_err(|e| Failure::new("corpus", e))?;
    for entry in &entries {
        if let Ok(reaction) = &entry.reaction {
            if let Some(warning) = reaction.balance_warning() {
                eprintln!("WARN: {warning}");
            }
        }
    }
    let options = BatchOptions {
        timeout: (args.timeout > 0.0).then(|| Duration::from_secs_f64(args.timeout)),
        parallel: args.jobs > 1,
    };
    let report = if args.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| Failure::new("io", e))?;
        pool.install(|| batch_match(&rules, &entries, &options))
    } else {
        batch_match(&rules, &entries, &options)
    };
    write_file(&args.report, &og_core::matcher::write_report_tsv(&report))?;
    let summary_path = args
        .summary
        .clone()
        .unwrap_or_else(|| args.report.with_extension("summary.json"));
    write_file(&summary_path, &og_core::matcher::write_summary_json(&report))
}

fn cmd_classify(args: &ClassifyArgs) -> RunResult {
    let rules = load_rule_dir(&args.rules)?;
    let bare: Vec<Rule> = rules.iter().map(|(_, r)| r.clone()).collect();
    let classes = classify_rules(&bare);
    let doc = serde_json::json!({
        "classes": classes
            .classes
            .iter()
            .map(|members| members.iter().map(|&i| rules[i].0.clone()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "refinement_edges": classes.refinement_edges,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("classification serializes");
    text.push('\n');
    write_file(&args.out, &text)
}

fn cmd_render(args: &RenderArgs) -> RunResult {
    let og = codec::read_overlay_graph_document(&read_file(&args.og)?)
        .map_err(|e| Failure::new("document", e))?;
    write_file(&args.dot, &render::render_dot(&og, args.collapse_h))
}

fn run(cli: Cli) -> RunResult {
    match &cli.command {
        Command::Parse(args) => cmd_parse(args),
        Command::Overlay(args) => cmd_overlay(args),
        Command::Compose(args) => cmd_compose(args),
        Command::Substrate(args) => cmd_substrate(args),
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::Match(args) => cmd_match(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Render(args) => cmd_render(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("ERROR:{}:{}", failure.code, failure.message);
            ExitCode::FAILURE
        }
    }
}
