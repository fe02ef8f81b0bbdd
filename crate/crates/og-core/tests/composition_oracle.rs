//! The central correctness oracle for the composition algebra: folding
//! pairwise composition over a mechanism, in either direction, must agree
//! with the rule reconstructed directly from the per-pair bond trajectories,
//! and the overlay derivation must reproduce plain execution.

mod common;

use og_core::overlay::{
    build_og, overlay_rule, overlay_rule_rfold, rule_from_trajectories, BondClass,
};
use og_core::rule::{apply, execute, rules_isomorphic};
use og_core::{find_rule_matches, is_isomorphic};

#[test]
fn folds_agree_with_trajectories_on_random_mechanisms() {
    let mut cases = 0;
    for seed in 0..140 {
        let mut rng = common::rng(seed);
        let mechanism = common::random_mechanism(&mut rng, 12, 5);
        let (lf, od) = overlay_rule(&mechanism).unwrap();
        let (rf, _) = overlay_rule_rfold(&mechanism).unwrap();
        let tr = rule_from_trajectories(&mechanism);

        // all three constructions coincide in host coordinates
        assert_eq!(lf, rf, "fold order changed the rule (seed {seed})");
        assert_eq!(lf, tr, "fold disagrees with trajectories (seed {seed})");
        assert!(rules_isomorphic(&lf, &tr));

        // the overlay derivation reproduces the execution
        let (final_mixture, _) = execute(&mechanism);
        assert_eq!(od.result, final_mixture, "seed {seed}");
        let replayed = apply(&lf, mechanism.educts(), &od.match_map).unwrap();
        assert_eq!(replayed.result, final_mixture, "seed {seed}");
        cases += 1;
    }
    assert!(cases >= 100);
}

#[test]
fn overlay_graph_partition_is_total_and_exclusive() {
    for seed in 200..260 {
        let mut rng = common::rng(seed);
        let mechanism = common::random_mechanism(&mut rng, 10, 4);
        // build_og cross-checks the history classes against the rule shape
        let og = build_og(&mechanism).unwrap();
        let (rule, _) = overlay_rule(&mechanism).unwrap();
        // action = formed plus broken
        let action: usize = og
            .bonds
            .iter()
            .filter(|b| matches!(b.class, BondClass::Formed | BondClass::Broken))
            .count();
        let rule_action = rule
            .combined_graph()
            .bonds
            .iter()
            .filter(|b| b.left_order != b.right_order)
            .count();
        assert_eq!(action, rule_action, "seed {seed}");
        // context bonds sit identically on both sides
        for bond in &og.bonds {
            if bond.class == BondClass::Context {
                assert_eq!(bond.start_order, bond.end_order);
                assert!(rule.context_bonds().contains(&bond.pair));
            }
        }
    }
}

#[test]
fn transient_charge_leaves_no_trace_in_the_overlay_rule() {
    // an atom whose charge departs and returns must not constrain matching:
    // the overlay rule of a charge-neutral round trip matches hosts that
    // could never hold the transient charge state
    use og_core::mixture::{AtomId, AtomLabel, AtomPair, BondOrder, Element, Mixture};
    use og_core::rule::{Mechanism, StepDelta};

    let educts = Mixture::from_parts(
        [
            (AtomId(0), AtomLabel::neutral(Element::O)),
            (AtomId(1), AtomLabel::neutral(Element::H)),
            (AtomId(2), AtomLabel::neutral(Element::N)),
        ],
        [(AtomId(0), AtomId(1), BondOrder::SINGLE)],
    )
    .unwrap();
    let pair = |a: u32, b: u32| AtomPair::new(AtomId(a), AtomId(b)).unwrap();
    let take = StepDelta {
        bond_changes: vec![(pair(0, 1), 1, 0), (pair(1, 2), 0, 1)],
        charge_changes: vec![(AtomId(0), 0, -1), (AtomId(2), 0, 1)],
    };
    let give_back = StepDelta {
        bond_changes: vec![(pair(1, 2), 1, 0), (pair(0, 1), 0, 1)],
        charge_changes: vec![(AtomId(2), 1, 0), (AtomId(0), -1, 0)],
    };
    let m = Mechanism::from_deltas(educts, &[take, give_back]).unwrap();
    let (rule, _) = overlay_rule(&m).unwrap();
    // start and end labels agree everywhere
    for atom in rule.combined_graph().atoms {
        assert_eq!(atom.left, atom.right);
    }
    // a fresh host with the same topology matches, regardless of whether
    // the transient states would be chemically reachable there
    let host = og_core::smiles::parse_smiles("CO.CN").unwrap();
    let matches = find_rule_matches(&rule, &host);
    assert!(!matches.is_empty());
    for m in &matches {
        let d = apply(&rule, &host, m).unwrap();
        assert!(is_isomorphic(&d.result, &host));
    }
}

#[test]
fn pinning_never_increases_the_rule_count() {
    use og_core::enumerate::{apply_partial_map, enumerate_overlays, PartialLink};
    use og_core::mixture::AtomId;

    let sequence = og_core::codec::read_reaction_sequence(
        &std::fs::read_to_string(
            std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../../fixtures/symmetry.seq.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let unpinned = enumerate_overlays(&sequence).unwrap();
    // every valid hydrogen pin can only narrow the rule set
    for product_atom in [2u32, 3, 4] {
        for next_educt_atom in [2u32, 3, 4] {
            let pinned = apply_partial_map(
                &sequence,
                &[PartialLink {
                    step_index: 0,
                    product_atom: AtomId(product_atom),
                    next_educt_atom: AtomId(next_educt_atom),
                }],
            )
            .unwrap();
            let result = enumerate_overlays(&pinned).unwrap();
            assert!(
                result.counts.distinct_overlay_rules
                    <= unpinned.counts.distinct_overlay_rules,
                "pin {product_atom}->{next_educt_atom}"
            );
            assert!(result.counts.distinct_overlay_rules >= 1);
        }
    }
}

#[test]
fn match_witnesses_verified_by_independent_replay() {
    use og_core::matcher::{match_reaction, Reaction};

    // deprotonated-product variant of the hydrolase rule against an
    // ionized overall reaction
    let rule = og_core::codec::read_rule(
        &std::fs::read_to_string(
            std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../../fixtures/rules/ester_hydrolysis_one_transfer_deprotonated.srule.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let reaction = Reaction::new(
        "ionized",
        og_core::smiles::parse_smiles("COC(C)=O.O").unwrap(),
        og_core::smiles::parse_smiles("CO.CC([O-])=O.[H+]").unwrap(),
    );
    let witnesses = match_reaction(&rule, &reaction);
    assert!(!witnesses.is_empty());
    // re-verify each witness by replaying the application
    for witness in &witnesses {
        let derivation = apply(&rule, &reaction.educts, witness).unwrap();
        assert!(is_isomorphic(&derivation.result, &reaction.products));
    }
    // and the neutral-product reaction is NOT explained by this variant
    let neutral = Reaction::new(
        "neutral",
        og_core::smiles::parse_smiles("COC(C)=O.O").unwrap(),
        og_core::smiles::parse_smiles("CO.CC(O)=O").unwrap(),
    );
    assert!(match_reaction(&rule, &neutral).is_empty());
}

#[test]
fn derivation_composition_agrees_with_overlap_composition() {
    // run the two fixture rules as actual chained applications and compose
    // the derivations; the result must be the same rule (up to renaming) as
    // the host-free composition over the matching overlap
    use og_core::codec::read_rule;
    use og_core::mixture::{AtomId, AtomMap};
    use og_core::overlay::{compose, compose_rules_with_overlap};
    use std::path::PathBuf;

    let fixture = |name: &str| {
        std::fs::read_to_string(
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../../fixtures")
                .join(name),
        )
        .unwrap()
    };
    let hydrolase = read_rule(&fixture("rules/ester_hydrolysis_two_transfer.srule.json")).unwrap();
    let keto_enol = read_rule(&fixture("keto_enol_tautomerization.rule.json")).unwrap();

    // isopropenyl acetate plus water
    let host = og_core::smiles::parse_smiles("C=C(C)OC(C)=O.O").unwrap();
    let first_matches = find_rule_matches(&hydrolase, &host);
    assert!(!first_matches.is_empty());
    let d1 = apply(&hydrolase, &host, &first_matches[0]).unwrap();

    // the freshly created hydrogen sits on the former ester oxygen, forming
    // the enol the second rule consumes
    let created_host_id = d1.comatch.get(AtomId(5)).unwrap();
    let ester_oxygen = first_matches[0].get(AtomId(2)).unwrap();
    let second_matches = find_rule_matches(&keto_enol, &d1.result);
    let d2 = second_matches
        .iter()
        .filter(|m| {
            m.get(AtomId(2)) == Some(ester_oxygen) && m.get(AtomId(3)) == Some(created_host_id)
        })
        .map(|m| apply(&keto_enol, &d1.result, m).unwrap())
        .next()
        .expect("the enol site matches");

    let (via_derivations, composed) = compose(&d1, &d2).unwrap();
    assert_eq!(composed.result, d2.result);

    let overlap = AtomMap::from_pairs([(AtomId(2), AtomId(2)), (AtomId(5), AtomId(3))]).unwrap();
    let via_overlap = compose_rules_with_overlap(&hydrolase, &keto_enol, &overlap).unwrap();
    assert!(
        og_core::rule::rules_isomorphic(&via_derivations, &via_overlap),
        "the two composition routes disagree"
    );

    // and the composed rule explains the overall reaction in one step
    let replayed = apply(&via_derivations, &host, &composed.match_map).unwrap();
    assert!(is_isomorphic(
        &replayed.result,
        &og_core::smiles::parse_smiles("CC(C)=O.CC(O)=O").unwrap()
    ));
}
