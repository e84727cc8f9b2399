use std::fmt::Write as _;

use proptest::prelude::*;

use csys::builtin::{rule_fork_join_balance, rule_max_attributes, rule_single_generalization};
use csys::control::{EventClass, FiniteControl, Product};
use csys::grammar::ProductionEvent;
use csys::report::{Checker, ReportVerdict};
use csys::xmi::{
    build_tree, load_xmi, normalize_activity_order, tokenize_xmi, uml_grammar, XmiOptions,
};

/// A package of classes; `classes[k] = (generalizations, attributes)`.
fn class_model(classes: &[(usize, usize)]) -> String {
    let mut s = String::from("<uml:Package xmi:id=\"root\" name=\"Root\">\n");
    for (k, &(gens, attrs)) in classes.iter().enumerate() {
        let _ = writeln!(
            s,
            "  <packagedElement xmi:type=\"uml:Class\" xmi:id=\"c{k}\" name=\"C{k}\">"
        );
        for a in 0..attrs {
            let _ = writeln!(
                s,
                "    <ownedAttribute xmi:type=\"uml:Property\" xmi:id=\"c{k}a{a}\" name=\"a{a}\" type=\"c0\"/>"
            );
        }
        for g in 0..gens {
            let _ = writeln!(
                s,
                "    <generalization xmi:type=\"uml:Generalization\" xmi:id=\"c{k}g{g}\" general=\"c0\"/>"
            );
        }
        s.push_str("  </packagedElement>\n");
    }
    s.push_str("</uml:Package>\n");
    s
}

/// A fork with `outs` outgoing edges and its join with `ins` incoming ones.
fn activity(outs: usize, ins: usize, join_first: bool) -> String {
    let fork = {
        let mut f = String::from("  <node xmi:type=\"uml:ForkNode\" xmi:id=\"f\" name=\"Fork\">\n");
        for k in 0..outs {
            let _ = writeln!(f, "    <outgoing xmi:idref=\"e{k}\"/>");
        }
        f.push_str("    <incoming xmi:idref=\"start\"/>\n  </node>\n");
        f
    };
    let join = {
        let mut j = String::from("  <node xmi:type=\"uml:JoinNode\" xmi:id=\"j\" name=\"Join\">\n");
        for k in 0..ins {
            let _ = writeln!(j, "    <incoming xmi:idref=\"e{k}\"/>");
        }
        j.push_str("  </node>\n");
        j
    };
    let mut s =
        String::from("<packagedElement xmi:type=\"uml:Activity\" xmi:id=\"act\" name=\"A\">\n");
    if join_first {
        s.push_str(&join);
        s.push_str(&fork);
    } else {
        s.push_str(&fork);
        s.push_str(&join);
    }
    s.push_str("  <node xmi:type=\"uml:InitialNode\" xmi:id=\"start\"/>\n");
    for k in 0..outs.max(ins) {
        let _ = writeln!(s, "  <edge xmi:type=\"uml:ControlFlow\" xmi:id=\"e{k}\"/>");
    }
    s.push_str("</packagedElement>\n");
    s
}

fn random_control(seed: &[(bool, u8)], n: usize, alphabet: &[EventClass]) -> FiniteControl {
    let mut it = seed.iter().cycle();
    let delta = (0..n)
        .map(|_| {
            alphabet
                .iter()
                .map(|_| {
                    let &(live, to) = it.next().unwrap();
                    live.then_some(to as usize % n)
                })
                .collect()
        })
        .collect();
    let accepting = (0..n).map(|_| it.next().unwrap().0).collect();
    FiniteControl::new(
        alphabet.to_vec(),
        (0..n).map(|i| format!("q{i}")).collect(),
        delta,
        0,
        accepting,
    )
}

fn accepts(f: &FiniteControl, w: &[ProductionEvent]) -> bool {
    let mut run = f.start_run();
    for e in w {
        run.step(e).unwrap();
    }
    run.finish().is_accepted()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn class_models_match_their_counts(
        classes in prop::collection::vec((0usize..4, 0usize..5), 1..6),
        limit in 1usize..4,
    ) {
        let src = class_model(&classes);
        let checker = Checker::new(
            vec![rule_single_generalization(), rule_max_attributes(limit)],
            XmiOptions::default(),
        ).unwrap();
        let report = checker.check_source("m", &src);
        prop_assert_ne!(report.verdict, ReportVerdict::Error, "{}", report.to_text());

        let r1: Vec<_> = report.violations.iter().filter(|v| v.rule_id.starts_with("R1")).collect();
        let first_multi = classes.iter().position(|&(g, _)| g >= 2);
        prop_assert_eq!(r1.len(), usize::from(first_multi.is_some()));
        if let Some(k) = first_multi {
            prop_assert_eq!(r1[0].element_name.clone(), Some(format!("C{k}")));
        }

        let r2: Vec<_> = report.violations.iter().filter(|v| v.rule_id.starts_with("R2")).collect();
        let first_big = classes.iter().position(|&(_, a)| a > limit);
        prop_assert_eq!(r2.len(), usize::from(first_big.is_some()));
        if let Some(k) = first_big {
            // Anchored at the first attribute over the limit.
            prop_assert_eq!(r2[0].element_id.clone(), Some(format!("c{k}a{limit}")));
        }
    }

    #[test]
    fn traces_replay_to_the_tokens(classes in prop::collection::vec((0usize..3, 0usize..3), 0..4)) {
        let src = class_model(&classes);
        let doc = load_xmi(&src, &XmiOptions::default()).unwrap();
        let g = uml_grammar().with_start(doc.start).unwrap();
        let tokens: Vec<_> = doc.tokens.iter().map(|t| t.symbol.clone()).collect();
        prop_assert_eq!(doc.trace().replay(&g).unwrap(), tokens);
    }

    #[test]
    fn fork_join_balance_in_documents(outs in 0usize..5, ins in 0usize..5, join_first: bool) {
        let src = activity(outs, ins, join_first);
        let report = Checker::new(vec![rule_fork_join_balance()], XmiOptions::default())
            .unwrap()
            .check_source("a", &src);
        prop_assert_eq!(report.verdict == ReportVerdict::Pass, outs == ins, "{}", report.to_text());
        if outs != ins {
            prop_assert_eq!(report.violations.len(), 1);
        }
    }

    #[test]
    fn normalization_is_idempotent(outs in 0usize..4, ins in 0usize..4, join_first: bool) {
        let src = activity(outs, ins, join_first);
        let tree = build_tree(&src, &tokenize_xmi(&src).unwrap()).unwrap();
        let (once, _) = normalize_activity_order(&tree);
        let (twice, notes) = normalize_activity_order(&once);
        prop_assert!(notes.is_empty());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn three_way_product_is_the_conjunction(
        seed in prop::collection::vec((any::<bool>(), any::<u8>()), 8..40),
        sizes in (1usize..5, 1usize..5, 1usize..5),
        words in prop::collection::vec(prop::collection::vec(0usize..3, 0..7), 1..30),
    ) {
        let labels = ["p", "q", "r"];
        let full: Vec<_> = ["x", "y", "z"].iter().zip(labels).map(|(n, l)| EventClass::exact(*n, l)).collect();
        let p_only = EventClass::exact("p", "p");
        let coarse = vec![p_only.clone(), EventClass::other("rest", [&p_only])];
        let r_only = EventClass::exact("r", "r");
        let other = vec![EventClass::other("notr", [&r_only]), r_only];
        let a = random_control(&seed, sizes.0, &full);
        let b = random_control(&seed[3..], sizes.1, &coarse);
        let c = random_control(&seed[5..], sizes.2, &other);
        let product = Product::new(&[&a, &b, &c]);
        for w in &words {
            let events: Vec<_> = w.iter().map(|&i| ProductionEvent::new(labels[i])).collect();
            let expected = accepts(&a, &events) && accepts(&b, &events) && accepts(&c, &events);
            prop_assert_eq!(accepts(&product.control, &events), expected);
        }
    }
}

#[test]
fn large_documents_parse() {
    let classes: Vec<_> = (0..400).map(|k| (k % 2, 3)).collect();
    let src = class_model(&classes);
    let report = Checker::new(vec![rule_max_attributes(30)], XmiOptions::default())
        .unwrap()
        .check_source("big", &src);
    assert_eq!(report.verdict, ReportVerdict::Pass, "{}", report.to_text());
    assert!(report.stats.events > 10_000);
}
