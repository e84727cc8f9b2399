//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csys::builtin::{rule_fork_join_balance, rule_max_attributes, rule_single_generalization};
use csys::control::{compile_rule, ControllingAutomaton, EventClass, FiniteControl, Product};
use csys::csystem::{CSystem, Membership};
use csys::grammar::{char_tokens, compile_grammar, DerivationTrace, ProductionEvent};
use csys::report::{Checker, ReportVerdict};
use csys::xmi::{load_xmi, uml_grammar, XmiOptions};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let took = t.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn accepts(rule: &ControllingAutomaton, labels: &[&str]) -> bool {
    rule.accepts(&DerivationTrace::from_labels(labels))
        .expect("rule runs")
        .is_accepted()
}

/// All words over `letters` with length in `lens`.
fn words<'a>(letters: &[&'a str], lens: std::ops::RangeInclusive<usize>) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<&str>> = vec![Vec::new()];
    for len in 0..=*lens.end() {
        if lens.contains(&len) {
            out.extend(layer.iter().cloned());
        }
        layer = layer
            .iter()
            .flat_map(|w| {
                letters.iter().map(move |l| {
                    let mut w = w.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out
}

fn ab_grammar() -> CSystem {
    let g = compile_grammar("p1: S → a S\np2: S → b S\np3: S → ε\n").unwrap();
    // (p1|p3)* p2 (p2|p3)*
    let c = compile_rule(
        "rule \"b-run\"\nevents\n p1 = p1\n p2 = p2\n p3 = p3\ngrammar\n\
         S → p1 S | p3 S | p2 B\nB → p2 B | p3 B | ε\n",
    )
    .unwrap();
    CSystem::new(g, vec![c]).unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let sys = ab_grammar();
    let aab = sys
        .membership(&char_tokens("aab"))
        .map_err(|e| e.to_string())?;
    let abab = sys
        .membership(&char_tokens("abab"))
        .map_err(|e| e.to_string())?;
    ensure(aab.is_member(), || format!("aab: {aab:?}"))?;
    ensure(
        matches!(abab, Membership::RejectedByControls { .. }),
        || format!("abab: {abab:?}"),
    )?;
    let took = within(t, Duration::from_secs(1))?;
    Ok(format!("aab accepted, abab rejected ({took:?})"))
}

/// a*b⁺, by hand.
fn a_star_b_plus(w: &str) -> bool {
    let rest = w.trim_start_matches('a');
    !rest.is_empty() && rest.chars().all(|c| c == 'b')
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let sys = ab_grammar();
    let all = words(&["a", "b"], 1..=8);
    ensure(all.len() == 510, || format!("{} words", all.len()))?;
    let mut mismatches = Vec::new();
    for w in &all {
        let w = w.concat();
        let got = sys
            .membership(&char_tokens(&w))
            .map_err(|e| e.to_string())?
            .is_member();
        if got != a_star_b_plus(&w) {
            mismatches.push(w);
        }
    }
    ensure(mismatches.is_empty(), || {
        format!("mismatches: {mismatches:?}")
    })?;
    let took = within(t, Duration::from_secs(5))?;
    Ok(format!("510 words, 0 mismatches ({took:?})"))
}

fn structured_report(file: &Path, rules: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_csys"));
    cmd.arg("check").arg(file);
    for r in rules {
        cmd.args(["--rule", r]);
    }
    let out = cmd
        .args(["--format", "structured", "--no-timing"])
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn criterion_3() -> Outcome {
    let path = fixture("office_class_diagram.xmi");
    let src = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let report = Checker::new(
        vec![rule_single_generalization(), rule_max_attributes(30)],
        XmiOptions::default(),
    )
    .map_err(|e| e.to_string())?
    .check_source("class-diagram", &src);
    ensure(report.verdict == ReportVerdict::Fail, || {
        format!("{report:?}")
    })?;
    let r1: Vec<_> = report
        .violations
        .iter()
        .filter(|v| v.rule_id == "R1-single-generalization")
        .collect();
    ensure(r1.len() == 1, || format!("R1 violations: {r1:?}"))?;
    ensure(r1[0].element_name.as_deref() == Some("FaxMachine"), || {
        format!("{:?}", r1[0])
    })?;
    ensure(
        report
            .violations
            .iter()
            .all(|v| !matches!(v.element_name.as_deref(), Some("Scanner" | "Printer"))),
        || "Scanner/Printer flagged".into(),
    )?;
    let r2 = report
        .violations
        .iter()
        .filter(|v| v.rule_id == "R2-max-attributes")
        .count();
    ensure(r2 == 0, || format!("{r2} R2 violations"))?;

    let rules = ["R1-single-generalization", "R2-max-attributes"];
    let (code_a, a) = structured_report(&path, &rules)?;
    let (code_b, b) = structured_report(&path, &rules)?;
    ensure(code_a == 1 && code_b == 1, || {
        format!("exit codes {code_a}, {code_b}")
    })?;
    ensure(!a.is_empty() && a == b, || {
        "structured reports differ between runs".into()
    })?;
    Ok(format!(
        "1 R1 violation at FaxMachine, 0 R2; {} identical report bytes",
        a.len()
    ))
}

fn criterion_4() -> Outcome {
    let src =
        std::fs::read_to_string(fixture("fork_join_activity.xmi")).map_err(|e| e.to_string())?;
    let report = Checker::new(vec![rule_fork_join_balance()], XmiOptions::default())
        .map_err(|e| e.to_string())?
        .check_source("activity", &src);
    ensure(report.violations.len() == 1, || report.to_text())?;
    let v = &report.violations[0];
    let doc = load_xmi(&src, &XmiOptions::default()).map_err(|e| e.to_string())?;
    let anchored = doc
        .root
        .find_by_id(v.element_id.as_deref().unwrap_or_default())
        .and_then(|e| e.type_name());
    ensure(anchored == Some("JoinNode"), || {
        format!("anchored at {anchored:?}")
    })?;
    // The dead event is the join's second incoming edge.
    let dead = &doc.trace().events[v.event_index];
    ensure(dead.to_string() == "2k(incoming)", || {
        format!("dead at {dead}")
    })?;
    Ok(format!(
        "1 violation at the JoinNode, event {} ({dead})",
        v.event_index
    ))
}

/// Class-segment oracles over class letters.
fn single_generalization_oracle(w: &[&str]) -> bool {
    let mut gens: Option<usize> = None;
    for l in w {
        match *l {
            "c" => gens = Some(0),
            "g" => {
                if let Some(n) = gens.as_mut() {
                    *n += 1;
                    if *n >= 2 {
                        return false;
                    }
                }
            }
            _ => {}
        }
    }
    true
}

fn max_attributes_oracle(w: &[&str], n: usize) -> bool {
    let mut attrs: Option<usize> = None;
    for l in w {
        match *l {
            "c" => attrs = Some(0),
            "pe" => attrs = None,
            "pr" => {
                if let Some(k) = attrs.as_mut() {
                    *k += 1;
                    if *k > n {
                        return false;
                    }
                }
            }
            _ => {}
        }
    }
    true
}

fn to_labels<'a>(w: &[&str], map: &[(&str, &'a str)]) -> Vec<&'a str> {
    w.iter()
        .map(|l| {
            map.iter()
                .find(|(k, _)| k == l)
                .map(|(_, v)| *v)
                .expect("mapped")
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut checked = 0;

    let r1 = rule_single_generalization();
    let map1 = [("c", "2k(Class)"), ("g", "2k(Generalization)"), ("D", "2e")];
    for w in words(&["c", "g", "D"], 0..=7) {
        checked += 1;
        let got = accepts(&r1, &to_labels(&w, &map1));
        ensure(got == single_generalization_oracle(&w), || {
            format!("R1 on {w:?}: {got}")
        })?;
    }

    let r2 = rule_max_attributes(2);
    let map2 = [
        ("c", "2k(Class)"),
        ("pr", "2k(Property)"),
        ("pe", "2k(packagedElement)"),
        ("D", "2i"),
    ];
    for w in words(&["c", "pr", "pe", "D"], 0..=7) {
        checked += 1;
        let got = accepts(&r2, &to_labels(&w, &map2));
        ensure(got == max_attributes_oracle(&w, 2), || {
            format!("R2 on {w:?}: {got}")
        })?;
    }

    // Fork with `a` incoming and `b` outgoing edges, an optional decision
    // node, then a join with `c` incoming and `d` outgoing edges.
    let r3 = rule_fork_join_balance();
    let node = |out: &mut Vec<&str>, ty: Option<&'static str>, i: usize, o: usize| {
        out.extend(["2k(node)", "2d_1"]);
        if let Some(ty) = ty {
            out.push(ty);
        }
        for _ in 0..i {
            out.extend(["2k(incoming)", "2l_1"]);
        }
        for _ in 0..o {
            out.extend(["2k(outgoing)", "2l_1"]);
        }
        out.push("2k(node)");
    };
    for a in 0..=4 {
        for b in 0..=4 {
            for c in 0..=4 {
                for d in 0..=4 {
                    for middle in [false, true] {
                        let mut trace = vec!["2a_2", "2k(packagedElement)"];
                        node(&mut trace, Some("2k(ForkNode)"), a, b);
                        if middle {
                            node(&mut trace, Some("2k(DecisionNode)"), 1, 2);
                        }
                        node(&mut trace, Some("2k(JoinNode)"), c, d);
                        trace.push("2k(packagedElement)");
                        checked += 1;
                        let got = accepts(&r3, &trace);
                        ensure(got == (b == c), || {
                            format!("R3 on a={a} b={b} c={c} d={d}: {got}")
                        })?;
                    }
                }
            }
        }
    }
    let took = within(t, Duration::from_secs(30))?;
    Ok(format!("{checked} traces, 0 mismatches ({took:?})"))
}

fn random_control(rng: &mut ChaCha8Rng, alphabet: Vec<EventClass>) -> FiniteControl {
    let n = rng.gen_range(1..=5);
    let delta = (0..n)
        .map(|_| {
            (0..alphabet.len())
                .map(|_| rng.gen_bool(0.8).then(|| rng.gen_range(0..n)))
                .collect()
        })
        .collect();
    let accepting = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let names = (0..n).map(|i| format!("q{i}")).collect();
    FiniteControl::new(alphabet, names, delta, 0, accepting)
}

fn run_events(f: &FiniteControl, events: &[ProductionEvent]) -> bool {
    let mut run = f.start_run();
    for e in events {
        run.step(e).expect("classified");
    }
    run.finish().is_accepted()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let labels = ["p", "q", "r"];
    let events: Vec<Vec<ProductionEvent>> = words(&labels, 0..=6)
        .into_iter()
        .map(|w| w.into_iter().map(ProductionEvent::new).collect())
        .collect();
    let mut compared = 0usize;
    for pair in 0..100 {
        // Half the pairs share an alphabet; the rest need refinement.
        let a_classes = vec![
            EventClass::exact("x", "p"),
            EventClass::exact("y", "q"),
            EventClass::exact("z", "r"),
        ];
        let b_classes = if pair % 2 == 0 {
            a_classes.clone()
        } else {
            let u = EventClass::exact("u", "q");
            let rest = EventClass::other("w", [&u]);
            vec![u, rest]
        };
        let a = random_control(&mut rng, a_classes);
        let b = random_control(&mut rng, b_classes);
        let product = Product::new(&[&a, &b]);
        for w in &events {
            compared += 1;
            let both = run_events(&a, w) && run_events(&b, w);
            let joint = run_events(&product.control, w);
            ensure(joint == both, || {
                let labels: Vec<_> = w.iter().map(|e| e.label.as_str()).collect();
                format!("pair {pair} on {labels:?}: product {joint}, conjunction {both}")
            })?;
        }
    }
    Ok(format!("100 pairs, {compared} comparisons, 0 mismatches"))
}

fn criterion_7() -> Outcome {
    let rules = || {
        vec![
            rule_single_generalization(),
            rule_max_attributes(30),
            rule_fork_join_balance(),
        ]
    };
    let mut violations = 0;
    for name in ["office_class_diagram.xmi", "fork_join_activity.xmi"] {
        let src = std::fs::read_to_string(fixture(name)).map_err(|e| e.to_string())?;
        let doc = load_xmi(&src, &XmiOptions::default()).map_err(|e| e.to_string())?;
        let g = uml_grammar()
            .with_start(doc.start)
            .map_err(|e| e.to_string())?;
        let expected: Vec<_> = doc.tokens.iter().map(|t| t.symbol.clone()).collect();
        for (i, trace) in doc.traces.iter().enumerate() {
            let derived = trace
                .replay(&g)
                .map_err(|e| format!("{name} trace {i}: {e}"))?;
            ensure(derived == expected, || {
                format!("{name} trace {i} does not reproduce the tokens")
            })?;
        }
        let report = Checker::new(rules(), XmiOptions::default())
            .map_err(|e| e.to_string())?
            .check_source(name, &src);
        ensure(!report.violations.is_empty(), || {
            format!("{name}: no violations to anchor")
        })?;
        for v in &report.violations {
            violations += 1;
            let id = v
                .element_id
                .as_deref()
                .ok_or_else(|| format!("{name}: unanchored {v:?}"))?;
            ensure(doc.root.find_by_id(id).is_some(), || {
                format!("{name}: `{id}` not in tree")
            })?;
            let trace = doc.trace();
            let event_span = trace.events[v.event_index.min(trace.len() - 1)].span;
            ensure(
                event_span.is_some_and(|s| v.byte_span.contains(&s))
                    && v.byte_span.end <= src.len(),
                || format!("{name}: span {:?} does not cover the event", v.byte_span),
            )?;
        }
    }
    Ok(format!(
        "both fixtures round-trip; {violations} violations anchored"
    ))
}

fn criterion_8() -> Outcome {
    let ex1 = ab_grammar().classify();
    let xmi = CSystem::new(uml_grammar().clone(), vec![rule_fork_join_balance()])
        .map_err(|e| e.to_string())?
        .classify();
    ensure(ex1 == "C_R^R" && xmi == "C_CF^CF", || {
        format!("got {ex1} and {xmi}")
    })?;
    Ok(format!("{ex1}, {xmi}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("a-then-b system words", criterion_1),
        ("global language equals a*b+", criterion_2),
        (
            "class diagram: single generalization, attribute limit",
            criterion_3,
        ),
        ("activity diagram: fork/join balance", criterion_4),
        ("rule characterizations by brute force", criterion_5),
        ("product intersection soundness", criterion_6),
        ("round trip and anchoring", criterion_7),
        ("family classification", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
