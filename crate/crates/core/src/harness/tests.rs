use super::*;

const MINIMAL: &str = "\
seed 3
chain 1
chain 2
library 1 1.0 kind=uln
dvn d1 watch=1
executor ex
oapp a kind=plain chain=1 addr=aa
oapp b kind=plain chain=2 addr=bb
stack a remote=2 lib=1@1.0 required=d1 executor=ex
stack b remote=1 lib=1@1.0 required=d1 executor=ex
";

fn with(lines: &str) -> String {
    format!("{MINIMAL}{lines}")
}

fn syntax_line(err: ScenarioError) -> usize {
    match err {
        ScenarioError::Syntax { line, .. } => line,
        other => panic!("expected a syntax error, got {other:?}"),
    }
}

#[test]
fn minimal_two_chain_scenario() {
    let sc = parse_scenario(&with("at 1 send a to=b payload=text:x\n")).unwrap();
    assert_eq!(sc.chains.len(), 2);
    assert_eq!(sc.seed, 3);
    let paths: std::collections::BTreeSet<_> = sc
        .timeline
        .iter()
        .filter_map(|c| match &c.command {
            Command::Send { app, to, .. } => Some(path_between(app, to)),
            _ => None,
        })
        .collect();
    assert_eq!(paths.len(), 1);
    assert_eq!(sc.workers.iter().map(|w| w.id.0).collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn undeclared_worker_is_unknown_reference() {
    let err = parse_scenario(&with("at 1 fault dvn=D9 crashed\n")).unwrap_err();
    assert_eq!(err, ScenarioError::UnknownReference { line: 11, id: "D9".into() });
}

#[test]
fn duplicate_chain_is_a_syntax_error() {
    assert_eq!(syntax_line(parse_scenario("chain 1\nchain 1\n").unwrap_err()), 2);
}

#[test]
fn ticks_must_not_decrease() {
    let err = parse_scenario(&with("at 5 advance 1 1\nat 4 advance 1 1\n")).unwrap_err();
    assert_eq!(syntax_line(err), 12);
}

#[test]
fn unknown_arguments_are_rejected() {
    let err = parse_scenario(&with("at 1 send a to=b payload=text:x colour=red\n")).unwrap_err();
    assert_eq!(syntax_line(err), 11);
}

#[test]
fn comments_and_blank_lines_keep_line_numbers() {
    let err = parse_scenario("# header\n\nchain 1\nchain 0\n").unwrap_err();
    assert_eq!(syntax_line(err), 4);
}

#[test]
fn ranges_and_counts_expand() {
    let sc = parse_scenario(&with("at 1 send a to=b payload=text:x count=3\nat 2 attest d1 from=a to=b nonce=2..4\n")).unwrap();
    assert_eq!(sc.timeline.len(), 6);
    let nonces: Vec<u64> = sc
        .timeline
        .iter()
        .filter_map(|c| match c.command {
            Command::Attest { nonce, .. } => Some(nonce),
            _ => None,
        })
        .collect();
    assert_eq!(nonces, vec![2, 3, 4]);
    assert!(parse_scenario(&with("at 2 attest d1 from=a to=b nonce=4..2\n")).is_err());
}

#[test]
fn mutant_directive() {
    let sc = parse_scenario(&with("mutant skip-without-nonce-check\n")).unwrap();
    assert_eq!(sc.mutant, Mutant::SkipWithoutNonceCheck);
    assert!(parse_scenario(&with("mutant everything\n")).is_err());
}

#[test]
fn lifecycle_states_are_observable() {
    let sc = parse_scenario(&with(
        "at 1 send a to=b payload=text:x\n\
         at 1 assert state path=a->b nonce=1 is=Sent\n\
         at 1 assert state path=a->b nonce=2 is=NotSent\n\
         at 20 assert state path=a->b nonce=1 is=Received\n\
         at 20 assert trace-count PacketSent is=1\n\
         at 20 assert trace-count PayloadVerified is=1\n\
         at 20 assert trace-count PacketDelivered is=1\n",
    ))
    .unwrap();
    let report = run(&sc).unwrap();
    assert!(report.passed(), "{:?}", report.assertions);
}

#[test]
fn wrong_expectation_is_a_failed_assertion_not_an_error() {
    let sc = parse_scenario(&with("at 1 skip b from=a nonce=3 expect=Applied\n")).unwrap();
    let report = run(&sc).unwrap();
    assert_eq!(report.assertions.len(), 1);
    assert!(!report.assertions[0].passed);
    assert!(report.assertions[0].detail.contains("WrongNonce"), "{}", report.assertions[0].detail);
}

#[test]
fn same_seed_same_digest() {
    let sc = parse_scenario(&with("at 1 send a to=b payload=random:16 count=2\n")).unwrap();
    assert_eq!(run(&sc).unwrap().digest(), run(&sc).unwrap().digest());
    let other = Scenario { seed: 4, ..sc.clone() };
    assert_ne!(run(&sc).unwrap().digest(), run(&other).unwrap().digest());
}

#[test]
fn zero_iterations_is_an_empty_report() {
    let report = fuzz_channel(&FuzzConfig { iterations: 0, ..FuzzConfig::default() });
    assert_eq!(report, FuzzReport { iterations: 0, operations: 0, counterexample: None });
}
