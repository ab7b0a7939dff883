use std::time::Duration;

use monas::codec::canonical_key;
use monas::eval::protocol::{check_conformance, EvalResponse, ProtocolError};
use monas::eval::{
    write_table, EvalError, Evaluator, Memoized, PlantedEvaluator, ProcessEvaluator, TableEvaluator,
};
use monas::search::{samos, AnnealingSchedule};
use monas::space::{enumerate_valid, random_valid, SearchSpaceConfig};

const HANDSHAKE: &str = r#"printf '{"protocol":"monas-eval/1"}\n'"#;

fn stub(body: &str) -> String {
    format!("{HANDSHAKE}\nwhile IFS= read -r line; do\n  id=$(printf '%s' \"$line\" | sed -E 's/^\\{{\"id\":([0-9]+).*/\\1/')\n  {body}\ndone")
}

fn cfg32() -> SearchSpaceConfig {
    SearchSpaceConfig::with_default_ops(3, 2).unwrap()
}

#[test]
fn planted_minimum_is_unique_and_at_target() {
    let c = cfg32();
    for hidden in 0..10 {
        let e = PlantedEvaluator::new(&c, hidden);
        let target_key = canonical_key(e.target()).unwrap();
        let mut zeros = std::collections::HashSet::new();
        for a in enumerate_valid(&c, 10_000).unwrap() {
            let p = e.penalty(&a).unwrap();
            assert!((0.0..=1.0).contains(&p));
            if p == 0.0 {
                zeros.insert(canonical_key(&a).unwrap());
            }
        }
        assert_eq!(zeros.len(), 1);
        assert!(zeros.contains(&target_key));
    }
}

#[test]
fn table_dump_agrees_with_planted() {
    let c = cfg32();
    let mut planted = PlantedEvaluator::new(&c, 8);
    let valid: Vec<_> = enumerate_valid(&c, 10_000).unwrap().collect();
    let mut dump = Vec::new();
    let entries = write_table(&mut dump, &mut planted, &valid).unwrap();
    assert!(entries < valid.len());
    let table = TableEvaluator::from_reader(dump.as_slice()).unwrap();
    assert_eq!(table.len(), entries);
    for a in &valid {
        assert_eq!(
            table.lookup(a).unwrap().to_bits(),
            planted.penalty(a).unwrap().to_bits()
        );
    }
}

#[test]
fn table_file_backs_a_search() {
    let c = cfg32();
    let mut planted = PlantedEvaluator::new(&c, 3);
    let valid: Vec<_> = enumerate_valid(&c, 10_000).unwrap().collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("penalties.tsv");
    let mut file = std::fs::File::create(&path).unwrap();
    write_table(&mut file, &mut planted, &valid).unwrap();
    drop(file);
    let mut table = TableEvaluator::open(&path).unwrap();
    let r = samos(&c, &mut table, &AnnealingSchedule::default(), 4, None).unwrap();
    assert_eq!(r.best_penalty, 0.0);
}

#[test]
fn evaluators_are_deterministic_within_a_run() {
    let c = SearchSpaceConfig::with_default_ops(5, 3).unwrap();
    let mut planted = PlantedEvaluator::new(&c, 1);
    let mut memo = Memoized::new(PlantedEvaluator::new(&c, 1));
    for seed in 0..200 {
        let a = random_valid(&c, seed);
        let p = planted.evaluate(&a).unwrap();
        assert_eq!(planted.evaluate(&a).unwrap(), p);
        assert_eq!(memo.evaluate(&a).unwrap(), p);
        assert_eq!(memo.evaluate(&a).unwrap(), p);
    }
}

#[test]
fn echo_stub_returns_fixed_penalty() {
    let command = stub(r#"printf '{"id":%s,"penalty":0.5}\n' "$id""#);
    let mut e = ProcessEvaluator::spawn(&command, Duration::from_secs(10)).unwrap();
    let c = SearchSpaceConfig::with_default_ops(4, 2).unwrap();
    for seed in 0..20 {
        assert_eq!(e.evaluate(&random_valid(&c, seed)).unwrap(), 0.5);
    }
    assert!(!check_conformance(&command, Duration::from_secs(10), &c).passed());
}

#[test]
fn conformance_report_flags_missing_error_response() {
    // The echo stub scores everything, including unknown operations.
    let command = stub(r#"printf '{"id":%s,"penalty":0.5}\n' "$id""#);
    let report = check_conformance(&command, Duration::from_secs(10), &cfg32());
    let failed: Vec<_> = report
        .checks
        .iter()
        .filter(|c| c.outcome.is_err())
        .map(|c| c.name)
        .collect();
    assert_eq!(failed, vec!["error propagation"]);
}

#[test]
fn wrong_id_is_a_protocol_error() {
    let command = stub(r#"printf '{"id":99,"penalty":0.5}\n'"#);
    let mut e = ProcessEvaluator::spawn(&command, Duration::from_secs(10)).unwrap();
    let err = e.evaluate(&random_valid(&cfg32(), 0)).unwrap_err();
    assert!(err.to_string().contains("id mismatch"), "{err}");
    // the client refuses further use once the stream is out of sync
    assert!(matches!(
        e.evaluate(&random_valid(&cfg32(), 1)),
        Err(EvalError::Protocol(ProtocolError::Poisoned))
    ));
}

#[test]
fn malformed_response_is_reported() {
    let command = stub(r#"printf 'penalty=0.5\n'"#);
    let mut e = ProcessEvaluator::spawn(&command, Duration::from_secs(10)).unwrap();
    assert!(matches!(
        e.evaluate(&random_valid(&cfg32(), 0)),
        Err(EvalError::Protocol(ProtocolError::Malformed { .. }))
    ));
}

#[test]
fn negative_penalty_is_rejected() {
    let command = stub(r#"printf '{"id":%s,"penalty":-1}\n' "$id""#);
    let mut e = ProcessEvaluator::spawn(&command, Duration::from_secs(10)).unwrap();
    assert!(matches!(
        e.evaluate(&random_valid(&cfg32(), 0)),
        Err(EvalError::Protocol(ProtocolError::Malformed { .. }))
    ));
}

#[test]
fn process_exit_is_detected() {
    let command = format!("{HANDSHAKE}; read -r line; exit 3");
    let mut e = ProcessEvaluator::spawn(&command, Duration::from_secs(10)).unwrap();
    match e.evaluate(&random_valid(&cfg32(), 0)) {
        Err(EvalError::Protocol(ProtocolError::ProcessExited { status })) => {
            assert!(status.contains('3'), "{status}")
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_program_fails_handshake() {
    let err = ProcessEvaluator::spawn("exit 0", Duration::from_secs(5)).unwrap_err();
    assert!(
        matches!(err, ProtocolError::ProcessExited { .. }),
        "{err:?}"
    );
}

#[test]
fn error_responses_keep_the_process_alive() {
    let command = stub(
        r#"case "$line" in *\"op\":\"identity\"*) printf '{"id":%s,"error":"identity unsupported"}\n' "$id" ;; *) printf '{"id":%s,"penalty":1.25}\n' "$id" ;; esac"#,
    );
    let mut e = ProcessEvaluator::spawn(&command, Duration::from_secs(10)).unwrap();
    let c = cfg32();
    let only_hpm =
        monas::ChildArchitecture::fully_connected(std::sync::Arc::new(c.clone()), 0).unwrap();
    let only_identity =
        monas::ChildArchitecture::fully_connected(std::sync::Arc::new(c.clone()), 1).unwrap();
    match e.request(&only_identity).unwrap() {
        EvalResponse::Error { id: 0, error } => assert_eq!(error, "identity unsupported"),
        other => panic!("{other:?}"),
    }
    assert_eq!(e.evaluate(&only_hpm).unwrap(), 1.25);
    assert!(matches!(
        e.evaluate(&only_identity),
        Err(EvalError::Remote { id: 2, .. })
    ));
}
