//! ExternalEvaluator against small shell scripts standing in for simulators.
#![cfg(unix)]

use std::time::{Duration, Instant};

use trustfd::adapter::ExternalEvaluator;
use trustfd::trustloop::optimize;
use trustfd::{Bounds, DesignVector, Error, EvalError, Evaluator, FrequencySweep, TrustConfig};

fn sweep() -> FrequencySweep {
    FrequencySweep::new(vec![5.0, 5.5], 5.0, 6.0).unwrap()
}

fn script(body: &str) -> ExternalEvaluator {
    ExternalEvaluator::spawn("sh", &["-c", body], 2, sweep()).unwrap()
}

fn x() -> DesignVector {
    DesignVector::new(vec![1.0, 2.0]).unwrap()
}

#[test]
fn answers_with_matching_ids() {
    // Echoes the request id back with a fixed two-sample response.
    let ev = script(
        r#"while read -r line; do
             id=$(printf '%s' "$line" | sed 's/^{"id":\([0-9]*\).*/\1/')
             printf '{"id":%s,"r_db":[-3.5,-4.25]}\n' "$id"
           done"#,
    );
    for _ in 0..3 {
        assert_eq!(ev.evaluate(&x()).unwrap().as_slice(), &[-3.5, -4.25]);
    }
    assert!(!ev.supports_concurrency());
}

#[test]
fn wrong_id_is_reported() {
    let ev = script(r#"read -r line; echo '{"id":99,"r_db":[1,2]}'; sleep 1"#);
    assert_eq!(
        ev.evaluate(&x()),
        Err(EvalError::IdMismatch {
            expected: 1,
            actual: 99
        })
    );
}

#[test]
fn wrong_length_is_reported() {
    let ev = script(r#"read -r line; echo '{"id":1,"r_db":[1,2,3]}'; sleep 1"#);
    assert_eq!(
        ev.evaluate(&x()),
        Err(EvalError::LengthMismatch {
            expected: 2,
            actual: 3
        })
    );
}

#[test]
fn nan_is_reported() {
    let ev = script(r#"read -r line; echo '{"id":1,"r_db":[NaN,2]}'; sleep 1"#);
    assert_eq!(ev.evaluate(&x()), Err(EvalError::NonFinite { index: 0 }));
}

#[test]
fn remote_error_is_reported() {
    let ev = script(r#"read -r line; echo '{"id":1,"error":"mesh failed"}'; sleep 1"#);
    assert_eq!(
        ev.evaluate(&x()),
        Err(EvalError::Remote("mesh failed".into()))
    );
}

#[test]
fn garbage_is_malformed() {
    let ev = script(r#"read -r line; echo 'Simulation started'; sleep 1"#);
    assert!(matches!(ev.evaluate(&x()), Err(EvalError::Malformed(_))));
}

#[test]
fn exit_is_reported_and_sticky() {
    let ev = script("exit 0");
    assert_eq!(ev.evaluate(&x()), Err(EvalError::ProcessExited));
    assert_eq!(ev.evaluate(&x()), Err(EvalError::ProcessExited));
}

#[test]
fn silence_times_out() {
    let ev = script("sleep 30").with_timeout(Duration::from_millis(200));
    let t = Instant::now();
    assert_eq!(
        ev.evaluate(&x()),
        Err(EvalError::Timeout(Duration::from_millis(200)))
    );
    assert!(t.elapsed() < Duration::from_secs(5));
    // The child is not reused after a timeout.
    assert_eq!(ev.evaluate(&x()), Err(EvalError::ProcessExited));
    drop(ev);
    assert!(t.elapsed() < Duration::from_secs(5));
}

#[test]
fn missing_program_fails_to_spawn() {
    assert!(matches!(
        ExternalEvaluator::spawn::<&str>("/nonexistent/simulator", &[], 2, sweep()),
        Err(Error::Io(_))
    ));
}

#[test]
fn failing_evaluator_aborts_run_with_partial_trace() {
    // Answers the center and both probes, then dies on the first candidate.
    let ev = script(
        r#"n=0
           while read -r line; do
             n=$((n+1))
             [ "$n" -gt 3 ] && exit 1
             id=$(printf '%s' "$line" | sed 's/^{"id":\([0-9]*\).*/\1/')
             printf '{"id":%s,"r_db":[%s,%s]}\n' "$id" "$n" "$n"
           done"#,
    );
    let b = Bounds::new(vec![0.5, 0.5], vec![5.0, 5.0]).unwrap();
    let failure = optimize(&ev, &x(), &b, &TrustConfig::default()).unwrap_err();
    assert_eq!(failure.evaluations, 3);
    assert_eq!(failure.eval_log.len(), 3);
    match failure.error {
        Error::Evaluation { source, .. } => assert_eq!(source, EvalError::ProcessExited),
        other => panic!("unexpected error {other:?}"),
    }
}
