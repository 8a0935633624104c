#![cfg(all(unix, feature = "remote"))]

use std::io::{BufRead, BufReader, Write};
use std::os::unix::net::UnixStream;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use antnas_core::engine::{search, NoObserver, RunConfig};
use antnas_core::evaluation::{EvalError, Evaluator, ReuseHint, WeightHandle};
use antnas_core::protocol::{decode, Message, ProtocolError, RemoteEvaluator, Session, SessionOptions};
use antnas_core::space::{default_space, ArchitectureDescriptor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const SHAPE: [u32; 3] = [28, 28, 1];

fn quick() -> SessionOptions {
    SessionOptions {
        handshake_timeout: Duration::from_millis(300),
        request_timeout: Duration::from_millis(500),
    }
}

/// Starts a scripted worker on one end of a socket pair. `reply` maps each
/// decoded message to the raw lines to send back. Every message received is
/// forwarded on the returned channel.
fn fake_worker(
    mut reply: impl FnMut(&Message) -> Vec<String> + Send + 'static,
) -> (Session, mpsc::Receiver<Message>) {
    let (ours, theirs) = UnixStream::pair().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut out = theirs.try_clone().unwrap();
        for line in BufReader::new(theirs).lines() {
            let Ok(line) = line else { break };
            let message = decode(&line).unwrap();
            let _ = tx.send(message.clone());
            if message == Message::Shutdown {
                break;
            }
            for r in reply(&message) {
                if out.write_all(format!("{r}\n").as_bytes()).is_err() {
                    return;
                }
            }
        }
    });
    let reader = ours.try_clone().unwrap();
    (Session::from_streams(reader, ours, quick()), rx)
}

fn ack(supports: Option<bool>) -> String {
    match supports {
        Some(s) => json!({"type": "hello_ack", "version": 1, "supports_weight_reuse": s}),
        None => json!({"type": "hello_ack", "version": 1}),
    }
    .to_string()
}

fn result(id: u64, accuracy: f64) -> String {
    json!({"type": "eval_result", "id": id, "accuracy": accuracy, "loss": 0.3, "wall_ms": 12.0})
        .to_string()
}

fn request_id(m: &Message) -> Option<u64> {
    match m {
        Message::EvalRequest { id, .. } => Some(*id),
        _ => None,
    }
}

fn sample() -> ArchitectureDescriptor {
    default_space().sample_walk(SHAPE, 2, &mut ChaCha8Rng::seed_from_u64(0))
}

/// A worker that acks and answers every request with `accuracy`.
fn answering(accuracy: f64, supports: Option<bool>) -> impl FnMut(&Message) -> Vec<String> {
    move |m| match m {
        Message::Hello { .. } => vec![ack(supports)],
        m => request_id(m).map(|id| vec![result(id, accuracy)]).unwrap_or_default(),
    }
}

#[test]
fn handshake_reports_reuse_support() {
    let (mut s, rx) = fake_worker(answering(0.5, Some(true)));
    assert_eq!(s.handshake(SHAPE), Ok(true));
    assert_eq!(rx.recv().unwrap(), Message::Hello { version: 1, input_shape: SHAPE });
    let (mut s, _) = fake_worker(answering(0.5, None));
    assert_eq!(s.handshake(SHAPE), Ok(false));
    assert!(!s.supports_weight_reuse());
}

#[test]
fn version_mismatch_is_fatal() {
    let (mut s, _) = fake_worker(|_| vec![json!({"type": "hello_ack", "version": 2}).to_string()]);
    assert_eq!(
        s.handshake(SHAPE),
        Err(ProtocolError::VersionMismatch { ours: 1, theirs: 2 })
    );
    assert!(!s.is_live());
    assert!(matches!(s.request(&sample(), 0, None), Err(EvalError::SessionDead(_))));
}

#[test]
fn silent_worker_times_out_handshake() {
    let (mut s, _) = fake_worker(|_| vec![]);
    let start = Instant::now();
    assert!(matches!(s.handshake(SHAPE), Err(ProtocolError::Timeout(_))));
    assert!(start.elapsed() >= Duration::from_millis(300));
    assert!(!s.is_live());
}

#[test]
fn accuracy_passes_through() {
    let (s, rx) = fake_worker(answering(0.93, Some(false)));
    let mut ev = RemoteEvaluator::connect(s, SHAPE).unwrap();
    let d = sample();
    let out = ev.evaluate(&d, &ReuseHint::default()).unwrap();
    assert_eq!(out.metrics.accuracy, 0.93);
    assert_eq!(out.metrics.loss, Some(0.3));
    assert_eq!(out.metrics.wall_ms, 12);
    rx.recv().unwrap();
    match rx.recv().unwrap() {
        Message::EvalRequest { descriptor, reuse_prefix_len, reuse_key, .. } => {
            assert_eq!(descriptor, d);
            assert_eq!(reuse_prefix_len, 0);
            assert_eq!(reuse_key, None);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn reuse_key_only_sent_when_supported() {
    let hint = ReuseHint {
        prefix_len: 2,
        handle: Some(WeightHandle("w1".into())),
    };
    for (supports, expected) in [(Some(true), (2, Some("w1".to_string()))), (None, (0, None))] {
        let (s, rx) = fake_worker(answering(0.5, supports));
        let mut ev = RemoteEvaluator::connect(s, SHAPE).unwrap();
        let out = ev.evaluate(&sample(), &hint).unwrap();
        assert_eq!(out.metrics.reused_prefix_len, expected.0);
        rx.recv().unwrap();
        match rx.recv().unwrap() {
            Message::EvalRequest { reuse_prefix_len, reuse_key, .. } => {
                assert_eq!((reuse_prefix_len, reuse_key), expected)
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn worker_error_is_reported() {
    let (s, _) = fake_worker(|m| match m {
        Message::Hello { .. } => vec![ack(Some(false))],
        m => request_id(m)
            .map(|id| {
                vec![json!({"type": "eval_error", "id": id, "code": "OOM", "message": "CUDA out of memory"})
                    .to_string()]
            })
            .unwrap_or_default(),
    });
    let mut ev = RemoteEvaluator::connect(s, SHAPE).unwrap();
    match ev.evaluate(&sample(), &ReuseHint::default()) {
        Err(EvalError::Reported { code, .. }) => assert_eq!(code, "OOM"),
        other => panic!("{other:?}"),
    }
    assert!(ev.session().is_live());
}

#[test]
fn out_of_range_accuracy_is_a_violation() {
    let (s, _) = fake_worker(answering(1.7, Some(false)));
    let mut ev = RemoteEvaluator::connect(s, SHAPE).unwrap();
    assert!(matches!(
        ev.evaluate(&sample(), &ReuseHint::default()),
        Err(EvalError::Protocol(_))
    ));
}

#[test]
fn duplicate_and_stale_replies_are_dropped() {
    // Answers every request twice, and the second request also gets a reply
    // for an id that was never issued before its real answer.
    let (s, _) = fake_worker(|m| match m {
        Message::Hello { .. } => vec![ack(Some(false))],
        m => match request_id(m) {
            Some(1) => vec![result(1, 0.25), result(1, 0.99)],
            Some(id) => vec![result(77, 0.99), result(id, 0.5)],
            None => vec![],
        },
    });
    let mut ev = RemoteEvaluator::connect(s, SHAPE).unwrap();
    let d = sample();
    assert_eq!(ev.evaluate(&d, &ReuseHint::default()).unwrap().metrics.accuracy, 0.25);
    assert_eq!(ev.evaluate(&d, &ReuseHint::default()).unwrap().metrics.accuracy, 0.5);
}

#[test]
fn slow_reply_times_out_request() {
    let (s, _) = fake_worker(|m| match m {
        Message::Hello { .. } => vec![ack(Some(false))],
        _ => vec![],
    });
    let mut ev = RemoteEvaluator::connect(s, SHAPE).unwrap();
    assert!(matches!(
        ev.evaluate(&sample(), &ReuseHint::default()),
        Err(EvalError::Timeout(500))
    ));
}

#[test]
fn dead_worker_fails_fast_and_search_completes() {
    let (ours, theirs) = UnixStream::pair().unwrap();
    let worker = thread::spawn(move || {
        let mut out = theirs.try_clone().unwrap();
        let mut lines = BufReader::new(theirs).lines();
        lines.next();
        out.write_all(format!("{}\n", ack(Some(true))).as_bytes()).unwrap();
        lines.next();
        out.write_all(format!("{}\n", result(1, 0.6)).as_bytes()).unwrap();
        // Hang up after the first evaluation.
    });
    let reader = ours.try_clone().unwrap();
    let session = Session::from_streams(reader, ours, quick());
    let mut ev = RemoteEvaluator::connect(session, SHAPE).unwrap();
    let config = RunConfig {
        ant_count: 3,
        max_depth: 2,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let out = search(config, &default_space(), &mut ev, &mut NoObserver).unwrap();
    worker.join().unwrap();
    assert_eq!(out.evaluations, 6);
    assert_eq!(out.best.accuracy(), Some(0.6));
    assert!(!ev.session().is_live());
    assert!(start.elapsed() < Duration::from_secs(2));
}

#[test]
fn exec_transport_speaks_ndjson() {
    let script = r#"
while IFS= read -r line; do
  case "$line" in
    *'"hello"'*) echo '{"type":"hello_ack","version":1}' ;;
    *'"eval_request"'*)
      id=$(printf '%s' "$line" | sed 's/.*"id":\([0-9]*\).*/\1/')
      echo "{\"type\":\"eval_result\",\"id\":$id,\"accuracy\":0.42}" ;;
    *'"shutdown"'*) exit 0 ;;
  esac
done
"#;
    let session = Session::spawn(script, SessionOptions::default()).unwrap();
    let mut ev = RemoteEvaluator::connect(session, SHAPE).unwrap();
    for _ in 0..3 {
        let out = ev.evaluate(&sample(), &ReuseHint::default()).unwrap();
        assert_eq!(out.metrics.accuracy, 0.42);
    }
}
