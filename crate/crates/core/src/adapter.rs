//! Line-delimited JSON protocol for out-of-process evaluators.
//!
//! Each request is one line `{"id":1,"x":[...],"freq":[...]}`; each response is
//! `{"id":1,"r_db":[...]}` or `{"id":1,"error":"..."}`. Numbers are written
//! with 17 significant digits so designs survive the round trip bit for bit,
//! which the evaluation cache relies on.

use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, EvalError, Result};
use crate::evaluator::Evaluator;
use crate::types::{DesignVector, FrequencySweep, ResponseCurve};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRequest {
    pub id: u64,
    pub x: Vec<f64>,
    pub freq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolResponse {
    Values { id: u64, r_db: Vec<f64> },
    Error { id: u64, message: String },
}

impl ProtocolResponse {
    pub fn id(&self) -> u64 {
        match self {
            ProtocolResponse::Values { id, .. } | ProtocolResponse::Error { id, .. } => *id,
        }
    }
}

fn write_numbers(out: &mut String, values: &[f64]) {
    out.push('[');
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        if v.is_finite() {
            let _ = write!(out, "{v:.16e}");
        } else {
            out.push_str("null");
        }
    }
    out.push(']');
}

/// One request line, without the trailing newline.
pub fn encode_request(req: &ProtocolRequest) -> String {
    let mut out = format!("{{\"id\":{},\"x\":", req.id);
    write_numbers(&mut out, &req.x);
    out.push_str(",\"freq\":");
    write_numbers(&mut out, &req.freq);
    out.push('}');
    out
}

/// One response line, without the trailing newline. Non-finite values are
/// written as `null`.
pub fn encode_response(resp: &ProtocolResponse) -> String {
    match resp {
        ProtocolResponse::Values { id, r_db } => {
            let mut out = format!("{{\"id\":{id},\"r_db\":");
            write_numbers(&mut out, r_db);
            out.push('}');
            out
        }
        ProtocolResponse::Error { id, message } => {
            serde_json::json!({ "id": id, "error": message }).to_string()
        }
    }
}

#[derive(Deserialize)]
struct RawResponse {
    id: u64,
    #[serde(default)]
    r_db: Option<Vec<Option<f64>>>,
    #[serde(default)]
    error: Option<String>,
}

/// Bare `NaN` / `Infinity` are not JSON, but simulators print them anyway.
fn nonfinite_as_null(line: &str) -> String {
    line.replace("-Infinity", "null")
        .replace("Infinity", "null")
        .replace("NaN", "null")
}

/// Parses a response line and checks it against the request it answers.
pub fn decode_response(
    line: &str,
    expected_id: u64,
    expected_len: usize,
) -> Result<ResponseCurve, EvalError> {
    let raw: RawResponse = match serde_json::from_str(line) {
        Ok(raw) => raw,
        Err(first) => serde_json::from_str(&nonfinite_as_null(line))
            .map_err(|_| EvalError::Malformed(format!("{first}: {}", excerpt(line))))?,
    };
    if raw.id != expected_id {
        return Err(EvalError::IdMismatch {
            expected: expected_id,
            actual: raw.id,
        });
    }
    match (raw.r_db, raw.error) {
        (Some(_), Some(_)) | (None, None) => Err(EvalError::Malformed(format!(
            "expected exactly one of r_db and error: {}",
            excerpt(line)
        ))),
        (None, Some(message)) => Err(EvalError::Remote(message)),
        (Some(values), None) => {
            if values.len() != expected_len {
                return Err(EvalError::LengthMismatch {
                    expected: expected_len,
                    actual: values.len(),
                });
            }
            let values = values
                .into_iter()
                .enumerate()
                .map(|(index, v)| v.ok_or(EvalError::NonFinite { index }))
                .collect::<Result<Vec<_>, _>>()?;
            ResponseCurve::from_db(values)
        }
    }
}

fn excerpt(line: &str) -> String {
    const MAX: usize = 120;
    match line.char_indices().nth(MAX) {
        Some((cut, _)) => format!("{}...", &line[..cut]),
        None => line.to_string(),
    }
}

#[derive(Deserialize)]
struct RawRequest {
    x: Vec<f64>,
    freq: Vec<f64>,
}

/// Request parsing result: a request, a parse error that still carries the
/// id, or a line that cannot be attributed to any request.
enum Incoming {
    Request(ProtocolRequest),
    Bad { id: u64, message: String },
    Unreadable(String),
}

fn decode_request(line: &str) -> Incoming {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return Incoming::Unreadable(e.to_string()),
    };
    let Some(id) = value.get("id").and_then(Value::as_u64) else {
        return Incoming::Unreadable("request has no integer id".into());
    };
    match RawRequest::deserialize(&value) {
        Ok(raw) if raw.x.is_empty() || raw.freq.is_empty() => Incoming::Bad {
            id,
            message: "x and freq must be non-empty".into(),
        },
        Ok(raw) => Incoming::Request(ProtocolRequest {
            id,
            x: raw.x,
            freq: raw.freq,
        }),
        Err(e) => Incoming::Bad {
            id,
            message: format!("malformed request: {e}"),
        },
    }
}

fn answer<E: Evaluator + ?Sized>(ev: &E, req: ProtocolRequest) -> ProtocolResponse {
    let fail = |message: String| ProtocolResponse::Error {
        id: req.id,
        message,
    };
    let sweep = ev.sweep().points();
    let same_sweep = req.freq.len() == sweep.len()
        && req
            .freq
            .iter()
            .zip(sweep)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    if !same_sweep {
        return fail(format!(
            "frequency grid does not match the served problem ({} points expected)",
            sweep.len()
        ));
    }
    if req.x.len() != ev.dimension() {
        return fail(format!(
            "expected {} parameters, got {}",
            ev.dimension(),
            req.x.len()
        ));
    }
    let x = match DesignVector::new(req.x) {
        Ok(x) => x,
        Err(e) => return fail(e.to_string()),
    };
    match ev.evaluate(&x) {
        Ok(r) => ProtocolResponse::Values {
            id: req.id,
            r_db: r.to_vec(),
        },
        Err(e) => fail(e.to_string()),
    }
}

/// Answers requests from `input` on `output`, one line each and in order,
/// until end of input. Lines without a readable id get a diagnostic on `diag`
/// and no response.
pub fn serve_mock<E, R, W, D>(ev: &E, input: R, mut output: W, mut diag: D) -> io::Result<()>
where
    E: Evaluator + ?Sized,
    R: BufRead,
    W: Write,
    D: Write,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match decode_request(&line) {
            Incoming::Request(req) => answer(ev, req),
            Incoming::Bad { id, message } => ProtocolResponse::Error { id, message },
            Incoming::Unreadable(why) => {
                writeln!(
                    diag,
                    "serve-mock: ignoring unreadable request ({why}): {}",
                    excerpt(&line)
                )?;
                continue;
            }
        };
        writeln!(output, "{}", encode_response(&resp))?;
        output.flush()?;
    }
    Ok(())
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<io::Result<String>>,
    next_id: u64,
    alive: bool,
}

/// An [`Evaluator`] backed by a child process speaking the line protocol.
///
/// Requests are strictly sequential: concurrent callers queue on an internal
/// lock, and [`Evaluator::supports_concurrency`] reports `false` so Jacobian
/// probes are issued one at a time. There is no caching here; deduplication
/// is left to the caller's [`crate::cache::EvalCache`].
pub struct ExternalEvaluator {
    session: Mutex<Session>,
    dimension: usize,
    sweep: FrequencySweep,
    timeout: Duration,
}

impl std::fmt::Debug for ExternalEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalEvaluator")
            .field("dimension", &self.dimension)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl ExternalEvaluator {
    /// Starts `program args...` with piped stdin/stdout; the child's stderr is
    /// passed through.
    pub fn spawn<S: AsRef<str>>(
        program: &str,
        args: &[S],
        dimension: usize,
        sweep: FrequencySweep,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config(
                "external evaluator dimension must be positive",
            ));
        }
        let mut child = Command::new(program)
            .args(args.iter().map(AsRef::as_ref))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Io(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            session: Mutex::new(Session {
                child,
                stdin,
                lines: rx,
                next_id: 1,
                alive: true,
            }),
            dimension,
            sweep,
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn exchange(&self, s: &mut Session, x: &DesignVector) -> Result<ResponseCurve, EvalError> {
        if !s.alive {
            return Err(EvalError::ProcessExited);
        }
        let id = s.next_id;
        s.next_id += 1;
        let line = encode_request(&ProtocolRequest {
            id,
            x: x.to_vec(),
            freq: self.sweep.points().to_vec(),
        });
        let stdin = s.stdin.as_mut().ok_or(EvalError::ProcessExited)?;
        let sent = writeln!(stdin, "{line}").and_then(|_| stdin.flush());
        if let Err(e) = sent {
            s.alive = false;
            return Err(match e.kind() {
                io::ErrorKind::BrokenPipe => EvalError::ProcessExited,
                _ => EvalError::Io(e.to_string()),
            });
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match s.lines.recv_timeout(left) {
                Ok(Ok(reply)) if reply.trim().is_empty() => continue,
                Ok(Ok(reply)) => return decode_response(&reply, id, self.sweep.len()),
                Ok(Err(e)) => {
                    s.alive = false;
                    return Err(EvalError::Io(e.to_string()));
                }
                Err(RecvTimeoutError::Timeout) => {
                    // A late reply would desynchronise ids, so the child is
                    // not reused.
                    s.alive = false;
                    let _ = s.child.kill();
                    return Err(EvalError::Timeout(self.timeout));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    s.alive = false;
                    return Err(EvalError::ProcessExited);
                }
            }
        }
    }
}

impl Evaluator for ExternalEvaluator {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn sweep(&self) -> &FrequencySweep {
        &self.sweep
    }

    fn evaluate(&self, x: &DesignVector) -> Result<ResponseCurve, EvalError> {
        let mut s = self.session.lock().unwrap_or_else(|p| p.into_inner());
        self.exchange(&mut s, x)
    }

    fn supports_concurrency(&self) -> bool {
        false
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        let s = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        // Closing stdin is the shutdown signal.
        s.stdin.take();
        let deadline = Instant::now() + Duration::from_secs(1);
        while Instant::now() < deadline {
            match s.child.try_wait() {
                Ok(Some(_)) | Err(_) => return,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
            }
        }
        let _ = s.child.kill();
        let _ = s.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::analytic::QuadraticBowl;
    use proptest::prelude::*;

    fn serve(ev: &QuadraticBowl, input: &str) -> (String, String) {
        let mut out = Vec::new();
        let mut diag = Vec::new();
        serve_mock(ev, input.as_bytes(), &mut out, &mut diag).unwrap();
        (
            String::from_utf8(out).unwrap(),
            String::from_utf8(diag).unwrap(),
        )
    }

    #[test]
    fn request_layout() {
        let line = encode_request(&ProtocolRequest {
            id: 7,
            x: vec![1.0, -0.25],
            freq: vec![5.5],
        });
        assert_eq!(
            line,
            "{\"id\":7,\"x\":[1.0000000000000000e0,-2.5000000000000000e-1],\"freq\":[5.5000000000000000e0]}"
        );
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["x"][1].as_f64(), Some(-0.25));
    }

    #[test]
    fn error_response_is_escaped_json() {
        let line = encode_response(&ProtocolResponse::Error {
            id: 3,
            message: "bad \"mesh\"\n".into(),
        });
        assert!(!line.contains('\n'));
        assert!(
            matches!(decode_response(&line, 3, 1), Err(EvalError::Remote(m)) if m == "bad \"mesh\"\n")
        );
    }

    #[test]
    fn decode_failures_are_distinct() {
        assert!(matches!(
            decode_response("not json", 1, 1),
            Err(EvalError::Malformed(_))
        ));
        assert_eq!(
            decode_response("{\"id\":2,\"r_db\":[1.0]}", 1, 1),
            Err(EvalError::IdMismatch {
                expected: 1,
                actual: 2
            })
        );
        assert_eq!(
            decode_response("{\"id\":1,\"r_db\":[1.0,2.0]}", 1, 3),
            Err(EvalError::LengthMismatch {
                expected: 3,
                actual: 2
            })
        );
        assert_eq!(
            decode_response("{\"id\":1,\"r_db\":[1.0,NaN]}", 1, 2),
            Err(EvalError::NonFinite { index: 1 })
        );
        assert_eq!(
            decode_response("{\"id\":1,\"r_db\":[-Infinity]}", 1, 1),
            Err(EvalError::NonFinite { index: 0 })
        );
        assert_eq!(
            decode_response("{\"id\":1,\"r_db\":[null,1]}", 1, 2),
            Err(EvalError::NonFinite { index: 0 })
        );
        assert!(matches!(
            decode_response("{\"id\":1,\"r_db\":[1],\"error\":\"x\"}", 1, 1),
            Err(EvalError::Malformed(_))
        ));
        assert!(matches!(
            decode_response("{\"id\":1}", 1, 1),
            Err(EvalError::Malformed(_))
        ));
    }

    #[test]
    fn mock_answers_match_direct_evaluation() {
        let bowl = QuadraticBowl::new(vec![1.0, 2.0]);
        let x = vec![0.1, 1.0 / 3.0];
        let req = encode_request(&ProtocolRequest {
            id: 42,
            x: x.clone(),
            freq: vec![5.5],
        });
        let (out, diag) = serve(&bowl, &format!("{req}\n"));
        assert!(diag.is_empty());
        let got = decode_response(out.trim_end(), 42, 1).unwrap();
        let want = bowl.evaluate(&DesignVector::new(x).unwrap()).unwrap();
        assert_eq!(got[0].to_bits(), want[0].to_bits());
    }

    #[test]
    fn mock_reports_bad_requests() {
        let bowl = QuadraticBowl::new(vec![1.0, 2.0]);
        let input = "{\"id\":1,\"x\":[1.0],\"freq\":[5.5]}\n\
                     {\"id\":2,\"x\":[1.0,2.0],\"freq\":[5.0]}\n\
                     {\"id\":3,\"x\":\"oops\"}\n\
                     garbage\n\
                     \n\
                     {\"id\":4,\"x\":[1.0,2.0],\"freq\":[5.5]}\n";
        let (out, diag) = serve(&bowl, input);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 4);
        for (k, line) in lines[..3].iter().enumerate() {
            assert!(matches!(
                decode_response(line, k as u64 + 1, 1),
                Err(EvalError::Remote(_))
            ));
        }
        assert_eq!(decode_response(lines[3], 4, 1).unwrap()[0], 0.0);
        assert_eq!(diag.lines().count(), 1);
    }

    #[test]
    fn thousand_requests_in_order() {
        let bowl = QuadraticBowl::new(vec![0.5, 0.5]);
        let mut input = String::new();
        for id in 1..=1000u64 {
            input.push_str(&encode_request(&ProtocolRequest {
                id,
                x: vec![id as f64 * 1e-3, 0.25],
                freq: vec![5.5],
            }));
            input.push('\n');
        }
        let (out, _) = serve(&bowl, &input);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 1000);
        for (k, line) in lines.iter().enumerate() {
            let id = k as u64 + 1;
            let x = DesignVector::new(vec![id as f64 * 1e-3, 0.25]).unwrap();
            assert_eq!(
                decode_response(line, id, 1).unwrap(),
                bowl.evaluate(&x).unwrap()
            );
        }
    }

    proptest! {
        #[test]
        fn numbers_round_trip_bitwise(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20)) {
            let line = encode_response(&ProtocolResponse::Values { id: 9, r_db: values.clone() });
            let back = decode_response(&line, 9, values.len()).unwrap();
            for (a, b) in back.iter().zip(&values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
