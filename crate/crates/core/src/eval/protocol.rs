//! The `monas-eval/1` line protocol and its subprocess client.
//!
//! The evaluator process writes a handshake line `{"protocol":"monas-eval/1"}`
//! first. It then reads one request per line from standard input,
//! `{"id":<int>,"arch":<architecture record>}`, and answers each with one
//! line, either `{"id":<int>,"penalty":<float>}` or `{"id":<int>,"error":<text>}`,
//! flushing after every response. Requests are never pipelined.

use std::fmt;
use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{ArchitectureRecord, DecodeError};
use crate::space::{random_valid, ChildArchitecture, SearchSpaceConfig};

use super::{EvalError, Evaluator};

pub const PROTOCOL: &str = "monas-eval/1";

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("failed to start evaluator `{command}`: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("handshake mismatch: expected {{\"protocol\":\"{PROTOCOL}\"}}, got {got:?}")]
    HandshakeMismatch { got: String },
    #[error("malformed response line {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("id mismatch: sent request {expected}, got response {got}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("evaluator did not answer within {0:?}")]
    Timeout(Duration),
    #[error("evaluator process exited ({status})")]
    ProcessExited { status: String },
    #[error("evaluator is unusable after an earlier protocol failure")]
    Poisoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Handshake {
    pub protocol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRequest {
    pub id: u64,
    pub arch: ArchitectureRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalResponse {
    Penalty { id: u64, penalty: f64 },
    Error { id: u64, error: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseWire {
    id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl EvalResponse {
    pub fn id(&self) -> u64 {
        match self {
            EvalResponse::Penalty { id, .. } | EvalResponse::Error { id, .. } => *id,
        }
    }

    pub fn to_line(&self) -> String {
        let wire = match self {
            EvalResponse::Penalty { id, penalty } => ResponseWire {
                id: *id,
                penalty: Some(*penalty),
                error: None,
            },
            EvalResponse::Error { id, error } => ResponseWire {
                id: *id,
                penalty: None,
                error: Some(error.clone()),
            },
        };
        serde_json::to_string(&wire).expect("response serializes")
    }

    pub fn parse(line: &str) -> Result<Self, ProtocolError> {
        let malformed = |reason: String| ProtocolError::Malformed {
            line: line.to_owned(),
            reason,
        };
        let wire: ResponseWire =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        match (wire.penalty, wire.error) {
            (Some(penalty), None) => {
                if !penalty.is_finite() || penalty < 0.0 {
                    return Err(malformed(format!(
                        "penalty {penalty} is not a finite non-negative number"
                    )));
                }
                Ok(EvalResponse::Penalty {
                    id: wire.id,
                    penalty,
                })
            }
            (None, Some(error)) => Ok(EvalResponse::Error { id: wire.id, error }),
            _ => Err(malformed(
                "expected exactly one of `penalty` and `error`".to_owned(),
            )),
        }
    }
}

/// Client side of `monas-eval/1` over a child process.
///
/// The command runs under `sh -c`, is handshaken once at startup, and stays
/// alive across calls. Any protocol failure poisons the client.
pub struct ProcessEvaluator {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<io::Result<String>>,
    timeout: Duration,
    next_id: u64,
    poisoned: bool,
}

impl fmt::Debug for ProcessEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessEvaluator")
            .field("pid", &self.child.id())
            .field("timeout", &self.timeout)
            .field("next_id", &self.next_id)
            .finish()
    }
}

impl ProcessEvaluator {
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, ProtocolError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ProtocolError::Spawn {
                command: command.to_owned(),
                source,
            })?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut evaluator = Self {
            stdin: child.stdin.take(),
            child,
            lines: rx,
            timeout,
            next_id: 0,
            poisoned: false,
        };
        let line = evaluator.read_line()?;
        let ok = serde_json::from_str::<Handshake>(&line)
            .map(|h| h.protocol == PROTOCOL)
            .unwrap_or(false);
        if !ok {
            evaluator.poisoned = true;
            return Err(ProtocolError::HandshakeMismatch { got: line });
        }
        Ok(evaluator)
    }

    fn exit_status(&mut self) -> String {
        // Give a process that just closed stdout a moment to be reaped.
        for _ in 0..50 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return status.to_string();
            }
            thread::sleep(Duration::from_millis(10));
        }
        "still running, stdout closed".to_owned()
    }

    fn read_line(&mut self) -> Result<String, ProtocolError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(ProtocolError::Malformed {
                line: String::new(),
                reason: e.to_string(),
            }),
            Err(RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::ProcessExited {
                status: self.exit_status(),
            }),
        }
    }

    fn send_line(&mut self, line: &str) -> Result<(), ProtocolError> {
        let stdin = self.stdin.as_mut().ok_or(ProtocolError::Poisoned)?;
        let sent = stdin
            .write_all(line.as_bytes())
            .and_then(|()| stdin.write_all(b"\n"))
            .and_then(|()| stdin.flush());
        sent.map_err(|_| ProtocolError::ProcessExited {
            status: self.exit_status(),
        })
    }

    fn exchange<A: Serialize>(&mut self, arch: &A) -> Result<EvalResponse, ProtocolError> {
        #[derive(Serialize)]
        struct Wire<'a, A> {
            id: u64,
            arch: &'a A,
        }
        if self.poisoned {
            return Err(ProtocolError::Poisoned);
        }
        let id = self.next_id;
        self.next_id += 1;
        let line = serde_json::to_string(&Wire { id, arch }).expect("requests serialize");
        let result = self.send_line(&line).and_then(|()| {
            let reply = self.read_line()?;
            let response = EvalResponse::parse(&reply)?;
            if response.id() != id {
                return Err(ProtocolError::IdMismatch {
                    expected: id,
                    got: response.id(),
                });
            }
            Ok(response)
        });
        if result.is_err() {
            self.poisoned = true;
        }
        result
    }

    /// Sends one request whose `arch` field is an arbitrary JSON value and
    /// waits for the matching response.
    pub fn request_raw(&mut self, arch: &serde_json::Value) -> Result<EvalResponse, ProtocolError> {
        self.exchange(arch)
    }

    pub fn request(&mut self, arch: &ChildArchitecture) -> Result<EvalResponse, ProtocolError> {
        self.exchange(&ArchitectureRecord::from_architecture(arch))
    }
}

impl Evaluator for ProcessEvaluator {
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        match self.request(arch)? {
            EvalResponse::Penalty { penalty, .. } => Ok(penalty),
            EvalResponse::Error { id, error } => Err(EvalError::Remote { id, message: error }),
        }
    }
}

impl Drop for ProcessEvaluator {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

/// Server side of the protocol: answers requests from `input` on `output`
/// until end of input. Malformed requests and evaluator failures become error
/// responses; the loop keeps running.
pub fn serve<R, W, E>(input: R, mut output: W, evaluator: &mut E) -> io::Result<()>
where
    R: BufRead,
    W: Write,
    E: Evaluator + ?Sized,
{
    let handshake = Handshake {
        protocol: PROTOCOL.to_owned(),
    };
    writeln!(output, "{}", serde_json::to_string(&handshake)?)?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<serde_json::Value>(&line) {
            Err(e) => EvalResponse::Error {
                id: 0,
                error: format!("malformed request: {e}"),
            },
            Ok(value) => {
                let id = value.get("id").and_then(|v| v.as_u64()).unwrap_or(0);
                let outcome = serde_json::from_value::<EvalRequest>(value)
                    .map_err(|e| e.to_string())
                    .and_then(|req| {
                        let config = req.arch.config().map_err(|e| e.to_string())?;
                        req.arch
                            .to_architecture(&std::sync::Arc::new(config))
                            .map_err(|e: DecodeError| e.to_string())
                    })
                    .and_then(|arch| evaluator.evaluate(&arch).map_err(|e| e.to_string()));
                match outcome {
                    Ok(penalty) => EvalResponse::Penalty { id, penalty },
                    Err(error) => EvalResponse::Error { id, error },
                }
            }
        };
        writeln!(output, "{}", response.to_line())?;
        output.flush()?;
    }
    Ok(())
}

/// One named check of the conformance suite.
#[derive(Debug, Clone)]
pub struct ConformanceCheck {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

#[derive(Debug, Clone)]
pub struct ConformanceReport {
    pub checks: Vec<ConformanceCheck>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome.is_ok())
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            match &check.outcome {
                Ok(()) => writeln!(f, "ok    {}", check.name)?,
                Err(e) => writeln!(f, "FAIL  {}: {e}", check.name)?,
            }
        }
        Ok(())
    }
}

/// Runs the conformance suite against an evaluator command: handshake, id
/// echo on several requests, determinism on a repeated request, and an error
/// response to a request whose architecture names an unknown operation, after
/// which the process must keep serving.
pub fn check_conformance(
    command: &str,
    timeout: Duration,
    config: &SearchSpaceConfig,
) -> ConformanceReport {
    let mut checks = Vec::new();
    let mut push = |name, outcome| checks.push(ConformanceCheck { name, outcome });
    let mut client = match ProcessEvaluator::spawn(command, timeout) {
        Ok(c) => {
            push("handshake", Ok(()));
            c
        }
        Err(e) => {
            push("handshake", Err(e.to_string()));
            return ConformanceReport { checks };
        }
    };

    let archs: Vec<_> = (0..3).map(|s| random_valid(config, s)).collect();
    let mut first = None;
    let echo = archs.iter().try_for_each(|a| {
        let p = client.evaluate(a).map_err(|e| e.to_string())?;
        first.get_or_insert(p);
        Ok(())
    });
    push("id echo", echo);

    let repeat = client
        .evaluate(&archs[0])
        .map_err(|e| e.to_string())
        .and_then(|p| match first {
            Some(q) if q.to_bits() == p.to_bits() => Ok(()),
            Some(q) => Err(format!("penalty changed from {q} to {p}")),
            None => Err("no earlier penalty to compare".to_owned()),
        });
    push("determinism", repeat);

    let mut bogus = serde_json::to_value(ArchitectureRecord::from_architecture(&archs[0]))
        .expect("records serialize");
    bogus["edges"][0]["op"] = serde_json::Value::from("__not_an_operation__");
    let propagated = match client.request_raw(&bogus) {
        Ok(EvalResponse::Error { .. }) => client
            .evaluate(&archs[1])
            .map(|_| ())
            .map_err(|e| format!("process stopped serving after an error response: {e}")),
        Ok(EvalResponse::Penalty { penalty, .. }) => Err(format!(
            "invalid architecture was scored {penalty} instead of rejected"
        )),
        Err(e) => Err(e.to_string()),
    };
    push("error propagation", propagated);
    ConformanceReport { checks }
}
