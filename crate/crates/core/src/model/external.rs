//! Line-oriented JSON client for models living in another process.
//!
//! One request line `{"values":[...]}` is written to the child's stdin and
//! exactly one response line `{"score": x}` or `{"probabilities": [...]}` is
//! read back. Requests on one client are serialized.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::Value;

use super::{check_probabilities, OutputKind};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalClient {
    command: String,
    timeout: Duration,
    state: Mutex<Option<Running>>,
}

impl std::fmt::Debug for ExternalClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalClient")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .finish()
    }
}

fn protocol(message: impl Into<String>, payload: impl Into<String>) -> Error {
    Error::Protocol {
        message: message.into(),
        payload: payload.into(),
    }
}

impl ExternalClient {
    /// The process is started lazily on the first request.
    pub fn new(command: String, timeout_ms: u64) -> Self {
        Self {
            command,
            timeout: Duration::from_millis(timeout_ms),
            state: Mutex::new(None),
        }
    }

    fn spawn(&self) -> Result<Running> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let command = self.command.clone();
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(|l| l.ok()) {
                log::warn!("[{command}] {line}");
            }
        });
        Ok(Running {
            child,
            stdin,
            lines: rx,
        })
    }

    pub(crate) fn request(&self, x: &[f64], output: OutputKind, n_classes: usize) -> Result<Vec<f64>> {
        let mut guard = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let running = guard.as_mut().expect("spawned above");
        let request = serde_json::json!({ "values": x }).to_string();
        let sent = writeln!(running.stdin, "{request}").and_then(|_| running.stdin.flush());
        if let Err(e) = sent {
            *guard = None;
            return Err(protocol(format!("write failed: {e}"), request));
        }
        let line = match running.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                *guard = None;
                return Err(protocol(format!("read failed: {e}"), ""));
            }
            Err(RecvTimeoutError::Timeout) => {
                // the stream is out of sync after a timeout; restart next time
                *guard = None;
                return Err(protocol(format!("no response within {:?}", self.timeout), request));
            }
            Err(RecvTimeoutError::Disconnected) => {
                *guard = None;
                return Err(protocol("model process exited", ""));
            }
        };
        parse_response(&line, output, n_classes)
    }
}

fn parse_response(line: &str, output: OutputKind, n_classes: usize) -> Result<Vec<f64>> {
    let value: Value = serde_json::from_str(line).map_err(|e| protocol(format!("malformed response: {e}"), line))?;
    match output {
        OutputKind::Score => match value.get("score") {
            Some(Value::Number(n)) => match n.as_f64() {
                Some(s) if s.is_finite() => Ok(vec![s]),
                _ => Err(protocol("non-finite score", line)),
            },
            Some(_) => Err(protocol("score must be a finite number", line)),
            None => Err(protocol("response lacks 'score'", line)),
        },
        OutputKind::ClassProbabilities => {
            let probs: Vec<f64> = value
                .get("probabilities")
                .and_then(Value::as_array)
                .ok_or_else(|| protocol("response lacks 'probabilities'", line))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| protocol("probabilities must be numbers", line)))
                .collect::<Result<_>>()?;
            if probs.len() != n_classes {
                return Err(protocol(format!("expected {n_classes} probabilities"), line));
            }
            check_probabilities(&probs, "external response").map_err(|e| protocol(e.to_string(), line))?;
            Ok(probs)
        }
    }
}
