//! Newline-delimited JSON protocol between the engine and external
//! evaluation workers.
//!
//! Every message is one JSON object on its own line with a `type` field.
//! The engine opens with `hello`, the worker answers `hello_ack`, and then
//! each `eval_request` is answered by exactly one `eval_result` or
//! `eval_error` carrying the same id. One request is in flight at a time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::ArchitectureDescriptor;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        version: u32,
        input_shape: [u32; 3],
    },
    HelloAck {
        version: u32,
        #[serde(default)]
        supports_weight_reuse: bool,
    },
    EvalRequest {
        id: u64,
        descriptor: ArchitectureDescriptor,
        reuse_prefix_len: usize,
        reuse_key: Option<String>,
    },
    EvalResult {
        id: u64,
        accuracy: f64,
        #[serde(default)]
        loss: Option<f64>,
        #[serde(default)]
        wall_ms: f64,
        #[serde(default)]
        stored_key: Option<String>,
    },
    EvalError {
        id: u64,
        code: String,
        message: String,
    },
    Shutdown,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("protocol version mismatch: engine speaks {ours}, worker speaks {theirs}")]
    VersionMismatch { ours: u32, theirs: u32 },
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("transport closed: {0}")]
    Closed(String),
    #[error("unexpected message during {phase}: {message}")]
    Unexpected { phase: &'static str, message: String },
}

/// One message as a single line, without the trailing newline.
pub fn encode(message: &Message) -> String {
    serde_json::to_string(message).expect("protocol messages serialize")
}

pub fn decode(line: &str) -> Result<Message, ProtocolError> {
    serde_json::from_str(line.trim_end()).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

#[cfg(feature = "remote")]
pub use session::{RemoteEvaluator, Session, SessionOptions};

#[cfg(feature = "remote")]
mod session {
    use std::collections::BTreeSet;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpStream;
    use std::process::{Child, Command, Stdio};
    use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
    use std::thread;
    use std::time::{Duration, Instant};

    use super::*;
    use crate::evaluation::{EvalError, Evaluation, Evaluator, Metrics, ReuseHint, WeightHandle};

    #[derive(Debug, Clone, Copy)]
    pub struct SessionOptions {
        pub handshake_timeout: Duration,
        pub request_timeout: Duration,
    }

    impl Default for SessionOptions {
        fn default() -> Self {
            Self {
                handshake_timeout: Duration::from_secs(10),
                request_timeout: Duration::from_secs(3600),
            }
        }
    }

    enum Incoming {
        Line(String),
        Closed(String),
    }

    /// A live connection to one worker.
    pub struct Session {
        writer: Box<dyn Write + Send>,
        incoming: Receiver<Incoming>,
        child: Option<Child>,
        options: SessionOptions,
        next_id: u64,
        answered: BTreeSet<u64>,
        dead: Option<String>,
        supports_weight_reuse: bool,
    }

    impl Session {
        /// Wraps an already-connected byte stream pair. A background thread
        /// reads lines so that waits can time out.
        pub fn from_streams(
            reader: impl Read + Send + 'static,
            writer: impl Write + Send + 'static,
            options: SessionOptions,
        ) -> Self {
            let (tx, rx) = channel();
            thread::spawn(move || {
                let mut reader = BufReader::new(reader);
                loop {
                    let mut line = String::new();
                    match reader.read_line(&mut line) {
                        Ok(0) => {
                            let _ = tx.send(Incoming::Closed("end of stream".into()));
                            break;
                        }
                        Ok(_) => {
                            if line.trim().is_empty() {
                                continue;
                            }
                            if tx.send(Incoming::Line(line)).is_err() {
                                break;
                            }
                        }
                        Err(e) => {
                            let _ = tx.send(Incoming::Closed(e.to_string()));
                            break;
                        }
                    }
                }
            });
            Self {
                writer: Box::new(writer),
                incoming: rx,
                child: None,
                options,
                next_id: 1,
                answered: BTreeSet::new(),
                dead: None,
                supports_weight_reuse: false,
            }
        }

        /// Spawns `command` through the shell and talks to it on stdin/stdout.
        pub fn spawn(command: &str, options: SessionOptions) -> std::io::Result<Self> {
            let mut child = Command::new("sh")
                .arg("-c")
                .arg(command)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            let mut session = Self::from_streams(stdout, stdin, options);
            session.child = Some(child);
            Ok(session)
        }

        pub fn connect_tcp(addr: &str, options: SessionOptions) -> std::io::Result<Self> {
            let stream = TcpStream::connect(addr)?;
            let reader = stream.try_clone()?;
            Ok(Self::from_streams(reader, stream, options))
        }

        pub fn is_live(&self) -> bool {
            self.dead.is_none()
        }

        pub fn supports_weight_reuse(&self) -> bool {
            self.supports_weight_reuse
        }

        fn kill(&mut self, reason: String) {
            if self.dead.is_none() {
                log::error!("evaluator session died: {reason}");
                self.dead = Some(reason);
            }
        }

        fn send(&mut self, message: &Message) -> Result<(), ProtocolError> {
            if let Some(reason) = &self.dead {
                return Err(ProtocolError::Closed(reason.clone()));
            }
            let mut line = encode(message);
            line.push('\n');
            let result = self
                .writer
                .write_all(line.as_bytes())
                .and_then(|_| self.writer.flush());
            if let Err(e) = result {
                self.kill(e.to_string());
                return Err(ProtocolError::Closed(e.to_string()));
            }
            Ok(())
        }

        fn receive(&mut self, deadline: Instant) -> Result<String, ProtocolError> {
            let wait = deadline.saturating_duration_since(Instant::now());
            match self.incoming.recv_timeout(wait) {
                Ok(Incoming::Line(line)) => Ok(line),
                Ok(Incoming::Closed(reason)) => {
                    self.kill(reason.clone());
                    Err(ProtocolError::Closed(reason))
                }
                Err(RecvTimeoutError::Timeout) => {
                    Err(ProtocolError::Timeout(wait.as_millis() as u64))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.kill("reader stopped".into());
                    Err(ProtocolError::Closed("reader stopped".into()))
                }
            }
        }

        /// Sends `hello` and waits for `hello_ack`. A timeout or version
        /// mismatch leaves the session dead.
        pub fn handshake(&mut self, input_shape: [u32; 3]) -> Result<bool, ProtocolError> {
            self.send(&Message::Hello {
                version: PROTOCOL_VERSION,
                input_shape,
            })?;
            let deadline = Instant::now() + self.options.handshake_timeout;
            let line = match self.receive(deadline) {
                Ok(line) => line,
                Err(e) => {
                    self.kill(e.to_string());
                    return Err(e);
                }
            };
            match decode(&line) {
                Ok(Message::HelloAck {
                    version,
                    supports_weight_reuse,
                }) => {
                    if version != PROTOCOL_VERSION {
                        let err = ProtocolError::VersionMismatch {
                            ours: PROTOCOL_VERSION,
                            theirs: version,
                        };
                        self.kill(err.to_string());
                        return Err(err);
                    }
                    self.supports_weight_reuse = supports_weight_reuse;
                    Ok(supports_weight_reuse)
                }
                Ok(other) => {
                    let err = ProtocolError::Unexpected {
                        phase: "handshake",
                        message: encode(&other),
                    };
                    self.kill(err.to_string());
                    Err(err)
                }
                Err(e) => {
                    self.kill(e.to_string());
                    Err(e)
                }
            }
        }

        /// Sends one request and blocks for its answer.
        pub fn request(
            &mut self,
            descriptor: &ArchitectureDescriptor,
            reuse_prefix_len: usize,
            reuse_key: Option<String>,
        ) -> Result<Evaluation, EvalError> {
            if let Some(reason) = &self.dead {
                return Err(EvalError::SessionDead(reason.clone()));
            }
            let id = self.next_id;
            self.next_id += 1;
            self.send(&Message::EvalRequest {
                id,
                descriptor: descriptor.clone(),
                reuse_prefix_len,
                reuse_key,
            })
            .map_err(|e| EvalError::SessionDead(e.to_string()))?;
            let deadline = Instant::now() + self.options.request_timeout;
            loop {
                let line = match self.receive(deadline) {
                    Ok(line) => line,
                    Err(ProtocolError::Timeout(_)) => {
                        self.answered.insert(id);
                        return Err(EvalError::Timeout(
                            self.options.request_timeout.as_millis() as u64,
                        ));
                    }
                    Err(e) => return Err(EvalError::SessionDead(e.to_string())),
                };
                let message = match decode(&line) {
                    Ok(m) => m,
                    Err(e) => {
                        log::warn!("discarding malformed reply: {e}");
                        self.answered.insert(id);
                        return Err(EvalError::Protocol(e.to_string()));
                    }
                };
                let reply_id = match &message {
                    Message::EvalResult { id, .. } | Message::EvalError { id, .. } => *id,
                    other => {
                        log::warn!("ignoring unexpected {}", encode(other));
                        continue;
                    }
                };
                if reply_id != id {
                    if self.answered.contains(&reply_id) {
                        log::warn!("dropping duplicate reply for request {reply_id}");
                    } else {
                        log::warn!("dropping reply for unknown request {reply_id}");
                    }
                    continue;
                }
                self.answered.insert(id);
                return match message {
                    Message::EvalResult {
                        accuracy,
                        loss,
                        wall_ms,
                        stored_key,
                        ..
                    } => {
                        if !(0.0..=1.0).contains(&accuracy) {
                            return Err(EvalError::Protocol(format!(
                                "accuracy {accuracy} outside [0, 1]"
                            )));
                        }
                        Ok(Evaluation {
                            metrics: Metrics {
                                loss,
                                wall_ms: wall_ms.max(0.0).round() as u64,
                                reused_prefix_len: reuse_prefix_len,
                                ..Metrics::scored(accuracy)
                            },
                            stored: stored_key.map(WeightHandle),
                        })
                    }
                    Message::EvalError { code, message, .. } => {
                        Err(EvalError::Reported { code, message })
                    }
                    _ => unreachable!("filtered above"),
                };
            }
        }

        /// Asks the worker to exit and reaps a spawned child.
        pub fn shutdown(&mut self) {
            if self.dead.is_none() {
                let _ = self.send(&Message::Shutdown);
                self.dead = Some("shut down".into());
            }
            if let Some(mut child) = self.child.take() {
                let deadline = Instant::now() + Duration::from_secs(5);
                loop {
                    match child.try_wait() {
                        Ok(Some(_)) => break,
                        Ok(None) if Instant::now() < deadline => {
                            thread::sleep(Duration::from_millis(20))
                        }
                        _ => {
                            let _ = child.kill();
                            let _ = child.wait();
                            break;
                        }
                    }
                }
            }
        }
    }

    impl Drop for Session {
        fn drop(&mut self) {
            self.shutdown();
        }
    }

    /// [`Evaluator`] backed by a remote worker session.
    pub struct RemoteEvaluator {
        session: Session,
    }

    impl RemoteEvaluator {
        /// Performs the handshake; fails if it does not complete.
        pub fn connect(mut session: Session, input_shape: [u32; 3]) -> Result<Self, ProtocolError> {
            session.handshake(input_shape)?;
            Ok(Self { session })
        }

        pub fn session(&self) -> &Session {
            &self.session
        }
    }

    impl Evaluator for RemoteEvaluator {
        fn evaluate(
            &mut self,
            descriptor: &ArchitectureDescriptor,
            hint: &ReuseHint,
        ) -> Result<Evaluation, EvalError> {
            let (len, key) = match (&hint.handle, self.session.supports_weight_reuse()) {
                (Some(handle), true) => (hint.prefix_len, Some(handle.0.clone())),
                _ => (0, None),
            };
            self.session.request(descriptor, len, key)
        }
    }
}
