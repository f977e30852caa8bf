//! Adapter for classifiers running as a separate process.
//!
//! Requests and responses are newline-delimited JSON on the child's
//! stdin/stdout:
//!
//! ```text
//! > {"id": 7, "w": 16, "h": 16, "c": 1, "pixels": "<base64 f32 LE, row-major>"}
//! < {"id": 7, "probs": [0.1, 0.9]}
//! ```
//!
//! Responses may arrive in any order and are matched by id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Classifier, InferenceError, InputDims, Posterior};
use crate::imagegeom::Image;

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    w: usize,
    h: usize,
    c: usize,
    pixels: &'a str,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    probs: Vec<f64>,
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

pub struct ExternalClassifier {
    dims: InputDims,
    classes: usize,
    timeout: Duration,
    conn: Mutex<Connection>,
}

pub fn encode_pixels(img: &Image) -> String {
    let mut bytes = Vec::with_capacity(img.pixels().len() * 4);
    for v in img.pixels() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

impl ExternalClassifier {
    /// Spawns `command` (whitespace-separated program and arguments).
    /// `timeout` bounds the wait for each response.
    pub fn spawn(command: &str, dims: InputDims, classes: usize, timeout: Duration) -> Result<Self, InferenceError> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| InferenceError::Process("empty command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| InferenceError::Process(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { dims, classes, timeout, conn: Mutex::new(Connection { child, stdin, lines: rx, next_id: 0 }) })
    }

    /// One request/response round trip.
    pub fn classify(&self, img: &Image) -> Result<Posterior, InferenceError> {
        Ok(self.classify_batch(std::slice::from_ref(img))?.remove(0))
    }

    fn validate(&self, probs: Vec<f64>) -> Result<Posterior, InferenceError> {
        if probs.len() != self.classes {
            return Err(InferenceError::Arity { expected: self.classes, got: probs.len() });
        }
        Posterior::new(probs)
    }
}

impl Classifier for ExternalClassifier {
    fn input_dims(&self) -> InputDims {
        self.dims
    }

    fn class_count(&self) -> usize {
        self.classes
    }

    fn classify_batch(&self, batch: &[Image]) -> Result<Vec<Posterior>, InferenceError> {
        let expected = (self.dims.width, self.dims.height, self.dims.channels);
        let mut conn = self.conn.lock().map_err(|_| InferenceError::Process("connection poisoned".into()))?;
        let first = conn.next_id;
        for (k, img) in batch.iter().enumerate() {
            let got = (img.width(), img.height(), img.channels());
            if got != expected {
                return Err(InferenceError::InputMismatch { expected, got });
            }
            let pixels = encode_pixels(img);
            let req = Request { id: first + k as u64, w: got.0, h: got.1, c: got.2, pixels: &pixels };
            let line = serde_json::to_string(&req).expect("request serializes");
            writeln!(conn.stdin, "{line}").map_err(|e| InferenceError::Process(format!("write failed: {e}")))?;
        }
        conn.stdin.flush().map_err(|e| InferenceError::Process(format!("flush failed: {e}")))?;
        conn.next_id += batch.len() as u64;

        let mut pending: HashMap<u64, Option<Posterior>> = (0..batch.len() as u64).map(|k| (first + k, None)).collect();
        let mut remaining = batch.len();
        while remaining > 0 {
            let deadline = Instant::now() + self.timeout;
            let line = match conn.lines.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(InferenceError::Process(format!("read failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => return Err(InferenceError::Timeout(self.timeout)),
                Err(RecvTimeoutError::Disconnected) => return Err(InferenceError::Process("classifier exited".into())),
            };
            if line.trim().is_empty() {
                continue;
            }
            let resp: Response = serde_json::from_str(&line).map_err(|e| InferenceError::Malformed(format!("{e}: {line}")))?;
            let slot = pending
                .get_mut(&resp.id)
                .ok_or_else(|| InferenceError::Malformed(format!("unexpected response id {}", resp.id)))?;
            if slot.is_some() {
                return Err(InferenceError::Malformed(format!("duplicate response id {}", resp.id)));
            }
            *slot = Some(self.validate(resp.probs)?);
            remaining -= 1;
        }
        Ok((0..batch.len() as u64).map(|k| pending.remove(&(first + k)).flatten().expect("all answered")).collect())
    }
}

impl Drop for ExternalClassifier {
    fn drop(&mut self) {
        if let Ok(conn) = self.conn.get_mut() {
            let _ = conn.child.kill();
            let _ = conn.child.wait();
        }
    }
}
