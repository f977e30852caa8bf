//! Stand-in external classifier speaking the line-delimited JSON protocol.
//!
//! Usage: `echo-classifier <mode> <classes>` where mode is one of
//! `uniform`, `brightness` (one-hot on `floor(mean * classes)`),
//! `short` (one class missing), `scaled` (probabilities sum to 0.8),
//! `garbage`, `hang`, or `reverse` (brightness answers, pairs of requests
//! answered in reverse order).

use std::io::{BufRead, Write};

use base64::Engine;
use serde_json::{json, Value};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("uniform");
    let classes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut held: Vec<String> = Vec::new();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let req: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let id = req["id"].as_u64().unwrap_or(0);
        let probs: Vec<f64> = match mode {
            "brightness" | "reverse" => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(req["pixels"].as_str().unwrap_or(""))
                    .unwrap_or_default();
                let vals: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
                let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / vals.len().max(1) as f64;
                let k = ((mean * classes as f64) as usize).min(classes - 1);
                (0..classes).map(|c| if c == k { 1.0 } else { 0.0 }).collect()
            }
            "short" => vec![1.0 / (classes - 1) as f64; classes - 1],
            "scaled" => vec![0.8 / classes as f64; classes],
            "hang" => {
                std::thread::sleep(std::time::Duration::from_secs(3600));
                continue;
            }
            "garbage" => {
                writeln!(out, "not json").ok();
                out.flush().ok();
                continue;
            }
            _ => vec![1.0 / classes as f64; classes],
        };
        let resp = json!({ "id": id, "probs": probs }).to_string();
        if mode == "reverse" {
            held.push(resp);
            if held.len() == 2 {
                for r in held.drain(..).rev() {
                    writeln!(out, "{r}").ok();
                }
            }
        } else {
            writeln!(out, "{resp}").ok();
        }
        out.flush().ok();
    }
}
