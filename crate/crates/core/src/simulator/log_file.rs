//! Plain-text event logs.
//!
//! ```text
//! # hawkes-events n=3 horizon=1000 seed=42 fingerprint=9f2c0a1b33d4e5f6
//! 0.01734 2
//! 0.52 0
//! ```
//!
//! One `time node` record per line, strictly sorted by `(time, node)`.
//! Times are written in Rust's shortest round-trip form, so a log read back
//! is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{event_order, Event, EventLog};
use crate::error::{Error, Result};

const MAGIC: &str = "# hawkes-events";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

impl EventLog {
    pub fn to_text(&self) -> String {
        let fingerprint = if self.fingerprint.is_empty() {
            "-"
        } else {
            &self.fingerprint
        };
        let mut out = format!(
            "{MAGIC} n={} horizon={} seed={} fingerprint={fingerprint}\n",
            self.n, self.horizon, self.seed
        );
        for e in &self.events {
            let _ = writeln!(out, "{} {}", e.time, e.node);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let fields = header
            .strip_prefix(MAGIC)
            .ok_or_else(|| parse_err(1, format!("header must start with `{MAGIC}`")))?;
        let (mut n, mut horizon, mut seed, mut fingerprint) = (None, None, None, None);
        for kv in fields.split_whitespace() {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(1, format!("bad header field `{kv}`")))?;
            let bad = |_| parse_err(1, format!("bad value for `{key}`"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "horizon" => horizon = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                "fingerprint" => {
                    fingerprint = Some(if value == "-" {
                        String::new()
                    } else {
                        value.to_string()
                    })
                }
                _ => return Err(parse_err(1, format!("unknown header field `{key}`"))),
            }
        }
        let n = n.ok_or_else(|| parse_err(1, "missing n"))?;
        let horizon = horizon.ok_or_else(|| parse_err(1, "missing horizon"))?;
        let mut events = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(t), Some(node), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(line_no, "expected `time node`"));
            };
            let time: f64 = t
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad time `{t}`")))?;
            let node: usize = node
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad node `{node}`")))?;
            let e = Event { time, node };
            if let Some(prev) = events.last() {
                if event_order(prev, &e) != std::cmp::Ordering::Less {
                    return Err(parse_err(line_no, "events not strictly sorted"));
                }
            }
            events.push(e);
        }
        let log = EventLog::new(n, horizon, events)?;
        Ok(log.with_provenance(seed.unwrap_or(0), fingerprint.unwrap_or_default()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
