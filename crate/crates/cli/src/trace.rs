//! JSON-lines trace files: a header line, one line per transition, and a
//! final line with the digest of the replica states.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use mrdt_core::{Configuration, Mode, Transition};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub spec_name: String,
    pub seed: u64,
    pub alphabet: String,
    pub mode: Mode,
    /// Fuzz iteration that produced the trace, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub transition: Transition,
    /// Free-form name for the event or version the step creates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Step {
    pub fn new(transition: Transition) -> Step {
        Step {
            transition,
            label: None,
        }
    }

    pub fn labelled(transition: Transition, label: &str) -> Step {
        Step {
            transition,
            label: Some(label.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<Step>,
    pub digest: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct DigestLine {
    digest: String,
}

impl Trace {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.header).expect("header serializes"));
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        if let Some(d) = &self.digest {
            let line = DigestLine { digest: d.clone() };
            out.push_str(&serde_json::to_string(&line).unwrap());
            out.push('\n');
        }
        out
    }

    /// Parses a complete trace. A missing digest line means the file was
    /// cut short and is an error.
    pub fn parse(text: &str) -> anyhow::Result<Trace> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().context("empty trace")?;
        let header: TraceHeader = serde_json::from_str(first).context("line 1: bad trace header")?;
        let mut steps = Vec::new();
        let mut digest = None;
        for (i, line) in lines {
            if digest.is_some() {
                bail!("line {}: content after the digest line", i + 1);
            }
            let v: serde_json::Value =
                serde_json::from_str(line).with_context(|| format!("line {}: not JSON", i + 1))?;
            if v.get("digest").is_some() {
                let d: DigestLine = serde_json::from_value(v).with_context(|| format!("line {}", i + 1))?;
                digest = Some(d.digest);
            } else {
                let s: Step = serde_json::from_value(v).with_context(|| format!("line {}: bad transition", i + 1))?;
                steps.push(s);
            }
        }
        if digest.is_none() {
            bail!("trace is truncated: no digest line");
        }
        Ok(Trace { header, steps, digest })
    }

    pub fn read(path: &Path) -> anyhow::Result<Trace> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Trace::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.steps.iter().map(|s| &s.transition)
    }
}

/// SHA-256 over the head state of every active replica, in replica order.
pub fn state_digest(c: &Configuration) -> String {
    let mut text = String::new();
    for (r, v) in c.heads() {
        let state = &c.version(*v).expect("head exists").state;
        let _ = writeln!(text, "{r} {}", serde_json::to_string(state).expect("state serializes"));
    }
    hex::encode(Sha256::digest(text.as_bytes()))
}
