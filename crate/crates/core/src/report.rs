//! Machine-readable run reports and their human-readable summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::Result;

pub const TOOL: &str = "ttlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How a criterion value is held against its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Passes when `value ≤ tolerance`.
    AtMost,
    /// Passes when `value ≥ tolerance`.
    AtLeast,
    /// A yes/no check; `value` is 1 when it holds.
    Holds,
}

/// One acceptance criterion evaluated on one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    /// Criterion identifier such as `C5`.
    pub id: String,
    pub name: String,
    /// What was measured, e.g. a metric name or `a vs b`.
    pub subject: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

impl Criterion {
    pub fn at_most(id: &str, name: &str, subject: &str, value: f64, tolerance: f64) -> Self {
        Self::new(
            id,
            name,
            subject,
            value,
            tolerance,
            Comparison::AtMost,
            value <= tolerance,
        )
    }

    pub fn at_least(id: &str, name: &str, subject: &str, value: f64, tolerance: f64) -> Self {
        Self::new(
            id,
            name,
            subject,
            value,
            tolerance,
            Comparison::AtLeast,
            value >= tolerance,
        )
    }

    pub fn holds(id: &str, name: &str, subject: &str, ok: bool) -> Self {
        Self::new(
            id,
            name,
            subject,
            if ok { 1.0 } else { 0.0 },
            1.0,
            Comparison::Holds,
            ok,
        )
    }

    fn new(
        id: &str,
        name: &str,
        subject: &str,
        value: f64,
        tolerance: f64,
        comparison: Comparison,
        passed: bool,
    ) -> Self {
        Criterion {
            id: id.into(),
            name: name.into(),
            subject: subject.into(),
            value,
            tolerance,
            comparison,
            // NaN fails every comparison above, so a broken measurement
            // never passes.
            passed,
        }
    }

    /// `[PASS] C5 exit times (euclidean): 3.1e-9 <= 1e-5`.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let bound = match self.comparison {
            Comparison::AtMost => format!("{:.4e} <= {:.1e}", self.value, self.tolerance),
            Comparison::AtLeast => format!("{:.4e} >= {:.1e}", self.value, self.tolerance),
            Comparison::Holds => (if self.passed { "holds" } else { "violated" }).to_string(),
        };
        format!(
            "[{verdict}] {} {} ({}): {bound}",
            self.id, self.name, self.subject
        )
    }
}

/// Hex SHA-256 of the canonical configuration JSON.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex_sha256(cfg.canonical_json().as_bytes())
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub criteria: Vec<Criterion>,
    /// Measured quantities by name, including correspondence tables, lens
    /// data and sweep curves.
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config_hash: config_hash(cfg),
            config: cfg.clone(),
            criteria: Vec::new(),
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
            passed: true,
        }
    }

    pub fn criterion(&mut self, c: Criterion) {
        self.passed &= c.passed;
        self.criteria.push(c);
    }

    pub fn criteria(&mut self, cs: impl IntoIterator<Item = Criterion>) {
        for c in cs {
            self.criterion(c);
        }
    }

    pub fn metric(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report metrics serialise");
        self.metrics.insert(name.into(), v);
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// A fixed-width table of the criteria and the scalar metrics.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{TOOL} {VERSION} {}  config {}\n",
            self.command,
            &self.config_hash[..12]
        );
        if !self.criteria.is_empty() {
            let _ = writeln!(
                out,
                "{:<5} {:<34} {:<28} {:>12} {:>10}  result",
                "id", "criterion", "subject", "value", "tolerance"
            );
            for c in &self.criteria {
                let _ = writeln!(
                    out,
                    "{:<5} {:<34} {:<28} {:>12.4e} {:>10.1e}  {}",
                    c.id,
                    c.name,
                    c.subject,
                    c.value,
                    c.tolerance,
                    if c.passed { "PASS" } else { "FAIL" }
                );
            }
        }
        for (k, v) in &self.metrics {
            if let Some(x) = v.as_f64() {
                let _ = writeln!(out, "{k:<40} {x:.6e}");
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.passed { "PASS" } else { "FAIL" }
        );
        out
    }
}
