//! Check verdicts and the JSON report bundle.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tolerances::Tolerances;

pub const REPORT_FORMAT: &str = "ricci-lab report v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Skipped,
    Unconverged,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Skipped => "SKIPPED",
            Verdict::Unconverged => "UNCONVERGED",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

/// One inequality `lhs ≥ rhs` or `lhs ≤ rhs`, with margin measured so that
/// nonnegative means satisfied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub label: String,
    #[serde(with = "nullable")]
    pub lhs: f64,
    pub relation: Relation,
    #[serde(with = "nullable")]
    pub rhs: f64,
    pub tolerance: f64,
    #[serde(with = "nullable")]
    pub margin: f64,
    pub verdict: Verdict,
}

impl Assertion {
    pub fn new(label: impl Into<String>, lhs: f64, relation: Relation, rhs: f64, tolerance: f64) -> Self {
        let margin = match relation {
            Relation::Ge => lhs - rhs,
            Relation::Le => rhs - lhs,
        };
        let verdict = if margin >= -tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Assertion {
            label: label.into(),
            lhs,
            relation,
            rhs,
            tolerance,
            margin,
            verdict,
        }
    }

    pub fn ge(label: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Assertion::new(label, lhs, Relation::Ge, rhs, tolerance)
    }

    pub fn le(label: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Assertion::new(label, lhs, Relation::Le, rhs, tolerance)
    }

    /// A passing assertion that rests on an unconverged solve is downgraded.
    pub fn converged(mut self, converged: bool) -> Self {
        if !converged && self.verdict == Verdict::Pass {
            self.verdict = Verdict::Unconverged;
        }
        self
    }
}

/// A constant used by a check, with where its value comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantUse {
    pub name: String,
    pub value: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Set on failures so the run can be replayed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_hash: Option<String>,
    pub assertions: Vec<Assertion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constants: Vec<ConstantUse>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Auxiliary numbers (diagnostics, tables) keyed by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, serde_json::Value>,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        CheckReport {
            name: name.to_string(),
            verdict: Verdict::Pass,
            reason: None,
            input_hash: None,
            assertions: Vec::new(),
            constants: Vec::new(),
            notes: Vec::new(),
            data: BTreeMap::new(),
        }
    }

    pub fn skipped(name: &str, reason: impl Into<String>) -> Self {
        CheckReport {
            verdict: Verdict::Skipped,
            reason: Some(reason.into()),
            ..CheckReport::new(name)
        }
    }

    pub fn failed(name: &str, reason: impl Into<String>) -> Self {
        CheckReport {
            verdict: Verdict::Fail,
            reason: Some(reason.into()),
            ..CheckReport::new(name)
        }
    }

    pub fn push(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn constant(&mut self, name: &str, value: f64, provenance: &str) {
        self.constants.push(ConstantUse {
            name: name.into(),
            value,
            provenance: provenance.into(),
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn datum(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.data.insert(key.into(), v);
    }

    /// Folds assertion verdicts into the check verdict. A check that was
    /// skipped or failed outright keeps its verdict.
    pub fn finish(mut self, input_hash: &str) -> Self {
        if self.reason.is_none() || self.verdict == Verdict::Pass {
            self.verdict = self
                .assertions
                .iter()
                .map(|a| a.verdict)
                .max()
                .unwrap_or(Verdict::Pass);
        }
        if self.verdict == Verdict::Fail {
            self.input_hash = Some(input_hash.to_string());
        }
        self
    }

    pub fn worst_margin(&self) -> Option<f64> {
        self.assertions
            .iter()
            .map(|a| a.margin + a.tolerance)
            .min_by(|a, b| a.total_cmp(b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub scenario: String,
    pub input_hash: String,
    pub seed: u64,
    pub tolerance_profile: String,
    pub tolerances: Tolerances,
    /// Conventions the numbers are reported in.
    pub conventions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fault_inject: Vec<String>,
    pub verdict: Verdict,
    pub checks: Vec<CheckReport>,
}

impl Report {
    pub fn overall(checks: &[CheckReport]) -> Verdict {
        checks
            .iter()
            .map(|c| c.verdict)
            .filter(|v| *v != Verdict::Skipped)
            .max()
            .unwrap_or(Verdict::Skipped)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = format!("{} [{}] {}\n", self.scenario, &self.input_hash[..12.min(self.input_hash.len())], self.verdict);
        for c in &self.checks {
            let margin = c
                .worst_margin()
                .map(|m| format!(" worst margin {m:+.3e}"))
                .unwrap_or_default();
            let reason = c.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default();
            out.push_str(&format!("  {:<24} {:<11}{margin}{reason}\n", c.name, c.verdict.to_string()));
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Non-finite numbers are written as `null` and read back as NaN.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
