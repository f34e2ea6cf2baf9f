use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Reported without an asserted threshold.
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub test: String,
    pub statistic: f64,
    pub threshold: Option<f64>,
    pub outcome: Outcome,
    pub sample_sizes: BTreeMap<String, u64>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl Verdict {
    /// Passes iff `statistic < threshold`.
    pub fn below(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        let outcome = if statistic < threshold { Outcome::Pass } else { Outcome::Fail };
        Verdict {
            test: test.into(),
            statistic,
            threshold: Some(threshold),
            outcome,
            sample_sizes: BTreeMap::new(),
            seeds: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn exploratory(test: impl Into<String>, statistic: f64) -> Self {
        Verdict {
            test: test.into(),
            statistic,
            threshold: None,
            outcome: Outcome::Exploratory,
            sample_sizes: BTreeMap::new(),
            seeds: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn with_outcome(mut self, outcome: Outcome) -> Self {
        self.outcome = outcome;
        self
    }

    pub fn sample(mut self, name: impl Into<String>, size: u64) -> Self {
        self.sample_sizes.insert(name.into(), size);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seeds.push(seed);
        self
    }

    pub fn detail(mut self, key: impl Into<String>, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.details.insert(key.into(), v);
        self
    }

    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub schema_version: u32,
    pub verdicts: Vec<Verdict>,
}

impl Default for VerdictReport {
    fn default() -> Self {
        VerdictReport { schema_version: REPORT_SCHEMA_VERSION, verdicts: Vec::new() }
    }
}

impl VerdictReport {
    pub fn push(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn all_passed(&self) -> bool {
        !self.verdicts.iter().any(Verdict::failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut r = VerdictReport::default();
        r.push(Verdict::below("ks", 0.01, 0.016).sample("endpoints", 10_000).seed(7));
        r.push(Verdict::exploratory("llt", 0.7).detail("n", 10_000));
        assert!(r.all_passed());
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"schema_version\":1"));
        assert!(text.contains("\"outcome\":\"exploratory\""));
        let back: VerdictReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        r.push(Verdict::below("x", 2.0, 1.0));
        assert!(!r.all_passed());
    }
}
