use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;

/// One executed check. Deterministic checks leave `N` and `std_error` null.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub generator_kind: Option<String>,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_samples: Option<usize>,
    pub seed: u64,
    pub value: f64,
    pub reference: f64,
    pub std_error: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Everything a command produced. The wall-clock duration is kept out of
/// the serialized form so that reports of identical runs are identical.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
    pub summary: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub duration: Duration,
}

impl RunReport {
    pub fn new(command: &str, config_digest: String, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_digest,
            seed,
            pass: true,
            checks: Vec::new(),
            summary: BTreeMap::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
            duration: Duration::ZERO,
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        debug_assert!(
            self.checks.iter().all(|c| c.check != check.check),
            "check {} recorded twice",
            check.check
        );
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}
