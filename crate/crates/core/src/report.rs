//! Report containers shared by the acceptance tests and the command-line driver.

use serde::{Deserialize, Serialize};

/// Grid metadata carried by every report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub n: usize,
    pub h: Option<f64>,
    pub tau: Option<f64>,
    pub amplitude: Option<f64>,
    pub operator: String,
}

impl Meta {
    pub fn geometry(n: usize) -> Self {
        Self { n, h: None, tau: None, amplitude: None, operator: String::new() }
    }

    pub fn grid(n: usize, h: f64, tau: f64, amplitude: Option<f64>, operator: impl Into<String>) -> Self {
        Self { n, h: Some(h), tau: Some(tau), amplitude, operator: operator.into() }
    }

    fn cells(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![self.n.to_string(), opt(self.h), opt(self.tau), opt(self.amplitude), self.operator.clone()]
    }
}

pub const META_COLUMNS: [&str; 5] = ["n", "h", "tau", "amplitude", "operator"];

/// A CSV-shaped table; the first five columns are [`META_COLUMNS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        let columns = META_COLUMNS.iter().chain(columns).map(|s| s.to_string()).collect();
        Self { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, meta: &Meta, cells: Vec<String>) {
        let mut row = meta.cells();
        row.extend(cells);
        debug_assert_eq!(row.len(), self.columns.len(), "table {}", self.name);
        self.rows.push(row);
    }
}

/// Shorthand for building a row of display strings.
#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { vec![$(($x).to_string()),*] };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// One-line summary of the measured quantities.
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {} [{}] {}: {} ({:.1}s of {:.0}s)",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail,
            self.seconds,
            self.limit_seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub criteria: Vec<CriterionResult>,
    pub tables: Vec<Table>,
    /// Suite-specific JSON payload (schedule, ledger, ...).
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        Self { suite: suite.into(), criteria: Vec::new(), tables: Vec::new(), extra: Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn merge(&mut self, other: SuiteReport) {
        self.criteria.extend(other.criteria);
        self.tables.extend(other.tables);
        self.extra.extend(other.extra);
    }
}
