//! Deterministic tabular reports.
//!
//! Every experiment emits a [`Report`]: a resolved-configuration header, a
//! column list and stringly-typed rows. Rendering is byte-deterministic:
//! rationals print as `num/den`, floats with 15 significant digits, rows are
//! emitted in the order given (callers sort them before constructing the
//! report).

use serde::Serialize;

use crate::prob::Prob;

/// Formats with 15 significant digits in scientific notation.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.14e}")
}

/// Renders a probability-like value for a report cell.
pub fn fmt_prob(p: &Prob) -> String {
    p.render()
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    /// Fully resolved run configuration, including the seed.
    pub config: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(config: serde_json::Value, columns: &[&str], rows: Vec<Vec<String>>) -> Report {
        for row in &rows {
            debug_assert_eq!(row.len(), columns.len());
        }
        Report {
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }

    /// CSV with a single `# config: ...` comment line in front.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# config: ");
        out.push_str(&self.config.to_string());
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
