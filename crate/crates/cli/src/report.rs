//! Line-oriented run reports.
//!
//! Every line is `key=value`. A table is a `table.<name>=<columns>` header
//! followed by `table.<name>.row=` lines with comma-separated cells, and a
//! matrix is one `<key>.row.<i>=` line per row. The report ends with a
//! machine-readable summary block. Given the same configuration and seed
//! the emitted bytes are identical except for the timestamp line.

use privmoment::SymMat;
use std::fmt::Display;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Report {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut r = Report { lines: Vec::new() };
        r.kv("format", "privmoment-report-v1");
        r.kv("command", command);
        r.kv("timestamp", now);
        r.kv("seed", seed);
        r
    }

    pub fn kv(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key}={value}"));
    }

    pub fn table(&mut self, name: &str, columns: &[&str]) {
        self.lines.push(format!("table.{name}={}", columns.join(",")));
    }

    pub fn row(&mut self, name: &str, cells: &[String]) {
        self.lines.push(format!("table.{name}.row={}", cells.join(",")));
    }

    pub fn matrix(&mut self, key: &str, m: &SymMat) {
        for i in 0..m.dim() {
            let cells: Vec<String> = (0..m.dim()).map(|j| m.get(i, j).to_string()).collect();
            self.lines.push(format!("{key}.row.{i}={}", cells.join(",")));
        }
    }

    /// Appends the summary block and returns the report text with the exit
    /// code it encodes.
    pub fn finish(mut self, status: &str, exit: u8) -> (String, u8) {
        self.kv("summary.status", status);
        self.kv("summary.exit", exit);
        let mut text = self.lines.join("\n");
        text.push('\n');
        (text, exit)
    }
}

/// Writes the report to `out`, or to stdout when no path is given.
pub fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            use std::io::Write as _;
            std::io::stdout().write_all(text.as_bytes())
        }
    }
}
