//! CSV tables and the plain-text report.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use langevin_core::report::CheckLine;

/// Round-trip-exact rendering (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| num(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub scenario: String,
    pub command: String,
    sections: Vec<(String, Vec<(String, String)>)>,
    pub checks: Vec<CheckLine>,
}

impl Report {
    pub fn new(scenario: &str, command: &str) -> Self {
        Report { scenario: scenario.to_string(), command: command.to_string(), ..Default::default() }
    }

    pub fn info(&mut self, section: &str, key: &str, value: impl ToString) {
        let v = value.to_string();
        match self.sections.iter_mut().find(|(n, _)| n == section) {
            Some((_, e)) => e.push((key.to_string(), v)),
            None => self.sections.push((section.to_string(), vec![(key.to_string(), v)])),
        }
    }

    pub fn check(&mut self, c: CheckLine) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "command = {}", self.command);
        for (name, entries) in &self.sections {
            if entries.is_empty() {
                continue;
            }
            let _ = writeln!(s, "\n[{name}]");
            for (k, v) in entries {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        if !self.checks.is_empty() {
            s.push_str("\n[checks]\n");
            for c in &self.checks {
                let _ = writeln!(s, "{c}");
            }
            let _ = writeln!(s, "result = {}", if self.passed() { "PASS" } else { "FAIL" });
        }
        s
    }

    /// Report preceded by a generation timestamp; the only non-reproducible artifact.
    pub fn summary(&self) -> String {
        format!("# generated {}\n{}", humantime::format_rfc3339_seconds(std::time::SystemTime::now()), self.render())
    }
}
