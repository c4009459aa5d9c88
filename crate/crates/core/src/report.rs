//! Pass/fail lines shared by the validators and the CLI summary.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl CheckLine {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckLine { name: name.into(), value, threshold, relation: Relation::AtMost, pass: value <= threshold }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckLine { name: name.into(), value, threshold, relation: Relation::AtLeast, pass: value >= threshold }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        write!(
            f,
            "{} value={:.6e} {} {:.6e} {}",
            self.name,
            self.value,
            op,
            self.threshold,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}
