//! CSV emission helpers. Numbers carry 17 significant digits so doubles
//! round-trip exactly.

use std::fmt::Write as _;

use crate::tower::{SignedTower, Tower};

pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Towers print as plain numbers below the first level, else `exp^L(top)`.
pub fn tower(t: &Tower) -> String {
    if t.level() == 0 {
        num(t.top())
    } else {
        format!("exp^{}({})", t.level(), num(t.top()))
    }
}

pub fn signed_tower(t: &SignedTower) -> String {
    if t.negative {
        format!("-{}", tower(&t.magnitude))
    } else {
        tower(&t.magnitude)
    }
}

/// Minimal table builder: fixed header, rows of preformatted cells.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    body: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), body: String::new() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.header.len(), "row width does not match header");
        let _ = writeln!(self.body, "{}", cells.join(","));
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }
}
