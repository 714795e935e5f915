//! Structured results for empirical inequality checks.

use serde::Serialize;
use std::collections::BTreeMap;

/// One checked inequality `lhs <= C * rhs`, with whatever side data the
/// check wants to attach. `ratio` is `lhs / rhs`, absent when the right
/// side degenerates to zero (then `degenerate` is set and the check is
/// only meaningful if `lhs` is zero too).
#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub degenerate: bool,
    pub params: BTreeMap<String, String>,
}

impl InequalityReport {
    pub fn new(name: &str, lhs: f64, rhs: f64) -> InequalityReport {
        let degenerate = rhs == 0.0;
        InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            ratio: if degenerate { None } else { Some(lhs / rhs) },
            degenerate,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> InequalityReport {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// The observed constant, treating a 0/0 check as constant zero.
    pub fn constant(&self) -> f64 {
        match self.ratio {
            Some(r) => r,
            None => {
                if self.lhs == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}
