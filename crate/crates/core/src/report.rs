//! Premise/conclusion bookkeeping shared by every checker.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    /// Boolean check; `value` and `bound` are informational.
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckRecord {
    /// `value <= bound + tol`.
    pub fn le(name: impl Into<String>, value: f64, bound: f64, tol: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value,
            bound,
            relation: Relation::Le,
            holds: value <= bound + tol,
            detail: String::new(),
        }
    }

    pub fn lt(name: impl Into<String>, value: f64, bound: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value,
            bound,
            relation: Relation::Lt,
            holds: value < bound,
            detail: String::new(),
        }
    }

    /// `value >= bound - tol`.
    pub fn ge(name: impl Into<String>, value: f64, bound: f64, tol: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value,
            bound,
            relation: Relation::Ge,
            holds: value >= bound - tol,
            detail: String::new(),
        }
    }

    pub fn gt(name: impl Into<String>, value: f64, bound: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value,
            bound,
            relation: Relation::Gt,
            holds: value > bound,
            detail: String::new(),
        }
    }

    /// `|value - bound| <= tol`.
    pub fn eq(name: impl Into<String>, value: f64, bound: f64, tol: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value,
            bound,
            relation: Relation::Eq,
            holds: (value - bound).abs() <= tol,
            detail: String::new(),
        }
    }

    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        CheckRecord {
            name: name.into(),
            value: if holds { 1.0 } else { 0.0 },
            bound: 1.0,
            relation: Relation::Holds,
            holds,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    PremiseViolated,
    ConclusionViolated,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::PremiseViolated => 2,
            Outcome::ConclusionViolated => 3,
        }
    }

    /// Premise failures dominate conclusion failures.
    pub fn combine(self, other: Outcome) -> Outcome {
        use Outcome::*;
        match (self, other) {
            (PremiseViolated, _) | (_, PremiseViolated) => PremiseViolated,
            (ConclusionViolated, _) | (_, ConclusionViolated) => ConclusionViolated,
            _ => Pass,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub premises: Vec<CheckRecord>,
    pub conclusions: Vec<CheckRecord>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn premise(&mut self, record: CheckRecord) -> &mut Self {
        self.premises.push(record);
        self
    }

    pub fn conclusion(&mut self, record: CheckRecord) -> &mut Self {
        self.conclusions.push(record);
        self
    }

    pub fn premises_hold(&self) -> bool {
        self.premises.iter().all(|c| c.holds)
    }

    pub fn conclusions_hold(&self) -> bool {
        self.conclusions.iter().all(|c| c.holds)
    }

    pub fn outcome(&self) -> Outcome {
        if !self.premises_hold() {
            Outcome::PremiseViolated
        } else if !self.conclusions_hold() {
            Outcome::ConclusionViolated
        } else {
            Outcome::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome() == Outcome::Pass
    }

    pub fn failed_premises(&self) -> impl Iterator<Item = &CheckRecord> {
        self.premises.iter().filter(|c| !c.holds)
    }

    pub fn failed_conclusions(&self) -> impl Iterator<Item = &CheckRecord> {
        self.conclusions.iter().filter(|c| !c.holds)
    }

    pub fn find(&self, name: &str) -> Option<&CheckRecord> {
        self.premises
            .iter()
            .chain(&self.conclusions)
            .find(|c| c.name == name)
    }

    /// Append another report's records, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut c in other.premises {
            c.name = format!("{prefix}{}", c.name);
            self.premises.push(c);
        }
        for mut c in other.conclusions {
            c.name = format!("{prefix}{}", c.name);
            self.conclusions.push(c);
        }
    }
}
