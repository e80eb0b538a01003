use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CellKey, Exam, SpecificationMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub cell: CellKey,
    pub required: u32,
    pub found: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub compliant: bool,
    pub violations: Vec<Violation>,
    /// Matching cells over required cells plus any spurious cells.
    pub rate: f64,
}

/// Counts items per (topic, section, level) and compares against the matrix.
///
/// Items whose topic is unknown to the matrix, or that land in a cell the
/// matrix does not require, are violations with `required = 0`. Such a
/// spurious cell also joins the rate denominator, which otherwise counts
/// only cells with a positive requirement.
pub fn validate_exam(exam: &Exam, matrix: &SpecificationMatrix) -> ComplianceReport {
    let mut counts: BTreeMap<CellKey, u32> = BTreeMap::new();
    for item in &exam.items {
        let key = CellKey { topic: item.topic.clone(), section: item.section(), level: item.level };
        *counts.entry(key).or_default() += 1;
    }

    let mut violations = Vec::new();
    let mut considered = 0usize;
    let mut matched = 0usize;
    for (key, required) in matrix.positive_cells() {
        considered += 1;
        let found = counts.get(key).copied().unwrap_or(0);
        if found == required {
            matched += 1;
        } else {
            violations.push(Violation { cell: key.clone(), required, found });
        }
    }
    for (key, &found) in &counts {
        if matrix.required(key) == 0 {
            considered += 1;
            violations.push(Violation { cell: key.clone(), required: 0, found });
        }
    }

    let rate = if considered == 0 { 0.0 } else { matched as f64 / considered as f64 };
    ComplianceReport { compliant: violations.is_empty(), violations, rate }
}

/// Mean compliance rate over a batch.
pub fn mean_compliance_rate(exams: &[Exam], matrix: &SpecificationMatrix) -> Option<f64> {
    if exams.is_empty() {
        return None;
    }
    Some(exams.iter().map(|e| validate_exam(e, matrix).rate).sum::<f64>() / exams.len() as f64)
}
