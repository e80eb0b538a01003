//! Exam blueprint: sections, cognitive levels and the specification matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExamError;

/// Cognitive demand tier of an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CognitiveLevel {
    Recognition = 1,
    Comprehension = 2,
    Application = 3,
}

impl CognitiveLevel {
    pub const ALL: [CognitiveLevel; 3] = [
        CognitiveLevel::Recognition,
        CognitiveLevel::Comprehension,
        CognitiveLevel::Application,
    ];

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            CognitiveLevel::Recognition => "Recognition",
            CognitiveLevel::Comprehension => "Comprehension",
            CognitiveLevel::Application => "Application",
        }
    }
}

impl TryFrom<u8> for CognitiveLevel {
    type Error = ExamError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(CognitiveLevel::Recognition),
            2 => Ok(CognitiveLevel::Comprehension),
            3 => Ok(CognitiveLevel::Application),
            other => Err(ExamError::InvalidArgument(format!("cognitive level {other} is not in 1..=3"))),
        }
    }
}

impl From<CognitiveLevel> for u8 {
    fn from(level: CognitiveLevel) -> u8 {
        level.as_u8()
    }
}

impl fmt::Display for CognitiveLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Exam section. Each section has exactly one item format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Section {
    I,
    II,
    III,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::I, Section::II, Section::III];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::I => "I",
            Section::II => "II",
            Section::III => "III",
        }
    }

    /// Probability that a zero-mastery candidate answers a unit of this
    /// section correctly by guessing (per choice for I, per statement for II).
    pub fn guess_floor(self) -> f64 {
        match self {
            Section::I => 0.25,
            Section::II => 0.5,
            Section::III => 0.0,
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Section {
    type Err = ExamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" => Ok(Section::I),
            "II" => Ok(Section::II),
            "III" => Ok(Section::III),
            other => Err(ExamError::InvalidArgument(format!("unknown section tag `{other}`"))),
        }
    }
}

/// Key of one blueprint cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub topic: String,
    pub section: Section,
    pub level: CognitiveLevel,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.topic, self.section, self.level.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub topic: String,
    pub section: Section,
    pub level: CognitiveLevel,
    pub count: u32,
}

/// Fixed per-section item totals a matrix must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionTotals {
    #[serde(rename = "I")]
    pub section_i: u32,
    #[serde(rename = "II")]
    pub section_ii: u32,
    #[serde(rename = "III")]
    pub section_iii: u32,
}

impl SectionTotals {
    /// The 2025 layout: 12 multiple choice, 4 true/false groups, 6 short answers.
    pub const PROFILE_2025: SectionTotals = SectionTotals { section_i: 12, section_ii: 4, section_iii: 6 };

    pub fn get(&self, section: Section) -> u32 {
        match section {
            Section::I => self.section_i,
            Section::II => self.section_ii,
            Section::III => self.section_iii,
        }
    }

    pub fn total(&self) -> u32 {
        self.section_i + self.section_ii + self.section_iii
    }
}

/// On-disk form of a matrix; converted through [`SpecificationMatrix::new`]
/// so the invariants are checked on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixDocument {
    profile: String,
    totals: SectionTotals,
    topics: Vec<String>,
    cells: Vec<MatrixCell>,
}

/// Blueprint mapping (topic, section, level) to a required item count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDocument", into = "MatrixDocument")]
pub struct SpecificationMatrix {
    profile: String,
    totals: SectionTotals,
    topics: Vec<String>,
    cells: BTreeMap<CellKey, u32>,
}

impl SpecificationMatrix {
    pub fn new(
        profile: impl Into<String>,
        totals: SectionTotals,
        topics: Vec<String>,
        cells: impl IntoIterator<Item = MatrixCell>,
    ) -> Result<Self, ExamError> {
        let mut map = BTreeMap::new();
        for cell in cells {
            if !topics.contains(&cell.topic) {
                return Err(ExamError::InvalidMatrix(format!("cell topic `{}` is not listed in topics", cell.topic)));
            }
            let key = CellKey { topic: cell.topic, section: cell.section, level: cell.level };
            if map.insert(key.clone(), cell.count).is_some() {
                return Err(ExamError::InvalidMatrix(format!("duplicate cell {key}")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &topics {
            if !seen.insert(t) {
                return Err(ExamError::InvalidMatrix(format!("duplicate topic `{t}`")));
            }
        }
        let matrix = SpecificationMatrix { profile: profile.into(), totals, topics, cells: map };
        for section in Section::ALL {
            let found = matrix.section_total(section);
            if found != totals.get(section) {
                return Err(ExamError::InvalidMatrix(format!(
                    "section {section} requires {} items but cells sum to {found}",
                    totals.get(section)
                )));
            }
        }
        if matrix.cells.values().all(|&c| c == 0) {
            return Err(ExamError::InvalidMatrix("matrix has no cell with a positive count".into()));
        }
        Ok(matrix)
    }

    pub fn from_json(text: &str) -> Result<Self, ExamError> {
        serde_json::from_str(text).map_err(|e| ExamError::InvalidMatrix(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matrix serializes");
        s.push('\n');
        s
    }

    pub fn profile(&self) -> &str {
        &self.profile
    }

    pub fn totals(&self) -> SectionTotals {
        self.totals
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    /// 1-based topic code used in question ids.
    pub fn topic_code(&self, topic: &str) -> Option<u32> {
        self.topics.iter().position(|t| t == topic).map(|i| i as u32 + 1)
    }

    pub fn topic_by_code(&self, code: u32) -> Option<&str> {
        code.checked_sub(1).and_then(|i| self.topics.get(i as usize)).map(String::as_str)
    }

    pub fn required(&self, key: &CellKey) -> u32 {
        self.cells.get(key).copied().unwrap_or(0)
    }

    /// Cells in canonical order: topic order, then section, then level.
    pub fn cells(&self) -> Vec<MatrixCell> {
        let mut out: Vec<MatrixCell> = self
            .cells
            .iter()
            .map(|(k, &count)| MatrixCell { topic: k.topic.clone(), section: k.section, level: k.level, count })
            .collect();
        out.sort_by_key(|c| (c.section, self.topic_code(&c.topic), c.level));
        out
    }

    pub fn positive_cells(&self) -> impl Iterator<Item = (&CellKey, u32)> {
        self.cells.iter().filter(|(_, &c)| c > 0).map(|(k, &c)| (k, c))
    }

    pub fn section_total(&self, section: Section) -> u32 {
        self.cells.iter().filter(|(k, _)| k.section == section).map(|(_, &c)| c).sum()
    }
}

impl TryFrom<MatrixDocument> for SpecificationMatrix {
    type Error = ExamError;

    fn try_from(doc: MatrixDocument) -> Result<Self, Self::Error> {
        SpecificationMatrix::new(doc.profile, doc.totals, doc.topics, doc.cells)
    }
}

impl From<SpecificationMatrix> for MatrixDocument {
    fn from(m: SpecificationMatrix) -> Self {
        let cells = m.cells();
        MatrixDocument { profile: m.profile, totals: m.totals, topics: m.topics, cells }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SpecificationMatrix {
        SpecificationMatrix::new(
            "tiny",
            SectionTotals { section_i: 2, section_ii: 1, section_iii: 0 },
            vec!["a".into(), "b".into()],
            vec![
                MatrixCell { topic: "a".into(), section: Section::I, level: CognitiveLevel::Recognition, count: 2 },
                MatrixCell { topic: "b".into(), section: Section::II, level: CognitiveLevel::Comprehension, count: 1 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn level_order() {
        assert!(CognitiveLevel::Recognition < CognitiveLevel::Comprehension);
        assert!(CognitiveLevel::Comprehension < CognitiveLevel::Application);
        assert!(CognitiveLevel::try_from(4).is_err());
    }

    #[test]
    fn section_totals_enforced() {
        let err = SpecificationMatrix::new(
            "bad",
            SectionTotals { section_i: 3, section_ii: 1, section_iii: 0 },
            vec!["a".into()],
            vec![MatrixCell { topic: "a".into(), section: Section::I, level: CognitiveLevel::Recognition, count: 2 }],
        );
        assert!(err.is_err());
    }

    #[test]
    fn unknown_topic_rejected() {
        let err = SpecificationMatrix::new(
            "bad",
            SectionTotals { section_i: 1, section_ii: 0, section_iii: 0 },
            vec!["a".into()],
            vec![MatrixCell { topic: "zz".into(), section: Section::I, level: CognitiveLevel::Recognition, count: 1 }],
        );
        assert!(matches!(err, Err(ExamError::InvalidMatrix(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = tiny();
        let back = SpecificationMatrix::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.topic_code("b"), Some(2));
        assert_eq!(back.topic_by_code(1), Some("a"));
        assert_eq!(back.topic_by_code(0), None);
    }
}
