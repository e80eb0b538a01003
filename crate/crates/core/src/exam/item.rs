use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CognitiveLevel, ExamError, Section};

/// `<topic>_<section>_<level>` with an optional `_<seq>` suffix for seq > 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuestionId {
    pub topic_code: u32,
    pub section: Section,
    pub level: CognitiveLevel,
    pub seq: u32,
}

impl QuestionId {
    pub fn new(topic_code: u32, section: Section, level: CognitiveLevel, seq: u32) -> Result<Self, ExamError> {
        if topic_code < 1 {
            return Err(ExamError::InvalidArgument("topic code must be at least 1".into()));
        }
        Ok(QuestionId { topic_code, section, level, seq })
    }
}

/// Builds a question id; `topic_code` is signed so callers passing raw input
/// get an error rather than a wrap-around.
pub fn make_question_id(topic_code: i64, section: Section, level: CognitiveLevel, seq: u32) -> Result<QuestionId, ExamError> {
    let code = u32::try_from(topic_code)
        .map_err(|_| ExamError::InvalidArgument(format!("topic code {topic_code} out of range")))?;
    QuestionId::new(code, section, level, seq)
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.topic_code, self.section, self.level)?;
        if self.seq > 0 {
            write!(f, "_{}", self.seq)?;
        }
        Ok(())
    }
}

impl FromStr for QuestionId {
    type Err = ExamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExamError::InvalidArgument(format!("malformed question id `{s}`"));
        let parts: Vec<&str> = s.split('_').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(parts[0]) || !digits(parts[2]) {
            return Err(bad());
        }
        let topic_code: u32 = parts[0].parse().map_err(|_| bad())?;
        let section: Section = parts[1].parse()?;
        let level = CognitiveLevel::try_from(parts[2].parse::<u8>().map_err(|_| bad())?)?;
        let seq = match parts.get(3) {
            Some(p) if digits(p) => {
                let seq: u32 = p.parse().map_err(|_| bad())?;
                // "_0" would not re-render identically.
                if seq == 0 || p.starts_with('0') {
                    return Err(bad());
                }
                seq
            }
            Some(_) => return Err(bad()),
            None => 0,
        };
        if parts[0].starts_with('0') {
            return Err(bad());
        }
        QuestionId::new(topic_code, section, level, seq)
    }
}

impl Serialize for QuestionId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuestionId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const CHOICE_LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

/// Format-specific item content and answer key.
#[derive(Debug, Clone, PartialEq)]
pub enum ItemBody {
    MultipleChoice { choices: [String; 4], key: usize },
    TrueFalseGroup { statements: [String; 4], key: [bool; 4] },
    ShortAnswer { key: f64, round_digits: u32 },
}

impl ItemBody {
    pub fn section(&self) -> Section {
        match self {
            ItemBody::MultipleChoice { .. } => Section::I,
            ItemBody::TrueFalseGroup { .. } => Section::II,
            ItemBody::ShortAnswer { .. } => Section::III,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ItemBody::MultipleChoice { .. } => "mcq",
            ItemBody::TrueFalseGroup { .. } => "tf",
            ItemBody::ShortAnswer { .. } => "short",
        }
    }

    /// The response that earns full points.
    pub fn key_response(&self) -> Response {
        match self {
            ItemBody::MultipleChoice { key, .. } => Response::Choice(*key),
            ItemBody::TrueFalseGroup { key, .. } => Response::TrueFalse(*key),
            ItemBody::ShortAnswer { key, .. } => Response::Numeric(*key),
        }
    }
}

/// A candidate's answer to one item. `Unanswered` always scores zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Response {
    Choice(usize),
    TrueFalse([bool; 4]),
    Numeric(f64),
    Unanswered,
}

impl Response {
    /// Renders the response in the answer-envelope syntax (`B`, `T F T T`, `3200`).
    pub fn render(&self) -> String {
        match self {
            Response::Choice(i) => CHOICE_LETTERS.get(*i).map(|c| c.to_string()).unwrap_or_else(|| "?".into()),
            Response::TrueFalse(bits) => bits.iter().map(|&b| if b { "T" } else { "F" }).collect::<Vec<_>>().join(" "),
            Response::Numeric(x) => format_number(*x),
            Response::Unanswered => "-".into(),
        }
    }
}

/// Shortest decimal rendering with at most six fractional digits.
pub fn format_number(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExamItem {
    pub id: QuestionId,
    pub topic: String,
    pub level: CognitiveLevel,
    pub stem: String,
    pub body: ItemBody,
    pub solution: String,
    pub explanation: String,
}

impl ExamItem {
    pub fn section(&self) -> Section {
        self.id.section
    }

    /// Checks the format invariants that cannot be expressed in the type.
    pub fn check(&self) -> Result<(), String> {
        if self.body.section() != self.id.section {
            return Err(format!(
                "body kind `{}` does not match section {}",
                self.body.kind(),
                self.id.section
            ));
        }
        if self.level != self.id.level {
            return Err(format!("level {} differs from id level {}", self.level, self.id.level));
        }
        match &self.body {
            ItemBody::MultipleChoice { key, .. } if *key > 3 => Err(format!("choice key {key} out of range")),
            ItemBody::ShortAnswer { key, .. } if !key.is_finite() => Err("short-answer key is not finite".into()),
            _ => Ok(()),
        }
    }

    /// Canonical text of the item as a solver sees it; also the case state text.
    pub fn render_prompt(&self) -> String {
        let mut out = format!("[{}] {}", self.id.section, self.stem);
        match &self.body {
            ItemBody::MultipleChoice { choices, .. } => {
                for (letter, c) in CHOICE_LETTERS.iter().zip(choices) {
                    out.push_str(&format!("\n{letter}. {c}"));
                }
            }
            ItemBody::TrueFalseGroup { statements, .. } => {
                for (label, st) in ['a', 'b', 'c', 'd'].iter().zip(statements) {
                    out.push_str(&format!("\n{label}) {st}"));
                }
            }
            ItemBody::ShortAnswer { round_digits, .. } => {
                out.push_str(&format!("\n(answer rounded to {round_digits} decimal places)"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Ingested,
    Fixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exam {
    pub exam_id: String,
    pub provenance: Provenance,
    pub items: Vec<ExamItem>,
    /// Human ratings carried verbatim when present; never computed here.
    pub ratings: Option<serde_json::Map<String, serde_json::Value>>,
}

impl Exam {
    pub fn new(exam_id: impl Into<String>, provenance: Provenance, items: Vec<ExamItem>) -> Self {
        Exam { exam_id: exam_id.into(), provenance, items, ratings: None }
    }

    /// Checks unique ids, section ordering and per-item format invariants.
    pub fn check(&self) -> Result<(), (usize, String)> {
        let mut seen = std::collections::HashSet::new();
        let mut last = Section::I;
        for (k, item) in self.items.iter().enumerate() {
            item.check().map_err(|e| (k, e))?;
            if !seen.insert(item.id) {
                return Err((k, format!("duplicate item id {}", item.id)));
            }
            if item.section() < last {
                return Err((k, format!("section {} item appears after section {last}", item.section())));
            }
            last = item.section();
        }
        Ok(())
    }

    pub fn item(&self, id: QuestionId) -> Option<&ExamItem> {
        self.items.iter().find(|i| i.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn appendix_ids_render() {
        let id = make_question_id(8, Section::III, CognitiveLevel::Application, 0).unwrap();
        assert_eq!(id.to_string(), "8_III_3");
        let id = make_question_id(11, Section::III, CognitiveLevel::Application, 0).unwrap();
        assert_eq!(id.to_string(), "11_III_3");
        assert_eq!("11_III_3".parse::<QuestionId>().unwrap(), id);
    }

    #[test]
    fn seq_suffix() {
        let id = QuestionId::new(3, Section::I, CognitiveLevel::Recognition, 2).unwrap();
        assert_eq!(id.to_string(), "3_I_1_2");
        assert_eq!(id.to_string().parse::<QuestionId>().unwrap(), id);
    }

    #[test]
    fn invalid_topic_code() {
        assert!(make_question_id(0, Section::I, CognitiveLevel::Recognition, 0).is_err());
        assert!(make_question_id(-4, Section::I, CognitiveLevel::Recognition, 0).is_err());
    }

    #[test]
    fn malformed_ids_rejected() {
        for s in ["", "8", "8_IV_3", "8_III_4", "x_I_1", "8_I_1_0", "08_I_1", "8_I_1_x", "8_I_1_2_3"] {
            assert!(s.parse::<QuestionId>().is_err(), "{s}");
        }
    }

    fn arb_id() -> impl Strategy<Value = QuestionId> {
        (1u32..10_000, 0usize..3, 0usize..3, 0u32..50).prop_map(|(t, s, l, q)| QuestionId {
            topic_code: t,
            section: Section::ALL[s],
            level: CognitiveLevel::ALL[l],
            seq: q,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn id_round_trip(id in arb_id()) {
            prop_assert_eq!(id.to_string().parse::<QuestionId>().unwrap(), id);
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(3200.0), "3200");
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(-0.0), "0");
    }
}
