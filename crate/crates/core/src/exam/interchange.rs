//! JSON exam interchange format.
//!
//! ```text
//! {
//!   "exam_id": "...",
//!   "provenance": "generated" | "ingested" | "fixture",
//!   "items": [
//!     {
//!       "id": "8_III_3",
//!       "topic": "...",
//!       "level": 1 | 2 | 3,
//!       "section": "I" | "II" | "III",
//!       "stem": "...",
//!       "body": { "kind": "mcq",   "choices": [4 strings], "key": "A".."D" }
//!             | { "kind": "tf",    "statements": [4 strings], "key": [4 booleans] }
//!             | { "kind": "short", "key": number, "round_digits": integer },
//!       "solution": "...",
//!       "explanation": "..."
//!     }
//!   ],
//!   "ratings": { ... }            (optional, carried verbatim)
//! }
//! ```
//!
//! Serialization is pretty-printed with a trailing newline and a fixed field
//! order, so re-serializing a parsed document reproduces it byte for byte.

use serde::{Deserialize, Serialize};

use super::{CognitiveLevel, Exam, ExamError, ExamItem, ItemBody, Provenance, QuestionId, Section, CHOICE_LETTERS};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExamDoc {
    exam_id: String,
    provenance: Provenance,
    items: Vec<ItemDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratings: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemDoc {
    id: String,
    topic: String,
    level: u8,
    section: String,
    stem: String,
    body: BodyDoc,
    solution: String,
    explanation: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BodyDoc {
    Mcq { choices: Vec<String>, key: String },
    Tf { statements: Vec<String>, key: Vec<bool> },
    Short { key: f64, round_digits: u32 },
}

fn schema(path: String, message: impl Into<String>) -> ExamError {
    ExamError::Schema { path, message: message.into() }
}

fn body_from_doc(doc: BodyDoc, path: &str) -> Result<ItemBody, ExamError> {
    Ok(match doc {
        BodyDoc::Mcq { choices, key } => {
            let n = choices.len();
            let choices: [String; 4] = choices
                .try_into()
                .map_err(|_| schema(format!("{path}.choices"), format!("expected 4 choices, found {n}")))?;
            let key = match key.chars().collect::<Vec<_>>().as_slice() {
                [c] => CHOICE_LETTERS.iter().position(|l| l == c),
                _ => None,
            }
            .ok_or_else(|| schema(format!("{path}.key"), format!("choice key `{key}` is not one of A-D")))?;
            ItemBody::MultipleChoice { choices, key }
        }
        BodyDoc::Tf { statements, key } => {
            let n = statements.len();
            let statements: [String; 4] = statements
                .try_into()
                .map_err(|_| schema(format!("{path}.statements"), format!("expected 4 statements, found {n}")))?;
            let n = key.len();
            let key: [bool; 4] =
                key.try_into().map_err(|_| schema(format!("{path}.key"), format!("expected 4 key bits, found {n}")))?;
            ItemBody::TrueFalseGroup { statements, key }
        }
        BodyDoc::Short { key, round_digits } => {
            if !key.is_finite() {
                return Err(schema(format!("{path}.key"), "short-answer key must be finite"));
            }
            ItemBody::ShortAnswer { key, round_digits }
        }
    })
}

fn item_from_doc(doc: ItemDoc, k: usize) -> Result<ExamItem, ExamError> {
    let at = |field: &str| format!("items[{k}].{field}");
    let section: Section = doc.section.parse().map_err(|e: ExamError| schema(at("section"), e.to_string()))?;
    let level = CognitiveLevel::try_from(doc.level).map_err(|e| schema(at("level"), e.to_string()))?;
    let id: QuestionId = doc.id.parse().map_err(|e: ExamError| schema(at("id"), e.to_string()))?;
    if id.section != section {
        return Err(schema(at("id"), format!("id section {} differs from section {section}", id.section)));
    }
    if id.level != level {
        return Err(schema(at("id"), format!("id level {} differs from level {level}", id.level)));
    }
    let body = body_from_doc(doc.body, &at("body"))?;
    if body.section() != section {
        return Err(schema(at("body.kind"), format!("`{}` body not allowed in section {section}", body.kind())));
    }
    Ok(ExamItem {
        id,
        topic: doc.topic,
        level,
        stem: doc.stem,
        body,
        solution: doc.solution,
        explanation: doc.explanation,
    })
}

fn item_to_doc(item: &ExamItem) -> ItemDoc {
    let body = match &item.body {
        ItemBody::MultipleChoice { choices, key } => {
            BodyDoc::Mcq { choices: choices.to_vec(), key: CHOICE_LETTERS[*key].to_string() }
        }
        ItemBody::TrueFalseGroup { statements, key } => {
            BodyDoc::Tf { statements: statements.to_vec(), key: key.to_vec() }
        }
        ItemBody::ShortAnswer { key, round_digits } => BodyDoc::Short { key: *key, round_digits: *round_digits },
    };
    ItemDoc {
        id: item.id.to_string(),
        topic: item.topic.clone(),
        level: item.level.as_u8(),
        section: item.section().to_string(),
        stem: item.stem.clone(),
        body,
        solution: item.solution.clone(),
        explanation: item.explanation.clone(),
    }
}

pub fn parse_exam(bytes: &[u8]) -> Result<Exam, ExamError> {
    let text = std::str::from_utf8(bytes).map_err(|e| schema("$".into(), format!("not UTF-8: {e}")))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ExamDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    let items = doc
        .items
        .into_iter()
        .enumerate()
        .map(|(k, d)| item_from_doc(d, k))
        .collect::<Result<Vec<_>, _>>()?;
    let exam = Exam { exam_id: doc.exam_id, provenance: doc.provenance, items, ratings: doc.ratings };
    exam.check().map_err(|(k, msg)| schema(format!("items[{k}]"), msg))?;
    Ok(exam)
}

pub fn serialize_exam(exam: &Exam) -> Vec<u8> {
    let doc = ExamDoc {
        exam_id: exam.exam_id.clone(),
        provenance: exam.provenance,
        items: exam.items.iter().map(item_to_doc).collect(),
        ratings: exam.ratings.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("exam serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
  "exam_id": "t",
  "provenance": "fixture",
  "items": [
    {
      "id": "1_I_1",
      "topic": "a",
      "level": 1,
      "section": "I",
      "stem": "pick",
      "body": { "kind": "mcq", "choices": ["1", "2", "3", "4"], "key": "C" },
      "solution": "",
      "explanation": ""
    }
  ]
}"#;

    #[test]
    fn parses_and_round_trips() {
        let exam = parse_exam(DOC.as_bytes()).unwrap();
        assert_eq!(exam.items[0].body, ItemBody::MultipleChoice {
            choices: ["1".into(), "2".into(), "3".into(), "4".into()],
            key: 2
        });
        let bytes = serialize_exam(&exam);
        assert_eq!(serialize_exam(&parse_exam(&bytes).unwrap()), bytes);
    }

    #[test]
    fn three_choices_names_path() {
        let bad = DOC.replace(r#"["1", "2", "3", "4"]"#, r#"["1", "2", "3"]"#);
        match parse_exam(bad.as_bytes()) {
            Err(ExamError::Schema { path, .. }) => assert_eq!(path, "items[0].body.choices"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_section_and_missing_field() {
        let bad = DOC.replace(r#""section": "I""#, r#""section": "IV""#);
        assert!(matches!(parse_exam(bad.as_bytes()), Err(ExamError::Schema { path, .. }) if path == "items[0].section"));
        let bad = DOC.replace(r#""stem": "pick","#, "");
        assert!(matches!(parse_exam(bad.as_bytes()), Err(ExamError::Schema { path, .. }) if path.starts_with("items[0]")));
    }

    #[test]
    fn body_must_match_section() {
        let bad = DOC
            .replace(r#""id": "1_I_1""#, r#""id": "1_III_1""#)
            .replace(r#""section": "I""#, r#""section": "III""#);
        assert!(matches!(parse_exam(bad.as_bytes()), Err(ExamError::Schema { path, .. }) if path == "items[0].body.kind"));
    }
}
