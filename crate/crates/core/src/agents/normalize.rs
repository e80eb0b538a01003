//! Input normalization for the solver.
//!
//! Accepts the JSON interchange format (passed through unchanged) or a plain
//! text item list:
//!
//! ```text
//! Question 1. [5_I_2] stem, possibly over several lines
//! A. first choice
//! B. ...
//! C. ...
//! D. ...
//! Answer: A
//! ```
//!
//! Section II blocks list statements as `a) ...` to `d) ...` with
//! `Answer: T F T T`; section III blocks give `Answer: 3200` and an optional
//! `Round: 2` (default 2). Topics are resolved from the id's topic code.

use super::protocol::parse_response;
use super::AgentError;
use crate::exam::{parse_exam, ExamItem, ItemBody, QuestionId, Response, Section, SpecificationMatrix, CHOICE_LETTERS};

pub fn normalize_input(document: &[u8], matrix: &SpecificationMatrix) -> Result<Vec<ExamItem>, AgentError> {
    if document.starts_with(b"%PDF") {
        return Err(AgentError::Unsupported("PDF input; extract the text first".into()));
    }
    if document.contains(&0) {
        return Err(AgentError::Unsupported("binary input".into()));
    }
    let text = std::str::from_utf8(document).map_err(|_| AgentError::Unsupported("input is not UTF-8 text".into()))?;
    if text.trim_start().starts_with('{') {
        return Ok(parse_exam(document)?.items);
    }
    let blocks = split_blocks(text)?;
    if blocks.is_empty() {
        return Err(AgentError::Format("no `Question N.` block found".into()));
    }
    blocks.into_iter().map(|b| parse_block(&b, matrix)).collect()
}

struct Block {
    number: usize,
    line: usize,
    head: String,
    body: Vec<String>,
}

fn split_blocks(text: &str) -> Result<Vec<Block>, AgentError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("Question ") {
            let (num, head) = rest
                .split_once('.')
                .ok_or_else(|| AgentError::Format(format!("line {}: malformed question header", n + 1)))?;
            let number = num
                .trim()
                .parse()
                .map_err(|_| AgentError::Format(format!("line {}: bad question number `{num}`", n + 1)))?;
            blocks.push(Block { number, line: n + 1, head: head.trim().to_string(), body: Vec::new() });
        } else if let Some(b) = blocks.last_mut() {
            b.body.push(line.to_string());
        } else {
            return Err(AgentError::Format(format!("line {}: text before the first question block", n + 1)));
        }
    }
    Ok(blocks)
}

fn parse_block(block: &Block, matrix: &SpecificationMatrix) -> Result<ExamItem, AgentError> {
    let fail = |msg: String| AgentError::Format(format!("question {} (line {}): {msg}", block.number, block.line));
    let (id_text, first_stem) = block
        .head
        .strip_prefix('[')
        .and_then(|r| r.split_once(']'))
        .ok_or_else(|| fail("missing [id] tag".into()))?;
    let id: QuestionId = id_text.parse().map_err(|e| fail(format!("{e}")))?;
    let topic = matrix
        .topic_by_code(id.topic_code)
        .ok_or_else(|| fail(format!("topic code {} is not in the matrix", id.topic_code)))?;

    let mut stem = vec![first_stem.trim().to_string()];
    let mut parts: Vec<(char, String)> = Vec::new();
    let mut answer = None;
    let mut round = 2;
    for line in &block.body {
        if let Some(a) = line.strip_prefix("Answer:") {
            answer = Some(a.trim().to_string());
        } else if let Some(r) = line.strip_prefix("Round:") {
            round = r.trim().parse().map_err(|_| fail(format!("bad rounding `{}`", r.trim())))?;
        } else if let Some((label, rest)) = part_label(line, id.section) {
            parts.push((label, rest.to_string()));
        } else if parts.is_empty() {
            stem.push(line.clone());
        } else {
            let last = parts.last_mut().expect("non-empty");
            last.1.push(' ');
            last.1.push_str(line);
        }
    }
    let stem = stem.join("\n").trim().to_string();
    if stem.is_empty() {
        return Err(fail("empty stem".into()));
    }
    let answer = answer.ok_or_else(|| fail("missing Answer line".into()))?;
    let four = |labels: [char; 4]| -> Result<[String; 4], AgentError> {
        let found: Vec<char> = parts.iter().map(|p| p.0).collect();
        if found != labels {
            return Err(fail(format!("expected parts {labels:?}, found {found:?}")));
        }
        Ok(parts.iter().map(|p| p.1.clone()).collect::<Vec<_>>().try_into().expect("four parts"))
    };
    let body = match id.section {
        Section::I => {
            let choices = four(CHOICE_LETTERS)?;
            let probe = ItemBody::MultipleChoice { choices: choices.clone(), key: 0 };
            match parse_response(&answer, &probe) {
                Some(Response::Choice(key)) => ItemBody::MultipleChoice { choices, key },
                _ => return Err(fail(format!("bad answer `{answer}`"))),
            }
        }
        Section::II => {
            let statements = four(['a', 'b', 'c', 'd'])?;
            let probe = ItemBody::TrueFalseGroup { statements: statements.clone(), key: [true; 4] };
            match parse_response(&answer, &probe) {
                Some(Response::TrueFalse(key)) => ItemBody::TrueFalseGroup { statements, key },
                _ => return Err(fail(format!("bad answer `{answer}`"))),
            }
        }
        Section::III => {
            if !parts.is_empty() {
                return Err(fail("short-answer block has labelled parts".into()));
            }
            match parse_response(&answer, &ItemBody::ShortAnswer { key: 0.0, round_digits: round }) {
                Some(Response::Numeric(key)) => ItemBody::ShortAnswer { key, round_digits: round },
                _ => return Err(fail(format!("bad answer `{answer}`"))),
            }
        }
    };
    Ok(ExamItem {
        id,
        topic: topic.to_string(),
        level: id.level,
        stem,
        body,
        solution: String::new(),
        explanation: String::new(),
    })
}

fn part_label(line: &str, section: Section) -> Option<(char, &str)> {
    let mut chars = line.chars();
    let label = chars.next()?;
    let rest = chars.as_str();
    match section {
        Section::I if CHOICE_LETTERS.contains(&label) => rest.strip_prefix('.').map(|r| (label, r.trim())),
        Section::II if ('a'..='d').contains(&label) => rest.strip_prefix(')').map(|r| (label, r.trim())),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exam::{CognitiveLevel, MatrixCell, SectionTotals};

    fn matrix() -> SpecificationMatrix {
        let topics: Vec<String> = (1..=3).map(|i| format!("topic {i}")).collect();
        SpecificationMatrix::new(
            "t",
            SectionTotals { section_i: 1, section_ii: 1, section_iii: 1 },
            topics.clone(),
            vec![
                MatrixCell { topic: topics[0].clone(), section: Section::I, level: CognitiveLevel::Recognition, count: 1 },
                MatrixCell { topic: topics[1].clone(), section: Section::II, level: CognitiveLevel::Comprehension, count: 1 },
                MatrixCell { topic: topics[2].clone(), section: Section::III, level: CognitiveLevel::Application, count: 1 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn plain_text_all_sections() {
        let doc = "Question 1. [1_I_1] What is 2+2?\nA. 3\nB. 4\nC. 5\nD. 6\nAnswer: B\n\n\
                   Question 2. [2_II_2] Decide.\na) x\nb) y\nc) z\nd) w\nAnswer: T F F T\n\
                   Question 3. [3_III_3] Compute\nthe area.\nAnswer: 3200\nRound: 0\n";
        let items = normalize_input(doc.as_bytes(), &matrix()).unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items[0].body, ItemBody::MultipleChoice { choices: ["3", "4", "5", "6"].map(String::from), key: 1 });
        assert_eq!(items[1].topic, "topic 2");
        assert_eq!(items[2].stem, "Compute\nthe area.");
        assert_eq!(items[2].body, ItemBody::ShortAnswer { key: 3200.0, round_digits: 0 });
    }

    #[test]
    fn errors_name_the_block() {
        let doc = "Question 1. [1_I_1] ok\nA. 1\nB. 2\nC. 3\nD. 4\nAnswer: A\nQuestion 2. [1_I_1] bad\nA. 1\nB. 2\nAnswer: A\n";
        let err = normalize_input(doc.as_bytes(), &matrix()).unwrap_err().to_string();
        assert!(err.contains("question 2"), "{err}");
        assert!(matches!(normalize_input(b"%PDF-1.7 ...", &matrix()), Err(AgentError::Unsupported(_))));
        assert!(matches!(normalize_input(&[0x41, 0, 0xff], &matrix()), Err(AgentError::Unsupported(_))));
        assert!(matches!(normalize_input(b"hello", &matrix()), Err(AgentError::Format(_))));
    }
}
