//! Text protocol between agents and chat backends: prompt layouts and the
//! answer envelope (`ANSWER:` on the final line).

use sha2::{Digest, Sha256};

use crate::exam::{format_number, ItemBody, Response, Section, CHOICE_LETTERS};

/// Short stable hash of a text, used to match items across prompts.
pub fn fingerprint(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// One retrieved case as shown to the backend.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseLine {
    pub fingerprint: String,
    pub weight: f64,
    pub success: bool,
    pub answer: String,
}

impl CaseLine {
    pub fn render(&self) -> String {
        format!(
            "CASE fp={} weight={:.6} outcome={} answer={}",
            self.fingerprint,
            self.weight,
            if self.success { "success" } else { "failure" },
            self.answer
        )
    }

    pub fn parse(line: &str) -> Option<CaseLine> {
        let rest = line.strip_prefix("CASE ")?;
        let mut fp = None;
        let mut weight = None;
        let mut success = None;
        let (head, answer) = rest.split_once(" answer=")?;
        for part in head.split_whitespace() {
            match part.split_once('=')? {
                ("fp", v) => fp = Some(v.to_string()),
                ("weight", v) => weight = v.parse().ok(),
                ("outcome", v) => success = Some(v == "success"),
                _ => return None,
            }
        }
        Some(CaseLine { fingerprint: fp?, weight: weight?, success: success?, answer: answer.trim().to_string() })
    }
}

/// Blueprint slot the generator asks the backend to fill.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub item_id: String,
    pub topic: String,
    pub topic_code: u32,
    pub section: Section,
    pub level: u8,
    pub attempt: u32,
    pub references: Vec<String>,
}

impl GenerationRequest {
    pub fn render(&self) -> String {
        let mut out = format!(
            "TASK: generate\nITEM ID: {}\nTOPIC: {}\nTOPIC CODE: {}\nSECTION: {}\nLEVEL: {}\nATTEMPT: {}\nREFERENCE CASES:\n",
            self.item_id, self.topic, self.topic_code, self.section, self.level, self.attempt
        );
        for r in &self.references {
            out.push_str("- ");
            out.push_str(r.lines().next().unwrap_or(""));
            out.push('\n');
        }
        out.push_str(
            "Write one new item for this slot. Reply with lines STEM:, OPTION A: to OPTION D: (section I), \
             STATEMENT a: to STATEMENT d: (section II), KEY:, ROUND: (section III), SOLUTION: and a final \
             EXPLANATION: block.\n",
        );
        out
    }

    pub fn parse(text: &str) -> Option<GenerationRequest> {
        let field = |name: &str| text.lines().find_map(|l| l.strip_prefix(name)).map(str::trim);
        if field("TASK:")? != "generate" {
            return None;
        }
        Some(GenerationRequest {
            item_id: field("ITEM ID:")?.to_string(),
            topic: field("TOPIC:")?.to_string(),
            topic_code: field("TOPIC CODE:")?.parse().ok()?,
            section: field("SECTION:")?.parse().ok()?,
            level: field("LEVEL:")?.parse().ok()?,
            attempt: field("ATTEMPT:")?.parse().ok()?,
            references: Vec::new(),
        })
    }
}

/// Parsed generation reply.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDraft {
    pub stem: String,
    pub body: ItemBody,
    pub solution: String,
    pub explanation: String,
}

pub fn render_draft(draft: &GeneratedDraft) -> String {
    let mut out = format!("STEM: {}\n", draft.stem);
    match &draft.body {
        ItemBody::MultipleChoice { choices, key } => {
            for (l, c) in CHOICE_LETTERS.iter().zip(choices) {
                out.push_str(&format!("OPTION {l}: {c}\n"));
            }
            out.push_str(&format!("KEY: {}\n", CHOICE_LETTERS[*key]));
        }
        ItemBody::TrueFalseGroup { statements, key } => {
            for (l, s) in ['a', 'b', 'c', 'd'].iter().zip(statements) {
                out.push_str(&format!("STATEMENT {l}: {s}\n"));
            }
            out.push_str(&format!("KEY: {}\n", Response::TrueFalse(*key).render()));
        }
        ItemBody::ShortAnswer { key, round_digits } => {
            out.push_str(&format!("KEY: {}\nROUND: {round_digits}\n", format_number(*key)));
        }
    }
    out.push_str(&format!("SOLUTION: {}\nEXPLANATION:\n{}", draft.solution, draft.explanation));
    out
}

/// Parses a generation reply for `section`; `Err` names the first problem.
pub fn parse_draft(text: &str, section: Section) -> Result<GeneratedDraft, String> {
    let (head, explanation) = text.split_once("EXPLANATION:").ok_or("missing EXPLANATION block")?;
    let field = |name: &str| head.lines().find_map(|l| l.strip_prefix(name)).map(|s| s.trim().to_string());
    let stem = field("STEM:").filter(|s| !s.is_empty()).ok_or("missing STEM line")?;
    let solution = field("SOLUTION:").ok_or("missing SOLUTION line")?;
    let key = field("KEY:").ok_or("missing KEY line")?;
    let four = |prefix: &str, labels: [&str; 4]| -> Result<[String; 4], String> {
        let v = labels
            .iter()
            .map(|l| field(&format!("{prefix} {l}:")).ok_or(format!("missing {prefix} {l} line")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(v.try_into().expect("four labels"))
    };
    let body = match section {
        Section::I => {
            let choices = four("OPTION", ["A", "B", "C", "D"])?;
            match parse_response(&key, &ItemBody::MultipleChoice { choices: choices.clone(), key: 0 }) {
                Some(Response::Choice(k)) => ItemBody::MultipleChoice { choices, key: k },
                _ => return Err(format!("bad choice key {key:?}")),
            }
        }
        Section::II => {
            let statements = four("STATEMENT", ["a", "b", "c", "d"])?;
            match parse_response(&key, &ItemBody::TrueFalseGroup { statements: statements.clone(), key: [true; 4] }) {
                Some(Response::TrueFalse(k)) => ItemBody::TrueFalseGroup { statements, key: k },
                _ => return Err(format!("bad true/false key {key:?}")),
            }
        }
        Section::III => {
            let round_digits = field("ROUND:").and_then(|r| r.parse().ok()).ok_or("missing ROUND line")?;
            match parse_response(&key, &ItemBody::ShortAnswer { key: 0.0, round_digits }) {
                Some(Response::Numeric(k)) => ItemBody::ShortAnswer { key: k, round_digits },
                _ => return Err(format!("bad numeric key {key:?}")),
            }
        }
    };
    Ok(GeneratedDraft { stem, body, solution, explanation: explanation.trim().to_string() })
}

/// Prompt for solving one item, with retrieved cases listed by weight.
pub fn render_solve_prompt(item_prompt: &str, cases: &[CaseLine]) -> String {
    let mut out = format!("TASK: solve\nITEM FINGERPRINT: {}\nITEM:\n{item_prompt}\nSOLVED CASES:\n", fingerprint(item_prompt));
    for c in cases {
        out.push_str(&c.render());
        out.push('\n');
    }
    out.push_str("Work step by step on lines starting STEP n:, then give the final line starting with ANSWER:.\n");
    out
}

/// Item fingerprint and case lines of a solve prompt.
pub fn parse_solve_prompt(text: &str) -> Option<(String, Vec<CaseLine>)> {
    let mut lines = text.lines();
    if lines.next()? != "TASK: solve" {
        return None;
    }
    let fp = lines.next()?.strip_prefix("ITEM FINGERPRINT: ")?.to_string();
    let cases = text.lines().filter_map(CaseLine::parse).collect();
    Some((fp, cases))
}

/// Reads a response in the syntax of `body` (`B`, `T F T T`, `3200`).
pub fn parse_response(text: &str, body: &ItemBody) -> Option<Response> {
    let t = text.trim().trim_end_matches('.');
    match body {
        ItemBody::MultipleChoice { .. } => {
            let mut chars = t.chars();
            let c = chars.next()?.to_ascii_uppercase();
            if chars.next().is_some() {
                return None;
            }
            CHOICE_LETTERS.iter().position(|&l| l == c).map(Response::Choice)
        }
        ItemBody::TrueFalseGroup { .. } => {
            if t.len() == 4 && t.chars().all(|c| matches!(c.to_ascii_uppercase(), 'T' | 'F')) {
                let bits: Vec<bool> = t.chars().map(|c| c.eq_ignore_ascii_case(&'T')).collect();
                return <[bool; 4]>::try_from(bits).ok().map(Response::TrueFalse);
            }
            let bits = t
                .split(|c: char| c.is_whitespace() || c == ',' || c == '|')
                .filter(|s| !s.is_empty())
                .map(|s| match s.to_ascii_lowercase().as_str() {
                    "t" | "true" => Some(true),
                    "f" | "false" => Some(false),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()?;
            <[bool; 4]>::try_from(bits).ok().map(Response::TrueFalse)
        }
        ItemBody::ShortAnswer { .. } => {
            let normalized = if t.contains('.') { t.to_string() } else { t.replacen(',', ".", 1) };
            normalized.parse::<f64>().ok().filter(|x| x.is_finite()).map(Response::Numeric)
        }
    }
}

/// The response on the last `ANSWER:` line of a completion, if parseable.
pub fn parse_answer(completion: &str, body: &ItemBody) -> Option<Response> {
    let line = completion.lines().rev().find_map(|l| l.trim().strip_prefix("ANSWER:"))?;
    parse_response(line, body)
}

/// Non-empty `STEP n:` lines of a completion.
pub fn worked_steps(completion: &str) -> Vec<&str> {
    completion
        .lines()
        .filter_map(|l| l.trim().strip_prefix("STEP "))
        .filter_map(|l| l.split_once(':').map(|(_, s)| s.trim()))
        .filter(|s| !s.is_empty())
        .collect()
}
