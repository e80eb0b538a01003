//! Deterministic stand-in backend.
//!
//! Generation fills blueprint slots from parameterized English templates
//! whose keys are computed, with seeded parameter and wording variation.
//! Solving answers from an explicit answer key, else reuses the answer of the
//! highest-weight successful retrieved case for the same item, else replies
//! without an answer envelope.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::explanation::ExplanationOutline;
use super::protocol::{fingerprint, parse_solve_prompt, render_draft, GeneratedDraft, GenerationRequest};
use super::{AgentError, ChatBackend, DecodeParams, Message};
use crate::exam::{format_number, CognitiveLevel, Exam, ExamItem, ItemBody, Section};
use crate::mmdp::{seeded_rng, SeededRng};

pub const MOCK_ID: &str = "mock-v1";

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    answer_key: HashMap<String, String>,
    garbled: HashSet<String>,
    garbled_generation_attempts: u32,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds every item of `exam` to the answer key.
    pub fn learn_exam(&mut self, exam: &Exam) {
        for item in &exam.items {
            self.learn_item(item);
        }
    }

    pub fn learn_item(&mut self, item: &ExamItem) {
        self.answer_key.insert(fingerprint(&item.render_prompt()), item.body.key_response().render());
    }

    /// Removes an item from the answer key.
    pub fn forget_item(&mut self, item: &ExamItem) {
        self.answer_key.remove(&fingerprint(&item.render_prompt()));
    }

    pub fn knows(&self, item: &ExamItem) -> bool {
        self.answer_key.contains_key(&fingerprint(&item.render_prompt()))
    }

    /// Replies to this item without an answer envelope.
    pub fn garble_item(&mut self, item: &ExamItem) {
        self.garbled.insert(fingerprint(&item.render_prompt()));
    }

    /// Makes the first `n` generation attempts of every slot unparseable.
    pub fn garble_generation_attempts(&mut self, n: u32) {
        self.garbled_generation_attempts = n;
    }

    fn solve(&self, prompt: &str) -> String {
        let Some((fp, cases)) = parse_solve_prompt(prompt) else {
            return "I cannot read this request.".into();
        };
        if self.garbled.contains(&fp) {
            return "The working was interrupted before a conclusion.".into();
        }
        let (source, answer) = if let Some(a) = self.answer_key.get(&fp) {
            ("Apply the standard method for this item type", a.clone())
        } else if let Some(c) = cases.iter().find(|c| c.success && c.fingerprint == fp) {
            ("Reuse the verified answer of a matching solved case", c.answer.clone())
        } else {
            return "I am not able to determine the answer to this item.".into();
        };
        format!("STEP 1: Identify what the item asks and its answer format.\nSTEP 2: {source}.\nSTEP 3: Check the result against the item.\nANSWER: {answer}")
    }

    fn generate(&self, req: &GenerationRequest, seed: u64) -> String {
        if req.attempt < self.garbled_generation_attempts {
            return format!("Draft for {} is not ready.", req.item_id);
        }
        let mix = fnv(req.item_id.as_bytes()) ^ (u64::from(req.attempt) << 48);
        let mut rng = seeded_rng(seed ^ mix);
        let level = CognitiveLevel::try_from(req.level).unwrap_or(CognitiveLevel::Recognition);
        render_draft(&draft(req.topic_code, &req.topic, req.section, level, &mut rng))
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> &str {
        MOCK_ID
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, _system: &str, messages: &[Message], _params: &DecodeParams, seed: u64) -> Result<String, AgentError> {
        let prompt = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        if let Some(req) = GenerationRequest::parse(prompt) {
            return Ok(self.generate(&req, seed));
        }
        Ok(self.solve(prompt))
    }
}

fn fnv(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3))
}

fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 { 0.0 } else { r }
}

fn num(x: f64) -> String {
    format_number(round2(x))
}

struct Fact {
    phrase: String,
    value: f64,
}

fn fact(phrase: impl Into<String>, value: f64) -> Fact {
    Fact { phrase: phrase.into(), value: round2(value) }
}

/// Context sentence and four computed facts for a topic template.
fn topic_facts(code: u32, rng: &mut SeededRng) -> (String, [Fact; 4]) {
    let mut r = |lo: i32, hi: i32| rng.random_range(lo..=hi);
    match (code.max(1) - 1) % 11 {
        0 => {
            let (p, q) = (r(1, 4) as f64, r(-5, 5) as f64);
            (
                format!("the function f(x) = x^3 - {}x + {}", num(3.0 * p * p), num(q)),
                [
                    fact("the x-coordinate of the local maximum point of f", -p),
                    fact("the x-coordinate of the local minimum point of f", p),
                    fact("the local maximum value of f", 2.0 * p.powi(3) + q),
                    fact("the local minimum value of f", q - 2.0 * p.powi(3)),
                ],
            )
        }
        1 => {
            let (p, q) = (r(1, 5) as f64, r(-4, 6) as f64);
            (
                format!("the function f(x) = -x^2 + {}x + {} on the interval [0; {}]", num(2.0 * p), num(q), num(2.0 * p)),
                [
                    fact("the maximum value of f on the interval", p * p + q),
                    fact("the point where f reaches its maximum", p),
                    fact("the minimum value of f on the interval", q),
                    fact("the value f(1)", 2.0 * p + q - 1.0),
                ],
            )
        }
        2 => {
            let (a, b, c) = (r(1, 5) as f64, r(1, 9) as f64, r(1, 5) as f64);
            (
                format!("the graph of y = ({}x + {})/(x - {})", num(a), num(b), num(c)),
                [
                    fact("the horizontal asymptote value y", a),
                    fact("the vertical asymptote value x", c),
                    fact("the y-intercept of the graph", -b / c),
                    fact("the x-intercept of the graph", -b / a),
                ],
            )
        }
        3 => {
            let v: Vec<f64> = (0..6).map(|_| r(-4, 5) as f64).collect();
            (
                format!(
                    "the vectors u = ({}; {}; {}) and v = ({}; {}; {}) in Oxyz",
                    num(v[0]), num(v[1]), num(v[2]), num(v[3]), num(v[4]), num(v[5])
                ),
                [
                    fact("the dot product u.v", v[0] * v[3] + v[1] * v[4] + v[2] * v[5]),
                    fact("the squared length of u", v[0] * v[0] + v[1] * v[1] + v[2] * v[2]),
                    fact("the first coordinate of u + v", v[0] + v[3]),
                    fact("the first coordinate of the cross product of u and v", v[1] * v[5] - v[2] * v[4]),
                ],
            )
        }
        4 => {
            let n: Vec<f64> = (0..4).map(|_| r(2, 12) as f64).collect();
            let total: f64 = n.iter().sum();
            let mean = n.iter().zip([1.0, 3.0, 5.0, 7.0]).map(|(f, m)| f * m).sum::<f64>() / total;
            (
                format!(
                    "a grouped sample with classes [0;2), [2;4), [4;6), [6;8) and frequencies {}, {}, {}, {}",
                    num(n[0]), num(n[1]), num(n[2]), num(n[3])
                ),
                [
                    fact("the sample size", total),
                    fact("the mean of the grouped sample", mean),
                    fact("the largest class frequency", n.iter().copied().fold(0.0, f64::max)),
                    fact("the relative frequency of the class [2;4) in percent", 100.0 * n[1] / total),
                ],
            )
        }
        5 => {
            let (p, q, b) = (r(1, 6) as f64, r(1, 6) as f64, r(1, 4) as f64);
            (
                format!("the function f(x) = {}x + {} and its antiderivative F with F(0) = 0", num(p), num(q)),
                [
                    fact(format!("the integral of f from 0 to {}", num(b)), p * b * b / 2.0 + q * b),
                    fact("the value F(1)", p / 2.0 + q),
                    fact(format!("the average value of f on [0; {}]", num(b)), p * b / 2.0 + q),
                    fact("the difference F(2) - F(1)", 1.5 * p + q),
                ],
            )
        }
        6 => {
            let (p, b) = (r(1, 4) as f64, r(1, 3) as f64);
            (
                format!("the region bounded by y = {}x^2, the x-axis and the lines x = 0 and x = {}", num(p), num(b)),
                [
                    fact("the area of the region", p * b.powi(3) / 3.0),
                    fact("the height of the curve at the right edge", p * b * b),
                    fact("the area of the enclosing rectangle minus the region", 2.0 * p * b.powi(3) / 3.0),
                    fact("the volume of revolution about the x-axis", std::f64::consts::PI * p * p * b.powi(5) / 5.0),
                ],
            )
        }
        7 => {
            let (a, b, c) = (r(1, 9) as f64 / 10.0, r(1, 9) as f64 / 10.0, r(1, 9) as f64 / 10.0);
            let pb = a * b + (1.0 - a) * c;
            (
                format!("events A and B with P(A) = {}, P(B | A) = {} and P(B | not A) = {}", num(a), num(b), num(c)),
                [
                    fact("the probability P(A and B)", a * b),
                    fact("the probability P(B)", pb),
                    fact("the probability P(A | B)", a * b / pb),
                    fact("the probability P(not B)", 1.0 - pb),
                ],
            )
        }
        8 => {
            let v: Vec<f64> = (0..3).map(|_| r(-3, 4) as f64).collect();
            let n: Vec<f64> = (0..3).map(|_| r(1, 4) as f64).collect();
            let d = -(n[0] * v[0] + n[1] * v[1] + n[2] * v[2]);
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            (
                format!(
                    "the plane (P) through M({}; {}; {}) with normal vector n = ({}; {}; {}), written ax + by + cz + d = 0 with a = {}",
                    num(v[0]), num(v[1]), num(v[2]), num(n[0]), num(n[1]), num(n[2]), num(n[0])
                ),
                [
                    fact("the coefficient d", d),
                    fact("the distance from O to (P)", d.abs() / norm),
                    fact("the value a + b + c + d", n[0] + n[1] + n[2] + d),
                    fact("the distance from M + n to (P)", norm),
                ],
            )
        }
        9 => {
            let p: Vec<f64> = (0..3).map(|_| r(-3, 4) as f64).collect();
            let u: Vec<f64> = (0..3).map(|_| r(1, 4) as f64).collect();
            let k = r(1, 4) as f64;
            (
                format!(
                    "the line d through A({}; {}; {}) with direction vector u = ({}; {}; {}) and parameter t",
                    num(p[0]), num(p[1]), num(p[2]), num(u[0]), num(u[1]), num(u[2])
                ),
                [
                    fact("the x-coordinate of the point of d with t = 2", p[0] + 2.0 * u[0]),
                    fact("the z-coordinate of the point of d with t = -1", p[2] - u[2]),
                    fact("the squared length of u", u.iter().map(|x| x * x).sum()),
                    fact(format!("the parameter t where d meets the plane x = {}", num(p[0] + k * u[0])), k),
                ],
            )
        }
        _ => {
            let c: Vec<f64> = (0..3).map(|_| r(-4, 4) as f64).collect();
            let rad = r(1, 6) as f64;
            (
                format!("the sphere (S) with centre I({}; {}; {}) and radius {}", num(c[0]), num(c[1]), num(c[2]), num(rad)),
                [
                    fact("the constant term of the expanded equation of (S)", c.iter().map(|x| x * x).sum::<f64>() - rad * rad),
                    fact("the distance from I to O", c.iter().map(|x| x * x).sum::<f64>().sqrt()),
                    fact("the surface area of (S) divided by pi", 4.0 * rad * rad),
                    fact("the distance from I to the plane z = 0", c[2].abs()),
                ],
            )
        }
    }
}

fn distractors(value: f64, rng: &mut SeededRng) -> Vec<f64> {
    let mut offsets = [1.0, -1.0, 2.0, -2.0, 0.5, 3.0, -3.0, 5.0];
    offsets.shuffle(rng);
    let mut out: Vec<f64> = Vec::new();
    for cand in offsets.iter().map(|o| round2(value + o)).chain([round2(-value), round2(2.0 * value)]) {
        if num(cand) != num(value) && !out.iter().any(|o| num(*o) == num(cand)) {
            out.push(cand);
        }
        if out.len() == 3 {
            break;
        }
    }
    out
}

const INTROS: [&str; 3] = ["Consider", "Let us study", "We are given"];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default()
}

fn draft(code: u32, topic: &str, section: Section, level: CognitiveLevel, rng: &mut SeededRng) -> GeneratedDraft {
    let (context, facts) = topic_facts(code, rng);
    let intro = INTROS[rng.random_range(0..INTROS.len())];
    let focus = match level {
        CognitiveLevel::Recognition => 0,
        CognitiveLevel::Comprehension => 1,
        CognitiveLevel::Application => 2 + rng.random_range(0..2),
    };
    let (stem, body, solution) = match section {
        Section::I => {
            let f = &facts[focus];
            let mut choices: Vec<f64> = distractors(f.value, rng);
            let key = rng.random_range(0..4);
            choices.insert(key, f.value);
            let choices: [String; 4] = choices.iter().map(|v| num(*v)).collect::<Vec<_>>().try_into().expect("four choices");
            (
                format!("{intro} {context}. Which value is {}?", f.phrase),
                ItemBody::MultipleChoice { choices, key },
                format!("{} = {}.", capitalize(&f.phrase), num(f.value)),
            )
        }
        Section::II => {
            let mut key = [false; 4];
            let mut statements: Vec<String> = Vec::new();
            for (i, f) in facts.iter().enumerate() {
                key[i] = rng.random_bool(0.5);
                let shown = if key[i] { f.value } else { distractors(f.value, rng)[0] };
                statements.push(format!("{} equals {}.", capitalize(&f.phrase), num(shown)));
            }
            let solution = facts.iter().map(|f| format!("{} = {}.", capitalize(&f.phrase), num(f.value))).collect::<Vec<_>>().join(" ");
            (
                format!("{intro} {context}. Decide whether each statement is true or false."),
                ItemBody::TrueFalseGroup { statements: statements.try_into().expect("four statements"), key },
                solution,
            )
        }
        Section::III => {
            let f = &facts[focus];
            (
                format!("{intro} {context}. Compute {} (round to two decimal places).", f.phrase),
                ItemBody::ShortAnswer { key: f.value, round_digits: 2 },
                format!("{} = {}.", capitalize(&f.phrase), num(f.value)),
            )
        }
    };
    let outline = ExplanationOutline {
        content_requirement: topic.to_string(),
        competency: "Mathematical problem solving".into(),
        criteria: "Selects a suitable method for the problem".into(),
        indicator: "Carries out the chosen procedure correctly".into(),
        cognitive_level: level.name().into(),
        question_format: match section {
            Section::I => "Multiple choice with four options",
            Section::II => "True/false group of four statements",
            Section::III => "Short numeric answer",
        }
        .into(),
        review_orientation: format!("Review the theory and standard methods of {topic}"),
        review_topics: format!("Routine exercises on {topic}"),
    };
    GeneratedDraft { stem, body, solution, explanation: outline.render() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::protocol::{parse_draft, render_solve_prompt, CaseLine};

    fn request(code: u32, section: Section, level: u8, attempt: u32) -> String {
        GenerationRequest {
            item_id: format!("{code}_{section}_{level}"),
            topic: "Topic".into(),
            topic_code: code,
            section,
            level,
            attempt,
            references: vec![],
        }
        .render()
    }

    fn complete(m: &MockBackend, prompt: &str, seed: u64) -> String {
        m.complete("", &[Message::user(prompt)], &DecodeParams::default(), seed).unwrap()
    }

    #[test]
    fn every_template_parses_in_every_section() {
        let m = MockBackend::new();
        for code in 1..=11 {
            for section in Section::ALL {
                for level in 1..=3 {
                    for seed in 0..5 {
                        let text = complete(&m, &request(code, section, level, 0), seed);
                        let d = parse_draft(&text, section).unwrap_or_else(|e| panic!("{code} {section} {level}: {e}\n{text}"));
                        if let ItemBody::MultipleChoice { choices, .. } = &d.body {
                            let distinct: HashSet<_> = choices.iter().collect();
                            assert_eq!(distinct.len(), 4, "{choices:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let m = MockBackend::new();
        let p = request(8, Section::III, 3, 0);
        assert_eq!(complete(&m, &p, 7), complete(&m, &p, 7));
        assert_ne!(complete(&m, &p, 7), complete(&m, &p, 8));
    }

    #[test]
    fn garbled_attempts_then_recovers() {
        let mut m = MockBackend::new();
        m.garble_generation_attempts(2);
        assert!(parse_draft(&complete(&m, &request(1, Section::I, 1, 1), 0), Section::I).is_err());
        assert!(parse_draft(&complete(&m, &request(1, Section::I, 1, 2), 0), Section::I).is_ok());
    }

    #[test]
    fn solve_prefers_key_then_successful_case() {
        let prompt = "[I] Which?\nA. 1\nB. 2\nC. 3\nD. 4";
        let fp = fingerprint(prompt);
        let failed = CaseLine { fingerprint: fp.clone(), weight: 0.6, success: false, answer: "A".into() };
        let good = CaseLine { fingerprint: fp, weight: 0.4, success: true, answer: "C".into() };
        let m = MockBackend::new();
        let out = complete(&m, &render_solve_prompt(prompt, &[failed.clone(), good]), 0);
        assert!(out.ends_with("ANSWER: C"));
        let out = complete(&m, &render_solve_prompt(prompt, &[failed]), 0);
        assert!(!out.contains("ANSWER:"));
    }
}
