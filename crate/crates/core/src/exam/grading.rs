//! Item grading and exam scoring.

use serde::{Deserialize, Serialize};

use super::{Exam, ExamError, ExamItem, ItemBody, Response, Section};

/// Point weights per section. The default follows the 2025 public convention
/// (10 points total for a 12/4/6 exam).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringScheme {
    pub mcq_points: f64,
    /// Points for 1, 2, 3 and 4 correct statements; zero correct earns 0.
    pub tf_staircase: [f64; 4],
    pub short_points: f64,
}

impl Default for ScoringScheme {
    fn default() -> Self {
        ScoringScheme { mcq_points: 0.25, tf_staircase: [0.1, 0.25, 0.5, 1.0], short_points: 0.5 }
    }
}

impl ScoringScheme {
    pub fn validate(&self) -> Result<(), ExamError> {
        let mut prev = 0.0;
        for &p in &self.tf_staircase {
            if !(p.is_finite() && p >= prev) {
                return Err(ExamError::InvalidArgument("true/false staircase must be finite and non-decreasing".into()));
            }
            prev = p;
        }
        if !(self.mcq_points > 0.0 && self.short_points > 0.0 && self.tf_staircase[3] > 0.0) {
            return Err(ExamError::InvalidArgument("every section needs positive maximum points".into()));
        }
        Ok(())
    }

    pub fn max_points(&self, section: Section) -> f64 {
        match section {
            Section::I => self.mcq_points,
            Section::II => self.tf_staircase[3],
            Section::III => self.short_points,
        }
    }

    pub fn tf_points(&self, correct_parts: usize) -> f64 {
        match correct_parts {
            0 => 0.0,
            k => self.tf_staircase[k.min(4) - 1],
        }
    }

    pub fn exam_max(&self, exam: &Exam) -> f64 {
        exam.items.iter().map(|i| self.max_points(i.section())).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub points: f64,
    pub max_points: f64,
    /// 1/0 for single-part items; matching statements for true/false groups.
    pub correct_parts: usize,
}

impl ItemScore {
    pub fn is_full(&self) -> bool {
        self.points >= self.max_points
    }
}

/// Rounds half away from zero to `digits` decimals, returned as a scaled integer
/// so the comparison is exact.
fn rounded_scaled(x: f64, digits: u32) -> i128 {
    let scale = 10f64.powi(digits as i32);
    (x * scale).round() as i128
}

pub fn grade_item(item: &ExamItem, response: &Response, scheme: &ScoringScheme) -> Result<ItemScore, ExamError> {
    let max_points = scheme.max_points(item.section());
    let zero = ItemScore { points: 0.0, max_points, correct_parts: 0 };
    match (&item.body, response) {
        (_, Response::Unanswered) => Ok(zero),
        (ItemBody::MultipleChoice { key, .. }, Response::Choice(chosen)) => {
            if *chosen > 3 {
                return Err(ExamError::Format(format!("item {}: choice index {chosen} out of range", item.id)));
            }
            Ok(if chosen == key { ItemScore { points: max_points, max_points, correct_parts: 1 } } else { zero })
        }
        (ItemBody::TrueFalseGroup { key, .. }, Response::TrueFalse(bits)) => {
            let correct = key.iter().zip(bits).filter(|(k, b)| k == b).count();
            Ok(ItemScore { points: scheme.tf_points(correct), max_points, correct_parts: correct })
        }
        (ItemBody::ShortAnswer { key, round_digits }, Response::Numeric(x)) => {
            if !x.is_finite() {
                return Err(ExamError::Format(format!("item {}: short answer is not finite", item.id)));
            }
            let ok = rounded_scaled(*x, *round_digits) == rounded_scaled(*key, *round_digits);
            Ok(if ok { ItemScore { points: max_points, max_points, correct_parts: 1 } } else { zero })
        }
        (body, _) => Err(ExamError::Format(format!(
            "item {}: response variant does not match `{}` item",
            item.id,
            body.kind()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamScore {
    pub items: Vec<ItemScore>,
    /// Subtotals in section order I, II, III.
    pub section_points: [f64; 3],
    pub total: f64,
    pub max_total: f64,
    pub set_perfect: bool,
}

impl ExamScore {
    /// Total on a 0–100 scale.
    pub fn normalized(&self) -> f64 {
        if self.max_total > 0.0 { 100.0 * self.total / self.max_total } else { 0.0 }
    }
}

pub fn score_exam(exam: &Exam, responses: &[Response], scheme: &ScoringScheme) -> Result<ExamScore, ExamError> {
    if responses.len() != exam.items.len() {
        return Err(ExamError::Format(format!(
            "{} responses for {} items",
            responses.len(),
            exam.items.len()
        )));
    }
    let mut section_points = [0.0; 3];
    let mut items = Vec::with_capacity(responses.len());
    for (item, response) in exam.items.iter().zip(responses) {
        let score = grade_item(item, response, scheme)?;
        section_points[item.section() as usize] += score.points;
        items.push(score);
    }
    let set_perfect = items.iter().all(ItemScore::is_full);
    Ok(ExamScore {
        total: section_points.iter().sum(),
        max_total: scheme.exam_max(exam),
        section_points,
        items,
        set_perfect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exam::{CognitiveLevel, QuestionId};

    fn short(key: f64, digits: u32) -> ExamItem {
        ExamItem {
            id: QuestionId::new(1, Section::III, CognitiveLevel::Application, 0).unwrap(),
            topic: "t".into(),
            level: CognitiveLevel::Application,
            stem: "s".into(),
            body: ItemBody::ShortAnswer { key, round_digits: digits },
            solution: String::new(),
            explanation: String::new(),
        }
    }

    #[test]
    fn staircase_monotone() {
        let s = ScoringScheme::default();
        for k in 0..4 {
            assert!(s.tf_points(k + 1) >= s.tf_points(k));
        }
        s.validate().unwrap();
    }

    #[test]
    fn short_answer_rounding() {
        let s = ScoringScheme::default();
        let item = short(0.33, 2);
        assert_eq!(grade_item(&item, &Response::Numeric(1.0 / 3.0), &s).unwrap().correct_parts, 1);
        assert_eq!(grade_item(&item, &Response::Numeric(0.34), &s).unwrap().correct_parts, 0);
        assert!(grade_item(&item, &Response::Numeric(f64::NAN), &s).is_err());
        assert!(grade_item(&item, &Response::Choice(0), &s).is_err());
    }

    #[test]
    fn unanswered_scores_zero() {
        let s = ScoringScheme::default();
        let sc = grade_item(&short(1.0, 0), &Response::Unanswered, &s).unwrap();
        assert_eq!(sc.points, 0.0);
        assert_eq!(sc.max_points, 0.5);
    }
}
