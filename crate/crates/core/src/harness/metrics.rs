use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{worked_steps, TutoringMetrics};
use crate::exam::{score_exam, ComplianceReport, Exam, Response, ScoringScheme, Section};

/// Minimum non-empty worked steps for the step-completeness proxy.
pub const STEP_THRESHOLD: usize = 2;

/// A metric value tagged with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provenance", rename_all = "lowercase")]
pub enum Metric {
    Computed { value: f64 },
    /// Supplied from outside (human ratings); passed through untouched.
    Recorded { value: f64 },
    Unavailable { reason: String },
}

impl Metric {
    fn computed(value: f64) -> Self {
        Metric::Computed { value }
    }

    fn unavailable(reason: impl Into<String>) -> Self {
        Metric::Unavailable { reason: reason.into() }
    }

    fn from_option(value: Option<f64>, reason: &str) -> Self {
        value.map_or_else(|| Self::unavailable(reason), Self::computed)
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Metric::Computed { value } | Metric::Recorded { value } => Some(*value),
            Metric::Unavailable { .. } => None,
        }
    }

    pub fn provenance(&self) -> &'static str {
        match self {
            Metric::Computed { .. } => "computed",
            Metric::Recorded { .. } => "recorded",
            Metric::Unavailable { .. } => "unavailable",
        }
    }
}

/// Human-rated figures, when a ratings file is supplied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordedRatings {
    pub teacher_rating: Option<f64>,
    pub explanation_quality: Option<f64>,
    pub engagement: Option<f64>,
    pub user_satisfaction: Option<f64>,
}

/// One solved exam with the raw solver output.
#[derive(Debug, Clone)]
pub struct GradedExam {
    pub exam: Exam,
    pub responses: Vec<Response>,
    /// Raw completions in item order; empty when responses did not come from
    /// the solver.
    pub completions: Vec<String>,
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub graded: Vec<GradedExam>,
    pub scheme: ScoringScheme,
    pub compliance: Vec<ComplianceReport>,
    /// Stem overlap per generated item, percent.
    pub novelty: Vec<f64>,
    pub tutoring: Option<TutoringMetrics>,
    pub ratings: Option<RecordedRatings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub exams: usize,
    pub items: usize,
    pub item_accuracy: Metric,
    pub set_level_accuracy: Metric,
    /// Sections I, II, III.
    pub section_accuracy: [Metric; 3],
    pub compliance_rate: Metric,
    pub mean_novelty: Metric,
    pub step_proxy: Metric,
    pub delta_score: Metric,
    pub path_effectiveness: Metric,
    pub latency_mean_s: Metric,
    pub latency_p95_s: Metric,
    pub teacher_rating: Metric,
    pub explanation_quality: Metric,
    pub engagement: Metric,
    pub user_satisfaction: Metric,
}

impl MetricsReport {
    /// Copy with wall-clock fields blanked, for bit-exact comparison.
    pub fn without_latency(&self) -> Self {
        let blank = || Metric::unavailable("normalized");
        MetricsReport { latency_mean_s: blank(), latency_p95_s: blank(), ..self.clone() }
    }
}

/// Nearest-rank 95th percentile.
pub fn p95(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (0.95 * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.max(1) - 1])
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn compute_metrics(inputs: &EvalInputs) -> Result<MetricsReport, HarnessError> {
    let mut correct = 0;
    let mut items = 0;
    let mut perfect = 0;
    let mut by_section = [(0usize, 0usize); 3];
    let (mut stepped, mut with_completion) = (0, 0);
    let mut latencies = Vec::new();

    for g in &inputs.graded {
        if !g.completions.is_empty() && g.completions.len() != g.exam.items.len() {
            return Err(HarnessError::Assertion(format!(
                "exam {}: {} completions for {} items",
                g.exam.exam_id,
                g.completions.len(),
                g.exam.items.len()
            )));
        }
        let score = score_exam(&g.exam, &g.responses, &inputs.scheme)?;
        for (item, s) in g.exam.items.iter().zip(&score.items) {
            let slot = &mut by_section[item.section() as usize];
            slot.1 += 1;
            if s.is_full() {
                slot.0 += 1;
                correct += 1;
            }
        }
        items += g.exam.items.len();
        perfect += usize::from(score.set_perfect);
        for c in &g.completions {
            with_completion += 1;
            stepped += usize::from(worked_steps(c).len() >= STEP_THRESHOLD);
        }
        latencies.extend(g.latency_s);
    }

    let exams = inputs.graded.len();
    let section = |s: Section| {
        let (ok, n) = by_section[s as usize];
        Metric::from_option(percent(ok, n), &format!("no section {s} items"))
    };
    let rates: Vec<f64> = inputs.compliance.iter().map(|c| c.rate).collect();
    let recorded = |v: Option<f64>| match v {
        Some(value) => Metric::Recorded { value },
        None => Metric::unavailable("not recorded"),
    };
    let ratings = inputs.ratings.clone().unwrap_or_default();
    let (delta_score, path_effectiveness) = match &inputs.tutoring {
        Some(t) => (
            Metric::computed(t.delta_score),
            Metric::from_option(t.path_effectiveness, "no repeated-error skills before practice"),
        ),
        None => (Metric::unavailable("no tutoring run"), Metric::unavailable("no tutoring run")),
    };

    Ok(MetricsReport {
        exams,
        items,
        item_accuracy: Metric::from_option(percent(correct, items), "no graded items"),
        set_level_accuracy: Metric::from_option(percent(perfect, exams), "no graded exams"),
        section_accuracy: [section(Section::I), section(Section::II), section(Section::III)],
        compliance_rate: Metric::from_option(mean(&rates).map(|r| 100.0 * r), "no validated exams"),
        mean_novelty: Metric::from_option(mean(&inputs.novelty), "no generated items"),
        step_proxy: Metric::from_option(percent(stepped, with_completion), "no solver output"),
        delta_score,
        path_effectiveness,
        latency_mean_s: Metric::from_option(mean(&latencies), "no timed exams"),
        latency_p95_s: Metric::from_option(p95(&latencies), "no timed exams"),
        teacher_rating: recorded(ratings.teacher_rating),
        explanation_quality: recorded(ratings.explanation_quality),
        engagement: recorded(ratings.engagement),
        user_satisfaction: recorded(ratings.user_satisfaction),
    })
}
