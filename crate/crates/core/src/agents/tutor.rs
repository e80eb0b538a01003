//! Tutoring: skill ontology, simulated students, error analysis and study
//! plans chosen through the case-based policy.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::planner::{plan, RequestKind, SubtaskStatus};
use super::session::AgentSession;
use super::AgentError;
use crate::exam::{grade_item, CognitiveLevel, Exam, ExamItem, ItemBody, ItemScore, QuestionId, Response, ScoringScheme, SpecificationMatrix};
use crate::memory::{Case, CaseBank};
use crate::mmdp::{cbr_action, composite_reward, seeded_rng, ActionDistribution, ActionProposer, AgentAction, CompositeRewardConfig, EnvState, MmdpError, SeededRng, Selection};
use crate::retrieval::Retriever;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    pub id: String,
    pub topic: String,
    pub level: CognitiveLevel,
}

/// One skill per (topic, level) pair the matrix requires in any section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillOntology {
    skills: Vec<Skill>,
}

impl SkillOntology {
    pub fn from_matrix(matrix: &SpecificationMatrix) -> Self {
        let mut seen = BTreeSet::new();
        for (key, _) in matrix.positive_cells() {
            let code = matrix.topic_code(&key.topic).expect("cell topics are listed");
            seen.insert((code, key.level, key.topic.clone()));
        }
        let skills = seen
            .into_iter()
            .map(|(code, level, topic)| Skill { id: format!("K{code}.{level}"), topic, level })
            .collect();
        SkillOntology { skills }
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn get(&self, skill_id: &str) -> Option<&Skill> {
        self.skills.iter().find(|s| s.id == skill_id)
    }

    pub fn skill_for(&self, topic: &str, level: CognitiveLevel) -> Option<&Skill> {
        self.skills.iter().find(|s| s.topic == topic && s.level == level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Practice,
    Post,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub item_id: QuestionId,
    pub skill_id: String,
    pub correct: bool,
    /// Position in the student's history.
    pub timestamp: u64,
    pub phase: Phase,
    /// Exam id for assessment attempts.
    pub assessment: Option<String>,
    pub points: f64,
    pub max_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub student_id: String,
    pub mastery: BTreeMap<String, f64>,
    pub history: Vec<Attempt>,
}

impl StudentProfile {
    pub fn new(student_id: impl Into<String>, mastery: BTreeMap<String, f64>) -> Self {
        let mastery = mastery.into_iter().map(|(k, v)| (k, v.clamp(0.0, 1.0))).collect();
        StudentProfile { student_id: student_id.into(), mastery, history: Vec::new() }
    }

    pub fn mastery(&self, skill_id: &str) -> f64 {
        self.mastery.get(skill_id).copied().unwrap_or(0.0)
    }
}

/// Guess-floor response model with a learning update on practice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentSimulator {
    pub learning_rate: f64,
    pub scheme: ScoringScheme,
}

impl Default for StudentSimulator {
    fn default() -> Self {
        StudentSimulator { learning_rate: 0.1, scheme: ScoringScheme::default() }
    }
}

impl StudentSimulator {
    /// Draws a response for `item`, records the attempt and, in the practice
    /// phase, raises the skill's mastery by `η (1 - m)`.
    pub fn step(
        &self,
        profile: &mut StudentProfile,
        ontology: &SkillOntology,
        item: &ExamItem,
        phase: Phase,
        assessment: Option<&str>,
        rng: &mut SeededRng,
    ) -> Result<(Response, ItemScore), AgentError> {
        let skill = ontology
            .skill_for(&item.topic, item.level)
            .ok_or_else(|| AgentError::Simulation(format!("item {} maps to no skill", item.id)))?;
        let m = profile.mastery(&skill.id);
        let g = item.section().guess_floor();
        let p = g + (1.0 - g) * m;
        let response = match &item.body {
            ItemBody::MultipleChoice { key, .. } => {
                if rng.random_bool(p) {
                    Response::Choice(*key)
                } else {
                    let other = rng.random_range(0..3);
                    Response::Choice(if other >= *key { other + 1 } else { other })
                }
            }
            ItemBody::TrueFalseGroup { key, .. } => {
                let mut bits = *key;
                for b in &mut bits {
                    if !rng.random_bool(p) {
                        *b = !*b;
                    }
                }
                Response::TrueFalse(bits)
            }
            ItemBody::ShortAnswer { key, .. } => Response::Numeric(if rng.random_bool(p) { *key } else { key + 1.0 }),
        };
        let score = grade_item(item, &response, &self.scheme)?;
        if phase == Phase::Practice {
            let updated = (m + self.learning_rate * (1.0 - m)).clamp(0.0, 1.0);
            profile.mastery.insert(skill.id.clone(), updated);
        }
        profile.history.push(Attempt {
            item_id: item.id,
            skill_id: skill.id.clone(),
            correct: score.is_full(),
            timestamp: profile.history.len() as u64,
            phase,
            assessment: assessment.map(str::to_string),
            points: score.points,
            max_points: score.max_points,
        });
        Ok((response, score))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    /// A skill is a gap when its error rate exceeds this.
    pub threshold: f64,
    pub min_attempts: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig { threshold: 0.5, min_attempts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillStats {
    pub skill_id: String,
    pub attempts: usize,
    pub errors: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillGap {
    pub skill_id: String,
    /// Error rate of the skill.
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GapReport {
    /// Per-skill counts in skill id order.
    pub stats: Vec<SkillStats>,
    /// By descending severity, then skill id.
    pub gaps: Vec<SkillGap>,
    pub unmapped: Vec<QuestionId>,
}

/// Error counts per skill over graded items; an item is an error unless it
/// earned full points.
pub fn analyze_errors(graded: &[(&ExamItem, &ItemScore)], ontology: &SkillOntology, config: &GapConfig) -> GapReport {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut unmapped = Vec::new();
    for (item, score) in graded {
        match ontology.skill_for(&item.topic, item.level) {
            Some(skill) => {
                let e = counts.entry(skill.id.clone()).or_default();
                e.0 += 1;
                e.1 += usize::from(!score.is_full());
            }
            None => unmapped.push(item.id),
        }
    }
    let stats: Vec<SkillStats> = counts
        .into_iter()
        .map(|(skill_id, (attempts, errors))| SkillStats { skill_id, attempts, errors, rate: errors as f64 / attempts as f64 })
        .collect();
    let mut gaps: Vec<SkillGap> = stats
        .iter()
        .filter(|s| s.attempts >= config.min_attempts && s.rate > config.threshold)
        .map(|s| SkillGap { skill_id: s.skill_id.clone(), severity: s.rate })
        .collect();
    gaps.sort_by(|a, b| b.severity.total_cmp(&a.severity).then_with(|| a.skill_id.cmp(&b.skill_id)));
    GapReport { stats, gaps, unmapped }
}

pub const PRACTICE_SIZES: [usize; 3] = [3, 6, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticeUnit {
    pub skill_id: String,
    pub item_count: usize,
    pub target_level: CognitiveLevel,
    /// Policy state the unit was chosen in.
    pub state_text: String,
    pub retrieved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub units: Vec<PracticeUnit>,
    pub rationale: String,
}

fn practice_action(skill_id: &str, n: usize) -> AgentAction {
    let mut a = AgentAction::new(format!("practice {n} items on skill {skill_id}"));
    a.annotations.insert("items".into(), n.to_string());
    a
}

/// Prefers the practice size a successful case used; otherwise scales the
/// size with gap severity. `epsilon` is spread uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PracticeProposer {
    pub epsilon: f64,
}

impl Default for PracticeProposer {
    fn default() -> Self {
        PracticeProposer { epsilon: 0.6 }
    }
}

impl ActionProposer for PracticeProposer {
    fn propose(&self, state: &EnvState, case: Option<&Case>) -> Result<ActionDistribution, MmdpError> {
        let skill = state.annotations.get("skill").ok_or_else(|| MmdpError::Contract("state has no skill".into()))?;
        let severity: f64 = state
            .annotations
            .get("severity")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MmdpError::Contract("state has no severity".into()))?;
        let reused = case
            .filter(|c| c.success)
            .and_then(|c| c.annotations.get("items"))
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| PRACTICE_SIZES.iter().position(|&s| s == n));
        let preferred = reused.unwrap_or(if severity >= 0.75 { 2 } else if severity >= 0.5 { 1 } else { 0 });
        let n = PRACTICE_SIZES.len() as f64;
        Ok(PRACTICE_SIZES
            .iter()
            .enumerate()
            .map(|(i, &size)| {
                let p = self.epsilon / n + if i == preferred { 1.0 - self.epsilon } else { 0.0 };
                (practice_action(skill, size), p)
            })
            .collect())
    }
}

/// Policy state for choosing practice on `gap`: the gap list plus the
/// student's mastery of the focus skill.
fn plan_state(profile: &StudentProfile, gaps: &GapReport, gap: &SkillGap, skill: &Skill) -> EnvState {
    let listed: Vec<String> = gaps.gaps.iter().map(|g| format!("{}={:.2}", g.skill_id, g.severity)).collect();
    EnvState::new(format!(
        "gaps {}; focus {} on {} at {} level, error rate {:.2}, mastery {:.2}",
        listed.join(", "),
        skill.id,
        skill.topic,
        skill.level.name().to_lowercase(),
        gap.severity,
        profile.mastery(&skill.id)
    ))
    .annotate("skill", skill.id.clone())
    .annotate("severity", format!("{}", gap.severity))
}

/// One practice unit per gap, chosen greedily by the case-based policy
/// (or by the proposer alone without a retriever).
pub fn recommend_path(
    profile: &StudentProfile,
    gaps: &GapReport,
    ontology: &SkillOntology,
    bank: &CaseBank,
    mut retriever: Option<&mut Retriever>,
    rng: &mut SeededRng,
) -> Result<StudyPlan, AgentError> {
    if gaps.gaps.is_empty() {
        return Ok(StudyPlan { units: Vec::new(), rationale: "no gaps: every skill is at or below the error threshold".into() });
    }
    let proposer = PracticeProposer::default();
    let mut units = Vec::with_capacity(gaps.gaps.len());
    for gap in &gaps.gaps {
        let skill = ontology
            .get(&gap.skill_id)
            .ok_or_else(|| AgentError::Simulation(format!("gap skill {} is not in the ontology", gap.skill_id)))?;
        let state = plan_state(profile, gaps, gap, skill);
        let (action, retrieved) = match retriever.as_deref_mut() {
            Some(r) => {
                let d = cbr_action(&state, bank, r, &proposer, Selection::Greedy, rng)?;
                (d.action, d.retrieved.into_iter().map(|c| c.case_id).collect())
            }
            None => {
                let dist = proposer.propose(&state, None)?;
                // earliest most probable action
                let best = (1..dist.len()).fold(0, |b, i| if dist[i].1 > dist[b].1 { i } else { b });
                (dist[best].0.clone(), Vec::new())
            }
        };
        let item_count = action.annotations.get("items").and_then(|n| n.parse().ok()).unwrap_or(PRACTICE_SIZES[0]);
        units.push(PracticeUnit {
            skill_id: skill.id.clone(),
            item_count,
            target_level: skill.level,
            state_text: state.text,
            retrieved,
        });
    }
    let rationale = format!(
        "{} gap(s) above the error threshold, ordered by severity: {}",
        units.len(),
        gaps.gaps.iter().map(|g| format!("{} ({:.2})", g.skill_id, g.severity)).collect::<Vec<_>>().join(", ")
    );
    Ok(StudyPlan { units, rationale })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutoringMetrics {
    /// Post minus pre mean normalized score, per student.
    pub per_student: Vec<(String, f64)>,
    pub delta_score: f64,
    pub improved: usize,
    pub repeated_before: usize,
    pub repeated_after: usize,
    /// `None` when no skill had repeated errors before.
    pub path_effectiveness: Option<f64>,
}

fn phase_mean_score(profile: &StudentProfile, phase: Phase) -> Option<f64> {
    let mut per_exam: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for a in profile.history.iter().filter(|a| a.phase == phase) {
        if let Some(exam) = a.assessment.as_deref() {
            let e = per_exam.entry(exam).or_default();
            e.0 += a.points;
            e.1 += a.max_points;
        }
    }
    let scores: Vec<f64> = per_exam.values().filter(|(_, max)| *max > 0.0).map(|(p, max)| 100.0 * p / max).collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Skills with at least two wrong attempts in `phase`.
fn repeated_error_skills(profile: &StudentProfile, phase: Phase) -> usize {
    let mut wrong: BTreeMap<&str, usize> = BTreeMap::new();
    for a in profile.history.iter().filter(|a| a.phase == phase && !a.correct) {
        *wrong.entry(a.skill_id.as_str()).or_default() += 1;
    }
    wrong.values().filter(|&&n| n >= 2).count()
}

/// Score gain and reduction of repeated-error skills over a cohort.
pub fn tutoring_metrics(profiles: &[StudentProfile]) -> Result<TutoringMetrics, AgentError> {
    if profiles.is_empty() {
        return Err(AgentError::Unavailable("no student histories".into()));
    }
    let mut per_student = Vec::with_capacity(profiles.len());
    let (mut before, mut after) = (0, 0);
    for p in profiles {
        let pre = phase_mean_score(p, Phase::Pre)
            .ok_or_else(|| AgentError::Unavailable(format!("student {} has no pre assessment", p.student_id)))?;
        let post = phase_mean_score(p, Phase::Post)
            .ok_or_else(|| AgentError::Unavailable(format!("student {} has no post assessment", p.student_id)))?;
        per_student.push((p.student_id.clone(), post - pre));
        before += repeated_error_skills(p, Phase::Pre);
        after += repeated_error_skills(p, Phase::Post);
    }
    let delta_score = per_student.iter().map(|(_, d)| d).sum::<f64>() / per_student.len() as f64;
    Ok(TutoringMetrics {
        improved: per_student.iter().filter(|(_, d)| *d > 0.0).count(),
        per_student,
        delta_score,
        repeated_before: before,
        repeated_after: after,
        path_effectiveness: (before > 0).then(|| 100.0 * (1.0 - after as f64 / before as f64)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutoringConfig {
    pub students: usize,
    pub seed: u64,
    pub simulator: StudentSimulator,
    /// Initial mastery is drawn uniformly from this range per skill.
    pub initial_mastery: (f64, f64),
    pub pre_exams: usize,
    pub post_exams: usize,
    pub gaps: GapConfig,
    pub reward: CompositeRewardConfig,
}

impl Default for TutoringConfig {
    fn default() -> Self {
        TutoringConfig {
            students: 20,
            seed: 0,
            simulator: StudentSimulator::default(),
            initial_mastery: (0.05, 0.45),
            pre_exams: 2,
            post_exams: 2,
            gaps: GapConfig::default(),
            reward: CompositeRewardConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutoringReport {
    pub profiles: Vec<StudentProfile>,
    pub plans: Vec<StudyPlan>,
    pub metrics: TutoringMetrics,
}

impl AgentSession {
    /// Runs the cohort: pre assessments, error analysis, a study plan per
    /// student, practice, post assessments. Each practice unit is retained
    /// as a case rewarded by the student's score gain.
    pub fn run_tutoring(&mut self, exams: &[Exam], matrix: &SpecificationMatrix, config: &TutoringConfig) -> Result<TutoringReport, AgentError> {
        let needed = config.pre_exams + config.post_exams;
        if config.pre_exams == 0 || config.post_exams == 0 || exams.len() < needed {
            return Err(AgentError::Unavailable(format!(
                "need at least one pre and one post exam ({} pre + {} post), got {} exams",
                config.pre_exams,
                config.post_exams,
                exams.len()
            )));
        }
        let (lo, hi) = config.initial_mastery;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(AgentError::Simulation(format!("bad initial mastery range ({lo}, {hi})")));
        }
        let ontology = SkillOntology::from_matrix(matrix);
        let mut pool: BTreeMap<&str, Vec<&ExamItem>> = BTreeMap::new();
        for item in exams.iter().flat_map(|e| &e.items) {
            if let Some(s) = ontology.skill_for(&item.topic, item.level) {
                pool.entry(s.id.as_str()).or_default().push(item);
            }
        }
        let (pre_exams, rest) = exams.split_at(config.pre_exams);
        let post_exams = &rest[..config.post_exams];
        let sim = &config.simulator;

        let mut profiles = Vec::with_capacity(config.students);
        let mut plans = Vec::with_capacity(config.students);
        for s in 0..config.students {
            let mut rng = seeded_rng(config.seed.wrapping_mul(1_000_003).wrapping_add(s as u64));
            let mastery = ontology.skills().iter().map(|k| (k.id.clone(), rng.random_range(lo..=hi))).collect();
            let mut profile = StudentProfile::new(format!("student-{s:02}"), mastery);
            let mut request = plan(RequestKind::TutorStudent, &profile.student_id, self.retry_budget);
            let request_id = self.open_request(&request, &profile.student_id)?;

            self.set_status(&request_id, &mut request, 0, SubtaskStatus::Running)?;
            let mut graded: Vec<(&ExamItem, ItemScore)> = Vec::new();
            for exam in pre_exams {
                for item in &exam.items {
                    let (_, score) = sim.step(&mut profile, &ontology, item, Phase::Pre, Some(&exam.exam_id), &mut rng)?;
                    graded.push((item, score));
                }
            }
            let pairs: Vec<(&ExamItem, &ItemScore)> = graded.iter().map(|(i, s)| (*i, s)).collect();
            let gaps = analyze_errors(&pairs, &ontology, &config.gaps);
            self.set_status(&request_id, &mut request, 0, SubtaskStatus::Done)?;

            let rec_sub = self.set_status(&request_id, &mut request, 1, SubtaskStatus::Running)?;
            let study = recommend_path(&profile, &gaps, &ontology, &self.bank, self.retriever.as_mut(), &mut rng)?;
            self.set_status(&request_id, &mut request, 1, SubtaskStatus::Done)?;

            self.set_status(&request_id, &mut request, 2, SubtaskStatus::Running)?;
            for unit in &study.units {
                let items = pool.get(unit.skill_id.as_str()).map(Vec::as_slice).unwrap_or_default();
                if items.is_empty() {
                    return Err(AgentError::Simulation(format!("no practice items for skill {}", unit.skill_id)));
                }
                for k in 0..unit.item_count {
                    sim.step(&mut profile, &ontology, items[k % items.len()], Phase::Practice, None, &mut rng)?;
                }
            }
            for exam in post_exams {
                for item in &exam.items {
                    sim.step(&mut profile, &ontology, item, Phase::Post, Some(&exam.exam_id), &mut rng)?;
                }
            }
            let delta = phase_mean_score(&profile, Phase::Post).unwrap_or(0.0) - phase_mean_score(&profile, Phase::Pre).unwrap_or(0.0);
            let reward = composite_reward(delta / 100.0, 0.0, 1.0, &config.reward)?;
            for unit in &study.units {
                let case = Case::new(self.bank.next_id("tutor"), unit.state_text.clone(), format!("practice {} items on skill {}", unit.item_count, unit.skill_id), reward)
                    .with_success(delta > 0.0)
                    .annotate("items", unit.item_count.to_string())
                    .annotate("student", profile.student_id.clone());
                self.retain(&rec_sub, case, None, &unit.retrieved)?;
            }
            self.set_status(&request_id, &mut request, 2, SubtaskStatus::Done)?;
            profiles.push(profile);
            plans.push(study);
        }
        let metrics = tutoring_metrics(&profiles)?;
        Ok(TutoringReport { profiles, plans, metrics })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exam::{MatrixCell, Section, SectionTotals};

    fn item(section: Section, level: CognitiveLevel) -> ExamItem {
        let body = match section {
            Section::I => ItemBody::MultipleChoice { choices: ["1", "2", "3", "4"].map(String::from), key: 2 },
            Section::II => ItemBody::TrueFalseGroup { statements: Default::default(), key: [true, false, true, false] },
            Section::III => ItemBody::ShortAnswer { key: 7.5, round_digits: 2 },
        };
        ExamItem {
            id: QuestionId::new(1, section, level, 0).unwrap(),
            topic: "algebra".into(),
            level,
            stem: "s".into(),
            body,
            solution: String::new(),
            explanation: String::new(),
        }
    }

    fn ontology() -> SkillOntology {
        let m = SpecificationMatrix::new(
            "t",
            SectionTotals { section_i: 1, section_ii: 1, section_iii: 1 },
            vec!["algebra".into()],
            Section::ALL.iter().zip(CognitiveLevel::ALL).map(|(s, l)| MatrixCell {
                topic: "algebra".into(),
                section: *s,
                level: l,
                count: 1,
            }),
        )
        .unwrap();
        SkillOntology::from_matrix(&m)
    }

    fn profile(m: f64) -> StudentProfile {
        StudentProfile::new("s", ontology().skills().iter().map(|k| (k.id.clone(), m)).collect())
    }

    #[test]
    fn ontology_covers_cells() {
        let o = ontology();
        assert_eq!(o.skills().iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["K1.1", "K1.2", "K1.3"]);
    }

    #[test]
    fn full_mastery_always_correct_zero_mastery_short_always_wrong() {
        let sim = StudentSimulator::default();
        let o = ontology();
        let mut rng = seeded_rng(3);
        for (section, level) in Section::ALL.into_iter().zip(CognitiveLevel::ALL) {
            let it = item(section, level);
            let mut p = profile(1.0);
            for _ in 0..200 {
                assert!(sim.step(&mut p, &o, &it, Phase::Pre, None, &mut rng).unwrap().1.is_full());
            }
        }
        let it = item(Section::III, CognitiveLevel::Application);
        let mut p = profile(0.0);
        for _ in 0..200 {
            assert!(!sim.step(&mut p, &o, &it, Phase::Pre, None, &mut rng).unwrap().1.is_full());
        }
    }

    #[test]
    fn practice_moves_mastery_up_within_bounds() {
        let sim = StudentSimulator { learning_rate: 0.1, ..Default::default() };
        let o = ontology();
        let it = item(Section::I, CognitiveLevel::Recognition);
        let mut p = profile(0.2);
        let mut rng = seeded_rng(1);
        sim.step(&mut p, &o, &it, Phase::Pre, None, &mut rng).unwrap();
        assert_eq!(p.mastery("K1.1"), 0.2);
        let mut prev = 0.2;
        for _ in 0..100 {
            sim.step(&mut p, &o, &it, Phase::Practice, None, &mut rng).unwrap();
            let m = p.mastery("K1.1");
            assert!(m >= prev && m <= 1.0);
            prev = m;
        }
        assert!((p.mastery("K1.1") - (1.0 - 0.8 * 0.9f64.powi(100))).abs() < 1e-12);
    }

    #[test]
    fn unmapped_item_is_simulation_error() {
        let mut it = item(Section::I, CognitiveLevel::Recognition);
        it.topic = "geometry".into();
        let err = StudentSimulator::default().step(&mut profile(0.5), &ontology(), &it, Phase::Pre, None, &mut seeded_rng(0));
        assert!(matches!(err, Err(AgentError::Simulation(_))));
    }

    #[test]
    fn gaps_follow_threshold_and_order() {
        let o = ontology();
        let a = item(Section::I, CognitiveLevel::Recognition);
        let b = item(Section::II, CognitiveLevel::Comprehension);
        let right = ItemScore { points: 1.0, max_points: 1.0, correct_parts: 1 };
        let wrong = ItemScore { points: 0.0, max_points: 1.0, correct_parts: 0 };
        let graded = [(&a, &wrong), (&a, &wrong), (&b, &wrong), (&b, &right), (&b, &wrong)];
        let report = analyze_errors(&graded, &o, &GapConfig::default());
        assert_eq!(report.gaps.iter().map(|g| g.skill_id.as_str()).collect::<Vec<_>>(), ["K1.1", "K1.2"]);
        assert_eq!(report.gaps[0].severity, 1.0);
        // 1 of 2 wrong is not above 0.5
        let report = analyze_errors(&[(&a, &wrong), (&a, &right)], &o, &GapConfig::default());
        assert!(report.gaps.is_empty());
    }

    #[test]
    fn empty_gaps_give_empty_plan() {
        let plan = recommend_path(&profile(0.5), &GapReport::default(), &ontology(), &CaseBank::new(), None, &mut seeded_rng(0)).unwrap();
        assert!(plan.units.is_empty());
        assert!(plan.rationale.starts_with("no gaps"));
    }

    #[test]
    fn identical_phases_give_zero_delta() {
        let o = ontology();
        let mut p = profile(0.5);
        let sim = StudentSimulator::default();
        let it = item(Section::I, CognitiveLevel::Recognition);
        let mut rng = seeded_rng(5);
        sim.step(&mut p, &o, &it, Phase::Pre, Some("x"), &mut rng).unwrap();
        let mut post = p.history[0].clone();
        post.phase = Phase::Post;
        p.history.push(post);
        assert_eq!(tutoring_metrics(&[p.clone()]).unwrap().delta_score, 0.0);
        p.history.retain(|a| a.phase == Phase::Pre);
        assert!(matches!(tutoring_metrics(&[p]), Err(AgentError::Unavailable(_))));
    }
}
