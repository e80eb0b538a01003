//! Command-line surface over the harness. `run` returns the process exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mathprep_core::agents::{normalize_input, parse_response, AgentError, AgentSession, GenerateOptions, MockBackend};
use mathprep_core::exam::{parse_exam, score_exam, validate_exam, Exam, ExamError, Provenance, Response, ScoringScheme, SpecificationMatrix};
use mathprep_core::harness::{
    ablation_workload, fixtures, render_ablation_table, run_ablation, run_pipeline, run_tutor_sim, train_chain, BackendKind,
    ChainTrainingConfig, HarnessError, MemoryMode, RecordedRatings, RowOutcome, RunConfig, RunReport,
};
use mathprep_core::memory::{load_bank_file, CaseBank, LoadOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;
pub const EXIT_ASSERTION: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "mathprep", version, about = "Exam generation, solving and tutoring experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Retrieval variant: none, readnp or readp.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// mock or http.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Case bank (JSON Lines) to start from.
    #[arg(long, global = true)]
    bank: Option<PathBuf>,
    /// Directory for the report and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Specification matrix (JSON); defaults to the bundled 2025 matrix.
    #[arg(long, global = true)]
    matrix: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate one exam from the matrix.
    Gen,
    /// Check an exam against the matrix.
    Validate { exam: PathBuf },
    /// Grade responses (a JSON array of answer strings) against an exam.
    Grade { exam: PathBuf, responses: PathBuf },
    /// Solve an exam document (JSON or plain text) and grade it.
    Solve {
        document: PathBuf,
        /// Withhold every n-th item from the mock's answer key.
        #[arg(long, default_value_t = 0)]
        withhold_every: usize,
    },
    /// Simulate a tutoring cohort.
    TutorSim {
        #[arg(long)]
        students: Option<usize>,
    },
    /// Train the kernel on the chain task and compare with value iteration.
    TrainQ {
        #[arg(long, default_value_t = 1.0)]
        length_scale: f64,
        #[arg(long, default_value_t = 5000)]
        max_updates: u64,
    },
    /// Full generate, validate, solve, grade and evaluate pipeline.
    Eval {
        #[arg(long)]
        exams: Option<usize>,
        #[arg(long)]
        withhold_every: Option<usize>,
        /// Human ratings to pass through (JSON).
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
    /// Compare the memory variants on the designed workload.
    Ablate {
        /// Generated exams added to the fixture exam.
        #[arg(long, default_value_t = 4)]
        extra_exams: usize,
    },
}

/// Error type of a command, carrying the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::Config(_) => EXIT_USAGE,
            HarnessError::Compliance(_) | HarnessError::Assertion(_) => EXIT_ASSERTION,
            HarnessError::Exam(_) | HarnessError::Json(_) => EXIT_SCHEMA,
            HarnessError::Memory(_) => EXIT_SCHEMA,
            HarnessError::Agent(a) => agent_code(a),
            HarnessError::Retrieval(_) | HarnessError::Mmdp(_) | HarnessError::Io(_) => EXIT_OTHER,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<ExamError> for Failure {
    fn from(e: ExamError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        HarnessError::from(e).into()
    }
}

fn agent_code(e: &AgentError) -> i32 {
    match e {
        AgentError::Backend(_) | AgentError::Generation { .. } => EXIT_BACKEND,
        AgentError::Unsupported(_) | AgentError::Format(_) | AgentError::Exam(_) => EXIT_SCHEMA,
        AgentError::NonCompliant { .. } => EXIT_ASSERTION,
        _ => EXIT_OTHER,
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_OTHER, message: format!("{}: {e}", path.display()) }
}

/// Parses `argv` (program name first), runs the command and returns its exit code.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn build_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Some(m) = &c.mode {
        config.memory = m.parse::<MemoryMode>()?;
    }
    if let Some(k) = c.k {
        config.k = k;
    }
    if let Some(a) = c.alpha {
        config.alpha = a;
    }
    if let Some(b) = &c.backend {
        config.backend = b.parse::<BackendKind>()?;
    }
    if c.bank.is_some() {
        config.bank_path = c.bank.clone();
    }
    if c.out.is_some() {
        config.out_dir = c.out.clone();
    }
    if c.matrix.is_some() {
        config.matrix_path = c.matrix.clone();
    }
    config.validate()?;
    Ok(config)
}

fn load_matrix(config: &RunConfig) -> Result<SpecificationMatrix, Failure> {
    match &config.matrix_path {
        Some(p) => Ok(SpecificationMatrix::from_json(&std::fs::read_to_string(p).map_err(|e| io_failure(p, e))?)?),
        None => Ok(fixtures::matrix_2025()?),
    }
}

fn load_bank(config: &RunConfig) -> Result<CaseBank, Failure> {
    match &config.bank_path {
        Some(p) => Ok(load_bank_file(p, LoadOptions::default()).map_err(HarnessError::from)?.0),
        None => Ok(CaseBank::new()),
    }
}

fn read_exam(path: &Path) -> Result<Exam, Failure> {
    Ok(parse_exam(&std::fs::read(path).map_err(|e| io_failure(path, e))?)?)
}

/// Writes the report when an output directory is set and prints its summary.
fn finish(report: &RunReport, out: &mut dyn Write) -> Result<(), Failure> {
    if let Some(dir) = &report.config.out_dir {
        report.write(dir)?;
    }
    let _ = write!(out, "{}", report.render());
    Ok(())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut config = build_config(&cli.common)?;
    match cli.command {
        Command::Gen => {
            let matrix = load_matrix(&config)?;
            let mut session = AgentSession::new(config.build_backend(MockBackend::new())?, load_bank(&config)?, config.build_retriever()?);
            let g = session.generate_exam(&matrix, &mut GenerateOptions::default(), config.seed)?;
            let exam_json = mathprep_core::exam::serialize_exam(&g.exam);
            let details = json!({
                "exam_id": g.exam.exam_id,
                "items": g.exam.items.len(),
                "compliance": g.compliance,
                "regenerations": g.plan.regenerations(),
                "exam_sha256": sha_hex(&exam_json),
            });
            let report = RunReport::new("gen", &config, None, details)?;
            match &config.out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
                    let path = dir.join("exam.json");
                    std::fs::write(&path, &exam_json).map_err(|e| io_failure(&path, e))?;
                    finish(&report, out)?;
                }
                None => {
                    let _ = out.write_all(&exam_json);
                    let _ = writeln!(out);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Validate { exam } => {
            let matrix = load_matrix(&config)?;
            let exam = read_exam(&exam)?;
            let compliance = validate_exam(&exam, &matrix);
            let report = RunReport::new("validate", &config, None, json!({"exam_id": exam.exam_id, "compliance": compliance}))?;
            finish(&report, out)?;
            let _ = writeln!(out, "compliance rate: {:.4}", compliance.rate);
            for v in &compliance.violations {
                let _ = writeln!(
                    out,
                    "violation: {} / section {} / level {}: required {}, found {}",
                    v.cell.topic, v.cell.section, v.cell.level, v.required, v.found
                );
            }
            Ok(if compliance.compliant { EXIT_OK } else { EXIT_ASSERTION })
        }
        Command::Grade { exam, responses } => {
            let exam = read_exam(&exam)?;
            let text = std::fs::read_to_string(&responses).map_err(|e| io_failure(&responses, e))?;
            let raw: Vec<String> = serde_json::from_str(&text).map_err(HarnessError::from)?;
            if raw.len() != exam.items.len() {
                return Err(HarnessError::Exam(ExamError::Format(format!("{} responses for {} items", raw.len(), exam.items.len()))).into());
            }
            let parsed: Vec<Response> = exam
                .items
                .iter()
                .zip(&raw)
                .map(|(item, r)| if r.trim().is_empty() || r.trim() == "-" { Response::Unanswered } else { parse_response(r, &item.body).unwrap_or(Response::Unanswered) })
                .collect();
            let score = score_exam(&exam, &parsed, &ScoringScheme::default())?;
            let details = json!({
                "exam_id": exam.exam_id,
                "items": exam.items.iter().zip(&score.items).map(|(i, s)| json!({"id": i.id.to_string(), "points": s.points, "max": s.max_points})).collect::<Vec<_>>(),
                "section_points": score.section_points,
                "total": score.total,
                "max_total": score.max_total,
                "set_perfect": score.set_perfect,
            });
            let report = RunReport::new("grade", &config, None, details)?;
            finish(&report, out)?;
            let _ = writeln!(out, "score: {} / {}", score.total, score.max_total);
            Ok(EXIT_OK)
        }
        Command::Solve { document, withhold_every } => {
            config.withhold_every = withhold_every;
            let matrix = load_matrix(&config)?;
            let bytes = std::fs::read(&document).map_err(|e| io_failure(&document, e))?;
            let items = normalize_input(&bytes, &matrix)?;
            let exam_id = document.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
            let exam = Exam::new(exam_id, Provenance::Ingested, items);
            let mut mock = MockBackend::new();
            for (n, item) in exam.items.iter().enumerate() {
                if withhold_every == 0 || (n + 1) % withhold_every != 0 {
                    mock.learn_item(item);
                }
            }
            let mut session = AgentSession::new(config.build_backend(mock)?, load_bank(&config)?, config.build_retriever()?);
            let solved = session.solve_exam(&exam, &ScoringScheme::default(), config.seed)?;
            let details = json!({
                "exam_id": exam.exam_id,
                "answers": solved.solved.iter().map(|s| json!({"id": s.item_id.to_string(), "answer": s.response.render(), "flagged": s.flagged})).collect::<Vec<_>>(),
                "total": solved.score.total,
                "max_total": solved.score.max_total,
            });
            let report = RunReport::new("solve", &config, None, details)?;
            finish(&report, out)?;
            let _ = writeln!(out, "score: {} / {}", solved.score.total, solved.score.max_total);
            Ok(EXIT_OK)
        }
        Command::TutorSim { students } => {
            if let Some(s) = students {
                config.students = s;
            }
            let matrix = load_matrix(&config)?;
            let (_, report) = run_tutor_sim(&config, &matrix)?;
            let _ = write!(out, "{}", report.render());
            Ok(EXIT_OK)
        }
        Command::TrainQ { length_scale, max_updates } => {
            let tc = ChainTrainingConfig { seed: config.seed, length_scale, max_updates, ..Default::default() };
            let t = train_chain(&tc)?;
            let report = RunReport::new("train-q", &config, None, serde_json::to_value(&t).map_err(HarnessError::from)?)?;
            finish(&report, out)?;
            let _ = writeln!(out, "start-state Q {:.4} (oracle {:.4}) after {} updates", t.final_q, t.oracle, t.updates);
            Ok(if t.converged { EXIT_OK } else { EXIT_ASSERTION })
        }
        Command::Eval { exams, withhold_every, ratings } => {
            if let Some(n) = exams {
                config.exams = n;
            }
            if let Some(w) = withhold_every {
                config.withhold_every = w;
            }
            let ratings = match ratings {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| io_failure(&p, e))?;
                    Some(serde_json::from_str::<RecordedRatings>(&text).map_err(HarnessError::from)?)
                }
                None => None,
            };
            let matrix = load_matrix(&config)?;
            let outcome = run_pipeline(&config, &matrix, load_bank(&config)?, ratings)?;
            let _ = write!(out, "{}", outcome.report.render());
            Ok(EXIT_OK)
        }
        Command::Ablate { extra_exams } => {
            let matrix = load_matrix(&config)?;
            let workload = ablation_workload(&matrix, extra_exams, config.seed)?;
            let rows = run_ablation(&workload, &MemoryMode::ALL, &config);
            let details = json!({"withheld": workload.withheld, "distracted": workload.distracted, "rows": rows});
            let report = RunReport::new("ablate", &config, None, details)?;
            finish(&report, out)?;
            let _ = write!(out, "\n{}", render_ablation_table(&rows));
            let failed = rows.iter().any(|r| matches!(r.outcome, RowOutcome::Failed { .. }));
            Ok(if failed { EXIT_ASSERTION } else { EXIT_OK })
        }
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    mathprep_core::harness::sha256_hex(bytes)
}
