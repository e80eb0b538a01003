use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{AblationRow, HarnessError, Metric, MetricsReport, RowOutcome, RunConfig};

/// What every command writes: the config it ran with, metrics when the
/// command produces any, command-specific details and a content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub metrics: Option<MetricsReport>,
    pub details: Value,
    /// SHA-256 of the report with wall-clock fields removed.
    pub report_hash: String,
}

/// Drops every object key starting with `latency`, at any depth.
fn strip_latency(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|k, _| !k.starts_with("latency"));
            map.values_mut().for_each(strip_latency);
        }
        Value::Array(xs) => xs.iter_mut().for_each(strip_latency),
        _ => {}
    }
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig, metrics: Option<MetricsReport>, details: Value) -> Result<Self, HarnessError> {
        let mut report = RunReport {
            command: command.to_string(),
            config: config.clone(),
            metrics,
            details,
            report_hash: String::new(),
        };
        report.report_hash = report.compute_hash()?;
        Ok(report)
    }

    /// The report as JSON without wall-clock fields, output location or hash.
    pub fn normalized_value(&self) -> Result<Value, HarnessError> {
        let mut v = serde_json::to_value(self)?;
        strip_latency(&mut v);
        if let Value::Object(map) = &mut v {
            map.remove("report_hash");
            if let Some(Value::Object(config)) = map.get_mut("config") {
                config.remove("out_dir");
            }
        }
        Ok(v)
    }

    pub fn compute_hash(&self) -> Result<String, HarnessError> {
        let bytes = serde_json::to_vec(&self.normalized_value()?)?;
        Ok(sha256_hex(&bytes))
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut value = if self.config.normalize_timestamps { self.normalized_value()? } else { serde_json::to_value(self)? };
        if let Value::Object(map) = &mut value {
            map.insert("report_hash".into(), Value::String(self.report_hash.clone()));
        }
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&value)?)?;
        std::fs::write(dir.join("report.txt"), self.render())?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = format!("command: {}\nseed: {}  memory: {}\nreport hash: {}\n", self.command, self.config.seed, self.config.memory, self.report_hash);
        if let Some(m) = &self.metrics {
            out.push('\n');
            out.push_str(&render_metrics_table(m));
        }
        out
    }
}

fn cell(m: &Metric) -> String {
    match m {
        Metric::Computed { value } => format!("{value:.2}"),
        Metric::Recorded { value } => format!("{value:.2} (recorded)"),
        Metric::Unavailable { .. } => "n/a".into(),
    }
}

pub fn render_metrics_table(m: &MetricsReport) -> String {
    let rows: [(&str, &Metric); 15] = [
        ("item accuracy (%)", &m.item_accuracy),
        ("set-level accuracy (%)", &m.set_level_accuracy),
        ("section I accuracy (%)", &m.section_accuracy[0]),
        ("section II accuracy (%)", &m.section_accuracy[1]),
        ("section III accuracy (%)", &m.section_accuracy[2]),
        ("matrix compliance (%)", &m.compliance_rate),
        ("mean stem overlap (%)", &m.mean_novelty),
        ("step proxy (%)", &m.step_proxy),
        ("delta score", &m.delta_score),
        ("path effectiveness (%)", &m.path_effectiveness),
        ("latency mean (s)", &m.latency_mean_s),
        ("latency p95 (s)", &m.latency_p95_s),
        ("teacher rating", &m.teacher_rating),
        ("explanation quality", &m.explanation_quality),
        ("engagement", &m.engagement),
    ];
    let mut out = format!("{:<26} {:>18}\n", format!("metric ({} exams, {} items)", m.exams, m.items), "value");
    for (name, metric) in rows {
        let _ = writeln!(out, "{name:<26} {:>18}", cell(metric));
    }
    out
}

pub fn render_ablation_table(rows: &[AblationRow]) -> String {
    let mut out = format!(
        "{:<12} {:>9} {:>9} {:>9} {:>11} {:>11} {:>7}\n",
        "variant", "acc (%)", "hard (%)", "steps (%)", "lat mean s", "lat p95 s", "calls"
    );
    let opt = |v: Option<f64>, digits: usize| v.map_or("n/a".to_string(), |x| format!("{x:.digits$}"));
    for row in rows {
        match &row.outcome {
            RowOutcome::Ok { accuracy, hard_accuracy, step_proxy, latency_mean_s, latency_p95_s, retrieval_calls, .. } => {
                let _ = writeln!(
                    out,
                    "{:<12} {:>9} {:>9} {:>9} {:>11} {:>11} {:>7}",
                    row.variant.label(),
                    opt(Some(*accuracy), 1),
                    opt(*hard_accuracy, 1),
                    opt(Some(*step_proxy), 1),
                    opt(Some(*latency_mean_s), 6),
                    opt(Some(*latency_p95_s), 6),
                    retrieval_calls
                );
            }
            RowOutcome::Failed { error } => {
                let _ = writeln!(out, "{:<12} failed: {error}", row.variant.label());
            }
        }
    }
    out
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_latency_keys() {
        let c = RunConfig::default();
        let a = RunReport::new("x", &c, None, serde_json::json!({"rows": [{"acc": 1.0, "latency_mean_s": 0.1}]})).unwrap();
        let b = RunReport::new("x", &c, None, serde_json::json!({"rows": [{"acc": 1.0, "latency_mean_s": 0.7}]})).unwrap();
        let d = RunReport::new("x", &c, None, serde_json::json!({"rows": [{"acc": 0.5, "latency_mean_s": 0.1}]})).unwrap();
        assert_eq!(a.report_hash, b.report_hash);
        assert_ne!(a.report_hash, d.report_hash);
        assert_eq!(a.report_hash.len(), 64);
    }
}
