use serde::{Deserialize, Serialize};

const SLOT_TITLES: [&str; 8] = [
    "Content requirement",
    "Competency",
    "Criteria",
    "Indicator",
    "Cognitive level",
    "Question format",
    "Review orientation",
    "Review topics",
];

/// Eight named text slots of an item explanation. Contents are opaque.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationOutline {
    pub content_requirement: String,
    pub competency: String,
    pub criteria: String,
    pub indicator: String,
    pub cognitive_level: String,
    pub question_format: String,
    pub review_orientation: String,
    pub review_topics: String,
}

impl ExplanationOutline {
    fn slots(&self) -> [&String; 8] {
        [
            &self.content_requirement,
            &self.competency,
            &self.criteria,
            &self.indicator,
            &self.cognitive_level,
            &self.question_format,
            &self.review_orientation,
            &self.review_topics,
        ]
    }

    fn slots_mut(&mut self) -> [&mut String; 8] {
        [
            &mut self.content_requirement,
            &mut self.competency,
            &mut self.criteria,
            &mut self.indicator,
            &mut self.cognitive_level,
            &mut self.question_format,
            &mut self.review_orientation,
            &mut self.review_topics,
        ]
    }

    /// Numbered lines `1. Content requirement: ...`.
    pub fn render(&self) -> String {
        SLOT_TITLES
            .iter()
            .zip(self.slots())
            .enumerate()
            .map(|(i, (title, text))| format!("{}. {title}: {text}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Inverse of [`render`](Self::render). Lines that do not open a slot
    /// continue the previous one.
    pub fn parse(text: &str) -> Option<Self> {
        let mut out = ExplanationOutline::default();
        let mut current: Option<usize> = None;
        let mut seen = [false; 8];
        for line in text.lines() {
            let opened = SLOT_TITLES.iter().enumerate().find_map(|(i, title)| {
                line.strip_prefix(&format!("{}. {title}:", i + 1)).map(|rest| (i, rest.trim_start()))
            });
            match (opened, current) {
                (Some((i, rest)), _) => {
                    *out.slots_mut()[i] = rest.to_string();
                    seen[i] = true;
                    current = Some(i);
                }
                (None, Some(i)) => {
                    let slot = &mut out.slots_mut()[i];
                    slot.push('\n');
                    slot.push_str(line);
                }
                (None, None) if line.trim().is_empty() => {}
                (None, None) => return None,
            }
        }
        seen.iter().all(|s| *s).then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let o = ExplanationOutline {
            content_requirement: "Grouped data statistics".into(),
            review_topics: "variance\nstandard deviation".into(),
            ..Default::default()
        };
        let text = o.render();
        assert!(text.starts_with("1. Content requirement: Grouped"));
        assert_eq!(ExplanationOutline::parse(&text), Some(o));
        assert_eq!(ExplanationOutline::parse("1. Content requirement: x"), None);
    }
}
