//! Bundled fixtures: the 2025 matrix, a compliant 12/4/6 exam, the same exam
//! with one item removed, four published sample items and a plain-text
//! section I listing.

use crate::exam::{parse_exam, Exam, ExamError, SpecificationMatrix};

pub const MATRIX_2025: &str = include_str!("../../fixtures/matrix_2025.json");
pub const EXAM_2025: &str = include_str!("../../fixtures/exam_2025.json");
pub const EXAM_2025_PERTURBED: &str = include_str!("../../fixtures/exam_2025_perturbed.json");
pub const APPENDIX_EXAM: &str = include_str!("../../fixtures/appendix_exam.json");
pub const PLAIN_SECTION_I: &str = include_str!("../../fixtures/plain_12.txt");

pub fn matrix_2025() -> Result<SpecificationMatrix, ExamError> {
    SpecificationMatrix::from_json(MATRIX_2025)
}

pub fn exam_2025() -> Result<Exam, ExamError> {
    parse_exam(EXAM_2025.as_bytes())
}

pub fn exam_2025_perturbed() -> Result<Exam, ExamError> {
    parse_exam(EXAM_2025_PERTURBED.as_bytes())
}

pub fn appendix_exam() -> Result<Exam, ExamError> {
    parse_exam(APPENDIX_EXAM.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixtures_parse() {
        let m = matrix_2025().unwrap();
        assert_eq!(m.totals().total(), 22);
        assert_eq!(exam_2025().unwrap().items.len(), 22);
        assert_eq!(exam_2025_perturbed().unwrap().items.len(), 21);
        assert_eq!(appendix_exam().unwrap().items.len(), 4);
    }
}
