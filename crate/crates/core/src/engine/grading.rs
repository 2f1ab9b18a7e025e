//! Per-kind graders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::fragment::{
    answers_match, normalize_answer, AnswerSpec, CloseEndedData, CodingData, QuizData,
    DEFAULT_TOLERANCE,
};

/// Line prefix under which echo-graded submissions declare one output per test vector.
pub const OUTPUT_MARKER: &str = "#|out:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub passed: bool,
    pub score: f64,
    /// Normalized answer (close-ended only).
    pub answer: String,
    /// Matched distractor label (close-ended only).
    pub label: String,
    pub feedback: String,
    pub detail: BTreeMap<String, String>,
}

impl ValidationOutcome {
    fn new(passed: bool, score: f64, feedback: impl Into<String>) -> Self {
        ValidationOutcome {
            passed,
            score,
            answer: String::new(),
            label: String::new(),
            feedback: feedback.into(),
            detail: BTreeMap::new(),
        }
    }
}

/// How coding submissions' outputs are checked against test vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputGrader {
    /// Ignore test vectors; only static checks apply.
    StaticOnly,
    /// The submission declares its outputs on `#|out:` lines, one per vector,
    /// compared byte-wise with the expected outputs.
    #[default]
    Echo,
}

pub fn grade_lesson() -> ValidationOutcome {
    ValidationOutcome::new(true, 1.0, "lesson completed")
}

pub fn grade_close_ended(data: &CloseEndedData, answer: &str) -> ValidationOutcome {
    let normalized = normalize_answer(answer);
    let passed = match &data.expected {
        AnswerSpec::Text(text) => {
            answers_match(&normalized, &normalize_answer(text), DEFAULT_TOLERANCE)
        }
        AnswerSpec::Number { number, tolerance } => {
            answers_match(&normalized, &number.to_string(), *tolerance)
        }
    };
    let label = if passed {
        String::new()
    } else {
        data.distractors
            .iter()
            .find(|(key, _)| answers_match(&normalized, &normalize_answer(key), DEFAULT_TOLERANCE))
            .map(|(_, label)| label.clone())
            .unwrap_or_default()
    };
    let feedback = match (passed, label.is_empty()) {
        (true, _) => "correct".to_string(),
        (false, true) => "incorrect".to_string(),
        (false, false) => format!("incorrect ({label})"),
    };
    let mut outcome = ValidationOutcome::new(passed, if passed { 1.0 } else { 0.0 }, feedback);
    outcome.answer = normalized;
    outcome.label = label;
    outcome
}

pub fn grade_quiz(data: &QuizData, choices: &[usize]) -> Result<ValidationOutcome, EngineError> {
    if choices.len() != data.items.len() {
        return Err(EngineError::ShapeMismatch(format!(
            "{} choices for {} items",
            choices.len(),
            data.items.len()
        )));
    }
    let mut correct = 0usize;
    let mut detail = BTreeMap::new();
    for (i, (item, &choice)) in data.items.iter().zip(choices).enumerate() {
        if choice >= item.choices.len() {
            return Err(EngineError::ShapeMismatch(format!(
                "item {i}: choice {choice} out of range"
            )));
        }
        let right = choice == item.correct;
        correct += usize::from(right);
        detail.insert(format!("item.{i}"), if right { "correct" } else { "incorrect" }.into());
    }
    let score = correct as f64 / data.items.len() as f64;
    let passed = score >= data.pass_threshold;
    let mut outcome = ValidationOutcome::new(
        passed,
        score,
        format!("{correct}/{} correct", data.items.len()),
    );
    outcome.detail = detail;
    Ok(outcome)
}

/// Number of occurrences of `keyword` in `source`. Alphanumeric keywords
/// only count at identifier boundaries, so `if` does not match inside `elif`
/// or `diff`; symbolic keywords such as `&&` count as plain substrings.
pub fn count_keyword(source: &str, keyword: &str) -> usize {
    if keyword.is_empty() {
        return 0;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let wordy = keyword.chars().all(is_word);
    source
        .match_indices(keyword)
        .filter(|(at, _)| {
            if !wordy {
                return true;
            }
            let before = source[..*at].chars().next_back();
            let after = source[at + keyword.len()..].chars().next();
            !before.is_some_and(is_word) && !after.is_some_and(is_word)
        })
        .count()
}

/// `1 + total branch-keyword occurrences`.
pub fn complexity_estimate(source: &str, branch_keywords: &[String]) -> usize {
    1 + branch_keywords
        .iter()
        .map(|k| count_keyword(source, k))
        .sum::<usize>()
}

pub fn grade_coding(data: &CodingData, source: &str, output: OutputGrader) -> ValidationOutcome {
    let grader = &data.grader;
    let mut detail = BTreeMap::new();
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let missing: Vec<&str> = grader
        .required_tokens
        .iter()
        .filter(|t| !source.contains(t.as_str()))
        .map(String::as_str)
        .collect();
    detail.insert(
        "required_tokens".to_string(),
        if missing.is_empty() { "ok".into() } else { format!("missing: {}", missing.join(", ")) },
    );
    checks.push(("required_tokens", missing.is_empty()));

    let present: Vec<&str> = grader
        .forbidden_tokens
        .iter()
        .filter(|t| source.contains(t.as_str()))
        .map(String::as_str)
        .collect();
    detail.insert(
        "forbidden_tokens".to_string(),
        if present.is_empty() { "ok".into() } else { format!("present: {}", present.join(", ")) },
    );
    checks.push(("forbidden_tokens", present.is_empty()));

    let complexity = complexity_estimate(source, &grader.branch_keywords);
    detail.insert("complexity".to_string(), complexity.to_string());
    if let Some(max) = grader.complexity_max {
        checks.push(("complexity", complexity <= max as usize));
    }

    if output == OutputGrader::Echo && !grader.test_vectors.is_empty() {
        let declared: Vec<&str> = source
            .lines()
            .filter_map(|line| line.strip_prefix(OUTPUT_MARKER))
            .collect();
        let matched = grader
            .test_vectors
            .iter()
            .zip(&declared)
            .filter(|(v, out)| v.expected_output.as_bytes() == out.as_bytes())
            .count();
        let ok = declared.len() == grader.test_vectors.len() && matched == declared.len();
        detail.insert(
            "outputs".to_string(),
            format!("{matched}/{} match", grader.test_vectors.len()),
        );
        checks.push(("outputs", ok));
    }

    let passed_checks = checks.iter().filter(|(_, ok)| *ok).count();
    let passed = passed_checks == checks.len();
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let feedback = if passed {
        "all checks passed".to_string()
    } else {
        format!("failed checks: {}", failed.join(", "))
    };
    let mut outcome = ValidationOutcome::new(
        passed,
        passed_checks as f64 / checks.len() as f64,
        feedback,
    );
    outcome.detail = detail;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragment::{GraderSpec, QuizItem, TestVector};

    fn median_question() -> CloseEndedData {
        CloseEndedData {
            prompt: "median?".into(),
            expected: AnswerSpec::Text("3".into()),
            distractors: [("4".to_string(), "average_value".to_string())].into(),
        }
    }

    #[test]
    fn lesson_always_passes() {
        for _ in 0..2 {
            let o = grade_lesson();
            assert!(o.passed);
            assert_eq!(o.score, 1.0);
            assert_eq!(o.label, "");
        }
    }

    #[test]
    fn numeric_answer_after_normalization() {
        let data = CloseEndedData {
            prompt: "?".into(),
            expected: AnswerSpec::Number {
                number: 3.0,
                tolerance: 1e-9,
            },
            distractors: BTreeMap::new(),
        };
        let o = grade_close_ended(&data, " 3.0 ");
        assert!(o.passed);
        assert_eq!(o.answer, "3.0");
    }

    #[test]
    fn distractor_label() {
        let o = grade_close_ended(&median_question(), "4");
        assert!(!o.passed);
        assert_eq!(o.label, "average_value");
        let o = grade_close_ended(&median_question(), "4.0");
        assert_eq!(o.label, "average_value");
        let o = grade_close_ended(&median_question(), "7");
        assert!(!o.passed);
        assert_eq!(o.label, "");
        let o = grade_close_ended(&median_question(), "3");
        assert!(o.passed);
        assert_eq!(o.label, "");
    }

    fn quiz(n: usize) -> QuizData {
        QuizData {
            items: (0..n)
                .map(|i| QuizItem {
                    stem: format!("q{i}"),
                    choices: vec!["a".into(), "b".into()],
                    correct: 0,
                })
                .collect(),
            pass_threshold: 0.6,
        }
    }

    #[test]
    fn quiz_scores() {
        let o = grade_quiz(&quiz(4), &[0, 0, 0, 1]).unwrap();
        assert_eq!(o.score, 0.75);
        assert!(o.passed);
        let o = grade_quiz(&quiz(4), &[0, 0, 1, 1]).unwrap();
        assert_eq!(o.score, 0.5);
        assert!(!o.passed);
        assert!(matches!(
            grade_quiz(&quiz(4), &[0, 0, 0]),
            Err(EngineError::ShapeMismatch(_))
        ));
        assert!(matches!(
            grade_quiz(&quiz(2), &[0, 5]),
            Err(EngineError::ShapeMismatch(_))
        ));
    }

    fn coding(required: &[&str], forbidden: &[&str], max: Option<u32>) -> CodingData {
        CodingData {
            statement: "s".into(),
            grader: GraderSpec {
                required_tokens: required.iter().map(|s| s.to_string()).collect(),
                forbidden_tokens: forbidden.iter().map(|s| s.to_string()).collect(),
                complexity_max: max,
                ..GraderSpec::default()
            },
        }
    }

    #[test]
    fn coding_passes_static_checks() {
        let source = "def median(values):\n    s = sorted(values)\n    if len(s) % 2:\n        return s[len(s) // 2]\n    else:\n        return (s[len(s)//2 - 1] + s[len(s)//2]) / 2\n";
        let o = grade_coding(&coding(&["median"], &[], Some(10)), source, OutputGrader::StaticOnly);
        assert!(o.passed, "{o:?}");
        assert_eq!(o.detail["complexity"], "3");
        assert_eq!(o.score, 1.0);
    }

    #[test]
    fn coding_complexity_over_limit() {
        let source = "if x: pass\n".repeat(12);
        let o = grade_coding(&coding(&[], &[], Some(10)), &source, OutputGrader::StaticOnly);
        assert!(!o.passed);
        assert_eq!(o.detail["complexity"], "13");
    }

    #[test]
    fn coding_forbidden_token() {
        let o = grade_coding(
            &coding(&[], &["sort"], None),
            "values.sort()",
            OutputGrader::StaticOnly,
        );
        assert!(!o.passed);
        assert!(o.detail["forbidden_tokens"].contains("sort"));
        assert_eq!(o.score, 0.5);
    }

    #[test]
    fn keyword_boundaries() {
        assert_eq!(count_keyword("elif diff if(x)", "if"), 1);
        assert_eq!(count_keyword("a && b && c", "&&"), 2);
        assert_eq!(count_keyword("for_each for x", "for"), 1);
    }

    #[test]
    fn echo_grader_compares_declared_outputs() {
        let mut data = coding(&[], &[], None);
        data.grader.test_vectors = vec![
            TestVector {
                input: "1 2 3".into(),
                expected_output: "2".into(),
            },
            TestVector {
                input: "1 2".into(),
                expected_output: "1.5".into(),
            },
        ];
        let good = "code\n#|out:2\n#|out:1.5\n";
        assert!(grade_coding(&data, good, OutputGrader::Echo).passed);
        let wrong = "code\n#|out:2\n#|out:1.50\n";
        let o = grade_coding(&data, wrong, OutputGrader::Echo);
        assert!(!o.passed);
        assert_eq!(o.detail["outputs"], "1/2 match");
        let short = "#|out:2\n";
        assert!(!grade_coding(&data, short, OutputGrader::Echo).passed);
        assert!(grade_coding(&data, "", OutputGrader::StaticOnly).passed);
    }
}
