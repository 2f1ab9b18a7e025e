use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use super::SimulationError;
use crate::engine::{OutputGrader, Submission, OUTPUT_MARKER};
use crate::fragment::{
    answers_match, normalize_answer, ActivityKind, ActivityNode, AnswerSpec, CloseEndedData,
    CodingData, KindData, NodeId, QuizData, DEFAULT_TOLERANCE,
};

/// Answer distribution for one close-ended node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerDistribution {
    pub correct: f64,
    /// Probability of answering with the distractor carrying each label.
    #[serde(default)]
    pub distractors: BTreeMap<String, f64>,
    #[serde(default)]
    pub other: f64,
}

/// A synthetic learner. Kinds missing from `pass_probability` always pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentModel {
    #[serde(default)]
    pub pass_probability: BTreeMap<ActivityKind, f64>,
    /// Per-item correctness; defaults to the quiz pass probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quiz_item_probability: Option<f64>,
    /// Defaults to the coding pass probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coding_pass_probability: Option<f64>,
    #[serde(default)]
    pub close_ended: BTreeMap<NodeId, AnswerDistribution>,
}

impl StudentModel {
    /// Every graded activity passes (or every quiz item is right) with `p`.
    pub fn uniform(p: f64) -> Self {
        StudentModel {
            pass_probability: [ActivityKind::CloseEnded, ActivityKind::Quiz, ActivityKind::Coding]
                .into_iter()
                .map(|k| (k, p))
                .collect(),
            quiz_item_probability: Some(p),
            coding_pass_probability: Some(p),
            close_ended: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let in_unit = |name: String, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(SimulationError::InvalidModel(format!("{name} = {p} is outside [0, 1]")))
            }
        };
        for (kind, p) in &self.pass_probability {
            in_unit(format!("pass_probability.{}", kind.as_str()), *p)?;
        }
        if let Some(p) = self.quiz_item_probability {
            in_unit("quiz_item_probability".into(), p)?;
        }
        if let Some(p) = self.coding_pass_probability {
            in_unit("coding_pass_probability".into(), p)?;
        }
        for (node, d) in &self.close_ended {
            in_unit(format!("close_ended.{node}.correct"), d.correct)?;
            in_unit(format!("close_ended.{node}.other"), d.other)?;
            for (label, p) in &d.distractors {
                in_unit(format!("close_ended.{node}.distractors.{label}"), *p)?;
            }
            let total = d.correct + d.other + d.distractors.values().sum::<f64>();
            if (total - 1.0).abs() > 1e-9 {
                return Err(SimulationError::InvalidModel(format!(
                    "close_ended.{node} sums to {total}, not 1"
                )));
            }
        }
        Ok(())
    }

    fn pass(&self, kind: ActivityKind) -> f64 {
        self.pass_probability.get(&kind).copied().unwrap_or(1.0)
    }

    fn quiz_item(&self) -> f64 {
        self.quiz_item_probability.unwrap_or_else(|| self.pass(ActivityKind::Quiz))
    }

    fn coding(&self) -> f64 {
        self.coding_pass_probability.unwrap_or_else(|| self.pass(ActivityKind::Coding))
    }

    /// The close-ended outcome classes of `node` with their probabilities.
    fn answer_classes(
        &self,
        node: &NodeId,
        data: &CloseEndedData,
    ) -> Result<Vec<(f64, String)>, SimulationError> {
        let Some(d) = self.close_ended.get(node) else {
            let p = self.pass(ActivityKind::CloseEnded);
            return Ok(vec![(p, correct_answer(data)), (1.0 - p, other_answer(data))]);
        };
        let mut classes = vec![(d.correct, correct_answer(data))];
        for (label, p) in &d.distractors {
            let answer = data
                .distractors
                .iter()
                .find(|(_, l)| *l == label)
                .map(|(answer, _)| answer.clone())
                .ok_or_else(|| {
                    SimulationError::InvalidModel(format!("node {node} has no distractor labelled `{label}`"))
                })?;
            classes.push((*p, answer));
        }
        classes.push((d.other, other_answer(data)));
        Ok(classes)
    }

    /// Draws one submission for `node`.
    pub fn sample(
        &self,
        node: &ActivityNode,
        grader: OutputGrader,
        rng: &mut SplitMix64,
    ) -> Result<Submission, SimulationError> {
        Ok(match &node.kind_data {
            KindData::Lesson(_) => Submission::Lesson,
            KindData::CloseEnded(data) => {
                let classes = self.answer_classes(&node.id, data)?;
                let u = rng.next_f64();
                let mut acc = 0.0;
                let mut pick = None;
                for (p, answer) in &classes {
                    acc += p;
                    if u < acc {
                        pick = Some(answer);
                        break;
                    }
                }
                // Rounding can leave u just above the final sum.
                let answer = pick.unwrap_or_else(|| {
                    &classes.iter().rev().find(|(p, _)| *p > 0.0).unwrap_or(&classes[0]).1
                });
                Submission::CloseEnded {
                    answer: answer.clone(),
                }
            }
            KindData::Quiz(data) => {
                let p = self.quiz_item();
                let right: Vec<bool> = data.items.iter().map(|_| rng.bernoulli(p)).collect();
                quiz_submission(data, &right)
            }
            KindData::Coding(data) => coding_submission(data, rng.bernoulli(self.coding()), grader),
            KindData::Abstract(_) => return Err(SimulationError::Unrefined(node.id.clone())),
        })
    }

    /// Every distinct submission the model can produce at `node`, with its
    /// probability. Quiz submissions are grouped by number of right items,
    /// which is all the grader looks at.
    pub fn distribution(
        &self,
        node: &ActivityNode,
        grader: OutputGrader,
    ) -> Result<Vec<(f64, Submission)>, SimulationError> {
        Ok(match &node.kind_data {
            KindData::Lesson(_) => vec![(1.0, Submission::Lesson)],
            KindData::CloseEnded(data) => self
                .answer_classes(&node.id, data)?
                .into_iter()
                .map(|(p, answer)| (p, Submission::CloseEnded { answer }))
                .collect(),
            KindData::Quiz(data) => {
                let probs: Vec<f64> = data
                    .items
                    .iter()
                    .map(|item| if item.choices.len() > 1 { self.quiz_item() } else { 1.0 })
                    .collect();
                // count[c] = P(exactly c items right)
                let mut count = vec![1.0];
                for p in &probs {
                    let mut next = vec![0.0; count.len() + 1];
                    for (c, q) in count.iter().enumerate() {
                        next[c] += q * (1.0 - p);
                        next[c + 1] += q * p;
                    }
                    count = next;
                }
                count
                    .into_iter()
                    .enumerate()
                    .map(|(c, p)| {
                        let right: Vec<bool> = (0..data.items.len()).map(|i| i < c).collect();
                        (p, quiz_submission(data, &right))
                    })
                    .collect()
            }
            KindData::Coding(data) => {
                let p = self.coding();
                vec![
                    (p, coding_submission(data, true, grader)),
                    (1.0 - p, coding_submission(data, false, grader)),
                ]
            }
            KindData::Abstract(_) => return Err(SimulationError::Unrefined(node.id.clone())),
        })
    }
}

fn correct_answer(data: &CloseEndedData) -> String {
    match &data.expected {
        AnswerSpec::Text(text) => text.clone(),
        AnswerSpec::Number { number, .. } => number.to_string(),
    }
}

/// An answer matching neither the expected answer nor any distractor.
fn other_answer(data: &CloseEndedData) -> String {
    let taken = |candidate: &str| {
        let c = normalize_answer(candidate);
        let expected = match &data.expected {
            AnswerSpec::Text(t) => answers_match(&c, &normalize_answer(t), DEFAULT_TOLERANCE),
            AnswerSpec::Number { number, tolerance } => {
                answers_match(&c, &number.to_string(), *tolerance)
            }
        };
        expected
            || data
                .distractors
                .keys()
                .any(|k| answers_match(&c, &normalize_answer(k), DEFAULT_TOLERANCE))
    };
    let mut candidate = "unsure".to_string();
    while taken(&candidate) {
        candidate.push('?');
    }
    candidate
}

/// Right items pick the keyed choice, wrong ones the first other choice.
fn quiz_submission(data: &QuizData, right: &[bool]) -> Submission {
    let choices = data
        .items
        .iter()
        .zip(right)
        .map(|(item, ok)| {
            if *ok {
                item.correct
            } else {
                (0..item.choices.len()).find(|&i| i != item.correct).unwrap_or(item.correct)
            }
        })
        .collect();
    Submission::Quiz { choices }
}

/// A passing source contains the required tokens and declares the expected
/// outputs. A failing one breaks the first check the grader can fail on.
fn coding_submission(data: &CodingData, pass: bool, grader: OutputGrader) -> Submission {
    let spec = &data.grader;
    let echo = grader == OutputGrader::Echo && !spec.test_vectors.is_empty();
    let mut lines: Vec<String> = spec.required_tokens.clone();
    let outputs = spec
        .test_vectors
        .iter()
        .map(|v| format!("{OUTPUT_MARKER}{}", v.expected_output));
    if pass {
        if echo {
            lines.extend(outputs);
        }
    } else if let Some(forbidden) = spec.forbidden_tokens.first() {
        lines.push(forbidden.clone());
    } else if echo {
        lines.push(format!("{OUTPUT_MARKER}"));
    } else if !spec.required_tokens.is_empty() {
        lines.clear();
    } else if let (Some(max), Some(keyword)) = (spec.complexity_max, spec.branch_keywords.first()) {
        lines.extend(std::iter::repeat_n(format!(" {keyword} "), max as usize));
    }
    let mut source = lines.join("\n");
    source.push('\n');
    Submission::Coding { source }
}
