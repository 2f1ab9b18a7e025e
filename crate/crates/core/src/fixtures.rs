//! Fixtures shipped with the repository, embedded for tests, benches and demos.

use crate::engine::Submission;
use crate::fragment::{
    load_fragment, AbstractConstraints, AbstractData, ActivityKind, ActivityNode, AnswerSpec,
    ConditionSpec, Edge, KindData, LearningFragment, LessonData, Modality, QuizData,
    ValidationCode,
};
use crate::gamification::GamificationRulePack;
use crate::planner::FragmentCatalog;

/// The average/median demo fragment (`fixtures/stats-avg-median.json`).
pub const DEMO_FIXTURE_JSON: &str = include_str!("../../../fixtures/stats-avg-median.json");

/// The reference gamification pack (`config/reference-pack.json`).
pub const REFERENCE_PACK_JSON: &str = include_str!("../../../config/reference-pack.json");

pub fn demo_fixture() -> LearningFragment {
    load_fragment(DEMO_FIXTURE_JSON.as_bytes()).expect("shipped demo fixture loads")
}

pub fn reference_pack() -> GamificationRulePack {
    serde_json::from_str(REFERENCE_PACK_JSON).expect("shipped reference pack parses")
}

/// A hand-written submission script for the demo fixture with the node
/// sequence it must visit.
#[derive(Debug, Clone)]
pub struct DemoTrace {
    pub name: &'static str,
    pub submissions: Vec<Submission>,
    pub visits: Vec<&'static str>,
}

pub const AVERAGE_SOURCE: &str =
    "def average(values):\n    return sum(values) / len(values)\n#|out:4\n";
pub const MEDIAN_SOURCE: &str = "def median(values):\n    s = sorted(values)\n    n = len(s)\n    if n % 2:\n        return s[n // 2]\n    else:\n        return (s[n // 2 - 1] + s[n // 2]) / 2\n#|out:3\n#|out:2.5\n";

fn answer(text: &str) -> Submission {
    Submission::CloseEnded {
        answer: text.to_string(),
    }
}

fn code(source: &str) -> Submission {
    Submission::Coding {
        source: source.to_string(),
    }
}

/// The three canonical demo traces: all correct, the average given as the
/// median, and a failed first question recovered through review and quiz.
pub fn demo_traces() -> Vec<DemoTrace> {
    vec![
        DemoTrace {
            name: "all-correct",
            submissions: vec![
                Submission::Lesson,
                answer("4"),
                Submission::Lesson,
                answer("3"),
                Submission::Lesson,
                code(AVERAGE_SOURCE),
                code(MEDIAN_SOURCE),
            ],
            visits: vec!["L1", "Q1", "L2", "Q2", "M", "C1", "C2"],
        },
        DemoTrace {
            name: "median-answered-with-average",
            submissions: vec![
                Submission::Lesson,
                answer("4"),
                Submission::Lesson,
                answer("4"),
                Submission::Lesson,
                Submission::Lesson,
                code(AVERAGE_SOURCE),
                code(MEDIAN_SOURCE),
            ],
            visits: vec!["L1", "Q1", "L2", "Q2", "RD", "M", "C1", "C2"],
        },
        DemoTrace {
            name: "average-failed-then-reviewed",
            submissions: vec![
                Submission::Lesson,
                answer("5"),
                Submission::Lesson,
                Submission::Quiz {
                    choices: vec![0, 1, 2],
                },
                Submission::Lesson,
                answer("3"),
                Submission::Lesson,
                code(AVERAGE_SOURCE),
                code(MEDIAN_SOURCE),
            ],
            visits: vec!["L1", "Q1", "R1", "Z1", "L2", "Q2", "M", "C1", "C2"],
        },
    ]
}

/// The demo fixture with Q1's review branch (R1, Z1) removed and Q1 capped at
/// `max_attempts`, so a learner who keeps failing Q1 retries in place until
/// the cap ends the session.
pub fn demo_fixture_capped_q1(max_attempts: u32) -> LearningFragment {
    let mut f = demo_fixture();
    f.nodes.retain(|id, _| id != "R1" && id != "Z1");
    f.edges
        .retain(|e| f.nodes.contains_key(&e.source) && f.nodes.contains_key(&e.target));
    f.nodes.get_mut("Q1").expect("Q1 exists").max_attempts = Some(max_attempts);
    f
}

fn lesson(id: &str, text: &str) -> ActivityNode {
    ActivityNode {
        id: id.into(),
        kind: ActivityKind::Lesson,
        title: id.into(),
        representations: [(Modality::Text, text.to_string())].into_iter().collect(),
        max_attempts: None,
        kind_data: KindData::Lesson(LessonData {}),
    }
}

/// A two-lesson fragment teaching `concept`.
fn concept_fragment(id: &str, provides: &[&str], requires: &[&str], cost: f64) -> LearningFragment {
    let intro = lesson("intro", &format!("{id}: introduction"));
    let practice = lesson("practice", &format!("{id}: worked example"));
    LearningFragment {
        id: id.into(),
        title: id.into(),
        version: 1,
        entry: intro.id.clone(),
        provides: provides.iter().map(|c| c.to_string()).collect(),
        requires: requires.iter().map(|c| c.to_string()).collect(),
        cost,
        nodes: [intro, practice].into_iter().map(|n| (n.id.clone(), n)).collect(),
        edges: vec![Edge {
            id: "next".into(),
            source: "intro".into(),
            target: "practice".into(),
            condition: ConditionSpec::builtin("always"),
            label: None,
        }],
        ui_metadata: Default::default(),
    }
}

/// Concrete fragments behind [`example_catalog`].
pub fn example_library() -> Vec<LearningFragment> {
    vec![
        concept_fragment("F_avg", &["average"], &[], 1.0),
        concept_fragment("F_med", &["median"], &["average"], 1.0),
        concept_fragment("F_diff", &["difference"], &["average", "median"], 1.0),
        concept_fragment("F_all", &["average", "median"], &[], 2.5),
    ]
}

/// The four-entry planning example: per-concept fragments at cost 1 each and
/// a combined average+median fragment at cost 2.5.
pub fn example_catalog() -> FragmentCatalog {
    FragmentCatalog::from_fragments(&example_library())
}

/// The demo fixture with RD replaced by an abstract node whose goal is
/// `difference`, to be refined against [`example_catalog`].
pub fn demo_fixture_abstract_rd() -> LearningFragment {
    let mut f = demo_fixture();
    abstract_rd(&mut f, &["difference"]);
    f
}

/// A deliberately broken copy of the demo fixture and the error code the
/// validator must report for it.
#[derive(Debug, Clone)]
pub struct Mutation {
    pub name: &'static str,
    pub code: ValidationCode,
    pub fragment: LearningFragment,
}

fn mutate(
    name: &'static str,
    code: ValidationCode,
    change: impl FnOnce(&mut LearningFragment),
) -> Mutation {
    let mut fragment = demo_fixture();
    change(&mut fragment);
    Mutation {
        name,
        code,
        fragment,
    }
}

fn node<'a>(f: &'a mut LearningFragment, id: &str) -> &'a mut ActivityNode {
    f.nodes.get_mut(id).expect("demo node exists")
}

fn edge<'a>(f: &'a mut LearningFragment, id: &str) -> &'a mut Edge {
    f.edges.iter_mut().find(|e| e.id == id).expect("demo edge exists")
}

fn quiz<'a>(f: &'a mut LearningFragment, id: &str) -> &'a mut QuizData {
    match &mut node(f, id).kind_data {
        KindData::Quiz(q) => q,
        _ => panic!("{id} is a quiz"),
    }
}

fn abstract_rd(f: &mut LearningFragment, goal: &[&str]) {
    let rd = node(f, "RD");
    rd.kind = ActivityKind::Abstract;
    rd.representations.clear();
    rd.kind_data = KindData::Abstract(AbstractData {
        goal: goal.iter().map(|g| g.to_string()).collect(),
        constraints: AbstractConstraints::default(),
    });
}

/// Hand-written invalid variants of the demo fixture, one per error code.
pub fn invalid_mutations() -> Vec<Mutation> {
    use ValidationCode as C;
    vec![
        mutate("version zero", C::InvalidVersion, |f| f.version = 0),
        mutate("negative cost", C::InvalidCost, |f| f.cost = -1.0),
        mutate("entry names no node", C::MissingEntry, |f| f.entry = "L0".into()),
        mutate("node stored under another id", C::NodeIdMismatch, |f| {
            node(f, "M").id = "M2".into()
        }),
        mutate("edge id reused", C::DuplicateEdgeId, |f| edge(f, "RD-M").id = "M-C1".into()),
        mutate("edge to missing node", C::DanglingEdge, |f| {
            f.edges.push(Edge {
                id: "C1-C3".into(),
                source: "C1".into(),
                target: "C3".into(),
                condition: ConditionSpec::builtin("fail"),
                label: None,
            })
        }),
        mutate("orphan lesson", C::UnreachableNode, |f| {
            let mut orphan = f.nodes["M"].clone();
            orphan.id = "ORPHAN".into();
            f.nodes.insert(orphan.id.clone(), orphan);
        }),
        mutate("exit looped back", C::NoReachableExit, |f| {
            f.edges.push(Edge {
                id: "C2-C1".into(),
                source: "C2".into(),
                target: "C1".into(),
                condition: ConditionSpec::builtin("fail"),
                label: None,
            });
            f.edges.push(Edge {
                id: "C2-M".into(),
                source: "C2".into(),
                target: "M".into(),
                condition: ConditionSpec::builtin("pass"),
                label: None,
            });
        }),
        mutate("review loop with no way out", C::CycleWithoutExit, |f| {
            edge(f, "Z2-M").target = "R2".into();
        }),
        mutate("lesson without representations", C::MissingRepresentation, |f| {
            node(f, "L2").representations.clear()
        }),
        mutate("abstract node with a representation", C::AbstractWithRepresentation, |f| {
            abstract_rd(f, &["average_vs_median"]);
            node(f, "RD").representations.insert(Modality::Text, "x".into());
        }),
        mutate("quiz kind with lesson data", C::KindDataMismatch, |f| {
            node(f, "Z1").kind_data = KindData::Lesson(LessonData {})
        }),
        mutate("zero max attempts", C::InvalidMaxAttempts, |f| {
            node(f, "Q1").max_attempts = Some(0)
        }),
        mutate("negative tolerance", C::NegativeTolerance, |f| {
            if let KindData::CloseEnded(data) = &mut node(f, "Q1").kind_data {
                data.expected = AnswerSpec::Number {
                    number: 4.0,
                    tolerance: -0.5,
                };
            }
        }),
        mutate("distractor equals the answer", C::DistractorConflict, |f| {
            if let KindData::CloseEnded(data) = &mut node(f, "Q2").kind_data {
                data.distractors.insert(" 3.0".into(), "median_value".into());
            }
        }),
        mutate("quiz without items", C::EmptyQuiz, |f| quiz(f, "Z1").items.clear()),
        mutate("quiz item without choices", C::EmptyChoices, |f| {
            quiz(f, "Z1").items[0].choices.clear()
        }),
        mutate("correct choice out of range", C::QuizCorrectOutOfRange, |f| {
            quiz(f, "Z2").items[2].correct = 2
        }),
        mutate("pass threshold above one", C::InvalidPassThreshold, |f| {
            quiz(f, "Z2").pass_threshold = 1.5
        }),
        mutate("zero complexity budget", C::InvalidComplexityMax, |f| {
            if let KindData::Coding(data) = &mut node(f, "C1").kind_data {
                data.grader.complexity_max = Some(0);
            }
        }),
        mutate("abstract node without goal", C::EmptyGoal, |f| abstract_rd(f, &[])),
        mutate("truncated comparison", C::ConditionSyntax, |f| {
            edge(f, "Q2-RD").condition = ConditionSpec::expr("score >")
        }),
        mutate("unknown builtin", C::UnknownBuiltin, |f| {
            edge(f, "Q1-L2").condition = ConditionSpec::builtin("maybe")
        }),
        mutate("unknown variable", C::UnknownVariable, |f| {
            edge(f, "Q2-RD").condition = ConditionSpec::expr("mood == \"average_value\"")
        }),
        mutate("number compared with string", C::ConditionTypeMismatch, |f| {
            edge(f, "Q2-RD").condition = ConditionSpec::expr("score == \"average_value\"")
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragment::{default_context_vars, validate_fragment};

    #[test]
    fn abstract_rd_refines_into_a_valid_fragment() {
        use crate::planner::{refine, RefinementLimits};
        let refined = refine(
            &demo_fixture_abstract_rd(),
            &example_catalog(),
            &example_library(),
            None,
            &RefinementLimits::default(),
        )
        .unwrap();
        assert_eq!(refined.abstract_nodes().count(), 0);
        assert!(validate_fragment(&refined, &default_context_vars()).errors.is_empty());
        // Differences needs average and median first.
        for id in ["RD.0.intro", "RD.1.intro", "RD.2.intro"] {
            assert!(refined.nodes.contains_key(id), "{id}");
        }
    }

    #[test]
    fn each_mutation_reports_exactly_its_code() {
        let mutations = invalid_mutations();
        assert!(mutations.len() >= 20);
        for m in mutations {
            let mut codes = validate_fragment(&m.fragment, &default_context_vars()).error_codes();
            // Without a reachable exit the last component reached is always a trap.
            if m.code == ValidationCode::NoReachableExit {
                assert!(codes.remove(&ValidationCode::CycleWithoutExit), "{}", m.name);
            }
            assert_eq!(codes, [m.code].into(), "{}", m.name);
        }
    }
}
