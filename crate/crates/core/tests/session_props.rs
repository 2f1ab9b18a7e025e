use std::collections::BTreeSet;

use proptest::prelude::*;
use tutorgraph_core::condition::{evaluate_condition, EvaluationContext};
use tutorgraph_core::engine::{
    Engine, EngineConfig, EngineError, Session, SessionMeta, SessionStatus, Submission,
};
use tutorgraph_core::fixtures::{demo_fixture, reference_pack, AVERAGE_SOURCE, MEDIAN_SOURCE};
use tutorgraph_core::fragment::{ActivityKind, Modality};
use tutorgraph_core::gamification::{replay, Trigger};

const ANSWERS: [&str; 6] = ["4", "3", " 4.0 ", "5", "average", "3.0"];
const SOURCES: [&str; 4] = [AVERAGE_SOURCE, MEDIAN_SOURCE, "", "import statistics\n"];

fn submission_for(kind: ActivityKind, choice: u8) -> Submission {
    let c = usize::from(choice);
    match kind {
        ActivityKind::Lesson | ActivityKind::Abstract => Submission::Lesson,
        ActivityKind::CloseEnded => Submission::CloseEnded {
            answer: ANSWERS[c % ANSWERS.len()].to_string(),
        },
        ActivityKind::Quiz => Submission::Quiz {
            choices: vec![c % 3, (c / 3) % 3, (c / 9) % 2],
        },
        ActivityKind::Coding => Submission::Coding {
            source: SOURCES[c % SOURCES.len()].to_string(),
        },
    }
}

fn wrong_kind(kind: ActivityKind) -> Submission {
    if kind == ActivityKind::Lesson {
        Submission::Quiz { choices: vec![0] }
    } else {
        Submission::Lesson
    }
}

fn engine() -> Engine {
    Engine::new(demo_fixture(), reference_pack().rules, EngineConfig::default()).unwrap()
}

fn run(engine: &Engine, script: &[(u8, bool)]) -> Session {
    let caps = BTreeSet::from([Modality::Text, Modality::Code]);
    let meta = SessionMeta {
        id: "prop".into(),
        created_at: "2024-01-01T00:00:00Z".into(),
    };
    let mut session = engine.start_session("learner", &caps, meta).unwrap();
    for &(choice, mismatch) in script {
        if session.status != SessionStatus::Active {
            let before = session.clone();
            assert_eq!(
                engine.submit(&mut session, Submission::Lesson),
                Err(EngineError::SessionNotActive)
            );
            assert_eq!(session, before);
            break;
        }
        let kind = engine.fragment().nodes[&session.current].kind;
        if mismatch {
            let before = session.clone();
            let rejected = engine.submit(&mut session, wrong_kind(kind));
            assert!(matches!(rejected, Err(EngineError::KindMismatch { .. })));
            assert_eq!(session, before);
        }
        let steps = session.steps;
        engine.submit(&mut session, submission_for(kind, choice)).unwrap();
        assert_eq!(session.steps, steps + 1);
    }
    session
}

fn script() -> impl Strategy<Value = Vec<(u8, bool)>> {
    prop::collection::vec((any::<u8>(), prop::bool::weighted(0.1)), 0..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sessions_are_deterministic(script in script()) {
        let engine = engine();
        let a = serde_json::to_vec(&run(&engine, &script)).unwrap();
        let b = serde_json::to_vec(&run(&engine, &script)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn transcript_invariants_and_edge_soundness(script in script()) {
        let engine = engine();
        let fragment = engine.fragment().clone();
        let s = run(&engine, &script);
        prop_assert_eq!(s.steps as usize, s.transcript.len());
        prop_assert!(s.attempts.values().map(|a| *a as usize).sum::<usize>() <= s.steps as usize);
        if s.status == SessionStatus::Completed {
            prop_assert!(fragment.is_exit(&s.current));
        }

        // Replay the routing decisions independently of the engine.
        let mut attempts = std::collections::BTreeMap::<String, u32>::new();
        for (i, entry) in s.transcript.iter().enumerate() {
            prop_assert_eq!(entry.seq as usize, i + 1);
            let count = attempts.entry(entry.node.clone()).or_default();
            *count += 1;
            let ctx = EvaluationContext {
                passed: entry.outcome.passed,
                score: entry.outcome.score,
                answer: entry.outcome.answer.clone(),
                label: entry.outcome.label.clone(),
                attempts: *count,
                kind: entry.event.kind.as_str().to_string(),
            };
            let outgoing = fragment.outgoing_edges(&entry.node).unwrap();
            let fired: Vec<bool> = outgoing
                .iter()
                .map(|e| evaluate_condition(&e.condition.compile().unwrap(), &ctx).unwrap())
                .collect();
            match &entry.chosen_edge {
                Some(chosen) => {
                    let at = outgoing.iter().position(|e| &e.id == chosen).unwrap();
                    prop_assert!(fired[at]);
                    prop_assert!(fired[..at].iter().all(|f| !f));
                }
                None => prop_assert!(fired.iter().all(|f| !f)),
            }
        }
    }

    #[test]
    fn gamification_replay_matches_live_state(script in script()) {
        let rules = reference_pack().rules;
        let s = run(&engine(), &script);
        prop_assert_eq!(replay(s.events(), &rules), s.gamification.clone());

        // Points never decrease along the way.
        let mut state = Default::default();
        let mut last = 0;
        for event in s.events() {
            let (next, _) = tutorgraph_core::gamification::process_event(&state, event, &rules);
            prop_assert!(next.points >= last);
            last = next.points;
            state = next;
        }

        // Independent recount of streak(3) awards from the event log.
        let mut run_length = 0u32;
        let mut expected = 0;
        for event in s.events() {
            run_length = if event.passed && event.first_attempt { run_length + 1 } else { 0 };
            if run_length == 3 {
                expected += 1;
            }
        }
        let streak_rule = rules
            .iter()
            .find(|r| r.trigger == Trigger::Streak(3))
            .unwrap();
        let first_tries = s.events().filter(|e| e.passed && e.first_attempt).count();
        prop_assert!(expected <= first_tries / 3);
        let recorded = s
            .events()
            .scan(Default::default(), |state, event| {
                let (next, awards) = tutorgraph_core::gamification::process_event(state, event, &rules);
                *state = next;
                Some(awards.iter().filter(|a| a.rule == streak_rule.id).count())
            })
            .sum::<usize>();
        prop_assert_eq!(recorded, expected);
        prop_assert_eq!(s.gamification.badges.contains("on-a-roll"), expected > 0);
    }
}
