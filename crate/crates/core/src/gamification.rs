//! Points, badges and streaks driven by engine events.
//!
//! Rule packs are plain data. The engine emits one [`ActivityEvent`] per
//! submission and folds it into the session's [`GamificationState`] with
//! [`process_event`]; [`replay`] recomputes the same state from an event log.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fragment::{ActivityKind, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    ActivityCompleted,
    FirstTryCorrect,
    /// Fires when the streak becomes exactly `n`.
    Streak(u32),
    SessionCompleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Award {
    pub points: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub badge: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub trigger: Trigger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind_filter: Option<ActivityKind>,
    pub award: Award,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamificationRulePack {
    pub id: String,
    pub applies_to: BTreeSet<ActivityKind>,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RulePackError {
    #[error("rule id `{0}` appears more than once in the pack")]
    DuplicateRule(String),
    #[error("rule `{0}`: streak length must be at least 2")]
    StreakTooShort(String),
}

impl GamificationRulePack {
    pub fn validate(&self) -> Result<(), RulePackError> {
        let mut seen = HashSet::new();
        for rule in &self.rules {
            if !seen.insert(rule.id.as_str()) {
                return Err(RulePackError::DuplicateRule(rule.id.clone()));
            }
            if matches!(rule.trigger, Trigger::Streak(n) if n < 2) {
                return Err(RulePackError::StreakTooShort(rule.id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamificationState {
    pub points: u64,
    pub badges: BTreeSet<String>,
    /// Consecutive first-submission passes.
    pub streak: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub node: NodeId,
    pub kind: ActivityKind,
    pub passed: bool,
    pub first_attempt: bool,
    pub session_completed: bool,
}

/// A rule that fired for one event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwardRecord {
    pub rule: String,
    pub points: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub badge: Option<String>,
}

/// Applies one event. `kind_filter`, when set, restricts every trigger type
/// to events of that activity kind.
pub fn process_event(
    state: &GamificationState,
    event: &ActivityEvent,
    rules: &[Rule],
) -> (GamificationState, Vec<AwardRecord>) {
    let mut next = state.clone();
    let first_try = event.passed && event.first_attempt;
    next.streak = if first_try { state.streak + 1 } else { 0 };

    let mut awards = Vec::new();
    for rule in rules {
        if rule.kind_filter.is_some_and(|k| k != event.kind) {
            continue;
        }
        let fires = match rule.trigger {
            Trigger::ActivityCompleted => event.passed,
            Trigger::FirstTryCorrect => first_try,
            Trigger::Streak(n) => first_try && next.streak == n,
            Trigger::SessionCompleted => event.session_completed,
        };
        if !fires {
            continue;
        }
        next.points += rule.award.points;
        if let Some(badge) = &rule.award.badge {
            next.badges.insert(badge.clone());
        }
        awards.push(AwardRecord {
            rule: rule.id.clone(),
            points: rule.award.points,
            badge: rule.award.badge.clone(),
        });
    }
    (next, awards)
}

/// Left fold of [`process_event`] from the zero state.
pub fn replay<'a>(
    events: impl IntoIterator<Item = &'a ActivityEvent>,
    rules: &[Rule],
) -> GamificationState {
    events
        .into_iter()
        .fold(GamificationState::default(), |state, event| {
            process_event(&state, event, rules).0
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_pack;

    fn event(kind: ActivityKind, passed: bool, first_attempt: bool) -> ActivityEvent {
        ActivityEvent {
            node: "N".into(),
            kind,
            passed,
            first_attempt,
            session_completed: false,
        }
    }

    #[test]
    fn reference_pack_is_valid() {
        reference_pack().validate().unwrap();
    }

    #[test]
    fn first_try_correct_quiz_scores_fifteen() {
        let rules = reference_pack().rules;
        let (state, awards) = process_event(
            &GamificationState::default(),
            &event(ActivityKind::Quiz, true, true),
            &rules,
        );
        assert_eq!(state.points, 15);
        assert_eq!(state.streak, 1);
        let fired: Vec<_> = awards.iter().map(|a| a.points).collect();
        assert_eq!(fired, [10, 5]);
    }

    #[test]
    fn failure_resets_streak_without_awards() {
        let rules = reference_pack().rules;
        let start = GamificationState {
            points: 30,
            badges: BTreeSet::new(),
            streak: 2,
        };
        let (state, awards) = process_event(&start, &event(ActivityKind::Quiz, false, true), &rules);
        assert!(awards.is_empty());
        assert_eq!(state.streak, 0);
        assert_eq!(state.points, 30);
    }

    #[test]
    fn streak_badge_fires_on_exact_transition_only() {
        let rules = reference_pack().rules;
        let mut state = GamificationState::default();
        let mut streak_awards = 0;
        for _ in 0..4 {
            let (next, awards) =
                process_event(&state, &event(ActivityKind::CloseEnded, true, true), &rules);
            streak_awards += awards.iter().filter(|a| a.badge.as_deref() == Some("on-a-roll")).count();
            state = next;
        }
        assert_eq!(streak_awards, 1);
        assert!(state.badges.contains("on-a-roll"));
    }

    #[test]
    fn kind_filter_restricts_rules() {
        let rules = reference_pack().rules;
        let (coding, _) = process_event(
            &GamificationState::default(),
            &event(ActivityKind::Coding, true, false),
            &rules,
        );
        let (lesson, _) = process_event(
            &GamificationState::default(),
            &event(ActivityKind::Lesson, true, false),
            &rules,
        );
        assert_eq!(coding.points, 5 + 8);
        assert_eq!(lesson.points, 5);
    }

    #[test]
    fn replay_of_nothing_is_zero() {
        assert_eq!(replay([], &reference_pack().rules), GamificationState::default());
    }

    #[test]
    fn replay_is_order_sensitive() {
        let rules = reference_pack().rules;
        let pass = event(ActivityKind::Lesson, true, true);
        let fail = event(ActivityKind::Lesson, false, true);
        let a = replay([&pass, &pass, &pass, &fail], &rules);
        let b = replay([&pass, &fail, &pass, &pass], &rules);
        assert_ne!(a, b);
    }

    #[test]
    fn streak_validation() {
        let mut pack = reference_pack();
        pack.rules[0].trigger = Trigger::Streak(1);
        assert!(matches!(pack.validate(), Err(RulePackError::StreakTooShort(_))));
        let mut pack = reference_pack();
        let dup = pack.rules[0].clone();
        pack.rules.push(dup);
        assert!(matches!(pack.validate(), Err(RulePackError::DuplicateRule(_))));
    }
}
