//! Adaptive learning paths as executable graphs.
//!
//! A [`LearningFragment`](fragment::LearningFragment) is a directed graph of
//! activities joined by condition-guarded edges. Abstract activities are
//! replaced at session start by compositions of catalog fragments
//! ([`planner`]); the [`engine`] then runs one learner through the refined
//! graph, grading submissions and choosing the next activity, while
//! [`gamification`] folds engine events into points, badges and streaks.
//! [`simulator`] drives synthetic cohorts through the same engine and checks
//! them against an absorbing-chain oracle.

pub mod condition;
pub mod engine;
pub mod fixtures;
pub mod fragment;
pub mod gamification;
pub mod planner;
pub mod simulator;

pub use condition::{parse_condition, print_condition, Condition, ConditionError, EvaluationContext};
pub use engine::{Engine, EngineConfig, EngineError, Session, Submission};
pub use fragment::{load_fragment, serialize_fragment, validate_fragment, LearningFragment};
pub use gamification::{GamificationRulePack, GamificationState, Rule};
