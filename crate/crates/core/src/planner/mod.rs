//! Goal planning and runtime refinement.
//!
//! [`plan_goal`] picks catalog fragments covering a set of concepts with a
//! greedy weighted set cover, then orders them so every fragment comes after
//! the fragments that teach its prerequisites. [`refine`] uses it to replace
//! every abstract node of a fragment with a chain of concrete fragments.

mod cover;
mod refine;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fragment::{ActivityKind, ConceptId, LearningFragment, Modality, NodeId};
use crate::gamification::{GamificationRulePack, Rule};

pub use cover::{greedy_cover, plan_goal};
pub use refine::{refine, FragmentLibrary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub fragment_id: String,
    pub version: u32,
    pub provides: BTreeSet<ConceptId>,
    #[serde(default)]
    pub requires: BTreeSet<ConceptId>,
    pub cost: f64,
    #[serde(default)]
    pub kinds_present: BTreeSet<ActivityKind>,
    /// Modalities without which some node of the fragment cannot be shown.
    #[serde(default)]
    pub modalities_required: BTreeSet<Modality>,
    #[serde(default)]
    pub gamification_tags: BTreeSet<String>,
}

impl CatalogEntry {
    /// Describes a fragment. A node with a single representation makes that
    /// representation's modality required.
    pub fn from_fragment(fragment: &LearningFragment) -> Self {
        CatalogEntry {
            fragment_id: fragment.id.clone(),
            version: fragment.version,
            provides: fragment.provides.clone(),
            requires: fragment.requires.clone(),
            cost: fragment.cost,
            kinds_present: fragment.kinds_present(),
            modalities_required: fragment
                .nodes
                .values()
                .filter(|n| n.representations.len() == 1)
                .flat_map(|n| n.representations.keys().copied())
                .collect(),
            gamification_tags: BTreeSet::new(),
        }
    }
}

/// On disk a catalog is a plain array of entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FragmentCatalog {
    pub fragments: Vec<CatalogEntry>,
}

impl FragmentCatalog {
    pub fn from_fragments<'a>(fragments: impl IntoIterator<Item = &'a LearningFragment>) -> Self {
        FragmentCatalog {
            fragments: fragments.into_iter().map(CatalogEntry::from_fragment).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let mut seen = BTreeSet::new();
        for e in &self.fragments {
            if !seen.insert(e.fragment_id.as_str()) {
                return Err(PlanError::InvalidCatalog(format!(
                    "fragment `{}` listed twice",
                    e.fragment_id
                )));
            }
            if e.provides.is_empty() {
                return Err(PlanError::InvalidCatalog(format!(
                    "fragment `{}` provides nothing",
                    e.fragment_id
                )));
            }
            if !(e.cost.is_finite() && e.cost > 0.0) {
                return Err(PlanError::InvalidCatalog(format!(
                    "fragment `{}` has non-positive cost",
                    e.fragment_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementLimits {
    pub max_depth: u32,
    pub max_chain_length: usize,
}

impl Default for RefinementLimits {
    fn default() -> Self {
        RefinementLimits {
            max_depth: 3,
            max_chain_length: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FragmentRef {
    pub fragment_id: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub fragments: Vec<FragmentRef>,
    pub covered: BTreeSet<ConceptId>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("goal is empty")]
    EmptyGoal,
    #[error("no catalog fragments cover {missing:?}")]
    UncoverableGoal { missing: BTreeSet<ConceptId> },
    #[error("prerequisites form a cycle among {fragments:?}")]
    PrerequisiteCycle { fragments: Vec<String> },
    #[error("plan needs {length} fragments, limit is {limit}")]
    ChainTooLong { length: usize, limit: usize },
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("planning for abstract node `{node}` failed: {source}")]
    Plan { node: NodeId, source: PlanError },
    #[error("abstract node `{node}` is nested {depth} levels deep, limit is {limit}")]
    DepthExceeded { node: NodeId, depth: u32, limit: u32 },
    #[error("catalog lists {id}@{version} but the library does not contain it")]
    MissingFragment { id: String, version: u32 },
    #[error("refined fragment is inconsistent: {0}")]
    ResultInvalid(String),
}

/// Rules attached to a session after refinement.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachedGamification {
    pub packs: Vec<String>,
    pub rules: Vec<Rule>,
    pub warnings: Vec<String>,
}

/// Selects every pack whose `applies_to` meets the fragment's activity kinds,
/// in pack-id order, and merges their rules. A rule id seen in an earlier pack
/// shadows later rules with the same id.
pub fn attach_gamification(
    refined: &LearningFragment,
    packs: &[GamificationRulePack],
) -> AttachedGamification {
    let kinds = refined.kinds_present();
    let mut selected: Vec<&GamificationRulePack> = packs
        .iter()
        .filter(|p| !p.applies_to.is_disjoint(&kinds))
        .collect();
    selected.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = AttachedGamification::default();
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for pack in selected {
        out.packs.push(pack.id.clone());
        for rule in &pack.rules {
            if let Some(first) = owner.get(rule.id.as_str()) {
                out.warnings.push(format!(
                    "rule `{}` of pack `{}` is shadowed by pack `{first}`",
                    rule.id, pack.id
                ));
                continue;
            }
            owner.insert(&rule.id, &pack.id);
            out.rules.push(rule.clone());
        }
    }
    out
}
