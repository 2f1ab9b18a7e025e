//! Capability negotiation between a learner's modalities and a fragment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fragment::{ActivityKind, LearningFragment, Modality, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NodeNegotiation {
    /// Rendered in `modality`, the first declared representation the learner supports.
    Satisfied { modality: Modality },
    /// None of the declared representations is supported.
    Missing { required: BTreeSet<Modality> },
    /// Abstract node; decided after refinement.
    Deferred,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationReport {
    pub nodes: BTreeMap<NodeId, NodeNegotiation>,
}

impl NegotiationReport {
    pub fn is_satisfied(&self) -> bool {
        !self
            .nodes
            .values()
            .any(|n| matches!(n, NodeNegotiation::Missing { .. }))
    }

    /// Nodes that cannot be rendered, with the modalities that would fix each.
    pub fn missing(&self) -> BTreeMap<NodeId, BTreeSet<Modality>> {
        self.nodes
            .iter()
            .filter_map(|(id, n)| match n {
                NodeNegotiation::Missing { required } => Some((id.clone(), required.clone())),
                _ => None,
            })
            .collect()
    }
}

pub fn negotiate(capabilities: &BTreeSet<Modality>, fragment: &LearningFragment) -> NegotiationReport {
    let nodes = fragment
        .nodes
        .values()
        .map(|node| {
            let result = if node.kind == ActivityKind::Abstract {
                NodeNegotiation::Deferred
            } else {
                match node.representations.keys().find(|m| capabilities.contains(m)) {
                    Some(m) => NodeNegotiation::Satisfied { modality: *m },
                    None => NodeNegotiation::Missing {
                        required: node.representations.keys().copied().collect(),
                    },
                }
            };
            (node.id.clone(), result)
        })
        .collect();
    NegotiationReport { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::demo_fixture;

    #[test]
    fn text_only_learner_misses_coding_nodes() {
        let report = negotiate(&[Modality::Text].into(), &demo_fixture());
        let missing = report.missing();
        assert_eq!(missing.keys().collect::<Vec<_>>(), ["C1", "C2"]);
        assert_eq!(missing["C1"], [Modality::Code].into());
        assert!(!report.is_satisfied());
    }

    #[test]
    fn full_capabilities_choose_first_declared() {
        let report = negotiate(&Modality::ALL.into(), &demo_fixture());
        assert!(report.is_satisfied());
        assert_eq!(
            report.nodes["L1"],
            NodeNegotiation::Satisfied {
                modality: Modality::Text
            }
        );
        let audio = negotiate(&[Modality::Audio, Modality::Code].into(), &demo_fixture());
        assert_eq!(
            audio.nodes["Q1"],
            NodeNegotiation::Satisfied {
                modality: Modality::Audio
            }
        );
    }
}
