//! Canonical fragment documents.
//!
//! A fragment is stored as pretty-printed JSON. Struct fields always appear in
//! declaration order, sets and maps are sorted, nodes are sorted by id, and
//! edges keep their list order (which is their priority). Representations
//! keep the author's order. Two serializations of equal fragments are
//! therefore byte-identical.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{
    AbstractData, ActivityKind, ActivityNode, CloseEndedData, CodingData, ConceptId, Edge,
    FragmentError, KindData, LearningFragment, LessonData, Modality, NodeId, QuizData,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct FragmentDocument {
    id: String,
    title: String,
    version: u32,
    entry: NodeId,
    #[serde(default)]
    provides: BTreeSet<ConceptId>,
    #[serde(default)]
    requires: BTreeSet<ConceptId>,
    #[serde(default = "default_cost")]
    cost: f64,
    nodes: Vec<NodeDocument>,
    #[serde(default)]
    edges: Vec<EdgeDocument>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    ui_metadata: BTreeMap<String, serde_json::Value>,
}

fn default_cost() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDocument {
    id: NodeId,
    kind: ActivityKind,
    title: String,
    #[serde(default)]
    representations: IndexMap<Modality, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_attempts: Option<u32>,
    #[serde(default)]
    kind_data: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDocument {
    id: String,
    source: NodeId,
    target: NodeId,
    condition: super::ConditionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

fn decode_kind_data(node: &NodeDocument) -> Result<KindData, FragmentError> {
    fn decode<T: serde::de::DeserializeOwned>(
        node: &NodeDocument,
        value: serde_json::Value,
    ) -> Result<T, FragmentError> {
        serde_json::from_value(value).map_err(|e| {
            FragmentError::SchemaViolation(format!(
                "node `{}`: invalid {} kind_data: {e}",
                node.id, node.kind
            ))
        })
    }
    let value = match &node.kind_data {
        serde_json::Value::Null => serde_json::Value::Object(Default::default()),
        other => other.clone(),
    };
    Ok(match node.kind {
        ActivityKind::Lesson => KindData::Lesson(decode::<LessonData>(node, value)?),
        ActivityKind::CloseEnded => KindData::CloseEnded(decode::<CloseEndedData>(node, value)?),
        ActivityKind::Quiz => KindData::Quiz(decode::<QuizData>(node, value)?),
        ActivityKind::Coding => KindData::Coding(decode::<CodingData>(node, value)?),
        ActivityKind::Abstract => KindData::Abstract(decode::<AbstractData>(node, value)?),
    })
}

impl TryFrom<FragmentDocument> for LearningFragment {
    type Error = FragmentError;

    fn try_from(doc: FragmentDocument) -> Result<Self, Self::Error> {
        if doc.nodes.is_empty() {
            return Err(FragmentError::SchemaViolation(
                "fragment must contain at least one node".into(),
            ));
        }
        let mut nodes = BTreeMap::new();
        for node in doc.nodes {
            let kind_data = decode_kind_data(&node)?;
            if nodes.contains_key(&node.id) {
                return Err(FragmentError::SchemaViolation(format!(
                    "duplicate node id `{}`",
                    node.id
                )));
            }
            nodes.insert(
                node.id.clone(),
                ActivityNode {
                    id: node.id,
                    kind: node.kind,
                    title: node.title,
                    representations: node.representations,
                    max_attempts: node.max_attempts,
                    kind_data,
                },
            );
        }
        let edges = doc
            .edges
            .into_iter()
            .map(|e| Edge {
                id: e.id,
                source: e.source,
                target: e.target,
                condition: e.condition,
                label: e.label,
            })
            .collect();
        Ok(LearningFragment {
            id: doc.id,
            title: doc.title,
            version: doc.version,
            entry: doc.entry,
            provides: doc.provides,
            requires: doc.requires,
            cost: doc.cost,
            nodes,
            edges,
            ui_metadata: doc.ui_metadata,
        })
    }
}

impl From<LearningFragment> for FragmentDocument {
    fn from(f: LearningFragment) -> Self {
        let nodes = f
            .nodes
            .into_values()
            .map(|n| NodeDocument {
                id: n.id,
                kind: n.kind,
                title: n.title,
                representations: n.representations,
                max_attempts: n.max_attempts,
                kind_data: serde_json::to_value(&n.kind_data)
                    .expect("kind data always serializes"),
            })
            .collect();
        let edges = f
            .edges
            .into_iter()
            .map(|e| EdgeDocument {
                id: e.id,
                source: e.source,
                target: e.target,
                condition: e.condition,
                label: e.label,
            })
            .collect();
        FragmentDocument {
            id: f.id,
            title: f.title,
            version: f.version,
            entry: f.entry,
            provides: f.provides,
            requires: f.requires,
            cost: f.cost,
            nodes,
            edges,
            ui_metadata: f.ui_metadata,
        }
    }
}

impl Serialize for LearningFragment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        FragmentDocument::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LearningFragment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = FragmentDocument::deserialize(deserializer)?;
        LearningFragment::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Parses a canonical fragment document.
pub fn load_fragment(document: &[u8]) -> Result<LearningFragment, FragmentError> {
    let doc: FragmentDocument = serde_json::from_slice(document).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => FragmentError::MalformedDocument {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            Category::Data => FragmentError::SchemaViolation(e.to_string()),
        }
    })?;
    LearningFragment::try_from(doc)
}

/// Canonical bytes: two-space indented JSON with a trailing newline.
pub fn serialize_fragment(fragment: &LearningFragment) -> Vec<u8> {
    let mut bytes =
        serde_json::to_vec_pretty(fragment).expect("fragment documents always serialize");
    bytes.push(b'\n');
    bytes
}
