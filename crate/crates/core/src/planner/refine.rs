use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{plan_goal, FragmentCatalog, RefineError, RefinementLimits};
use crate::fragment::{
    default_context_vars, validate_fragment, AbstractData, ActivityKind, ConceptId, ConditionSpec,
    Edge, KindData, LearningFragment, Modality, NodeId,
};

/// Where refinement looks up the fragments a plan names.
pub trait FragmentLibrary {
    fn fragment(&self, id: &str, version: u32) -> Option<&LearningFragment>;
}

impl FragmentLibrary for [LearningFragment] {
    fn fragment(&self, id: &str, version: u32) -> Option<&LearningFragment> {
        self.iter().find(|f| f.id == id && f.version == version)
    }
}

impl FragmentLibrary for Vec<LearningFragment> {
    fn fragment(&self, id: &str, version: u32) -> Option<&LearningFragment> {
        self.as_slice().fragment(id, version)
    }
}

impl FragmentLibrary for BTreeMap<(String, u32), LearningFragment> {
    fn fragment(&self, id: &str, version: u32) -> Option<&LearningFragment> {
        self.get(&(id.to_string(), version))
    }
}

/// Abstract nodes reachable from `entry`, in breadth-first order following
/// edge priority.
fn abstract_nodes_bfs(f: &LearningFragment) -> Vec<NodeId> {
    let mut seen = BTreeSet::from([f.entry.clone()]);
    let mut queue = VecDeque::from([f.entry.clone()]);
    let mut out = Vec::new();
    while let Some(id) = queue.pop_front() {
        if f.nodes.get(&id).is_some_and(|n| n.kind == ActivityKind::Abstract) {
            out.push(id.clone());
        }
        for e in f.edges.iter().filter(|e| e.source == id) {
            if seen.insert(e.target.clone()) {
                queue.push_back(e.target.clone());
            }
        }
    }
    out
}

/// Concepts known on every path from the entry to each node (before the node
/// itself). `gen` maps a node to the concepts a learner has after finishing it.
fn must_reach_known(
    f: &LearningFragment,
    initial: &BTreeSet<ConceptId>,
    gen: &BTreeMap<NodeId, BTreeSet<ConceptId>>,
) -> BTreeMap<NodeId, BTreeSet<ConceptId>> {
    let universe: BTreeSet<ConceptId> = initial
        .iter()
        .chain(gen.values().flatten())
        .cloned()
        .collect();
    let mut preds: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &f.edges {
        preds.entry(e.target.as_str()).or_default().push(e.source.as_str());
    }
    let mut known: BTreeMap<NodeId, BTreeSet<ConceptId>> = f
        .nodes
        .keys()
        .map(|id| {
            let start = if *id == f.entry { initial } else { &universe };
            (id.clone(), start.clone())
        })
        .collect();
    let out = |known: &BTreeMap<NodeId, BTreeSet<ConceptId>>, id: &str| -> BTreeSet<ConceptId> {
        let mut set = known[id].clone();
        if let Some(g) = gen.get(id) {
            set.extend(g.iter().cloned());
        }
        set
    };
    loop {
        let mut changed = false;
        for id in f.nodes.keys() {
            if *id == f.entry {
                continue;
            }
            let Some(ps) = preds.get(id.as_str()) else {
                continue;
            };
            let mut meet: Option<BTreeSet<ConceptId>> = None;
            for p in ps {
                let o = out(&known, p);
                meet = Some(match meet {
                    None => o,
                    Some(m) => m.intersection(&o).cloned().collect(),
                });
            }
            let meet = meet.unwrap_or_default();
            if meet != known[id] {
                known.insert(id.clone(), meet);
                changed = true;
            }
        }
        if !changed {
            return known;
        }
    }
}

/// Whether every concrete node of `f` can be shown with one of `modalities`.
fn renderable(f: &LearningFragment, modalities: &BTreeSet<Modality>) -> bool {
    f.nodes
        .values()
        .filter(|n| n.kind != ActivityKind::Abstract)
        .all(|n| n.representations.keys().any(|m| modalities.contains(m)))
}

fn candidate_catalog<L: FragmentLibrary + ?Sized>(
    catalog: &FragmentCatalog,
    library: &L,
    data: &AbstractData,
    capabilities: Option<&BTreeSet<Modality>>,
) -> FragmentCatalog {
    let fragments = catalog
        .fragments
        .iter()
        .filter(|entry| {
            let Some(f) = library.fragment(&entry.fragment_id, entry.version) else {
                return true;
            };
            let c = &data.constraints;
            c.max_nodes.is_none_or(|max| f.nodes.len() <= max)
                && c.required_modality.is_none_or(|m| renderable(f, &BTreeSet::from([m])))
                && capabilities.is_none_or(|caps| renderable(f, caps))
        })
        .cloned()
        .collect();
    FragmentCatalog { fragments }
}

/// Replaces every abstract node with a chain of catalog fragments.
///
/// For abstract node `A` with plan `[F0, .., Fn]`, the nodes and edges of `Fk`
/// are copied under the prefix `A.k.`; incoming edges of `A` move to `F0`'s
/// entry, each exit of `Fk` gets a `pass` edge `A.link.k.<exit>` to the entry
/// of `Fk+1`, and `A`'s outgoing edges leave from every exit of `Fn`, keeping
/// their position in the edge list (suffixed `@<exit>` when `Fn` has several
/// exits). Abstract nodes inside spliced fragments are refined in turn, one
/// level deeper. When the goal is already known, `A` is bypassed.
pub fn refine<L: FragmentLibrary + ?Sized>(
    fragment: &LearningFragment,
    catalog: &FragmentCatalog,
    library: &L,
    capabilities: Option<&BTreeSet<Modality>>,
    limits: &RefinementLimits,
) -> Result<LearningFragment, RefineError> {
    let mut queue: VecDeque<(NodeId, u32)> =
        abstract_nodes_bfs(fragment).into_iter().map(|id| (id, 1)).collect();
    if queue.is_empty() {
        return Ok(fragment.clone());
    }
    let mut work = fragment.clone();
    let mut gen: BTreeMap<NodeId, BTreeSet<ConceptId>> = BTreeMap::new();

    while let Some((a, depth)) = queue.pop_front() {
        if depth > limits.max_depth {
            return Err(RefineError::DepthExceeded {
                node: a,
                depth,
                limit: limits.max_depth,
            });
        }
        let data = match &work.nodes[&a].kind_data {
            KindData::Abstract(data) => data.clone(),
            _ => unreachable!("queued nodes are abstract"),
        };
        let known = must_reach_known(&work, &fragment.requires, &gen)
            .remove(&a)
            .unwrap_or_default();
        let candidates = candidate_catalog(catalog, library, &data, capabilities);
        let plan = plan_goal(
            &data.goal,
            &known,
            &candidates,
            &data.constraints,
            capabilities,
            limits,
        )
        .map_err(|source| RefineError::Plan {
            node: a.clone(),
            source,
        })?;
        let instances = plan
            .fragments
            .iter()
            .map(|r| {
                library
                    .fragment(&r.fragment_id, r.version)
                    .ok_or_else(|| RefineError::MissingFragment {
                        id: r.fragment_id.clone(),
                        version: r.version,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let gen_a = gen.remove(&a).unwrap_or_default();
        if instances.is_empty() {
            bypass(&mut work, &a)?;
            continue;
        }
        let nested = splice(&mut work, &a, &instances, &mut gen, gen_a)?;
        queue.extend(nested.into_iter().map(|id| (id, depth + 1)));
    }

    let report = validate_fragment(&work, &default_context_vars());
    if !report.is_publishable() {
        let codes: Vec<_> = report.errors.iter().map(|i| i.code.as_str()).collect();
        return Err(RefineError::ResultInvalid(codes.join(", ")));
    }
    Ok(work)
}

fn bypass(work: &mut LearningFragment, a: &str) -> Result<(), RefineError> {
    let target = work
        .edges
        .iter()
        .find(|e| e.source == a)
        .map(|e| e.target.clone());
    match target {
        Some(t) if t == a => {
            return Err(RefineError::ResultInvalid(format!(
                "cannot bypass self-looping node `{a}`"
            )))
        }
        Some(t) => {
            work.edges.retain(|e| e.source != a);
            for e in work.edges.iter_mut().filter(|e| e.target == a) {
                e.target = t.clone();
            }
            if work.entry == a {
                work.entry = t;
            }
        }
        None => {
            if work.entry == a {
                return Err(RefineError::ResultInvalid(format!(
                    "bypassing entry `{a}` leaves nothing to run"
                )));
            }
            work.edges.retain(|e| e.target != a);
        }
    }
    work.nodes.remove(a);
    Ok(())
}

/// Splices `instances` in place of `a`; returns the abstract nodes copied in,
/// in refinement order.
fn splice(
    work: &mut LearningFragment,
    a: &str,
    instances: &[&LearningFragment],
    gen: &mut BTreeMap<NodeId, BTreeSet<ConceptId>>,
    gen_a: BTreeSet<ConceptId>,
) -> Result<Vec<NodeId>, RefineError> {
    let prefixed = |k: usize, id: &str| format!("{a}.{k}.{id}");
    let last = instances.len() - 1;
    let first_entry = prefixed(0, &instances[0].entry);
    let last_exits: Vec<NodeId> = instances[last]
        .exits()
        .into_iter()
        .map(|x| prefixed(last, x))
        .collect();

    let mut edges = Vec::with_capacity(work.edges.len());
    for e in work.edges.drain(..) {
        let target = if e.target == a { first_entry.clone() } else { e.target.clone() };
        if e.source == a {
            for x in &last_exits {
                edges.push(Edge {
                    id: if last_exits.len() == 1 { e.id.clone() } else { format!("{}@{x}", e.id) },
                    source: x.clone(),
                    target: target.clone(),
                    ..e.clone()
                });
            }
        } else {
            edges.push(Edge { target, ..e });
        }
    }

    work.nodes.remove(a);
    let mut nested = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        for node in inst.nodes.values() {
            let mut node = node.clone();
            node.id = prefixed(k, &node.id);
            if work.nodes.contains_key(&node.id) {
                return Err(RefineError::ResultInvalid(format!("node id `{}` collides", node.id)));
            }
            work.nodes.insert(node.id.clone(), node);
        }
        for e in &inst.edges {
            edges.push(Edge {
                id: prefixed(k, &e.id),
                source: prefixed(k, &e.source),
                target: prefixed(k, &e.target),
                ..e.clone()
            });
        }
        for x in inst.exits() {
            let exit = prefixed(k, x);
            gen.entry(exit.clone()).or_default().extend(inst.provides.iter().cloned());
            if k < last {
                edges.push(Edge {
                    id: format!("{a}.link.{k}.{x}"),
                    source: exit,
                    target: prefixed(k + 1, &instances[k + 1].entry),
                    condition: ConditionSpec::builtin("pass"),
                    label: None,
                });
            }
        }
        nested.extend(abstract_nodes_bfs(inst).into_iter().map(|id| prefixed(k, &id)));
    }
    for x in &last_exits {
        gen.entry(x.clone()).or_default().extend(gen_a.iter().cloned());
    }

    let mut ids = BTreeSet::new();
    if let Some(dup) = edges.iter().find(|e| !ids.insert(e.id.clone())) {
        return Err(RefineError::ResultInvalid(format!("edge id `{}` collides", dup.id)));
    }
    work.edges = edges;
    if work.entry == a {
        work.entry = first_entry;
    }
    Ok(nested)
}
