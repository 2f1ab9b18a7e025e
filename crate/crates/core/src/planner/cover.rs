use std::collections::{BTreeMap, BTreeSet};

use super::{CatalogEntry, FragmentCatalog, FragmentRef, Plan, PlanError, RefinementLimits};
use crate::fragment::{AbstractConstraints, ConceptId, Modality};

/// Greedy weighted set cover of `needed` by `candidates`.
///
/// Each round picks the unpicked candidate with the lowest cost per newly
/// covered concept of `needed`; equal ratios go to the smaller fragment id.
/// Returns indices into `candidates` in pick order, or the concepts no
/// candidate provides.
pub fn greedy_cover(
    needed: &BTreeSet<ConceptId>,
    candidates: &[&CatalogEntry],
) -> Result<Vec<usize>, BTreeSet<ConceptId>> {
    let mut uncovered = needed.clone();
    let mut picked = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, entry) in candidates.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            let gain = entry.provides.intersection(&uncovered).count();
            if gain == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((j, best_gain)) => {
                    // cost_i / gain_i < cost_j / gain_j without dividing.
                    let lhs = entry.cost * best_gain as f64;
                    let rhs = candidates[j].cost * gain as f64;
                    lhs < rhs || (lhs == rhs && entry.fragment_id < candidates[j].fragment_id)
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else {
            return Err(uncovered);
        };
        for concept in &candidates[i].provides {
            uncovered.remove(concept);
        }
        picked.push(i);
    }
    Ok(picked)
}

fn admissible(
    entry: &CatalogEntry,
    constraints: &AbstractConstraints,
    capabilities: Option<&BTreeSet<Modality>>,
) -> bool {
    if let Some(allowed) = &constraints.allowed_kinds {
        if !entry.kinds_present.is_subset(allowed) {
            return false;
        }
    }
    if let Some(m) = constraints.required_modality {
        if entry.modalities_required.iter().any(|r| *r != m) {
            return false;
        }
    }
    if let Some(caps) = capabilities {
        if !entry.modalities_required.is_subset(caps) {
            return false;
        }
    }
    true
}

/// Plans a fragment sequence teaching `goal` to a learner who already knows
/// `known`.
///
/// After the goal cover, prerequisites of the selected fragments that are
/// neither known nor provided by the selection are covered by further passes
/// until nothing is missing.
pub fn plan_goal(
    goal: &BTreeSet<ConceptId>,
    known: &BTreeSet<ConceptId>,
    catalog: &FragmentCatalog,
    constraints: &AbstractConstraints,
    capabilities: Option<&BTreeSet<Modality>>,
    limits: &RefinementLimits,
) -> Result<Plan, PlanError> {
    if goal.is_empty() {
        return Err(PlanError::EmptyGoal);
    }
    let candidates: Vec<&CatalogEntry> = catalog
        .fragments
        .iter()
        .filter(|e| admissible(e, constraints, capabilities))
        .collect();

    let mut selected: Vec<&CatalogEntry> = Vec::new();
    let mut needed: BTreeSet<ConceptId> = goal.difference(known).cloned().collect();
    while !needed.is_empty() {
        let remaining: Vec<&CatalogEntry> = candidates
            .iter()
            .copied()
            .filter(|c| !selected.iter().any(|s| s.fragment_id == c.fragment_id))
            .collect();
        let picks =
            greedy_cover(&needed, &remaining).map_err(|missing| PlanError::UncoverableGoal { missing })?;
        selected.extend(picks.into_iter().map(|i| remaining[i]));

        let provided: BTreeSet<&ConceptId> = selected.iter().flat_map(|e| &e.provides).collect();
        needed = selected
            .iter()
            .flat_map(|e| &e.requires)
            .filter(|c| !known.contains(*c) && !provided.contains(c))
            .cloned()
            .collect();
    }

    if selected.len() > limits.max_chain_length {
        return Err(PlanError::ChainTooLong {
            length: selected.len(),
            limit: limits.max_chain_length,
        });
    }
    let ordered = prerequisite_order(&selected, known)?;
    Ok(Plan {
        fragments: ordered
            .iter()
            .map(|e| FragmentRef {
                fragment_id: e.fragment_id.clone(),
                version: e.version,
            })
            .collect(),
        covered: ordered.iter().flat_map(|e| e.provides.iter().cloned()).collect(),
        total_cost: ordered.iter().map(|e| e.cost).sum(),
    })
}

/// Kahn's algorithm over "provides one of my unknown requires" edges; ready
/// fragments leave in id order.
fn prerequisite_order<'a>(
    selected: &[&'a CatalogEntry],
    known: &BTreeSet<ConceptId>,
) -> Result<Vec<&'a CatalogEntry>, PlanError> {
    let by_id: BTreeMap<&str, &CatalogEntry> =
        selected.iter().map(|e| (e.fragment_id.as_str(), *e)).collect();
    let mut indegree: BTreeMap<&str, usize> = by_id.keys().map(|id| (*id, 0)).collect();
    let mut successors: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, entry) in &by_id {
        for (other, provider) in &by_id {
            if id == other {
                continue;
            }
            let depends = entry
                .requires
                .iter()
                .any(|c| !known.contains(c) && provider.provides.contains(c));
            if depends {
                *indegree.get_mut(id).expect("present") += 1;
                successors.entry(other).or_default().push(id);
            }
        }
    }
    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut order = Vec::new();
    while let Some(id) = ready.pop_first() {
        order.push(by_id[id]);
        for next in successors.get(id).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("present");
            *d -= 1;
            if *d == 0 {
                ready.insert(next);
            }
        }
    }
    if order.len() < by_id.len() {
        let placed: BTreeSet<&str> = order.iter().map(|e| e.fragment_id.as_str()).collect();
        return Err(PlanError::PrerequisiteCycle {
            fragments: by_id
                .keys()
                .filter(|id| !placed.contains(*id))
                .map(|id| id.to_string())
                .collect(),
        });
    }
    Ok(order)
}
