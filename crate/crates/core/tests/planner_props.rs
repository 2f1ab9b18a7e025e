use std::collections::BTreeSet;

use proptest::prelude::*;
use tutorgraph_core::fixtures::{demo_fixture_abstract_rd, example_catalog, example_library};
use tutorgraph_core::fragment::{
    default_context_vars, validate_fragment, AbstractConstraints, ActivityKind,
};
use tutorgraph_core::planner::{
    greedy_cover, plan_goal, refine, CatalogEntry, FragmentCatalog, PlanError, RefinementLimits,
};

const CONCEPTS: [&str; 5] = ["c0", "c1", "c2", "c3", "c4"];

fn concepts(mask: u8) -> BTreeSet<String> {
    (0..5)
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| CONCEPTS[i].to_string())
        .collect()
}

fn entry(i: usize, provides: u8, requires: u8, cost: f64) -> CatalogEntry {
    CatalogEntry {
        fragment_id: format!("F{i}"),
        version: 1,
        provides: concepts(provides),
        requires: concepts(requires),
        cost,
        kinds_present: [ActivityKind::Lesson].into(),
        modalities_required: BTreeSet::new(),
        gamification_tags: BTreeSet::new(),
    }
}

/// Cheapest cover of `goal` by brute force over all subsets.
fn optimum(goal: u8, entries: &[(u8, f64)]) -> Option<f64> {
    (0u32..1 << entries.len())
        .filter_map(|pick| {
            let mut covered = 0u8;
            let mut cost = 0.0;
            for (i, (mask, c)) in entries.iter().enumerate() {
                if pick & (1 << i) != 0 {
                    covered |= mask;
                    cost += c;
                }
            }
            (covered & goal == goal).then_some(cost)
        })
        .min_by(f64::total_cmp)
}

fn catalog_strategy() -> impl Strategy<Value = Vec<(u8, f64)>> {
    prop::collection::vec((1u8..32, prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0, 7.0])), 1..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn greedy_cover_within_log_bound(entries in catalog_strategy(), goal in 1u8..32) {
        let catalog: Vec<CatalogEntry> = entries
            .iter()
            .enumerate()
            .map(|(i, (mask, cost))| entry(i, *mask, 0, *cost))
            .collect();
        let refs: Vec<&CatalogEntry> = catalog.iter().collect();
        let needed = concepts(goal);
        match (greedy_cover(&needed, &refs), optimum(goal, &entries)) {
            (Ok(picks), Some(best)) => {
                let cost: f64 = picks.iter().map(|i| entries[*i].1).sum();
                prop_assert!(cost <= (5f64.ln() + 1.0) * best + 1e-9, "{cost} vs {best}");
                let covered: BTreeSet<String> =
                    picks.iter().flat_map(|i| catalog[*i].provides.clone()).collect();
                prop_assert!(needed.is_subset(&covered));
            }
            (Err(missing), None) => {
                let union = entries.iter().fold(0u8, |acc, (m, _)| acc | m);
                prop_assert_eq!(missing, concepts(goal & !union));
            }
            (greedy, best) => prop_assert!(false, "greedy {greedy:?} vs optimum {best:?}"),
        }
    }

    #[test]
    fn plans_cover_prerequisites_in_order(
        entries in prop::collection::vec((1u8..32, 0u8..32, 1u32..4), 1..=6),
        goal in 1u8..32,
        known in 0u8..32,
        rotate in 0usize..6,
    ) {
        let catalog = FragmentCatalog {
            fragments: entries
                .iter()
                .enumerate()
                .map(|(i, (p, r, c))| entry(i, *p, *r & !*p, f64::from(*c)))
                .collect(),
        };
        let (goal, known) = (concepts(goal), concepts(known));
        let limits = RefinementLimits::default();
        let constraints = AbstractConstraints::default();
        let result = plan_goal(&goal, &known, &catalog, &constraints, None, &limits);

        // Catalog order never matters.
        let mut rotated = catalog.clone();
        let len = rotated.fragments.len();
        rotated.fragments.rotate_left(rotate % len);
        prop_assert_eq!(&plan_goal(&goal, &known, &rotated, &constraints, None, &limits), &result);

        match result {
            Ok(plan) => {
                let chosen: Vec<&CatalogEntry> = plan
                    .fragments
                    .iter()
                    .map(|f| catalog.fragments.iter().find(|e| e.fragment_id == f.fragment_id).unwrap())
                    .collect();
                let covered: BTreeSet<String> = chosen.iter().flat_map(|e| e.provides.clone()).collect();
                prop_assert_eq!(&covered, &plan.covered);
                prop_assert!(goal.difference(&known).all(|c| covered.contains(c)));
                let cost: f64 = chosen.iter().map(|e| e.cost).sum();
                prop_assert_eq!(cost, plan.total_cost);
                // Every prerequisite is known or taught by an earlier fragment.
                let mut taught = known.clone();
                for e in &chosen {
                    for r in &e.requires {
                        let later = chosen.iter().any(|o| o.provides.contains(r));
                        prop_assert!(taught.contains(r) || !later, "{} needs {r}", e.fragment_id);
                        prop_assert!(known.contains(r) || later, "{} needs {r}", e.fragment_id);
                    }
                    taught.extend(e.provides.iter().cloned());
                }
            }
            Err(PlanError::UncoverableGoal { missing }) => {
                let offered: BTreeSet<String> =
                    catalog.fragments.iter().flat_map(|e| e.provides.clone()).collect();
                prop_assert!(!missing.is_empty());
                prop_assert!(missing.iter().all(|c| !offered.contains(c) && !known.contains(c)));
            }
            Err(PlanError::PrerequisiteCycle { fragments }) => prop_assert!(fragments.len() >= 2),
            Err(other) => prop_assert!(false, "unexpected {other:?}"),
        }
    }

    #[test]
    fn refinement_is_sound_for_any_goal(goal in prop::sample::subsequence(vec!["average", "median", "difference"], 1..=3)) {
        let mut host = demo_fixture_abstract_rd();
        if let tutorgraph_core::fragment::KindData::Abstract(a) =
            &mut host.nodes.get_mut("RD").unwrap().kind_data
        {
            a.goal = goal.iter().map(|g| g.to_string()).collect();
        }
        let catalog = example_catalog();
        let library = example_library();
        let limits = RefinementLimits::default();
        let once = refine(&host, &catalog, &library, None, &limits).unwrap();
        prop_assert_eq!(once.abstract_nodes().count(), 0);
        let report = validate_fragment(&once, &default_context_vars());
        prop_assert!(report.errors.is_empty(), "{:?}", report);
        prop_assert_eq!(&refine(&host, &catalog, &library, None, &limits).unwrap(), &once);
        // Refining a concrete fragment changes nothing.
        prop_assert_eq!(&refine(&once, &catalog, &library, None, &limits).unwrap(), &once);
    }
}
