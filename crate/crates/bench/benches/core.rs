use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tutorgraph_core::condition::{evaluate_condition, parse_condition, Context, Value};
use tutorgraph_core::engine::{Engine, EngineConfig, SessionMeta};
use tutorgraph_core::fixtures::{
    demo_fixture, demo_fixture_abstract_rd, demo_traces, example_catalog, example_library, reference_pack,
};
use tutorgraph_core::fragment::{default_context_vars, validate_fragment, Modality};
use tutorgraph_core::planner::{plan_goal, refine, RefinementLimits};
use tutorgraph_core::simulator::{analytic_expected_steps, simulate, StudentModel};

const CONDITION: &str = r#"(passed && score >= 0.75) || (!passed && attempts < 3 && label == "retry")"#;

struct Vars;

impl Context for Vars {
    fn lookup(&self, name: &str) -> Option<Value> {
        Some(match name {
            "passed" => Value::Bool(false),
            "score" => Value::Num(0.5),
            "attempts" => Value::Num(2.0),
            "label" => Value::Str("retry".into()),
            _ => return None,
        })
    }
}

fn conditions(c: &mut Criterion) {
    c.bench_function("condition/parse", |b| b.iter(|| parse_condition(black_box(CONDITION))));
    let parsed = parse_condition(CONDITION).unwrap();
    c.bench_function("condition/evaluate", |b| b.iter(|| evaluate_condition(black_box(&parsed), &Vars)));
}

fn fragments(c: &mut Criterion) {
    let fragment = demo_fixture();
    let vars = default_context_vars();
    c.bench_function("fragment/validate", |b| b.iter(|| validate_fragment(black_box(&fragment), &vars)));
}

fn sessions(c: &mut Criterion) {
    let engine = Engine::new(demo_fixture(), reference_pack().rules, EngineConfig::default()).unwrap();
    let caps: BTreeSet<Modality> = [Modality::Text, Modality::Code].into();
    let trace = &demo_traces()[0];
    c.bench_function("engine/happy-path-session", |b| {
        b.iter(|| {
            let meta = SessionMeta {
                id: "bench".into(),
                created_at: String::new(),
            };
            let mut session = engine.start_session("learner", &caps, meta).unwrap();
            for s in &trace.submissions {
                engine.submit(&mut session, s.clone()).unwrap();
            }
            session
        })
    });
}

fn planning(c: &mut Criterion) {
    let catalog = example_catalog();
    let library = example_library();
    let goal: BTreeSet<String> = ["average", "median", "difference"].map(String::from).into();
    let limits = RefinementLimits::default();
    c.bench_function("planner/plan", |b| {
        b.iter(|| plan_goal(black_box(&goal), &BTreeSet::new(), &catalog, &Default::default(), None, &limits))
    });
    let host = demo_fixture_abstract_rd();
    c.bench_function("planner/refine", |b| b.iter(|| refine(black_box(&host), &catalog, &library, None, &limits)));
}

fn simulation(c: &mut Criterion) {
    let fragment = demo_fixture();
    let model = StudentModel::uniform(0.5);
    let mut group = c.benchmark_group("simulator");
    group.sample_size(10);
    group.bench_function("monte-carlo-10k", |b| {
        b.iter(|| simulate(&fragment, &model, 10_000, 1, EngineConfig::default()))
    });
    group.bench_function("analytic", |b| b.iter(|| analytic_expected_steps(&fragment, &model)));
    group.finish();
}

criterion_group!(benches, conditions, fragments, sessions, planning, simulation);
criterion_main!(benches);
