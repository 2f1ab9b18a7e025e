use std::path::PathBuf;

use proptest::prelude::*;
use tutorgraph_core::engine::EngineConfig;
use tutorgraph_core::fixtures::demo_fixture;
use tutorgraph_core::simulator::{analytic_expected_steps, simulate, StudentModel};

const GOLDEN_SEED: u64 = 20240501;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/golden/demo-uniform-0.5.metrics.json")
}

#[test]
fn monte_carlo_agrees_with_fundamental_matrix() {
    let model = StudentModel::uniform(0.5);
    let expected = analytic_expected_steps(&demo_fixture(), &model).unwrap();
    let m = simulate(&demo_fixture(), &model, 10_000, GOLDEN_SEED, EngineConfig::default()).unwrap();
    assert_eq!(m.completion_rate, 1.0);
    assert!(
        (m.mean_steps - expected).abs() <= 3.0 * m.steps_stderr,
        "{} vs {expected} (se {})",
        m.mean_steps,
        m.steps_stderr
    );
}

/// Set `TUTORGRAPH_BLESS=1` to rewrite the golden file after an intended change.
#[test]
fn metrics_match_golden_bytes() {
    let model = StudentModel::uniform(0.5);
    let bytes = simulate(&demo_fixture(), &model, 10_000, GOLDEN_SEED, EngineConfig::default())
        .unwrap()
        .to_canonical_json();
    let path = golden_path();
    if std::env::var_os("TUTORGRAPH_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &bytes).unwrap();
    }
    let golden = std::fs::read(&path).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), String::from_utf8(golden).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn monte_carlo_tracks_analytic_across_pass_rates(p in 0.2f64..1.0, seed in any::<u64>()) {
        let model = StudentModel::uniform(p);
        let expected = analytic_expected_steps(&demo_fixture(), &model).unwrap();
        let m = simulate(&demo_fixture(), &model, 4_000, seed, EngineConfig::default()).unwrap();
        // Five standard errors keeps the false-alarm rate negligible over many cases.
        prop_assert!(
            (m.mean_steps - expected).abs() <= 5.0 * m.steps_stderr + 1e-9,
            "p={} {} vs {}", p, m.mean_steps, expected
        );
    }
}
