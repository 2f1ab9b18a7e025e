//! Criterion benchmarks for the core library live in `benches/`.
