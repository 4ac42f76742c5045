//! Criterion benchmarks for the kmse estimators; see `benches/`.
