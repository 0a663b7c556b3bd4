//! Criterion benchmarks for the reservoir pipeline live in `benches/`.
