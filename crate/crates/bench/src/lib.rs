//! Criterion benchmarks for qpm-core live in `benches/`.
