//! Criterion benchmarks for bsid-core live in `benches/`.
