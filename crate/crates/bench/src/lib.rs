//! Criterion benchmarks for `ncstream-core`; see `benches/`.
