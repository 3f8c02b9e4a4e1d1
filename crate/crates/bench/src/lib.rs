//! Criterion benchmarks for the sampler and coverage evaluation; see `benches/`.
