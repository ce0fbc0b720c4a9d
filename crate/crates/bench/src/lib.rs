//! Criterion benchmarks for the integrators live in `benches/`.
