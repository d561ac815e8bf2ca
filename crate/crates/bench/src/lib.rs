//! Criterion benchmarks for slab assembly, factorization and Newton solves; see `benches/`.
