//! Criterion benchmarks for `exprclone-core`; see `benches/`.
