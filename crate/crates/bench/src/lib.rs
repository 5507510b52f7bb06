//! Criterion benchmarks for the local solvers and full runs; see `benches/solvers.rs`.
