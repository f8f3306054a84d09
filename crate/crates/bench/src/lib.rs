//! Criterion benchmarks for the icolab kernels; see `benches/kernels.rs`.
