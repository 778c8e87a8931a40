//! Benchmarks for the ovfree engine live in `benches/`.
