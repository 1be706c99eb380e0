//! Benchmark-only crate; see `benches/placement.rs`. Run with
//! `cargo bench -p fogcache-bench`.
