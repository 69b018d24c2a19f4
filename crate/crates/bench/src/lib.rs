//! Benchmark-only crate; see `benches/network.rs`.
