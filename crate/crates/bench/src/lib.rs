//! Benchmarks for the moderation engine; see `benches/engine.rs`.
