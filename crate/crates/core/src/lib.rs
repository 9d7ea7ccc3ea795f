pub mod codec;
pub mod embedding;
pub mod graph;
pub mod hashing;
pub mod iql;
pub mod pipeline;
pub mod scorer;
pub mod sketch;
pub mod synth;
