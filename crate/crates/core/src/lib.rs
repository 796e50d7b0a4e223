//! Frame-level timeline modeling for continuous-time link prediction.
//!
//! A node's temporal neighborhood is cut into overlapping frames of its most
//! recent links. Each frame is summarized by time-aware multi-head attention
//! and the frame summaries along the node's timeline are combined by a
//! linear timeline aggregator. Everything is built on a small reverse-mode
//! differentiation engine in [`tensor`].

pub mod tensor;
pub mod graph;
pub mod framing;
pub mod model;
pub mod training;
pub mod evaluation;
