//! Online algorithms for node-weighted rent-or-buy Steiner forest.

pub mod fractional;
pub mod graph;
pub mod guess;
pub mod harness;
pub mod pcsc;
pub mod steiner;

pub use fractional::FractionalCover;
pub use graph::{GraphError, NodeId, NodeWeightedGraph, ZeroedSet};
pub use guess::{GuessConfig, GuessDoubling, GuessError, Route};
pub use harness::{Instance, Outcome, RunConfig, Variant};
pub use pcsc::{Decision, PcscState, Scheme};
pub use steiner::{RobConfig, RobCore, RobError, Rounding};
