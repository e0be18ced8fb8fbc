//! Flow-aware path planning on a graph sampled from the flow field.

pub mod graph;
pub mod kdtree;
pub mod los;
pub mod search;
pub mod travel;

pub use graph::{build_graph, FlowGraph, Node, DEFAULT_K};
pub use kdtree::KdTree;
pub use los::{segment_clear, supercover};
pub use search::{astar, astar_nodes, astar_with, edge_cost, heuristic, CostModel, PlanResult};
pub use travel::{smooth_path, travel_time, travel_time_with};
