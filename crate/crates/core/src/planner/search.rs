//! Flow-aware A* search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::graph::FlowGraph;
use crate::Vec2;

/// Cost of moving from `x_cur` to `x_neig` when the local flow is `v_cur`:
/// `|dx| * |dx/|dx| - v_cur/v_max|`.
pub fn edge_cost(x_cur: Vec2, x_neig: Vec2, v_cur: Vec2, v_max: f64) -> Result<f64> {
    let d = x_neig - x_cur;
    let len = d.norm();
    if len == 0.0 {
        return Err(Error::ZeroLengthEdge);
    }
    Ok(len * (d / len - v_cur / v_max).norm())
}

/// Same form as [`edge_cost`] towards the goal; zero at the goal.
pub fn heuristic(x_cur: Vec2, x_goal: Vec2, v_cur: Vec2, v_max: f64) -> f64 {
    let d = x_goal - x_cur;
    let len = d.norm();
    if len == 0.0 {
        return 0.0;
    }
    len * (d / len - v_cur / v_max).norm()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CostModel {
    /// Flow-aware edge cost and heuristic.
    #[default]
    FlowAware,
    /// Plain Euclidean length, flow ignored.
    Euclidean,
}

impl CostModel {
    pub fn edge(self, graph: &FlowGraph, from: usize, to: usize) -> Result<f64> {
        let (a, b) = (&graph.nodes[from], &graph.nodes[to]);
        match self {
            CostModel::FlowAware => edge_cost(a.pos, b.pos, a.vel, graph.v_max),
            CostModel::Euclidean => {
                let len = (b.pos - a.pos).norm();
                if len == 0.0 {
                    Err(Error::ZeroLengthEdge)
                } else {
                    Ok(len)
                }
            }
        }
    }

    pub fn estimate(self, graph: &FlowGraph, from: usize, goal: usize) -> f64 {
        let (a, g) = (&graph.nodes[from], &graph.nodes[goal]);
        match self {
            CostModel::FlowAware => heuristic(a.pos, g.pos, a.vel, graph.v_max),
            CostModel::Euclidean => (g.pos - a.pos).norm(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub path: Vec<[f64; 2]>,
    #[serde(skip)]
    pub nodes: Vec<usize>,
    pub total_cost: f64,
    /// Filled in by the caller once the path has been timed.
    pub travel_time_s: Option<f64>,
    pub expanded: usize,
}

impl PlanResult {
    pub fn positions(&self) -> Vec<Vec2> {
        self.path.iter().map(|p| Vec2::new(p[0], p[1])).collect()
    }

    pub fn length(&self) -> f64 {
        self.positions()
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.idx.cmp(&self.idx))
    }
}

/// Flow-aware A* between the nodes nearest to `start` and `goal`.
pub fn astar(graph: &FlowGraph, start: Vec2, goal: Vec2) -> Result<PlanResult> {
    astar_with(graph, start, goal, CostModel::FlowAware)
}

pub fn astar_with(
    graph: &FlowGraph,
    start: Vec2,
    goal: Vec2,
    model: CostModel,
) -> Result<PlanResult> {
    let s = graph.map_point(start).ok_or_else(|| {
        Error::StartGoalUnmapped(format!("start ({:.3e}, {:.3e})", start.x, start.y))
    })?;
    let g = graph.map_point(goal).ok_or_else(|| {
        Error::StartGoalUnmapped(format!("goal ({:.3e}, {:.3e})", goal.x, goal.y))
    })?;
    astar_nodes(graph, s, g, model)
}

/// A* between node indices. Ties on `f` go to the smaller `h`, then the smaller index;
/// closed nodes are never reopened.
pub fn astar_nodes(graph: &FlowGraph, s: usize, g: usize, model: CostModel) -> Result<PlanResult> {
    let n = graph.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    cost[s] = 0.0;
    let h0 = model.estimate(graph, s, g);
    open.push(Open {
        f: h0,
        h: h0,
        idx: s,
    });
    let mut expanded = 0;
    while let Some(Open { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        expanded += 1;
        if idx == g {
            let mut nodes = vec![g];
            while *nodes.last().unwrap() != s {
                nodes.push(parent[*nodes.last().unwrap()]);
            }
            nodes.reverse();
            return Ok(PlanResult {
                path: nodes
                    .iter()
                    .map(|&i| [graph.nodes[i].pos.x, graph.nodes[i].pos.y])
                    .collect(),
                nodes,
                total_cost: cost[g],
                travel_time_s: None,
                expanded,
            });
        }
        for &j in &graph.adjacency[idx] {
            if closed[j] {
                continue;
            }
            let c = cost[idx] + model.edge(graph, idx, j)?;
            if c < cost[j] {
                cost[j] = c;
                parent[j] = idx;
                let h = model.estimate(graph, j, g);
                open.push(Open {
                    f: c + h,
                    h,
                    idx: j,
                });
            }
        }
    }
    Err(Error::NoPath)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_cost_examples() {
        let o = Vec2::zeros();
        let x = Vec2::new(1.0, 0.0);
        assert_eq!(edge_cost(o, x, Vec2::zeros(), 2.0).unwrap(), 1.0);
        assert_eq!(edge_cost(o, x, Vec2::new(2.0, 0.0), 2.0).unwrap(), 0.0);
        assert_eq!(edge_cost(o, x, Vec2::new(-2.0, 0.0), 2.0).unwrap(), 2.0);
        assert!(matches!(
            edge_cost(x, x, o, 1.0),
            Err(Error::ZeroLengthEdge)
        ));
    }

    #[test]
    fn heuristic_examples() {
        let o = Vec2::zeros();
        assert_eq!(heuristic(o, o, Vec2::new(1.0, 1.0), 1.0), 0.0);
        assert_eq!(heuristic(o, Vec2::new(3.0, 4.0), o, 1.0), 5.0);
        assert_eq!(
            heuristic(o, Vec2::new(0.0, 2.0), Vec2::new(0.0, 0.5), 0.5),
            0.0
        );
    }
}
