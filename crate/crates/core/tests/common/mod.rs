#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use flownav::planner::{CostModel, FlowGraph};

/// Textbook Dijkstra over the same directed edge weights the planner uses.
pub fn dijkstra(g: &FlowGraph, s: usize, t: usize, model: CostModel) -> f64 {
    let mut dist = vec![f64::INFINITY; g.len()];
    dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, s)));
    while let Some(Reverse((bits, i))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[i] {
            continue;
        }
        if i == t {
            return d;
        }
        for &j in &g.adjacency[i] {
            let c = d + model.edge(g, i, j).unwrap();
            if c < dist[j] {
                dist[j] = c;
                // non-negative floats order like their bit patterns
                heap.push(Reverse((c.to_bits(), j)));
            }
        }
    }
    f64::INFINITY
}
