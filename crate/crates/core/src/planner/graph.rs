//! Search graph sampled from a flow field.

use std::sync::Arc;

use crate::domain::{ChannelMask, FlowField};
use crate::error::{Error, Result};
use crate::planner::kdtree::KdTree;
use crate::planner::los::segment_clear;
use crate::Vec2;

pub const DEFAULT_K: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub pos: Vec2,
    pub vel: Vec2,
}

#[derive(Clone, Debug)]
pub struct FlowGraph {
    pub nodes: Vec<Node>,
    /// Sorted neighbor lists; symmetric.
    pub adjacency: Vec<Vec<usize>>,
    pub v_max: f64,
    /// Lattice spacing in meters, used to map query points onto nodes.
    pub spacing: f64,
    tree: KdTree,
    mask: Option<Arc<ChannelMask>>,
}

impl FlowGraph {
    /// Builds k-nearest adjacency over explicit nodes, keeping pairs accepted by
    /// `visible`, then closes it under symmetry.
    pub fn from_nodes(
        nodes: Vec<Node>,
        k: usize,
        v_max: f64,
        spacing: f64,
        visible: impl Fn(Vec2, Vec2) -> bool,
    ) -> Result<Self> {
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "v_max must be positive, got {v_max}"
            )));
        }
        if nodes.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let tree = KdTree::new(nodes.iter().map(|n| n.pos).collect());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            for j in tree.nearest_k(node.pos, k, Some(i)) {
                if visible(node.pos, nodes[j].pos) {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(FlowGraph {
            nodes,
            adjacency,
            v_max,
            spacing,
            tree,
            mask: None,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mask(&self) -> Option<&Arc<ChannelMask>> {
        self.mask.as_ref()
    }

    /// Index of the node nearest to `pos`, if one lies within two lattice spacings and
    /// `pos` itself is in the fluid.
    pub fn map_point(&self, pos: Vec2) -> Option<usize> {
        if let Some(mask) = &self.mask {
            if !mask.is_fluid_pos(pos) {
                return None;
            }
        }
        let idx = self.tree.nearest(pos)?;
        ((self.nodes[idx].pos - pos).norm() <= 2.0 * self.spacing + 1e-12 * self.spacing)
            .then_some(idx)
    }

    /// Connected-component label per node, numbered from 0 in order of lowest node index.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for s in 0..self.len() {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(i) = stack.pop() {
                for &j in &self.adjacency[i] {
                    if label[j] == usize::MAX {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

/// Nodes at the FLUID pixel centers of the stride lattice (offset `stride / 2`), each
/// carrying the local flow velocity; edges join k-nearest pairs with clear line of sight.
pub fn build_graph(field: &FlowField, stride: usize, k: usize, v_max: f64) -> Result<FlowGraph> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be at least 1".into()));
    }
    let mask = field.mask_arc().clone();
    let (w, h) = mask.dims();
    let off = stride / 2;
    let mut nodes = Vec::new();
    for r in (off..h).step_by(stride) {
        for c in (off..w).step_by(stride) {
            if mask.is_fluid(r, c) {
                nodes.push(Node {
                    pos: mask.pixel_center(r, c),
                    vel: field.velocity_at_pixel(r, c),
                });
            }
        }
    }
    let spacing = stride as f64 * mask.pixel_size();
    let mut graph =
        FlowGraph::from_nodes(nodes, k, v_max, spacing, |a, b| segment_clear(&mask, a, b))?;
    graph.mask = Some(mask);
    Ok(graph)
}
