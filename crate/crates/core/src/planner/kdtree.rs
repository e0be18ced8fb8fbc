//! Static 2-d tree for nearest-neighbor queries over node positions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::Vec2;

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec2>,
    /// Point indices laid out as an implicit balanced tree: the median of each range is
    /// its root, split on x at even depth and y at odd depth.
    order: Vec<usize>,
}

#[derive(PartialEq)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl KdTree {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(&points, &mut order, 0);
        KdTree { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> Vec2 {
        self.points[idx]
    }

    /// The `k` nearest points to `query`, closest first; ties go to the smaller index.
    /// `skip` excludes one index (typically the query point itself).
    pub fn nearest_k(&self, query: Vec2, k: usize, skip: Option<usize>) -> Vec<usize> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(query, k, skip, 0, self.order.len(), 0, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| c.idx).collect()
    }

    pub fn nearest(&self, query: Vec2) -> Option<usize> {
        self.nearest_k(query, 1, None).first().copied()
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        q: Vec2,
        k: usize,
        skip: Option<usize>,
        lo: usize,
        hi: usize,
        depth: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        if Some(idx) != skip {
            let cand = Candidate {
                d2: (p - q).norm_squared(),
                idx,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().unwrap() {
                heap.pop();
                heap.push(cand);
            }
        }
        let diff = if depth.is_multiple_of(2) { q.x - p.x } else { q.y - p.y };
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, k, skip, near.0, near.1, depth + 1, heap);
        if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
            self.search(q, k, skip, far.0, far.1, depth + 1, heap);
        }
    }
}

fn build(points: &[Vec2], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    let key = |i: &usize| {
        if depth.is_multiple_of(2) {
            points[*i].x
        } else {
            points[*i].y
        }
    };
    order.select_nth_unstable_by(mid, |a, b| key(a).total_cmp(&key(b)));
    let (left, right) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force_on_a_lattice_with_ties() {
        let pts: Vec<Vec2> = (0..7)
            .flat_map(|i| (0..5).map(move |j| Vec2::new(i as f64, j as f64)))
            .collect();
        let tree = KdTree::new(pts.clone());
        for (qi, &q) in pts.iter().enumerate() {
            let got = tree.nearest_k(q, 6, Some(qi));
            let mut brute: Vec<usize> = (0..pts.len()).filter(|&i| i != qi).collect();
            brute.sort_by(|&a, &b| {
                (pts[a] - q)
                    .norm_squared()
                    .total_cmp(&(pts[b] - q).norm_squared())
                    .then(a.cmp(&b))
            });
            assert_eq!(got, brute[..6].to_vec());
        }
    }
}
