//! Exact k-nearest-neighbor search over flat point sets.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 24;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Candidate ordered by `(distance², index)` so ties resolve deterministically
/// toward the lower index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub(crate) fn build(points: &'a [f64], dim: usize) -> Self {
        let count = points.len() / dim;
        let mut tree = KdTree {
            points,
            dim,
            order: (0..count as u32).collect(),
            nodes: Vec::new(),
        };
        if count > 0 {
            tree.build_node(0, count);
        }
        tree
    }

    fn coord(&self, i: u32, d: usize) -> f64 {
        self.points[i as usize * self.dim + d]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for d in 0..self.dim {
            let (lo, hi) = self.order[start..end]
                .iter()
                .map(|&i| self.coord(i, d))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            // All points coincide; splitting cannot separate them.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (points, dim) = (self.points, self.dim);
        let key = |i: &u32| points[*i as usize * dim + best_dim];
        self.order[start..end].select_nth_unstable_by(mid - start, |a, b| key(a).total_cmp(&key(b)));
        let value = key(&self.order[mid]);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query` as `(index, distance²)` in ascending
    /// order, skipping `exclude`.
    pub(crate) fn knn(&self, query: &[f64], k: usize, exclude: Option<u32>) -> Vec<(u32, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if !self.nodes.is_empty() && k > 0 {
            let mut offsets = vec![0.0; self.dim];
            self.search(0, query, k, exclude, &mut heap, &mut offsets, 0.0);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| (c.index, c.dist2)).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        exclude: Option<u32>,
        heap: &mut BinaryHeap<Candidate>,
        offsets: &mut [f64],
        box_dist2: f64,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let p = &self.points[i as usize * self.dim..(i as usize + 1) * self.dim];
                    let dist2: f64 = p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    let cand = Candidate { dist2, index: i };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap, offsets, box_dist2);
                let old = offsets[dim];
                let far_dist2 = box_dist2 - old * old + diff * diff;
                // Equal distances may still hold lower-index ties, so only
                // prune strictly farther cells.
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().expect("heap is full").dist2
                };
                if far_dist2 <= worst {
                    offsets[dim] = diff;
                    self.search(far, query, k, exclude, heap, offsets, far_dist2);
                    offsets[dim] = old;
                }
            }
        }
    }
}
