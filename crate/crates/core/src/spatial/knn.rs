//! Exact k-nearest-neighbor search over a static point set.
//!
//! The tree is a median-split k-d tree with leaf buckets. Neighbors are
//! ordered by `(squared distance, index)`, so equal distances resolve to the
//! lower point index and results match a brute-force scan exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{squared_distance, PointCloud};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist2.sqrt()
    }
}

// Heap entry ordered lexicographically by (dist2, index). Distances are
// never NaN since coordinates are finite.
#[derive(Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug)]
pub struct KnnIndex<'a> {
    points: &'a [[f32; 3]],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

pub fn build_knn(cloud: &PointCloud) -> KnnIndex<'_> {
    KnnIndex::new(cloud.positions())
}

impl<'a> KnnIndex<'a> {
    pub fn new(points: &'a [[f32; 3]]) -> Self {
        let mut index = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }

        let slice = &mut self.order[start..end];
        let axis = widest_axis(self.points, slice);
        let mid = slice.len() / 2;
        let points = self.points;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = points[slice[mid]][axis] as f64;

        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to point `i`, excluding `i` itself.
    pub fn neighbors_of(&self, i: usize, k: usize) -> Vec<Neighbor> {
        self.search(&self.points[i], k, Some(i))
    }

    /// The `k` nearest points to an arbitrary query position.
    pub fn nearest(&self, query: &[f32; 3], k: usize) -> Vec<Neighbor> {
        self.search(query, k, None)
    }

    fn search(&self, query: &[f32; 3], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.visit(0, query, k, exclude, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|Candidate(dist2, index)| Neighbor { index, dist2 })
            .collect()
    }

    fn visit(
        &self,
        node: usize,
        query: &[f32; 3],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    if Some(idx) == exclude {
                        continue;
                    }
                    let c = Candidate(squared_distance(query, &self.points[idx]), idx);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[axis] as f64 - value;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.visit(near, query, k, exclude, heap);
                // Ties must still be explored: a far-side point at exactly the
                // current worst distance may carry a lower index.
                if heap.len() < k || delta * delta <= heap.peek().unwrap().0 {
                    self.visit(far, query, k, exclude, heap);
                }
            }
        }
    }
}

fn widest_axis(points: &[[f32; 3]], idx: &[usize]) -> usize {
    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    for &i in idx {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap()
}
