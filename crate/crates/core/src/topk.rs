//! Bounded selection of the highest-scoring node pairs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::graph::Edge;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    score: f64,
    edge: Edge,
}

impl Eq for Scored {}

impl Ord for Scored {
    // Higher score ranks first; ties favour the smaller pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.edge.cmp(&self.edge))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the `k` best pairs seen so far in a min-heap.
#[derive(Debug, Clone)]
pub(crate) struct TopPairs {
    k: usize,
    heap: BinaryHeap<Reverse<Scored>>,
}

impl TopPairs {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 20) + 1),
        }
    }

    pub(crate) fn push(&mut self, score: f64, edge: Edge) {
        if self.k == 0 {
            return;
        }
        let item = Scored { score, edge };
        if self.heap.len() < self.k {
            self.heap.push(Reverse(item));
        } else if let Some(min) = self.heap.peek() {
            if item > min.0 {
                self.heap.pop();
                self.heap.push(Reverse(item));
            }
        }
    }

    pub(crate) fn merge(mut self, other: Self) -> Self {
        for Reverse(item) in other.heap {
            self.push(item.score, item.edge);
        }
        self
    }

    /// Selected pairs, best first.
    pub(crate) fn into_sorted(self) -> Vec<(f64, Edge)> {
        let mut items: Vec<Scored> = self.heap.into_iter().map(|r| r.0).collect();
        items.sort_unstable_by(|a, b| b.cmp(a));
        items.into_iter().map(|s| (s.score, s.edge)).collect()
    }
}
