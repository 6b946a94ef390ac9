//! Undirected dependency graphs over `n` nodes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Undirected simple graph on `0..n`. Edges are stored as `(min, max)`
/// so iteration order is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DependencyGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DependencyGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Adds `{i, j}`. Self-loops are ignored. Returns whether the edge was new.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        assert!(
            i < self.n && j < self.n,
            "edge ({i}, {j}) outside 0..{}",
            self.n
        );
        if i == j {
            return false;
        }
        self.edges.insert((i.min(j), i.max(j)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }

    /// Keeps only edges with both endpoints in `nodes`.
    pub fn restrict(&self, nodes: &BTreeSet<usize>) -> Self {
        Self {
            n: self.n,
            edges: self
                .edges
                .iter()
                .filter(|(a, b)| nodes.contains(a) && nodes.contains(b))
                .copied()
                .collect(),
        }
    }

    /// Edges in `self` but not in `other`.
    pub fn difference(&self, other: &Self) -> Vec<(usize, usize)> {
        self.edges.difference(&other.edges).copied().collect()
    }

    pub fn intersection_count(&self, other: &Self) -> usize {
        self.edges.intersection(&other.edges).count()
    }
}

impl fmt::Display for DependencyGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, j) in &self.edges {
            writeln!(f, "{i} {j}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undirected_and_loop_free() {
        let mut g = DependencyGraph::empty(4);
        assert!(g.add_edge(2, 1));
        assert!(!g.add_edge(1, 2));
        assert!(!g.add_edge(3, 3));
        assert_eq!(g.edge_count(), 1);
        assert!(g.contains(1, 2) && g.contains(2, 1));
        assert_eq!(g.degree(1), 1);
    }

    #[test]
    fn restriction_drops_outside_edges() {
        let g = DependencyGraph::from_edges(5, [(0, 1), (1, 2), (3, 4)]);
        let keep: BTreeSet<usize> = [0, 1, 3].into_iter().collect();
        let r = g.restrict(&keep);
        assert_eq!(r.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }
}
