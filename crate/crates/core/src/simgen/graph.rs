use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Hub,
    SmallWorld,
}

/// Undirected simple graph on `p` nodes. Node indices are zero-based and every
/// edge is stored once as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStructure {
    pub p: usize,
    pub edges: BTreeSet<(usize, usize)>,
    pub kind: GraphKind,
}

impl GraphStructure {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&ordered(a, b))
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Hub graph: nodes split into `n_groups` consecutive blocks, the first node of
/// each block connected to every other member. Remainder nodes join the last
/// block.
pub fn generate_hub_graph(p: usize, n_groups: usize) -> Result<GraphStructure> {
    if n_groups == 0 || n_groups > p {
        return Err(invalid!("hub graph needs 1 <= n_groups <= p (got {n_groups}, p = {p})"));
    }
    let size = p / n_groups;
    let mut edges = BTreeSet::new();
    for g in 0..n_groups {
        let start = g * size;
        let end = if g + 1 == n_groups { p } else { start + size };
        for node in (start + 1)..end {
            edges.insert((start, node));
        }
    }
    Ok(GraphStructure {
        p,
        edges,
        kind: GraphKind::Hub,
    })
}

/// Watts-Strogatz small-world graph. Starts from a ring lattice where every node
/// is joined to its `neighbors` nearest neighbours (`neighbors / 2` per side),
/// then rewires the far endpoint of each lattice edge with probability
/// `rewire_prob` to a uniformly chosen node that is neither the source nor
/// already adjacent to it. The edge count stays at `p * neighbors / 2`.
pub fn generate_small_world<R: Rng + ?Sized>(
    p: usize,
    neighbors: usize,
    rewire_prob: f64,
    rng: &mut R,
) -> Result<GraphStructure> {
    if neighbors >= p {
        return Err(invalid!("small-world needs neighbors < p (got {neighbors}, p = {p})"));
    }
    if neighbors % 2 != 0 {
        return Err(invalid!("small-world neighbors must be even (got {neighbors})"));
    }
    if !(0.0..=1.0).contains(&rewire_prob) {
        return Err(invalid!("rewire probability {rewire_prob} outside [0, 1]"));
    }
    let half = neighbors / 2;
    let mut adjacency = vec![BTreeSet::new(); p];
    for i in 0..p {
        for k in 1..=half {
            let j = (i + k) % p;
            adjacency[i].insert(j);
            adjacency[j].insert(i);
        }
    }
    for k in 1..=half {
        for i in 0..p {
            let j = (i + k) % p;
            if !adjacency[i].contains(&j) {
                // already rewired away from the lattice by an earlier step
                continue;
            }
            if rng.random::<f64>() >= rewire_prob {
                continue;
            }
            let candidates: Vec<usize> = (0..p)
                .filter(|&t| t != i && !adjacency[i].contains(&t))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let t = candidates[rng.random_range(0..candidates.len())];
            adjacency[i].remove(&j);
            adjacency[j].remove(&i);
            adjacency[i].insert(t);
            adjacency[t].insert(i);
        }
    }
    let edges = adjacency
        .iter()
        .enumerate()
        .flat_map(|(i, nbrs)| nbrs.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
        .collect();
    Ok(GraphStructure {
        p,
        edges,
        kind: GraphKind::SmallWorld,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{key, stream, Purpose};

    #[test]
    fn hub_full_size() {
        let g = generate_hub_graph(100, 5).unwrap();
        assert_eq!(g.n_edges(), 95);
        for b in 0..5 {
            let hub = b * 20;
            assert!((hub + 1..hub + 20).all(|n| g.has_edge(hub, n)));
        }
        // no edges across blocks
        assert!(g.edges.iter().all(|&(i, j)| i / 20 == j / 20));
    }

    #[test]
    fn hub_smallest_and_pairs() {
        let g = generate_hub_graph(2, 1).unwrap();
        assert_eq!(g.edges.iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(generate_hub_graph(10, 5).unwrap().n_edges(), 5);
    }

    #[test]
    fn hub_remainder_goes_to_last_block() {
        let g = generate_hub_graph(11, 5).unwrap();
        // blocks of 2, last block holds 3 nodes
        assert_eq!(g.n_edges(), 4 + 2);
        assert!(g.has_edge(8, 10));
    }

    #[test]
    fn hub_rejects_too_many_groups() {
        assert!(generate_hub_graph(3, 4).is_err());
        assert!(generate_hub_graph(3, 0).is_err());
    }

    #[test]
    fn small_world_edge_counts() {
        let mut rng = stream(3, key(Purpose::Graph, 0, 0, 0));
        assert_eq!(generate_small_world(100, 10, 0.05, &mut rng).unwrap().n_edges(), 500);
        assert_eq!(generate_small_world(20, 4, 1.0, &mut rng).unwrap().n_edges(), 40);
    }

    #[test]
    fn small_world_without_rewiring_is_a_ring() {
        let mut rng = stream(3, key(Purpose::Graph, 0, 0, 0));
        let g = generate_small_world(10, 2, 0.0, &mut rng).unwrap();
        let expected: BTreeSet<_> = (0..10).map(|i| ordered(i, (i + 1) % 10)).collect();
        assert_eq!(g.edges, expected);
    }

    #[test]
    fn small_world_invalid() {
        let mut rng = stream(3, key(Purpose::Graph, 0, 0, 0));
        assert!(generate_small_world(10, 10, 0.1, &mut rng).is_err());
        assert!(generate_small_world(10, 3, 0.1, &mut rng).is_err());
        assert!(generate_small_world(10, 4, 1.5, &mut rng).is_err());
    }
}
