//! Path search over the bit-addressed adjacencies of one subset.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Adjacency, NodeId, Topology};

/// Elements a path must not use.
#[derive(Debug, Clone, Default)]
pub struct Avoid {
    pub nodes: BTreeSet<NodeId>,
    /// Normalized physical links.
    pub links: BTreeSet<(NodeId, NodeId)>,
}

impl Avoid {
    pub fn node(n: &NodeId) -> Self {
        Avoid {
            nodes: [n.clone()].into(),
            ..Default::default()
        }
    }

    pub fn link(a: &NodeId, b: &NodeId) -> Self {
        Avoid {
            links: [super::link_key(a, b)].into(),
            ..Default::default()
        }
    }

    fn permits(&self, adj: &Adjacency) -> bool {
        !adj.footprint_nodes()
            .iter()
            .any(|n| self.nodes.contains(*n))
            && !adj.footprint_links().iter().any(|l| self.links.contains(l))
    }
}

/// Shortest path by adjacency count from `src` to `dst` inside `si`, using
/// connected and routed adjacencies that `avoid` permits. Among equally short
/// paths the one with the lexicographically smallest bit sequence wins.
///
/// Returns the adjacencies in order; `Some(vec![])` when `src == dst`.
pub fn shortest_path<'a>(
    t: &'a Topology,
    si: u16,
    src: &NodeId,
    dst: &NodeId,
    avoid: &Avoid,
) -> Option<Vec<&'a Adjacency>> {
    if src == dst {
        return Some(Vec::new());
    }
    let usable: Vec<&Adjacency> = t
        .adjacencies()
        .iter()
        .filter(|a| a.bit.si == si && !a.is_decap() && avoid.permits(a))
        .collect();
    // distance to dst, by reverse BFS
    let mut incoming: BTreeMap<&NodeId, Vec<&Adjacency>> = BTreeMap::new();
    for a in &usable {
        incoming.entry(&a.to).or_default().push(a);
    }
    let mut dist: BTreeMap<&NodeId, usize> = BTreeMap::new();
    dist.insert(dst, 0);
    let mut queue = VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        for a in incoming.get(v).into_iter().flatten() {
            if !dist.contains_key(&a.from) {
                dist.insert(&a.from, d + 1);
                queue.push_back(&a.from);
            }
        }
    }
    dist.get(src)?;
    let mut path = Vec::new();
    let mut cur = src;
    while cur != dst {
        let d = dist[cur];
        let next = usable
            .iter()
            .filter(|a| a.from == *cur && dist.get(&a.to) == Some(&(d - 1)))
            .min_by_key(|a| a.bit.index)?;
        path.push(*next);
        cur = &next.to;
    }
    Some(path)
}

/// Bits of a path's adjacencies.
pub fn path_bits(path: &[&Adjacency]) -> Vec<u16> {
    path.iter().map(|a| a.bit.index).collect()
}
