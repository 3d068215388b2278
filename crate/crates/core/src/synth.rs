//! Random single-subset domains and multicast trees for property tests and
//! benchmarks.
//!
//! Every generated domain has one BFIR (`N00`, also the subset ingress) and
//! routers `N01..` that are both BFR and BFER. Each undirected link carries
//! one bidirectional bit. With [`Shape::Ring`] the base graph is a
//! Hamiltonian cycle over a random node order, so the subset is 2-vertex
//! (and 2-edge) connected before chords are added.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::topology::{
    FrrMode, GroupDoc, LinkDoc, LinkKind, NodeDoc, NodeId, Role, SubsetDoc, TopologyDoc, TreeDoc,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Random spanning tree plus chords: connected, possibly with bridges.
    Tree,
    /// Hamiltonian cycle plus chords.
    Ring,
}

/// A generated domain together with the tree of its single group `G`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub doc: TopologyDoc,
    pub ingress: NodeId,
    pub receivers: BTreeSet<NodeId>,
    /// Parent of every tree node except the ingress.
    pub parent: BTreeMap<NodeId, NodeId>,
    /// Bits of the tree's links and of the receivers' decap adjacencies.
    pub tree_bits: Vec<u16>,
}

impl Instance {
    pub fn tree_nodes(&self) -> BTreeSet<NodeId> {
        let mut s: BTreeSet<NodeId> = self.parent.keys().cloned().collect();
        s.insert(self.ingress.clone());
        s
    }

    /// Tree nodes that forward to at least one child and are not receivers.
    pub fn transit_nodes(&self) -> BTreeSet<NodeId> {
        self.parent
            .values()
            .filter(|n| **n != self.ingress && !self.receivers.contains(*n))
            .cloned()
            .collect()
    }

    /// Directed tree links as (parent, child).
    pub fn tree_links(&self) -> Vec<(NodeId, NodeId)> {
        self.parent
            .iter()
            .map(|(c, p)| (p.clone(), c.clone()))
            .collect()
    }
}

pub fn node_name(i: usize) -> NodeId {
    NodeId(format!("N{i:02}"))
}

/// Generates a domain of `nodes` nodes (at least 3) with up to `chords`
/// extra links, and a random tree from the ingress to a random non-empty
/// receiver set.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    nodes: usize,
    chords: usize,
    shape: Shape,
    frr: FrrMode,
) -> Instance {
    assert!(nodes >= 3, "need at least three nodes");
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));

    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    match shape {
        Shape::Ring => {
            for i in 0..nodes {
                edges.insert(norm(order[i], order[(i + 1) % nodes]));
            }
        }
        Shape::Tree => {
            for i in 1..nodes {
                let j = rng.gen_range(0..i);
                edges.insert(norm(order[i], order[j]));
            }
        }
    }
    let max_edges = nodes * (nodes - 1) / 2;
    let target = (edges.len() + chords).min(max_edges);
    while edges.len() < target {
        let a = rng.gen_range(0..nodes);
        let b = rng.gen_range(0..nodes);
        if a != b {
            edges.insert(norm(a, b));
        }
    }

    let mut doc = TopologyDoc {
        bsl: 64,
        frr,
        ..Default::default()
    };
    assert!(
        edges.len() + nodes - 1 <= doc.bsl as usize,
        "domain exceeds the bitstring"
    );
    doc.nodes.push(NodeDoc {
        id: node_name(0),
        roles: vec![Role::Bfir],
    });
    for i in 1..nodes {
        doc.nodes.push(NodeDoc {
            id: node_name(i),
            roles: vec![Role::Bfr, Role::Bfer],
        });
    }
    let mut bit_of: BTreeMap<(usize, usize), u16> = BTreeMap::new();
    for (i, &(a, b)) in edges.iter().enumerate() {
        let bit = i as u16 + 1;
        bit_of.insert((a, b), bit);
        doc.links.push(LinkDoc {
            from: node_name(a),
            to: Some(node_name(b)),
            si: 0,
            bit,
            kind: LinkKind::Connected,
            bidirectional: true,
            path: Vec::new(),
        });
    }
    let decap_base = edges.len() as u16;
    for i in 1..nodes {
        doc.links.push(LinkDoc {
            from: node_name(i),
            to: None,
            si: 0,
            bit: decap_base + i as u16,
            kind: LinkKind::Decap,
            bidirectional: false,
            path: Vec::new(),
        });
    }
    doc.subsets.push(SubsetDoc {
        si: 0,
        ingresses: vec![node_name(0)],
        protection: BTreeMap::new(),
    });

    // random spanning tree grown from the ingress (Prim with random weights)
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut seen = BTreeSet::from([0usize]);
    loop {
        let frontier: Vec<(usize, usize)> = edges
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .filter(|(a, b)| seen.contains(a) && !seen.contains(b))
            .collect();
        let Some(&(p, c)) = frontier.choose(rng) else {
            break;
        };
        parent.insert(c, p);
        seen.insert(c);
    }

    let mut candidates: Vec<usize> = (1..nodes).collect();
    candidates.shuffle(rng);
    let k = rng.gen_range(1..=candidates.len());
    let receivers: BTreeSet<usize> = candidates[..k].iter().copied().collect();

    let mut kept: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &receivers {
        let mut cur = r;
        while let Some(&p) = parent.get(&cur) {
            if kept.insert(cur, p).is_some() {
                break;
            }
            cur = p;
        }
    }
    let mut tree_bits: Vec<u16> = kept.iter().map(|(&c, &p)| bit_of[&norm(c, p)]).collect();
    tree_bits.extend(receivers.iter().map(|&r| decap_base + r as u16));
    tree_bits.sort_unstable();

    let receivers: BTreeSet<NodeId> = receivers.into_iter().map(node_name).collect();
    doc.groups.push(GroupDoc {
        name: "G".into(),
        ingress: node_name(0),
        receivers: receivers.iter().cloned().collect(),
        trees: vec![TreeDoc {
            si: 0,
            bits: tree_bits.clone(),
        }],
    });
    Instance {
        doc,
        ingress: node_name(0),
        receivers,
        parent: kept
            .into_iter()
            .map(|(c, p)| (node_name(c), node_name(p)))
            .collect(),
        tree_bits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instances_load_and_trees_reach_receivers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..200 {
            let shape = if i % 2 == 0 { Shape::Ring } else { Shape::Tree };
            let inst = random_instance(&mut rng, 3 + i % 10, i % 5, shape, FrrMode::None);
            let t = Topology::from_doc(inst.doc.clone()).unwrap();
            for r in &inst.receivers {
                let mut cur = r.clone();
                while cur != inst.ingress {
                    cur = inst.parent[&cur].clone();
                }
            }
            assert_eq!(t.group("G").unwrap().receivers, inst.receivers);
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = random_instance(
            &mut ChaCha8Rng::seed_from_u64(9),
            10,
            4,
            Shape::Ring,
            FrrMode::Link,
        );
        let b = random_instance(
            &mut ChaCha8Rng::seed_from_u64(9),
            10,
            4,
            Shape::Ring,
            FrrMode::Link,
        );
        assert_eq!(a.doc, b.doc);
    }
}
