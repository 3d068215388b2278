use std::collections::BTreeSet;

use crate::topology::{link_key, NodeId};

/// Port and node liveness as seen by the dataplane. A down node makes every
/// port towards it down.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PortState {
    links_down: BTreeSet<(NodeId, NodeId)>,
    nodes_down: BTreeSet<NodeId>,
}

impl PortState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_link(&mut self, a: &NodeId, b: &NodeId, up: bool) {
        let key = link_key(a, b);
        if up {
            self.links_down.remove(&key);
        } else {
            self.links_down.insert(key);
        }
    }

    pub fn set_node(&mut self, n: &NodeId, up: bool) {
        if up {
            self.nodes_down.remove(n);
        } else {
            self.nodes_down.insert(n.clone());
        }
    }

    pub fn is_node_up(&self, n: &NodeId) -> bool {
        !self.nodes_down.contains(n)
    }

    pub fn is_link_up(&self, a: &NodeId, b: &NodeId) -> bool {
        !self.links_down.contains(&link_key(a, b))
    }

    /// Whether `from` can transmit to `to`.
    pub fn port_up(&self, from: &NodeId, to: &NodeId) -> bool {
        self.is_link_up(from, to) && self.is_node_up(to)
    }

    /// Every link and every node after the first on `path` is up.
    pub fn path_up(&self, path: &[NodeId]) -> bool {
        path.windows(2).all(|w| self.port_up(&w[0], &w[1]))
    }

    pub fn any_failure(&self) -> bool {
        !self.links_down.is_empty() || !self.nodes_down.is_empty()
    }
}
