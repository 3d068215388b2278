//! On-disk topology schema (TOML).
//!
//! ```toml
//! bsl = 8
//! frr = "link"          # none | link | node, optional
//! sbtaft_cap = 10       # optional
//!
//! [[nodes]]
//! id = "BFR1"
//! roles = ["BFR"]
//!
//! [[underlay]]          # physical links not already implied by `links`
//! a = "T1"
//! b = "T2"
//!
//! [[links]]
//! from = "BFR1"
//! to = "BFR2"
//! si = 0
//! bit = 2
//! kind = "connected"    # connected | routed | decap
//! bidirectional = true  # also install to -> from under the same bit
//! path = ["A", "X", "B"] # routed only: underlay path from `from` to `to`
//!
//! [[subsets]]
//! si = 0
//! ingresses = ["SA1", "SA2"]
//! protection = { SA1 = "SA2" }
//!
//! [[tunnels]]
//! from = "BFIR"
//! to = "SA1"
//! label = 1001
//! hops = ["BFIR", "T1", "SA1"]
//! backup = { label = 1002, hops = ["T1", "T2", "SA2"], ingress = "SA2" }
//!
//! [[groups]]
//! name = "G"
//! ingress = "BFIR"
//! receivers = ["E1", "E2"]
//! [[groups.trees]]      # optional explicit per-subset tree bits
//! si = 0
//! bits = [1, 2, 7]
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FrrMode, NodeId, Role};
use crate::packet::Label;

pub const DEFAULT_BSL: u16 = 256;
pub const DEFAULT_SBTAFT_CAP: usize = 10;

fn default_bsl() -> u16 {
    DEFAULT_BSL
}

fn default_cap() -> usize {
    DEFAULT_SBTAFT_CAP
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_default_cap(c: &usize) -> bool {
    *c == DEFAULT_SBTAFT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default = "default_bsl")]
    pub bsl: u16,
    #[serde(default)]
    pub frr: FrrMode,
    #[serde(default = "default_cap", skip_serializing_if = "is_default_cap")]
    pub sbtaft_cap: usize,
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub underlay: Vec<UnderlayDoc>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub subsets: Vec<SubsetDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tunnels: Vec<TunnelDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupDoc>,
}

impl Default for TopologyDoc {
    fn default() -> Self {
        TopologyDoc {
            bsl: DEFAULT_BSL,
            frr: FrrMode::None,
            sbtaft_cap: DEFAULT_SBTAFT_CAP,
            nodes: Vec::new(),
            underlay: Vec::new(),
            links: Vec::new(),
            subsets: Vec::new(),
            tunnels: Vec::new(),
            groups: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: NodeId,
    pub roles: Vec<Role>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnderlayDoc {
    pub a: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    #[default]
    Connected,
    Routed,
    Decap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub from: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<NodeId>,
    #[serde(default)]
    pub si: u16,
    /// Bit index; `0` means unassigned and is filled by [`TopologyDoc::autoassign`].
    #[serde(default)]
    pub bit: u16,
    #[serde(default)]
    pub kind: LinkKind,
    #[serde(default, skip_serializing_if = "is_false")]
    pub bidirectional: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetDoc {
    pub si: u16,
    pub ingresses: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub protection: BTreeMap<NodeId, NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunnelBackupDoc {
    pub label: Label,
    pub hops: Vec<NodeId>,
    pub ingress: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunnelDoc {
    pub from: NodeId,
    pub to: NodeId,
    pub label: Label,
    pub hops: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backup: Option<TunnelBackupDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDoc {
    pub si: u16,
    pub bits: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub name: String,
    pub ingress: NodeId,
    pub receivers: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trees: Vec<TreeDoc>,
}

impl TopologyDoc {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("topology document serializes")
    }

    /// Renumbers every link deterministically: within each SI, links are
    /// sorted by `(from, to)` and receive ascending bits starting at 1. A
    /// bidirectional link consumes one bit. Decap entries sort with `to == from`.
    pub fn autoassign(&mut self) {
        let mut by_si: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, l) in self.links.iter().enumerate() {
            by_si.entry(l.si).or_default().push(i);
        }
        for idxs in by_si.values_mut() {
            let key = |l: &LinkDoc| {
                let to = l.to.clone().unwrap_or_else(|| l.from.clone());
                (l.from.clone(), to)
            };
            idxs.sort_by(|a, b| {
                key(&self.links[*a])
                    .cmp(&key(&self.links[*b]))
                    .then(a.cmp(b))
            });
            for (n, i) in idxs.iter().enumerate() {
                self.links[*i].bit = (n + 1) as u16;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autoassign_sorts_by_endpoints() {
        let mut doc = TopologyDoc::default();
        let link = |f: &str, t: &str| LinkDoc {
            from: NodeId::from(f),
            to: Some(NodeId::from(t)),
            si: 0,
            bit: 0,
            kind: LinkKind::Connected,
            bidirectional: false,
            path: vec![],
        };
        doc.links = vec![link("C", "A"), link("A", "C"), link("A", "B")];
        doc.autoassign();
        let bits: Vec<u16> = doc.links.iter().map(|l| l.bit).collect();
        assert_eq!(bits, vec![3, 2, 1]);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = TopologyDoc::parse("bsl = 8\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }
}
