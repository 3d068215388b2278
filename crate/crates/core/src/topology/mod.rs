//! The BIER-TE domain model: nodes and roles, bit-addressed adjacencies,
//! subsets with their ingresses, MPLS subset tunnels, and multicast groups.
//!
//! A [`Topology`] is only obtainable through validation of a
//! [`TopologyDoc`], so every accessor may assume cross-references resolve.

mod doc;
pub mod paths;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use doc::{
    GroupDoc, LinkDoc, LinkKind, NodeDoc, SubsetDoc, TopologyDoc, TreeDoc, TunnelBackupDoc,
    TunnelDoc, UnderlayDoc, DEFAULT_BSL, DEFAULT_SBTAFT_CAP,
};

use crate::bitstring::{BitPosition, BitString};
use crate::packet::Label;

pub const MIN_BSL: u16 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "BFIR")]
    Bfir,
    #[serde(rename = "S-BFIR")]
    SBfir,
    #[serde(rename = "BFR")]
    Bfr,
    #[serde(rename = "BFER")]
    Bfer,
}

/// Which BIER-TE fast-reroute tables the compiler installs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrrMode {
    #[default]
    None,
    Link,
    Node,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdjacencyKind {
    Connected,
    /// Underlay path from `from` to `to`, both endpoints included.
    Routed(Vec<NodeId>),
    LocalDecap,
}

/// One directed, bit-addressed BIER-TE adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub from: NodeId,
    pub to: NodeId,
    pub bit: BitPosition,
    pub kind: AdjacencyKind,
}

impl Adjacency {
    pub fn is_decap(&self) -> bool {
        matches!(self.kind, AdjacencyKind::LocalDecap)
    }

    /// Nodes the adjacency physically touches, endpoints included.
    pub fn footprint_nodes(&self) -> Vec<&NodeId> {
        match &self.kind {
            AdjacencyKind::Routed(path) => path.iter().collect(),
            _ => vec![&self.from, &self.to],
        }
    }

    /// Physical links the adjacency rides on, as normalized pairs.
    pub fn footprint_links(&self) -> Vec<(NodeId, NodeId)> {
        match &self.kind {
            AdjacencyKind::Connected => vec![link_key(&self.from, &self.to)],
            AdjacencyKind::Routed(path) => {
                path.windows(2).map(|w| link_key(&w[0], &w[1])).collect()
            }
            AdjacencyKind::LocalDecap => Vec::new(),
        }
    }
}

/// Normalized (smaller, larger) key for an undirected physical link.
pub fn link_key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subset {
    pub si: u16,
    /// First entry is the primary ingress.
    pub ingresses: Vec<NodeId>,
    /// protected ingress -> backup ingress
    pub protection: BTreeMap<NodeId, NodeId>,
}

impl Subset {
    pub fn primary_ingress(&self) -> &NodeId {
        &self.ingresses[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TunnelBackup {
    pub label: Label,
    /// Starts at the point of local repair, ends at `ingress`.
    pub hops: Vec<NodeId>,
    pub ingress: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tunnel {
    pub from: NodeId,
    pub to: NodeId,
    pub label: Label,
    pub hops: Vec<NodeId>,
    pub backup: Option<TunnelBackup>,
}

impl Tunnel {
    /// The node preceding the tunnel endpoint.
    pub fn penultimate(&self) -> &NodeId {
        &self.hops[self.hops.len() - 2]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    pub ingress: NodeId,
    pub receivers: BTreeSet<NodeId>,
    /// Explicit tree bits per SI; subsets without an entry get a computed tree.
    pub trees: BTreeMap<u16, Vec<u16>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyErrorKind {
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("bsl {0} outside {MIN_BSL}..=256")]
    BadBsl(u16),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("node {0} has no roles")]
    NoRoles(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {node} lacks role {role:?}")]
    MissingRole { node: NodeId, role: Role },
    #[error("self loop at {0}")]
    SelfLoop(NodeId),
    #[error("bit {bit} outside 1..={bsl}")]
    BitOutOfRange { bit: u16, bsl: u16 },
    #[error("bit {bit} assigned twice in SI {si}")]
    DuplicateBit { si: u16, bit: u16 },
    #[error("SI {si} has {count} member bits, more than BSL {bsl}")]
    MemberOverflow { si: u16, count: usize, bsl: u16 },
    #[error("SI {0} used by links but not declared in subsets")]
    UndeclaredSubset(u16),
    #[error("subset {0} declared twice")]
    DuplicateSubset(u16),
    #[error("{0} is not a physical underlay link")]
    NotPhysical(String),
    #[error("bad path: {0}")]
    BadPath(String),
    #[error("BFER {node} has more than one decap bit in SI {si}")]
    DuplicateDecap { node: NodeId, si: u16 },
    #[error("BFER {0} has no decap bit")]
    MissingDecap(NodeId),
    #[error("subset {si} needs at least two ingresses for protection")]
    TooFewIngresses { si: u16 },
    #[error("bad protection pair {0} -> {1}")]
    BadProtection(NodeId, NodeId),
    #[error("label {0} used twice")]
    DuplicateLabel(Label),
    #[error("S-BFIR {node} is transit on {what}")]
    IngressTransit { node: NodeId, what: String },
    #[error("bit {bit} is not a member of SI {si}")]
    NotMember { si: u16, bit: u16 },
    #[error("receiver {0} belongs to no subset")]
    ReceiverWithoutSubset(NodeId),
    #[error("{0}")]
    Other(String),
}

/// A validation failure with the document location it was found at.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {kind}")]
pub struct TopologyError {
    pub location: String,
    pub kind: TopologyErrorKind,
}

fn err<T>(location: impl Into<String>, kind: TopologyErrorKind) -> Result<T, TopologyError> {
    Err(TopologyError {
        location: location.into(),
        kind,
    })
}

/// Validated, immutable BIER-TE domain.
#[derive(Debug, Clone)]
pub struct Topology {
    bsl: u16,
    frr: FrrMode,
    sbtaft_cap: usize,
    nodes: BTreeMap<NodeId, BTreeSet<Role>>,
    underlay: BTreeSet<(NodeId, NodeId)>,
    adjacencies: Vec<Adjacency>,
    subsets: BTreeMap<u16, Subset>,
    tunnels: Vec<Tunnel>,
    groups: Vec<Group>,
    // (node, si) -> indices into adjacencies, ascending bit
    outgoing: BTreeMap<(NodeId, u16), Vec<usize>>,
    doc: TopologyDoc,
}

/// Parses and validates a topology document.
pub fn load_topology(text: &str) -> Result<Topology, TopologyError> {
    let doc = TopologyDoc::parse(text).map_err(|e| TopologyError {
        location: "document".into(),
        kind: TopologyErrorKind::Syntax(e.to_string().trim().to_owned()),
    })?;
    Topology::from_doc(doc)
}

impl Topology {
    pub fn from_doc(doc: TopologyDoc) -> Result<Self, TopologyError> {
        if doc.bsl < MIN_BSL || doc.bsl > 256 {
            return err("bsl", TopologyErrorKind::BadBsl(doc.bsl));
        }
        let bsl = doc.bsl;

        let mut nodes: BTreeMap<NodeId, BTreeSet<Role>> = BTreeMap::new();
        for (i, n) in doc.nodes.iter().enumerate() {
            let loc = format!("nodes[{i}]");
            if n.roles.is_empty() {
                return err(loc, TopologyErrorKind::NoRoles(n.id.clone()));
            }
            if nodes
                .insert(n.id.clone(), n.roles.iter().copied().collect())
                .is_some()
            {
                return err(loc, TopologyErrorKind::DuplicateNode(n.id.clone()));
            }
        }
        let known = |loc: &str, id: &NodeId| -> Result<(), TopologyError> {
            if nodes.contains_key(id) {
                Ok(())
            } else {
                err(loc, TopologyErrorKind::UnknownNode(id.clone()))
            }
        };

        let mut underlay = BTreeSet::new();
        for (i, u) in doc.underlay.iter().enumerate() {
            let loc = format!("underlay[{i}]");
            known(&loc, &u.a)?;
            known(&loc, &u.b)?;
            if u.a == u.b {
                return err(loc, TopologyErrorKind::SelfLoop(u.a.clone()));
            }
            underlay.insert(link_key(&u.a, &u.b));
        }
        // connected adjacencies imply their physical link
        for l in &doc.links {
            if l.kind == LinkKind::Connected {
                if let Some(to) = &l.to {
                    if *to != l.from && nodes.contains_key(to) && nodes.contains_key(&l.from) {
                        underlay.insert(link_key(&l.from, to));
                    }
                }
            }
        }

        let mut subsets = BTreeMap::new();
        for (i, s) in doc.subsets.iter().enumerate() {
            let loc = format!("subsets[{i}]");
            if s.ingresses.is_empty() {
                return err(
                    loc,
                    TopologyErrorKind::Other(format!("subset {} has no ingress", s.si)),
                );
            }
            for ing in &s.ingresses {
                known(&loc, ing)?;
                let roles = &nodes[ing];
                if !roles.contains(&Role::SBfir) && !roles.contains(&Role::Bfir) {
                    return err(
                        loc,
                        TopologyErrorKind::MissingRole {
                            node: ing.clone(),
                            role: Role::SBfir,
                        },
                    );
                }
            }
            for (p, b) in &s.protection {
                if p == b || !s.ingresses.contains(p) || !s.ingresses.contains(b) {
                    return err(loc, TopologyErrorKind::BadProtection(p.clone(), b.clone()));
                }
            }
            if !s.protection.is_empty() && s.ingresses.len() < 2 {
                return err(loc, TopologyErrorKind::TooFewIngresses { si: s.si });
            }
            let subset = Subset {
                si: s.si,
                ingresses: s.ingresses.clone(),
                protection: s.protection.clone(),
            };
            if subsets.insert(s.si, subset).is_some() {
                return err(loc, TopologyErrorKind::DuplicateSubset(s.si));
            }
        }

        let mut adjacencies = Vec::new();
        let mut origin: BTreeMap<(u16, u16), usize> = BTreeMap::new();
        let mut decaps: BTreeSet<(NodeId, u16)> = BTreeSet::new();
        for (i, l) in doc.links.iter().enumerate() {
            let loc = format!("links[{i}]");
            known(&loc, &l.from)?;
            if l.bit == 0 || l.bit > bsl {
                return err(loc, TopologyErrorKind::BitOutOfRange { bit: l.bit, bsl });
            }
            if !subsets.contains_key(&l.si) {
                return err(loc, TopologyErrorKind::UndeclaredSubset(l.si));
            }
            if let Some(prev) = origin.insert((l.si, l.bit), i) {
                let _ = prev;
                return err(
                    loc,
                    TopologyErrorKind::DuplicateBit {
                        si: l.si,
                        bit: l.bit,
                    },
                );
            }
            let bit = BitPosition::new(l.si, l.bit);
            match l.kind {
                LinkKind::Decap => {
                    if let Some(to) = &l.to {
                        if *to != l.from {
                            return err(
                                loc,
                                TopologyErrorKind::Other(
                                    "decap link must not name a distinct `to`".into(),
                                ),
                            );
                        }
                    }
                    if !nodes[&l.from].contains(&Role::Bfer) {
                        return err(
                            loc,
                            TopologyErrorKind::MissingRole {
                                node: l.from.clone(),
                                role: Role::Bfer,
                            },
                        );
                    }
                    if !decaps.insert((l.from.clone(), l.si)) {
                        return err(
                            loc,
                            TopologyErrorKind::DuplicateDecap {
                                node: l.from.clone(),
                                si: l.si,
                            },
                        );
                    }
                    if l.bidirectional || !l.path.is_empty() {
                        return err(
                            loc,
                            TopologyErrorKind::Other(
                                "decap link takes no path or direction".into(),
                            ),
                        );
                    }
                    adjacencies.push(Adjacency {
                        from: l.from.clone(),
                        to: l.from.clone(),
                        bit,
                        kind: AdjacencyKind::LocalDecap,
                    });
                }
                LinkKind::Connected | LinkKind::Routed => {
                    let Some(to) = &l.to else {
                        return err(loc, TopologyErrorKind::Other("missing `to`".into()));
                    };
                    known(&loc, to)?;
                    if *to == l.from {
                        return err(loc, TopologyErrorKind::SelfLoop(to.clone()));
                    }
                    let kind = if l.kind == LinkKind::Routed {
                        check_path(&loc, &l.path, &l.from, to, &underlay)?;
                        AdjacencyKind::Routed(l.path.clone())
                    } else {
                        if !l.path.is_empty() {
                            return err(
                                loc,
                                TopologyErrorKind::Other("connected link takes no path".into()),
                            );
                        }
                        AdjacencyKind::Connected
                    };
                    let reverse_kind = match &kind {
                        AdjacencyKind::Routed(p) => {
                            AdjacencyKind::Routed(p.iter().rev().cloned().collect())
                        }
                        k => k.clone(),
                    };
                    adjacencies.push(Adjacency {
                        from: l.from.clone(),
                        to: to.clone(),
                        bit,
                        kind,
                    });
                    if l.bidirectional {
                        adjacencies.push(Adjacency {
                            from: to.clone(),
                            to: l.from.clone(),
                            bit,
                            kind: reverse_kind,
                        });
                    }
                }
            }
        }
        for si in subsets.keys() {
            let count = origin.keys().filter(|(s, _)| s == si).count();
            if count > bsl as usize {
                return err(
                    format!("subsets[si={si}]"),
                    TopologyErrorKind::MemberOverflow {
                        si: *si,
                        count,
                        bsl,
                    },
                );
            }
        }
        for (id, roles) in &nodes {
            if roles.contains(&Role::Bfer) && !decaps.iter().any(|(n, _)| n == id) {
                return err(
                    format!("nodes[{id}]"),
                    TopologyErrorKind::MissingDecap(id.clone()),
                );
            }
        }

        let mut labels = BTreeSet::new();
        let mut tunnels = Vec::new();
        for (i, t) in doc.tunnels.iter().enumerate() {
            let loc = format!("tunnels[{i}]");
            known(&loc, &t.from)?;
            known(&loc, &t.to)?;
            if !nodes[&t.from].contains(&Role::Bfir) {
                return err(
                    loc,
                    TopologyErrorKind::MissingRole {
                        node: t.from.clone(),
                        role: Role::Bfir,
                    },
                );
            }
            if !subsets.values().any(|s| s.ingresses.contains(&t.to)) {
                return err(
                    loc,
                    TopologyErrorKind::Other(format!(
                        "tunnel endpoint {} is no subset ingress",
                        t.to
                    )),
                );
            }
            if t.hops.len() < 2 {
                return err(
                    loc,
                    TopologyErrorKind::BadPath("tunnel needs at least two hops".into()),
                );
            }
            check_path(&loc, &t.hops, &t.from, &t.to, &underlay)?;
            if !labels.insert(t.label) {
                return err(loc, TopologyErrorKind::DuplicateLabel(t.label));
            }
            let backup = match &t.backup {
                None => None,
                Some(b) => {
                    let bloc = format!("{loc}.backup");
                    known(&bloc, &b.ingress)?;
                    let plr = &t.hops[t.hops.len() - 2];
                    check_path(&bloc, &b.hops, plr, &b.ingress, &underlay)?;
                    if b.hops.contains(&t.to) {
                        return err(
                            bloc,
                            TopologyErrorKind::BadPath(format!(
                                "backup path visits protected ingress {}",
                                t.to
                            )),
                        );
                    }
                    let protects = subsets
                        .values()
                        .any(|s| s.protection.get(&t.to) == Some(&b.ingress));
                    if !protects {
                        return err(
                            bloc,
                            TopologyErrorKind::BadProtection(t.to.clone(), b.ingress.clone()),
                        );
                    }
                    if !labels.insert(b.label) {
                        return err(bloc, TopologyErrorKind::DuplicateLabel(b.label));
                    }
                    Some(TunnelBackup {
                        label: b.label,
                        hops: b.hops.clone(),
                        ingress: b.ingress.clone(),
                    })
                }
            };
            tunnels.push(Tunnel {
                from: t.from.clone(),
                to: t.to.clone(),
                label: t.label,
                hops: t.hops.clone(),
                backup,
            });
        }

        let mut groups = Vec::new();
        for (i, g) in doc.groups.iter().enumerate() {
            let loc = format!("groups[{i}]");
            known(&loc, &g.ingress)?;
            if !nodes[&g.ingress].contains(&Role::Bfir) {
                return err(
                    loc,
                    TopologyErrorKind::MissingRole {
                        node: g.ingress.clone(),
                        role: Role::Bfir,
                    },
                );
            }
            let mut receivers = BTreeSet::new();
            for r in &g.receivers {
                known(&loc, r)?;
                if !nodes[r].contains(&Role::Bfer) {
                    return err(
                        loc,
                        TopologyErrorKind::MissingRole {
                            node: r.clone(),
                            role: Role::Bfer,
                        },
                    );
                }
                receivers.insert(r.clone());
            }
            let mut trees = BTreeMap::new();
            for tr in &g.trees {
                if !subsets.contains_key(&tr.si) {
                    return err(loc, TopologyErrorKind::UndeclaredSubset(tr.si));
                }
                for b in &tr.bits {
                    if !origin.contains_key(&(tr.si, *b)) {
                        return err(loc, TopologyErrorKind::NotMember { si: tr.si, bit: *b });
                    }
                }
                trees.insert(tr.si, tr.bits.clone());
            }
            groups.push(Group {
                name: g.name.clone(),
                ingress: g.ingress.clone(),
                receivers,
                trees,
            });
        }

        adjacencies.sort_by(|a, b| (a.bit, &a.from).cmp(&(b.bit, &b.from)));
        let mut outgoing: BTreeMap<(NodeId, u16), Vec<usize>> = BTreeMap::new();
        for (i, a) in adjacencies.iter().enumerate() {
            outgoing
                .entry((a.from.clone(), a.bit.si))
                .or_default()
                .push(i);
        }

        let topo = Topology {
            bsl,
            frr: doc.frr,
            sbtaft_cap: doc.sbtaft_cap,
            nodes,
            underlay,
            adjacencies,
            subsets,
            tunnels,
            groups,
            outgoing,
            doc,
        };
        topo.check_non_transit()?;
        Ok(topo)
    }

    /// S-BFIRs only inject into their own subsets: they must not be
    /// intermediate hops of tunnels or routed adjacencies, nor own bits in a
    /// subset they are not an ingress of.
    fn check_non_transit(&self) -> Result<(), TopologyError> {
        for x in self.subset_ingresses() {
            for (i, t) in self.tunnels.iter().enumerate() {
                if t.hops[1..t.hops.len() - 1].contains(x) {
                    return err(
                        format!("tunnels[{i}]"),
                        TopologyErrorKind::IngressTransit {
                            node: x.clone(),
                            what: format!("tunnel {}", t.label),
                        },
                    );
                }
                if let Some(b) = &t.backup {
                    if b.hops[1..b.hops.len() - 1].contains(x) {
                        return err(
                            format!("tunnels[{i}].backup"),
                            TopologyErrorKind::IngressTransit {
                                node: x.clone(),
                                what: format!("tunnel {}", b.label),
                            },
                        );
                    }
                }
            }
            for a in &self.adjacencies {
                let own = self.subsets[&a.bit.si].ingresses.contains(x);
                if let AdjacencyKind::Routed(p) = &a.kind {
                    if !own && p[1..p.len() - 1].contains(x) {
                        return err(
                            format!("links[si={},bit={}]", a.bit.si, a.bit.index),
                            TopologyErrorKind::IngressTransit {
                                node: x.clone(),
                                what: format!("routed adjacency {}", a.bit),
                            },
                        );
                    }
                }
                if !own && a.from == *x && self.is_tunnel_ingress(x) {
                    return err(
                        format!("links[si={},bit={}]", a.bit.si, a.bit.index),
                        TopologyErrorKind::IngressTransit {
                            node: x.clone(),
                            what: format!("foreign subset {}", a.bit.si),
                        },
                    );
                }
            }
        }
        Ok(())
    }

    fn is_tunnel_ingress(&self, x: &NodeId) -> bool {
        self.nodes[x].contains(&Role::SBfir)
    }

    fn subset_ingresses(&self) -> BTreeSet<&NodeId> {
        self.subsets
            .values()
            .flat_map(|s| s.ingresses.iter())
            .filter(|n| self.nodes[*n].contains(&Role::SBfir))
            .collect()
    }

    /// The document this topology was validated from.
    pub fn doc(&self) -> &TopologyDoc {
        &self.doc
    }

    pub fn bsl(&self) -> u16 {
        self.bsl
    }

    pub fn frr_mode(&self) -> FrrMode {
        self.frr
    }

    pub fn sbtaft_cap(&self) -> usize {
        self.sbtaft_cap
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains_node(&self, n: &NodeId) -> bool {
        self.nodes.contains_key(n)
    }

    pub fn roles(&self, n: &NodeId) -> Option<&BTreeSet<Role>> {
        self.nodes.get(n)
    }

    pub fn has_role(&self, n: &NodeId, role: Role) -> bool {
        self.nodes.get(n).is_some_and(|r| r.contains(&role))
    }

    pub fn adjacencies(&self) -> &[Adjacency] {
        &self.adjacencies
    }

    pub fn subsets(&self) -> impl Iterator<Item = &Subset> {
        self.subsets.values()
    }

    pub fn subset(&self, si: u16) -> Option<&Subset> {
        self.subsets.get(&si)
    }

    pub fn tunnels(&self) -> &[Tunnel] {
        &self.tunnels
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Physical links as normalized pairs.
    pub fn underlay(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.underlay
    }

    pub fn is_physical_link(&self, a: &NodeId, b: &NodeId) -> bool {
        self.underlay.contains(&link_key(a, b))
    }

    /// Physical neighbours in ascending id order.
    pub fn underlay_neighbors(&self, n: &NodeId) -> Vec<&NodeId> {
        self.underlay
            .iter()
            .filter_map(|(a, b)| {
                if a == n {
                    Some(b)
                } else if b == n {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Adjacencies owned by `node` in `si`, ascending bit.
    pub fn adjacencies_from<'a>(
        &'a self,
        node: &NodeId,
        si: u16,
    ) -> impl Iterator<Item = &'a Adjacency> + 'a {
        self.outgoing
            .get(&(node.clone(), si))
            .into_iter()
            .flatten()
            .map(move |i| &self.adjacencies[*i])
    }

    /// All bits the node owns in `si`: its outgoing adjacencies plus its decap
    /// bit. Unknown SIs yield an empty bitstring.
    pub fn adjacent_bits(&self, node: &NodeId, si: u16) -> BitString {
        let mut bs = self.empty_bs();
        for a in self.adjacencies_from(node, si) {
            bs.set(a.bit.index as usize).expect("validated bit");
        }
        bs
    }

    pub fn empty_bs(&self) -> BitString {
        BitString::new(self.bsl as usize).expect("validated bsl")
    }

    pub fn bs_of(&self, bits: impl IntoIterator<Item = u16>) -> BitString {
        let mut bs = self.empty_bs();
        for b in bits {
            bs.set(b as usize).expect("bit within bsl");
        }
        bs
    }

    /// OR of every bit assigned in `si`.
    pub fn member_bits(&self, si: u16) -> BitString {
        self.bs_of(
            self.adjacencies
                .iter()
                .filter(|a| a.bit.si == si)
                .map(|a| a.bit.index),
        )
    }

    pub fn decap_bit(&self, bfer: &NodeId, si: u16) -> Option<u16> {
        self.adjacencies_from(bfer, si)
            .find(|a| a.is_decap())
            .map(|a| a.bit.index)
    }

    /// SIs in which the BFER has a decap bit, ascending.
    pub fn subsets_of_bfer(&self, bfer: &NodeId) -> Vec<u16> {
        self.subsets
            .keys()
            .copied()
            .filter(|si| self.decap_bit(bfer, *si).is_some())
            .collect()
    }

    /// Adjacencies (any owner) carrying the given bit; two for a shared
    /// bidirectional link bit.
    pub fn adjacencies_with_bit(&self, pos: BitPosition) -> impl Iterator<Item = &Adjacency> {
        self.adjacencies.iter().filter(move |a| a.bit == pos)
    }

    /// Nodes touched by non-decap adjacencies of `si`, plus its ingresses.
    pub fn subset_nodes(&self, si: u16) -> BTreeSet<NodeId> {
        let mut out: BTreeSet<NodeId> = self
            .adjacencies
            .iter()
            .filter(|a| a.bit.si == si)
            .flat_map(|a| [a.from.clone(), a.to.clone()])
            .collect();
        if let Some(s) = self.subsets.get(&si) {
            out.extend(s.ingresses.iter().cloned());
        }
        out
    }

    /// Tunnel from `bfir` to `ingress`, if declared.
    pub fn tunnel(&self, bfir: &NodeId, ingress: &NodeId) -> Option<&Tunnel> {
        self.tunnels
            .iter()
            .find(|t| t.from == *bfir && t.to == *ingress)
    }
}

fn check_path(
    loc: &str,
    path: &[NodeId],
    from: &NodeId,
    to: &NodeId,
    underlay: &BTreeSet<(NodeId, NodeId)>,
) -> Result<(), TopologyError> {
    if path.len() < 2 || path.first() != Some(from) || path.last() != Some(to) {
        return err(
            loc,
            TopologyErrorKind::BadPath(format!("path must run from {from} to {to}")),
        );
    }
    let distinct: BTreeSet<&NodeId> = path.iter().collect();
    if distinct.len() != path.len() {
        return err(
            loc,
            TopologyErrorKind::BadPath("path revisits a node".into()),
        );
    }
    for w in path.windows(2) {
        if !underlay.contains(&link_key(&w[0], &w[1])) {
            return err(
                loc,
                TopologyErrorKind::NotPhysical(format!("{}-{}", w[0], w[1])),
            );
        }
    }
    Ok(())
}
