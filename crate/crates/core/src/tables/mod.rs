//! Control-plane compiler: turns a [`Topology`] into per-node forwarding
//! state (BIFT, BTAFT, S-BTAFT, MEPT, IP encapsulation and MPLS label maps).

mod dump;
mod frr;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bitstring::BitString;
use crate::packet::Label;
use crate::topology::paths::{self, Avoid};
use crate::topology::{AdjacencyKind, FrrMode, Group, NodeId, Topology};

pub use dump::dump;
pub use frr::{build_btaft, build_sbtaft, sbtaft_singletons};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardAction {
    Connected(NodeId),
    /// Underlay path, both endpoints included.
    Routed(Vec<NodeId>),
    Decap,
}

impl ForwardAction {
    /// Node the forwarded copy arrives at; `None` for decap.
    pub fn next_node(&self) -> Option<&NodeId> {
        match self {
            ForwardAction::Connected(n) => Some(n),
            ForwardAction::Routed(p) => p.last(),
            ForwardAction::Decap => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiftEntry {
    pub si: u16,
    pub key_bit: u16,
    pub fbm: BitString,
    pub action: ForwardAction,
}

/// BIER-TE FRR rewrite for one failed adjacency (and, for node protection,
/// one next-next hop of the failed neighbour).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BtaftEntry {
    pub si: u16,
    pub protected_bit: u16,
    pub nnh_bit: Option<u16>,
    pub reset: BitString,
    pub add: BitString,
}

/// Precomputed node protection of a failed subset ingress, applied at its
/// backup ingress for one combination of active next-hop bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SBtaftEntry {
    pub si: u16,
    pub protected_ingress: NodeId,
    pub nnh_combination: BitString,
    pub reset: BitString,
    pub add: BitString,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeptEntry {
    pub node: NodeId,
    pub primary_label: Label,
    pub primary_next: NodeId,
    pub backup_label: Label,
    pub backup_next: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpTarget {
    pub si: u16,
    pub bs_template: BitString,
    /// Subset ingress the copy enters at.
    pub ingress: NodeId,
    /// `None` when the BFIR is itself the subset ingress.
    pub tunnel_label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpEncapEntry {
    pub group: String,
    pub targets: Vec<IpTarget>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MplsAction {
    Forward(NodeId),
    /// Tunnel endpoint: pop and continue with BIER-TE forwarding.
    PopToBierte,
    /// Egress-protection endpoint at a backup ingress.
    PopToSbtaft {
        protected: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("no backup path protects bit {bit} of {node} in SI {si}{}", nnh.map(|b| format!(" towards next-next hop bit {b}")).unwrap_or_default())]
    Unprotectable {
        node: NodeId,
        si: u16,
        bit: u16,
        nnh: Option<u16>,
    },
    #[error("ingress {ingress} has {k} adjacency bits, more than the S-BTAFT cap {cap}; split the subset")]
    CombinationCap {
        ingress: NodeId,
        k: usize,
        cap: usize,
    },
    #[error("tunnel {label} to protected ingress {ingress} declares no backup")]
    MissingTunnelBackup { ingress: NodeId, label: Label },
    #[error("no tunnel from {bfir} to subset ingress {ingress}")]
    MissingTunnel { bfir: NodeId, ingress: NodeId },
    #[error("group {group}: receiver {receiver} is in no subset")]
    ReceiverWithoutSubset { group: String, receiver: NodeId },
    #[error("group {group}: no path to {receiver} in SI {si}")]
    NoTree {
        group: String,
        si: u16,
        receiver: NodeId,
    },
    #[error(
        "group {group}: explicit tree for SI {si} does not decap exactly the group's receivers"
    )]
    TreeMismatch { group: String, si: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    pub frr: FrrMode,
    pub sbtaft_cap: usize,
}

impl CompileOptions {
    pub fn from_topology(t: &Topology) -> Self {
        CompileOptions {
            frr: t.frr_mode(),
            sbtaft_cap: t.sbtaft_cap(),
        }
    }
}

/// Protection flavour for BTAFT compilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtectionMode {
    Link,
    Node,
}

/// All tables installed at one node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeTables {
    bift: BTreeMap<(u16, u16), BiftEntry>,
    local: BTreeMap<u16, BitString>,
    btaft: BTreeMap<(u16, u16), Vec<BtaftEntry>>,
    sbtaft: BTreeMap<(NodeId, u16, BitString), SBtaftEntry>,
    // (protected ingress, si) -> that ingress's adjacency bits
    sbtaft_scope: BTreeMap<(NodeId, u16), BitString>,
    mept: BTreeMap<Label, MeptEntry>,
    ip: BTreeMap<String, IpEncapEntry>,
    mpls: BTreeMap<Label, MplsAction>,
}

impl NodeTables {
    pub fn bift(&self) -> impl Iterator<Item = &BiftEntry> {
        self.bift.values()
    }

    pub fn bift_entry(&self, si: u16, bit: u16) -> Option<&BiftEntry> {
        self.bift.get(&(si, bit))
    }

    /// Bits this node owns in `si`, i.e. the OR of its BIFT keys.
    pub fn local_bits(&self, si: u16) -> Option<&BitString> {
        self.local.get(&si)
    }

    pub fn btaft(&self) -> impl Iterator<Item = &BtaftEntry> {
        self.btaft.values().flatten()
    }

    pub fn btaft_entries(&self, si: u16, protected_bit: u16) -> &[BtaftEntry] {
        self.btaft
            .get(&(si, protected_bit))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn sbtaft(&self) -> impl Iterator<Item = &SBtaftEntry> {
        self.sbtaft.values()
    }

    pub fn sbtaft_entry(
        &self,
        protected: &NodeId,
        si: u16,
        combination: &BitString,
    ) -> Option<&SBtaftEntry> {
        self.sbtaft.get(&(protected.clone(), si, *combination))
    }

    /// Adjacency bits of a protected ingress this backup ingress covers.
    pub fn sbtaft_scope(&self, protected: &NodeId, si: u16) -> Option<&BitString> {
        self.sbtaft_scope.get(&(protected.clone(), si))
    }

    pub fn mept(&self) -> impl Iterator<Item = &MeptEntry> {
        self.mept.values()
    }

    pub fn mept_entry(&self, label: Label) -> Option<&MeptEntry> {
        self.mept.get(&label)
    }

    pub fn ip(&self) -> impl Iterator<Item = &IpEncapEntry> {
        self.ip.values()
    }

    pub fn ip_entry(&self, group: &str) -> Option<&IpEncapEntry> {
        self.ip.get(group)
    }

    pub fn mpls(&self) -> impl Iterator<Item = (&Label, &MplsAction)> {
        self.mpls.iter()
    }

    pub fn mpls_action(&self, label: Label) -> Option<&MplsAction> {
        self.mpls.get(&label)
    }
}

/// Compiled forwarding state for the whole domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSet {
    bsl: u16,
    frr: FrrMode,
    nodes: BTreeMap<NodeId, NodeTables>,
}

impl TableSet {
    pub fn bsl(&self) -> u16 {
        self.bsl
    }

    pub fn frr_mode(&self) -> FrrMode {
        self.frr
    }

    pub fn node(&self, n: &NodeId) -> Option<&NodeTables> {
        self.nodes.get(n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &NodeTables)> {
        self.nodes.iter()
    }
}

/// BIFT of one node: an entry per owned bit, each carrying the complement of
/// the node's owned bits in that SI as forwarding bitmask.
pub fn build_bift(t: &Topology, node: &NodeId) -> Vec<BiftEntry> {
    let mut out = Vec::new();
    for s in t.subsets() {
        let si = s.si;
        let fbm = t.adjacent_bits(node, si).complement();
        for a in t.adjacencies_from(node, si) {
            let action = match &a.kind {
                AdjacencyKind::Connected => ForwardAction::Connected(a.to.clone()),
                AdjacencyKind::Routed(p) => ForwardAction::Routed(p.clone()),
                AdjacencyKind::LocalDecap => ForwardAction::Decap,
            };
            out.push(BiftEntry {
                si,
                key_bit: a.bit.index,
                fbm,
                action,
            });
        }
    }
    out
}

/// Ingresses protected by some backup, with the SI and backup ingress.
fn protected_ingresses(t: &Topology) -> Vec<(u16, NodeId, NodeId)> {
    t.subsets()
        .flat_map(|s| {
            s.protection
                .iter()
                .map(move |(p, b)| (s.si, p.clone(), b.clone()))
        })
        .collect()
}

/// MEPT entries at the penultimate hop of every tunnel towards a protected
/// subset ingress.
pub fn build_mept(t: &Topology) -> Result<Vec<MeptEntry>, TableError> {
    let protected: Vec<NodeId> = protected_ingresses(t)
        .into_iter()
        .map(|(_, p, _)| p)
        .collect();
    let mut out = Vec::new();
    for tun in t.tunnels() {
        if !protected.contains(&tun.to) {
            continue;
        }
        let Some(b) = &tun.backup else {
            return Err(TableError::MissingTunnelBackup {
                ingress: tun.to.clone(),
                label: tun.label,
            });
        };
        out.push(MeptEntry {
            node: tun.penultimate().clone(),
            primary_label: tun.label,
            primary_next: tun.to.clone(),
            backup_label: b.label,
            backup_next: b.hops[1].clone(),
        });
    }
    Ok(out)
}

/// Hop-by-hop MPLS label actions for every node on a tunnel or backup tunnel.
pub fn build_mpls(t: &Topology) -> BTreeMap<NodeId, BTreeMap<Label, MplsAction>> {
    let mut out: BTreeMap<NodeId, BTreeMap<Label, MplsAction>> = BTreeMap::new();
    for tun in t.tunnels() {
        let last = tun.hops.len() - 1;
        for (i, hop) in tun.hops.iter().enumerate() {
            let action = if i == last {
                MplsAction::PopToBierte
            } else {
                MplsAction::Forward(tun.hops[i + 1].clone())
            };
            out.entry(hop.clone())
                .or_default()
                .insert(tun.label, action);
        }
        if let Some(b) = &tun.backup {
            let last = b.hops.len() - 1;
            for (i, hop) in b.hops.iter().enumerate() {
                let action = if i == last {
                    MplsAction::PopToSbtaft {
                        protected: tun.to.clone(),
                    }
                } else {
                    MplsAction::Forward(b.hops[i + 1].clone())
                };
                out.entry(hop.clone()).or_default().insert(b.label, action);
            }
        }
    }
    out
}

/// IP encapsulation entries, installed at each group's BFIR. Receivers are
/// split by subset (lowest SI wins for receivers in several); each subset
/// gets the explicit tree if configured, else the union of shortest paths
/// from its primary ingress.
pub fn build_ip(t: &Topology, groups: &[Group]) -> Result<Vec<(NodeId, IpEncapEntry)>, TableError> {
    let mut out = Vec::new();
    for g in groups {
        let mut by_si: BTreeMap<u16, Vec<&NodeId>> = BTreeMap::new();
        for r in &g.receivers {
            let sis = t.subsets_of_bfer(r);
            let Some(si) = sis.first() else {
                return Err(TableError::ReceiverWithoutSubset {
                    group: g.name.clone(),
                    receiver: r.clone(),
                });
            };
            by_si.entry(*si).or_default().push(r);
        }
        let mut targets = Vec::new();
        for (si, receivers) in by_si {
            let subset = t.subset(si).expect("decap bits belong to declared subsets");
            let ingress = subset.primary_ingress();
            let decaps = t.bs_of(
                receivers
                    .iter()
                    .map(|r| t.decap_bit(r, si).expect("receiver decap")),
            );
            let bs_template = match g.trees.get(&si) {
                Some(bits) => {
                    let bs = t.bs_of(bits.iter().copied());
                    let all_decaps = t.bs_of(
                        t.adjacencies()
                            .iter()
                            .filter(|a| a.bit.si == si && a.is_decap())
                            .map(|a| a.bit.index),
                    );
                    if bs & all_decaps != decaps {
                        return Err(TableError::TreeMismatch {
                            group: g.name.clone(),
                            si,
                        });
                    }
                    bs
                }
                None => {
                    let mut bs = decaps;
                    for r in &receivers {
                        let path = paths::shortest_path(t, si, ingress, r, &Avoid::default())
                            .ok_or_else(|| TableError::NoTree {
                                group: g.name.clone(),
                                si,
                                receiver: (*r).clone(),
                            })?;
                        bs = bs | t.bs_of(paths::path_bits(&path));
                    }
                    bs
                }
            };
            let tunnel_label = if *ingress == g.ingress {
                None
            } else {
                let tun =
                    t.tunnel(&g.ingress, ingress)
                        .ok_or_else(|| TableError::MissingTunnel {
                            bfir: g.ingress.clone(),
                            ingress: ingress.clone(),
                        })?;
                Some(tun.label)
            };
            targets.push(IpTarget {
                si,
                bs_template,
                ingress: ingress.clone(),
                tunnel_label,
            });
        }
        out.push((
            g.ingress.clone(),
            IpEncapEntry {
                group: g.name.clone(),
                targets,
            },
        ));
    }
    Ok(out)
}

/// Compiles every table for every node.
pub fn compile(t: &Topology, opts: &CompileOptions) -> Result<TableSet, TableError> {
    let mut nodes: BTreeMap<NodeId, NodeTables> = t
        .nodes()
        .map(|n| (n.clone(), NodeTables::default()))
        .collect();

    for (id, tables) in nodes.iter_mut() {
        for e in build_bift(t, id) {
            let local = tables.local.entry(e.si).or_insert_with(|| t.empty_bs());
            local.set(e.key_bit as usize).expect("validated bit");
            tables.bift.insert((e.si, e.key_bit), e);
        }
        let mode = match opts.frr {
            FrrMode::None => None,
            FrrMode::Link => Some(ProtectionMode::Link),
            FrrMode::Node => Some(ProtectionMode::Node),
        };
        if let Some(mode) = mode {
            for e in build_btaft(t, id, mode)? {
                tables
                    .btaft
                    .entry((e.si, e.protected_bit))
                    .or_default()
                    .push(e);
            }
        }
    }

    for (si, protected, backup) in protected_ingresses(t) {
        let entries = build_sbtaft(t, &backup, &protected, opts.sbtaft_cap)?;
        let tables = nodes.get_mut(&backup).expect("validated ingress");
        for e in entries.into_iter().filter(|e| e.si == si) {
            let scope = tables
                .sbtaft_scope
                .entry((e.protected_ingress.clone(), si))
                .or_insert_with(|| t.empty_bs());
            *scope = *scope | e.nnh_combination;
            tables
                .sbtaft
                .insert((e.protected_ingress.clone(), e.si, e.nnh_combination), e);
        }
    }

    for e in build_mept(t)? {
        nodes
            .get_mut(&e.node)
            .expect("tunnel hop exists")
            .mept
            .insert(e.primary_label, e);
    }
    for (node, map) in build_mpls(t) {
        nodes.get_mut(&node).expect("tunnel hop exists").mpls = map;
    }
    for (node, e) in build_ip(t, t.groups())? {
        nodes
            .get_mut(&node)
            .expect("group ingress exists")
            .ip
            .insert(e.group.clone(), e);
    }

    Ok(TableSet {
        bsl: t.bsl(),
        frr: opts.frr,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::load_topology;

    const FORWARDING: &str = include_str!("../../fixtures/forwarding.topo");

    fn n(s: &str) -> NodeId {
        NodeId::from(s)
    }

    #[test]
    fn bift_of_bfr2_matches_forwarding_example() {
        let t = load_topology(FORWARDING).unwrap();
        let bift = build_bift(&t, &n("BFR2"));
        let keys: Vec<String> = bift
            .iter()
            .map(|e| t.bs_of([e.key_bit]).to_binary_string())
            .collect();
        assert_eq!(keys, ["00000010", "00001000", "00100000"]);
        let actions: Vec<&ForwardAction> = bift.iter().map(|e| &e.action).collect();
        assert_eq!(
            actions,
            [
                &ForwardAction::Connected(n("BFR1")),
                &ForwardAction::Connected(n("BFR3")),
                &ForwardAction::Connected(n("BFER2")),
            ]
        );
        for e in &bift {
            assert_eq!(e.fbm.to_binary_string(), "11010101");
        }
    }

    #[test]
    fn bfer_has_single_decap_entry() {
        let t = load_topology(FORWARDING).unwrap();
        let bift = build_bift(&t, &n("BFER2"));
        assert_eq!(bift.len(), 1);
        assert_eq!(t.bs_of([bift[0].key_bit]).to_binary_string(), "10000000");
        assert_eq!(bift[0].action, ForwardAction::Decap);
    }

    #[test]
    fn bift_keys_cover_local_bits() {
        let t = load_topology(FORWARDING).unwrap();
        for node in t.nodes() {
            let bift = build_bift(&t, node);
            let keys = t.bs_of(bift.iter().map(|e| e.key_bit));
            let local = t.adjacent_bits(node, 0);
            assert_eq!(keys, local);
            for e in &bift {
                assert!((e.fbm & local).is_zero());
            }
        }
    }

    #[test]
    fn ip_entry_uses_explicit_tree() {
        let t = load_topology(FORWARDING).unwrap();
        let ip = build_ip(&t, t.groups()).unwrap();
        assert_eq!(ip.len(), 1);
        let (at, e) = &ip[0];
        assert_eq!(at, &n("BFIR"));
        assert_eq!(e.targets.len(), 1);
        assert_eq!(e.targets[0].bs_template.to_binary_string(), "11111011");
        assert_eq!(e.targets[0].tunnel_label, None);
    }

    #[test]
    fn no_mept_without_protection() {
        let t = load_topology(FORWARDING).unwrap();
        assert!(build_mept(&t).unwrap().is_empty());
        assert!(build_mpls(&t).is_empty());
    }
}
