//! Per-node packet processing.
//!
//! A packet entering a node is dispatched on its outermost header: MPLS to
//! the MPLS chain, BIER-TE to the BIER-TE chain, plain IPMC to the IP chain.
//! The BIER-TE chain diverts copies whose egress port is down to the BTAFT.
//! Link protection tunnels the copy BIER-in-BIER to the next hop; node
//! protection rewrites the bitstring towards the next-next hops. A packet
//! arriving on a backup egress-protection label is rewritten by the S-BTAFT
//! before BIER-TE forwarding.
//!
//! Recirculations are counted as the hardware prototype incurs them: one per
//! matched BIFT entry, one per encapsulated subset copy, one per MPLS pop at
//! a primary ingress, one per link-protection reroute and tunnel end, and one
//! per matched next-next-hop BTAFT entry plus one for the node-protection
//! rewrite. The counts never affect forwarding.

mod ports;
pub mod reference;
mod trace;

use thiserror::Error;

pub use ports::PortState;
pub use trace::{Chain, TraceRecord};

use crate::bitstring::BitString;
use crate::packet::{Label, Packet};
use crate::tables::{ForwardAction, MplsAction, NodeTables, TableSet};
use crate::topology::NodeId;

/// How an emitted packet leaves the node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Egress {
    /// BIER-TE connected adjacency.
    Adjacency { si: u16, bit: u16, to: NodeId },
    /// BIER-TE routed adjacency over the underlay path (endpoints included).
    Routed {
        si: u16,
        bit: u16,
        path: Vec<NodeId>,
    },
    /// One MPLS hop of a subset tunnel.
    TunnelHop { label: Label, to: NodeId },
}

impl Egress {
    pub fn target(&self) -> &NodeId {
        match self {
            Egress::Adjacency { to, .. } | Egress::TunnelHop { to, .. } => to,
            Egress::Routed { path, .. } => path.last().expect("non-empty routed path"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub egress: Egress,
    pub packet: Packet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub bfer: NodeId,
    pub group: String,
    pub payload_len: usize,
}

/// Everything one node produced for one incoming packet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HopOutput {
    pub emissions: Vec<Emission>,
    pub deliveries: Vec<Delivery>,
    /// Reasons for packets dropped at this node.
    pub drops: Vec<String>,
    pub recircs: u32,
    pub trace: Vec<TraceRecord>,
}

impl HopOutput {
    fn merge(&mut self, other: HopOutput) {
        self.emissions.extend(other.emissions);
        self.deliveries.extend(other.deliveries);
        self.drops.extend(other.drops);
        self.recircs += other.recircs;
        self.trace.extend(other.trace);
    }

    fn drop(&mut self, rec: TraceRecord) {
        self.drops.push(rec.action.clone());
        self.trace.push(rec);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataplaneError {
    #[error("{node}: no S-BTAFT entry for ingress {protected} combination {combination}")]
    MissingSbtaft {
        node: NodeId,
        protected: NodeId,
        combination: BitString,
    },
}

/// Read-only view of the forwarding state and port liveness used while
/// processing one event.
#[derive(Debug, Clone, Copy)]
pub struct Dataplane<'a> {
    pub tables: &'a TableSet,
    pub ports: &'a PortState,
}

static EMPTY: std::sync::OnceLock<NodeTables> = std::sync::OnceLock::new();

impl<'a> Dataplane<'a> {
    pub fn new(tables: &'a TableSet, ports: &'a PortState) -> Self {
        Dataplane { tables, ports }
    }

    fn node_tables(&self, node: &NodeId) -> &'a NodeTables {
        self.tables
            .node(node)
            .unwrap_or_else(|| EMPTY.get_or_init(NodeTables::default))
    }

    fn zero_bs(&self) -> BitString {
        BitString::new(self.tables.bsl() as usize).expect("validated bsl")
    }

    /// Dispatches on the outermost header. The caller guarantees the node is up.
    pub fn process(&self, node: &NodeId, pkt: Packet) -> HopOutput {
        if pkt.mpls.is_some() {
            self.mpls_chain(node, pkt)
        } else if pkt.frr_tunnel.is_some() {
            self.tunnel_chain(node, pkt)
        } else if pkt.bierte.is_some() {
            self.bierte_chain(node, pkt)
        } else {
            self.ip_chain(node, pkt)
        }
    }

    /// Encapsulates an IPMC packet once per destination subset.
    pub fn ip_chain(&self, node: &NodeId, pkt: Packet) -> HopOutput {
        let mut out = HopOutput::default();
        let Some(entry) = self.node_tables(node).ip_entry(&pkt.ipmc_group) else {
            out.drop(TraceRecord::new(node, Chain::Ip, "no_ip_match").key(pkt.ipmc_group.clone()));
            return out;
        };
        let copies = entry.targets.len() as u32;
        out.recircs += copies;
        for target in &entry.targets {
            let mut copy = pkt.clone().with_bierte(target.si, target.bs_template);
            copy.add_recircs(copies);
            let rec = TraceRecord::new(node, Chain::Ip, format!("encap->{}", target.ingress))
                .key(pkt.ipmc_group.clone())
                .bs(None, Some(target.bs_template));
            match target.tunnel_label {
                None => {
                    out.trace.push(rec);
                    out.merge(self.bierte_chain(node, copy));
                }
                Some(label) => {
                    out.trace.push(rec);
                    out.merge(self.mpls_chain(node, copy.with_label(label)));
                }
            }
        }
        out
    }

    /// Label forwarding, tunnel termination and MPLS egress protection.
    pub fn mpls_chain(&self, node: &NodeId, mut pkt: Packet) -> HopOutput {
        let mut out = HopOutput::default();
        let label = pkt.mpls.expect("mpls chain needs an MPLS header").label;
        let tables = self.node_tables(node);
        let bs = pkt.bs();
        let Some(action) = tables.mpls_action(label) else {
            out.drop(TraceRecord::new(node, Chain::Mpls, "unknown_label").key(label.to_string()));
            return out;
        };
        match action {
            MplsAction::Forward(next) => {
                if self.ports.port_up(node, next) {
                    out.trace.push(
                        TraceRecord::new(node, Chain::Mpls, format!("forward->{next}"))
                            .key(label.to_string()),
                    );
                    out.emissions.push(Emission {
                        egress: Egress::TunnelHop {
                            label,
                            to: next.clone(),
                        },
                        packet: pkt,
                    });
                    return out;
                }
                let Some(mept) = tables.mept_entry(label).filter(|m| m.primary_next == *next)
                else {
                    out.drop(
                        TraceRecord::new(node, Chain::Mpls, "unprotected_tunnel_failure")
                            .key(label.to_string()),
                    );
                    return out;
                };
                if !self.ports.port_up(node, &mept.backup_next) {
                    out.drop(
                        TraceRecord::new(node, Chain::Mept, "backup_tunnel_down")
                            .key(label.to_string()),
                    );
                    return out;
                }
                pkt.mpls = Some(crate::packet::MplsHeader {
                    label: mept.backup_label,
                });
                out.trace.push(
                    TraceRecord::new(node, Chain::Mept, format!("swap->{}", mept.backup_next))
                        .key(format!("{}->{}", label, mept.backup_label)),
                );
                out.emissions.push(Emission {
                    egress: Egress::TunnelHop {
                        label: mept.backup_label,
                        to: mept.backup_next.clone(),
                    },
                    packet: pkt,
                });
            }
            MplsAction::PopToBierte => {
                pkt.mpls = None;
                pkt.add_recircs(1);
                out.recircs += 1;
                out.trace.push(
                    TraceRecord::new(node, Chain::Mpls, "pop")
                        .key(label.to_string())
                        .bs(bs, bs),
                );
                if pkt.bierte.is_none() {
                    out.drop(TraceRecord::new(node, Chain::Mpls, "no_inner_bierte"));
                    return out;
                }
                out.merge(self.bierte_chain(node, pkt));
            }
            MplsAction::PopToSbtaft { protected } => {
                pkt.mpls = None;
                out.trace.push(
                    TraceRecord::new(node, Chain::Mpls, format!("pop_protecting->{protected}"))
                        .key(label.to_string())
                        .bs(bs, bs),
                );
                if pkt.bierte.is_none() {
                    out.drop(TraceRecord::new(node, Chain::Mpls, "no_inner_bierte"));
                    return out;
                }
                match self.sbtaft_apply(node, pkt, protected) {
                    Ok((pkt, rec)) => {
                        out.trace.push(rec);
                        out.merge(self.bierte_chain(node, pkt));
                    }
                    Err(e) => {
                        out.drop(
                            TraceRecord::new(node, Chain::Sbtaft, "inconsistent")
                                .key(e.to_string()),
                        );
                    }
                }
            }
        }
        out
    }

    /// Single-pass BIER-TE forwarding: one copy per locally owned set bit,
    /// each masked with the forwarding bitmask. Bits owned by other nodes
    /// travel unchanged in every copy.
    pub fn bierte_chain(&self, node: &NodeId, pkt: Packet) -> HopOutput {
        self.bierte_chain_depth(node, pkt, 0)
    }

    fn bierte_chain_depth(&self, node: &NodeId, pkt: Packet, depth: usize) -> HopOutput {
        let mut out = HopOutput::default();
        let hdr = pkt.bierte.expect("bierte chain needs a BIER-TE header");
        let tables = self.node_tables(node);
        let local = tables
            .local_bits(hdr.si)
            .copied()
            .unwrap_or_else(|| self.zero_bs());
        let active = hdr.bs & local;
        if active.is_zero() {
            out.trace
                .push(TraceRecord::new(node, Chain::Bierte, "discard").bs(Some(hdr.bs), None));
            return out;
        }
        let matched = active.count_ones() as u32;
        out.recircs += matched;
        for bit in active.iter_ones() {
            let entry = tables
                .bift_entry(hdr.si, bit as u16)
                .expect("local bits mirror BIFT keys");
            let key = entry_key(&hdr.bs, bit);
            let masked = hdr.bs & entry.fbm;
            let mut copy = pkt.clone();
            copy.add_recircs(matched);
            if let Some(h) = copy.bierte.as_mut() {
                h.bs = masked;
            }
            match &entry.action {
                ForwardAction::Decap => {
                    out.trace.push(
                        TraceRecord::new(node, Chain::Bierte, "decap")
                            .key(key)
                            .bs(Some(hdr.bs), None),
                    );
                    out.deliveries.push(Delivery {
                        bfer: node.clone(),
                        group: pkt.ipmc_group.clone(),
                        payload_len: pkt.ipmc_payload_len,
                    });
                }
                ForwardAction::Connected(to) => {
                    if self.ports.port_up(node, to) {
                        out.trace.push(
                            TraceRecord::new(node, Chain::Bierte, format!("connected->{to}"))
                                .key(key)
                                .bs(Some(hdr.bs), Some(masked)),
                        );
                        out.emissions.push(Emission {
                            egress: Egress::Adjacency {
                                si: hdr.si,
                                bit: bit as u16,
                                to: to.clone(),
                            },
                            packet: copy,
                        });
                    } else {
                        out.trace.push(
                            TraceRecord::new(node, Chain::Bierte, format!("port_down->{to}"))
                                .key(key)
                                .bs(Some(hdr.bs), Some(masked)),
                        );
                        out.merge(self.btaft_apply_depth(node, copy, bit as u16, depth));
                    }
                }
                ForwardAction::Routed(path) => {
                    if !self.ports.port_up(node, &path[1]) {
                        out.trace.push(
                            TraceRecord::new(
                                node,
                                Chain::Bierte,
                                format!("port_down->{}", path[1]),
                            )
                            .key(key)
                            .bs(Some(hdr.bs), Some(masked)),
                        );
                        out.merge(self.btaft_apply_depth(node, copy, bit as u16, depth));
                    } else if !self.ports.path_up(path) {
                        out.drop(
                            TraceRecord::new(node, Chain::Bierte, "underlay_path_down")
                                .key(key)
                                .bs(Some(hdr.bs), Some(masked)),
                        );
                    } else {
                        let to = path.last().expect("routed path");
                        out.trace.push(
                            TraceRecord::new(node, Chain::Bierte, format!("routed->{to}"))
                                .key(key)
                                .bs(Some(hdr.bs), Some(masked)),
                        );
                        out.emissions.push(Emission {
                            egress: Egress::Routed {
                                si: hdr.si,
                                bit: bit as u16,
                                path: path.clone(),
                            },
                            packet: copy,
                        });
                    }
                }
            }
        }
        out
    }

    /// Rewrites a copy whose egress adjacency `failed_bit` is down and
    /// re-runs BIER-TE forwarding on it. `pkt` already carries the
    /// forwarding-bitmasked bitstring.
    pub fn btaft_apply(&self, node: &NodeId, pkt: Packet, failed_bit: u16) -> HopOutput {
        self.btaft_apply_depth(node, pkt, failed_bit, 0)
    }

    fn btaft_apply_depth(
        &self,
        node: &NodeId,
        mut pkt: Packet,
        failed_bit: u16,
        depth: usize,
    ) -> HopOutput {
        let mut out = HopOutput::default();
        let hdr = pkt.bierte.expect("btaft needs a BIER-TE header");
        let key = entry_key(&hdr.bs, failed_bit as usize);
        let entries = self.node_tables(node).btaft_entries(hdr.si, failed_bit);
        if entries.is_empty() {
            out.drop(
                TraceRecord::new(node, Chain::Btaft, "unprotected_adjacency")
                    .key(key)
                    .bs(Some(hdr.bs), None),
            );
            return out;
        }
        if depth >= self.tables.bsl() as usize {
            out.drop(
                TraceRecord::new(node, Chain::Btaft, "frr_loop")
                    .key(key)
                    .bs(Some(hdr.bs), None),
            );
            return out;
        }
        if entries[0].nnh_bit.is_none() {
            // link protection: tunnel the unchanged copy to the next hop
            let outer = entries[0].add;
            out.recircs += 1;
            pkt.add_recircs(1);
            pkt.frr_tunnel = Some(outer);
            out.trace.push(
                TraceRecord::new(node, Chain::Btaft, "link_reroute")
                    .key(key)
                    .bs(Some(hdr.bs), Some(outer)),
            );
            out.merge(self.tunnel_chain_depth(node, pkt, depth + 1));
            return out;
        }
        let (action, reset, add, recircs) = {
            let matched: Vec<_> = entries
                .iter()
                .filter(|e| {
                    e.nnh_bit
                        .is_some_and(|b| hdr.bs.test(b as usize).unwrap_or(false))
                })
                .collect();
            if matched.is_empty() {
                out.drop(
                    TraceRecord::new(node, Chain::Btaft, "no_active_nnh")
                        .key(key)
                        .bs(Some(hdr.bs), None),
                );
                return out;
            }
            let mut reset = self.zero_bs();
            let mut add = self.zero_bs();
            for e in &matched {
                reset = reset | e.reset;
                add = add | e.add;
            }
            ("node_reroute", reset, add, matched.len() as u32 + 1)
        };
        let rewritten = hdr.bs.rewrite(&reset, &add).expect("equal widths");
        out.recircs += recircs;
        pkt.add_recircs(recircs);
        if let Some(h) = pkt.bierte.as_mut() {
            h.bs = rewritten;
        }
        out.trace.push(
            TraceRecord::new(node, Chain::Btaft, action)
                .key(key)
                .bs(Some(hdr.bs), Some(rewritten)),
        );
        out.merge(self.bierte_chain_depth(node, pkt, depth + 1));
        out
    }

    /// Forwards a link-protection tunnel on its outer bitstring. Where no
    /// outer bit is local the tunnel ends and the inner packet continues in
    /// the BIER-TE chain.
    pub fn tunnel_chain(&self, node: &NodeId, pkt: Packet) -> HopOutput {
        self.tunnel_chain_depth(node, pkt, 0)
    }

    fn tunnel_chain_depth(&self, node: &NodeId, mut pkt: Packet, depth: usize) -> HopOutput {
        let mut out = HopOutput::default();
        let outer = pkt
            .frr_tunnel
            .expect("tunnel chain needs an outer bitstring");
        let hdr = pkt
            .bierte
            .expect("tunnelled packets carry a BIER-TE header");
        let tables = self.node_tables(node);
        let local = tables
            .local_bits(hdr.si)
            .copied()
            .unwrap_or_else(|| self.zero_bs());
        let active = outer & local;
        if active.is_zero() {
            pkt.frr_tunnel = None;
            pkt.add_recircs(1);
            out.recircs += 1;
            out.trace.push(
                TraceRecord::new(node, Chain::Bierte, "tunnel_end").bs(Some(outer), Some(hdr.bs)),
            );
            out.merge(self.bierte_chain_depth(node, pkt, depth));
            return out;
        }
        let matched = active.count_ones() as u32;
        out.recircs += matched;
        for bit in active.iter_ones() {
            let entry = tables
                .bift_entry(hdr.si, bit as u16)
                .expect("local bits mirror BIFT keys");
            let key = entry_key(&outer, bit);
            let masked = outer & entry.fbm;
            let mut copy = pkt.clone();
            copy.add_recircs(matched);
            copy.frr_tunnel = Some(masked);
            let (to, egress) = match &entry.action {
                ForwardAction::Connected(to) if self.ports.port_up(node, to) => (
                    to.clone(),
                    Egress::Adjacency {
                        si: hdr.si,
                        bit: bit as u16,
                        to: to.clone(),
                    },
                ),
                ForwardAction::Routed(path) if self.ports.path_up(path) => (
                    path.last().expect("routed path").clone(),
                    Egress::Routed {
                        si: hdr.si,
                        bit: bit as u16,
                        path: path.clone(),
                    },
                ),
                _ => {
                    out.drop(
                        TraceRecord::new(node, Chain::Bierte, "backup_path_down")
                            .key(key)
                            .bs(Some(outer), None),
                    );
                    continue;
                }
            };
            out.trace.push(
                TraceRecord::new(node, Chain::Bierte, format!("tunnel->{to}"))
                    .key(key)
                    .bs(Some(outer), Some(masked)),
            );
            out.emissions.push(Emission {
                egress,
                packet: copy,
            });
        }
        out
    }

    /// One-step node protection at a backup ingress: looks up the exact
    /// combination of the protected ingress's bits present in the packet and
    /// applies its masks. No recirculation is incurred.
    pub fn sbtaft_apply(
        &self,
        node: &NodeId,
        mut pkt: Packet,
        protected: &NodeId,
    ) -> Result<(Packet, TraceRecord), DataplaneError> {
        let hdr = pkt.bierte.expect("sbtaft needs a BIER-TE header");
        let tables = self.node_tables(node);
        let scope = tables
            .sbtaft_scope(protected, hdr.si)
            .copied()
            .unwrap_or_else(|| self.zero_bs());
        let combination = hdr.bs & scope;
        if combination.is_zero() {
            let rec = TraceRecord::new(node, Chain::Sbtaft, "identity")
                .key(protected.to_string())
                .bs(Some(hdr.bs), Some(hdr.bs));
            return Ok((pkt, rec));
        }
        let entry = tables
            .sbtaft_entry(protected, hdr.si, &combination)
            .ok_or_else(|| DataplaneError::MissingSbtaft {
                node: node.clone(),
                protected: protected.clone(),
                combination,
            })?;
        let rewritten = hdr
            .bs
            .rewrite(&entry.reset, &entry.add)
            .expect("equal widths");
        if let Some(h) = pkt.bierte.as_mut() {
            h.bs = rewritten;
        }
        let rec = TraceRecord::new(node, Chain::Sbtaft, "rewrite")
            .key(format!("{}:{}", protected, combination.render()))
            .bs(Some(hdr.bs), Some(rewritten));
        Ok((pkt, rec))
    }
}

fn entry_key(bs: &BitString, bit: usize) -> String {
    BitString::from_positions(bs.width() as usize, [bit])
        .expect("bit within width")
        .render()
}

/// Free-function form of [`Dataplane::process`].
pub fn process(node: &NodeId, pkt: Packet, tables: &TableSet, ports: &PortState) -> HopOutput {
    Dataplane::new(tables, ports).process(node, pkt)
}
