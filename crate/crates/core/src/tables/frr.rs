//! BTAFT and S-BTAFT compilation.
//!
//! Backup paths are shortest by hop count inside the subset (virtual links
//! included), ties broken by the smallest bit sequence. Because every path
//! from one point of local repair uses the same tie-break, the paths towards
//! several next-next hops share prefixes and their union is a tree.

use super::{BtaftEntry, ProtectionMode, SBtaftEntry, TableError};
use crate::topology::paths::{self, Avoid};
use crate::topology::{NodeId, Topology};

/// BTAFT entries for every connected or routed adjacency owned by `node`.
///
/// Link mode yields one entry per adjacency with a detour to the same next
/// hop. Node mode yields one entry per (adjacency, next-next hop) with a
/// detour around the neighbour; a neighbour without onward adjacencies falls
/// back to a link-mode entry.
pub fn build_btaft(
    t: &Topology,
    node: &NodeId,
    mode: ProtectionMode,
) -> Result<Vec<BtaftEntry>, TableError> {
    let mut out = Vec::new();
    for s in t.subsets() {
        let si = s.si;
        for adj in t.adjacencies_from(node, si).filter(|a| !a.is_decap()) {
            let bit = adj.bit.index;
            let mut avoid_links = Avoid::default();
            avoid_links.links.extend(adj.footprint_links());
            let failed = &adj.to;

            let nnhs: Vec<_> = match mode {
                ProtectionMode::Link => Vec::new(),
                ProtectionMode::Node => t
                    .adjacencies_from(failed, si)
                    .filter(|a| !a.is_decap() && a.to != *node)
                    .collect(),
            };

            if nnhs.is_empty() {
                let path =
                    paths::shortest_path(t, si, node, failed, &avoid_links).ok_or_else(|| {
                        TableError::Unprotectable {
                            node: node.clone(),
                            si,
                            bit,
                            nnh: None,
                        }
                    })?;
                out.push(BtaftEntry {
                    si,
                    protected_bit: bit,
                    nnh_bit: None,
                    reset: t.bs_of([bit]),
                    add: t.bs_of(paths::path_bits(&path)),
                });
                continue;
            }

            let mut avoid = avoid_links.clone();
            avoid.nodes.insert(failed.clone());
            for nnh in nnhs {
                let path = paths::shortest_path(t, si, node, &nnh.to, &avoid).ok_or_else(|| {
                    TableError::Unprotectable {
                        node: node.clone(),
                        si,
                        bit,
                        nnh: Some(nnh.bit.index),
                    }
                })?;
                out.push(BtaftEntry {
                    si,
                    protected_bit: bit,
                    nnh_bit: Some(nnh.bit.index),
                    reset: t.bs_of([bit, nnh.bit.index]),
                    add: t.bs_of(paths::path_bits(&path)),
                });
            }
        }
    }
    Ok(out)
}

/// Per-bit node-protection entries of `protected` as seen from `backup`: for
/// every adjacency bit of the protected ingress, reset that bit and add the
/// detour from the backup ingress to its next hop, avoiding the protected
/// ingress. Each entry's combination is the single bit it covers.
pub fn sbtaft_singletons(
    t: &Topology,
    backup: &NodeId,
    protected: &NodeId,
) -> Result<Vec<SBtaftEntry>, TableError> {
    let mut out = Vec::new();
    for s in t
        .subsets()
        .filter(|s| s.protection.get(protected) == Some(backup))
    {
        let si = s.si;
        for adj in t.adjacencies_from(protected, si).filter(|a| !a.is_decap()) {
            let path = paths::shortest_path(t, si, backup, &adj.to, &Avoid::node(protected))
                .ok_or_else(|| TableError::Unprotectable {
                    node: backup.clone(),
                    si,
                    bit: adj.bit.index,
                    nnh: Some(adj.bit.index),
                })?;
            out.push(SBtaftEntry {
                si,
                protected_ingress: protected.clone(),
                nnh_combination: t.bs_of([adj.bit.index]),
                reset: t.bs_of([adj.bit.index]),
                add: t.bs_of(paths::path_bits(&path)),
            });
        }
    }
    Ok(out)
}

/// S-BTAFT at `backup` for `protected`: one entry per non-empty combination
/// of the protected ingress's adjacency bits, masks OR-aggregated from the
/// singletons.
pub fn build_sbtaft(
    t: &Topology,
    backup: &NodeId,
    protected: &NodeId,
    cap: usize,
) -> Result<Vec<SBtaftEntry>, TableError> {
    let singles = sbtaft_singletons(t, backup, protected)?;
    let mut out = Vec::new();
    let mut sis: Vec<u16> = singles.iter().map(|e| e.si).collect();
    sis.dedup();
    for si in sis {
        let group: Vec<&SBtaftEntry> = singles.iter().filter(|e| e.si == si).collect();
        let k = group.len();
        if k > cap || k >= 31 {
            return Err(TableError::CombinationCap {
                ingress: protected.clone(),
                k,
                cap,
            });
        }
        for mask in 1u32..(1u32 << k) {
            let mut comb = t.empty_bs();
            let mut reset = t.empty_bs();
            let mut add = t.empty_bs();
            for (i, e) in group.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    comb = comb | e.nnh_combination;
                    reset = reset | e.reset;
                    add = add | e.add;
                }
            }
            out.push(SBtaftEntry {
                si,
                protected_ingress: protected.clone(),
                nnh_combination: comb,
                reset,
                add,
            });
        }
    }
    out.sort_by_key(|e| (e.si, e.nnh_combination));
    Ok(out)
}
