//! Delivery oracle: walks the encoded tree straight off the topology's
//! adjacency list, without compiled tables or the dataplane.

use std::collections::BTreeSet;

use crate::bitstring::BitString;
use crate::topology::{NodeId, Topology};

/// BFERs reached when `bs` is injected at `start` in subset `si`, assuming no
/// failures. Every visited node forwards over each of its adjacencies whose
/// bit is set, after clearing all bits it owns.
pub fn oracle_deliveries(
    t: &Topology,
    si: u16,
    bs: &BitString,
    start: &NodeId,
) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    walk(t, si, start, *bs, &mut out, &mut seen);
    out
}

fn walk(
    t: &Topology,
    si: u16,
    node: &NodeId,
    bs: BitString,
    out: &mut BTreeSet<NodeId>,
    seen: &mut BTreeSet<(NodeId, BitString)>,
) {
    if !seen.insert((node.clone(), bs)) {
        return;
    }
    let owned: Vec<_> = t
        .adjacencies()
        .iter()
        .filter(|a| a.bit.si == si && a.from == *node)
        .collect();
    let mut remaining = bs;
    for a in &owned {
        let _ = remaining.clear(a.bit.index as usize);
    }
    for a in owned {
        if !bs.test(a.bit.index as usize).unwrap_or(false) {
            continue;
        }
        if a.is_decap() {
            out.insert(node.clone());
        } else {
            walk(t, si, &a.to, remaining, out, seen);
        }
    }
}
