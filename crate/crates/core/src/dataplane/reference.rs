//! Step-by-step model of the hardware BIER-TE pipeline: the packet matches
//! the BIFT on its lowest active local bit, the forwarding action runs on
//! the original while a copy with that bit cleared is recirculated, and the
//! loop ends when nothing matches.
//!
//! It exists to cross-check [`Dataplane::bierte_chain`], which computes the
//! same result in a single pass.

use super::{Chain, Dataplane, Delivery, Egress, Emission, HopOutput, TraceRecord};
use crate::packet::Packet;
use crate::tables::ForwardAction;
use crate::topology::NodeId;

pub fn recirculating_bierte(dp: &Dataplane<'_>, node: &NodeId, pkt: Packet) -> HopOutput {
    let mut out = HopOutput::default();
    let tables = dp.node_tables(node);
    let mut current = pkt;
    loop {
        let hdr = current.bierte.expect("BIER-TE header");
        let local = tables
            .local_bits(hdr.si)
            .copied()
            .unwrap_or_else(|| dp.zero_bs());
        let Some(bit) = (hdr.bs & local).first_one() else {
            out.trace
                .push(TraceRecord::new(node, Chain::Bierte, "discard").bs(Some(hdr.bs), None));
            return out;
        };
        let entry = tables.bift_entry(hdr.si, bit as u16).expect("BIFT key");

        // the copy keeps looping with the processed bit removed
        let mut again = current.clone();
        if let Some(h) = again.bierte.as_mut() {
            h.bs = hdr.bs.with_cleared(bit).expect("bit within width");
        }
        again.add_recircs(1);
        out.recircs += 1;

        let mut original = current;
        if let Some(h) = original.bierte.as_mut() {
            h.bs = hdr.bs & entry.fbm;
        }
        match &entry.action {
            ForwardAction::Decap => out.deliveries.push(Delivery {
                bfer: node.clone(),
                group: original.ipmc_group.clone(),
                payload_len: original.ipmc_payload_len,
            }),
            ForwardAction::Connected(to) if dp.ports.port_up(node, to) => {
                out.emissions.push(Emission {
                    egress: Egress::Adjacency {
                        si: hdr.si,
                        bit: bit as u16,
                        to: to.clone(),
                    },
                    packet: original,
                })
            }
            ForwardAction::Routed(path) if dp.ports.path_up(path) => out.emissions.push(Emission {
                egress: Egress::Routed {
                    si: hdr.si,
                    bit: bit as u16,
                    path: path.clone(),
                },
                packet: original,
            }),
            ForwardAction::Routed(path) if dp.ports.port_up(node, &path[1]) => {
                out.drops.push("underlay_path_down".into());
            }
            _ => out.merge(dp.btaft_apply(node, original, bit as u16)),
        }
        current = again;
    }
}
