//! In-memory packet representation: an IPMC payload optionally wrapped in a
//! BIER-TE header and, outermost, a single MPLS label.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstring::BitString;

pub const MAX_LABEL: u32 = (1 << 20) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("MPLS label {0} does not fit in 20 bits")]
pub struct LabelError(pub u32);

/// A 20-bit MPLS label value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Label(u32);

impl Label {
    pub fn new(value: u32) -> Result<Self, LabelError> {
        if value > MAX_LABEL {
            return Err(LabelError(value));
        }
        Ok(Label(value))
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for Label {
    type Error = LabelError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Label::new(value)
    }
}

impl From<Label> for u32 {
    fn from(l: Label) -> u32 {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MplsHeader {
    pub label: Label,
}

/// What follows the BIER-TE header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proto {
    Ipmc,
    Mpls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BierTeHeader {
    pub si: u16,
    pub bs: BitString,
    pub proto: Proto,
}

/// A packet travelling through the simulated domain.
///
/// Headers are layered MPLS (outermost), then BIER-TE, then IPMC. The
/// prototype supports no label stacks, so there is at most one MPLS header.
///
/// A copy rerouted around a failed link is carried BIER-in-BIER: `frr_tunnel`
/// holds the outer bitstring (same SI as the inner header) that encodes the
/// backup path, and the inner header is untouched until the tunnel ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub ipmc_group: String,
    pub ipmc_payload_len: usize,
    pub mpls: Option<MplsHeader>,
    pub bierte: Option<BierTeHeader>,
    pub frr_tunnel: Option<BitString>,
    pub trace_id: u64,
    pub recirc_count: u32,
}

impl Packet {
    pub fn ipmc(group: impl Into<String>, payload_len: usize, trace_id: u64) -> Self {
        Packet {
            ipmc_group: group.into(),
            ipmc_payload_len: payload_len,
            mpls: None,
            bierte: None,
            frr_tunnel: None,
            trace_id,
            recirc_count: 0,
        }
    }

    /// Wraps the packet in a BIER-TE header.
    pub fn with_bierte(mut self, si: u16, bs: BitString) -> Self {
        self.bierte = Some(BierTeHeader {
            si,
            bs,
            proto: Proto::Ipmc,
        });
        self
    }

    /// Pushes the single supported MPLS label.
    pub fn with_label(mut self, label: Label) -> Self {
        debug_assert!(self.mpls.is_none(), "label stacks are not supported");
        self.mpls = Some(MplsHeader { label });
        self
    }

    pub fn bs(&self) -> Option<BitString> {
        self.bierte.map(|h| h.bs)
    }

    pub fn add_recircs(&mut self, n: u32) {
        self.recirc_count += n;
    }
}
