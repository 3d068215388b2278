//! BIER-TE with subset tunneling: bitstring algebra, a topology model, a
//! control-plane table compiler, a behavioural dataplane with BIER-TE FRR and
//! MPLS egress protection, a deterministic simulator with delivery oracles, a
//! subset validator, and an analytical throughput model.

pub mod bitstring;
pub mod packet;
pub mod topology;

pub use bitstring::{BitPosition, BitString, BitStringError};
pub use packet::{BierTeHeader, Label, MplsHeader, Packet, Proto};
pub use topology::{load_topology, NodeId, Role, Topology, TopologyError};
pub mod dataplane;
pub mod perf;
pub mod planner;
pub mod sim;
pub mod synth;
pub mod tables;
