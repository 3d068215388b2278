//! Deterministic scenario runner.
//!
//! Events are applied in order. Each injection propagates through a FIFO
//! work queue until no packet is left before the next event runs, so
//! identical inputs always yield identical traces and reports.

mod oracle;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::oracle_deliveries;

use crate::bitstring::BitPosition;
use crate::dataplane::{Dataplane, Egress, PortState, TraceRecord};
use crate::packet::Packet;
use crate::tables::TableSet;
use crate::topology::{NodeId, Role, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    Inject {
        group: String,
        #[serde(default = "default_payload")]
        payload_len: usize,
        /// Defaults to the group's BFIR.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<NodeId>,
    },
    LinkDown {
        a: NodeId,
        b: NodeId,
    },
    LinkUp {
        a: NodeId,
        b: NodeId,
    },
    NodeDown {
        node: NodeId,
    },
    NodeUp {
        node: NodeId,
    },
}

fn default_payload() -> usize {
    1000
}

/// Ordered list of events.
///
/// ```toml
/// [[events]]
/// kind = "node_down"
/// node = "BFR2"
///
/// [[events]]
/// kind = "inject"
/// group = "G"
/// payload_len = 512
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string().trim().to_owned()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks that every event references existing nodes, physical links and
    /// configured groups.
    pub fn validate(&self, t: &Topology) -> Result<(), SimError> {
        let bad = |index: usize, reason: String| Err(SimError::BadScenario { index, reason });
        for (i, ev) in self.events.iter().enumerate() {
            match ev {
                Event::Inject { group, at, .. } => {
                    let Some(g) = t.group(group) else {
                        return bad(i, format!("unknown group {group}"));
                    };
                    let at = at.as_ref().unwrap_or(&g.ingress);
                    if !t.has_role(at, Role::Bfir) {
                        return bad(i, format!("{at} is not a BFIR"));
                    }
                }
                Event::LinkDown { a, b } | Event::LinkUp { a, b } => {
                    if !t.is_physical_link(a, b) {
                        return bad(i, format!("no physical link {a}-{b}"));
                    }
                }
                Event::NodeDown { node } | Event::NodeUp { node } => {
                    if !t.contains_node(node) {
                        return bad(i, format!("unknown node {node}"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Parse(String),
    #[error("events[{index}]: {reason}")]
    BadScenario { index: usize, reason: String },
    #[error(
        "injection {injection} did not quiesce within {budget} hops; last steps:\n{diagnosis}"
    )]
    NonQuiescent {
        injection: usize,
        budget: usize,
        diagnosis: String,
    },
}

/// Outcome of one injection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InjectionReport {
    pub group: String,
    pub at: NodeId,
    pub receivers: BTreeSet<NodeId>,
    pub oracle: BTreeSet<NodeId>,
    pub copies: BTreeMap<NodeId, u32>,
    pub exactly_once: bool,
    pub loop_free: bool,
    pub oracle_match: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub drops: Vec<String>,
}

impl InjectionReport {
    pub fn delivered(&self) -> BTreeSet<NodeId> {
        self.copies.keys().cloned().collect()
    }
}

/// Aggregate over all injections of a scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeliveryReport {
    pub copies: BTreeMap<NodeId, u32>,
    pub traversals: BTreeMap<BitPosition, u32>,
    pub recirculations: BTreeMap<NodeId, u32>,
    pub injections: Vec<InjectionReport>,
}

impl DeliveryReport {
    pub fn exactly_once(&self) -> bool {
        self.injections.iter().all(|i| i.exactly_once)
    }

    pub fn loop_free(&self) -> bool {
        self.injections.iter().all(|i| i.loop_free)
    }

    pub fn oracle_match(&self) -> bool {
        self.injections.iter().all(|i| i.oracle_match)
    }

    pub fn all_verdicts(&self) -> bool {
        self.exactly_once() && self.loop_free() && self.oracle_match()
    }

    pub fn copies_of(&self, bfer: &str) -> u32 {
        self.copies.get(&NodeId::from(bfer)).copied().unwrap_or(0)
    }

    pub fn traversals_of(&self, si: u16, bit: u16) -> u32 {
        self.traversals
            .get(&BitPosition::new(si, bit))
            .copied()
            .unwrap_or(0)
    }

    /// Structured-text (TOML) rendering with sorted keys.
    pub fn render(&self) -> String {
        #[derive(Serialize)]
        struct Verdicts {
            exactly_once: bool,
            loop_free: bool,
            oracle_match: bool,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            verdicts: Verdicts,
            copies: &'a BTreeMap<NodeId, u32>,
            traversals: BTreeMap<String, u32>,
            recirculations: &'a BTreeMap<NodeId, u32>,
            injections: &'a [InjectionReport],
        }
        let doc = Doc {
            verdicts: Verdicts {
                exactly_once: self.exactly_once(),
                loop_free: self.loop_free(),
                oracle_match: self.oracle_match(),
            },
            copies: &self.copies,
            traversals: self
                .traversals
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            recirculations: &self.recirculations,
            injections: &self.injections,
        };
        toml::to_string(&doc).expect("report serializes")
    }
}

/// Trace lines of a run; injection boundaries appear as `#` comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub lines: Vec<String>,
}

impl Trace {
    fn comment(&mut self, s: String) {
        self.lines.push(format!("# {s}"));
    }

    fn record(&mut self, r: &TraceRecord) {
        self.lines.push(r.to_string());
    }

    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    /// Records only, without comments.
    pub fn records(&self) -> impl Iterator<Item = &str> {
        self.lines
            .iter()
            .filter(|l| !l.starts_with('#'))
            .map(String::as_str)
    }
}

// A directed adjacency traversal; `tunnel` marks the outer header of a
// link-protection tunnel, which may cross adjacencies the inner copy uses
// again after the tunnel ends.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Hop {
    pos: BitPosition,
    from: NodeId,
    tunnel: bool,
}

// Adjacencies traversed by a packet's ancestors, shared between sibling copies.
#[derive(Debug)]
struct Lineage {
    hop: Option<Hop>,
    parent: Option<Rc<Lineage>>,
}

impl Lineage {
    fn contains(&self, hop: &Hop) -> bool {
        let mut cur = Some(self);
        while let Some(l) = cur {
            if l.hop.as_ref() == Some(hop) {
                return true;
            }
            cur = l.parent.as_deref();
        }
        false
    }
}

/// Runs a scenario against compiled tables.
pub fn run(
    t: &Topology,
    tables: &TableSet,
    s: &Scenario,
) -> Result<(DeliveryReport, Trace), SimError> {
    s.validate(t)?;
    let mut ports = PortState::new();
    let mut report = DeliveryReport::default();
    let mut trace = Trace::default();
    let budget = t.node_count() * t.bsl() as usize * 4;

    for (i, ev) in s.events.iter().enumerate() {
        match ev {
            Event::LinkDown { a, b } => {
                ports.set_link(a, b, false);
                trace.comment(format!("link_down {a} {b}"));
            }
            Event::LinkUp { a, b } => {
                ports.set_link(a, b, true);
                trace.comment(format!("link_up {a} {b}"));
            }
            Event::NodeDown { node } => {
                ports.set_node(node, false);
                trace.comment(format!("node_down {node}"));
            }
            Event::NodeUp { node } => {
                ports.set_node(node, true);
                trace.comment(format!("node_up {node}"));
            }
            Event::Inject {
                group,
                payload_len,
                at,
            } => {
                let g = t.group(group).expect("validated group");
                let at = at.clone().unwrap_or_else(|| g.ingress.clone());
                trace.comment(format!("inject {group} at {at}"));
                let inj = inject(
                    t,
                    tables,
                    &ports,
                    i,
                    &at,
                    Packet::ipmc(group.clone(), *payload_len, i as u64),
                    budget,
                    &mut report,
                    &mut trace,
                )?;
                report.injections.push(inj);
            }
        }
    }
    Ok((report, trace))
}

#[allow(clippy::too_many_arguments)]
fn inject(
    t: &Topology,
    tables: &TableSet,
    ports: &PortState,
    index: usize,
    at: &NodeId,
    pkt: Packet,
    budget: usize,
    report: &mut DeliveryReport,
    trace: &mut Trace,
) -> Result<InjectionReport, SimError> {
    let dp = Dataplane::new(tables, ports);
    let g = t.group(&pkt.ipmc_group).expect("validated group");

    let mut oracle = BTreeSet::new();
    if let Some(entry) = tables.node(at).and_then(|n| n.ip_entry(&g.name)) {
        for target in &entry.targets {
            oracle.extend(oracle_deliveries(
                t,
                target.si,
                &target.bs_template,
                &target.ingress,
            ));
        }
    }

    let mut copies: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut drops = Vec::new();
    let mut loop_free = true;
    let mut queue = VecDeque::new();
    let root = Rc::new(Lineage {
        hop: None,
        parent: None,
    });
    if ports.is_node_up(at) {
        queue.push_back((at.clone(), pkt, root));
    } else {
        drops.push(format!("ingress {at} down"));
    }
    let mut hops = 0usize;
    let mut recent: VecDeque<String> = VecDeque::new();

    while let Some((node, pkt, lineage)) = queue.pop_front() {
        hops += 1;
        if hops > budget {
            return Err(SimError::NonQuiescent {
                injection: index,
                budget,
                diagnosis: recent.into_iter().collect::<Vec<_>>().join("\n"),
            });
        }
        if !ports.is_node_up(&node) {
            drops.push(format!("arrived at down node {node}"));
            continue;
        }
        let out = dp.process(&node, pkt);
        *report.recirculations.entry(node.clone()).or_default() += out.recircs;
        for r in &out.trace {
            trace.record(r);
            recent.push_back(r.to_string());
            if recent.len() > 16 {
                recent.pop_front();
            }
        }
        drops.extend(out.drops.iter().map(|d| format!("{node}: {d}")));
        for d in out.deliveries {
            *copies.entry(d.bfer.clone()).or_default() += 1;
            *report.copies.entry(d.bfer).or_default() += 1;
        }
        for e in out.emissions {
            let child = match &e.egress {
                Egress::Adjacency { si, bit, .. } | Egress::Routed { si, bit, .. } => {
                    let pos = BitPosition::new(*si, *bit);
                    *report.traversals.entry(pos).or_default() += 1;
                    let hop = Hop {
                        pos,
                        from: node.clone(),
                        tunnel: e.packet.frr_tunnel.is_some(),
                    };
                    if lineage.contains(&hop) {
                        loop_free = false;
                    }
                    Rc::new(Lineage {
                        hop: Some(hop),
                        parent: Some(lineage.clone()),
                    })
                }
                Egress::TunnelHop { .. } => lineage.clone(),
            };
            queue.push_back((e.egress.target().clone(), e.packet, child));
        }
    }

    let exactly_once = g.receivers.iter().all(|r| copies.get(r) == Some(&1))
        && copies.keys().all(|n| g.receivers.contains(n));
    let delivered: BTreeSet<NodeId> = copies.keys().cloned().collect();
    Ok(InjectionReport {
        group: g.name.clone(),
        at: at.clone(),
        receivers: g.receivers.clone(),
        oracle_match: delivered == oracle,
        oracle,
        copies,
        exactly_once,
        loop_free,
        drops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{compile, CompileOptions};
    use crate::topology::load_topology;

    const FORWARDING: &str = include_str!("../../fixtures/forwarding.topo");

    fn inject_g() -> Event {
        Event::Inject {
            group: "G".into(),
            payload_len: 100,
            at: None,
        }
    }

    #[test]
    fn forwarding_example_baseline() {
        let t = load_topology(FORWARDING).unwrap();
        let tables = compile(&t, &CompileOptions::from_topology(&t)).unwrap();
        let s = Scenario {
            events: vec![inject_g()],
        };
        let (r, _) = run(&t, &tables, &s).unwrap();
        assert_eq!(r.copies_of("BFER1"), 1);
        assert_eq!(r.copies_of("BFER2"), 1);
        assert_eq!(r.traversals_of(0, 3), 0);
        assert!(r.all_verdicts());
    }

    #[test]
    fn severed_tree_without_frr() {
        let t = load_topology(FORWARDING).unwrap();
        let tables = compile(&t, &CompileOptions::from_topology(&t)).unwrap();
        let s = Scenario {
            events: vec![
                Event::NodeDown {
                    node: NodeId::from("BFR2"),
                },
                inject_g(),
            ],
        };
        let (r, _) = run(&t, &tables, &s).unwrap();
        assert_eq!(r.copies_of("BFER1"), 0);
        assert_eq!(r.copies_of("BFER2"), 0);
        assert!(!r.exactly_once());
        assert!(r.loop_free());
    }

    #[test]
    fn oracle_on_forwarding_example() {
        let t = load_topology(FORWARDING).unwrap();
        let bfir = NodeId::from("BFIR");
        let bs = t.bs_of([1, 2, 4, 5, 6, 7, 8]);
        let got = oracle_deliveries(&t, 0, &bs, &bfir);
        assert_eq!(got, [NodeId::from("BFER1"), NodeId::from("BFER2")].into());
        assert!(oracle_deliveries(&t, 0, &t.empty_bs(), &bfir).is_empty());
        assert!(oracle_deliveries(&t, 0, &t.bs_of([8]), &bfir).is_empty());
    }

    #[test]
    fn scenario_validation() {
        let t = load_topology(FORWARDING).unwrap();
        let s = Scenario::parse("[[events]]\nkind = \"inject\"\ngroup = \"nope\"\n").unwrap();
        assert!(matches!(
            s.validate(&t),
            Err(SimError::BadScenario { index: 0, .. })
        ));
        let s = Scenario::parse("[[events]]\nkind = \"link_down\"\na = \"BFIR\"\nb = \"BFER1\"\n")
            .unwrap();
        assert!(matches!(s.validate(&t), Err(SimError::BadScenario { .. })));
        assert!(matches!(
            Scenario::parse("[[events]]\nkind = \"warp\"\n"),
            Err(SimError::Parse(_))
        ));
    }
}
