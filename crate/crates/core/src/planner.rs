//! Subset validation and virtual-link repair.
//!
//! FRR inside a subset needs a backup path around every protected element:
//! link protection needs the subset graph to be 2-edge-connected, node
//! protection needs it 2-vertex-connected. Subsets that fall short can be
//! repaired with routed adjacencies (virtual links) over the underlay.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::tables::build_ip;
use crate::topology::{
    link_key, AdjacencyKind, LinkDoc, LinkKind, NodeId, Topology, TopologyDoc, TopologyError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnMode {
    Edge,
    Vertex,
}

impl fmt::Display for ConnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConnMode::Edge => "edge",
            ConnMode::Vertex => "vertex",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Connectivity {
    pub connected: bool,
    pub two_edge_connected: bool,
    pub two_vertex_connected: bool,
    pub bridges: Vec<(NodeId, NodeId)>,
    pub articulation_points: Vec<NodeId>,
}

impl Connectivity {
    pub fn satisfies(&self, mode: ConnMode) -> bool {
        match mode {
            ConnMode::Edge => self.two_edge_connected,
            ConnMode::Vertex => self.two_vertex_connected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VirtualLink {
    pub from: NodeId,
    pub to: NodeId,
    /// Underlay path from `from` to `to`, endpoints included.
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairIssue {
    /// No underlay path avoids the subset and the failing element.
    Irreparable,
    /// The bitstring has no room for further virtual links.
    BudgetExceeded,
}

impl fmt::Display for RepairIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairIssue::Irreparable => "irreparable",
            RepairIssue::BudgetExceeded => "budget exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Suggestion {
    pub links: Vec<VirtualLink>,
    pub issue: Option<RepairIssue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetDiagnostics {
    pub si: u16,
    pub mode: ConnMode,
    pub used_bits: usize,
    pub bsl: u16,
    /// `used_bits / bsl`.
    pub bs_usage: f64,
    pub bs_ok: bool,
    pub connectivity: Connectivity,
    pub ingress_ok: bool,
    pub non_transit_ok: bool,
    pub suggested_virtual_links: Vec<VirtualLink>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repair_issue: Option<RepairIssue>,
}

impl SubsetDiagnostics {
    pub fn ok(&self) -> bool {
        self.bs_ok
            && self.connectivity.satisfies(self.mode)
            && self.ingress_ok
            && self.non_transit_ok
    }
}

/// Undirected multigraph over node ids. Parallel edges count separately,
/// so two virtual links over different underlay paths are not a bridge.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let mut g = Graph::default();
        for n in nodes.into_iter().collect::<BTreeSet<_>>() {
            g.index.insert(n.clone(), g.nodes.len());
            g.nodes.push(n);
        }
        g
    }

    pub fn add_edge(&mut self, a: &NodeId, b: &NodeId) {
        let (a, b) = (self.index[a], self.index[b]);
        if a != b {
            self.edges.push((a, b));
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        adj
    }

    /// Connected components as sorted node index lists, skipping edges and
    /// nodes rejected by the filters.
    fn components(
        &self,
        edge_ok: impl Fn(usize) -> bool,
        node_ok: impl Fn(usize) -> bool,
    ) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.nodes.len()];
        let mut out = Vec::new();
        for s in 0..self.nodes.len() {
            if comp[s] != usize::MAX || !node_ok(s) {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &(w, e) in &adj[v] {
                    if comp[w] == usize::MAX && node_ok(w) && edge_ok(e) {
                        comp[w] = id;
                        members.push(w);
                        q.push_back(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Bridges (edge indices) and articulation points by lowlink DFS.
    fn lowlink(&self) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let n = self.nodes.len();
        let adj = self.adjacency();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut bridges = BTreeSet::new();
        let mut cuts = BTreeSet::new();
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // explicit stack of (node, parent edge, next neighbour slot)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            let mut root_children = 0;
            while let Some(&mut (v, pe, ref mut slot)) = stack.last_mut() {
                if *slot < adj[v].len() {
                    let (w, e) = adj[v][*slot];
                    *slot += 1;
                    if e == pe {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        if v == root {
                            root_children += 1;
                        }
                        stack.push((w, e, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(u, _, _)) = stack.last() {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            bridges.insert(pe);
                        }
                        if u != root && low[v] >= disc[u] {
                            cuts.insert(u);
                        }
                    }
                }
            }
            if root_children > 1 {
                cuts.insert(root);
            }
        }
        (bridges, cuts)
    }

    pub fn connectivity(&self) -> Connectivity {
        let n = self.nodes.len();
        let connected = n > 0 && self.components(|_| true, |_| true).len() == 1;
        let (bridges, cuts) = self.lowlink();
        let mut bridge_list: Vec<(NodeId, NodeId)> = bridges
            .iter()
            .map(|&e| {
                let (a, b) = self.edges[e];
                link_key(&self.nodes[a], &self.nodes[b])
            })
            .collect();
        bridge_list.sort();
        Connectivity {
            connected,
            two_edge_connected: connected && n >= 2 && bridges.is_empty(),
            two_vertex_connected: connected && n >= 3 && cuts.is_empty(),
            bridges: bridge_list,
            articulation_points: cuts.iter().map(|&v| self.nodes[v].clone()).collect(),
        }
    }
}

/// The subset's graph: its nodes and one edge per distinct physical
/// footprint of its connected and routed adjacencies.
pub fn subset_graph(t: &Topology, si: u16) -> Graph {
    let mut g = Graph::new(t.subset_nodes(si));
    let mut seen = BTreeSet::new();
    for a in t
        .adjacencies()
        .iter()
        .filter(|a| a.bit.si == si && !a.is_decap())
    {
        let key = match &a.kind {
            AdjacencyKind::Routed(p) => {
                let mut p = p.clone();
                if p.first() > p.last() {
                    p.reverse();
                }
                p
            }
            _ => {
                let (x, y) = link_key(&a.from, &a.to);
                vec![x, y]
            }
        };
        if seen.insert(key) {
            g.add_edge(&a.from, &a.to);
        }
    }
    g
}

fn used_bits(t: &Topology, si: u16) -> usize {
    t.adjacencies()
        .iter()
        .filter(|a| a.bit.si == si)
        .map(|a| a.bit.index)
        .collect::<BTreeSet<_>>()
        .len()
}

// An ingress is transit when it forwards (owns a set non-decap bit) in a
// tree injected by another ingress of the subset.
fn non_transit_ok(t: &Topology, si: u16) -> bool {
    let Some(subset) = t.subset(si) else {
        return true;
    };
    let groups: Vec<_> = t.groups().to_vec();
    let Ok(entries) = build_ip(t, &groups) else {
        return true;
    };
    for (_, entry) in &entries {
        for target in entry.targets.iter().filter(|x| x.si == si) {
            for x in subset.ingresses.iter().filter(|x| **x != target.ingress) {
                let forwards = t
                    .adjacencies_from(x, si)
                    .filter(|a| !a.is_decap())
                    .any(|a| {
                        target
                            .bs_template
                            .test(a.bit.index as usize)
                            .unwrap_or(false)
                    });
                if forwards {
                    return false;
                }
            }
        }
    }
    true
}

/// Checks one subset against the deployment rules: bitstring budget,
/// connectivity for the requested protection, at least two ingresses and
/// ingresses that never act as transit nodes. Repair suggestions are
/// included when connectivity falls short.
pub fn validate_subset(t: &Topology, si: u16, mode: ConnMode) -> SubsetDiagnostics {
    let used = used_bits(t, si);
    let connectivity = subset_graph(t, si).connectivity();
    let suggestion = if connectivity.satisfies(mode) {
        Suggestion {
            links: Vec::new(),
            issue: None,
        }
    } else {
        suggest_virtual_links(t, si, mode)
    };
    SubsetDiagnostics {
        si,
        mode,
        used_bits: used,
        bsl: t.bsl(),
        bs_usage: used as f64 / t.bsl() as f64,
        bs_ok: used <= t.bsl() as usize,
        connectivity,
        ingress_ok: t.subset(si).is_some_and(|s| s.ingresses.len() >= 2),
        non_transit_ok: non_transit_ok(t, si),
        suggested_virtual_links: suggestion.links,
        repair_issue: suggestion.issue,
    }
}

// Shortest underlay path whose intermediate nodes lie outside the subset and
// are not ingresses of other subsets, and that uses none of `banned` links.
fn underlay_path(
    t: &Topology,
    src: &NodeId,
    dst: &NodeId,
    inside: &BTreeSet<NodeId>,
    foreign: &BTreeSet<NodeId>,
    banned: &BTreeSet<(NodeId, NodeId)>,
) -> Option<Vec<NodeId>> {
    let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut q = VecDeque::from([src.clone()]);
    let mut seen = BTreeSet::from([src.clone()]);
    while let Some(v) = q.pop_front() {
        if v == *dst {
            let mut path = vec![v.clone()];
            let mut cur = v;
            while let Some(p) = prev.get(&cur) {
                path.push(p.clone());
                cur = p.clone();
            }
            path.reverse();
            return Some(path);
        }
        if v != *src && (inside.contains(&v) || foreign.contains(&v)) {
            continue;
        }
        for w in t.underlay_neighbors(&v) {
            if seen.contains(w) || banned.contains(&link_key(&v, w)) {
                continue;
            }
            if w != dst && (inside.contains(w) || foreign.contains(w)) {
                continue;
            }
            seen.insert(w.clone());
            prev.insert(w.clone(), v.clone());
            q.push_back(w.clone());
        }
    }
    None
}

// Pieces the greedy repair connects: 2-edge-connected components (edge mode)
// or blocks (vertex mode), with a tree over them to measure distance.
struct Pieces {
    members: Vec<Vec<usize>>,
    tree: Vec<Vec<usize>>,
    leaves: Vec<usize>,
    /// Nodes of a leaf piece that may anchor a virtual link.
    anchors: Vec<Vec<usize>>,
}

fn edge_pieces(g: &Graph) -> Pieces {
    let (bridges, _) = g.lowlink();
    let members = g.components(|e| !bridges.contains(&e), |_| true);
    let mut comp_of = vec![0; g.nodes.len()];
    for (c, m) in members.iter().enumerate() {
        for &v in m {
            comp_of[v] = c;
        }
    }
    let mut tree = vec![Vec::new(); members.len()];
    for &e in &bridges {
        let (a, b) = g.edges[e];
        tree[comp_of[a]].push(comp_of[b]);
        tree[comp_of[b]].push(comp_of[a]);
    }
    let leaves = (0..members.len()).filter(|&c| tree[c].len() <= 1).collect();
    let anchors = members.clone();
    Pieces {
        members,
        tree,
        leaves,
        anchors,
    }
}

fn vertex_pieces(g: &Graph) -> Pieces {
    let (_, cuts) = g.lowlink();
    // blocks: components after splitting at every cut vertex, with each
    // cut vertex re-attached to the blocks it touches
    let mut members: Vec<BTreeSet<usize>> = Vec::new();
    let adj = g.adjacency();
    for comp in g.components(|_| true, |v| !cuts.contains(&v)) {
        let mut block: BTreeSet<usize> = comp.iter().copied().collect();
        for &v in &comp {
            for &(w, _) in &adj[v] {
                if cuts.contains(&w) {
                    block.insert(w);
                }
            }
        }
        members.push(block);
    }
    // blocks made only of cut vertices joined directly
    for &(a, b) in &g.edges {
        if cuts.contains(&a) && cuts.contains(&b) {
            members.push([a, b].into());
        }
    }
    for (v, edges) in adj.iter().enumerate() {
        if edges.is_empty() {
            members.push([v].into());
        }
    }
    members.sort();
    members.dedup();
    let mut tree = vec![Vec::new(); members.len()];
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if members[i]
                .intersection(&members[j])
                .any(|v| cuts.contains(v))
            {
                tree[i].push(j);
                tree[j].push(i);
            }
        }
    }
    let cut_count: Vec<usize> = members
        .iter()
        .map(|m| m.iter().filter(|v| cuts.contains(v)).count())
        .collect();
    let leaves = (0..members.len()).filter(|&b| cut_count[b] <= 1).collect();
    let anchors = members
        .iter()
        .map(|m| m.iter().copied().filter(|v| !cuts.contains(v)).collect())
        .collect();
    Pieces {
        members: members
            .into_iter()
            .map(|m| m.into_iter().collect())
            .collect(),
        tree,
        leaves,
        anchors,
    }
}

fn piece_distances(p: &Pieces, from: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; p.members.len()];
    d[from] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(v) = q.pop_front() {
        for &w in &p.tree[v] {
            if d[w] == usize::MAX {
                d[w] = d[v] + 1;
                q.push_back(w);
            }
        }
    }
    d
}

/// Greedy repair: while the subset misses the requested connectivity, join
/// the two leaf pieces farthest apart by a virtual link whose underlay path
/// avoids the subset and foreign ingresses. Disconnected pieces count as
/// farthest. Ties go to the smallest node ids.
pub fn suggest_virtual_links(t: &Topology, si: u16, mode: ConnMode) -> Suggestion {
    let inside = t.subset_nodes(si);
    let own: BTreeSet<NodeId> = t
        .subset(si)
        .map(|s| s.ingresses.iter().cloned().collect())
        .unwrap_or_default();
    let foreign: BTreeSet<NodeId> = t
        .subsets()
        .flat_map(|s| s.ingresses.iter().cloned())
        .filter(|x| !own.contains(x))
        .collect();
    let mut g = subset_graph(t, si);
    let mut budget = (t.bsl() as usize).saturating_sub(used_bits(t, si));
    let mut links = Vec::new();

    for _ in 0..=g.node_count() * g.node_count() {
        if g.connectivity().satisfies(mode) {
            return Suggestion { links, issue: None };
        }
        if g.node_count() < if mode == ConnMode::Vertex { 3 } else { 2 } {
            return Suggestion {
                links,
                issue: Some(RepairIssue::Irreparable),
            };
        }
        let pieces = match mode {
            ConnMode::Edge => edge_pieces(&g),
            ConnMode::Vertex => vertex_pieces(&g),
        };
        let banned: BTreeSet<(NodeId, NodeId)> = g
            .edges
            .iter()
            .map(|&(a, b)| link_key(&g.nodes[a], &g.nodes[b]))
            .collect();

        // candidate pairs of leaf pieces, farthest first
        let mut pairs = Vec::new();
        for (i, &a) in pieces.leaves.iter().enumerate() {
            let d = piece_distances(&pieces, a);
            for &b in &pieces.leaves[i + 1..] {
                pairs.push((std::cmp::Reverse(d[b]), a, b));
            }
        }
        if pieces.leaves.len() == 1 {
            // a lone piece with no partner: anchor both ends inside it
            let a = pieces.leaves[0];
            pairs.push((std::cmp::Reverse(0), a, a));
        }
        pairs.sort();

        let mut chosen = None;
        'pairs: for &(_, a, b) in &pairs {
            for &x in &pieces.anchors[a] {
                for &y in &pieces.anchors[b] {
                    if x >= y && a == b {
                        continue;
                    }
                    let (nx, ny) = (&g.nodes[x], &g.nodes[y]);
                    if let Some(path) = underlay_path(t, nx, ny, &inside, &foreign, &banned) {
                        let (from, to, path) = if nx <= ny {
                            (nx.clone(), ny.clone(), path)
                        } else {
                            (ny.clone(), nx.clone(), path.into_iter().rev().collect())
                        };
                        chosen = Some(VirtualLink { from, to, path });
                        break 'pairs;
                    }
                }
            }
        }
        let Some(link) = chosen else {
            return Suggestion {
                links,
                issue: Some(RepairIssue::Irreparable),
            };
        };
        if budget == 0 {
            return Suggestion {
                links,
                issue: Some(RepairIssue::BudgetExceeded),
            };
        }
        budget -= 1;
        g.add_edge(&link.from, &link.to);
        links.push(link);
    }
    Suggestion {
        links,
        issue: Some(RepairIssue::Irreparable),
    }
}

/// Adds the suggested virtual links of `si` to a copy of the topology
/// document as bidirectional routed links on free bits.
pub fn augment(t: &Topology, si: u16, links: &[VirtualLink]) -> TopologyDoc {
    let mut doc = t.doc().clone();
    let mut taken: BTreeSet<u16> = doc
        .links
        .iter()
        .filter(|l| l.si == si)
        .map(|l| l.bit)
        .collect();
    for l in links {
        let bit = (1..=t.bsl())
            .find(|b| !taken.contains(b))
            .expect("budget checked");
        taken.insert(bit);
        doc.links.push(LinkDoc {
            from: l.from.clone(),
            to: Some(l.to.clone()),
            si,
            bit,
            kind: LinkKind::Routed,
            bidirectional: true,
            path: l.path.clone(),
        });
    }
    doc
}

/// Structured-text (TOML) rendering of a set of diagnostics.
pub fn render_diagnostics(diags: &[SubsetDiagnostics]) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        subsets: &'a [SubsetDiagnostics],
    }
    toml::to_string(&Doc { subsets: diags }).expect("diagnostics serialize")
}

/// Applies every subset's suggestions and reloads the result.
pub fn repair(
    t: &Topology,
    mode: ConnMode,
) -> Result<(Topology, Vec<SubsetDiagnostics>), TopologyError> {
    let mut cur = t.clone();
    let sis: Vec<u16> = t.subsets().map(|s| s.si).collect();
    for si in sis {
        let s = suggest_virtual_links(&cur, si, mode);
        if !s.links.is_empty() {
            cur = Topology::from_doc(augment(&cur, si, &s.links))?;
        }
    }
    let diags = cur
        .subsets()
        .map(|s| validate_subset(&cur, s.si, mode))
        .collect();
    Ok((cur, diags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::load_topology;
    use proptest::prelude::*;

    // Six-node ring R0..R5; `members` lists the ring links given to SI 0,
    // the others exist only in the underlay.
    fn ring(members: &[usize], ingresses: &[usize]) -> Topology {
        let mut s = String::from("bsl = 16\n");
        for i in 0..6 {
            let role = if ingresses.contains(&i) {
                "S-BFIR"
            } else {
                "BFR"
            };
            s += &format!("[[nodes]]\nid = \"R{i}\"\nroles = [\"{role}\"]\n");
        }
        for i in 0..6 {
            let j = (i + 1) % 6;
            if members.contains(&i) {
                s += &format!(
                    "[[links]]\nfrom = \"R{i}\"\nto = \"R{j}\"\nbit = {}\nbidirectional = true\n",
                    i + 1
                );
            } else {
                s += &format!("[[underlay]]\na = \"R{i}\"\nb = \"R{j}\"\n");
            }
        }
        let ing: Vec<String> = ingresses.iter().map(|i| format!("\"R{i}\"")).collect();
        s += &format!("[[subsets]]\nsi = 0\ningresses = [{}]\n", ing.join(", "));
        load_topology(&s).unwrap()
    }

    #[test]
    fn arc_is_not_two_connected() {
        let t = ring(&[0, 1, 2], &[0, 3]);
        let d = validate_subset(&t, 0, ConnMode::Edge);
        assert!(!d.connectivity.two_edge_connected);
        assert!(!d.connectivity.two_vertex_connected);
        assert_eq!(d.connectivity.bridges.len(), 3);
        assert_eq!(
            d.connectivity.articulation_points,
            vec![NodeId::from("R1"), NodeId::from("R2")]
        );
        assert!(d.ingress_ok);
    }

    #[test]
    fn full_ring_is_two_connected() {
        let t = ring(&[0, 1, 2, 3, 4, 5], &[0]);
        let d = validate_subset(&t, 0, ConnMode::Vertex);
        assert!(d.connectivity.two_edge_connected && d.connectivity.two_vertex_connected);
        assert!(d.suggested_virtual_links.is_empty());
        assert!(!d.ingress_ok);
    }

    #[test]
    fn arc_repair_closes_the_ring() {
        let t = ring(&[0, 1, 2], &[0, 3]);
        for mode in [ConnMode::Edge, ConnMode::Vertex] {
            let s = suggest_virtual_links(&t, 0, mode);
            assert_eq!(s.issue, None);
            assert_eq!(
                s.links,
                vec![VirtualLink {
                    from: "R0".into(),
                    to: "R3".into(),
                    path: vec!["R0".into(), "R5".into(), "R4".into(), "R3".into()],
                }]
            );
            assert_eq!(s.links.len(), brute_force_min_links(&t, mode));
            let fixed = Topology::from_doc(augment(&t, 0, &s.links)).unwrap();
            assert!(validate_subset(&fixed, 0, mode)
                .connectivity
                .satisfies(mode));
        }
    }

    #[test]
    fn single_underlay_edge_is_irreparable() {
        let text = r#"
            bsl = 8
            nodes = [
              { id = "A", roles = ["S-BFIR"] }, { id = "B", roles = ["S-BFIR"] },
              { id = "C", roles = ["BFR"] }, { id = "D", roles = ["BFR"] },
            ]
            links = [
              { from = "A", to = "B", bit = 1, bidirectional = true },
              { from = "B", to = "C", bit = 2, bidirectional = true },
              { from = "C", to = "A", bit = 3, bidirectional = true },
              { from = "C", to = "D", bit = 4, bidirectional = true },
            ]
            subsets = [{ si = 0, ingresses = ["A", "B"] }]
        "#;
        let t = load_topology(text).unwrap();
        let d = validate_subset(&t, 0, ConnMode::Edge);
        assert_eq!(
            d.connectivity.bridges,
            vec![(NodeId::from("C"), NodeId::from("D"))]
        );
        assert_eq!(d.repair_issue, Some(RepairIssue::Irreparable));
        assert!(d.suggested_virtual_links.is_empty());
    }

    #[test]
    fn budget_exceeded_truncates() {
        let mut t = ring(&[0, 1, 2], &[0, 3]);
        let mut doc = t.doc().clone();
        doc.bsl = 8;
        // fill bits 4..=8 with decaps so nothing is left
        doc.nodes[0].roles.push(crate::topology::Role::Bfer);
        doc.links.push(LinkDoc {
            from: "R0".into(),
            to: None,
            si: 0,
            bit: 4,
            kind: LinkKind::Decap,
            bidirectional: false,
            path: vec![],
        });
        doc.bsl = 8;
        t = Topology::from_doc(doc.clone()).unwrap();
        assert!(suggest_virtual_links(&t, 0, ConnMode::Edge).issue.is_none());
        for (i, n) in (5..=8).zip(1..=4) {
            doc.nodes[n].roles.push(crate::topology::Role::Bfer);
            doc.links.push(LinkDoc {
                from: doc.nodes[n].id.clone(),
                to: None,
                si: 0,
                bit: i,
                kind: LinkKind::Decap,
                bidirectional: false,
                path: vec![],
            });
        }
        let full = Topology::from_doc(doc).unwrap();
        let s = suggest_virtual_links(&full, 0, ConnMode::Edge);
        assert_eq!(s.issue, Some(RepairIssue::BudgetExceeded));
        assert!(s.links.is_empty());
    }

    #[test]
    fn default_tree_through_backup_ingress_is_transit() {
        let text = r#"
            bsl = 8
            nodes = [
              { id = "S1", roles = ["S-BFIR", "BFIR"] }, { id = "S2", roles = ["S-BFIR"] },
              { id = "E", roles = ["BFER"] },
            ]
            links = [
              { from = "S1", to = "S2", bit = 1, bidirectional = true },
              { from = "S2", to = "E", bit = 2 },
              { from = "E", bit = 3, kind = "decap" },
            ]
            subsets = [{ si = 0, ingresses = ["S1", "S2"] }]
            groups = [{ name = "G", ingress = "S1", receivers = ["E"] }]
        "#;
        let t = load_topology(text).unwrap();
        assert!(!validate_subset(&t, 0, ConnMode::Edge).non_transit_ok);
    }

    // Smallest number of underlay-realizable virtual links that reaches the
    // requested connectivity, by exhaustive search over endpoint pairs.
    fn brute_force_min_links(t: &Topology, mode: ConnMode) -> usize {
        let nodes: Vec<NodeId> = t.subset_nodes(0).into_iter().collect();
        let mut pairs = Vec::new();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                pairs.push((nodes[i].clone(), nodes[j].clone()));
            }
        }
        for k in 0..=2 {
            for combo in combinations(pairs.len(), k) {
                let mut g = subset_graph(t, 0);
                for &c in &combo {
                    g.add_edge(&pairs[c].0, &pairs[c].1);
                }
                if g.connectivity().satisfies(mode) {
                    return k;
                }
            }
        }
        usize::MAX
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 0..n {
            for mut rest in combinations(n, k - 1) {
                if rest.first().is_none_or(|&r| r > first) {
                    rest.insert(0, first);
                    out.push(rest);
                }
            }
        }
        out
    }

    fn reachable_without(
        n: usize,
        edges: &[(usize, usize)],
        skip_edge: Option<usize>,
        skip_node: Option<usize>,
    ) -> bool {
        let alive: Vec<usize> = (0..n).filter(|&v| Some(v) != skip_node).collect();
        let Some(&start) = alive.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for (i, &(a, b)) in edges.iter().enumerate() {
                if Some(i) == skip_edge || Some(a) == skip_node || Some(b) == skip_node {
                    continue;
                }
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
        seen.len() == alive.len()
    }

    proptest! {
        #[test]
        fn lowlink_matches_removal_oracle(n in 2usize..9, raw in proptest::collection::vec((0usize..9, 0usize..9), 1..16)) {
            let edges: Vec<(usize, usize)> = raw.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
            let mut g = Graph::new((0..n).map(|i| NodeId(format!("v{i}"))));
            for &(a, b) in &edges {
                g.add_edge(&NodeId(format!("v{a}")), &NodeId(format!("v{b}")));
            }
            prop_assume!(reachable_without(n, &edges, None, None));
            let c = g.connectivity();
            let mut want_bridges: Vec<(NodeId, NodeId)> = (0..edges.len())
                .filter(|&e| !reachable_without(n, &edges, Some(e), None))
                .map(|e| link_key(&NodeId(format!("v{}", edges[e].0)), &NodeId(format!("v{}", edges[e].1))))
                .collect();
            want_bridges.sort();
            let want_cuts: Vec<NodeId> = (0..n)
                .filter(|&v| !reachable_without(n, &edges, None, Some(v)))
                .map(|v| NodeId(format!("v{v}")))
                .collect();
            prop_assert_eq!(c.bridges, want_bridges);
            prop_assert_eq!(c.articulation_points, want_cuts);
        }
    }
}
