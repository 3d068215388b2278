use std::collections::BTreeSet;

use bierte::tables::{
    build_btaft, build_sbtaft, compile, sbtaft_singletons, CompileOptions, ProtectionMode,
    TableError,
};
use bierte::topology::Adjacency;
use bierte::{load_topology, NodeId, Topology};

const RING5: &str = r#"
bsl = 16
nodes = [
  { id = "A", roles = ["BFIR"] },
  { id = "B", roles = ["BFR", "BFER"] },
  { id = "C", roles = ["BFR", "BFER"] },
  { id = "D", roles = ["BFR", "BFER"] },
  { id = "E", roles = ["BFR", "BFER"] },
]
links = [
  { from = "A", to = "B", bit = 1, bidirectional = true },
  { from = "B", to = "C", bit = 2, bidirectional = true },
  { from = "C", to = "D", bit = 3, bidirectional = true },
  { from = "D", to = "E", bit = 4, bidirectional = true },
  { from = "E", to = "A", bit = 5, bidirectional = true },
  { from = "A", to = "C", bit = 6, bidirectional = true },
  { from = "B", bit = 7, kind = "decap" },
  { from = "C", bit = 8, kind = "decap" },
  { from = "D", bit = 9, kind = "decap" },
  { from = "E", bit = 10, kind = "decap" },
]
subsets = [{ si = 0, ingresses = ["A"] }]
"#;

fn n(s: &str) -> NodeId {
    NodeId::from(s)
}

// Every simple path from `src` to `dst` avoiding `banned` nodes and bits,
// as bit sequences.
fn all_paths(
    t: &Topology,
    src: &NodeId,
    dst: &NodeId,
    banned: &BTreeSet<NodeId>,
    banned_bits: &BTreeSet<u16>,
) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut stack = vec![(vec![src.clone()], Vec::new())];
    while let Some((nodes, bits)) = stack.pop() {
        let at = nodes.last().unwrap();
        if at == dst {
            out.push(bits);
            continue;
        }
        let next: Vec<&Adjacency> = t
            .adjacencies_from(at, 0)
            .filter(|a| !a.is_decap())
            .collect();
        for a in next {
            if nodes.contains(&a.to) || banned.contains(&a.to) || banned_bits.contains(&a.bit.index)
            {
                continue;
            }
            let mut nodes = nodes.clone();
            nodes.push(a.to.clone());
            let mut bits = bits.clone();
            bits.push(a.bit.index);
            stack.push((nodes, bits));
        }
    }
    out
}

fn best(mut paths: Vec<Vec<u16>>) -> Vec<u16> {
    paths.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    paths.into_iter().next().expect("a path exists")
}

#[test]
fn link_detours_match_brute_force() {
    let t = load_topology(RING5).unwrap();
    for node in ["A", "B", "C", "D", "E"] {
        for e in build_btaft(&t, &n(node), ProtectionMode::Link).unwrap() {
            let adj = t
                .adjacencies_from(&n(node), 0)
                .find(|a| a.bit.index == e.protected_bit)
                .unwrap();
            let want = best(all_paths(
                &t,
                &n(node),
                &adj.to,
                &BTreeSet::new(),
                &[e.protected_bit].into(),
            ));
            assert_eq!(e.reset, t.bs_of([e.protected_bit]));
            assert_eq!(e.add, t.bs_of(want), "{node} bit {}", e.protected_bit);
        }
    }
}

#[test]
fn node_detours_match_brute_force() {
    let t = load_topology(RING5).unwrap();
    for node in ["A", "B", "C", "D", "E"] {
        for e in build_btaft(&t, &n(node), ProtectionMode::Node).unwrap() {
            let adj = t
                .adjacencies_from(&n(node), 0)
                .find(|a| a.bit.index == e.protected_bit)
                .unwrap();
            let nnh_bit = e.nnh_bit.expect("every neighbour has onward links");
            let nnh = t
                .adjacencies_from(&adj.to, 0)
                .find(|a| a.bit.index == nnh_bit)
                .unwrap();
            let want = best(all_paths(
                &t,
                &n(node),
                &nnh.to,
                &[adj.to.clone()].into(),
                &BTreeSet::new(),
            ));
            assert_eq!(e.reset, t.bs_of([e.protected_bit, nnh_bit]));
            assert_eq!(
                e.add,
                t.bs_of(want),
                "{node} bit {} nnh {nnh_bit}",
                e.protected_bit
            );
        }
    }
}

fn fan(k: usize) -> Topology {
    let mut s = String::from("bsl = 64\n");
    s += "[[nodes]]\nid = \"P\"\nroles = [\"S-BFIR\"]\n[[nodes]]\nid = \"B\"\nroles = [\"S-BFIR\"]\n";
    for i in 1..=k {
        s += &format!("[[nodes]]\nid = \"X{i}\"\nroles = [\"BFR\", \"BFER\"]\n");
        s += &format!("[[links]]\nfrom = \"P\"\nto = \"X{i}\"\nbit = {i}\n");
        s += &format!("[[links]]\nfrom = \"B\"\nto = \"X{i}\"\nbit = {}\n", k + i);
        s += &format!(
            "[[links]]\nfrom = \"X{i}\"\nbit = {}\nkind = \"decap\"\n",
            2 * k + i
        );
    }
    s += "[[subsets]]\nsi = 0\ningresses = [\"P\", \"B\"]\nprotection = { P = \"B\" }\n";
    load_topology(&s).unwrap()
}

#[test]
fn sbtaft_has_every_combination() {
    for k in [1, 2] {
        let t = fan(k);
        let singles = sbtaft_singletons(&t, &n("B"), &n("P")).unwrap();
        assert_eq!(singles.len(), k);
        for (i, e) in singles.iter().enumerate() {
            assert_eq!(e.reset, t.bs_of([i as u16 + 1]));
            assert_eq!(e.add, t.bs_of([(k + i + 1) as u16]));
        }
        let all = build_sbtaft(&t, &n("B"), &n("P"), 10).unwrap();
        assert_eq!(all.len(), (1 << k) - 1);
    }
    let t = fan(2);
    let all = build_sbtaft(&t, &n("B"), &n("P"), 10).unwrap();
    let both = all
        .iter()
        .find(|e| e.nnh_combination == t.bs_of([1, 2]))
        .unwrap();
    assert_eq!(both.reset, t.bs_of([1, 2]));
    assert_eq!(both.add, t.bs_of([3, 4]));
}

#[test]
fn sbtaft_cap_is_enforced() {
    let t = fan(11);
    let err = build_sbtaft(&t, &n("B"), &n("P"), 10).unwrap_err();
    assert!(
        matches!(err, TableError::CombinationCap { k: 11, cap: 10, .. }),
        "{err}"
    );
    assert!(compile(&t, &CompileOptions::from_topology(&t)).is_err());
}
