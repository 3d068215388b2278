use std::fmt::Write;

use super::{ForwardAction, MplsAction, TableSet};

fn action(a: &ForwardAction) -> String {
    match a {
        ForwardAction::Connected(n) => format!("forward_connected({n})"),
        ForwardAction::Routed(p) => {
            let hops: Vec<&str> = p.iter().map(|n| n.as_str()).collect();
            format!("forward_routed({})", hops.join(","))
        }
        ForwardAction::Decap => "decap".to_owned(),
    }
}

/// Stable text dump: one section per node and table, entries sorted by
/// `(si, key)`.
pub fn dump(tables: &TableSet) -> String {
    let mut out = String::new();
    let width = tables.bsl() as usize;
    let key = |bit: u16| {
        crate::BitString::from_positions(width, [bit as usize])
            .expect("bit within bsl")
            .render()
    };
    for (node, t) in tables.nodes() {
        writeln!(out, "node {node}").unwrap();
        let bift: Vec<_> = t.bift().collect();
        if !bift.is_empty() {
            writeln!(out, "  bift").unwrap();
            for e in bift {
                writeln!(
                    out,
                    "    si={} key={} fbm={} {}",
                    e.si,
                    key(e.key_bit),
                    e.fbm,
                    action(&e.action)
                )
                .unwrap();
            }
        }
        let btaft: Vec<_> = t.btaft().collect();
        if !btaft.is_empty() {
            writeln!(out, "  btaft").unwrap();
            for e in btaft {
                let nnh = e.nnh_bit.map(key).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "    si={} protected={} nnh={} reset={} add={}",
                    e.si,
                    key(e.protected_bit),
                    nnh,
                    e.reset,
                    e.add
                )
                .unwrap();
            }
        }
        let sbtaft: Vec<_> = t.sbtaft().collect();
        if !sbtaft.is_empty() {
            writeln!(out, "  sbtaft").unwrap();
            for e in sbtaft {
                writeln!(
                    out,
                    "    si={} protected_ingress={} combination={} reset={} add={}",
                    e.si, e.protected_ingress, e.nnh_combination, e.reset, e.add
                )
                .unwrap();
            }
        }
        let mept: Vec<_> = t.mept().collect();
        if !mept.is_empty() {
            writeln!(out, "  mept").unwrap();
            for e in mept {
                writeln!(
                    out,
                    "    label={} next={} backup_label={} backup_next={}",
                    e.primary_label, e.primary_next, e.backup_label, e.backup_next
                )
                .unwrap();
            }
        }
        let mpls: Vec<_> = t.mpls().collect();
        if !mpls.is_empty() {
            writeln!(out, "  mpls").unwrap();
            for (label, a) in mpls {
                let a = match a {
                    MplsAction::Forward(n) => format!("forward({n})"),
                    MplsAction::PopToBierte => "pop_to_bierte".into(),
                    MplsAction::PopToSbtaft { protected } => format!("pop_to_sbtaft({protected})"),
                };
                writeln!(out, "    label={label} {a}").unwrap();
            }
        }
        let ip: Vec<_> = t.ip().collect();
        if !ip.is_empty() {
            writeln!(out, "  ip").unwrap();
            for e in ip {
                for tg in &e.targets {
                    let tunnel = tg
                        .tunnel_label
                        .map(|l| l.to_string())
                        .unwrap_or_else(|| "-".into());
                    writeln!(
                        out,
                        "    group={} si={} bs={} ingress={} tunnel={}",
                        e.group, tg.si, tg.bs_template, tg.ingress, tunnel
                    )
                    .unwrap();
                }
            }
        }
    }
    out
}
