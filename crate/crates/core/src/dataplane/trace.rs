use std::fmt;

use crate::bitstring::BitString;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Chain {
    Ip,
    Mpls,
    Bierte,
    Btaft,
    Sbtaft,
    Mept,
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chain::Ip => "ip",
            Chain::Mpls => "mpls",
            Chain::Bierte => "bierte",
            Chain::Btaft => "btaft",
            Chain::Sbtaft => "sbtaft",
            Chain::Mept => "mept",
        })
    }
}

/// One processing step. Rendered as
/// `node chain action matched_key bs_before bs_after`, `-` for absent fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub node: NodeId,
    pub chain: Chain,
    pub action: String,
    pub matched_key: Option<String>,
    pub bs_before: Option<BitString>,
    pub bs_after: Option<BitString>,
}

impl TraceRecord {
    pub fn new(node: &NodeId, chain: Chain, action: impl Into<String>) -> Self {
        TraceRecord {
            node: node.clone(),
            chain,
            action: action.into(),
            matched_key: None,
            bs_before: None,
            bs_after: None,
        }
    }

    pub fn key(mut self, key: impl Into<String>) -> Self {
        self.matched_key = Some(key.into());
        self
    }

    pub fn bs(mut self, before: Option<BitString>, after: Option<BitString>) -> Self {
        self.bs_before = before;
        self.bs_after = after;
        self
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |b: &Option<BitString>| b.map(|b| b.render()).unwrap_or_else(|| "-".into());
        write!(
            f,
            "{} {} {} {} {} {}",
            self.node,
            self.chain,
            self.action,
            self.matched_key.as_deref().unwrap_or("-"),
            opt(&self.bs_before),
            opt(&self.bs_after)
        )
    }
}
