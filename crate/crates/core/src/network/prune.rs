use log::warn;

use crate::network::Network;
use crate::scalar::Scalar;

/// Network with closed links removed, plus the bookkeeping needed to map results back.
#[derive(Debug, Clone)]
pub struct PruneOutcome<T> {
    pub network: Network<T>,
    /// Original link index of every retained link, in retained order.
    pub kept_links: Vec<usize>,
    /// Ids of nodes left with no incident link and no fixed head.
    pub stranded: Vec<String>,
}

/// Removes closed pipes, pumps and valves. Nodes are never removed.
pub fn prune_closed<T: Scalar>(net: &Network<T>) -> PruneOutcome<T> {
    let mut out = net.clone();
    out.pipes
        .retain(|p| p.status == crate::network::LinkStatus::Open);
    out.pumps
        .retain(|p| p.status == crate::network::LinkStatus::Open);
    out.valves
        .retain(|v| v.mode != crate::network::ValveMode::Closed);
    let kept_links: Vec<usize> = (0..net.link_count())
        .filter(|&l| !net.link_closed(l))
        .collect();

    let mut degree = vec![0usize; net.node_count()];
    for l in 0..out.link_count() {
        let (f, t) = out.link_ends(l);
        degree[f] += 1;
        degree[t] += 1;
    }
    let stranded: Vec<String> = (0..net.node_count())
        .filter(|&n| degree[n] == 0 && net.fixed_head(n).is_none())
        .map(|n| net.node_id(n).to_string())
        .collect();
    if !stranded.is_empty() {
        warn!(
            "nodes left without links or fixed head: {}",
            stranded.join(", ")
        );
    }
    PruneOutcome {
        network: out,
        kept_links,
        stranded,
    }
}
