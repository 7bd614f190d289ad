use crate::linalg::CsrMatrix;
use crate::network::{LinkKind, Network, NodeKind};
use crate::scalar::Scalar;

/// Node-link incidence matrix split into node-kind by link-kind blocks.
///
/// Each link column has `+1` at its from-node row and `−1` at its to-node row.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidencePartition {
    node_offsets: [usize; 4],
    link_offsets: [usize; 4],
    /// `(from, to)` node rows per link column.
    ends: Vec<(usize, usize)>,
}

pub fn build_incidence<T: Scalar>(net: &Network<T>) -> IncidencePartition {
    let c = net.counts();
    IncidencePartition {
        node_offsets: [0, c.junctions, c.junctions + c.reservoirs, c.heads()],
        link_offsets: [0, c.pipes, c.pipes + c.pumps, c.flows()],
        ends: (0..net.link_count()).map(|l| net.link_ends(l)).collect(),
    }
}

fn node_slot(kind: NodeKind) -> usize {
    match kind {
        NodeKind::Junction => 0,
        NodeKind::Reservoir => 1,
        NodeKind::Tank => 2,
    }
}

fn link_slot(kind: LinkKind) -> usize {
    match kind {
        LinkKind::Pipe => 0,
        LinkKind::Pump => 1,
        LinkKind::Valve => 2,
    }
}

impl IncidencePartition {
    pub fn node_count(&self) -> usize {
        self.node_offsets[3]
    }

    pub fn link_count(&self) -> usize {
        self.link_offsets[3]
    }

    /// Global row range of a node kind.
    pub fn node_range(&self, kind: NodeKind) -> std::ops::Range<usize> {
        let s = node_slot(kind);
        self.node_offsets[s]..self.node_offsets[s + 1]
    }

    /// Global column range of a link kind.
    pub fn link_range(&self, kind: LinkKind) -> std::ops::Range<usize> {
        let s = link_slot(kind);
        self.link_offsets[s]..self.link_offsets[s + 1]
    }

    pub fn ends(&self, link: usize) -> (usize, usize) {
        self.ends[link]
    }

    /// Nonzeros `(node, link, ±1)` of the full matrix.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        self.ends
            .iter()
            .enumerate()
            .flat_map(|(l, &(f, t))| [(f, l, 1i8), (t, l, -1i8)])
    }

    pub fn matrix<T: Scalar>(&self) -> CsrMatrix<T> {
        let t: Vec<_> = self
            .entries()
            .map(|(i, j, v)| (i, j, T::of(v as f64)))
            .collect();
        CsrMatrix::from_triplets(self.node_count(), self.link_count(), &t)
    }

    /// One block, e.g. junction rows by pipe columns.
    pub fn block<T: Scalar>(&self, nodes: NodeKind, links: LinkKind) -> CsrMatrix<T> {
        let rows = self.node_range(nodes);
        let cols = self.link_range(links);
        let t: Vec<_> = self
            .entries()
            .filter(|(i, j, _)| rows.contains(i) && cols.contains(j))
            .map(|(i, j, v)| (i - rows.start, j - cols.start, T::of(v as f64)))
            .collect();
        CsrMatrix::from_triplets(rows.len(), cols.len(), &t)
    }
}
