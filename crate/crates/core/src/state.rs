use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulics::ValveStatus;
use crate::network::Network;
use crate::scalar::Scalar;

/// Heads per node and flows per link of the whole (unpruned) network, in SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicState<T> {
    /// Node order: junctions, reservoirs, tanks.
    pub heads: Vec<T>,
    /// Link order: pipes, pumps, valves. Closed links carry zero flow.
    pub flows: Vec<T>,
    /// One status per valve.
    pub valve_statuses: Vec<ValveStatus>,
}

impl<T: Scalar> HydraulicState<T> {
    pub fn zeros(net: &Network<T>) -> Self {
        HydraulicState {
            heads: vec![T::zero(); net.node_count()],
            flows: vec![T::zero(); net.link_count()],
            valve_statuses: vec![ValveStatus::Open; net.valves.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.heads.len() + self.flows.len()
    }

    /// `ξ = [h; q]`.
    pub fn xi(&self) -> Vec<T> {
        self.heads.iter().chain(&self.flows).copied().collect()
    }

    pub fn check_dims(&self, net: &Network<T>) -> Result<()> {
        if self.heads.len() != net.node_count() || self.flows.len() != net.link_count() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} heads and {} flows, network has {} nodes and {} links",
                self.heads.len(),
                self.flows.len(),
                net.node_count(),
                net.link_count()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.heads.iter().chain(&self.flows).all(|x| x.is_finite())
    }
}
