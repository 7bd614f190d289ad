//! Network compiled into per-link laws, expressed for a chosen flow scale.
//!
//! Heads stay in metres. Flows are multiplied by `scale`, and every law is rewritten
//! so that it describes the same physics in those flow units.

use crate::error::Result;
use crate::hydraulics::{
    darcy_resistance, minor_loss_coefficient, pipe_resistance, HeadlossFormula, PddParams,
    PipeProps, PumpProps, ValveLaw, ValveProps, ValveStatus, DEFAULT_VALVE_LOSS,
};
use crate::network::{
    build_incidence, prune_closed, IncidencePartition, Network, ValveKind, ValveMode,
};
use crate::scalar::Scalar;

/// Pipe law, flow-dependent for Darcy-Weisbach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PipeLaw<T> {
    Fixed(PipeProps<T>),
    Darcy {
        length: T,
        diameter: T,
        roughness: T,
        scale: T,
    },
}

impl<T: Scalar> PipeLaw<T> {
    /// Law valid around the (scaled) flow `q`.
    pub fn props_at(&self, q: T) -> PipeProps<T> {
        match *self {
            PipeLaw::Fixed(p) => p,
            PipeLaw::Darcy {
                length,
                diameter,
                roughness,
                scale,
            } => PipeProps {
                resistance: darcy_resistance(length, diameter, roughness, q / scale),
                exponent: T::of(2.0),
            }
            .scaled(scale),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValveEntry<T> {
    pub props: ValveProps<T>,
    pub mode: ValveMode,
}

/// Pruned network with laws in scaled flow units.
#[derive(Debug, Clone)]
pub struct Model<T> {
    /// Network without closed links (nodes unchanged).
    pub net: Network<T>,
    pub inc: IncidencePartition,
    /// Original link index of each retained link.
    pub kept_links: Vec<usize>,
    /// Link count of the unpruned network.
    pub full_links: usize,
    /// Valve index in the unpruned network of each retained valve.
    pub kept_valves: Vec<usize>,
    pub full_valves: usize,
    pub scale: T,
    pub demand: Vec<T>,
    pub pdd: Vec<Option<PddParams<T>>>,
    pub pipes: Vec<PipeLaw<T>>,
    pub pumps: Vec<PumpProps<T>>,
    pub valves: Vec<ValveEntry<T>>,
}

impl<T: Scalar> Model<T> {
    pub fn new(full: &Network<T>, scale: T) -> Result<Self> {
        let pruned = prune_closed(full);
        let net = pruned.network;
        let inc = build_incidence(&net);
        let demand = net
            .junctions
            .iter()
            .map(|j| j.pdd.map_or(j.demand, |p| p.d_dsgn) * scale)
            .collect();
        let pdd = net
            .junctions
            .iter()
            .map(|j| j.pdd.map(|p| p.scaled(scale)))
            .collect();
        let mut pipes = Vec::with_capacity(net.pipes.len());
        for p in &net.pipes {
            pipes.push(match net.headloss {
                HeadlossFormula::DarcyWeisbach => {
                    // Validates dimensions.
                    pipe_resistance(p.length, p.diameter, p.roughness, net.headloss)?;
                    PipeLaw::Darcy {
                        length: p.length,
                        diameter: p.diameter,
                        roughness: p.roughness,
                        scale,
                    }
                }
                f => PipeLaw::Fixed(
                    PipeProps {
                        resistance: pipe_resistance(p.length, p.diameter, p.roughness, f)?,
                        exponent: T::of(f.exponent()),
                    }
                    .scaled(scale),
                ),
            });
        }
        let pumps = net
            .pumps
            .iter()
            .map(|m| {
                PumpProps {
                    shutoff_head: m.shutoff_head,
                    coeff: m.coeff,
                    exponent: m.exponent,
                    speed: m.speed,
                }
                .scaled(scale)
            })
            .collect();
        let valves = net
            .valves
            .iter()
            .map(|v| {
                let k = minor_loss_coefficient(v.minor_loss, v.diameter);
                let loss = if v.minor_loss > T::zero() {
                    k
                } else {
                    T::of(DEFAULT_VALVE_LOSS)
                };
                let law = match v.kind {
                    ValveKind::Gpv => ValveLaw::Gpv {
                        openness: v.openness,
                        resistance: k,
                        exponent: T::of(2.0),
                    },
                    ValveKind::Prv => ValveLaw::Prv {
                        loss,
                        head_setting: net.elevation(v.to) + v.setting,
                    },
                    ValveKind::Fcv => ValveLaw::Fcv {
                        loss,
                        flow_setting: v.setting,
                    },
                };
                let status = match (v.kind, v.mode) {
                    (ValveKind::Gpv, _) | (_, ValveMode::Open) => ValveStatus::Open,
                    (_, ValveMode::Closed) => ValveStatus::Closed,
                    (_, ValveMode::Auto) => ValveStatus::Active,
                };
                ValveEntry {
                    props: ValveProps { law, status }.scaled(scale),
                    mode: v.mode,
                }
            })
            .collect();
        let np = full.pipes.len() + full.pumps.len();
        let kept_valves = pruned
            .kept_links
            .iter()
            .filter(|&&l| l >= np)
            .map(|&l| l - np)
            .collect();
        Ok(Model {
            full_links: full.link_count(),
            full_valves: full.valves.len(),
            kept_links: pruned.kept_links,
            kept_valves,
            net,
            inc,
            scale,
            demand,
            pdd,
            pipes,
            pumps,
            valves,
        })
    }

    pub fn n_heads(&self) -> usize {
        self.net.node_count()
    }

    pub fn n_flows(&self) -> usize {
        self.net.link_count()
    }

    pub fn n_vars(&self) -> usize {
        self.n_heads() + self.n_flows()
    }

    pub fn pipe_offset(&self) -> usize {
        0
    }

    pub fn pump_offset(&self) -> usize {
        self.net.pipes.len()
    }

    pub fn valve_offset(&self) -> usize {
        self.net.pipes.len() + self.net.pumps.len()
    }

    /// Current valve statuses.
    pub fn statuses(&self) -> Vec<ValveStatus> {
        self.valves.iter().map(|v| v.props.status).collect()
    }

    pub fn set_statuses(&mut self, s: &[ValveStatus]) {
        for (v, &st) in self.valves.iter_mut().zip(s) {
            v.props.status = st;
        }
    }

    /// Maps pruned-link flows back to the unpruned link order (closed links get zero).
    pub fn expand_flows(&self, q: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.full_links];
        for (&orig, &v) in self.kept_links.iter().zip(q) {
            out[orig] = v;
        }
        out
    }

    pub fn restrict_flows(&self, full: &[T]) -> Vec<T> {
        self.kept_links.iter().map(|&l| full[l]).collect()
    }

    pub fn expand_statuses(&self, s: &[ValveStatus]) -> Vec<ValveStatus> {
        let mut out = vec![ValveStatus::Closed; self.full_valves];
        for (&orig, &st) in self.kept_valves.iter().zip(s) {
            out[orig] = st;
        }
        out
    }

    pub fn restrict_statuses(&self, full: &[ValveStatus]) -> Vec<ValveStatus> {
        self.kept_valves.iter().map(|&v| full[v]).collect()
    }
}
