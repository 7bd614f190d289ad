//! Typed network graph.
//!
//! Nodes are indexed globally as junctions, then reservoirs, then tanks. Links are
//! indexed as pipes, then pumps, then valves. Every link runs from its `.inp`
//! from-node to its to-node; that direction is fixed after construction.

mod incidence;
mod prune;
mod validate;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::hydraulics::{HeadlossFormula, PddParams};
use crate::scalar::Scalar;
use crate::units::{FlowUnit, UnitSystem};

pub use incidence::{build_incidence, IncidencePartition};
pub use prune::{prune_closed, PruneOutcome};
pub use validate::{validate, RangeViolation, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Junction,
    Reservoir,
    Tank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Pipe,
    Pump,
    Valve,
}

/// Initial status of a pipe or pump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LinkStatus {
    #[default]
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ValveKind {
    Gpv,
    Prv,
    Fcv,
}

/// How a valve's status is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ValveMode {
    /// Status follows the hydraulics (OPEN or ACTIVE).
    #[default]
    Auto,
    /// Forced fully open.
    Open,
    /// Removed from the network.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction<T> {
    pub id: String,
    pub elevation: T,
    /// Demand in m³/s (design demand when `pdd` is set).
    pub demand: T,
    pub pdd: Option<PddParams<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir<T> {
    pub id: String,
    pub head: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tank<T> {
    pub id: String,
    pub elevation: T,
    pub area: T,
    pub volume: T,
    pub min_level: T,
    pub max_level: T,
}

impl<T: Scalar> Tank<T> {
    pub fn head(&self) -> T {
        tank_head(self.volume, self.area, self.elevation)
    }
    pub fn level(&self) -> T {
        self.volume / self.area
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe<T> {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length: T,
    pub diameter: T,
    pub roughness: T,
    pub minor_loss: T,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pump<T> {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub shutoff_head: T,
    pub coeff: T,
    pub exponent: T,
    pub speed: T,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valve<T> {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub kind: ValveKind,
    pub diameter: T,
    /// Openness in (0, 1]; only meaningful for GPVs.
    pub openness: T,
    /// Minor-loss coefficient K from the file.
    pub minor_loss: T,
    /// PRV: pressure setting in m of head. FCV: flow setting in m³/s. GPV: unused.
    pub setting: T,
    pub mode: ValveMode,
}

/// Water distribution network in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    pub title: String,
    /// Units of the source file (results are always SI).
    pub units: UnitSystem,
    pub headloss: HeadlossFormula,
    pub junctions: Vec<Junction<T>>,
    pub reservoirs: Vec<Reservoir<T>>,
    pub tanks: Vec<Tank<T>>,
    pub pipes: Vec<Pipe<T>>,
    pub pumps: Vec<Pump<T>>,
    pub valves: Vec<Valve<T>>,
}

/// Head of a tank holding volume `v` over area `area` with bottom elevation `elevation`.
pub fn tank_head<T: Scalar>(v: T, area: T, elevation: T) -> T {
    v / area + elevation
}

/// Component counts of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub junctions: usize,
    pub reservoirs: usize,
    pub tanks: usize,
    pub pipes: usize,
    pub pumps: usize,
    pub valves: usize,
}

impl Counts {
    pub fn heads(&self) -> usize {
        self.junctions + self.reservoirs + self.tanks
    }
    pub fn flows(&self) -> usize {
        self.pipes + self.pumps + self.valves
    }
    pub fn variables(&self) -> usize {
        self.heads() + self.flows()
    }
}

impl<T: Scalar> Network<T> {
    pub fn empty(units: FlowUnit, headloss: HeadlossFormula) -> Self {
        Network {
            title: String::new(),
            units: UnitSystem::new(units),
            headloss,
            junctions: Vec::new(),
            reservoirs: Vec::new(),
            tanks: Vec::new(),
            pipes: Vec::new(),
            pumps: Vec::new(),
            valves: Vec::new(),
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            junctions: self.junctions.len(),
            reservoirs: self.reservoirs.len(),
            tanks: self.tanks.len(),
            pipes: self.pipes.len(),
            pumps: self.pumps.len(),
            valves: self.valves.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.counts().heads()
    }

    pub fn link_count(&self) -> usize {
        self.counts().flows()
    }

    pub fn node_kind(&self, node: usize) -> NodeKind {
        let nj = self.junctions.len();
        let nr = self.reservoirs.len();
        if node < nj {
            NodeKind::Junction
        } else if node < nj + nr {
            NodeKind::Reservoir
        } else {
            NodeKind::Tank
        }
    }

    pub fn node_id(&self, node: usize) -> &str {
        let nj = self.junctions.len();
        let nr = self.reservoirs.len();
        if node < nj {
            &self.junctions[node].id
        } else if node < nj + nr {
            &self.reservoirs[node - nj].id
        } else {
            &self.tanks[node - nj - nr].id
        }
    }

    pub fn link_kind(&self, link: usize) -> LinkKind {
        let np = self.pipes.len();
        let nm = self.pumps.len();
        if link < np {
            LinkKind::Pipe
        } else if link < np + nm {
            LinkKind::Pump
        } else {
            LinkKind::Valve
        }
    }

    pub fn link_id(&self, link: usize) -> &str {
        let np = self.pipes.len();
        let nm = self.pumps.len();
        if link < np {
            &self.pipes[link].id
        } else if link < np + nm {
            &self.pumps[link - np].id
        } else {
            &self.valves[link - np - nm].id
        }
    }

    /// `(from, to)` node indices of a link.
    pub fn link_ends(&self, link: usize) -> (usize, usize) {
        let np = self.pipes.len();
        let nm = self.pumps.len();
        if link < np {
            (self.pipes[link].from, self.pipes[link].to)
        } else if link < np + nm {
            let p = &self.pumps[link - np];
            (p.from, p.to)
        } else {
            let v = &self.valves[link - np - nm];
            (v.from, v.to)
        }
    }

    pub fn link_closed(&self, link: usize) -> bool {
        let np = self.pipes.len();
        let nm = self.pumps.len();
        if link < np {
            self.pipes[link].status == LinkStatus::Closed
        } else if link < np + nm {
            self.pumps[link - np].status == LinkStatus::Closed
        } else {
            self.valves[link - np - nm].mode == ValveMode::Closed
        }
    }

    /// Head of a reservoir or tank; `None` for junctions.
    pub fn fixed_head(&self, node: usize) -> Option<T> {
        let nj = self.junctions.len();
        let nr = self.reservoirs.len();
        if node < nj {
            None
        } else if node < nj + nr {
            Some(self.reservoirs[node - nj].head)
        } else {
            Some(self.tanks[node - nj - nr].head())
        }
    }

    /// Ground elevation used to convert pressure settings to heads.
    pub fn elevation(&self, node: usize) -> T {
        let nj = self.junctions.len();
        let nr = self.reservoirs.len();
        if node < nj {
            self.junctions[node].elevation
        } else if node < nj + nr {
            self.reservoirs[node - nj].head
        } else {
            self.tanks[node - nj - nr].elevation
        }
    }

    pub fn node_index(&self) -> IndexMap<String, usize> {
        (0..self.node_count())
            .map(|i| (self.node_id(i).to_string(), i))
            .collect()
    }

    pub fn link_index(&self) -> IndexMap<String, usize> {
        (0..self.link_count())
            .map(|i| (self.link_id(i).to_string(), i))
            .collect()
    }

    /// Converts every quantity to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let c = |x: T| U::of(x.to_f64_lossy());
        Network {
            title: self.title.clone(),
            units: self.units,
            headloss: self.headloss,
            junctions: self
                .junctions
                .iter()
                .map(|j| Junction {
                    id: j.id.clone(),
                    elevation: c(j.elevation),
                    demand: c(j.demand),
                    pdd: j.pdd.map(|p| PddParams {
                        d_dsgn: c(p.d_dsgn),
                        h_ser: c(p.h_ser),
                        h_min: c(p.h_min),
                        gamma: c(p.gamma),
                    }),
                })
                .collect(),
            reservoirs: self
                .reservoirs
                .iter()
                .map(|r| Reservoir {
                    id: r.id.clone(),
                    head: c(r.head),
                })
                .collect(),
            tanks: self
                .tanks
                .iter()
                .map(|t| Tank {
                    id: t.id.clone(),
                    elevation: c(t.elevation),
                    area: c(t.area),
                    volume: c(t.volume),
                    min_level: c(t.min_level),
                    max_level: c(t.max_level),
                })
                .collect(),
            pipes: self
                .pipes
                .iter()
                .map(|p| Pipe {
                    id: p.id.clone(),
                    from: p.from,
                    to: p.to,
                    length: c(p.length),
                    diameter: c(p.diameter),
                    roughness: c(p.roughness),
                    minor_loss: c(p.minor_loss),
                    status: p.status,
                })
                .collect(),
            pumps: self
                .pumps
                .iter()
                .map(|p| Pump {
                    id: p.id.clone(),
                    from: p.from,
                    to: p.to,
                    shutoff_head: c(p.shutoff_head),
                    coeff: c(p.coeff),
                    exponent: c(p.exponent),
                    speed: c(p.speed),
                    status: p.status,
                })
                .collect(),
            valves: self
                .valves
                .iter()
                .map(|v| Valve {
                    id: v.id.clone(),
                    from: v.from,
                    to: v.to,
                    kind: v.kind,
                    diameter: c(v.diameter),
                    openness: c(v.openness),
                    minor_loss: c(v.minor_loss),
                    setting: c(v.setting),
                    mode: v.mode,
                })
                .collect(),
        }
    }
}
