//! Shipped test networks with expected values, and a random looped-network generator.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulics::HeadlossFormula;
use crate::inp::read_network;
use crate::network::{Junction, LinkStatus, Network, Pipe, Pump, Reservoir};
use crate::units::FlowUnit;

/// One expected quantity, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValue {
    /// `"head"` or `"flow"`.
    pub kind: String,
    pub id: String,
    pub value: f64,
    pub tolerance: f64,
    /// Where the value comes from: a published table or an in-repo oracle.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub values: Vec<ExpectedValue>,
}

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub inp: &'static str,
    pub expected_json: &'static str,
}

impl Fixture {
    pub fn network(&self) -> Result<Network<f64>> {
        read_network(self.inp)
    }

    pub fn expected(&self) -> Result<Expected> {
        Ok(serde_json::from_str(self.expected_json)?)
    }
}

pub const THREE_NODE: Fixture = Fixture {
    name: "three_node",
    inp: include_str!("../fixtures/three_node.inp"),
    expected_json: include_str!("../fixtures/three_node.expected.json"),
};

pub const EIGHT_NODE_PRV: Fixture = Fixture {
    name: "eight_node_prv",
    inp: include_str!("../fixtures/eight_node_prv.inp"),
    expected_json: include_str!("../fixtures/eight_node_prv.expected.json"),
};

pub const ANYTOWN_LIKE: Fixture = Fixture {
    name: "anytown_like",
    inp: include_str!("../fixtures/anytown_like.inp"),
    expected_json: include_str!("../fixtures/anytown_like.expected.json"),
};

pub fn all() -> [Fixture; 3] {
    [THREE_NODE, EIGHT_NODE_PRV, ANYTOWN_LIKE]
}

pub fn by_name(name: &str) -> Option<Fixture> {
    all().into_iter().find(|f| f.name == name)
}

/// Largest head-loss slope `1.852·R·q^0.852` (m per L/s) the generator allows on any pipe,
/// with `q` estimated from the demand carried along the spanning tree.
pub const GENERATOR_MAX_SLOPE: f64 = 1.2;
const HW_C: f64 = 100.0;

/// Random looped network in L/s units.
///
/// Pipes form a random spanning tree over the junctions, plus `round(loop_fraction·n_junctions)`
/// extra pipes that close loops. Reservoir `R0` feeds junction `J1` through pump `PU0`. Resistances are spread log-uniformly (stratified, then shuffled)
/// over `r_spread` decades; one network-wide factor then scales them so the steepest pipe has
/// slope [`GENERATOR_MAX_SLOPE`].
pub fn generate_random_network(
    seed: u64,
    n_junctions: usize,
    loop_fraction: f64,
    r_spread: f64,
) -> Result<Network<f64>> {
    if n_junctions < 2 {
        return Err(Error::InfeasibleSpec(format!(
            "need at least 2 junctions, got {n_junctions}"
        )));
    }
    if !(loop_fraction.is_finite() && loop_fraction >= 0.0) {
        return Err(Error::InfeasibleSpec(format!(
            "loop fraction {loop_fraction} is not a non-negative number"
        )));
    }
    if !(r_spread.is_finite() && r_spread >= 0.0) {
        return Err(Error::InfeasibleSpec(format!(
            "resistance spread {r_spread} is not a non-negative number"
        )));
    }
    let n = n_junctions;
    let extra = (loop_fraction * n as f64).round() as usize;
    let capacity = n * (n - 1) / 2 - (n - 1);
    if extra > capacity {
        return Err(Error::InfeasibleSpec(format!(
            "{extra} loop pipes requested but only {capacity} junction pairs are free"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::empty(FlowUnit::Lps, HeadlossFormula::HazenWilliams);
    net.title = format!("random network seed {seed}");
    for j in 0..n {
        net.junctions.push(Junction {
            id: format!("J{}", j + 1),
            elevation: rng.gen_range(0.0..30.0),
            demand: rng.gen_range(1.0..10.0) / 1000.0,
            pdd: None,
        });
    }
    net.reservoirs.push(Reservoir {
        id: "R0".into(),
        head: 40.0,
    });
    let total: f64 = net.junctions.iter().map(|j| j.demand).sum();
    let q_max = 10.0 * total;
    net.pumps.push(Pump {
        id: "PU0".into(),
        from: n,
        to: 0,
        shutoff_head: 60.0,
        coeff: 60.0 / (q_max * q_max),
        exponent: 2.0,
        speed: 1.0,
        status: LinkStatus::Open,
    });
    let mut edges: Vec<(usize, usize)> = (1..n).map(|k| (rng.gen_range(0..k), k)).collect();
    if extra > 0 {
        let mut used: HashSet<(usize, usize)> = edges.iter().copied().collect();
        // Dense requests enumerate the free pairs; sparse ones sample by rejection.
        if extra * 4 > capacity {
            let mut free: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .filter(|e| !used.contains(e))
                .collect();
            free.shuffle(&mut rng);
            edges.extend(free.into_iter().take(extra));
        } else {
            while edges.len() < n - 1 + extra {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                let e = (a.min(b), a.max(b));
                if a != b && used.insert(e) {
                    edges.push(e);
                }
            }
        }
    }
    let m = edges.len();
    let mut strata: Vec<f64> = (0..m)
        .map(|k| (k as f64 + rng.gen::<f64>()) / m as f64)
        .collect();
    strata.shuffle(&mut rng);
    // Demand carried by each tree pipe (L/s); loop pipes get the mean junction demand.
    let mut carried: Vec<f64> = net.junctions.iter().map(|j| j.demand * 1000.0).collect();
    for k in (1..n).rev() {
        let parent = edges[k - 1].0;
        carried[parent] += carried[k];
    }
    let mean = total * 1000.0 / n as f64;
    let flow = |i: usize| if i < n - 1 { carried[i + 1] } else { mean };
    let shape: Vec<f64> = strata.iter().map(|u| 10f64.powf(-r_spread * u)).collect();
    let steepest = (0..m)
        .map(|i| 1.852 * shape[i] * flow(i).powf(0.852))
        .fold(0.0, f64::max);
    let base = GENERATOR_MAX_SLOPE / steepest;
    let kappa: f64 = 1000.0;
    for (i, (&(a, b), r)) in edges.iter().zip(&shape).enumerate() {
        let r_si = base * r * kappa.powf(1.852);
        let length: f64 = rng.gen_range(100.0..1000.0);
        let diameter = (10.667 * length * HW_C.powf(-1.852) / r_si).powf(1.0 / 4.871);
        net.pipes.push(Pipe {
            id: format!("P{}", i + 1),
            from: a,
            to: b,
            length,
            diameter,
            roughness: HW_C,
            minor_loss: 0.0,
            status: LinkStatus::Open,
        });
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydraulics::pipe_resistance;
    use crate::network::validate;

    #[test]
    fn fixtures_parse_and_have_expectations() {
        for f in all() {
            let net = f.network().unwrap();
            assert!(validate(&net).overall_ok, "{}", f.name);
            f.expected().unwrap();
        }
    }

    #[test]
    fn tree_without_loops() {
        let net = generate_random_network(1, 10, 0.0, 1.0).unwrap();
        assert_eq!(net.pipes.len(), 9);
        assert_eq!(net.junctions.len(), 10);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_random_network(7, 25, 0.3, 2.0).unwrap();
        let b = generate_random_network(7, 25, 0.3, 2.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_random_network(8, 25, 0.3, 2.0).unwrap());
    }

    #[test]
    fn resistance_spread_matches_decades() {
        for seed in 0..20 {
            let net = generate_random_network(seed, 10, 0.0, 3.0).unwrap();
            let r: Vec<f64> = net
                .pipes
                .iter()
                .map(|p| {
                    pipe_resistance(
                        p.length,
                        p.diameter,
                        p.roughness,
                        HeadlossFormula::HazenWilliams,
                    )
                    .unwrap()
                })
                .collect();
            let ratio = r.iter().cloned().fold(0.0, f64::max)
                / r.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((1e2..=1e4).contains(&ratio), "seed {seed}: {ratio}");
        }
    }

    #[test]
    fn infeasible_loop_count() {
        assert!(matches!(
            generate_random_network(1, 4, 10.0, 1.0),
            Err(Error::InfeasibleSpec(_))
        ));
        assert!(matches!(
            generate_random_network(1, 1, 0.0, 1.0),
            Err(Error::InfeasibleSpec(_))
        ));
        // Complete graph on 4 junctions: 6 pairs, 3 in the tree.
        assert_eq!(
            generate_random_network(1, 4, 0.75, 1.0)
                .unwrap()
                .pipes
                .len(),
            6
        );
    }
}
