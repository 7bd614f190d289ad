use serde::Serialize;

use crate::network::{prune_closed, Network, ValveKind};
use crate::scalar::Scalar;

/// Largest relative pump speed accepted.
pub const MAX_SPEED: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeViolation {
    pub element: String,
    pub field: String,
    pub value: f64,
    pub reason: String,
}

/// Structural and parameter diagnostics for a network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Node ids per connected component over the open links.
    pub components: Vec<Vec<String>>,
    /// Indices into `components` of components without a reservoir or tank.
    pub ungrounded: Vec<usize>,
    pub range_violations: Vec<RangeViolation>,
    pub overall_ok: bool,
}

impl ValidationReport {
    pub fn reasons(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .ungrounded
            .iter()
            .map(|&c| {
                format!(
                    "no fixed-head node in component {{{}}}",
                    self.components[c].join(", ")
                )
            })
            .collect();
        out.extend(
            self.range_violations
                .iter()
                .map(|v| format!("{}.{} = {}: {}", v.element, v.field, v.value, v.reason)),
        );
        out
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn validate<T: Scalar>(net: &Network<T>) -> ValidationReport {
    let open = prune_closed(net).network;
    let n = net.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    for l in 0..open.link_count() {
        let (f, t) = open.link_ends(l);
        let (a, b) = (find(&mut parent, f), find(&mut parent, t));
        if a != b {
            parent[a] = b;
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut components: Vec<Vec<String>> = Vec::new();
    let mut grounded: Vec<bool> = Vec::new();
    for node in 0..n {
        let r = find(&mut parent, node);
        let c = match roots.iter().position(|&x| x == r) {
            Some(c) => c,
            None => {
                roots.push(r);
                components.push(Vec::new());
                grounded.push(false);
                roots.len() - 1
            }
        };
        components[c].push(net.node_id(node).to_string());
        grounded[c] |= net.fixed_head(node).is_some();
    }
    let ungrounded: Vec<usize> = (0..components.len()).filter(|&c| !grounded[c]).collect();

    let mut v = Vec::new();
    let mut check = |ok: bool, element: &str, field: &str, value: T, reason: &str| {
        if !ok {
            v.push(RangeViolation {
                element: element.to_string(),
                field: field.to_string(),
                value: value.to_f64_lossy(),
                reason: reason.to_string(),
            });
        }
    };
    let zero = T::zero();
    for j in &net.junctions {
        check(
            j.demand.is_finite(),
            &j.id,
            "demand",
            j.demand,
            "must be finite",
        );
        if let Some(p) = &j.pdd {
            check(
                p.h_ser > p.h_min,
                &j.id,
                "h_ser",
                p.h_ser,
                "must exceed h_min",
            );
            check(
                p.d_dsgn >= zero,
                &j.id,
                "d_dsgn",
                p.d_dsgn,
                "must be non-negative",
            );
            check(p.gamma > zero, &j.id, "gamma", p.gamma, "must be positive");
        }
    }
    for t in &net.tanks {
        check(t.area > zero, &t.id, "area", t.area, "must be positive");
        check(
            t.volume >= zero,
            &t.id,
            "volume",
            t.volume,
            "must be non-negative",
        );
    }
    for p in &net.pipes {
        check(
            p.length > zero,
            &p.id,
            "length",
            p.length,
            "must be positive",
        );
        check(
            p.diameter > zero,
            &p.id,
            "diameter",
            p.diameter,
            "must be positive",
        );
        check(
            p.roughness > zero,
            &p.id,
            "roughness",
            p.roughness,
            "must be positive",
        );
    }
    for m in &net.pumps {
        check(
            m.shutoff_head > zero,
            &m.id,
            "h0",
            m.shutoff_head,
            "must be positive",
        );
        check(m.coeff > zero, &m.id, "r", m.coeff, "must be positive");
        check(
            m.exponent > T::one(),
            &m.id,
            "nu",
            m.exponent,
            "must exceed 1",
        );
        check(
            m.speed > zero && m.speed <= T::of(MAX_SPEED),
            &m.id,
            "speed",
            m.speed,
            "must lie in (0, s_max]",
        );
    }
    for w in &net.valves {
        check(
            w.diameter > zero,
            &w.id,
            "diameter",
            w.diameter,
            "must be positive",
        );
        check(
            w.minor_loss >= zero,
            &w.id,
            "minor_loss",
            w.minor_loss,
            "must be non-negative",
        );
        match w.kind {
            ValveKind::Gpv => {
                check(
                    w.openness > zero && w.openness <= T::one(),
                    &w.id,
                    "openness",
                    w.openness,
                    "must lie in (0, 1]",
                );
                check(
                    w.minor_loss > zero,
                    &w.id,
                    "minor_loss",
                    w.minor_loss,
                    "GPV needs a positive loss coefficient",
                );
            }
            ValveKind::Fcv => check(
                w.setting >= zero,
                &w.id,
                "setting",
                w.setting,
                "flow setting must be non-negative",
            ),
            ValveKind::Prv => {}
        }
    }
    let overall_ok = ungrounded.is_empty() && v.is_empty();
    ValidationReport {
        components,
        ungrounded,
        range_violations: v,
        overall_ok,
    }
}
