use std::fmt::Write;

use crate::hydraulics::HeadlossFormula;
use crate::network::{LinkStatus, Network, ValveKind, ValveMode};

/// Serializes a network to `.inp` text in its source units.
///
/// Pump laws are written as exact three-point curves and pressure-driven demand
/// parameters as global options taken from the first junction that carries them.
pub fn write_inp(net: &Network<f64>) -> String {
    let u = net.units;
    let mut s = String::new();
    let mut w = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    w("[TITLE]".into());
    for line in net.title.lines() {
        w(line.to_string());
    }
    w(String::new());
    w("[JUNCTIONS]".into());
    for j in &net.junctions {
        w(format!(
            "{} {} {}",
            j.id,
            u.length_from_si(j.elevation),
            u.flow_from_si(j.demand)
        ));
    }
    w(String::new());
    w("[RESERVOIRS]".into());
    for r in &net.reservoirs {
        w(format!("{} {}", r.id, u.length_from_si(r.head)));
    }
    w(String::new());
    w("[TANKS]".into());
    for t in &net.tanks {
        let d = (4.0 * t.area / std::f64::consts::PI).sqrt();
        w(format!(
            "{} {} {} {} {} {} 0",
            t.id,
            u.length_from_si(t.elevation),
            u.length_from_si(t.level()),
            u.length_from_si(t.min_level),
            u.length_from_si(t.max_level),
            u.length_from_si(d)
        ));
    }
    w(String::new());
    w("[PIPES]".into());
    for p in &net.pipes {
        let rough = if net.headloss == HeadlossFormula::DarcyWeisbach {
            p.roughness / u.roughness_dw
        } else {
            p.roughness
        };
        let status = match p.status {
            LinkStatus::Open => "Open",
            LinkStatus::Closed => "Closed",
        };
        w(format!(
            "{} {} {} {} {} {} {} {}",
            p.id,
            net.node_id(p.from),
            net.node_id(p.to),
            u.length_from_si(p.length),
            u.diameter_from_si(p.diameter),
            rough,
            p.minor_loss,
            status
        ));
    }
    w(String::new());
    w("[PUMPS]".into());
    for p in &net.pumps {
        let mut line = format!(
            "{} {} {} HEAD curve_{}",
            p.id,
            net.node_id(p.from),
            net.node_id(p.to),
            p.id
        );
        if p.speed != 1.0 {
            let _ = write!(line, " SPEED {}", p.speed);
        }
        w(line);
    }
    w(String::new());
    w("[CURVES]".into());
    for p in &net.pumps {
        let qmax = (p.shutoff_head / p.coeff).powf(p.exponent.recip());
        for q in [0.0, 0.4 * qmax, 0.8 * qmax] {
            let h = p.shutoff_head - p.coeff * q.powf(p.exponent);
            w(format!(
                "curve_{} {} {}",
                p.id,
                u.flow_from_si(q),
                u.length_from_si(h)
            ));
        }
    }
    w(String::new());
    w("[VALVES]".into());
    for v in &net.valves {
        let (kind, setting) = match v.kind {
            ValveKind::Prv => ("PRV", u.pressure_from_si(v.setting)),
            ValveKind::Fcv => ("FCV", u.flow_from_si(v.setting)),
            ValveKind::Gpv => ("GPV", v.openness),
        };
        w(format!(
            "{} {} {} {} {} {} {}",
            v.id,
            net.node_id(v.from),
            net.node_id(v.to),
            u.diameter_from_si(v.diameter),
            kind,
            setting,
            v.minor_loss
        ));
    }
    w(String::new());
    w("[STATUS]".into());
    for p in &net.pumps {
        if p.status == LinkStatus::Closed {
            w(format!("{} Closed", p.id));
        }
    }
    for v in &net.valves {
        match v.mode {
            ValveMode::Open => w(format!("{} Open", v.id)),
            ValveMode::Closed => w(format!("{} Closed", v.id)),
            ValveMode::Auto => {}
        }
    }
    w(String::new());
    w("[OPTIONS]".into());
    w(format!("Units {}", u.flow_unit));
    w(format!("Headloss {}", net.headloss));
    if let Some((j, p)) = net.junctions.iter().find_map(|j| j.pdd.map(|p| (j, p))) {
        w("Demand Model PDA".into());
        w(format!(
            "Minimum Pressure {}",
            u.pressure_from_si(p.h_min - j.elevation)
        ));
        w(format!(
            "Required Pressure {}",
            u.pressure_from_si(p.h_ser - j.elevation)
        ));
        w(format!("Pressure Exponent {}", p.gamma));
    }
    w(String::new());
    w("[END]".into());
    s
}

#[cfg(test)]
mod tests {
    use crate::fixtures;
    use crate::inp::{read_network, write_inp};
    use crate::network::Network;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12)
    }

    pub(crate) fn networks_match(a: &Network<f64>, b: &Network<f64>) -> bool {
        a.counts() == b.counts()
            && a.junctions.iter().zip(&b.junctions).all(|(x, y)| {
                x.id == y.id
                    && close(x.elevation, y.elevation)
                    && close(x.demand, y.demand)
                    && x.pdd.is_some() == y.pdd.is_some()
            })
            && a.reservoirs
                .iter()
                .zip(&b.reservoirs)
                .all(|(x, y)| x.id == y.id && close(x.head, y.head))
            && a.tanks.iter().zip(&b.tanks).all(|(x, y)| {
                x.id == y.id
                    && close(x.area, y.area)
                    && close(x.volume, y.volume)
                    && close(x.elevation, y.elevation)
            })
            && a.pipes.iter().zip(&b.pipes).all(|(x, y)| {
                x.id == y.id
                    && (x.from, x.to) == (y.from, y.to)
                    && close(x.length, y.length)
                    && close(x.diameter, y.diameter)
                    && close(x.roughness, y.roughness)
                    && x.status == y.status
            })
            && a.pumps.iter().zip(&b.pumps).all(|(x, y)| {
                x.id == y.id
                    && close(x.shutoff_head, y.shutoff_head)
                    && (x.coeff - y.coeff).abs() <= 1e-8 * x.coeff
                    && (x.exponent - y.exponent).abs() <= 1e-9 * x.exponent
                    && close(x.speed, y.speed)
            })
            && a.valves.iter().zip(&b.valves).all(|(x, y)| {
                x.id == y.id
                    && x.kind == y.kind
                    && x.mode == y.mode
                    && close(x.setting + 1.0, y.setting + 1.0)
                    && close(x.openness, y.openness)
            })
    }

    #[test]
    fn shipped_fixtures_round_trip() {
        for f in fixtures::all() {
            let net = read_network(f.inp).unwrap();
            let again = read_network(&write_inp(&net)).unwrap();
            assert!(networks_match(&net, &again), "{}", f.name);
            let thrice = read_network(&write_inp(&again)).unwrap();
            assert!(networks_match(&again, &thrice), "{}", f.name);
        }
    }
}
