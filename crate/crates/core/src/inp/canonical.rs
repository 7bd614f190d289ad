use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hydraulics::{HeadlossFormula, PddParams};
use crate::inp::parse::{RawNetworkDescription, Record};
use crate::network::{
    Junction, LinkStatus, Network, Pipe, Pump, Reservoir, Tank, Valve, ValveKind, ValveMode,
};
use crate::units::{FlowUnit, UnitSystem};

/// Parameters `(h₀, r, ν)` of the pump law `h = h₀ − r·q^ν` fitted to a curve, in SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCurveFit {
    pub shutoff_head: f64,
    pub coeff: f64,
    pub exponent: f64,
}

fn num(rec: &Record, section: &str, i: usize) -> Result<f64> {
    let s = &rec.fields[i];
    s.parse::<f64>().map_err(|_| Error::MalformedRecord {
        line: rec.line,
        section: section.to_string(),
        reason: format!("field {} '{s}' is not a number", i + 1),
    })
}

fn opt_num(rec: &Record, section: &str, i: usize, default: f64) -> Result<f64> {
    if rec.fields.len() > i {
        num(rec, section, i)
    } else {
        Ok(default)
    }
}

/// Least-squares fit of `ln(h₀ − h) = ln r + ν·ln q` for a known shutoff head.
fn log_fit(h0: f64, pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(q, h) in pts {
        if q <= 0.0 || h0 - h <= 0.0 {
            return None;
        }
        xs.push(q.ln());
        ys.push((h0 - h).ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let nu = sxy / sxx;
    let lnr = my - nu * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - lnr - nu * x).powi(2))
        .sum();
    Some((lnr.exp(), nu, ssr))
}

/// Fits `(h₀, r, ν)` to pump curve points `(q, h)` given in SI.
pub fn fit_pump_curve(pump: &str, pts: &[(f64, f64)]) -> Result<PumpCurveFit> {
    let under = |reason: &str| Error::PumpCurveUnderdetermined {
        pump: pump.to_string(),
        reason: reason.to_string(),
    };
    match pts.len() {
        0 => Err(under("no curve points")),
        1 => {
            let (q, h) = pts[0];
            if q <= 0.0 || h <= 0.0 {
                return Err(under("design point must have positive flow and head"));
            }
            let h0 = 4.0 / 3.0 * h;
            Ok(PumpCurveFit {
                shutoff_head: h0,
                coeff: h0 / (4.0 * q * q),
                exponent: 2.0,
            })
        }
        2 => Err(under("two-point curves do not determine (h0, r, nu)")),
        _ => {
            if pts[0].0 == 0.0 {
                let h0 = pts[0].1;
                let (r, nu, _) = log_fit(h0, &pts[1..])
                    .ok_or_else(|| under("points must fall below the shutoff head"))?;
                return Ok(PumpCurveFit {
                    shutoff_head: h0,
                    coeff: r,
                    exponent: nu,
                });
            }
            // Shutoff head unknown: golden-section search on ln(h₀ − max h). The residual
            // also vanishes as h₀ → ∞ with ν → 0, so exponents ≤ 1 are excluded.
            let hmax = pts.iter().fold(f64::MIN, |m, p| m.max(p.1));
            let cost = |t: f64| match log_fit(hmax + t.exp(), pts) {
                Some((_, nu, ssr)) if nu > 1.0 => ssr,
                _ => f64::INFINITY,
            };
            let (mut a, mut b) = ((hmax * 1e-9).max(1e-12).ln(), (hmax * 100.0).ln());
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if cost(c) < cost(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let h0 = hmax + (0.5 * (a + b)).exp();
            let (r, nu, _) = log_fit(h0, pts).ok_or_else(|| under("curve not decreasing"))?;
            if nu <= 1.0 {
                return Err(under("fitted exponent not above 1"));
            }
            Ok(PumpCurveFit {
                shutoff_head: h0,
                coeff: r,
                exponent: nu,
            })
        }
    }
}

/// Converts a raw description to an SI [`Network`].
pub fn canonicalize(raw: &RawNetworkDescription) -> Result<Network<f64>> {
    let unit: FlowUnit = raw.source_units.parse()?;
    let u = UnitSystem::new(unit);
    let formula = raw.headloss_formula;
    let mut net = Network::empty(unit, formula);
    net.title = raw
        .section("TITLE")
        .iter()
        .map(|r| r.fields[0].clone())
        .collect::<Vec<_>>()
        .join("\n");

    let mut patterns: HashMap<&str, f64> = HashMap::new();
    for rec in raw.section("PATTERNS") {
        if !patterns.contains_key(rec.fields[0].as_str()) {
            patterns.insert(&rec.fields[0], num(rec, "PATTERNS", 1)?);
        }
    }
    let multiplier = |rec: &Record, section: &str, i: usize| -> Result<f64> {
        match rec.fields.get(i) {
            None => Ok(1.0),
            Some(p) => patterns
                .get(p.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownId {
                    line: rec.line,
                    section: section.to_string(),
                    id: p.clone(),
                }),
        }
    };
    let mut curves: HashMap<&str, Vec<(f64, f64)>> = HashMap::new();
    for rec in raw.section("CURVES") {
        let q = u.flow_to_si(num(rec, "CURVES", 1)?);
        let h = u.length_to_si(num(rec, "CURVES", 2)?);
        curves.entry(&rec.fields[0]).or_default().push((q, h));
    }

    let mut pmin = 0.0;
    let mut preq = 0.1;
    let mut pexp = 0.5;
    let mut pda = false;
    for rec in raw.section("OPTIONS") {
        let key: Vec<String> = rec.fields.iter().map(|f| f.to_ascii_uppercase()).collect();
        let last = rec.fields.len() - 1;
        match (key[0].as_str(), key.get(1).map(String::as_str)) {
            ("DEMAND", Some("MODEL")) => pda = key[last] == "PDA",
            ("MINIMUM", Some("PRESSURE")) => pmin = num(rec, "OPTIONS", last)?,
            ("REQUIRED", Some("PRESSURE")) => preq = num(rec, "OPTIONS", last)?,
            ("PRESSURE", Some("EXPONENT")) => pexp = num(rec, "OPTIONS", last)?,
            _ => {}
        }
    }

    let mut node_of: HashMap<String, usize> = HashMap::new();
    for rec in raw.section("JUNCTIONS") {
        let base = opt_num(rec, "JUNCTIONS", 2, 0.0)?;
        net.junctions.push(Junction {
            id: rec.fields[0].clone(),
            elevation: u.length_to_si(num(rec, "JUNCTIONS", 1)?),
            demand: u.flow_to_si(base * multiplier(rec, "JUNCTIONS", 3)?),
            pdd: None,
        });
    }
    let mut demands: HashMap<usize, f64> = HashMap::new();
    let junction_index: HashMap<&str, usize> = raw
        .section("JUNCTIONS")
        .iter()
        .enumerate()
        .map(|(i, r)| (r.fields[0].as_str(), i))
        .collect();
    for rec in raw.section("DEMANDS") {
        let j = *junction_index
            .get(rec.fields[0].as_str())
            .ok_or_else(|| Error::UnknownId {
                line: rec.line,
                section: "DEMANDS".into(),
                id: rec.fields[0].clone(),
            })?;
        let d = num(rec, "DEMANDS", 1)? * multiplier(rec, "DEMANDS", 2)?;
        *demands.entry(j).or_insert(0.0) += u.flow_to_si(d);
    }
    for (j, d) in demands {
        net.junctions[j].demand = d;
    }
    if pda {
        for j in &mut net.junctions {
            if j.demand > 0.0 {
                j.pdd = Some(PddParams {
                    d_dsgn: j.demand,
                    h_ser: j.elevation + u.pressure_to_si(preq),
                    h_min: j.elevation + u.pressure_to_si(pmin),
                    gamma: pexp,
                });
            }
        }
    }
    for rec in raw.section("RESERVOIRS") {
        let head = num(rec, "RESERVOIRS", 1)? * multiplier(rec, "RESERVOIRS", 2)?;
        net.reservoirs.push(Reservoir {
            id: rec.fields[0].clone(),
            head: u.length_to_si(head),
        });
    }
    for rec in raw.section("TANKS") {
        let d = u.length_to_si(num(rec, "TANKS", 5)?);
        let area = std::f64::consts::PI * d * d / 4.0;
        let level = u.length_to_si(num(rec, "TANKS", 2)?);
        net.tanks.push(Tank {
            id: rec.fields[0].clone(),
            elevation: u.length_to_si(num(rec, "TANKS", 1)?),
            area,
            volume: area * level,
            min_level: u.length_to_si(num(rec, "TANKS", 3)?),
            max_level: u.length_to_si(num(rec, "TANKS", 4)?),
        });
    }
    for i in 0..net.node_count() {
        node_of.insert(net.node_id(i).to_string(), i);
    }

    for rec in raw.section("PIPES") {
        let rough = num(rec, "PIPES", 5)?;
        let status = match rec.fields.get(7).map(|s| s.to_ascii_uppercase()) {
            None => LinkStatus::Open,
            Some(s) if s == "OPEN" => LinkStatus::Open,
            Some(s) if s == "CLOSED" => LinkStatus::Closed,
            Some(s) if s == "CV" => {
                log::warn!(
                    "line {}: check valve on pipe {} treated as open",
                    rec.line,
                    rec.fields[0]
                );
                LinkStatus::Open
            }
            Some(s) => {
                return Err(Error::MalformedRecord {
                    line: rec.line,
                    section: "PIPES".into(),
                    reason: format!("unknown status '{s}'"),
                })
            }
        };
        net.pipes.push(Pipe {
            id: rec.fields[0].clone(),
            from: node_of[&rec.fields[1]],
            to: node_of[&rec.fields[2]],
            length: u.length_to_si(num(rec, "PIPES", 3)?),
            diameter: u.diameter_to_si(num(rec, "PIPES", 4)?),
            roughness: if formula == HeadlossFormula::DarcyWeisbach {
                rough * u.roughness_dw
            } else {
                rough
            },
            minor_loss: opt_num(rec, "PIPES", 6, 0.0)?,
            status,
        });
    }

    for rec in raw.section("PUMPS") {
        let id = rec.fields[0].clone();
        let mut curve = None;
        let mut speed = 1.0;
        let mut i = 3;
        while i < rec.fields.len() {
            let key = rec.fields[i].to_ascii_uppercase();
            let Some(val) = rec.fields.get(i + 1) else {
                return Err(Error::MalformedRecord {
                    line: rec.line,
                    section: "PUMPS".into(),
                    reason: format!("keyword {key} without value"),
                });
            };
            match key.as_str() {
                "HEAD" => curve = Some(val.clone()),
                "SPEED" => speed = num(rec, "PUMPS", i + 1)?,
                "PATTERN" => {}
                _ => {
                    return Err(Error::MalformedRecord {
                        line: rec.line,
                        section: "PUMPS".into(),
                        reason: format!("unsupported pump keyword {key}"),
                    })
                }
            }
            i += 2;
        }
        let pts = match &curve {
            None => Vec::new(),
            Some(c) => curves
                .get(c.as_str())
                .cloned()
                .ok_or_else(|| Error::UnknownId {
                    line: rec.line,
                    section: "PUMPS".into(),
                    id: c.clone(),
                })?,
        };
        let fit = fit_pump_curve(&id, &pts)?;
        net.pumps.push(Pump {
            id,
            from: node_of[&rec.fields[1]],
            to: node_of[&rec.fields[2]],
            shutoff_head: fit.shutoff_head,
            coeff: fit.coeff,
            exponent: fit.exponent,
            speed,
            status: LinkStatus::Open,
        });
    }

    for rec in raw.section("VALVES") {
        let kind = match rec.fields[4].to_ascii_uppercase().as_str() {
            "PRV" => ValveKind::Prv,
            "FCV" => ValveKind::Fcv,
            "GPV" => ValveKind::Gpv,
            other => {
                return Err(Error::MalformedRecord {
                    line: rec.line,
                    section: "VALVES".into(),
                    reason: format!("unsupported valve type {other}"),
                })
            }
        };
        let raw_setting = num(rec, "VALVES", 5)?;
        let (setting, openness) = match kind {
            ValveKind::Prv => (u.pressure_to_si(raw_setting), 1.0),
            ValveKind::Fcv => (u.flow_to_si(raw_setting), 1.0),
            ValveKind::Gpv => (0.0, raw_setting),
        };
        net.valves.push(Valve {
            id: rec.fields[0].clone(),
            from: node_of[&rec.fields[1]],
            to: node_of[&rec.fields[2]],
            kind,
            diameter: u.diameter_to_si(num(rec, "VALVES", 3)?),
            openness,
            minor_loss: opt_num(rec, "VALVES", 6, 0.0)?,
            setting,
            mode: ValveMode::Auto,
        });
    }

    let link_of = net.link_index();
    let (np, nm) = (net.pipes.len(), net.pumps.len());
    for rec in raw.section("STATUS") {
        let &l = link_of
            .get(&rec.fields[0])
            .ok_or_else(|| Error::UnknownId {
                line: rec.line,
                section: "STATUS".into(),
                id: rec.fields[0].clone(),
            })?;
        let word = rec.fields[1].to_ascii_uppercase();
        let bad = || Error::MalformedRecord {
            line: rec.line,
            section: "STATUS".into(),
            reason: format!("unsupported status '{}'", rec.fields[1]),
        };
        if l < np {
            net.pipes[l].status = match word.as_str() {
                "OPEN" => LinkStatus::Open,
                "CLOSED" => LinkStatus::Closed,
                _ => return Err(bad()),
            };
        } else if l < np + nm {
            let p = &mut net.pumps[l - np];
            match word.as_str() {
                "OPEN" => p.status = LinkStatus::Open,
                "CLOSED" => p.status = LinkStatus::Closed,
                _ => {
                    p.speed = num(rec, "STATUS", 1)?;
                    p.status = LinkStatus::Open;
                }
            }
        } else {
            let v = &mut net.valves[l - np - nm];
            match word.as_str() {
                "OPEN" => v.mode = ValveMode::Open,
                "CLOSED" => v.mode = ValveMode::Closed,
                "ACTIVE" => v.mode = ValveMode::Auto,
                _ => {
                    let x = num(rec, "STATUS", 1)?;
                    match v.kind {
                        ValveKind::Prv => v.setting = u.pressure_to_si(x),
                        ValveKind::Fcv => v.setting = u.flow_to_si(x),
                        ValveKind::Gpv => return Err(bad()),
                    }
                    v.mode = ValveMode::Auto;
                }
            }
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inp::parse_inp;

    #[test]
    fn one_point_curve_reproduces_design_point() {
        let fit = fit_pump_curve("P", &[(0.05, 60.0)]).unwrap();
        assert!((fit.shutoff_head - 80.0).abs() < 1e-12);
        assert_eq!(fit.exponent, 2.0);
        let h = fit.shutoff_head - fit.coeff * 0.05f64.powf(fit.exponent);
        assert!((h - 60.0).abs() < 1e-9);
        // zero head at twice the design flow
        assert!((fit.shutoff_head - fit.coeff * 0.1f64.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn three_point_curves() {
        let (h0, r, nu) = (120.0, 900.0, 2.59);
        let h = |q: f64| h0 - r * q.powf(nu);
        let with_zero =
            fit_pump_curve("P", &[(0.0, h0), (0.04, h(0.04)), (0.08, h(0.08))]).unwrap();
        assert!((with_zero.shutoff_head - h0).abs() < 1e-12);
        assert!((with_zero.coeff - r).abs() / r < 1e-9);
        assert!((with_zero.exponent - nu).abs() < 1e-9);
        let no_zero =
            fit_pump_curve("P", &[(0.02, h(0.02)), (0.05, h(0.05)), (0.09, h(0.09))]).unwrap();
        assert!((no_zero.shutoff_head - h0).abs() < 1e-4, "{no_zero:?}");
        assert!((no_zero.exponent - nu).abs() < 1e-4);
    }

    #[test]
    fn underdetermined_curves() {
        assert!(matches!(
            fit_pump_curve("P", &[]),
            Err(Error::PumpCurveUnderdetermined { .. })
        ));
        assert!(matches!(
            fit_pump_curve("P", &[(0.0, 10.0), (1.0, 5.0)]),
            Err(Error::PumpCurveUnderdetermined { .. })
        ));
    }

    #[test]
    fn pipe_record_fields() {
        let text = "[JUNCTIONS]\nJ1 0\nJ2 0 1\n[RESERVOIRS]\nR 10\n[PIPES]\nP1 J1 J2 304.8 304 100 0 Open\nP0 R J1 10 100 100\n[OPTIONS]\nUNITS LPS\n";
        let net = canonicalize(&parse_inp(text).unwrap()).unwrap();
        let p = &net.pipes[0];
        assert_eq!(p.id, "P1");
        assert_eq!((net.node_id(p.from), net.node_id(p.to)), ("J1", "J2"));
        assert_eq!(p.length, 304.8);
        assert!((p.diameter - 0.304).abs() < 1e-15);
        assert_eq!(p.roughness, 100.0);
        assert!((net.junctions[1].demand - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn unknown_unit() {
        let raw = parse_inp("[RESERVOIRS]\nR 1\n[OPTIONS]\nUNITS BARRELS\n").unwrap();
        assert!(matches!(canonicalize(&raw), Err(Error::UnknownUnit(_))));
    }
}
