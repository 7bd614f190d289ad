//! Independent checks: nonlinear residuals, a damped Newton solver, and error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulics::{
    head_loss_pipe, pdd_demand, pdd_demand_slope, pump_head_change, PipeProps, ValveLaw,
    ValveStatus,
};
use crate::linalg::{CsrMatrix, Factorization};
use crate::model::{Model, PipeLaw};
use crate::network::Network;
use crate::scalar::{norm2, norm_inf, signed_pow, Scalar};
use crate::solver::StatusTracker;
use crate::state::HydraulicState;

/// Regularization of `|q|` in Jacobian entries at zero flow.
pub const JACOBIAN_EPS: f64 = 1e-8;

fn pipe_loss<T: Scalar>(law: &PipeLaw<T>, q: T) -> T {
    head_loss_pipe(q, &law.props_at(q))
}

fn valve_loss<T: Scalar>(law: &ValveLaw<T>, q: T) -> T {
    match *law {
        ValveLaw::Gpv {
            openness,
            resistance,
            exponent,
        } => resistance * signed_pow(q, exponent) / openness,
        ValveLaw::Prv { loss, .. } | ValveLaw::Fcv { loss, .. } => loss * q * q.abs(),
    }
}

fn xi_of<T: Scalar>(model: &Model<T>, state: &HydraulicState<T>) -> Vec<T> {
    let mut xi = state.heads.clone();
    xi.extend(model.restrict_flows(&state.flows));
    xi
}

/// Residuals of the nonlinear relations at `xi`, row order as in the assembled system.
pub fn model_residuals<T: Scalar>(model: &Model<T>, xi: &[T]) -> Vec<T> {
    let net = &model.net;
    let nh = model.n_heads();
    let nj = net.junctions.len();
    let q = &xi[nh..];
    let mut r = vec![T::zero(); model.n_vars()];
    for l in 0..model.n_flows() {
        let (f, t) = model.inc.ends(l);
        if f < nj {
            r[f] -= q[l];
        }
        if t < nj {
            r[t] += q[l];
        }
    }
    for j in 0..nj {
        r[j] -= match &model.pdd[j] {
            Some(p) => pdd_demand(xi[j], p),
            None => model.demand[j],
        };
    }
    for node in nj..nh {
        r[node] = xi[node] - net.fixed_head(node).expect("fixed head");
    }
    let dh = |l: usize| {
        let (f, t) = model.inc.ends(l);
        xi[f] - xi[t]
    };
    for (i, law) in model.pipes.iter().enumerate() {
        r[nh + i] = dh(i) - pipe_loss(law, q[i]);
    }
    let po = model.pump_offset();
    for (i, p) in model.pumps.iter().enumerate() {
        let l = po + i;
        r[nh + l] = dh(l) - pump_head_change(q[l], p);
    }
    let vo = model.valve_offset();
    for (i, v) in model.valves.iter().enumerate() {
        let l = vo + i;
        r[nh + l] = match (v.props.status, v.props.law) {
            (ValveStatus::Active, ValveLaw::Prv { head_setting, .. }) => {
                xi[model.inc.ends(l).1] - head_setting
            }
            (ValveStatus::Active, ValveLaw::Fcv { flow_setting, .. }) => q[l] - flow_setting,
            (_, law) => dh(l) - valve_loss(&law, q[l]),
        };
    }
    r
}

/// Analytic Jacobian of [`model_residuals`].
pub fn model_jacobian<T: Scalar>(model: &Model<T>, xi: &[T]) -> CsrMatrix<T> {
    let net = &model.net;
    let nh = model.n_heads();
    let nj = net.junctions.len();
    let q = &xi[nh..];
    let one = T::one();
    let eps = T::of(JACOBIAN_EPS);
    let mag = |x: T| if x == T::zero() { eps } else { x.abs() };
    let mut t = Vec::with_capacity(4 * model.n_vars());
    for l in 0..model.n_flows() {
        let (f, to) = model.inc.ends(l);
        if f < nj {
            t.push((f, nh + l, -one));
        }
        if to < nj {
            t.push((to, nh + l, one));
        }
    }
    for j in 0..nj {
        if let Some(p) = &model.pdd[j] {
            t.push((j, j, -pdd_demand_slope(xi[j], p)));
        }
    }
    for node in nj..nh {
        t.push((node, node, one));
    }
    let loss_row = |t: &mut Vec<(usize, usize, T)>, l: usize, slope: T| {
        let (f, to) = model.inc.ends(l);
        t.push((nh + l, f, one));
        t.push((nh + l, to, -one));
        t.push((nh + l, nh + l, -slope));
    };
    for (i, law) in model.pipes.iter().enumerate() {
        let slope = match law {
            PipeLaw::Fixed(p) => p.exponent * p.resistance * mag(q[i]).powf(p.exponent - one),
            PipeLaw::Darcy { .. } => {
                let h = T::of(1e-6) * (one + q[i].abs());
                (pipe_loss(law, q[i] + h) - pipe_loss(law, q[i] - h)) / (h + h)
            }
        };
        loss_row(&mut t, i, slope);
    }
    let po = model.pump_offset();
    for (i, p) in model.pumps.iter().enumerate() {
        let l = po + i;
        let slope = p.coeff
            * p.exponent
            * mag(q[l]).powf(p.exponent - one)
            * p.speed.powf(T::of(2.0) - p.exponent);
        loss_row(&mut t, l, slope);
    }
    let vo = model.valve_offset();
    for (i, v) in model.valves.iter().enumerate() {
        let l = vo + i;
        match (v.props.status, v.props.law) {
            (ValveStatus::Active, ValveLaw::Prv { .. }) => {
                t.push((nh + l, model.inc.ends(l).1, one))
            }
            (ValveStatus::Active, ValveLaw::Fcv { .. }) => t.push((nh + l, nh + l, one)),
            (
                _,
                ValveLaw::Gpv {
                    openness,
                    resistance,
                    exponent,
                },
            ) => {
                let p = PipeProps {
                    resistance: resistance / openness,
                    exponent,
                };
                loss_row(
                    &mut t,
                    l,
                    p.exponent * p.resistance * mag(q[l]).powf(exponent - one),
                );
            }
            (_, ValveLaw::Prv { loss, .. } | ValveLaw::Fcv { loss, .. }) => {
                loss_row(&mut t, l, T::of(2.0) * loss * mag(q[l]));
            }
        }
    }
    let n = model.n_vars();
    CsrMatrix::from_triplets(n, n, &t)
}

/// Nonlinear residuals of a network at an SI state, using the state's valve statuses.
pub fn nonlinear_residuals<T: Scalar>(
    net: &Network<T>,
    state: &HydraulicState<T>,
) -> Result<Vec<T>> {
    state.check_dims(net)?;
    let mut model = Model::new(net, T::one())?;
    model.set_statuses(&model.restrict_statuses(&state.valve_statuses));
    Ok(model_residuals(&model, &xi_of(&model, state)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig<T> {
    pub tolerance: T,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Fixed valve statuses (one per valve); resolved by an outer loop when `None`.
    pub statuses: Option<Vec<ValveStatus>>,
    pub initial: Option<HydraulicState<T>>,
    /// Initial flow (m³/s) on every link when no initial state is given.
    pub initial_flow: T,
    pub max_status_rounds: usize,
}

impl<T: Scalar> Default for NewtonConfig<T> {
    fn default() -> Self {
        NewtonConfig {
            tolerance: T::of(1e-8),
            max_iter: 200,
            max_halvings: 30,
            statuses: None,
            initial: None,
            initial_flow: T::of(0.03),
            max_status_rounds: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome<T> {
    pub state: HydraulicState<T>,
    /// Newton steps taken (summed over status rounds).
    pub iterations: usize,
    pub residual_inf: T,
}

fn newton_inner<T: Scalar>(
    model: &Model<T>,
    xi: &mut Vec<T>,
    cfg: &NewtonConfig<T>,
) -> Result<(usize, T)> {
    let mut r = model_residuals(model, xi);
    let mut rn = norm2(&r);
    for it in 0..=cfg.max_iter {
        let ri = norm_inf(&r);
        if ri <= cfg.tolerance {
            return Ok((it, ri));
        }
        if it == cfg.max_iter {
            break;
        }
        let jac = model_jacobian(model, xi);
        let f = Factorization::factor(&jac).map_err(|e| Error::SingularSystem {
            rows: e.0.iter().map(|i| format!("jacobian row {i}")).collect(),
        })?;
        let step = f.solve(&r);
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<T> = xi
                .iter()
                .zip(&step)
                .map(|(&x, &s)| x - lambda * s)
                .collect();
            let rt = model_residuals(model, &trial);
            let rtn = norm2(&rt);
            if rtn < rn || norm_inf(&rt) <= cfg.tolerance {
                *xi = trial;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            lambda *= T::of(0.5);
        }
        if !accepted {
            // Take the smallest step anyway; a stall is reported by the iteration cap.
            for (x, &s) in xi.iter_mut().zip(&step) {
                *x -= lambda * s;
            }
            r = model_residuals(model, xi);
            rn = norm2(&r);
        }
    }
    Err(Error::NewtonStall {
        iterations: cfg.max_iter,
        residual: norm_inf(&r).to_f64_lossy(),
    })
}

/// Damped Newton-Raphson on the full nonlinear system, in SI.
pub fn newton_solve<T: Scalar>(
    net: &Network<T>,
    cfg: &NewtonConfig<T>,
) -> Result<NewtonOutcome<T>> {
    let mut model = Model::new(net, T::one())?;
    let nh = model.n_heads();
    let mut xi: Vec<T> = match &cfg.initial {
        Some(s) => {
            s.check_dims(net)?;
            model.set_statuses(&model.restrict_statuses(&s.valve_statuses));
            xi_of(&model, s)
        }
        None => {
            let top = (0..nh)
                .filter_map(|n| net.fixed_head(n))
                .fold(T::neg_infinity(), T::max);
            let top = if top.is_finite() { top } else { T::zero() };
            let mut xi: Vec<T> = (0..nh).map(|n| net.fixed_head(n).unwrap_or(top)).collect();
            xi.extend(vec![cfg.initial_flow; model.n_flows()]);
            xi
        }
    };
    if let Some(s) = &cfg.statuses {
        if s.len() != net.valves.len() {
            return Err(Error::DimensionMismatch(
                "one status per valve required".into(),
            ));
        }
        model.set_statuses(&model.restrict_statuses(s));
    }
    let mut total = 0;
    let mut tracker = StatusTracker::new(net.valves.len(), 6);
    let mut residual;
    let mut round = 0;
    loop {
        let (its, res) = newton_inner(&model, &mut xi, cfg)?;
        total += its;
        residual = res;
        round += 1;
        if cfg.statuses.is_some() || round >= cfg.max_status_rounds {
            break;
        }
        let flips = crate::solver::resolve_statuses(&mut model, &xi, &mut tracker, round);
        if flips.is_empty() {
            break;
        }
    }
    let state = HydraulicState {
        heads: xi[..nh].to_vec(),
        flows: model.expand_flows(&xi[nh..]),
        valve_statuses: model.expand_statuses(&model.statuses()),
    };
    Ok(NewtonOutcome {
        state,
        iterations: total,
        residual_inf: residual,
    })
}

/// Absolute, relative and Euclidean-norm errors between two states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics<T> {
    pub ae: Vec<T>,
    /// Percent; `None` where the reference magnitude is below 1e-12.
    pub re: Vec<Option<T>>,
    pub en: T,
}

impl<T: Scalar> ErrorMetrics<T> {
    /// Fraction of absolute errors inside `[lo, hi]`.
    pub fn fraction_within(&self, lo: T, hi: T) -> f64 {
        if self.ae.is_empty() {
            return 1.0;
        }
        self.ae.iter().filter(|&&e| e >= lo && e <= hi).count() as f64 / self.ae.len() as f64
    }

    /// Counts of absolute errors per bucket `[edges[k], edges[k+1])`, the last bucket open.
    pub fn histogram(&self, edges: &[T]) -> Vec<usize> {
        let mut out = vec![0; edges.len()];
        for &e in &self.ae {
            if let Some(k) = edges.iter().rposition(|&x| e >= x) {
                out[k] += 1;
            }
        }
        out
    }
}

/// Errors of `a` against the reference `b`.
pub fn compare<T: Scalar>(a: &HydraulicState<T>, b: &HydraulicState<T>) -> Result<ErrorMetrics<T>> {
    if a.heads.len() != b.heads.len() || a.flows.len() != b.flows.len() {
        return Err(Error::DimensionMismatch(format!(
            "states have {}+{} and {}+{} entries",
            a.heads.len(),
            a.flows.len(),
            b.heads.len(),
            b.flows.len()
        )));
    }
    let (xa, xb) = (a.xi(), b.xi());
    let ae: Vec<T> = xa.iter().zip(&xb).map(|(&x, &y)| (x - y).abs()).collect();
    let re = ae
        .iter()
        .zip(&xb)
        .map(|(&e, &y)| (y.abs() >= T::of(1e-12)).then(|| e / y.abs() * T::of(100.0)))
        .collect();
    let en = norm2(&ae);
    Ok(ErrorMetrics { ae, re, en })
}

/// Reads `{"heads": {id: m}, "flows": {id: m³/s}}` into a state for `net`.
pub fn state_from_reference(
    net: &Network<f64>,
    doc: &serde_json::Value,
) -> Result<HydraulicState<f64>> {
    let get = |section: &str, id: &str| -> Result<f64> {
        doc.get(section)
            .and_then(|m| m.get(id))
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| {
                Error::DimensionMismatch(format!("reference lacks {section} entry for '{id}'"))
            })
    };
    let heads = (0..net.node_count())
        .map(|n| get("heads", net.node_id(n)))
        .collect::<Result<Vec<_>>>()?;
    let flows = (0..net.link_count())
        .map(|l| get("flows", net.link_id(l)))
        .collect::<Result<Vec<_>>>()?;
    let valve_statuses = net
        .valves
        .iter()
        .map(|v| {
            doc.get("statuses")
                .and_then(|m| m.get(&v.id))
                .and_then(|s| serde_json::from_value(s.clone()).ok())
                .unwrap_or(ValveStatus::Open)
        })
        .collect();
    Ok(HydraulicState {
        heads,
        flows,
        valve_statuses,
    })
}
