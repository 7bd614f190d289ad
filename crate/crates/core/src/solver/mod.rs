//! The successive-linearization fixed-point iteration.
//!
//! Each iteration freezes the nonlinear terms at the previous iterate, assembles the
//! square linear system, and solves it exactly. Flows are iterated in the source
//! file's native flow unit (see [`FlowScale`]) because the linear rows are not
//! invariant under a change of flow unit.

mod accel;
mod linearize;
mod monitor;
mod status;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble, LinearSystem};
use crate::error::{Error, Result};
use crate::hydraulics::{pump_head_change, ValveLaw, ValveStatus};
use crate::linalg::Factorization;
use crate::model::Model;
use crate::network::Network;
use crate::scalar::{dist2, norm2, Scalar};
use crate::state::HydraulicState;

pub use accel::{
    acceleration_bounds, aitken_factor, clamp_parameter, steady_aitken_factor, AccelInterval,
};
pub use linearize::{coefficients, pipe_like};
pub use monitor::{check_contraction, ContractionEstimate, POWER_ITERATIONS};
pub(crate) use status::resolve as resolve_statuses;
pub use status::{update_statuses, StatusFlip, StatusTracker};

/// Euclidean distance between consecutive iterates.
pub fn iteration_error<T: Scalar>(xi_n: &[T], xi_prev: &[T]) -> T {
    dist2(xi_n, xi_prev)
}

/// Unit in which flows are iterated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FlowScale {
    /// The source file's flow unit, with heads in metres (LPS → 1000, GPM → 4831).
    Native,
    /// Flows multiplied by the given factor relative to m³/s.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AccelPolicy<T> {
    Off,
    /// Same parameter on every entry of `ξ`.
    Uniform(T),
    /// Per-pipe parameters from the observed step ratios, kept inside the admissible interval.
    Adaptive {
        cap: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialFlows<T> {
    Zeros,
    /// Same flow (m³/s) on every link.
    Uniform(T),
    /// Flows drawn uniformly from `[low, high]` m³/s.
    Random {
        seed: u64,
        low: T,
        high: T,
    },
    /// Start from a previous solution.
    Warm(HydraulicState<T>),
}

/// Bounds on `ξ = [h; q]` of the unpruned network, in SI.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn unbounded(net: &Network<T>) -> Self {
        let n = net.node_count() + net.link_count();
        Bounds {
            lower: vec![T::neg_infinity(); n],
            upper: vec![T::infinity(); n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub threshold: T,
    pub max_iter: usize,
    /// Acceleration is applied on iterations that are multiples of this.
    pub n_step: usize,
    pub accel: AccelPolicy<T>,
    pub initial_flows: InitialFlows<T>,
    pub bounds: Option<Bounds<T>>,
    pub status_freeze_after: usize,
    pub monitor_contraction: bool,
    /// Base `1 + δ` of the monomial form; never used by the iteration itself.
    pub gp_base: T,
    pub flow_scale: FlowScale,
    pub divergence_window: usize,
    pub divergence_factor: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            threshold: T::of(0.01),
            max_iter: 1000,
            n_step: 10,
            accel: AccelPolicy::Off,
            initial_flows: InitialFlows::Uniform(T::of(0.03)),
            bounds: None,
            status_freeze_after: 6,
            monitor_contraction: false,
            gp_base: T::of(2.0),
            flow_scale: FlowScale::Native,
            divergence_window: 50,
            divergence_factor: T::of(10.0),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.threshold > T::zero()) {
            return bad("threshold must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.n_step == 0 {
            return bad("n_step must be at least 1");
        }
        if !(self.gp_base > T::one()) {
            return bad("gp base must exceed 1");
        }
        if let FlowScale::Fixed(k) = self.flow_scale {
            if !(k > 0.0) {
                return bad("flow scale must be positive");
            }
        }
        if let AccelPolicy::Adaptive { cap } = self.accel {
            if !(cap > T::zero()) {
                return bad("acceleration cap must be positive");
            }
        }
        Ok(())
    }

    pub fn scale_for(&self, net: &Network<T>) -> T {
        match self.flow_scale {
            FlowScale::Native => T::of(net.units.native_flow_scale()),
            FlowScale::Fixed(k) => T::of(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    Diverged,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub element: String,
    pub kind: String,
    pub value: f64,
}

/// Bookkeeping of acceleration steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AccelSummary {
    pub accelerated_steps: usize,
    pub empty_intervals: usize,
    pub interval_violations: usize,
    pub damping_events: usize,
    pub max_parameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport<T> {
    pub iterations_used: usize,
    /// Distance between consecutive iterates, in iteration units.
    pub error_trace: Vec<T>,
    pub contraction_trace: Option<Vec<ContractionEstimate<T>>>,
    /// Norm of the pipe-like flow step per iteration.
    pub pipe_step_trace: Vec<T>,
    /// Whether the valve statuses were unchanged at each iteration.
    pub status_stable: Vec<bool>,
    pub status_flip_log: Vec<StatusFlip>,
    pub termination: Termination,
    pub wall_time_s: f64,
    pub bound_violations: Vec<BoundViolation>,
    pub accel: AccelSummary,
    /// Factor applied to SI flows during the iteration.
    pub flow_scale: f64,
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub state: HydraulicState<T>,
    pub report: SolverReport<T>,
}

fn initial_iterate<T: Scalar>(
    model: &Model<T>,
    full: &Network<T>,
    cfg: &SolverConfig<T>,
) -> Vec<T> {
    let nh = model.n_heads();
    let start_head = (0..nh)
        .filter_map(|n| model.net.fixed_head(n))
        .fold(T::neg_infinity(), T::max);
    let start_head = if start_head.is_finite() {
        start_head
    } else {
        T::zero()
    };
    let mut xi: Vec<T> = (0..nh)
        .map(|n| model.net.fixed_head(n).unwrap_or(start_head))
        .collect();
    let full_links = full.link_count();
    let flows_si: Vec<T> = match &cfg.initial_flows {
        InitialFlows::Zeros => vec![T::zero(); full_links],
        InitialFlows::Uniform(q) => vec![*q; full_links],
        InitialFlows::Random { seed, low, high } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let (lo, hi) = (low.to_f64_lossy(), high.to_f64_lossy());
            (0..full_links)
                .map(|_| T::of(if hi > lo { rng.gen_range(lo..hi) } else { lo }))
                .collect()
        }
        InitialFlows::Warm(s) => {
            xi.copy_from_slice(&s.heads);
            s.flows.clone()
        }
    };
    xi.extend(
        model
            .restrict_flows(&flows_si)
            .into_iter()
            .map(|q| q * model.scale),
    );
    xi
}

/// Relative agreement of successive step ratios required before a pipe is extrapolated.
const STEADY_RATIO_TOL: f64 = 0.1;

struct Adaptive<T> {
    /// Pipe-flow steps of the last two plain iterations, oldest first.
    history: Vec<Vec<T>>,
    damping: T,
    rises: usize,
    /// Raw step size at the previous accelerated iteration.
    last_raw_step: Option<T>,
}

/// Runs the iteration to convergence, `max_iter`, divergence or a singular system.
pub fn run<T: Scalar>(net: &Network<T>, cfg: &SolverConfig<T>) -> Result<Solution<T>> {
    cfg.validate()?;
    let started = Instant::now();
    let scale = cfg.scale_for(net);
    let mut model = Model::new(net, scale)?;
    if let InitialFlows::Warm(s) = &cfg.initial_flows {
        s.check_dims(net)?;
        model.set_statuses(&model.restrict_statuses(&s.valve_statuses));
    }
    let nh = model.n_heads();
    let n = model.n_vars();
    let bounds = cfg.bounds.clone().unwrap_or_else(|| Bounds::unbounded(net));
    if bounds.lower.len() != net.node_count() + net.link_count()
        || bounds.upper.len() != bounds.lower.len()
    {
        return Err(Error::DimensionMismatch(
            "bounds do not match the network".into(),
        ));
    }
    let q_lo: Vec<T> = model
        .restrict_flows(&bounds.lower[net.node_count()..])
        .into_iter()
        .map(|q| q * scale)
        .collect();
    let q_hi: Vec<T> = model
        .restrict_flows(&bounds.upper[net.node_count()..])
        .into_iter()
        .map(|q| q * scale)
        .collect();

    let mut tracker = StatusTracker::new(net.valves.len(), cfg.status_freeze_after);
    let mut xi_prev = initial_iterate(&model, net, cfg);
    let mut raw = xi_prev.clone();
    let mut fact: Option<Factorization<T>> = None;
    let mut report = SolverReport {
        iterations_used: 0,
        error_trace: Vec::new(),
        contraction_trace: cfg.monitor_contraction.then(Vec::new),
        pipe_step_trace: Vec::new(),
        status_stable: Vec::new(),
        status_flip_log: Vec::new(),
        termination: Termination::MaxIter,
        wall_time_s: 0.0,
        bound_violations: Vec::new(),
        accel: AccelSummary::default(),
        flow_scale: scale.to_f64_lossy(),
    };
    let mut adaptive = Adaptive {
        history: Vec::new(),
        damping: T::one(),
        rises: 0,
        last_raw_step: None,
    };

    let mut raw_steps: Vec<T> = Vec::new();
    for it in 1..=cfg.max_iter {
        let flips = if it > 1 {
            status::resolve(&mut model, &xi_prev, &mut tracker, it)
        } else {
            Vec::new()
        };
        let stable = flips.is_empty();
        report.status_flip_log.extend(flips);

        let coeffs = coefficients(&model, &xi_prev);
        let sys: LinearSystem<T> = assemble(&model.net, &model.inc, &coeffs)?;
        let f = if stable {
            Factorization::refactor(&sys.a, fact.as_ref())
        } else {
            Factorization::factor(&sys.a)
        }
        .map_err(|e| sys.singular_error(&e.0))?;
        raw = f.solve(&sys.b);

        if let Some(trace) = report.contraction_trace.as_mut() {
            let (links, a_f) = pipe_like(&model, &xi_prev);
            trace.push(check_contraction(&f, n, nh, &links, &a_f));
        }
        fact = Some(f);

        let delta: Vec<T> = raw.iter().zip(&xi_prev).map(|(&a, &b)| a - b).collect();
        let mut xi_new = raw.clone();
        let accelerate = it % cfg.n_step == 0;
        let mut accelerated = false;
        match cfg.accel {
            AccelPolicy::Off => {}
            AccelPolicy::Uniform(a) => {
                if accelerate && a != T::zero() {
                    for k in 0..n {
                        xi_new[k] += a * delta[k];
                    }
                    accelerated = true;
                }
            }
            AccelPolicy::Adaptive { cap } => {
                let np = model.net.pipes.len();
                let pipe_delta = &delta[nh..nh + np];
                if accelerate && adaptive.history.len() == 2 {
                    let (older, prev) = (&adaptive.history[0], &adaptive.history[1]);
                    for i in 0..np {
                        let dq = pipe_delta[i];
                        let proposal =
                            steady_aitken_factor(older[i], prev[i], dq, T::of(STEADY_RATIO_TOL))
                                .min(cap)
                                * adaptive.damping;
                        if proposal == T::zero() {
                            continue;
                        }
                        let q = raw[nh + i];
                        let props = model.pipes[i].props_at(q);
                        let interval = acceleration_bounds(q, dq, &props, q_lo[i], q_hi[i]);
                        let Some(a) = clamp_parameter(proposal, interval, cap) else {
                            report.accel.empty_intervals += 1;
                            continue;
                        };
                        if a == T::zero() {
                            continue;
                        }
                        if !interval.contains(a) {
                            report.accel.interval_violations += 1;
                        }
                        debug_assert!(
                            interval.contains(a),
                            "parameter {a} outside ({}, {})",
                            interval.lo,
                            interval.hi
                        );
                        report.accel.max_parameter =
                            report.accel.max_parameter.max(a.to_f64_lossy());
                        xi_new[nh + i] += a * dq;
                        accelerated = true;
                    }
                    adaptive.history.clear();
                } else {
                    if adaptive.history.len() == 2 {
                        adaptive.history.remove(0);
                    }
                    adaptive.history.push(pipe_delta.to_vec());
                }
            }
        }

        let error = iteration_error(&xi_new, &xi_prev);
        let (links, _) = pipe_like(&model, &xi_prev);
        let pipe_step = norm2(
            &links
                .iter()
                .map(|&l| xi_new[nh + l] - xi_prev[nh + l])
                .collect::<Vec<_>>(),
        );
        report.error_trace.push(error);
        report.pipe_step_trace.push(pipe_step);
        report.status_stable.push(stable);
        report.iterations_used = it;

        if accelerated {
            report.accel.accelerated_steps += 1;
            // Oscillation shows up as growing raw steps from one accelerated iteration to
            // the next; the accelerated step itself is long by construction.
            let raw_step = norm2(&delta);
            if adaptive.last_raw_step.is_some_and(|last| raw_step > last) {
                adaptive.rises += 1;
                if adaptive.rises >= 2 {
                    adaptive.damping *= T::of(0.5);
                    adaptive.rises = 0;
                    report.accel.damping_events += 1;
                }
            } else {
                adaptive.rises = 0;
            }
            adaptive.last_raw_step = Some(raw_step);
        }

        if !error.is_finite() || raw.iter().any(|x| !x.is_finite()) {
            report.termination = Termination::Diverged;
            return Err(Error::Diverged { iteration: it });
        }
        // Growth is judged on the smallest plain step of each acceleration cycle, since
        // accelerated steps and the transients after them are long by design.
        raw_steps.push(norm2(&delta));
        let w = cfg.divergence_window;
        let m = cfg.n_step.clamp(1, w.max(1));
        let floor = |end: usize| {
            raw_steps[end + 1 - m..=end]
                .iter()
                .cloned()
                .fold(T::infinity(), T::min)
        };
        if it >= w + m && floor(it - 1) > cfg.divergence_factor * floor(it - 1 - w) {
            report.termination = Termination::Diverged;
            return Err(Error::Diverged { iteration: it });
        }

        if error < cfg.threshold && stable {
            report.termination = Termination::Converged;
            break;
        }
        xi_prev = xi_new;
    }

    let heads = raw[..nh].to_vec();
    let flows = model.expand_flows(&raw[nh..].iter().map(|&q| q / scale).collect::<Vec<_>>());
    let state = HydraulicState {
        heads,
        flows,
        valve_statuses: model.expand_statuses(&model.statuses()),
    };
    report.bound_violations = bound_violations(net, &model, &state, &bounds);
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(Solution { state, report })
}

/// Physical-range and user-bound violations of a state.
pub fn bound_violations<T: Scalar>(
    net: &Network<T>,
    model: &Model<T>,
    state: &HydraulicState<T>,
    bounds: &Bounds<T>,
) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    let np = net.pipes.len();
    for (i, p) in net.pumps.iter().enumerate() {
        let q = state.flows[np + i];
        if p.status == crate::network::LinkStatus::Closed {
            continue;
        }
        if q < T::zero() {
            out.push(BoundViolation {
                element: p.id.clone(),
                kind: "pump flow below zero".into(),
                value: q.to_f64_lossy(),
            });
        }
        let props = crate::hydraulics::PumpProps {
            shutoff_head: p.shutoff_head,
            coeff: p.coeff,
            exponent: p.exponent,
            speed: p.speed,
        };
        let dh = pump_head_change(q, &props);
        if dh > T::zero() {
            out.push(BoundViolation {
                element: p.id.clone(),
                kind: "pump head change above zero".into(),
                value: dh.to_f64_lossy(),
            });
        }
    }
    let vo = np + net.pumps.len();
    for (k, v) in model.valves.iter().enumerate() {
        let orig = model.kept_valves[k];
        if matches!(v.props.law, ValveLaw::Prv { .. }) && v.props.status != ValveStatus::Closed {
            let q = state.flows[vo + orig];
            if q < T::zero() {
                out.push(BoundViolation {
                    element: net.valves[orig].id.clone(),
                    kind: "PRV reverse flow".into(),
                    value: q.to_f64_lossy(),
                });
            }
        }
    }
    let xi = state.xi();
    for (k, &x) in xi.iter().enumerate() {
        let id = if k < net.node_count() {
            net.node_id(k).to_string()
        } else {
            net.link_id(k - net.node_count()).to_string()
        };
        if x < bounds.lower[k] {
            out.push(BoundViolation {
                element: id.clone(),
                kind: "below lower bound".into(),
                value: x.to_f64_lossy(),
            });
        }
        if x > bounds.upper[k] {
            out.push(BoundViolation {
                element: id,
                kind: "above upper bound".into(),
                value: x.to_f64_lossy(),
            });
        }
    }
    out
}

/// Assembles the system at a state (SI), in iteration units; used by diagnostics and dumps.
pub fn system_at<T: Scalar>(
    net: &Network<T>,
    cfg: &SolverConfig<T>,
    state: Option<&HydraulicState<T>>,
) -> Result<(Model<T>, Vec<T>, LinearSystem<T>)> {
    let scale = cfg.scale_for(net);
    let mut model = Model::new(net, scale)?;
    let xi = match state {
        Some(s) => {
            s.check_dims(net)?;
            model.set_statuses(&model.restrict_statuses(&s.valve_statuses));
            let mut xi = s.heads.clone();
            xi.extend(
                model
                    .restrict_flows(&s.flows)
                    .into_iter()
                    .map(|q| q * scale),
            );
            xi
        }
        None => initial_iterate(&model, net, cfg),
    };
    let coeffs = coefficients(&model, &xi);
    let sys = assemble(&model.net, &model.inc, &coeffs)?;
    Ok((model, xi, sys))
}
