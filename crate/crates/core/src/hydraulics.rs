//! Head-loss and head-gain laws, their linearization constants, and pressure-driven demand.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{signed_pow, Scalar};

pub const GRAVITY: f64 = 9.806_65;
/// Kinematic viscosity of water at 20 °C, m²/s.
pub const VISCOSITY: f64 = 1.022e-6;
/// Lumped loss coefficient of an open PRV/FCV without a minor-loss entry, s²/m⁵.
pub const DEFAULT_VALVE_LOSS: f64 = 1e-3;
/// Lower bound on the Reynolds number used for Darcy-Weisbach friction factors.
pub const MIN_REYNOLDS: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadlossFormula {
    #[serde(rename = "H-W")]
    HazenWilliams,
    #[serde(rename = "D-W")]
    DarcyWeisbach,
    #[serde(rename = "C-M")]
    ChezyManning,
}

impl HeadlossFormula {
    pub fn exponent(self) -> f64 {
        match self {
            HeadlossFormula::HazenWilliams => 1.852,
            _ => 2.0,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            HeadlossFormula::HazenWilliams => "H-W",
            HeadlossFormula::DarcyWeisbach => "D-W",
            HeadlossFormula::ChezyManning => "C-M",
        }
    }
}

impl fmt::Display for HeadlossFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for HeadlossFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "H-W" | "HW" | "HAZEN-WILLIAMS" => Ok(HeadlossFormula::HazenWilliams),
            "D-W" | "DW" | "DARCY-WEISBACH" => Ok(HeadlossFormula::DarcyWeisbach),
            "C-M" | "CM" | "CHEZY-MANNING" => Ok(HeadlossFormula::ChezyManning),
            _ => Err(Error::UnknownHeadloss(s.to_string())),
        }
    }
}

/// Pipe law `Δh = R·q·|q|^(μ−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeProps<T> {
    pub resistance: T,
    pub exponent: T,
}

impl<T: Scalar> PipeProps<T> {
    /// Same law expressed for flows multiplied by `scale`.
    pub fn scaled(self, scale: T) -> Self {
        PipeProps {
            resistance: self.resistance * scale.powf(-self.exponent),
            exponent: self.exponent,
        }
    }
}

/// Pump law `Δh = −s²·(h₀ − r·(q/s)^ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpProps<T> {
    pub shutoff_head: T,
    pub coeff: T,
    pub exponent: T,
    pub speed: T,
}

impl<T: Scalar> PumpProps<T> {
    pub fn scaled(self, scale: T) -> Self {
        PumpProps {
            coeff: self.coeff * scale.powf(-self.exponent),
            ..self
        }
    }

    /// Flow at which the head gain vanishes.
    pub fn max_flow(&self) -> T {
        self.speed * (self.shutoff_head / self.coeff).powf(self.exponent.recip())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ValveStatus {
    Open,
    Active,
    Closed,
}

impl fmt::Display for ValveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValveStatus::Open => "OPEN",
            ValveStatus::Active => "ACTIVE",
            ValveStatus::Closed => "CLOSED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValveLaw<T> {
    /// General purpose valve: `Δh = o⁻¹·R·q·|q|^(μ−1)`.
    Gpv {
        openness: T,
        resistance: T,
        exponent: T,
    },
    /// Pressure reducing valve with downstream head setting in m.
    Prv { loss: T, head_setting: T },
    /// Flow control valve with flow setting.
    Fcv { loss: T, flow_setting: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveProps<T> {
    pub law: ValveLaw<T>,
    pub status: ValveStatus,
}

impl<T: Scalar> ValveProps<T> {
    pub fn scaled(self, scale: T) -> Self {
        let law = match self.law {
            ValveLaw::Gpv {
                openness,
                resistance,
                exponent,
            } => ValveLaw::Gpv {
                openness,
                resistance: resistance * scale.powf(-exponent),
                exponent,
            },
            ValveLaw::Prv { loss, head_setting } => ValveLaw::Prv {
                loss: loss / (scale * scale),
                head_setting,
            },
            ValveLaw::Fcv { loss, flow_setting } => ValveLaw::Fcv {
                loss: loss / (scale * scale),
                flow_setting: flow_setting * scale,
            },
        };
        ValveProps { law, ..self }
    }
}

/// Wagner pressure-driven demand parameters (heads absolute, in m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PddParams<T> {
    pub d_dsgn: T,
    pub h_ser: T,
    pub h_min: T,
    pub gamma: T,
}

impl<T: Scalar> PddParams<T> {
    pub fn scaled(self, scale: T) -> Self {
        PddParams {
            d_dsgn: self.d_dsgn * scale,
            ..self
        }
    }
}

/// Resistance coefficient in SI so that `Δh = R·q^μ` for `q > 0`.
///
/// Darcy-Weisbach uses the friction factor of the fully rough regime; see
/// [`darcy_resistance`] for the flow-dependent value.
pub fn pipe_resistance<T: Scalar>(
    length: T,
    diameter: T,
    roughness: T,
    formula: HeadlossFormula,
) -> Result<T> {
    if !(length > T::zero()) || !(diameter > T::zero()) || !(roughness > T::zero()) {
        return Err(Error::NonPositiveDimension(format!(
            "L={length}, D={diameter}, roughness={roughness}"
        )));
    }
    Ok(match formula {
        HeadlossFormula::HazenWilliams => {
            T::of(10.667) * length * roughness.powf(T::of(-1.852)) * diameter.powf(T::of(-4.871))
        }
        HeadlossFormula::ChezyManning => {
            T::of(10.294) * roughness * roughness * length * diameter.powf(T::of(-5.33))
        }
        HeadlossFormula::DarcyWeisbach => {
            let f = colebrook(T::of(1e12), roughness / diameter);
            darcy_from_friction(length, diameter, f)
        }
    })
}

fn darcy_from_friction<T: Scalar>(length: T, diameter: T, f: T) -> T {
    T::of(8.0) * f * length / (T::of(GRAVITY) * T::PI() * T::PI() * diameter.powi(5))
}

/// Darcy friction factor from the Colebrook equation by fixed-point iteration.
pub fn colebrook<T: Scalar>(reynolds: T, rel_roughness: T) -> T {
    let re = reynolds.max(T::of(MIN_REYNOLDS));
    let a = rel_roughness / T::of(3.7);
    let sj = (a + T::of(5.74) / re.powf(T::of(0.9))).log10();
    let mut f = T::of(0.25) / (sj * sj);
    for _ in 0..20 {
        let x = T::of(-2.0) * (a + T::of(2.51) / (re * f.sqrt())).log10();
        let next = (x * x).recip();
        let done = (next - f).abs() <= T::epsilon() * T::of(16.0) * f;
        f = next;
        if done {
            break;
        }
    }
    f
}

/// Darcy-Weisbach resistance with the friction factor frozen at the Reynolds number of `q_ref`.
pub fn darcy_resistance<T: Scalar>(length: T, diameter: T, roughness: T, q_ref: T) -> T {
    let re = T::of(4.0) * q_ref.abs() / (T::PI() * diameter * T::of(VISCOSITY));
    darcy_from_friction(length, diameter, colebrook(re, roughness / diameter))
}

/// Lumped quadratic loss coefficient `8K/(gπ²D⁴)` of a minor-loss coefficient `K`.
pub fn minor_loss_coefficient<T: Scalar>(k: T, diameter: T) -> T {
    T::of(8.0) * k / (T::of(GRAVITY) * T::PI() * T::PI() * diameter.powi(4))
}

pub fn head_loss_pipe<T: Scalar>(q: T, p: &PipeProps<T>) -> T {
    p.resistance * signed_pow(q, p.exponent)
}

/// Head change across a pump (negative means a gain) for non-negative flow.
pub fn head_gain_pump<T: Scalar>(q: T, p: &PumpProps<T>) -> Result<T> {
    if q < T::zero() {
        return Err(Error::NegativeFlow(q.to_f64_lossy()));
    }
    Ok(pump_head_change(q, p))
}

/// Pump law extended oddly to negative flows, used where iterates may leave the physical range.
pub fn pump_head_change<T: Scalar>(q: T, p: &PumpProps<T>) -> T {
    let s = p.speed;
    -(s * s) * (p.shutoff_head - p.coeff * signed_pow(q / s, p.exponent))
}

pub fn head_loss_valve<T: Scalar>(q: T, v: &ValveProps<T>) -> Result<T> {
    match v.status {
        ValveStatus::Closed => return Err(Error::ClosedValve(String::new())),
        ValveStatus::Active => {
            return Err(Error::InvalidConfig(
                "an active valve enforces a setting, not a loss".into(),
            ))
        }
        ValveStatus::Open => {}
    }
    Ok(match v.law {
        ValveLaw::Gpv {
            openness,
            resistance,
            exponent,
        } => resistance * signed_pow(q, exponent) / openness,
        ValveLaw::Prv { loss, .. } | ValveLaw::Fcv { loss, .. } => loss * q * q.abs(),
    })
}

/// Constant `c` of the pipe row `h_i − h_j − q = c`.
pub fn linearize_pipe<T: Scalar>(q_prev: T, p: &PipeProps<T>) -> T {
    q_prev * (p.resistance * q_prev.abs().powf(p.exponent - T::one()) - T::one())
}

/// Constants `(c₁, c₂)` of the pump row `h_i − h_j − c₂·q = c₁`.
///
/// A negative `q_prev` is linearized through `|q_prev|`, matching the odd extension.
pub fn linearize_pump<T: Scalar>(q_prev: T, p: &PumpProps<T>) -> (T, T) {
    let s = p.speed;
    let c1 = -(s * s) * p.shutoff_head;
    let c2 = if q_prev == T::zero() {
        T::zero()
    } else {
        p.coeff * q_prev.abs().powf(p.exponent - T::one()) * s.powf(T::of(2.0) - p.exponent)
    };
    (c1, c2)
}

/// Shape of a valve's row in the linear system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinearRowSpec<T> {
    /// `h_i − h_j − q = c`.
    Loss(T),
    /// `h_j = head`.
    HeadSetting(T),
    /// `q = flow`.
    FlowSetting(T),
}

pub fn linearize_valve<T: Scalar>(q_prev: T, v: &ValveProps<T>) -> Result<LinearRowSpec<T>> {
    match (v.status, v.law) {
        (ValveStatus::Closed, _) => Err(Error::ClosedValve(String::new())),
        (ValveStatus::Active, ValveLaw::Prv { head_setting, .. }) => {
            Ok(LinearRowSpec::HeadSetting(head_setting))
        }
        (ValveStatus::Active, ValveLaw::Fcv { flow_setting, .. }) => {
            Ok(LinearRowSpec::FlowSetting(flow_setting))
        }
        (
            _,
            ValveLaw::Gpv {
                openness,
                resistance,
                exponent,
            },
        ) => Ok(LinearRowSpec::Loss(
            resistance * signed_pow(q_prev, exponent) / openness - q_prev,
        )),
        (ValveStatus::Open, ValveLaw::Prv { loss, .. } | ValveLaw::Fcv { loss, .. }) => Ok(
            LinearRowSpec::Loss(q_prev * (loss * q_prev.abs() - T::one())),
        ),
    }
}

/// Delivered demand at head `h`.
pub fn pdd_demand<T: Scalar>(h: T, d: &PddParams<T>) -> T {
    if h >= d.h_ser {
        d.d_dsgn
    } else if h <= d.h_min {
        T::zero()
    } else {
        d.d_dsgn * ((h - d.h_min) / (d.h_ser - d.h_min)).powf(d.gamma)
    }
}

/// Derivative of [`pdd_demand`] with respect to head.
pub fn pdd_demand_slope<T: Scalar>(h: T, d: &PddParams<T>) -> T {
    if h >= d.h_ser || h <= d.h_min {
        T::zero()
    } else {
        let span = d.h_ser - d.h_min;
        d.d_dsgn * d.gamma * ((h - d.h_min) / span).powf(d.gamma - T::one()) / span
    }
}

/// Constant `c` of the junction row `Σq_in − Σq_out − h = c`.
pub fn linearize_pdd<T: Scalar>(h_prev: T, d: &PddParams<T>) -> T {
    pdd_demand(h_prev, d) - h_prev
}

/// Diagonal of `A_f`: `μ·R·|q|^(μ−1) − 1` per pipe-like link.
pub fn a_f_diagonal<T: Scalar>(q_prev: &[T], pipes: &[PipeProps<T>]) -> Vec<T> {
    assert_eq!(q_prev.len(), pipes.len());
    q_prev
        .iter()
        .zip(pipes)
        .map(|(&q, p)| p.exponent * p.resistance * q.abs().powf(p.exponent - T::one()) - T::one())
        .collect()
}

/// Flow magnitude below which the `A_f` entry stays in `(−1, 0)`.
pub fn contraction_threshold<T: Scalar>(p: &PipeProps<T>) -> T {
    (p.exponent * p.resistance)
        .recip()
        .powf((p.exponent - T::one()).recip())
}
