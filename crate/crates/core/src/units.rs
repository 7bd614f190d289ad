//! Unit systems of the `.inp` format and their conversion to SI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

const US_GALLON: f64 = 3.785_411_784e-3;
const IMP_GALLON: f64 = 4.546_09e-3;
const ACRE_FOOT: f64 = 1_233.481_837_547_52;
const DAY: f64 = 86_400.0;
const FOOT: f64 = 0.3048;
/// Metres of water column per psi.
const PSI_HEAD: f64 = 6_894.757_293_168 / 9_806.65;

/// Flow units accepted in `[OPTIONS] UNITS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FlowUnit {
    Cfs,
    Gpm,
    Mgd,
    Imgd,
    Afd,
    Lps,
    Lpm,
    Mld,
    Cmh,
    Cmd,
    Cms,
}

impl FlowUnit {
    pub const ALL: [FlowUnit; 11] = [
        FlowUnit::Cfs,
        FlowUnit::Gpm,
        FlowUnit::Mgd,
        FlowUnit::Imgd,
        FlowUnit::Afd,
        FlowUnit::Lps,
        FlowUnit::Lpm,
        FlowUnit::Mld,
        FlowUnit::Cmh,
        FlowUnit::Cmd,
        FlowUnit::Cms,
    ];

    /// Cubic metres per second in one unit.
    pub fn to_cms(self) -> f64 {
        match self {
            FlowUnit::Cfs => FOOT * FOOT * FOOT,
            FlowUnit::Gpm => US_GALLON / 60.0,
            FlowUnit::Mgd => 1e6 * US_GALLON / DAY,
            FlowUnit::Imgd => 1e6 * IMP_GALLON / DAY,
            FlowUnit::Afd => ACRE_FOOT / DAY,
            FlowUnit::Lps => 1e-3,
            FlowUnit::Lpm => 1e-3 / 60.0,
            FlowUnit::Mld => 1e3 / DAY,
            FlowUnit::Cmh => 1.0 / 3600.0,
            FlowUnit::Cmd => 1.0 / DAY,
            FlowUnit::Cms => 1.0,
        }
    }

    /// US customary units use feet, inches and psi; the rest are metric.
    pub fn length_unit(self) -> LengthUnit {
        match self {
            FlowUnit::Cfs | FlowUnit::Gpm | FlowUnit::Mgd | FlowUnit::Imgd | FlowUnit::Afd => {
                LengthUnit::Feet
            }
            _ => LengthUnit::Meters,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FlowUnit::Cfs => "CFS",
            FlowUnit::Gpm => "GPM",
            FlowUnit::Mgd => "MGD",
            FlowUnit::Imgd => "IMGD",
            FlowUnit::Afd => "AFD",
            FlowUnit::Lps => "LPS",
            FlowUnit::Lpm => "LPM",
            FlowUnit::Mld => "MLD",
            FlowUnit::Cmh => "CMH",
            FlowUnit::Cmd => "CMD",
            FlowUnit::Cms => "CMS",
        }
    }
}

impl fmt::Display for FlowUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FlowUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.to_ascii_uppercase();
        FlowUnit::ALL
            .into_iter()
            .find(|u| u.token() == up)
            .ok_or_else(|| Error::UnknownUnit(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthUnit {
    Feet,
    Meters,
}

/// Conversion factors between a file's native units and SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub flow_unit: FlowUnit,
    pub length_unit: LengthUnit,
    /// m³/s per flow unit.
    pub flow: f64,
    /// m per length (and head) unit.
    pub length: f64,
    /// m per diameter unit (inch or mm).
    pub diameter: f64,
    /// m of head per pressure unit (psi or m).
    pub pressure: f64,
    /// m per Darcy-Weisbach roughness unit (millifeet or mm).
    pub roughness_dw: f64,
}

impl UnitSystem {
    pub fn new(flow_unit: FlowUnit) -> Self {
        let length_unit = flow_unit.length_unit();
        match length_unit {
            LengthUnit::Feet => UnitSystem {
                flow_unit,
                length_unit,
                flow: flow_unit.to_cms(),
                length: FOOT,
                diameter: FOOT / 12.0,
                pressure: PSI_HEAD,
                roughness_dw: FOOT * 1e-3,
            },
            LengthUnit::Meters => UnitSystem {
                flow_unit,
                length_unit,
                flow: flow_unit.to_cms(),
                length: 1.0,
                diameter: 1e-3,
                pressure: 1.0,
                roughness_dw: 1e-3,
            },
        }
    }

    pub fn flow_to_si(&self, x: f64) -> f64 {
        x * self.flow
    }
    pub fn flow_from_si(&self, x: f64) -> f64 {
        x / self.flow
    }
    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length
    }
    pub fn length_from_si(&self, x: f64) -> f64 {
        x / self.length
    }
    pub fn diameter_to_si(&self, x: f64) -> f64 {
        x * self.diameter
    }
    pub fn diameter_from_si(&self, x: f64) -> f64 {
        x / self.diameter
    }
    pub fn pressure_to_si(&self, x: f64) -> f64 {
        x * self.pressure
    }
    pub fn pressure_from_si(&self, x: f64) -> f64 {
        x / self.pressure
    }

    /// Native flow scale: the factor mapping SI flows onto the file's own flow unit,
    /// expressed against heads kept in metres (length unit / flow unit).
    pub fn native_flow_scale(&self) -> f64 {
        self.length / self.flow
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_tokens_case_insensitively() {
        assert_eq!("gpm".parse::<FlowUnit>().unwrap(), FlowUnit::Gpm);
        assert_eq!("CMS".parse::<FlowUnit>().unwrap(), FlowUnit::Cms);
        assert!(matches!(
            "furlongs".parse::<FlowUnit>(),
            Err(Error::UnknownUnit(_))
        ));
    }

    #[test]
    fn native_scale_for_common_units() {
        assert!((UnitSystem::new(FlowUnit::Lps).native_flow_scale() - 1000.0).abs() < 1e-9);
        assert!((UnitSystem::new(FlowUnit::Gpm).native_flow_scale() - 4831.18).abs() < 0.01);
        assert!((UnitSystem::new(FlowUnit::Cms).native_flow_scale() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_to_head() {
        let us = UnitSystem::new(FlowUnit::Gpm);
        assert!((us.pressure_to_si(1.0) - 0.70307).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(x in -1e6f64..1e6, idx in 0usize..11) {
            let u = UnitSystem::new(FlowUnit::ALL[idx]);
            let tol = 1e-12 * x.abs().max(1e-300);
            prop_assert!((u.flow_from_si(u.flow_to_si(x)) - x).abs() <= tol);
            prop_assert!((u.length_from_si(u.length_to_si(x)) - x).abs() <= tol);
            prop_assert!((u.diameter_from_si(u.diameter_to_si(x)) - x).abs() <= tol);
            prop_assert!((u.pressure_from_si(u.pressure_to_si(x)) - x).abs() <= tol);
        }
    }
}
