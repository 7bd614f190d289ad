//! Machine-readable result document shared by the command-line tool and tests.

use indexmap::IndexMap;
use serde::Serialize;

use crate::hydraulics::ValveStatus;
use crate::network::{Counts, Network};
use crate::oracle::ErrorMetrics;
use crate::solver::SolverReport;
use crate::state::HydraulicState;

pub const SCHEMA_VERSION: u32 = 1;

/// Edges of the absolute-error histogram, SI units.
pub const AE_BUCKETS: [f64; 5] = [0.0, 0.01, 0.1, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBucket {
    pub lo: f64,
    /// `None` for the open last bucket.
    pub hi: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub reference: String,
    pub en: f64,
    pub max_ae: f64,
    pub max_re_percent: Option<f64>,
    pub fraction_ae_within_half: f64,
    pub ae_histogram: Vec<HistogramBucket>,
}

impl MetricsSummary {
    pub fn new(reference: impl Into<String>, m: &ErrorMetrics<f64>) -> Self {
        let counts = m.histogram(&AE_BUCKETS);
        let ae_histogram = counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| HistogramBucket {
                lo: AE_BUCKETS[k],
                hi: AE_BUCKETS.get(k + 1).copied(),
                count,
            })
            .collect();
        MetricsSummary {
            reference: reference.into(),
            en: m.en,
            max_ae: m.ae.iter().cloned().fold(0.0, f64::max),
            max_re_percent: m.re.iter().flatten().cloned().reduce(f64::max),
            fraction_ae_within_half: m.fraction_within(0.0, 0.5),
            ae_histogram,
        }
    }
}

/// Solved network keyed by the original `.inp` ids, results in SI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub title: String,
    pub source_units: String,
    pub counts: Counts,
    pub variables: usize,
    /// m
    pub heads: IndexMap<String, f64>,
    /// m³/s
    pub flows: IndexMap<String, f64>,
    pub statuses: IndexMap<String, ValveStatus>,
    pub report: Option<SolverReport<f64>>,
    pub metrics: Option<MetricsSummary>,
}

impl ResultDocument {
    pub fn new(net: &Network<f64>, state: &HydraulicState<f64>) -> Self {
        let counts = net.counts();
        ResultDocument {
            schema_version: SCHEMA_VERSION,
            tool: "hydronet".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: None,
            title: net.title.clone(),
            source_units: net.units.flow_unit.token().to_string(),
            counts,
            variables: counts.variables(),
            heads: (0..net.node_count())
                .map(|n| (net.node_id(n).to_string(), state.heads[n]))
                .collect(),
            flows: (0..net.link_count())
                .map(|l| (net.link_id(l).to_string(), state.flows[l]))
                .collect(),
            statuses: net
                .valves
                .iter()
                .zip(&state.valve_statuses)
                .map(|(v, s)| (v.id.clone(), *s))
                .collect(),
            report: None,
            metrics: None,
        }
    }
}
