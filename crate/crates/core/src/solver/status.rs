use serde::{Deserialize, Serialize};

use crate::hydraulics::{ValveLaw, ValveStatus};
use crate::model::Model;
use crate::network::{Network, ValveMode};
use crate::scalar::Scalar;
use crate::state::HydraulicState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusFlip {
    pub iteration: usize,
    pub valve: String,
    pub from: ValveStatus,
    pub to: ValveStatus,
    /// The element stopped switching after this flip.
    pub frozen: bool,
}

/// Flip counting and freezing for PRV/FCV statuses, indexed by valve of the unpruned network.
#[derive(Debug, Clone)]
pub struct StatusTracker {
    freeze_after: usize,
    flips: Vec<usize>,
    held: Vec<[usize; 2]>,
    frozen: Vec<Option<ValveStatus>>,
}

impl StatusTracker {
    pub fn new(valves: usize, freeze_after: usize) -> Self {
        StatusTracker {
            freeze_after: freeze_after.max(1),
            flips: vec![0; valves],
            held: vec![[0, 0]; valves],
            frozen: vec![None; valves],
        }
    }

    pub fn is_frozen(&self, valve: usize) -> bool {
        self.frozen[valve].is_some()
    }

    fn slot(s: ValveStatus) -> usize {
        usize::from(s == ValveStatus::Active)
    }
}

/// Status the hydraulics ask for, ignoring flip history.
fn desired<T: Scalar>(model: &Model<T>, xi: &[T], i: usize) -> ValveStatus {
    let v = &model.valves[i];
    let current = v.props.status;
    if v.mode == ValveMode::Open || current == ValveStatus::Closed {
        return current;
    }
    let l = model.valve_offset() + i;
    let (f, t) = model.inc.ends(l);
    let (hi, hj) = (xi[f], xi[t]);
    let q = xi[model.n_heads() + l];
    match (v.props.law, current) {
        (ValveLaw::Gpv { .. }, _) => ValveStatus::Open,
        (ValveLaw::Prv { head_setting, .. }, ValveStatus::Open) if hj > head_setting => {
            ValveStatus::Active
        }
        (ValveLaw::Prv { head_setting, .. }, ValveStatus::Active) if hi < head_setting => {
            ValveStatus::Open
        }
        (ValveLaw::Fcv { flow_setting, .. }, ValveStatus::Open) if q > flow_setting => {
            ValveStatus::Active
        }
        (ValveLaw::Fcv { .. }, ValveStatus::Active) if hi < hj => ValveStatus::Open,
        _ => current,
    }
}

/// Applies the status rules to the model's valves at iterate `xi`, returning the flips.
pub(crate) fn resolve<T: Scalar>(
    model: &mut Model<T>,
    xi: &[T],
    tracker: &mut StatusTracker,
    iteration: usize,
) -> Vec<StatusFlip> {
    let mut log = Vec::new();
    let next: Vec<ValveStatus> = (0..model.valves.len())
        .map(|i| desired(model, xi, i))
        .collect();
    for (i, want) in next.into_iter().enumerate() {
        let cur = model.valves[i].props.status;
        let k = model.kept_valves[i];
        tracker.held[k][StatusTracker::slot(cur)] += 1;
        if let Some(f) = tracker.frozen[k] {
            model.valves[i].props.status = f;
            continue;
        }
        if want == cur {
            continue;
        }
        tracker.flips[k] += 1;
        let mut to = want;
        let mut frozen = false;
        if tracker.flips[k] >= tracker.freeze_after {
            let [open, active] = tracker.held[k];
            to = match open.cmp(&active) {
                std::cmp::Ordering::Greater => ValveStatus::Open,
                std::cmp::Ordering::Less => ValveStatus::Active,
                std::cmp::Ordering::Equal => want,
            };
            tracker.frozen[k] = Some(to);
            frozen = true;
        }
        model.valves[i].props.status = to;
        if to != cur || frozen {
            log.push(StatusFlip {
                iteration,
                valve: model.net.valves[i].id.clone(),
                from: cur,
                to,
                frozen,
            });
        }
    }
    log
}

/// Status update for a whole network at an SI state.
///
/// `current` holds one status per valve of `net`; closed valves stay closed.
pub fn update_statuses<T: Scalar>(
    net: &Network<T>,
    state: &HydraulicState<T>,
    current: &[ValveStatus],
    tracker: &mut StatusTracker,
) -> crate::error::Result<(Vec<ValveStatus>, Vec<StatusFlip>)> {
    state.check_dims(net)?;
    let mut model = Model::new(net, T::one())?;
    model.set_statuses(&model.restrict_statuses(current));
    let mut xi = state.heads.clone();
    xi.extend(model.restrict_flows(&state.flows));
    let flips = resolve(&mut model, &xi, tracker, 0);
    Ok((model.expand_statuses(&model.statuses()), flips))
}
