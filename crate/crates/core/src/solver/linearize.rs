use crate::assembly::LinearizationCoeffs;
use crate::hydraulics::{
    linearize_pdd, linearize_pipe, linearize_pump, linearize_valve, LinearRowSpec, PipeProps,
    ValveLaw, ValveStatus,
};
use crate::model::Model;
use crate::scalar::Scalar;

/// Row constants at the iterate `xi = [h; q]` (scaled flows).
pub fn coefficients<T: Scalar>(model: &Model<T>, xi: &[T]) -> LinearizationCoeffs<T> {
    let nh = model.n_heads();
    let q = &xi[nh..];
    let junction_rhs = (0..model.net.junctions.len())
        .map(|j| match &model.pdd[j] {
            Some(p) => linearize_pdd(xi[j], p),
            None => model.demand[j],
        })
        .collect();
    let junction_pdd = model.pdd.iter().map(Option::is_some).collect();
    let pipe = model
        .pipes
        .iter()
        .enumerate()
        .map(|(i, law)| linearize_pipe(q[i], &law.props_at(q[i])))
        .collect();
    let po = model.pump_offset();
    let pump = model
        .pumps
        .iter()
        .enumerate()
        .map(|(i, p)| linearize_pump(q[po + i], p))
        .collect();
    let vo = model.valve_offset();
    let valve = model
        .valves
        .iter()
        .enumerate()
        .map(|(i, v)| linearize_valve(q[vo + i], &v.props).expect("closed valves are pruned"))
        .collect();
    LinearizationCoeffs {
        junction_rhs,
        junction_pdd,
        pipe,
        pump,
        valve,
    }
}

/// Links whose row follows the pipe template `h_i − h_j − q = c`, with the slope of
/// their loss law at the iterate (the `A_f` diagonal).
pub fn pipe_like<T: Scalar>(model: &Model<T>, xi: &[T]) -> (Vec<usize>, Vec<T>) {
    let nh = model.n_heads();
    let q = &xi[nh..];
    let mut links = Vec::new();
    let mut diag = Vec::new();
    let slope = |p: &PipeProps<T>, q: T| {
        p.exponent * p.resistance * q.abs().powf(p.exponent - T::one()) - T::one()
    };
    for (i, law) in model.pipes.iter().enumerate() {
        links.push(i);
        diag.push(slope(&law.props_at(q[i]), q[i]));
    }
    let vo = model.valve_offset();
    for (i, v) in model.valves.iter().enumerate() {
        let l = vo + i;
        let row = linearize_valve(q[l], &v.props);
        if !matches!(row, Ok(LinearRowSpec::Loss(_))) || v.props.status == ValveStatus::Closed {
            continue;
        }
        links.push(l);
        diag.push(match v.props.law {
            ValveLaw::Gpv {
                openness,
                resistance,
                exponent,
            } => slope(
                &PipeProps {
                    resistance: resistance / openness,
                    exponent,
                },
                q[l],
            ),
            ValveLaw::Prv { loss, .. } | ValveLaw::Fcv { loss, .. } => {
                T::of(2.0) * loss * q[l].abs() - T::one()
            }
        });
    }
    (links, diag)
}
