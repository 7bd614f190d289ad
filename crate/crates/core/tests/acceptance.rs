//! Acceptance criteria, one PASS/FAIL line each.

use std::time::Instant;

use hydronet::assembly::{emit_gp_monomials, ColLabel, LinearSystem, RowKind, RowLabel, VarKind};
use hydronet::fixtures::{
    self, generate_random_network, Fixture, ANYTOWN_LIKE, EIGHT_NODE_PRV, THREE_NODE,
};
use hydronet::hydraulics::{pdd_demand, PddParams, ValveStatus};
use hydronet::linalg::CsrMatrix;
use hydronet::network::ValveMode;
use hydronet::oracle::{compare, newton_solve, nonlinear_residuals, NewtonConfig};
use hydronet::scalar::norm_inf;
use hydronet::solver::{run, system_at, AccelPolicy, InitialFlows, Termination};
use hydronet::{HydraulicState, Network, Solution, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn solve(net: &Network, cfg: &SolverConfig) -> Result<Solution, String> {
    let s = run(net, cfg).map_err(|e| e.to_string())?;
    ensure(
        s.report.termination == Termination::Converged,
        format!(
            "terminated with {:?} after {} iterations",
            s.report.termination, s.report.iterations_used
        ),
    )?;
    Ok(s)
}

fn newton(net: &Network) -> Result<HydraulicState, String> {
    newton_solve(net, &NewtonConfig::default())
        .map(|o| o.state)
        .map_err(|e| e.to_string())
}

fn long_run() -> SolverConfig {
    SolverConfig {
        max_iter: 20_000,
        ..SolverConfig::default()
    }
}

fn net_of(f: &Fixture) -> Result<Network, String> {
    f.network().map_err(|e| e.to_string())
}

fn value_of(net: &Network, state: &HydraulicState, kind: &str, id: &str) -> Result<f64, String> {
    match kind {
        "head" => net.node_index().get(id).map(|&i| state.heads[i]),
        "flow" => net.link_index().get(id).map(|&i| state.flows[i]),
        _ => None,
    }
    .ok_or_else(|| format!("no {kind} '{id}'"))
}

fn three_node_reproduction() -> Outcome {
    let net = net_of(&THREE_NODE)?;
    let t = Instant::now();
    let s = solve(&net, &SolverConfig::default())?;
    let dt = t.elapsed().as_secs_f64();
    let expected = THREE_NODE.expected().map_err(|e| e.to_string())?;
    for v in expected
        .values
        .iter()
        .filter(|v| v.source == "published table")
    {
        let got = value_of(&net, &s.state, &v.kind, &v.id)?;
        ensure(
            (got - v.value).abs() <= v.tolerance,
            format!(
                "{} {}: {got} vs {} ± {}",
                v.kind, v.id, v.value, v.tolerance
            ),
        )?;
    }
    let en = compare(&s.state, &newton(&net)?)
        .map_err(|e| e.to_string())?
        .en;
    ensure(en <= 5e-3, format!("EN vs Newton {en:.3e}"))?;
    ensure(dt < 0.1, format!("runtime {dt:.3} s"))?;
    Ok(format!("EN {en:.2e}, {:.1} ms", dt * 1e3))
}

fn three_node_convergence() -> Outcome {
    let net = net_of(&THREE_NODE)?;
    let its = solve(&net, &SolverConfig::default())?
        .report
        .iterations_used;
    ensure((5..=40).contains(&its), format!("{its} iterations"))?;
    // Agreement to 1e-6 needs the iteration driven well below the default threshold.
    let mut finals = Vec::new();
    for seed in 0..40u64 {
        let cfg = SolverConfig {
            threshold: 1e-10,
            initial_flows: InitialFlows::Random {
                seed,
                low: 1e-3,
                high: 0.2,
            },
            ..long_run()
        };
        finals.push(solve(&net, &cfg)?.state);
    }
    let mut worst = 0.0f64;
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            worst = worst.max(
                compare(&finals[i], &finals[j])
                    .map_err(|e| e.to_string())?
                    .en,
            );
        }
    }
    ensure(worst <= 1e-6, format!("pairwise EN up to {worst:.3e}"))?;
    Ok(format!("{its} iterations, pairwise EN ≤ {worst:.1e}"))
}

fn eight_node_prv() -> Outcome {
    let base = net_of(&EIGHT_NODE_PRV)?;
    let (_, _, sys) =
        system_at(&base, &SolverConfig::default(), None).map_err(|e| e.to_string())?;
    ensure(sys.dim() == 23, format!("{} variables", sys.dim()))?;
    let downstream = base.node_index()["9"];
    let mut notes = Vec::new();
    for (name, setting, mode) in [
        ("active 45", 45.0, ValveMode::Auto),
        ("setting 100", 100.0, ValveMode::Auto),
        ("open", 45.0, ValveMode::Open),
    ] {
        let mut net = base.clone();
        net.valves[0].setting = setting;
        net.valves[0].mode = mode;
        let s = solve(&net, &long_run())?;
        let en = compare(&s.state, &newton(&net)?)
            .map_err(|e| e.to_string())?
            .en;
        ensure(en <= 0.05, format!("{name}: EN {en:.3e}"))?;
        if name == "active 45" {
            ensure(
                s.state.valve_statuses[0] == ValveStatus::Active,
                "PRV not active",
            )?;
            let h = s.state.heads[downstream];
            ensure((h - 235.0).abs() <= 1e-9, format!("downstream head {h}"))?;
        }
        notes.push(format!("{name} {} EN {en:.1e}", s.state.valve_statuses[0]));
    }
    Ok(notes.join(", "))
}

fn fixed_point_correctness() -> Outcome {
    let t = Instant::now();
    let mut nets: Vec<(String, Network)> = Vec::new();
    for f in fixtures::all() {
        nets.push((f.name.to_string(), net_of(&f)?));
    }
    for seed in 1..=20u64 {
        let n = 10 + (seed as usize - 1) * 50 / 19;
        let net = generate_random_network(seed, n, 0.3, 2.0).map_err(|e| e.to_string())?;
        nets.push((format!("seed {seed} ({n} junctions)"), net));
    }
    let cfg = long_run();
    let mut worst_res = 0.0f64;
    let mut worst_steps = 0;
    for (name, net) in &nets {
        let s = solve(net, &cfg).map_err(|e| format!("{name}: {e}"))?;
        let res = norm_inf(&nonlinear_residuals(net, &s.state).map_err(|e| e.to_string())?);
        ensure(
            res <= 10.0 * cfg.threshold,
            format!("{name}: residual {res:.3e}"),
        )?;
        let warm = NewtonConfig {
            initial: Some(s.state.clone()),
            ..NewtonConfig::default()
        };
        let steps = newton_solve(net, &warm)
            .map_err(|e| format!("{name}: {e}"))?
            .iterations;
        ensure(steps <= 3, format!("{name}: {steps} warm Newton steps"))?;
        worst_res = worst_res.max(res);
        worst_steps = worst_steps.max(steps);
    }
    let dt = t.elapsed().as_secs_f64();
    ensure(dt < 30.0, format!("runtime {dt:.1} s"))?;
    Ok(format!(
        "{} networks, residual ≤ {worst_res:.1e}, Newton steps ≤ {worst_steps}, {dt:.1} s",
        nets.len()
    ))
}

fn contraction_monitoring() -> Outcome {
    let mut notes = Vec::new();
    for f in fixtures::all() {
        let net = net_of(&f)?;
        let cfg = SolverConfig {
            monitor_contraction: true,
            ..long_run()
        };
        let s = solve(&net, &cfg)?;
        let trace = s.report.contraction_trace.ok_or("no contraction trace")?;
        let max = trace.iter().map(|c| c.norm).fold(0.0, f64::max);
        ensure(max < 1.0, format!("{}: contraction estimate {max}", f.name))?;
        let steps = &s.report.pipe_step_trace;
        let stable = &s.report.status_stable;
        for k in 1..steps.len() {
            if stable[k] && stable[k - 1] && steps[k - 1] > 0.0 {
                let ratio = steps[k] / steps[k - 1];
                ensure(
                    ratio <= max + 0.05,
                    format!(
                        "{}: step ratio {ratio} at iteration {k} (max estimate {max})",
                        f.name
                    ),
                )?;
            }
        }
        notes.push(format!("{} max {max:.4}", f.name));
    }
    Ok(notes.join(", "))
}

fn acceleration() -> Outcome {
    let net = net_of(&ANYTOWN_LIKE)?;
    let plain = solve(&net, &long_run())?;
    let cfg = SolverConfig {
        accel: AccelPolicy::Adaptive { cap: 1000.0 },
        ..long_run()
    };
    let fast = solve(&net, &cfg)?;
    let (n0, n1) = (plain.report.iterations_used, fast.report.iterations_used);
    ensure(
        n0 >= 5 * n1,
        format!("{n0} plain vs {n1} accelerated iterations"),
    )?;
    ensure(
        fast.report.accel.interval_violations == 0,
        format!(
            "{} interval violations",
            fast.report.accel.interval_violations
        ),
    )?;
    let reference = newton(&net)?;
    let l = net.link_index()["78"];
    let re = (fast.state.flows[l] - reference.flows[l]).abs() / reference.flows[l].abs() * 100.0;
    ensure(re <= 2.0, format!("relative error of q78 {re:.3}%"))?;
    Ok(format!(
        "{n0} → {n1} iterations ({:.1}×), RE(q78) {re:.3}%",
        n0 as f64 / n1 as f64
    ))
}

fn random_system(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> LinearSystem<f64> {
    let mut t = Vec::new();
    let mut b = Vec::with_capacity(rows);
    for i in 0..rows {
        let k = rng.gen_range(1..=4);
        let mut picked = Vec::new();
        while picked.len() < k {
            let j = rng.gen_range(0..cols);
            if !picked.contains(&j) {
                picked.push(j);
            }
        }
        for j in picked {
            let v = if rng.gen_bool(0.5) {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.gen_range(-50.0..50.0)
            };
            t.push((i, j, v));
        }
        b.push(rng.gen_range(-1e3..1e3));
    }
    LinearSystem {
        a: CsrMatrix::from_triplets(rows, cols, &t),
        b,
        row_labels: (0..rows)
            .map(|i| RowLabel {
                kind: RowKind::Pipe,
                id: format!("r{i}"),
            })
            .collect(),
        col_labels: (0..cols)
            .map(|j| ColLabel {
                kind: if j % 2 == 0 {
                    VarKind::Head
                } else {
                    VarKind::Flow
                },
                id: format!("x{j}"),
            })
            .collect(),
    }
}

fn round_trip(sys: &LinearSystem<f64>, base: f64) -> Result<(), String> {
    let gp = emit_gp_monomials(sys, base, None).map_err(|e| e.to_string())?;
    let rows = gp.to_linear_rows();
    ensure(rows.len() == sys.dim(), "row count changed")?;
    for (i, (coeffs, rhs)) in rows.iter().enumerate() {
        let source: Vec<(String, f64)> = sys
            .a
            .row(i)
            .filter(|e| e.1 != 0.0)
            .map(|(j, v)| (sys.col_labels[j].to_string(), v))
            .collect();
        ensure(
            coeffs.len() == source.len(),
            format!("row {i}: coefficient count"),
        )?;
        for (name, v) in &source {
            ensure(
                coeffs.get(name).map(|c| c.to_bits()) == Some(v.to_bits()),
                format!("row {i}: coefficient of {name}"),
            )?;
        }
        let b = sys.b[i];
        ensure(
            (rhs - b).abs() <= 1e-9 * b.abs().max(1.0),
            format!("row {i} base {base}: rhs {rhs} vs {b}"),
        )?;
    }
    Ok(())
}

fn gp_lp_equivalence() -> Outcome {
    let bases = [1.001, 2.0, std::f64::consts::E];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random = random_system(&mut rng, 200, 40);
    let mut systems = vec![random];
    for f in fixtures::all() {
        let net = net_of(&f)?;
        systems.push(
            system_at(&net, &SolverConfig::default(), None)
                .map_err(|e| e.to_string())?
                .2,
        );
    }
    for sys in &systems {
        for &b in &bases {
            round_trip(sys, b)?;
        }
    }
    for f in fixtures::all() {
        let net = net_of(&f)?;
        let mut reference: Option<HydraulicState> = None;
        for &b in &bases {
            let cfg = SolverConfig {
                gp_base: b,
                ..long_run()
            };
            let s = solve(&net, &cfg)?.state;
            if let Some(r) = &reference {
                let same = r
                    .xi()
                    .iter()
                    .zip(s.xi())
                    .all(|(x, y)| x.to_bits() == y.to_bits());
                ensure(same, format!("{}: output depends on the GP base", f.name))?;
            } else {
                reference = Some(s);
            }
        }
    }
    Ok(format!("{} systems × {} bases", systems.len(), bases.len()))
}

fn scale_smoke() -> Outcome {
    let net = generate_random_network(370, 370, 0.3, 2.0).map_err(|e| e.to_string())?;
    let (_, _, sys) = system_at(&net, &SolverConfig::default(), None).map_err(|e| e.to_string())?;
    let sparsity = sys.a.sparsity();
    ensure(sparsity >= 0.99, format!("sparsity {sparsity:.4}"))?;
    let t = Instant::now();
    let s = solve(&net, &long_run())?;
    let dt = t.elapsed().as_secs_f64();
    ensure(dt < 10.0, format!("runtime {dt:.2} s"))?;
    let m = compare(&s.state, &newton(&net)?).map_err(|e| e.to_string())?;
    let frac = m.fraction_within(0.0, 0.5);
    ensure(
        frac >= 0.99,
        format!("{:.2}% of AE in [0, 0.5]", frac * 100.0),
    )?;
    Ok(format!(
        "{} variables, sparsity {:.2}%, {} iterations in {dt:.2} s, {:.1}% of AE in [0, 0.5]",
        sys.dim(),
        sparsity * 100.0,
        s.report.iterations_used,
        frac * 100.0
    ))
}

fn with_pdd(net: &Network, span: f64, floor: Option<f64>) -> Network {
    let mut out = net.clone();
    for j in &mut out.junctions {
        let (h_min, h_ser) = match floor {
            Some(f) => (f, f + span),
            None => (j.elevation, j.elevation + span),
        };
        j.pdd = Some(PddParams {
            d_dsgn: j.demand,
            h_ser,
            h_min,
            gamma: 0.5,
        });
    }
    out
}

fn pdd_extension() -> Outcome {
    let base = net_of(&EIGHT_NODE_PRV)?;
    let tight = SolverConfig {
        threshold: 1e-10,
        ..long_run()
    };
    let net = with_pdd(&base, 80.0, None);
    let s = solve(&net, &tight)?;
    let r = nonlinear_residuals(&net, &s.state).map_err(|e| e.to_string())?;
    let nj = net.junctions.len();
    let balance = norm_inf(&r[..nj]);
    ensure(
        balance <= 1e-6,
        format!("mass balance residual {balance:.3e}"),
    )?;
    let partial = (0..nj)
        .filter(|&j| {
            let p = net.junctions[j].pdd.unwrap();
            s.state.heads[j] > p.h_min && s.state.heads[j] < p.h_ser
        })
        .count();
    ensure(partial > 0, "no junction in the partial-delivery range")?;
    let mut jump = 0.0f64;
    for j in &net.junctions {
        let p = j.pdd.unwrap();
        // One-sided limits taken at the neighbouring representable heads.
        for h in [p.h_ser, p.h_min] {
            let below = f64::from_bits(h.to_bits() - 1);
            let above = f64::from_bits(h.to_bits() + 1);
            let at = pdd_demand(h, &p);
            jump = jump.max((pdd_demand(below, &p) - at).abs());
            jump = jump.max((pdd_demand(above, &p) - at).abs());
        }
    }
    ensure(jump <= 1e-9, format!("demand jump {jump:.3e}"))?;
    let demand_driven = solve(&base, &tight)?.state;
    let far = solve(&with_pdd(&base, 1e6, Some(-1e9)), &tight)?.state;
    let en = compare(&far, &demand_driven).map_err(|e| e.to_string())?.en;
    ensure(en <= 1e-6, format!("EN vs demand-driven {en:.3e}"))?;
    Ok(format!(
        "balance {balance:.1e}, {partial} partial junctions, jump {jump:.1e}, limit EN {en:.1e}"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 three-node reproduction", three_node_reproduction),
        ("2 three-node convergence", three_node_convergence),
        ("3 eight-node PRV", eight_node_prv),
        ("4 fixed-point correctness", fixed_point_correctness),
        ("5 contraction monitoring", contraction_monitoring),
        ("6 acceleration", acceleration),
        ("7 GP-LP equivalence", gp_lp_equivalence),
        ("8 scale smoke test", scale_smoke),
        ("9 PDD extension", pdd_extension),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL criterion {name}: {reason}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
