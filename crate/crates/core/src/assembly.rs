//! Square linear system of one iteration, its exact solution, and its monomial form.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulics::LinearRowSpec;
use crate::linalg::{CsrMatrix, Factorization};
use crate::network::{IncidencePartition, LinkKind, Network, NodeKind};
use crate::scalar::{norm_inf, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    MassBalance,
    Reservoir,
    Tank,
    Pipe,
    Pump,
    Valve,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowLabel {
    pub kind: RowKind,
    pub id: String,
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            RowKind::MassBalance => "mass balance",
            RowKind::Reservoir => "reservoir",
            RowKind::Tank => "tank",
            RowKind::Pipe => "pipe",
            RowKind::Pump => "pump",
            RowKind::Valve => "valve",
        };
        write!(f, "{k} {}", self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Head,
    Flow,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColLabel {
    pub kind: VarKind,
    pub id: String,
}

impl fmt::Display for ColLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Head => write!(f, "h[{}]", self.id),
            VarKind::Flow => write!(f, "q[{}]", self.id),
        }
    }
}

/// Per-iteration constants of the linear rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationCoeffs<T> {
    /// Junction right-hand side: demand, or `c^J` for pressure-driven junctions.
    pub junction_rhs: Vec<T>,
    /// Junctions whose row carries `−h` (pressure-driven demand).
    pub junction_pdd: Vec<bool>,
    pub pipe: Vec<T>,
    /// `(c₁, c₂)` per pump.
    pub pump: Vec<(T, T)>,
    pub valve: Vec<LinearRowSpec<T>>,
}

/// `A·ξ = b` with `ξ = [heads; flows]`.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    pub a: CsrMatrix<T>,
    pub b: Vec<T>,
    pub row_labels: Vec<RowLabel>,
    pub col_labels: Vec<ColLabel>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn residual(&self, x: &[T]) -> Vec<T> {
        self.a
            .mul_vec(x)
            .into_iter()
            .zip(&self.b)
            .map(|(ax, &b)| ax - b)
            .collect()
    }

    pub fn singular_error(&self, rows: &[usize]) -> Error {
        Error::SingularSystem {
            rows: rows
                .iter()
                .map(|&r| self.row_labels[r].to_string())
                .collect(),
        }
    }

    pub fn factor(&self) -> Result<Factorization<T>> {
        Factorization::factor(&self.a).map_err(|e| self.singular_error(&e.0))
    }
}

/// Builds the linear system for a network without closed links.
pub fn assemble<T: Scalar>(
    net: &Network<T>,
    inc: &IncidencePartition,
    coeffs: &LinearizationCoeffs<T>,
) -> Result<LinearSystem<T>> {
    let c = net.counts();
    let check = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {got} coefficients for {want} elements"
            )))
        }
    };
    check("junctions", coeffs.junction_rhs.len(), c.junctions)?;
    check("junction flags", coeffs.junction_pdd.len(), c.junctions)?;
    check("pipes", coeffs.pipe.len(), c.pipes)?;
    check("pumps", coeffs.pump.len(), c.pumps)?;
    check("valves", coeffs.valve.len(), c.valves)?;
    check("incidence columns", inc.link_count(), c.flows())?;

    let nh = c.heads();
    let n = c.variables();
    let one = T::one();
    let mut t: Vec<(usize, usize, T)> = Vec::with_capacity(4 * n);
    let mut b = vec![T::zero(); n];
    let mut row_labels = Vec::with_capacity(n);

    // Junction mass balance Σq_in − Σq_out (− h) = rhs: the negated incidence row.
    for (l, (f, to)) in (0..c.flows()).map(|l| (l, inc.ends(l))) {
        if f < c.junctions {
            t.push((f, nh + l, -one));
        }
        if to < c.junctions {
            t.push((to, nh + l, one));
        }
    }
    for (j, junction) in net.junctions.iter().enumerate() {
        if coeffs.junction_pdd[j] {
            t.push((j, j, -one));
        }
        b[j] = coeffs.junction_rhs[j];
        row_labels.push(RowLabel {
            kind: RowKind::MassBalance,
            id: junction.id.clone(),
        });
    }
    for node in inc
        .node_range(NodeKind::Reservoir)
        .chain(inc.node_range(NodeKind::Tank))
    {
        t.push((node, node, one));
        b[node] = net.fixed_head(node).expect("fixed-head node");
        row_labels.push(RowLabel {
            kind: if net.node_kind(node) == NodeKind::Reservoir {
                RowKind::Reservoir
            } else {
                RowKind::Tank
            },
            id: net.node_id(node).to_string(),
        });
    }

    let loss_row = |t: &mut Vec<(usize, usize, T)>, row: usize, l: usize, qcoef: T| {
        let (f, to) = inc.ends(l);
        t.push((row, f, one));
        t.push((row, to, -one));
        t.push((row, nh + l, -qcoef));
    };
    for l in inc.link_range(LinkKind::Pipe) {
        let row = nh + l;
        loss_row(&mut t, row, l, one);
        b[row] = coeffs.pipe[l];
        row_labels.push(RowLabel {
            kind: RowKind::Pipe,
            id: net.link_id(l).to_string(),
        });
    }
    let pumps = inc.link_range(LinkKind::Pump);
    for l in pumps.clone() {
        let row = nh + l;
        let (c1, c2) = coeffs.pump[l - pumps.start];
        loss_row(&mut t, row, l, c2);
        b[row] = c1;
        row_labels.push(RowLabel {
            kind: RowKind::Pump,
            id: net.link_id(l).to_string(),
        });
    }
    let valves = inc.link_range(LinkKind::Valve);
    for l in valves.clone() {
        let row = nh + l;
        match coeffs.valve[l - valves.start] {
            LinearRowSpec::Loss(cw) => {
                loss_row(&mut t, row, l, one);
                b[row] = cw;
            }
            LinearRowSpec::HeadSetting(h) => {
                t.push((row, inc.ends(l).1, one));
                b[row] = h;
            }
            LinearRowSpec::FlowSetting(q) => {
                t.push((row, nh + l, one));
                b[row] = q;
            }
        }
        row_labels.push(RowLabel {
            kind: RowKind::Valve,
            id: net.link_id(l).to_string(),
        });
    }

    let col_labels = (0..nh)
        .map(|i| ColLabel {
            kind: VarKind::Head,
            id: net.node_id(i).to_string(),
        })
        .chain((0..c.flows()).map(|l| ColLabel {
            kind: VarKind::Flow,
            id: net.link_id(l).to_string(),
        }))
        .collect();
    Ok(LinearSystem {
        a: CsrMatrix::from_triplets(n, n, &t),
        b,
        row_labels,
        col_labels,
    })
}

/// Solves the system exactly, checking the residual.
pub fn solve_linear<T: Scalar>(sys: &LinearSystem<T>) -> Result<Vec<T>> {
    let f = sys.factor()?;
    let x = f.solve(&sys.b);
    let r = norm_inf(&sys.residual(&x));
    let tol = T::of(1e-9).max(T::epsilon() * T::of(1e4)) * (T::one() + norm_inf(&sys.b));
    if !(r <= tol) {
        return Err(Error::SingularSystem {
            rows: vec![format!("residual {r:e} exceeds {tol:e}")],
        });
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpKind {
    MonomialEquality,
    PosynomialInequality,
}

/// `Π x̂ᵢ^(aᵢ) · constant = 1` (or `≤ 1`) with `x̂ᵢ = base^(xᵢ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConstraint<T> {
    pub kind: GpKind,
    pub label: String,
    pub exponents: IndexMap<String, T>,
    /// `base^(log_constant)`; may under- or overflow for large right-hand sides.
    pub constant: T,
    /// Exponent of the base in `constant`, i.e. the negated right-hand side.
    pub log_constant: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConstraintSet<T> {
    pub base: T,
    pub constraints: Vec<GpConstraint<T>>,
}

/// Variable bounds turned into posynomial inequalities; `None` entries are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableBounds<T> {
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
}

/// Rewrites every row `Σaᵢxᵢ = β` as `Π x̂ᵢ^(aᵢ)·b^(−β) = 1`.
pub fn emit_gp_monomials<T: Scalar>(
    sys: &LinearSystem<T>,
    base: T,
    bounds: Option<&VariableBounds<T>>,
) -> Result<GpConstraintSet<T>> {
    if !(base > T::one()) {
        return Err(Error::InvalidConfig(format!(
            "GP base {base} must exceed 1"
        )));
    }
    let mut constraints = Vec::with_capacity(sys.dim());
    for i in 0..sys.dim() {
        let exponents = sys
            .a
            .row(i)
            .filter(|e| e.1 != T::zero())
            .map(|(j, v)| (sys.col_labels[j].to_string(), v))
            .collect();
        let log_constant = -sys.b[i];
        constraints.push(GpConstraint {
            kind: GpKind::MonomialEquality,
            label: sys.row_labels[i].to_string(),
            exponents,
            constant: base.powf(log_constant),
            log_constant,
        });
    }
    if let Some(bd) = bounds {
        for (j, col) in sys.col_labels.iter().enumerate() {
            if let Some(Some(hi)) = bd.upper.get(j) {
                constraints.push(GpConstraint {
                    kind: GpKind::PosynomialInequality,
                    label: format!("upper bound {col}"),
                    exponents: [(col.to_string(), T::one())].into_iter().collect(),
                    constant: base.powf(-*hi),
                    log_constant: -*hi,
                });
            }
            if let Some(Some(lo)) = bd.lower.get(j) {
                constraints.push(GpConstraint {
                    kind: GpKind::PosynomialInequality,
                    label: format!("lower bound {col}"),
                    exponents: [(col.to_string(), -T::one())].into_iter().collect(),
                    constant: base.powf(*lo),
                    log_constant: *lo,
                });
            }
        }
    }
    Ok(GpConstraintSet { base, constraints })
}

impl<T: Scalar> GpConstraint<T> {
    /// Right-hand side recovered by taking `log_base` of the constant.
    pub fn rhs_from_constant(&self, base: T) -> T {
        if self.constant.is_normal() {
            -(self.constant.ln() / base.ln())
        } else {
            -self.log_constant
        }
    }
}

impl<T: Scalar> GpConstraintSet<T> {
    /// Linear rows `(coefficients, rhs)` obtained by taking `log_base` of each equality.
    pub fn to_linear_rows(&self) -> Vec<(IndexMap<String, T>, T)> {
        self.constraints
            .iter()
            .filter(|c| c.kind == GpKind::MonomialEquality)
            .map(|c| (c.exponents.clone(), c.rhs_from_constant(self.base)))
            .collect()
    }
}

/// `A` in Matrix Market coordinate format.
pub fn matrix_market<T: Scalar>(a: &CsrMatrix<T>) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    s.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), a.nnz()));
    for (i, j, v) in a.triplets() {
        s.push_str(&format!("{} {} {:e}\n", i + 1, j + 1, v));
    }
    s
}

/// A vector in Matrix Market array format.
pub fn matrix_market_vector<T: Scalar>(b: &[T]) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    s.push_str(&format!("{} 1\n", b.len()));
    for v in b {
        s.push_str(&format!("{v:e}\n"));
    }
    s
}

/// Row and column labels for a dumped system.
pub fn labels_json<T: Scalar>(sys: &LinearSystem<T>) -> serde_json::Value {
    serde_json::json!({
        "rows": sys.row_labels,
        "columns": sys.col_labels,
    })
}
