//! Numerical certification of the equilibrium.
//!
//! Player 1's value is checked against its HJB equation inside the band.
//! Player 2's value is checked against the three quasi-variational
//! inequalities on a `(t, x)` grid: the HJB inequality, the obstacle
//! condition `V2 <= R V2` (with the intervention operator `R` computed by
//! brute force over a grid of post-impulse states), and their
//! complementarity. The per-time sufficient conditions on the band edges and
//! the strict-convexity margin are evaluated alongside, and a backward
//! induction on a grid provides an independent estimate of Player 2's value.

use rayon::prelude::*;

use crate::equilibrium::{feedback, Equilibrium};
use crate::error::{Error, Result};
use crate::model::{linspace, GameParams, StateBox};
use crate::policy::{player2_value, quadratic, Region, Thresholds};
use crate::riccati::{CoefficientPath, Coefficients, RiccatiConstants};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// HJB and QVI residuals.
    pub residual: f64,
    /// Obstacle-condition slack before the post-impulse grid term is added.
    pub gap: f64,
    /// Spacing of the post-impulse state grid as a fraction of the box width.
    pub xi_resolution: f64,
    /// Max discrepancy between the grid oracle and the closed-form value.
    pub dp_value: f64,
    /// Allowed distance, in grid cells, between oracle and closed-form band edges.
    pub dp_bracket_cells: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-5,
            gap: 1e-6,
            xi_resolution: 1e-3,
            dp_value: 5e-2,
            dp_bracket_cells: 2.0,
        }
    }
}

/// Residual of Player 1's HJB equation for the quadratic `½ p1 x² + q1 x + n1`.
pub fn hjb1_residual_from(k: &Coefficients, params: &GameParams, x: f64) -> f64 {
    let u = feedback(params, k, x);
    let dphi_dt = quadratic(k.dp1, k.dq1, k.dn1, x);
    let dphi_dx = k.p1 * x + k.q1;
    dphi_dt
        + params.p1_running_cost(x, u)
        + dphi_dx * (params.drift * x + params.control_gain * u)
}

pub fn hjb1_residual(eq: &Equilibrium, t: f64, x: f64) -> Result<f64> {
    let k = eq.coefficients(t);
    let th = Thresholds::from_coefficients(&k, eq.params());
    if th.region(x) != Region::Interior {
        return Err(Error::RegionError { t, x });
    }
    Ok(hjb1_residual_from(&k, eq.params(), x))
}

/// `∂Φ2/∂t` at `y`.
fn phi2_dt(k: &Coefficients, y: f64) -> f64 {
    quadratic(k.dp2, k.dq2, k.dn2, y)
}

/// Left side of Player 2's HJB inequality, `∂V2/∂t + ½ w2 (x - ρ2)² + ∂V2/∂x · drift`,
/// with Player 1's control active only inside the band.
pub fn qvi_residual_from(k: &Coefficients, th: &Thresholds, params: &GameParams, x: f64) -> f64 {
    let running = params.p2_running_cost(x);
    let a = params.drift;
    let (c, d) = (params.marginal_cost_up, params.marginal_cost_down);
    match th.region(x) {
        Region::Interior => {
            let u = feedback(params, k, x);
            phi2_dt(k, x) + running + (k.p2 * x + k.q2) * (a * x + params.control_gain * u)
        }
        Region::Below => {
            let alpha_dot = -(k.dq2 * k.p2 - (k.q2 + c) * k.dp2) / (k.p2 * k.p2);
            let dv_dt = phi2_dt(k, th.alpha) + (k.p2 * th.alpha + k.q2 + c) * alpha_dot;
            dv_dt + running - c * a * x
        }
        Region::Above => {
            let beta_dot = -(k.dq2 * k.p2 + (d - k.q2) * k.dp2) / (k.p2 * k.p2);
            let dv_dt = phi2_dt(k, th.beta) + (k.p2 * th.beta + k.q2 - d) * beta_dot;
            dv_dt + running + d * a * x
        }
    }
}

/// Player 2's value on a grid of candidate post-impulse states at one instant.
struct InterventionGrid {
    targets: Vec<f64>,
    values: Vec<f64>,
}

impl InterventionGrid {
    fn new(k: &Coefficients, th: &Thresholds, params: &GameParams, lo: f64, hi: f64, spacing: f64) -> Self {
        let n = ((hi - lo) / spacing).ceil() as usize + 1;
        let targets: Vec<f64> = (0..n).map(|i| lo + spacing * i as f64).collect();
        let values = targets
            .iter()
            .map(|&y| player2_value(k, th, params, y))
            .collect();
        Self { targets, values }
    }

    /// `min over grid targets y (and over y = x) of V2(t, y) + h(y - x)`,
    /// returned with the minimizing impulse size.
    fn best(&self, params: &GameParams, x: f64, v_at_x: f64) -> (f64, f64) {
        let mut best = (v_at_x + params.p2_impulse_cost(0.0), 0.0);
        for (&y, &v) in self.targets.iter().zip(&self.values) {
            let cand = v + params.p2_impulse_cost(y - x);
            if cand < best.0 {
                best = (cand, y - x);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QviPoint {
    pub region: Region,
    pub value: f64,
    pub residual: f64,
    /// `V2 - R V2`.
    pub gap: f64,
    pub complementarity: f64,
    /// Impulse size attaining the brute-force minimum in `R V2`.
    pub best_xi: f64,
}

fn target_range(state_box: &StateBox, th: &Thresholds) -> (f64, f64) {
    (state_box.lo.min(th.ell1), state_box.hi.max(th.ell2))
}

/// Residual, obstacle gap and complementarity product at `(t, x)`.
/// The intervention operator is minimized over post-impulse states spaced
/// `xi_resolution * box width` apart, covering the box and the band.
pub fn qvi_check(eq: &Equilibrium, state_box: &StateBox, xi_resolution: f64, t: f64, x: f64) -> QviPoint {
    let params = eq.params();
    let k = eq.coefficients(t);
    let th = Thresholds::from_coefficients(&k, params);
    let (lo, hi) = target_range(state_box, &th);
    let grid = InterventionGrid::new(&k, &th, params, lo, hi, xi_resolution * state_box.width());
    qvi_point(&k, &th, params, &grid, x)
}

fn qvi_point(k: &Coefficients, th: &Thresholds, params: &GameParams, grid: &InterventionGrid, x: f64) -> QviPoint {
    let value = player2_value(k, th, params, x);
    let residual = qvi_residual_from(k, th, params, x);
    let (rv, best_xi) = grid.best(params, x, value);
    let gap = value - rv;
    QviPoint {
        region: th.region(x),
        value,
        residual,
        gap,
        complementarity: gap * residual,
        best_xi,
    }
}

/// Per-time sufficient conditions on the band edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeConditions {
    pub t: f64,
    pub theta_alpha: f64,
    pub theta_beta: f64,
    /// Smaller root of the lower-branch residual; `None` when `theta_alpha < 0`.
    pub x11: Option<f64>,
    /// Larger root of the upper-branch residual; `None` when `theta_beta < 0`.
    pub x22: Option<f64>,
    /// `x11 - ell1`.
    pub margin_ell1: Option<f64>,
    /// `ell2 - x22`.
    pub margin_ell2: Option<f64>,
}

impl EdgeConditions {
    /// A negative discriminant means the branch residual has no real root, so
    /// it is positive for every state and the condition holds vacuously.
    pub fn lower_holds(&self) -> bool {
        self.margin_ell1.is_none_or(|m| m >= 0.0)
    }

    pub fn upper_holds(&self) -> bool {
        self.margin_ell2.is_none_or(|m| m >= 0.0)
    }
}

/// Below `ell1` the QVI residual is `½ w2 x² - (c a + w2 ρ2) x + ½ w2 ρ2² + ∂Φ2/∂t(α)`,
/// above `ell2` it is `½ w2 x² + (d a - w2 ρ2) x + ½ w2 ρ2² + ∂Φ2/∂t(β)`. The
/// conditions require the band edges to lie outside the roots.
pub fn edge_conditions(eq: &Equilibrium, t: f64) -> EdgeConditions {
    let k = eq.coefficients(t);
    let params = eq.params();
    let th = Thresholds::from_coefficients(&k, params);
    edge_conditions_from(&k, &th, params)
}

fn edge_conditions_from(k: &Coefficients, th: &Thresholds, params: &GameParams) -> EdgeConditions {
    let a = params.drift;
    let (c, d) = (params.marginal_cost_up, params.marginal_cost_down);
    let w2 = params.p2_state_weight;
    let rho2 = params.p2_target;
    let theta_alpha = c * c * a * a + 2.0 * w2 * (c * a * rho2 - phi2_dt(k, th.alpha));
    let theta_beta = d * d * a * a - 2.0 * w2 * (d * a * rho2 + phi2_dt(k, th.beta));
    let x11 = (theta_alpha >= 0.0).then(|| ((c * a + w2 * rho2) - theta_alpha.sqrt()) / w2);
    let x22 = (theta_beta >= 0.0).then(|| (-(d * a - w2 * rho2) + theta_beta.sqrt()) / w2);
    EdgeConditions {
        t: k.t,
        theta_alpha,
        theta_beta,
        x11,
        x22,
        margin_ell1: x11.map(|r| r - th.ell1),
        margin_ell2: x22.map(|r| th.ell2 - r),
    }
}

/// `H θ + w2 (1 - e^{θt} C1² - 2 t θ C1)`; positive means `V2` is strictly
/// convex inside the band at `t`.
pub fn convexity_margin(consts: &RiccatiConstants, params: &GameParams, t: f64) -> f64 {
    consts.convexity_margin(params, t)
}

/// Backward-induction estimate of Player 2's value on a `(t, x)` grid.
#[derive(Debug, Clone)]
pub struct DpOracle {
    /// `nt + 1` time nodes.
    pub times: Vec<f64>,
    /// `nx + 1` state nodes.
    pub xs: Vec<f64>,
    /// `values[k][j]` at `(times[k], xs[j])`.
    pub values: Vec<Vec<f64>>,
    /// Whether intervening beats waiting at `(times[k], xs[j])`.
    pub intervene: Vec<Vec<bool>>,
}

impl DpOracle {
    pub fn cell(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// First and last waiting node at time layer `k`, i.e. the oracle's band edges.
    pub fn band_edges(&self, k: usize) -> Option<(f64, f64)> {
        let row = &self.intervene[k];
        let first = row.iter().position(|&i| !i)?;
        let last = row.iter().rposition(|&i| !i)?;
        Some((self.xs[first], self.xs[last]))
    }
}

/// Explicit backward induction: each layer first takes one Euler step of the
/// closed-loop dynamics (linear interpolation in `x`, clamped at the box
/// edges) plus the running cost, then lets Player 2 jump to any grid state.
pub fn dp_oracle_v2(
    params: &GameParams,
    path: &CoefficientPath,
    state_box: &StateBox,
    nt: usize,
    nx: usize,
) -> Result<DpOracle> {
    if nt < 16 || nx < 16 {
        return Err(Error::InvalidArgument(format!(
            "oracle grid must be at least 16 x 16, got {nt} x {nx}"
        )));
    }
    let big_t = params.horizon;
    let dt = big_t / nt as f64;
    let times = linspace(0.0, big_t, nt + 1);
    let xs = state_box.linspace(nx + 1);
    let dx = xs[1] - xs[0];
    let b_x = path.constants().b_x;

    // Impulse cost between every pair of nodes.
    let cost: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| xs.iter().map(|&y| params.p2_impulse_cost(y - x)).collect())
        .collect();

    let mut values = vec![Vec::new(); nt + 1];
    let mut intervene = vec![Vec::new(); nt + 1];
    values[nt] = xs.iter().map(|&x| params.p2_terminal_cost(x)).collect();
    intervene[nt] = vec![false; nx + 1];

    for k in (0..nt).rev() {
        let t = times[k];
        let a_x = path.constants().a_x(t);
        let q1 = path.q1_at(t);
        let next = &values[k + 1];
        let wait: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let moved = x + dt * (a_x * x + b_x * q1);
                let u = ((moved - state_box.lo) / dx).clamp(0.0, nx as f64);
                let j = (u.floor() as usize).min(nx - 1);
                let s = u - j as f64;
                let cont = (1.0 - s) * next[j] + s * next[j + 1];
                cont + dt * params.p2_running_cost(x)
            })
            .collect();
        let mut layer = Vec::with_capacity(nx + 1);
        let mut flags = Vec::with_capacity(nx + 1);
        for (j, &w) in wait.iter().enumerate() {
            let jump = cost[j]
                .iter()
                .zip(&wait)
                .map(|(h, v)| h + v)
                .fold(f64::INFINITY, f64::min);
            flags.push(jump < w);
            layer.push(jump.min(w));
        }
        values[k] = layer;
        intervene[k] = flags;
    }
    Ok(DpOracle {
        times,
        xs,
        values,
        intervene,
    })
}

/// Comparison of the grid oracle with the closed-form value at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpComparison {
    pub max_discrepancy: f64,
    pub worst_x: f64,
    pub cell: f64,
    pub oracle_lower_edge: f64,
    pub oracle_upper_edge: f64,
    pub ell1: f64,
    pub ell2: f64,
}

impl DpComparison {
    pub fn lower_edge_error(&self) -> f64 {
        (self.oracle_lower_edge - self.ell1).abs()
    }

    pub fn upper_edge_error(&self) -> f64 {
        (self.oracle_upper_edge - self.ell2).abs()
    }
}

pub fn compare_dp_oracle(eq: &Equilibrium, oracle: &DpOracle) -> DpComparison {
    let mut worst = (0.0, oracle.xs[0]);
    let n = oracle.xs.len();
    for j in 1..n - 1 {
        let x = oracle.xs[j];
        let diff = (oracle.values[0][j] - eq.value_v2(0.0, x)).abs();
        if diff > worst.0 {
            worst = (diff, x);
        }
    }
    let th = eq.thresholds(0.0);
    let (lo_edge, hi_edge) = oracle
        .band_edges(0)
        .unwrap_or((f64::NAN, f64::NAN));
    DpComparison {
        max_discrepancy: worst.0,
        worst_x: worst.1,
        cell: oracle.cell(),
        oracle_lower_edge: lo_edge,
        oracle_upper_edge: hi_edge,
        ell1: th.ell1,
        ell2: th.ell2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Number of time nodes, endpoints included.
    pub nt: usize,
    /// Number of state nodes, endpoints included.
    pub nx: usize,
    pub state_box: StateBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRecord {
    pub t: f64,
    pub x: f64,
    pub region: Region,
    /// Only inside the band.
    pub hjb1_residual: Option<f64>,
    pub qvi_residual: f64,
    pub gap: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRecord {
    pub t: f64,
    pub p2: f64,
    pub thresholds: Thresholds,
    pub edges: EdgeConditions,
    pub convexity_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    /// The bound it was compared with.
    pub bound: f64,
    pub at_t: Option<f64>,
    pub at_x: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub nodes: Vec<NodeRecord>,
    pub times: Vec<TimeRecord>,
    pub dp: Option<DpComparison>,
    pub summary: Vec<ConditionSummary>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.summary.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionSummary> {
        self.summary.iter().find(|c| c.name == name)
    }

    /// Tolerance on `|V2 - R V2|` in the intervention set implied by the post-impulse grid.
    pub fn xi_tolerance(&self) -> f64 {
        xi_tolerance(&self.tolerances, &self.grid.state_box, &self.grid)
    }
}

fn xi_tolerance(tol: &Tolerances, state_box: &StateBox, _grid: &GridSpec) -> f64 {
    tol.xi_resolution * state_box.width()
}

/// Runs every check on `grid`. With `with_oracle`, the backward-induction
/// oracle is run on `(nt - 1) x (nx - 1)` cells and compared at `t = 0`.
pub fn verify(eq: &Equilibrium, grid: GridSpec, tol: Tolerances, with_oracle: bool) -> Result<VerificationReport> {
    if grid.nt < 2 || grid.nx < 2 {
        return Err(Error::InvalidArgument("verification grid needs at least 2 x 2 nodes".into()));
    }
    let params = *eq.params();
    let t_nodes = linspace(0.0, eq.horizon(), grid.nt);
    let x_nodes = grid.state_box.linspace(grid.nx);
    let spacing = tol.xi_resolution * grid.state_box.width();

    let rows: Vec<(TimeRecord, Vec<NodeRecord>)> = t_nodes
        .par_iter()
        .map(|&t| {
            let k = eq.coefficients(t);
            let th = Thresholds::from_coefficients(&k, &params);
            let (lo, hi) = target_range(&grid.state_box, &th);
            let igrid = InterventionGrid::new(&k, &th, &params, lo, hi, spacing);
            let nodes = x_nodes
                .iter()
                .map(|&x| {
                    let q = qvi_point(&k, &th, &params, &igrid, x);
                    NodeRecord {
                        t,
                        x,
                        region: q.region,
                        hjb1_residual: (q.region == Region::Interior)
                            .then(|| hjb1_residual_from(&k, &params, x)),
                        qvi_residual: q.residual,
                        gap: q.gap,
                        complementarity: q.complementarity,
                    }
                })
                .collect();
            let rec = TimeRecord {
                t,
                p2: k.p2,
                thresholds: th,
                edges: edge_conditions_from(&k, &th, &params),
                convexity_margin: convexity_margin(eq.constants(), &params, t),
            };
            (rec, nodes)
        })
        .collect();

    let mut times = Vec::with_capacity(rows.len());
    let mut nodes = Vec::with_capacity(grid.nt * grid.nx);
    for (rec, row) in rows {
        times.push(rec);
        nodes.extend(row);
    }

    let dp = if with_oracle {
        let oracle = dp_oracle_v2(&params, eq.path(), &grid.state_box, grid.nt - 1, grid.nx - 1)?;
        Some(compare_dp_oracle(eq, &oracle))
    } else {
        None
    };

    let x_spacing = grid.state_box.width() / (grid.nx - 1) as f64;
    let summary = summarize(&nodes, &times, dp.as_ref(), &tol, spacing, x_spacing);
    Ok(VerificationReport {
        grid,
        tolerances: tol,
        nodes,
        times,
        dp,
        summary,
    })
}

/// Largest value of `f` over the nodes where it is defined, with its
/// location. NaN counts as `+inf` so that it always fails.
fn worst_node(nodes: &[NodeRecord], f: impl Fn(&NodeRecord) -> Option<f64>) -> (f64, f64, f64) {
    nodes
        .iter()
        .filter_map(|n| f(n).map(|v| (if v.is_nan() { f64::INFINITY } else { v }, n.t, n.x)))
        .fold((f64::NEG_INFINITY, f64::NAN, f64::NAN), |acc, cur| {
            if cur.0 > acc.0 {
                cur
            } else {
                acc
            }
        })
}

fn summarize(
    nodes: &[NodeRecord],
    times: &[TimeRecord],
    dp: Option<&DpComparison>,
    tol: &Tolerances,
    xi_spacing: f64,
    x_spacing: f64,
) -> Vec<ConditionSummary> {
    let mut out = Vec::new();
    let mut push = |name, worst: (f64, f64, f64), bound: f64, passed: bool| {
        out.push(ConditionSummary {
            name,
            passed,
            worst: worst.0,
            bound,
            at_t: Some(worst.1).filter(|v| !v.is_nan()),
            at_x: Some(worst.2).filter(|v| !v.is_nan()),
        })
    };

    let w = worst_node(nodes, |n| n.hjb1_residual.map(f64::abs));
    push("hjb1_residual", w, tol.residual, w.0 <= tol.residual);

    // Most negative residual, reported as a negative number.
    let w = worst_node(nodes, |n| Some(-n.qvi_residual));
    push("qvi_hjb_inequality", (-w.0, w.1, w.2), -tol.residual, -w.0 >= -tol.residual);

    let w = worst_node(nodes, |n| (n.region == Region::Interior).then(|| n.qvi_residual.abs()));
    push("qvi_continuation_equality", w, tol.residual, w.0 <= tol.residual);

    let xi_tol = xi_spacing;
    let gap_bound = tol.gap + xi_tol;
    let w = worst_node(nodes, |n| Some(n.gap));
    push("qvi_obstacle", w, gap_bound, w.0 <= gap_bound);

    let w = worst_node(nodes, |n| (n.region != Region::Interior).then(|| n.gap.abs()));
    push("qvi_intervention_equality", w, xi_tol, w.0 <= xi_tol);

    let w = worst_node(nodes, |n| (n.region == Region::Interior).then_some(n.gap));
    push("qvi_continuation_strict", w, 0.0, w.0 < 0.0);

    let max_gap = nodes.iter().map(|n| n.gap.abs()).fold(0.0, f64::max);
    let max_res = nodes.iter().map(|n| n.qvi_residual.abs()).fold(0.0, f64::max);
    let comp_bound = max_gap * tol.residual + max_res * xi_tol;
    let w = worst_node(nodes, |n| Some(n.complementarity.abs()));
    push("qvi_complementarity", w, comp_bound, w.0 <= comp_bound);

    let worst_time = |f: &dyn Fn(&TimeRecord) -> f64| {
        times
            .iter()
            .map(|r| {
                let v = f(r);
                (if v.is_nan() { f64::NEG_INFINITY } else { v }, r.t, f64::NAN)
            })
            .fold((f64::INFINITY, f64::NAN, f64::NAN), |acc, cur| if cur.0 < acc.0 { cur } else { acc })
    };
    // Vacuous nodes (negative discriminant) count as +inf margin.
    let w = worst_time(&|r| r.edges.margin_ell1.unwrap_or(f64::INFINITY));
    push("edge_root_lower", w, 0.0, times.iter().all(|r| r.edges.lower_holds()));
    let w = worst_time(&|r| r.edges.margin_ell2.unwrap_or(f64::INFINITY));
    push("edge_root_upper", w, 0.0, times.iter().all(|r| r.edges.upper_holds()));

    // Each of the three gaps between consecutive thresholds must span at
    // least one state-grid cell, otherwise the grid never samples it.
    let w = worst_time(&|r| {
        let th = &r.thresholds;
        (th.alpha - th.ell1).min(th.beta - th.alpha).min(th.ell2 - th.beta)
    });
    push("band_resolution", w, x_spacing, w.0 >= x_spacing);

    let w = worst_time(&|r| r.convexity_margin);
    let agree = times.iter().all(|r| (r.convexity_margin > 0.0) == (r.p2 > 0.0));
    push("convexity_margin", w, 0.0, w.0 > 0.0 && agree);

    if let Some(dp) = dp {
        push(
            "dp_oracle_value",
            (dp.max_discrepancy, 0.0, dp.worst_x),
            tol.dp_value,
            dp.max_discrepancy <= tol.dp_value,
        );
        let lower = dp.lower_edge_error();
        let upper = dp.upper_edge_error();
        let bound = tol.dp_bracket_cells * dp.cell;
        let (err, x) = if lower >= upper || upper.is_nan() {
            (lower, dp.ell1)
        } else {
            (upper, dp.ell2)
        };
        push(
            "dp_oracle_boundary",
            (err, 0.0, x),
            bound,
            lower <= bound && upper <= bound,
        );
    }
    out
}
