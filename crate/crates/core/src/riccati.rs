//! Time-varying coefficients of both players' quadratic value functions.
//!
//! Inside the continuation band each player's value is `½ p x² + q x + n`.
//! The second-order coefficients `p1`, `p2` and the closed-loop drift gain
//! `a_x` have closed forms; `q1`, `n1`, `q2`, `n2` are linear ODEs integrated
//! backward from their terminal conditions with fixed-step RK4.

use crate::error::{Error, Result};
use crate::model::GameParams;
use crate::ode::{hermite, rk4_step};

/// Default number of RK4 steps over `[0, T]`.
pub const DEFAULT_STEPS: usize = 4096;

/// Scalars shared by all closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiConstants {
    /// `2 sqrt(a² + w1 b² / r1)`.
    pub theta: f64,
    /// Integration constant fixed by `p1(T) = s1`.
    pub c1: f64,
    /// Integration constant fixed by `p2(T) = s2`.
    pub h_const: f64,
    /// `-b² / r1`.
    pub b_x: f64,
}

impl RiccatiConstants {
    pub fn new(params: &GameParams) -> Result<Self> {
        let a = params.drift;
        let w1 = params.p1_state_weight;
        let lev = params.control_leverage();
        if lev == 0.0 || !lev.is_finite() {
            return Err(Error::DegenerateParameters(
                "control gain b must be non-zero and r1 finite".into(),
            ));
        }
        let b_x = -lev;
        let theta = 2.0 * (a * a + w1 * lev).sqrt();
        debug_assert!((theta - 2.0 * (a * a - w1 * b_x).sqrt()).abs() <= 1e-12 * theta);

        let divisor = theta + 2.0 * lev * params.p1_terminal_weight - 2.0 * a;
        if divisor == 0.0 {
            return Err(Error::DegenerateParameters(
                "theta + 2 (b²/r1) s1 - 2a vanishes".into(),
            ));
        }
        let t_end = params.horizon;
        let c1 = (2.0 * theta / divisor - 1.0) * (-theta * t_end).exp();

        // C1 e^{θt} + 1 must not vanish on [0, T].
        if c1 < 0.0 {
            let t_star = (-1.0 / c1).ln() / theta;
            if (0.0..=t_end).contains(&t_star) {
                return Err(Error::DegenerateParameters(format!(
                    "C1 e^(theta t) + 1 vanishes at t = {t_star}"
                )));
            }
        }

        let s2 = params.p2_terminal_weight;
        let w2 = params.p2_state_weight;
        let e_neg = (-t_end * theta).exp();
        let e_pos = (t_end * theta).exp();
        let h_const = 2.0 * c1 * s2 + s2 * e_neg - (w2 * e_neg - c1 * c1 * w2 * e_pos) / theta
            + c1 * c1 * s2 * e_pos
            + 2.0 * c1 * t_end * w2;

        let consts = Self {
            theta,
            c1,
            h_const,
            b_x,
        };
        if ![theta, c1, h_const].iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateParameters(
                "non-finite closed-form constants".into(),
            ));
        }
        Ok(consts)
    }

    /// Same value as `theta`, written through `b_x`.
    pub fn theta_via_bx(&self, params: &GameParams) -> f64 {
        let a = params.drift;
        2.0 * (a * a - params.p1_state_weight * self.b_x).sqrt()
    }

    fn denom(&self, t: f64) -> f64 {
        self.c1 * (self.theta * t).exp() + 1.0
    }

    /// Closed-loop drift gain `θ/2 - θ/(C1 e^{θt} + 1)`, equal to `a + b_x p1(t)`.
    pub fn a_x(&self, t: f64) -> f64 {
        0.5 * self.theta - self.theta / self.denom(t)
    }

    /// Closed-form solution of Player 1's Riccati equation.
    pub fn p1(&self, params: &GameParams, t: f64) -> f64 {
        (-params.drift + self.a_x(t)) / self.b_x
    }

    /// Closed-form solution of `dp2/dt = -w2 - 2 p2 a_x(t)`, `p2(T) = s2`.
    pub fn p2(&self, params: &GameParams, t: f64) -> f64 {
        let w2 = params.p2_state_weight;
        let th = self.theta;
        let c1 = self.c1;
        let e = (t * th).exp();
        let num = -w2 * e * e * c1 * c1 - 2.0 * t * th * w2 * e * c1 + w2 + self.h_const * th * e;
        let den = self.denom(t);
        num / (th * den * den)
    }

    /// Left-hand side of the strict-convexity condition on `p2`:
    /// `H θ + w2 (1 - e^{θt} C1² - 2 t θ C1)`.
    pub fn convexity_margin(&self, params: &GameParams, t: f64) -> f64 {
        let w2 = params.p2_state_weight;
        let th = self.theta;
        let c1 = self.c1;
        self.h_const * th + w2 * (1.0 - (t * th).exp() * c1 * c1 - 2.0 * t * th * c1)
    }
}

/// Right-hand side of `dp1/dt`.
pub fn p1_rate(params: &GameParams, b_x: f64, p1: f64) -> f64 {
    -params.p1_state_weight - b_x * p1 * p1 - 2.0 * params.drift * p1
}

pub fn p2_rate(params: &GameParams, a_x: f64, p2: f64) -> f64 {
    -params.p2_state_weight - 2.0 * p2 * a_x
}

pub fn q1_rate(params: &GameParams, a_x: f64, q1: f64) -> f64 {
    -a_x * q1 + params.p1_state_weight * params.p1_target
}

pub fn n1_rate(params: &GameParams, b_x: f64, q1: f64) -> f64 {
    let rho = params.p1_target;
    -0.5 * b_x * q1 * q1 - 0.5 * params.p1_state_weight * rho * rho
}

pub fn q2_rate(params: &GameParams, a_x: f64, b_x: f64, p2: f64, q1: f64, q2: f64) -> f64 {
    -a_x * q2 - b_x * p2 * q1 + params.p2_state_weight * params.p2_target
}

pub fn n2_rate(params: &GameParams, b_x: f64, q1: f64, q2: f64) -> f64 {
    let rho = params.p2_target;
    -b_x * q1 * q2 - 0.5 * params.p2_state_weight * rho * rho
}

/// All coefficients and their time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub t: f64,
    pub a_x: f64,
    pub p1: f64,
    pub dp1: f64,
    pub q1: f64,
    pub dq1: f64,
    pub n1: f64,
    pub dn1: f64,
    pub p2: f64,
    pub dp2: f64,
    pub q2: f64,
    pub dq2: f64,
    pub n2: f64,
    pub dn2: f64,
}

/// Coefficient paths sampled on a uniform grid over `[0, T]`.
///
/// `p1`, `p2` and `a_x` are closed forms; the four ODE paths carry their
/// right-hand sides at each node and are interpolated between nodes by cubic
/// Hermite splines using those slopes.
#[derive(Debug, Clone)]
pub struct CoefficientPath {
    params: GameParams,
    constants: RiccatiConstants,
    step: f64,
    pub times: Vec<f64>,
    pub p1: Vec<f64>,
    pub q1: Vec<f64>,
    pub n1: Vec<f64>,
    pub p2: Vec<f64>,
    pub q2: Vec<f64>,
    pub n2: Vec<f64>,
    pub a_x: Vec<f64>,
    dq1: Vec<f64>,
    dn1: Vec<f64>,
    dq2: Vec<f64>,
    dn2: Vec<f64>,
}

impl CoefficientPath {
    /// Integrates `q1, n1, q2, n2` backward from `T` with `n_steps` RK4 steps.
    pub fn solve_backward(
        params: &GameParams,
        constants: &RiccatiConstants,
        n_steps: usize,
    ) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_steps must be at least 2, got {n_steps}"
            )));
        }
        let big_t = params.horizon;
        let step = big_t / n_steps as f64;
        let b_x = constants.b_x;
        let rhs = |t: f64, y: &[f64; 4]| {
            let ax = constants.a_x(t);
            let p2 = constants.p2(params, t);
            [
                q1_rate(params, ax, y[0]),
                n1_rate(params, b_x, y[0]),
                q2_rate(params, ax, b_x, p2, y[0], y[2]),
                n2_rate(params, b_x, y[0], y[2]),
            ]
        };

        let n = n_steps + 1;
        let mut ys = vec![[0.0; 4]; n];
        let (s1, r1) = (params.p1_terminal_weight, params.p1_target);
        let (s2, r2) = (params.p2_terminal_weight, params.p2_target);
        ys[n_steps] = [-s1 * r1, 0.5 * s1 * r1 * r1, -s2 * r2, 0.5 * s2 * r2 * r2];
        for k in (0..n_steps).rev() {
            let t = node_time(k + 1, n_steps, big_t);
            let y = rk4_step(&rhs, t, &ys[k + 1], -step);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    node: k,
                    what: "coefficient",
                });
            }
            ys[k] = y;
        }

        let times: Vec<f64> = (0..n).map(|k| node_time(k, n_steps, big_t)).collect();
        let mut path = Self {
            params: *params,
            constants: *constants,
            step,
            p1: times.iter().map(|&t| constants.p1(params, t)).collect(),
            p2: times.iter().map(|&t| constants.p2(params, t)).collect(),
            a_x: times.iter().map(|&t| constants.a_x(t)).collect(),
            q1: ys.iter().map(|y| y[0]).collect(),
            n1: ys.iter().map(|y| y[1]).collect(),
            q2: ys.iter().map(|y| y[2]).collect(),
            n2: ys.iter().map(|y| y[3]).collect(),
            dq1: Vec::with_capacity(n),
            dn1: Vec::with_capacity(n),
            dq2: Vec::with_capacity(n),
            dn2: Vec::with_capacity(n),
            times,
        };
        // Exact terminal values.
        path.p1[n_steps] = s1;
        path.p2[n_steps] = s2;

        for (k, y) in ys.iter().enumerate() {
            let d = rhs(path.times[k], y);
            path.dq1.push(d[0]);
            path.dn1.push(d[1]);
            path.dq2.push(d[2]);
            path.dn2.push(d[3]);
            if !(path.p1[k].is_finite() && path.p2[k].is_finite() && path.a_x[k].is_finite()) {
                return Err(Error::NonFinite {
                    node: k,
                    what: "closed-form coefficient",
                });
            }
        }
        Ok(path)
    }

    /// Computes the constants and solves with the given number of steps.
    pub fn solve(params: &GameParams, n_steps: usize) -> Result<Self> {
        let constants = RiccatiConstants::new(params)?;
        Self::solve_backward(params, &constants, n_steps)
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    pub fn constants(&self) -> &RiccatiConstants {
        &self.constants
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.n_steps();
        let u = (t / self.step).clamp(0.0, n as f64);
        let i = (u.floor() as usize).min(n - 1);
        (i, u - i as f64)
    }

    fn interp(&self, values: &[f64], slopes: &[f64], i: usize, s: f64) -> (f64, f64) {
        hermite(
            s,
            self.step,
            values[i],
            slopes[i],
            values[i + 1],
            slopes[i + 1],
        )
    }

    /// `q1(t)` only; the hot path of the closed-loop dynamics.
    pub fn q1_at(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        self.interp(&self.q1, &self.dq1, i, s).0
    }

    /// Every coefficient and its time derivative at `t` (clamped to `[0, T]`).
    pub fn at(&self, t: f64) -> Coefficients {
        let t = t.clamp(0.0, self.horizon());
        let (i, s) = self.locate(t);
        let c = &self.constants;
        let p = &self.params;
        let a_x = c.a_x(t);
        let (p1, p2) = if t == self.horizon() {
            (p.p1_terminal_weight, p.p2_terminal_weight)
        } else {
            (c.p1(p, t), c.p2(p, t))
        };
        let (q1, dq1) = self.interp(&self.q1, &self.dq1, i, s);
        let (n1, dn1) = self.interp(&self.n1, &self.dn1, i, s);
        let (q2, dq2) = self.interp(&self.q2, &self.dq2, i, s);
        let (n2, dn2) = self.interp(&self.n2, &self.dn2, i, s);
        Coefficients {
            t,
            a_x,
            p1,
            dp1: p1_rate(p, c.b_x, p1),
            q1,
            dq1,
            n1,
            dn1,
            p2,
            dp2: p2_rate(p, a_x, p2),
            q2,
            dq2,
            n2,
            dn2,
        }
    }
}

fn node_time(k: usize, n_steps: usize, big_t: f64) -> f64 {
    if k == n_steps {
        big_t
    } else {
        big_t * k as f64 / n_steps as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference() -> (GameParams, RiccatiConstants) {
        let p = GameParams::reference();
        (p, RiccatiConstants::new(&p).unwrap())
    }

    /// Independent RK4 integration of a scalar ODE from `T` back to `t`.
    fn rk4_scalar_back(f: impl Fn(f64, f64) -> f64, y_t: f64, t_end: f64, t: f64, h: f64) -> f64 {
        let n = ((t_end - t) / h).round() as usize;
        let h = (t_end - t) / n as f64;
        let mut y = y_t;
        let mut s = t_end;
        for _ in 0..n {
            let k1 = f(s, y);
            let k2 = f(s - 0.5 * h, y - 0.5 * h * k1);
            let k3 = f(s - 0.5 * h, y - 0.5 * h * k2);
            let k4 = f(s - h, y - h * k3);
            y -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            s -= h;
        }
        y
    }

    #[test]
    fn theta_and_c1_reference() {
        let (p, c) = reference();
        assert_abs_diff_eq!(c.theta, 2.0 * 0.1f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.theta, 0.632456, epsilon = 1e-6);
        assert_abs_diff_eq!(c.c1, 0.5660, epsilon = 1e-4);
        assert_abs_diff_eq!(c.theta, c.theta_via_bx(&p), epsilon = 1e-15);
        assert_abs_diff_eq!(c.b_x, -0.09, epsilon = 1e-15);
    }

    #[test]
    fn c1_collapses_when_s1_balances_drift() {
        let base = GameParams::reference();
        let b = base.control_gain;
        let p = GameParams {
            p1_terminal_weight: base.drift * base.p1_control_weight / (b * b),
            ..base
        };
        let c = RiccatiConstants::new(&p).unwrap();
        assert_abs_diff_eq!(c.c1, (-c.theta * p.horizon).exp(), epsilon = 1e-14);
    }

    #[test]
    fn zero_control_gain_is_degenerate() {
        let p = GameParams {
            control_gain: 0.0,
            ..GameParams::reference()
        };
        assert!(matches!(
            RiccatiConstants::new(&p),
            Err(Error::DegenerateParameters(_))
        ));
    }

    #[test]
    fn closed_forms_hit_terminal_conditions() {
        let (p, c) = reference();
        assert_abs_diff_eq!(c.p1(&p, 1.0), p.p1_terminal_weight, epsilon = 1e-12);
        assert_abs_diff_eq!(c.p2(&p, 1.0), p.p2_terminal_weight, epsilon = 1e-12);
        assert_abs_diff_eq!(c.a_x(1.0), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn p1_matches_independent_rk4() {
        let (p, c) = reference();
        let f = |_t: f64, y: f64| p1_rate(&p, c.b_x, y);
        let oracle = rk4_scalar_back(f, p.p1_terminal_weight, 1.0, 0.0, 1e-4);
        assert_abs_diff_eq!(c.p1(&p, 0.0), oracle, epsilon = 1e-8);
    }

    #[test]
    fn p2_matches_independent_rk4() {
        let (p, c) = reference();
        let f = |t: f64, y: f64| -p.p2_state_weight - 2.0 * y * c.a_x(t);
        let oracle = rk4_scalar_back(f, p.p2_terminal_weight, 1.0, 0.0, 1e-4);
        assert_abs_diff_eq!(c.p2(&p, 0.0), oracle, epsilon = 1e-8);
    }

    #[test]
    fn closed_forms_satisfy_odes_by_finite_differences() {
        let (p, c) = reference();
        let h = 1e-5;
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let dp1 = (c.p1(&p, t + h) - c.p1(&p, t - h)) / (2.0 * h);
            let r1 = dp1 + p.p1_state_weight + c.b_x * c.p1(&p, t).powi(2) + 2.0 * p.drift * c.p1(&p, t);
            assert!(r1.abs() < 1e-6, "p1 residual {r1} at {t}");
            let dp2 = (c.p2(&p, t + h) - c.p2(&p, t - h)) / (2.0 * h);
            let r2 = dp2 + p.p2_state_weight + 2.0 * c.p2(&p, t) * c.a_x(t);
            assert!(r2.abs() < 1e-6, "p2 residual {r2} at {t}");
        }
    }

    #[test]
    fn a_x_identity() {
        let (p, c) = reference();
        for k in 0..100 {
            let t = (k as f64 * 0.618_033_988_75).fract();
            let lhs = p.drift + c.b_x * c.p1(&p, t);
            assert_abs_diff_eq!(lhs, c.a_x(t), epsilon = 1e-14);
        }
    }

    #[test]
    fn p2_positive_and_convexity_margin_agrees() {
        let (p, c) = reference();
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!(c.p2(&p, t) > 0.0);
            assert!(c.convexity_margin(&p, t) > 0.0);
        }
    }

    #[test]
    fn zero_target_gives_zero_q1_n1() {
        let p = GameParams {
            p1_target: 0.0,
            ..GameParams::reference()
        };
        let path = CoefficientPath::solve(&p, 256).unwrap();
        assert!(path.q1.iter().all(|&v| v == 0.0));
        assert!(path.n1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn terminal_node_is_exact() {
        let p = GameParams::reference();
        let path = CoefficientPath::solve(&p, 64).unwrap();
        let last = path.n_steps();
        assert_eq!(path.times[last], 1.0);
        assert_eq!(path.p1[last], 1.0);
        assert_eq!(path.q1[last], -2.5);
        assert_eq!(path.n1[last], 3.125);
        assert_eq!(path.p2[last], 1.0);
        assert_eq!(path.q2[last], -5.0);
        assert_eq!(path.n2[last], 12.5);
    }

    #[test]
    fn q2_self_convergence_is_fourth_order() {
        let p = GameParams::reference();
        let q = |n| CoefficientPath::solve(&p, n).unwrap().q2[0];
        let (a, b, c) = (q(4), q(8), q(16));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 16.0).abs() < 0.3 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn q1_matches_integrating_factor_quadrature() {
        let p = GameParams::reference();
        let c = RiccatiConstants::new(&p).unwrap();
        let path = CoefficientPath::solve_backward(&p, &c, DEFAULT_STEPS).unwrap();
        // ∫ a_x dt = -θ t / 2 + ln(C1 e^{θ t} + 1)
        let prim = |t: f64| -0.5 * c.theta * t + (c.c1 * (c.theta * t).exp() + 1.0).ln();
        let big_a = |s: f64| prim(1.0) - prim(s);
        // composite Simpson with many panels on a smooth integrand
        let m = 20_000;
        let h = 1.0 / m as f64;
        let g = |s: f64| (-big_a(s)).exp();
        let mut integral = g(0.0) + g(1.0);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            integral += w * g(k as f64 * h);
        }
        integral *= h / 3.0;
        let q1_t = -p.p1_terminal_weight * p.p1_target;
        let exact = big_a(0.0).exp() * (q1_t - p.p1_state_weight * p.p1_target * integral);
        assert_abs_diff_eq!(path.q1[0], exact, epsilon = 1e-7);
    }

    #[test]
    fn interpolation_matches_nodes_and_is_smooth() {
        let p = GameParams::reference();
        let path = CoefficientPath::solve(&p, 128).unwrap();
        let fine = CoefficientPath::solve(&p, 128 * 16).unwrap();
        for k in 0..=128 {
            let at = path.at(path.times[k]);
            assert_eq!(at.q2, path.q2[k]);
        }
        for k in 0..300 {
            let t = k as f64 / 300.0 + 1e-3;
            let a = path.at(t);
            let b = fine.at(t);
            assert!((a.q2 - b.q2).abs() < 1e-8);
            assert!((a.dq2 - b.dq2).abs() < 1e-6);
        }
    }
}
