//! Game parameters and the per-impulse cost primitives.
//!
//! The game is scalar: the state follows `dx/dt = a x + b u` between
//! interventions, Player 1 steers it with the continuous control `u`, and
//! Player 2 shifts it by jumps `xi` at intervention instants. Player 1 pays a
//! quadratic tracking cost around `rho1` plus `z1 |xi|` per impulse; Player 2
//! pays a quadratic tracking cost around `rho2` plus a fixed-plus-marginal
//! intervention cost.

use std::fmt;

use crate::error::{Error, Result};

/// All scalar constants of the linear-quadratic impulse game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    /// Linear drift coefficient `a`.
    pub drift: f64,
    /// Control gain `b`.
    pub control_gain: f64,
    /// Player 1 running state-deviation weight `w1`.
    pub p1_state_weight: f64,
    /// Player 1 control-effort weight `r1`.
    pub p1_control_weight: f64,
    /// Player 1 cost per unit of impulse size `z1`.
    pub p1_impulse_weight: f64,
    /// Player 1 terminal weight `s1`.
    pub p1_terminal_weight: f64,
    /// Player 1 target state `rho1`.
    pub p1_target: f64,
    /// Player 2 running state-deviation weight `w2`.
    pub p2_state_weight: f64,
    /// Player 2 terminal weight `s2`.
    pub p2_terminal_weight: f64,
    /// Player 2 target state `rho2`.
    pub p2_target: f64,
    /// Fixed cost of an upward (or zero) intervention `C`.
    pub fixed_cost_up: f64,
    /// Fixed cost of a downward intervention `D`.
    pub fixed_cost_down: f64,
    /// Marginal cost of an upward intervention `c`.
    pub marginal_cost_up: f64,
    /// Marginal cost of a downward intervention `d`.
    pub marginal_cost_down: f64,
    /// Horizon length `T`.
    pub horizon: f64,
}

/// A single failed parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamViolation {
    pub field: &'static str,
    pub value: f64,
    pub requirement: &'static str,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} ({})", self.field, self.value, self.requirement)
    }
}

impl GameParams {
    /// The reference parameterization with horizon `T = 1`.
    pub fn reference() -> Self {
        Self {
            drift: 0.1,
            control_gain: -0.3,
            p1_state_weight: 1.0,
            p1_control_weight: 1.0,
            p1_impulse_weight: 2.0,
            p1_terminal_weight: 1.0,
            p1_target: 2.5,
            p2_state_weight: 4.0,
            p2_terminal_weight: 1.0,
            p2_target: 5.0,
            fixed_cost_up: 3.0,
            fixed_cost_down: 5.0,
            marginal_cost_up: 2.0,
            marginal_cost_down: 3.0,
            horizon: 1.0,
        }
    }

    /// Name/value pairs using the short symbol names of the config format.
    pub fn named_fields(&self) -> [(&'static str, f64); 15] {
        [
            ("a", self.drift),
            ("b", self.control_gain),
            ("w1", self.p1_state_weight),
            ("r1", self.p1_control_weight),
            ("z1", self.p1_impulse_weight),
            ("s1", self.p1_terminal_weight),
            ("rho1", self.p1_target),
            ("w2", self.p2_state_weight),
            ("s2", self.p2_terminal_weight),
            ("rho2", self.p2_target),
            ("C", self.fixed_cost_up),
            ("D", self.fixed_cost_down),
            ("c", self.marginal_cost_up),
            ("d", self.marginal_cost_down),
            ("T", self.horizon),
        ]
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(self) -> Result<Self> {
        const POSITIVE: [&str; 11] = ["w1", "r1", "z1", "s1", "w2", "s2", "C", "D", "c", "d", "T"];
        let mut violations = Vec::new();
        for (field, value) in self.named_fields() {
            if !value.is_finite() {
                violations.push(ParamViolation {
                    field,
                    value,
                    requirement: "must be finite",
                });
            } else if POSITIVE.contains(&field) && value <= 0.0 {
                violations.push(ParamViolation {
                    field,
                    value,
                    requirement: "must be strictly positive",
                });
            }
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    /// `b^2 / r1`, the gain of Player 1's feedback on the closed-loop drift.
    pub fn control_leverage(&self) -> f64 {
        self.control_gain * self.control_gain / self.p1_control_weight
    }

    /// Player 2's intervention cost `h(xi)`.
    ///
    /// A zero-size intervention still pays the cheaper of the two fixed costs.
    pub fn p2_impulse_cost(&self, xi: f64) -> f64 {
        if xi > 0.0 {
            self.fixed_cost_up + self.marginal_cost_up * xi
        } else if xi < 0.0 {
            self.fixed_cost_down - self.marginal_cost_down * xi
        } else {
            self.min_fixed_cost()
        }
    }

    /// Cost borne by Player 1 when Player 2 applies an impulse of size `xi`.
    pub fn p1_impulse_cost(&self, xi: f64) -> f64 {
        self.p1_impulse_weight * xi.abs()
    }

    /// Infimum of the intervention cost over all impulse sizes, `min(C, D)`.
    pub fn min_fixed_cost(&self) -> f64 {
        self.fixed_cost_up.min(self.fixed_cost_down)
    }

    /// Player 1 running cost at state `x` under control `u`.
    pub fn p1_running_cost(&self, x: f64, u: f64) -> f64 {
        let dev = x - self.p1_target;
        0.5 * (self.p1_state_weight * dev * dev + self.p1_control_weight * u * u)
    }

    /// Player 2 running cost at state `x`.
    pub fn p2_running_cost(&self, x: f64) -> f64 {
        let dev = x - self.p2_target;
        0.5 * self.p2_state_weight * dev * dev
    }

    pub fn p1_terminal_cost(&self, x: f64) -> f64 {
        let dev = x - self.p1_target;
        0.5 * self.p1_terminal_weight * dev * dev
    }

    pub fn p2_terminal_cost(&self, x: f64) -> f64 {
        let dev = x - self.p2_target;
        0.5 * self.p2_terminal_weight * dev * dev
    }
}

/// Compact state interval used for sup-norm bounds and verification grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBox {
    pub lo: f64,
    pub hi: f64,
}

impl StateBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::DegenerateBox { lo, hi })
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Smallest box containing both `self` and `x`.
    pub fn including(&self, x: f64) -> Self {
        Self {
            lo: self.lo.min(x),
            hi: self.hi.max(x),
        }
    }

    /// Sup over the box of `|x - center|`, attained at the farther endpoint.
    pub fn max_distance_from(&self, center: f64) -> f64 {
        (self.lo - center).abs().max((self.hi - center).abs())
    }

    /// `n` equally spaced points including both endpoints.
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        linspace(self.lo, self.hi, n)
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_is_valid() {
        let p = GameParams::reference();
        assert_eq!(p.validate().unwrap(), p);
    }

    #[test]
    fn zero_weight_is_named() {
        let p = GameParams {
            p1_state_weight: 0.0,
            ..GameParams::reference()
        };
        match p.validate() {
            Err(Error::InvalidParams(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].field, "w1");
            }
            other => panic!("expected InvalidParams, got {other:?}"),
        }
    }

    #[test]
    fn negative_fixed_cost_is_named() {
        let p = GameParams {
            fixed_cost_up: -3.0,
            ..GameParams::reference()
        };
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("C = -3"));
    }

    #[test]
    fn every_violation_is_reported() {
        let p = GameParams {
            p1_state_weight: 0.0,
            marginal_cost_down: -1.0,
            horizon: f64::NAN,
            ..GameParams::reference()
        };
        let Err(Error::InvalidParams(v)) = p.validate() else {
            panic!("expected violations");
        };
        let fields: Vec<_> = v.iter().map(|x| x.field).collect();
        assert_eq!(fields, ["w1", "d", "T"]);
    }

    #[test]
    fn intervention_cost_branches() {
        let p = GameParams::reference();
        assert_eq!(p.p2_impulse_cost(1.0), 5.0);
        assert_eq!(p.p2_impulse_cost(0.0), 3.0);
        assert_eq!(p.p2_impulse_cost(-1.0), 8.0);
    }

    #[test]
    fn player1_impulse_cost() {
        let p = GameParams::reference();
        assert_eq!(p.p1_impulse_cost(2.5), 5.0);
        assert_eq!(p.p1_impulse_cost(0.0), 0.0);
        assert_eq!(p.p1_impulse_cost(-2.5), 5.0);
    }

    #[test]
    fn box_rejects_degenerate_interval() {
        assert!(StateBox::new(5.0, 5.0).is_err());
        assert!(StateBox::new(6.0, 5.0).is_err());
        let b = StateBox::new(0.0, 10.0).unwrap();
        assert_eq!(b.max_distance_from(5.0), 5.0);
        assert_eq!(b.max_distance_from(2.5), 7.5);
    }

    proptest! {
        #[test]
        fn intervention_cost_bounded_below(xi in -1e3f64..1e3) {
            let p = GameParams::reference();
            prop_assert!(p.p2_impulse_cost(xi) >= p.min_fixed_cost());
            prop_assert!(p.p2_impulse_cost(xi) > 0.0);
        }

        #[test]
        fn intervention_cost_lower_semicontinuous_at_zero(eps in 1e-12f64..1e-3) {
            let p = GameParams::reference();
            let h0 = p.p2_impulse_cost(0.0);
            prop_assert!(h0 <= p.p2_impulse_cost(eps));
            prop_assert!(h0 <= p.p2_impulse_cost(-eps));
        }

        #[test]
        fn player1_cost_even_and_homogeneous(xi in -1e3f64..1e3, k in 0.0f64..10.0) {
            let p = GameParams::reference();
            prop_assert_eq!(p.p1_impulse_cost(xi), p.p1_impulse_cost(-xi));
            let lhs = p.p1_impulse_cost(k * xi);
            let rhs = k * p.p1_impulse_cost(xi);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }
}
