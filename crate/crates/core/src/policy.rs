//! Player 2's threshold policy and the piecewise value function it induces.
//!
//! Player 2 waits while `ell1(t) < x < ell2(t)`. At or below `ell1` the state
//! is pushed up to `alpha(t)`; at or above `ell2` it is pushed down to
//! `beta(t)`. The targets solve the first-order conditions
//! `p2 alpha + q2 = -c` and `p2 beta + q2 = d`; the band edges are where the
//! intervention value meets the quadratic continuation value.

use crate::error::{Error, Result};
use crate::model::GameParams;
use crate::riccati::{CoefficientPath, Coefficients};

/// Which piece of the value functions applies at a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `x <= ell1`: Player 2 intervenes upward.
    Below,
    /// `ell1 < x < ell2`: continuation.
    Interior,
    /// `x >= ell2`: Player 2 intervenes downward.
    Above,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Below => "below",
            Region::Interior => "interior",
            Region::Above => "above",
        }
    }
}

/// An impulse prescribed by the policy: jump to `target`, size `xi = target - x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impulse {
    pub target: f64,
    pub xi: f64,
}

/// The four threshold values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub ell1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub ell2: f64,
}

impl Thresholds {
    /// Evaluates the threshold formulas from `p2`, `q2`. Requires `p2 > 0`.
    pub fn from_p2_q2(p2: f64, q2: f64, params: &GameParams) -> Self {
        let c = params.marginal_cost_up;
        let d = params.marginal_cost_down;
        Self {
            ell1: (-c - q2 - (2.0 * params.fixed_cost_up * p2).sqrt()) / p2,
            alpha: -(q2 + c) / p2,
            beta: (d - q2) / p2,
            ell2: (d - q2 + (2.0 * params.fixed_cost_down * p2).sqrt()) / p2,
        }
    }

    pub fn from_coefficients(k: &Coefficients, params: &GameParams) -> Self {
        Self::from_p2_q2(k.p2, k.q2, params)
    }

    pub fn is_ordered(&self) -> bool {
        self.ell1 < self.alpha && self.alpha < self.beta && self.beta < self.ell2
    }

    /// The intervention set is closed: states on a band edge are in it.
    pub fn region(&self, x: f64) -> Region {
        if x <= self.ell1 {
            Region::Below
        } else if x >= self.ell2 {
            Region::Above
        } else {
            Region::Interior
        }
    }

    /// Signed distance into the band, `min(x - ell1, ell2 - x)`; positive inside.
    pub fn band_gap(&self, x: f64) -> f64 {
        (x - self.ell1).min(self.ell2 - x)
    }

    pub fn impulse(&self, x: f64) -> Option<Impulse> {
        let target = match self.region(x) {
            Region::Interior => return None,
            Region::Below => self.alpha,
            Region::Above => self.beta,
        };
        Some(Impulse {
            target,
            xi: target - x,
        })
    }
}

/// Node-sampled threshold curves on the coefficient grid.
#[derive(Debug, Clone)]
pub struct ThresholdPolicy {
    pub times: Vec<f64>,
    pub ell1: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub ell2: Vec<f64>,
}

impl ThresholdPolicy {
    /// Builds the policy at every node, failing on the first node where `p2`
    /// is not positive or the four thresholds are out of order.
    pub fn build(path: &CoefficientPath, params: &GameParams) -> Result<Self> {
        let n = path.times.len();
        let mut policy = Self {
            times: path.times.clone(),
            ell1: Vec::with_capacity(n),
            alpha: Vec::with_capacity(n),
            beta: Vec::with_capacity(n),
            ell2: Vec::with_capacity(n),
        };
        for node in 0..n {
            let t = path.times[node];
            let p2 = path.p2[node];
            if p2.is_nan() || p2 <= 0.0 {
                return Err(Error::ConvexityViolation { node, t, p2 });
            }
            let th = Thresholds::from_p2_q2(p2, path.q2[node], params);
            if !th.is_ordered() {
                return Err(Error::OrderingViolation {
                    node,
                    t,
                    ell1: th.ell1,
                    alpha: th.alpha,
                    beta: th.beta,
                    ell2: th.ell2,
                });
            }
            policy.ell1.push(th.ell1);
            policy.alpha.push(th.alpha);
            policy.beta.push(th.beta);
            policy.ell2.push(th.ell2);
        }
        Ok(policy)
    }

    pub fn at_node(&self, node: usize) -> Thresholds {
        Thresholds {
            ell1: self.ell1[node],
            alpha: self.alpha[node],
            beta: self.beta[node],
            ell2: self.ell2[node],
        }
    }

    /// Lowest lower edge and highest upper edge over the horizon.
    pub fn band_hull(&self) -> (f64, f64) {
        let lo = self.ell1.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.ell2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// `½ p x² + q x + n`.
pub fn quadratic(p: f64, q: f64, n: f64, x: f64) -> f64 {
    (0.5 * p * x + q) * x + n
}

/// Player 2's value: quadratic inside the band, linear in the intervention set.
pub fn player2_value(k: &Coefficients, th: &Thresholds, params: &GameParams, x: f64) -> f64 {
    let phi = |y: f64| quadratic(k.p2, k.q2, k.n2, y);
    match th.region(x) {
        Region::Interior => phi(x),
        Region::Below => phi(th.alpha) + params.fixed_cost_up + params.marginal_cost_up * (th.alpha - x),
        Region::Above => phi(th.beta) + params.fixed_cost_down + params.marginal_cost_down * (x - th.beta),
    }
}
