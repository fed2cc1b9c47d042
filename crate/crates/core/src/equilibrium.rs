//! The solved equilibrium: coefficient paths, threshold policy, and the
//! strategies and value functions evaluated from them.

use crate::error::Result;
use crate::model::{GameParams, StateBox};
use crate::policy::{player2_value, quadratic, Impulse, Region, ThresholdPolicy, Thresholds};
use crate::riccati::{CoefficientPath, Coefficients, RiccatiConstants};
use crate::simulate::{self, RolloutOptions, Trajectory};

/// One point of the value functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueSample {
    pub t: f64,
    pub x: f64,
    pub v1: f64,
    pub v2: f64,
    pub region: Region,
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    params: GameParams,
    path: CoefficientPath,
    policy: ThresholdPolicy,
}

impl Equilibrium {
    /// Validates `params`, solves the coefficient ODEs with `n_steps` RK4
    /// steps and builds the threshold policy.
    pub fn solve(params: &GameParams, n_steps: usize) -> Result<Self> {
        let params = params.validate()?;
        let consts = RiccatiConstants::new(&params)?;
        let path = CoefficientPath::solve_backward(&params, &consts, n_steps)?;
        Self::from_path(path)
    }

    pub fn from_path(path: CoefficientPath) -> Result<Self> {
        let params = *path.params();
        let policy = ThresholdPolicy::build(&path, &params)?;
        Ok(Self {
            params,
            path,
            policy,
        })
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    pub fn path(&self) -> &CoefficientPath {
        &self.path
    }

    pub fn policy(&self) -> &ThresholdPolicy {
        &self.policy
    }

    pub fn constants(&self) -> &RiccatiConstants {
        self.path.constants()
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn coefficients(&self, t: f64) -> Coefficients {
        self.path.at(t)
    }

    pub fn thresholds(&self, t: f64) -> Thresholds {
        Thresholds::from_coefficients(&self.path.at(t), &self.params)
    }

    /// Player 1's equilibrium feedback `-(b/r1)(p1 x + q1)`.
    pub fn gamma_star(&self, t: f64, x: f64) -> f64 {
        let k = self.path.at(t);
        feedback(&self.params, &k, x)
    }

    /// `a x + b γ*(t, x)`, which equals `a_x(t) x + b_x q1(t)`.
    pub fn closed_loop_drift(&self, t: f64, x: f64) -> f64 {
        let q1 = self.path.q1_at(t);
        self.constants().a_x(t) * x + self.constants().b_x * q1
    }

    pub fn impulse_map(&self, t: f64, x: f64) -> Option<Impulse> {
        self.thresholds(t).impulse(x)
    }

    pub fn region(&self, t: f64, x: f64) -> Region {
        self.thresholds(t).region(x)
    }

    /// Player 1's interior quadratic with the jump-free `n1` path.
    pub fn phi1(&self, t: f64, x: f64) -> f64 {
        let k = self.path.at(t);
        quadratic(k.p1, k.q1, k.n1, x)
    }

    pub fn phi2(&self, t: f64, x: f64) -> f64 {
        let k = self.path.at(t);
        quadratic(k.p2, k.q2, k.n2, x)
    }

    pub fn value_v2(&self, t: f64, x: f64) -> f64 {
        if t >= self.horizon() {
            return self.params.p2_terminal_cost(x);
        }
        let k = self.path.at(t);
        let th = Thresholds::from_coefficients(&k, &self.params);
        player2_value(&k, &th, &self.params, x)
    }

    /// Player 1's equilibrium cost-to-go, obtained by rolling the equilibrium
    /// forward from `(t, x)` with integration step `step`.
    pub fn value_v1(&self, t: f64, x: f64, step: f64) -> Result<f64> {
        if t >= self.horizon() {
            return Ok(self.params.p1_terminal_cost(x));
        }
        Ok(self.rollout(t, x, step)?.j1)
    }

    pub fn value_sample(&self, t: f64, x: f64, step: f64) -> Result<ValueSample> {
        Ok(ValueSample {
            t,
            x,
            v1: self.value_v1(t, x, step)?,
            v2: self.value_v2(t, x),
            region: if t >= self.horizon() {
                Region::Interior
            } else {
                self.region(t, x)
            },
        })
    }

    /// Default impulse budget: the impulse-count bound over the smallest box
    /// holding the whole band and the starting state.
    pub fn default_budget(&self, x0: f64) -> u64 {
        let (lo, hi) = self.policy.band_hull();
        let b = StateBox { lo, hi }.including(x0);
        simulate::impulse_bound(&self.params, &b).k
    }

    pub fn rollout(&self, t0: f64, x0: f64, step: f64) -> Result<Trajectory> {
        let opts = RolloutOptions {
            step,
            max_events: self.default_budget(x0),
        };
        simulate::rollout(self, t0, x0, &opts)
    }

    /// Default simulation step `T / 4096`.
    pub fn default_step(&self) -> f64 {
        self.horizon() / 4096.0
    }
}

pub(crate) fn feedback(params: &GameParams, k: &Coefficients, x: f64) -> f64 {
    -(params.control_gain / params.p1_control_weight) * (k.p1 * x + k.q1)
}
