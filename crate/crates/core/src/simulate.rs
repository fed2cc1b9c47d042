//! Forward equilibrium rollout with impulse events.
//!
//! Between interventions the state follows `dx/dt = a_x(t) x + b_x q1(t)`.
//! Running costs are carried as two extra ODE components so that every RK4
//! step integrates them with Simpson weights. After each step the band gap
//! `min(x - ell1, ell2 - x)` is checked; an exit is located by bisection on
//! the step length and Player 2's impulse is applied there.

use crate::equilibrium::{feedback, Equilibrium};
use crate::error::{Error, Result};
use crate::model::{GameParams, StateBox};
use crate::ode::rk4_step;

/// Event localization accuracy in time.
pub const EVENT_TIME_TOL: f64 = 1e-10;
/// Exits closer than this to the horizon do not trigger an impulse.
pub const TERMINAL_GUARD: f64 = 1e-10;
/// Two events closer than this in time abort the rollout.
pub const CHATTER_WINDOW: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseEvent {
    pub tau: f64,
    pub x_minus: f64,
    pub x_plus: f64,
    pub xi: f64,
    pub cost_p1: f64,
    pub cost_p2: f64,
}

/// A jump-free piece of the trajectory. Costs are cumulative from `t0`,
/// including the impulse costs of earlier events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segment {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub cost1: Vec<f64>,
    pub cost2: Vec<f64>,
}

impl Segment {
    fn push(&mut self, t: f64, x: f64, u: f64, c1: f64, c2: f64) {
        self.t.push(t);
        self.x.push(x);
        self.u.push(u);
        self.cost1.push(c1);
        self.cost2.push(c2);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub x0: f64,
    pub segments: Vec<Segment>,
    pub events: Vec<ImpulseEvent>,
    pub j1: f64,
    pub j2: f64,
    pub terminal_state: f64,
}

impl Trajectory {
    /// Costs still to be paid from sample `idx` of segment `seg` onward.
    pub fn remaining_costs(&self, seg: usize, idx: usize) -> (f64, f64) {
        let s = &self.segments[seg];
        (self.j1 - s.cost1[idx], self.j2 - s.cost2[idx])
    }

    /// All samples in time order as `(t, x, u)`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.segments
            .iter()
            .flat_map(|s| (0..s.len()).map(move |i| (s.t[i], s.x[i], s.u[i])))
    }

    /// Observed range of Player 1's control, for checking interiority after the fact.
    pub fn control_range(&self) -> (f64, f64) {
        self.samples()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, _, u)| {
                (lo.min(u), hi.max(u))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub step: f64,
    pub max_events: u64,
}

/// Upper bound on the equilibrium number of impulses with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseBound {
    /// Sup of Player 2's running cost over the box.
    pub running_sup: f64,
    /// Sup of Player 2's terminal cost over the box.
    pub terminal_sup: f64,
    /// `min(C, D)`.
    pub mu: f64,
    pub k: u64,
}

/// `K = ceil(2 (T ‖h2‖ + ‖s2‖) / min(C, D))` with sup-norms over `state_box`.
pub fn impulse_bound(params: &GameParams, state_box: &StateBox) -> ImpulseBound {
    let dist = state_box.max_distance_from(params.p2_target);
    let running_sup = 0.5 * params.p2_state_weight * dist * dist;
    let terminal_sup = 0.5 * params.p2_terminal_weight * dist * dist;
    let mu = params.min_fixed_cost();
    let ratio = 2.0 * (params.horizon * running_sup + terminal_sup) / mu;
    ImpulseBound {
        running_sup,
        terminal_sup,
        mu,
        k: (ratio.ceil() as u64).max(1),
    }
}

pub fn rollout(eq: &Equilibrium, t0: f64, x0: f64, opts: &RolloutOptions) -> Result<Trajectory> {
    let params = *eq.params();
    let big_t = eq.horizon();
    if !(0.0..big_t).contains(&t0) {
        return Err(Error::InvalidArgument(format!(
            "start time {t0} outside [0, {big_t})"
        )));
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {}",
            opts.step
        )));
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite {
            node: 0,
            what: "initial state",
        });
    }

    let path = eq.path();
    let consts = *eq.constants();
    let rhs = |t: f64, y: &[f64; 3]| {
        let k = path.at(t);
        let u = feedback(&params, &k, y[0]);
        [
            k.a_x * y[0] + consts.b_x * k.q1,
            params.p1_running_cost(y[0], u),
            params.p2_running_cost(y[0]),
        ]
    };
    let control = |t: f64, x: f64| feedback(&params, &path.at(t), x);
    let gap = |t: f64, x: f64| eq.thresholds(t).band_gap(x);

    let mut segments = Vec::new();
    let mut events: Vec<ImpulseEvent> = Vec::new();
    let mut seg = Segment::default();
    let mut t = t0;
    let mut y = [x0, 0.0, 0.0];
    seg.push(t, y[0], control(t, y[0]), 0.0, 0.0);

    let apply_impulse = |t: f64,
                             y: &mut [f64; 3],
                             seg: &mut Segment,
                             segments: &mut Vec<Segment>,
                             events: &mut Vec<ImpulseEvent>|
     -> Result<()> {
        let th = eq.thresholds(t);
        let imp = th.impulse(y[0]).unwrap_or_else(|| {
            // The bisection end point has a non-positive gap; recompute
            // against the nearer edge if rounding moved it back inside.
            let target = if y[0] - th.ell1 < th.ell2 - y[0] { th.alpha } else { th.beta };
            crate::policy::Impulse {
                target,
                xi: target - y[0],
            }
        });
        if let Some(prev) = events.last() {
            if t - prev.tau < CHATTER_WINDOW {
                return Err(Error::ImpulseBudgetExceeded {
                    events: events.len() + 1,
                    bound: opts.max_events,
                    tau: t,
                    reason: "two impulses within the chattering window",
                });
            }
        }
        if events.len() as u64 + 1 > opts.max_events {
            return Err(Error::ImpulseBudgetExceeded {
                events: events.len() + 1,
                bound: opts.max_events,
                tau: t,
                reason: "more impulses than the equilibrium bound",
            });
        }
        let ev = ImpulseEvent {
            tau: t,
            x_minus: y[0],
            x_plus: imp.target,
            xi: imp.xi,
            cost_p1: params.p1_impulse_cost(imp.xi),
            cost_p2: params.p2_impulse_cost(imp.xi),
        };
        events.push(ev);
        y[0] = imp.target;
        y[1] += ev.cost_p1;
        y[2] += ev.cost_p2;
        segments.push(std::mem::take(seg));
        seg.push(t, y[0], control(t, y[0]), y[1], y[2]);
        Ok(())
    };

    if big_t - t0 > TERMINAL_GUARD && gap(t0, x0) <= 0.0 {
        apply_impulse(t, &mut y, &mut seg, &mut segments, &mut events)?;
    }

    while t < big_t {
        let mut h = opts.step.min(big_t - t);
        if big_t - (t + h) < 1e-3 * opts.step {
            h = big_t - t;
        }
        let y_new = rk4_step(&rhs, t, &y, h);
        if !y_new.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                node: seg.len(),
                what: "state",
            });
        }
        let t_new = if h == big_t - t { big_t } else { t + h };
        if gap(t_new, y_new[0]) > 0.0 {
            t = t_new;
            y = y_new;
            seg.push(t, y[0], control(t, y[0]), y[1], y[2]);
            continue;
        }

        // Exit inside (t, t_new]: shrink [lo, hi] so that the gap is positive
        // at lo and non-positive at hi.
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo >= EVENT_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            let y_mid = rk4_step(&rhs, t, &y, mid);
            if gap(t + mid, y_mid[0]) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = t + hi;
        if big_t - tau <= TERMINAL_GUARD {
            t = t_new;
            y = y_new;
            seg.push(t, y[0], control(t, y[0]), y[1], y[2]);
            continue;
        }
        y = rk4_step(&rhs, t, &y, hi);
        t = tau;
        seg.push(t, y[0], control(t, y[0]), y[1], y[2]);
        apply_impulse(t, &mut y, &mut seg, &mut segments, &mut events)?;
    }
    segments.push(seg);

    let terminal_state = y[0];
    Ok(Trajectory {
        t0,
        x0,
        segments,
        events,
        j1: y[1] + params.p1_terminal_cost(terminal_state),
        j2: y[2] + params.p2_terminal_cost(terminal_state),
        terminal_state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityViolation {
    /// Index of the offending event, or of the segment when no event is involved.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdmissibilityReport {
    pub violations: Vec<AdmissibilityViolation>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Distance to the crossed band edge accepted for an event state.
pub const BOUNDARY_TOL: f64 = 1e-6;

/// Checks that every impulse fires at the first exit from the band, lands on
/// the prescribed target, and that event times are strictly increasing and
/// strictly before the horizon.
pub fn admissibility_check(traj: &Trajectory, eq: &Equilibrium) -> AdmissibilityReport {
    let mut report = AdmissibilityReport::default();
    let mut fail = |index: usize, reason: String| {
        report
            .violations
            .push(AdmissibilityViolation { index, reason })
    };
    let big_t = eq.horizon();

    if traj.segments.len() != traj.events.len() + 1 {
        fail(
            0,
            format!(
                "{} segments for {} events",
                traj.segments.len(),
                traj.events.len()
            ),
        );
        return report;
    }

    for (k, ev) in traj.events.iter().enumerate() {
        if ev.tau >= big_t {
            fail(k, format!("impulse at tau = {} not before the horizon", ev.tau));
        }
        if k > 0 && ev.tau <= traj.events[k - 1].tau {
            fail(k, "event times not strictly increasing".into());
        }
        let th = eq.thresholds(ev.tau);
        match th.impulse(ev.x_minus) {
            None if th.band_gap(ev.x_minus) > BOUNDARY_TOL => fail(
                k,
                format!("impulse from interior state {} at tau = {}", ev.x_minus, ev.tau),
            ),
            _ => {}
        }
        let target = if ev.x_minus - th.ell1 < th.ell2 - ev.x_minus {
            th.alpha
        } else {
            th.beta
        };
        if (ev.x_plus - target).abs() > 1e-9 {
            fail(k, format!("post-impulse state {} differs from target {}", ev.x_plus, target));
        }
        if (ev.xi - (ev.x_plus - ev.x_minus)).abs() > 1e-12 {
            fail(k, "impulse size inconsistent with the jump".into());
        }
        let initial = k == 0 && ev.tau == traj.t0;
        if !initial && th.band_gap(ev.x_minus).abs() > BOUNDARY_TOL {
            fail(
                k,
                format!(
                    "event state {} is not at the crossed band edge (gap {})",
                    ev.x_minus,
                    th.band_gap(ev.x_minus)
                ),
            );
        }
        let seg = &traj.segments[k];
        if seg.t.last() != Some(&ev.tau) || seg.x.last() != Some(&ev.x_minus) {
            fail(k, "segment does not end at the event".into());
        }
    }

    // Strictly inside the band before each exit.
    for (s, seg) in traj.segments.iter().enumerate() {
        let n = seg.len();
        for i in 0..n.saturating_sub(1) {
            if eq.thresholds(seg.t[i]).band_gap(seg.x[i]) <= 0.0 {
                fail(
                    s.min(traj.events.len().saturating_sub(1)),
                    format!(
                        "state {} at t = {} left the band without an impulse",
                        seg.x[i], seg.t[i]
                    ),
                );
                break;
            }
        }
    }
    report
}
