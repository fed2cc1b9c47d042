use thiserror::Error;

use crate::model::ParamViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<ParamViolation>),

    #[error("degenerate state box [{lo}, {hi}]: lower bound must be strictly below upper bound")]
    DegenerateBox { lo: f64, hi: f64 },

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {what} at node {node}")]
    NonFinite { node: usize, what: &'static str },

    #[error("convexity violation at node {node} (t = {t}): p2 = {p2} is not positive")]
    ConvexityViolation { node: usize, t: f64, p2: f64 },

    #[error(
        "threshold ordering violated at node {node} (t = {t}): \
         ell1 = {ell1}, alpha = {alpha}, beta = {beta}, ell2 = {ell2}"
    )]
    OrderingViolation {
        node: usize,
        t: f64,
        ell1: f64,
        alpha: f64,
        beta: f64,
        ell2: f64,
    },

    #[error("impulse budget exceeded at t = {tau}: {events} events against bound {bound} ({reason})")]
    ImpulseBudgetExceeded {
        events: usize,
        bound: u64,
        tau: f64,
        reason: &'static str,
    },

    #[error("(t = {t}, x = {x}) is not in the continuation region")]
    RegionError { t: f64, x: f64 },
}

fn format_violations(v: &[ParamViolation]) -> String {
    v.iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
