//! Flat `key = value` run configuration.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored. The
//! fifteen model parameters and the box bounds `x_lo`, `x_hi` are required.

use std::collections::BTreeMap;
use std::path::PathBuf;

use impulse_core::{GameParams, StateBox, DEFAULT_STEPS};
use thiserror::Error;

const PARAM_KEYS: [&str; 15] = [
    "a", "b", "w1", "r1", "z1", "s1", "rho1", "w2", "s2", "rho2", "C", "D", "c", "d", "T",
];
const REQUIRED_EXTRA: [&str; 2] = ["x_lo", "x_hi"];
const OPTIONAL_KEYS: [&str; 6] = ["n_steps", "sim_step", "nt", "nx", "initial_states", "output_dir"];

pub const DEFAULT_GRID: usize = 200;
pub const DEFAULT_OUTPUT_DIR: &str = "output";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    DuplicateKey { line: usize, key: String, first: usize },
    #[error("line {line}: cannot parse `{text}` as {expected} for `{key}`")]
    BadNumber {
        line: usize,
        key: String,
        text: String,
        expected: &'static str,
    },
    #[error("line {line}: `{key}` must be positive, got {value}")]
    NotPositive { line: usize, key: String, value: String },
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<&'static str>),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: GameParams,
    pub state_box: StateBox,
    pub n_steps: usize,
    pub sim_step: f64,
    pub nt: usize,
    pub nx: usize,
    pub initial_states: Vec<f64>,
    pub output_dir: PathBuf,
}

struct Entry {
    line: usize,
    value: String,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: content.to_string(),
        })?;
        let key = key.trim();
        let known = PARAM_KEYS
            .iter()
            .chain(&REQUIRED_EXTRA)
            .chain(&OPTIONAL_KEYS)
            .find(|k| **k == key)
            .ok_or_else(|| ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })?;
        if let Some(prev) = entries.get(known) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
                first: prev.line,
            });
        }
        entries.insert(
            known,
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }

    let missing: Vec<&'static str> = PARAM_KEYS
        .iter()
        .chain(&REQUIRED_EXTRA)
        .copied()
        .filter(|k| !entries.contains_key(k))
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }

    let real = |key: &str| -> Result<f64, ConfigError> {
        let e = &entries[key];
        parse_real(key, e.line, &e.value)
    };
    let positive_real = |key: &str, default: f64| -> Result<f64, ConfigError> {
        match entries.get(key) {
            None => Ok(default),
            Some(e) => {
                let v = parse_real(key, e.line, &e.value)?;
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(ConfigError::NotPositive {
                        line: e.line,
                        key: key.to_string(),
                        value: e.value.clone(),
                    })
                }
            }
        }
    };
    let count = |key: &str, default: usize| -> Result<usize, ConfigError> {
        match entries.get(key) {
            None => Ok(default),
            Some(e) => {
                let v: usize = e.value.parse().map_err(|_| ConfigError::BadNumber {
                    line: e.line,
                    key: key.to_string(),
                    text: e.value.clone(),
                    expected: "a non-negative integer",
                })?;
                if v > 0 {
                    Ok(v)
                } else {
                    Err(ConfigError::NotPositive {
                        line: e.line,
                        key: key.to_string(),
                        value: e.value.clone(),
                    })
                }
            }
        }
    };

    let params = GameParams {
        drift: real("a")?,
        control_gain: real("b")?,
        p1_state_weight: real("w1")?,
        p1_control_weight: real("r1")?,
        p1_impulse_weight: real("z1")?,
        p1_terminal_weight: real("s1")?,
        p1_target: real("rho1")?,
        p2_state_weight: real("w2")?,
        p2_terminal_weight: real("s2")?,
        p2_target: real("rho2")?,
        fixed_cost_up: real("C")?,
        fixed_cost_down: real("D")?,
        marginal_cost_up: real("c")?,
        marginal_cost_down: real("d")?,
        horizon: real("T")?,
    };
    let params = params
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let state_box =
        StateBox::new(real("x_lo")?, real("x_hi")?).map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let initial_states = match entries.get("initial_states") {
        None => Vec::new(),
        Some(e) => e
            .value
            .split(',')
            .map(|s| parse_real("initial_states", e.line, s.trim()))
            .collect::<Result<_, _>>()?,
    };

    Ok(RunConfig {
        params,
        state_box,
        n_steps: count("n_steps", DEFAULT_STEPS)?,
        sim_step: positive_real("sim_step", params.horizon / DEFAULT_STEPS as f64)?,
        nt: count("nt", DEFAULT_GRID)?,
        nx: count("nx", DEFAULT_GRID)?,
        initial_states,
        output_dir: entries
            .get("output_dir")
            .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), |e| PathBuf::from(&e.value)),
    })
}

fn parse_real(key: &str, line: usize, text: &str) -> Result<f64, ConfigError> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::BadNumber {
            line,
            key: key.to_string(),
            text: text.to_string(),
            expected: "a finite real number",
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
# reference parameters
a = 0.1
b = -0.3
w1 = 1
r1 = 1
z1 = 2
s1 = 1
rho1 = 2.5
w2 = 4
s2 = 1
rho2 = 5
C = 3
D = 5
c = 2
d = 3
T = 1
x_lo = 0
x_hi = 10
";

    #[test]
    fn reference_round_trip() {
        let cfg = parse_config(REFERENCE).unwrap();
        assert_eq!(cfg.params, GameParams::reference());
        assert_eq!(cfg.state_box, StateBox::new(0.0, 10.0).unwrap());
        assert_eq!(cfg.n_steps, 4096);
        assert_eq!(cfg.nt, 200);
        assert_eq!(cfg.sim_step, 1.0 / 4096.0);
        assert!(cfg.initial_states.is_empty());
    }

    #[test]
    fn empty_file_lists_required_keys() {
        match parse_config("") {
            Err(ConfigError::Missing(keys)) => {
                assert_eq!(keys.len(), 17);
                assert!(keys.contains(&"rho2") && keys.contains(&"x_hi"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{REFERENCE}\nfoo = 1\n");
        match parse_config(&text) {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(key, "foo");
                assert_eq!(line, 20);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = REFERENCE.replace("w2 = 4", "w2 = four");
        match parse_config(&text) {
            Err(ConfigError::BadNumber { line, key, .. }) => {
                assert_eq!(key, "w2");
                assert_eq!(line, 9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = format!("{REFERENCE}w2 = 1\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::DuplicateKey { first: 9, .. })));
    }

    #[test]
    fn optional_keys() {
        let text = format!("{REFERENCE}initial_states = 1, 6,10\nnt = 50\noutput_dir = out/x\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.initial_states, vec![1.0, 6.0, 10.0]);
        assert_eq!(cfg.nt, 50);
        assert_eq!(cfg.output_dir, PathBuf::from("out/x"));
    }

    #[test]
    fn degenerate_box_rejected() {
        let text = REFERENCE.replace("x_lo = 0", "x_lo = 5").replace("x_hi = 10", "x_hi = 5");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn non_positive_tuning_rejected() {
        let text = format!("{REFERENCE}n_steps = 0\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::NotPositive { .. })));
        let text = format!("{REFERENCE}sim_step = -1\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::NotPositive { .. })));
    }
}
