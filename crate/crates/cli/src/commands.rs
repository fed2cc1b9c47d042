use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use impulse_core::fmt::g12;
use impulse_core::simulate::{impulse_bound, rollout, RolloutOptions};
use impulse_core::verify::{verify, GridSpec, Tolerances, VerificationReport};
use impulse_core::Equilibrium;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Model(#[from] impulse_core::Error),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<&'static str>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use impulse_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Write { .. } => 1,
            CliError::Model(E::InvalidParams(_) | E::DegenerateBox { .. } | E::InvalidArgument(_)) => 1,
            CliError::Model(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Writes a header and rows, one comma-separated line each.
fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(wrap)?);
    writeln!(out, "{header}").map_err(wrap)?;
    for row in rows {
        writeln!(out, "{}", row.join(",")).map_err(wrap)?;
    }
    out.flush().map_err(wrap)
}

fn nums(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| g12(v)).collect()
}

fn prepare_output(cfg: &RunConfig) -> CliResult<&Path> {
    fs::create_dir_all(&cfg.output_dir).map_err(|source| CliError::Write {
        path: cfg.output_dir.clone(),
        source,
    })?;
    Ok(&cfg.output_dir)
}

fn solve(cfg: &RunConfig) -> CliResult<Equilibrium> {
    Ok(Equilibrium::solve(&cfg.params, cfg.n_steps)?)
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<()> {
    let eq = solve(cfg)?;
    let dir = prepare_output(cfg)?;
    let path = eq.path();
    let policy = eq.policy();
    let n = path.times.len();

    write_csv(
        &dir.join("thresholds.csv"),
        "t,ell1,alpha,beta,ell2",
        (0..n).map(|i| {
            nums(&[
                policy.times[i],
                policy.ell1[i],
                policy.alpha[i],
                policy.beta[i],
                policy.ell2[i],
            ])
        }),
    )?;
    write_csv(
        &dir.join("coefficients.csv"),
        "t,p1,q1,n1,p2,q2,n2,a_x",
        (0..n).map(|i| {
            nums(&[
                path.times[i],
                path.p1[i],
                path.q1[i],
                path.n1[i],
                path.p2[i],
                path.q2[i],
                path.n2[i],
                path.a_x[i],
            ])
        }),
    )?;
    let th = eq.thresholds(0.0);
    println!(
        "t = 0: ell1 = {}, alpha = {}, beta = {}, ell2 = {}",
        g12(th.ell1),
        g12(th.alpha),
        g12(th.beta),
        g12(th.ell2)
    );
    println!("wrote {n} rows to {}", dir.display());
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<()> {
    if cfg.initial_states.is_empty() {
        return Err(ConfigError::Invalid("simulate needs `initial_states`".into()).into());
    }
    let eq = solve(cfg)?;
    let dir = prepare_output(cfg)?;
    let mut cost_rows = Vec::with_capacity(cfg.initial_states.len());
    for &x0 in &cfg.initial_states {
        let opts = RolloutOptions {
            step: cfg.sim_step,
            max_events: eq.default_budget(x0),
        };
        let traj = rollout(&eq, 0.0, x0, &opts)?;
        let tag = g12(x0);
        write_csv(
            &dir.join(format!("trajectory_{tag}.csv")),
            "t,x,u",
            traj.samples().map(|(t, x, u)| nums(&[t, x, u])),
        )?;
        write_csv(
            &dir.join(format!("events_{tag}.csv")),
            "tau,x_minus,x_plus,xi,cost_p1,cost_p2",
            traj.events
                .iter()
                .map(|e| nums(&[e.tau, e.x_minus, e.x_plus, e.xi, e.cost_p1, e.cost_p2])),
        )?;
        println!(
            "x0 = {tag}: J1 = {}, J2 = {}, {} impulse(s)",
            g12(traj.j1),
            g12(traj.j2),
            traj.events.len()
        );
        let mut row = nums(&[x0, traj.j1, traj.j2]);
        row.push(traj.events.len().to_string());
        cost_rows.push(row);
    }
    write_csv(&dir.join("costs.csv"), "x0,J1,J2,n_events", cost_rows)
}

pub fn cmd_value(cfg: &RunConfig, t: f64) -> CliResult<()> {
    let horizon = cfg.params.horizon;
    if !(0.0..=horizon).contains(&t) {
        return Err(impulse_core::Error::InvalidArgument(format!("--t {t} outside [0, {horizon}]")).into());
    }
    let eq = solve(cfg)?;
    let dir = prepare_output(cfg)?;
    let mut rows = Vec::with_capacity(cfg.nx);
    for x in cfg.state_box.linspace(cfg.nx) {
        let s = eq.value_sample(t, x, cfg.sim_step)?;
        let mut row = nums(&[x, s.v1, s.v2]);
        row.push(s.region.as_str().to_string());
        rows.push(row);
    }
    let path = dir.join(format!("values_t{}.csv", g12(t)));
    write_csv(&path, "x0,V1,V2,region", rows)?;
    println!("wrote {} rows to {}", cfg.nx, path.display());
    Ok(())
}

pub fn cmd_verify(cfg: &RunConfig) -> CliResult<()> {
    let eq = solve(cfg)?;
    let dir = prepare_output(cfg)?;
    let grid = GridSpec {
        nt: cfg.nt,
        nx: cfg.nx,
        state_box: cfg.state_box,
    };
    let with_oracle = cfg.nt >= 17 && cfg.nx >= 17;
    let report = verify(&eq, grid, Tolerances::default(), with_oracle)?;
    write_report(dir, &report)?;

    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), g12);
    for c in &report.summary {
        println!(
            "{} {:<28} worst = {:<20} bound = {:<20} t = {:<16} x = {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            g12(c.worst),
            g12(c.bound),
            opt(c.at_t),
            opt(c.at_x)
        );
    }
    let failed: Vec<&'static str> = report
        .summary
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        println!("all {} conditions passed", report.summary.len());
        Ok(())
    } else {
        Err(CliError::Verification(failed))
    }
}

/// `report.csv` holds the condition summary; per-node and per-time records
/// go to `report_nodes.csv` and `report_times.csv`.
fn write_report(dir: &Path, report: &VerificationReport) -> CliResult<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, g12);
    write_csv(
        &dir.join("report.csv"),
        "condition,passed,worst,bound,t,x",
        report.summary.iter().map(|c| {
            vec![
                c.name.to_string(),
                c.passed.to_string(),
                g12(c.worst),
                g12(c.bound),
                opt(c.at_t),
                opt(c.at_x),
            ]
        }),
    )?;
    write_csv(
        &dir.join("report_nodes.csv"),
        "t,x,region,hjb1_residual,qvi_residual,gap,complementarity",
        report.nodes.iter().map(|n| {
            vec![
                g12(n.t),
                g12(n.x),
                n.region.as_str().to_string(),
                opt(n.hjb1_residual),
                g12(n.qvi_residual),
                g12(n.gap),
                g12(n.complementarity),
            ]
        }),
    )?;
    write_csv(
        &dir.join("report_times.csv"),
        "t,p2,ell1,alpha,beta,ell2,theta_alpha,theta_beta,x11,x22,margin_ell1,margin_ell2,convexity_margin",
        report.times.iter().map(|r| {
            let th = &r.thresholds;
            let c = &r.edges;
            let mut row = nums(&[
                r.t,
                r.p2,
                th.ell1,
                th.alpha,
                th.beta,
                th.ell2,
                c.theta_alpha,
                c.theta_beta,
            ]);
            row.extend([opt(c.x11), opt(c.x22), opt(c.margin_ell1), opt(c.margin_ell2)]);
            row.push(g12(r.convexity_margin));
            row
        }),
    )
}

pub fn cmd_bound(cfg: &RunConfig) -> CliResult<()> {
    let b = impulse_bound(&cfg.params, &cfg.state_box);
    println!("K = {}", b.k);
    println!("running_cost_sup = {}", g12(b.running_sup));
    println!("terminal_cost_sup = {}", g12(b.terminal_sup));
    println!("mu = {}", g12(b.mu));
    Ok(())
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(crate::config::parse_config(&text)?)
}
