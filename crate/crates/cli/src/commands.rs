//! The three subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cfhj::analysis::shock_time;
use cfhj::fixtures::Fixture;
use cfhj::hj_solver::{cfl_dt, solve, HjGrid, HjState, RightBoundary, Scheme, SolverConfig, Trajectory};
use cfhj::io;
use cfhj::validation::{run_suite, Options, Suite};

use crate::config::RunConfig;
use crate::CliError;

const RUN_KEYS: &[&str] = &[
    "m", "scheme", "n", "epsilon", "L", "N", "t_end", "times", "fixture", "cfl", "dt", "right_bc", "out",
];
const SWEEP_EXTRA: &[&str] = &["param", "values", "window"];

/// Everything needed for one HJ run.
#[derive(Debug, Clone)]
struct RunSpec {
    fixture: Fixture,
    grid: HjGrid,
    cfg: SolverConfig,
    times: Vec<f64>,
}

impl RunSpec {
    fn from_config(c: &RunConfig) -> Result<Self, CliError> {
        let m: f64 = c.require("m")?;
        let scheme = match c.raw("scheme").unwrap_or("cutoff") {
            "cutoff" => Scheme::Cutoff { n: c.get_or("n", 64u32)? },
            "viscous" => Scheme::Viscous { epsilon: c.get_or("epsilon", 0.01)? },
            "singular" => Scheme::singular(),
            other => {
                return Err(CliError::Config(format!(
                    "scheme must be cutoff, viscous or singular, got `{other}`"
                )))
            }
        };
        let t_end: f64 = c.get_or("t_end", 1.0)?;
        let mut cfg = SolverConfig::new(m, scheme, t_end)?;
        if let Some(cfl) = c.get::<f64>("cfl")? {
            cfg = cfg.with_cfl(cfl)?;
        }
        if let Some(dt) = c.get::<f64>("dt")? {
            cfg = cfg.with_dt(dt)?;
        }
        if let Some(bc) = c.raw("right_bc") {
            cfg = cfg.with_right_bc(parse_bc(bc)?);
        }
        let grid = HjGrid::new(c.get_or("L", 20.0)?, c.get_or("N", 2001usize)?)?;
        let fixture = match c.raw("fixture") {
            Some(s) => s.parse()?,
            None => Fixture::Exp { m, b: 1.0 },
        };
        let times = c.list("times")?.unwrap_or_default();
        Ok(Self { fixture, grid, cfg, times })
    }

    fn run(&self) -> Result<Trajectory, CliError> {
        let fx = self.fixture;
        Ok(solve(|x| fx.value(x), self.grid, &self.cfg, &self.times)?)
    }

    fn initial_dt(&self) -> f64 {
        let fx = self.fixture;
        cfl_dt(&HjState::from_fn(self.grid, |x| fx.value(x)), &self.cfg)
    }
}

fn parse_bc(s: &str) -> Result<RightBoundary, CliError> {
    match s {
        "extrapolate" => Ok(RightBoundary::LinearExtrapolation),
        _ => s
            .strip_prefix("slope:")
            .and_then(|v| v.parse().ok())
            .map(RightBoundary::FixedSlope)
            .ok_or_else(|| CliError::Config(format!("right_bc must be extrapolate or slope:<value>, got `{s}`"))),
    }
}

fn save(traj: &Trajectory, fixture: Fixture, prefix: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let csv = prefix.with_extension("csv");
    let meta = prefix.with_extension("meta");
    let shock = shock_time(traj).map_or("none".to_string(), |t| t.to_string());
    traj.save(&csv, &meta, &[("fixture", fixture.to_string()), ("shock_time", shock)])?;
    Ok((csv, meta))
}

pub fn solve_hj(args: &[String]) -> Result<(), CliError> {
    let c = RunConfig::parse(args, RUN_KEYS)?;
    let spec = RunSpec::from_config(&c)?;
    let traj = spec.run()?;
    let prefix = PathBuf::from(c.raw("out").unwrap_or("hj"));
    let (csv, meta) = save(&traj, spec.fixture, &prefix)?;
    let last = traj.last();
    println!(
        "solved to t = {} ({} snapshots); F(1) = {}; wrote {} and {}",
        last.t,
        traj.states.len(),
        io::fmt_f64(last.eval(1.0)),
        csv.display(),
        meta.display()
    );
    Ok(())
}

pub fn validate(args: &[String]) -> Result<(), CliError> {
    let (suite, rest) = match args.split_first() {
        Some((s, rest)) if !s.contains('=') => (s.parse::<Suite>()?, rest),
        _ => return Err(CliError::Config("validate needs a suite name".into())),
    };
    let c = RunConfig::parse(rest, &["N"])?;
    let opts = Options { hj_nodes: c.get("N")? };
    let results = run_suite(suite, &opts);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} passed, {} failed", results.len() - failed, failed);
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} check(s) failed")));
    }
    Ok(())
}

/// Per-run sweep metrics, computed from the final state.
#[derive(Debug, Clone)]
struct SweepRow {
    value: f64,
    outcome: Result<(Option<f64>, HjState), String>,
}

pub fn sweep(args: &[String]) -> Result<(), CliError> {
    let keys: Vec<&str> = RUN_KEYS.iter().chain(SWEEP_EXTRA).copied().collect();
    let c = RunConfig::parse(args, &keys)?;
    let param: String = c.require("param")?;
    if !["m", "n", "epsilon", "N"].contains(&param.as_str()) {
        return Err(CliError::Config(format!("param must be m, n, epsilon or N, got `{param}`")));
    }
    let values = c
        .list("values")?
        .filter(|v| !v.is_empty())
        .ok_or_else(|| CliError::Config("missing required key `values`".into()))?;
    let window: f64 = c.get_or("window", 1.0)?;
    let out = PathBuf::from(c.raw("out").unwrap_or("sweep"));
    std::fs::create_dir_all(&out)?;

    let mut base = c.clone();
    if param == "n" {
        base.set("scheme", "cutoff".into());
    } else if param == "epsilon" {
        base.set("scheme", "viscous".into());
    }
    if base.raw("m").is_none() && param != "m" {
        return Err(CliError::Config("missing required key `m`".into()));
    }
    if base.raw("times").is_none() {
        // Dense snapshots so the kink time can be located.
        let t_end: f64 = base.get_or("t_end", 1.0)?;
        let ts: Vec<String> = (1..=100).map(|k| (t_end * k as f64 / 100.0).to_string()).collect();
        base.set("times", ts.join(","));
    }

    let mut specs = Vec::with_capacity(values.len());
    for &v in &values {
        let mut rc = base.clone();
        rc.set(&param, fmt_value(&param, v));
        specs.push(RunSpec::from_config(&rc).map_err(|e| e.to_string()));
    }
    // A common step when the regularization varies, so only `n` changes.
    if param == "n" && base.raw("dt").is_none() {
        let dt = specs
            .iter()
            .filter_map(|s| s.as_ref().ok())
            .map(RunSpec::initial_dt)
            .fold(f64::INFINITY, f64::min);
        if dt.is_finite() {
            for s in specs.iter_mut().flatten() {
                s.cfg = s.cfg.with_dt(dt)?;
            }
        }
    }

    let rows: Vec<SweepRow> = specs
        .par_iter()
        .zip(values.par_iter())
        .enumerate()
        .map(|(k, (spec, &value))| {
            let outcome = spec.clone().and_then(|spec| {
                let traj = spec.run().map_err(|e| e.to_string())?;
                save(&traj, spec.fixture, &out.join(format!("run_{k:03}")))
                    .map_err(|e| e.to_string())?;
                Ok((shock_time(&traj), traj.last().clone()))
            });
            SweepRow { value, outcome }
        })
        .collect();

    let mut table = Vec::with_capacity(rows.len());
    let mut prev: Option<&HjState> = None;
    let mut prev_change = f64::NAN;
    let mut failures = 0;
    for (k, row) in rows.iter().enumerate() {
        match &row.outcome {
            Ok((shock, state)) => {
                let m = state_mass(&specs[k]);
                let gap = sup_gap(state, m, window);
                let change = prev.map_or(f64::NAN, |p| sup_diff(p, state, window));
                let ratio = change / prev_change;
                table.push(vec![
                    row.value,
                    1.0,
                    shock.is_some() as u8 as f64,
                    shock.unwrap_or(f64::NAN),
                    state.eval(1.0),
                    gap,
                    change,
                    ratio,
                ]);
                prev = Some(state);
                prev_change = change;
            }
            Err(e) => {
                eprintln!("cfhj: run {k} ({param}={}) failed: {e}", row.value);
                failures += 1;
                table.push(vec![row.value, 0.0, 0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
                prev = None;
                prev_change = f64::NAN;
            }
        }
    }
    let summary = out.join("summary.csv");
    io::write_csv_file(
        &summary,
        &["value", "ok", "shock", "shock_time", "F_at_1", "sup_gap", "change", "ratio"],
        table,
    )?;
    println!("{} runs, {} failed; wrote {}", rows.len(), failures, summary.display());
    if failures > 0 {
        return Err(CliError::Failed(format!("{failures} of {} runs failed", rows.len())));
    }
    Ok(())
}

fn fmt_value(param: &str, v: f64) -> String {
    if matches!(param, "n" | "N") {
        format!("{}", v.round() as i64)
    } else {
        v.to_string()
    }
}

fn state_mass(spec: &Result<RunSpec, String>) -> f64 {
    spec.as_ref().map_or(f64::NAN, |s| s.cfg.m)
}

/// `sup_{x ≤ window} |F(x) − m x|`.
fn sup_gap(state: &HjState, m: f64, window: f64) -> f64 {
    (0..state.grid.len())
        .map(|i| state.x(i))
        .take_while(|&x| x <= window + 1e-12)
        .zip(&state.values)
        .map(|(x, v)| (v - m * x).abs())
        .fold(0.0, f64::max)
}

/// Sup difference on `[0, window]`, sampled at the nodes of the coarser grid.
fn sup_diff(a: &HjState, b: &HjState, window: f64) -> f64 {
    let (coarse, fine) = if a.grid.dx() >= b.grid.dx() { (a, b) } else { (b, a) };
    let hi = window.min(coarse.grid.x_max()).min(fine.grid.x_max());
    (0..coarse.grid.len())
        .map(|i| (coarse.x(i), coarse.values[i]))
        .take_while(|&(x, _)| x <= hi + 1e-12)
        .map(|(x, v)| (v - fine.eval(x)).abs())
        .fold(0.0, f64::max)
}
