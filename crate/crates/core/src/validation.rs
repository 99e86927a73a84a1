//! Executable acceptance checks, grouped into suites.
//!
//! Each check runs its experiment at the stated resolution and reports a
//! pass flag with the headline numbers. Runtime errors inside a check
//! (for example an invariant breach on an under-resolved grid) are turned
//! into failures carrying the error text.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::analysis::{
    audit, compare_with_characteristics, compare_with_kinetic, longtime_gap, shock_time, AssumptionLevel,
};
use crate::bernstein::{check_assumptions, check_complete_monotonicity, fit_representation, geometric_abscissae, transform};
use crate::cf_kinetic::{KineticModel, Truncation, DEFAULT_CFL};
use crate::characteristics::{detect_crossing, integrate_family};
use crate::equilibrium::{equilibrium_profile, equilibrium_residual, solve_g};
use crate::error::{Error, Result};
use crate::fixtures::Fixture;
use crate::hj_solver::{cfl_dt, solve, HjGrid, HjState, Scheme, SolverConfig, Trajectory};
use crate::measures::{DiscreteMeasure, SizeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Invariants,
    Crossval,
    Shocks,
    Equilibrium,
    Longtime,
    Bernstein,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Invariants => &[1, 2, 3, 4],
            Suite::Crossval => &[5, 6, 7],
            Suite::Shocks => &[8],
            Suite::Equilibrium => &[9],
            Suite::Longtime => &[10],
            Suite::Bernstein => &[11],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "invariants" => Suite::Invariants,
            "crossval" => Suite::Crossval,
            "shocks" => Suite::Shocks,
            "equilibrium" => Suite::Equilibrium,
            "longtime" => Suite::Longtime,
            "bernstein" => Suite::Bernstein,
            "all" => Suite::All,
            other => return Err(Error::Parse(format!("unknown suite `{other}`"))),
        })
    }
}

/// Resolution overrides; `None` keeps each check's stated resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Options {
    /// Node count of the HJ grids used by checks 1-4.
    pub hj_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} {} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub fn name(id: u8) -> &'static str {
    match id {
        1 => "steady_linear_solution",
        2 => "cutoff_monotone_in_n",
        3 => "bounds_and_slopes",
        4 => "comparison_principle",
        5 => "zeroth_moment_law",
        6 => "kinetic_crossvalidation",
        7 => "characteristics_agreement",
        8 => "shock_dichotomy",
        9 => "equilibrium_family",
        10 => "longtime_convergence",
        11 => "bernstein_layer",
        _ => "unknown",
    }
}

/// Runs one check by number.
pub fn run_criterion(id: u8, opts: &Options) -> CriterionResult {
    let start = Instant::now();
    let outcome: Result<(bool, String)> = match id {
        1 => steady_linear(opts),
        2 => cutoff_monotone(opts),
        3 => bounds_and_slopes(opts),
        4 => comparison(opts),
        5 => zeroth_moment(),
        6 => kinetic_crossval(),
        7 => characteristics_agreement(),
        8 => shock_dichotomy(),
        9 => equilibrium_family(),
        10 => longtime(),
        11 => bernstein_layer(),
        _ => Err(Error::InvalidParameter(format!("no check numbered {id}"))),
    };
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        name: name(id),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_suite(suite: Suite, opts: &Options) -> Vec<CriterionResult> {
    suite.criteria().iter().map(|&id| run_criterion(id, opts)).collect()
}

const EXP04: Fixture = Fixture::Exp { m: 0.4, b: 1.0 };

fn hj_grid(opts: &Options, l: f64, n: usize) -> Result<HjGrid> {
    HjGrid::new(l, opts.hj_nodes.unwrap_or(n))
}

fn steady_linear(opts: &Options) -> Result<(bool, String)> {
    let grid = hj_grid(opts, 40.0, 4001)?;
    let mut worst = 0.0f64;
    for m in [0.4, 1.0] {
        let cfg = SolverConfig::new(m, Scheme::singular(), 1.0)?;
        let traj = solve(|x| m * x, grid, &cfg, &[])?;
        let last = traj.last();
        for i in 1..grid.len() - 1 {
            worst = worst.max((last.values[i] - m * grid.x(i)).abs());
        }
    }
    Ok((worst <= 1e-8, format!("sup |F - mx| = {worst:.3e} (<= 1e-8)")))
}

fn cutoff_monotone(opts: &Options) -> Result<(bool, String)> {
    let grid = hj_grid(opts, 40.0, 4001)?;
    let m = 0.4;
    let ns = [16u32, 32, 64, 128];
    let times = [0.25, 0.5, 1.0];
    // One step size for all n so that the runs differ only in the cutoff.
    let finest = SolverConfig::new(m, Scheme::Cutoff { n: 128 }, 1.0)?;
    let dt = cfl_dt(&HjState::from_fn(grid, |x| EXP04.value(x)), &finest);
    let runs: Vec<Trajectory> = ns
        .par_iter()
        .map(|&n| {
            let cfg = SolverConfig::new(m, Scheme::Cutoff { n }, 1.0)?.with_dt(dt)?;
            solve(|x| EXP04.value(x), grid, &cfg, &times)
        })
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            for t in times {
                let (coarse, fine) = (runs[a].at(t).expect("output time"), runs[b].at(t).expect("output time"));
                for i in 0..grid.len() {
                    worst = worst.max(fine.values[i] - coarse.values[i]);
                }
            }
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max (F_n' - F_n) over n' > n = {worst:.3e} (<= 1e-8)"),
    ))
}

fn bounds_and_slopes(opts: &Options) -> Result<(bool, String)> {
    let grid = hj_grid(opts, 40.0, 4001)?;
    let m = 0.4;
    let times: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for scheme in [Scheme::singular(), Scheme::Cutoff { n: 256 }] {
        let cfg = SolverConfig::new(m, scheme, 1.0)?;
        let traj = solve(|x| EXP04.value(x), grid, &cfg, &times)?;
        let report = audit(&traj, m, AssumptionLevel::A1A2A3, None);
        pass &= report.all_pass();
        let worst = report
            .entries
            .iter()
            .map(|e| e.worst)
            .fold(0.0, f64::max);
        let failed: Vec<&str> = report.failures().map(|e| e.name).collect();
        notes.push(format!(
            "{}: worst excess {worst:.2e}{}",
            scheme.name(),
            if failed.is_empty() { String::new() } else { format!(" failed {failed:?}") }
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn comparison(opts: &Options) -> Result<(bool, String)> {
    let grid = hj_grid(opts, 40.0, 4001)?;
    let m = 0.4;
    let times: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let mut worst = f64::NEG_INFINITY;
    for scheme in [Scheme::singular(), Scheme::Cutoff { n: 64 }, Scheme::Viscous { epsilon: 0.01 }] {
        let probe = SolverConfig::new(m, scheme, 1.0)?;
        let dt = cfl_dt(&HjState::from_fn(grid, |x| EXP04.value(x)), &probe);
        let cfg = probe.with_dt(dt)?;
        let upper = solve(|x| EXP04.value(x), grid, &cfg, &times)?;
        let lower = solve(|x| 0.5 * EXP04.value(x), grid, &cfg, &times)?;
        for (u, l) in upper.states.iter().zip(&lower.states) {
            for i in 0..grid.len() {
                worst = worst.max(l.values[i] - u.values[i]);
            }
        }
    }
    Ok((worst <= 1e-8, format!("max (F_low - F_high) = {worst:.3e} (<= 1e-8)")))
}

/// Least-squares quadratic `a + b t + c t²`; returns `b`.
fn fitted_slope(t: &[f64], y: &[f64]) -> f64 {
    let a = DMatrix::from_fn(t.len(), 3, |i, j| t[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let coef = a.svd(true, true).solve(&b, 1e-14).expect("full SVD");
    coef[1]
}

fn exp_measure(m: f64, nodes: usize) -> Result<DiscreteMeasure> {
    let grid = Arc::new(SizeGrid::geometric(1e-3, 50.0, nodes)?);
    Fixture::Exp { m, b: 1.0 }.measure(grid)
}

fn zeroth_moment() -> Result<(bool, String)> {
    let mu = exp_measure(0.4, 400)?;
    let model = KineticModel::new(mu.shared_grid(), Truncation::Outflux)?;
    let times: Vec<f64> = (1..=20).map(|k| 0.01 * k as f64).collect();
    let traj = model.run(mu, 0.2, &times, DEFAULT_CFL)?;
    let t: Vec<f64> = traj.moments.iter().map(|r| r.t).collect();
    let m0: Vec<f64> = traj.moments.iter().map(|r| r.m0).collect();
    let slope = fitted_slope(&t, &m0);
    let expected = 0.5 * 0.4 * 0.6;
    let lost = traj.last().mass_lost;
    let rel = (slope - expected).abs() / expected;
    Ok((
        rel <= 0.02 && lost < 1e-6,
        format!("dm0/dt(0) = {slope:.5} vs {expected} (rel {rel:.2e} <= 2e-2), mass_lost {lost:.1e}"),
    ))
}

fn crossval_discrepancy(hj_nodes: usize, size_nodes: usize) -> Result<f64> {
    let mu = exp_measure(0.4, size_nodes)?;
    let m1 = mu.moment(1);
    let times: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let model = KineticModel::new(mu.shared_grid(), Truncation::Outflux)?;
    let kinetic = model.run(mu.clone(), 1.0, &times, DEFAULT_CFL)?;
    let grid = HjGrid::new(40.0, hj_nodes)?;
    let cfg = SolverConfig::new(m1, Scheme::singular(), 1.0)?;
    let hj = solve(|x| transform(&mu, x), grid, &cfg, &times)?;
    Ok(compare_with_kinetic(&hj, &kinetic, 5.0)?.discrepancy)
}

fn kinetic_crossval() -> Result<(bool, String)> {
    let (coarse, fine) = rayon::join(|| crossval_discrepancy(4001, 400), || crossval_discrepancy(8001, 800));
    let (coarse, fine) = (coarse?, fine?);
    let budget = 0.02 * 0.4 * 5.0;
    let ratio = fine / coarse;
    Ok((
        coarse <= budget && ratio <= 0.6,
        format!("sup discrepancy {coarse:.3e} (<= {budget}), refined/coarse {ratio:.3} (<= 0.6)"),
    ))
}

fn characteristics_agreement() -> Result<(bool, String)> {
    let m = 0.4;
    let t = 0.5;
    let x0s: Vec<f64> = (1..=400).map(|k| 0.025 * k as f64).collect();
    let paths = integrate_family(&x0s, &|x| EXP04.value(x), &|x| EXP04.derivative(x), m, t, None)?;
    let lo_speed = -(m + 0.5) - 1e-12;
    let hi_speed = -0.5 + 1e-12;
    let speed_ok = paths
        .iter()
        .flat_map(|p| p.velocities())
        .all(|v| v >= lo_speed && v <= hi_speed);
    let grid = HjGrid::new(40.0, 4001)?;
    let cfg = SolverConfig::new(m, Scheme::singular(), t)?;
    let hj = solve(|x| EXP04.value(x), grid, &cfg, &[t])?;
    let cmp = compare_with_characteristics(hj.last(), &paths, 0.25, 5.0)?;
    let budget = 5.0 * grid.dx() * m;
    Ok((
        speed_ok && cmp.discrepancy <= budget,
        format!(
            "sup |F_hj - F_char| = {:.3e} (<= {budget:.3e}), speeds in [-(m+1/2), -1/2]: {speed_ok}",
            cmp.discrepancy
        ),
    ))
}

/// Crossing time from characteristics and kink time from the grid solver.
pub fn shock_times(fixture: Fixture, t_end: f64) -> Result<(Option<f64>, Option<f64>)> {
    let m = fixture.mass();
    let x0s: Vec<f64> = (1..=200).map(|k| 0.025 * k as f64).collect();
    let paths = integrate_family(&x0s, &|x| fixture.value(x), &|x| fixture.derivative(x), m, t_end, None)?;
    let crossing = detect_crossing(&paths).map(|c| c.t);
    let grid = HjGrid::new(40.0, 4001)?;
    let cfg = SolverConfig::new(m, Scheme::singular(), t_end)?;
    let steps = (t_end / 0.01).round() as usize;
    let times: Vec<f64> = (1..=steps).map(|k| 0.01 * k as f64).collect();
    let traj = solve(|x| fixture.value(x), grid, &cfg, &times)?;
    Ok((crossing, shock_time(&traj)))
}

fn shock_dichotomy() -> Result<(bool, String)> {
    let (hot, cold) = rayon::join(
        || shock_times(Fixture::Exp { m: 2.0, b: 1.0 }, 5.0),
        || shock_times(EXP04, 5.0),
    );
    let ((tc, ts), (qc, qs)) = (hot?, cold?);
    let fired = match (tc, ts) {
        (Some(a), Some(b)) => a <= 5.0 && b <= 5.0 && (a - b).abs() <= 0.2 * a,
        _ => false,
    };
    let silent = qc.is_none() && qs.is_none();
    Ok((
        fired && silent,
        format!("m=2: crossing {tc:?}, kink {ts:?} (agree within 20%: {fired}); m=0.4: crossing {qc:?}, kink {qs:?}"),
    ))
}

fn uniform(l: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| l * i as f64 / (n - 1) as f64).collect()
}

fn equilibrium_family() -> Result<(bool, String)> {
    let g = solve_g(4.0, 1.0)?;
    let root_ok = (g - 0.5).abs() <= 1e-12;
    let residual = |n: usize| -> Result<f64> {
        let p = equilibrium_profile(&uniform(20.0, n), 1.0)?;
        equilibrium_residual(&p.x, &p.f, 1.0)
    };
    let (coarse, fine) = (residual(2001)?, residual(4001)?);
    let ratio = coarse / fine;
    let x = uniform(20.0, 2001);
    let mut scale_err = 0.0f64;
    for lambda in [0.5, 2.0] {
        let scaled = equilibrium_profile(&x, lambda)?;
        let base = equilibrium_profile(&x.iter().map(|v| v / lambda).collect::<Vec<_>>(), 1.0)?;
        for (a, b) in scaled.f.iter().zip(&base.f) {
            scale_err = scale_err.max((a - lambda * b).abs());
        }
    }
    Ok((
        root_ok && ratio >= 3.5 && scale_err <= 1e-6,
        format!("G(4;1) - 0.5 = {:.1e}, residual ratio {ratio:.3} (>= 3.5), scaling error {scale_err:.1e}", g - 0.5),
    ))
}

fn longtime() -> Result<(bool, String)> {
    let m = 0.5;
    let fx = Fixture::Exp { m, b: 1.0 };
    let grid = HjGrid::new(40.0, 2001)?;
    let cfg = SolverConfig::new(m, Scheme::singular(), 200.0)?;
    let times: Vec<f64> = (1..=200).map(|k| k as f64).collect();
    let traj = solve(|x| fx.value(x), grid, &cfg, &times)?;
    let rep = longtime_gap(&traj, m, 1.0)?;
    let g20 = rep.gap_at(20.0).expect("output time");
    let g200 = rep.gap_at(200.0).expect("output time");
    Ok((
        g200 < 0.5 * g20 && g200 < 0.05 && rep.floor_pass,
        format!(
            "g(20) = {g20:.4e}, g(200) = {g200:.4e}, floor shortfall {:.1e}",
            rep.floor_violation
        ),
    ))
}

fn bernstein_layer() -> Result<(bool, String)> {
    let grid = Arc::new(SizeGrid::default_geometric());
    let exp = EXP04.measure(Arc::clone(&grid))?;
    let point = Fixture::Point { s0: 1.0, w: 0.4 }.measure(Arc::clone(&grid))?;
    let assumptions = check_assumptions(&exp, 0.4).all_pass() && check_assumptions(&point, 0.4).all_pass();

    let x = geometric_abscissae(1e-2, 1e2, 60);
    let f: Vec<f64> = x.iter().map(|&v| transform(&exp, v)).collect();
    let cm_exp = check_complete_monotonicity(&x, &f, 4)?.all_pass();
    let g: Vec<f64> = x.iter().map(|&v| solve_g(v, 1.0)).collect::<Result<_>>()?;
    let cm_g = check_complete_monotonicity(&x, &g, 4)?.all_pass();

    let xf = geometric_abscissae(1e-3, 1e2, 80);
    let unit = Fixture::Point { s0: 1.0, w: 1.0 };
    let vals: Vec<f64> = xf.iter().map(|&v| unit.value(v)).collect();
    let fit = fit_representation(&xf, &vals)?;
    Ok((
        assumptions && cm_exp && cm_g && fit.residual < 1e-6,
        format!(
            "assumptions {assumptions}, CM(transform) {cm_exp}, CM(G) {cm_g}, fit residual {:.2e} (< 1e-6)",
            fit.residual
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for (s, n) in [
            (Suite::Invariants, "invariants"),
            (Suite::Crossval, "crossval"),
            (Suite::Shocks, "shocks"),
            (Suite::Equilibrium, "equilibrium"),
            (Suite::Longtime, "longtime"),
            (Suite::Bernstein, "bernstein"),
        ] {
            assert_eq!(n.parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
        assert_eq!(Suite::All.criteria().len(), 11);
    }

    #[test]
    fn quadratic_fit_recovers_slope() {
        let t: Vec<f64> = (0..=10).map(|k| 0.02 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 1.0 + 0.12 * t - 0.3 * t * t).collect();
        assert!((fitted_slope(&t, &y) - 0.12).abs() < 1e-12);
    }

    #[test]
    fn unknown_check_fails() {
        let r = run_criterion(42, &Options::default());
        assert!(!r.pass && r.detail.starts_with("error"));
    }

    #[test]
    fn fast_suites_pass() {
        for r in run_suite(Suite::Equilibrium, &Options::default())
            .into_iter()
            .chain(run_suite(Suite::Bernstein, &Options::default()))
        {
            assert!(r.pass, "{r}");
        }
    }
}
