//! Post-processing of trajectories: invariant audits, shock detection,
//! long-time gaps and cross-method comparison.

use std::fmt::Write as _;

use crate::bernstein::transform;
use crate::cf_kinetic::KineticTrajectory;
use crate::characteristics::{reconstruct_f, CharPath};
use crate::error::{Error, Result};
use crate::hj_solver::{hamiltonian, HjState, Trajectory};
use crate::io;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantEntry {
    pub name: &'static str,
    pub pass: bool,
    /// Largest excess over the bound (0 when the bound holds everywhere).
    pub worst: f64,
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantReport {
    pub entries: Vec<InvariantEntry>,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    pub fn verdict(&self) -> &'static str {
        if self.all_pass() {
            "PASS"
        } else {
            "FAIL"
        }
    }

    /// `check,pass,worst,x,t` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,pass,worst,x,t\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.name,
                e.pass,
                io::fmt_f64(e.worst),
                io::fmt_f64(e.x),
                io::fmt_f64(e.t)
            );
        }
        out
    }

    pub fn extend(&mut self, other: InvariantReport) {
        self.entries.extend(other.entries);
    }
}

/// Tracks the largest excess of a quantity over its bound.
struct Tally {
    name: &'static str,
    worst: f64,
    x: f64,
    t: f64,
    tol: f64,
}

impl Tally {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            worst: 0.0,
            x: f64::NAN,
            t: f64::NAN,
            tol,
        }
    }

    fn record(&mut self, excess: f64, x: f64, t: f64) {
        if excess > self.worst || excess.is_nan() {
            self.worst = if excess.is_nan() { f64::INFINITY } else { excess };
            self.x = x;
            self.t = t;
        }
    }

    fn finish(self) -> InvariantEntry {
        InvariantEntry {
            name: self.name,
            pass: self.worst <= self.tol,
            worst: self.worst,
            x: self.x,
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionLevel {
    /// Bounds, slope range and concavity.
    A1A2,
    /// Additionally the curvature floor `x F_xx ≥ −1` (checked for `m < ½`).
    A1A2A3,
}

/// Audits every state of `traj` on nodes with `x ≤ window` (the whole grid
/// when `window` is `None`). The tolerance is `1e-7 (1 + m L)`; cutoff
/// trajectories get the extra `max(1, m)/n` room in the upper bound.
pub fn audit(traj: &Trajectory, m: f64, level: AssumptionLevel, window: Option<f64>) -> InvariantReport {
    let grid = traj.grid;
    let tol = traj.config.tolerance(&grid);
    let slack = traj.config.upper_slack();
    let dx = grid.dx();
    let x_end = window.unwrap_or(f64::INFINITY);
    let last = (0..grid.len()).take_while(|&i| grid.x(i) <= x_end + 1e-12).last().unwrap_or(0);

    let mut lower = Tally::new("lower_bound", tol);
    let mut upper = Tally::new("upper_bound", tol);
    let mut slope_lo = Tally::new("slope_lower", tol);
    let mut slope_hi = Tally::new("slope_upper", tol);
    let mut concave = Tally::new("concavity", tol);
    let mut curvature = Tally::new("curvature_floor", tol);
    let mut lipschitz = Tally::new("time_lipschitz", tol);

    for s in &traj.states {
        let f = &s.values;
        for i in 0..=last {
            let x = grid.x(i);
            lower.record(-f[i], x, s.t);
            upper.record(f[i] - (m * x + slack), x, s.t);
            if i < last {
                let p = (f[i + 1] - f[i]) / dx;
                slope_lo.record(-p, x, s.t);
                slope_hi.record(p - m, x, s.t);
            }
            if i >= 1 && i < last {
                let d2 = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (dx * dx);
                concave.record(d2, x, s.t);
                curvature.record(-1.0 - x * d2, x, s.t);
            }
        }
    }
    // |F_t| ≤ max_{[0,m]} |H| + m for slopes in [0, m] and 0 ≤ F ≤ m x.
    let bound = hamiltonian(0.0, m).abs() + m;
    for w in traj.states.windows(2) {
        let dt = w[1].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        for i in 0..=last {
            let rate = (w[1].values[i] - w[0].values[i]).abs() / dt;
            lipschitz.record(rate - bound, grid.x(i), w[1].t);
        }
    }

    let mut entries = vec![
        lower.finish(),
        upper.finish(),
        slope_lo.finish(),
        slope_hi.finish(),
        concave.finish(),
    ];
    if level == AssumptionLevel::A1A2A3 && m < 0.5 {
        entries.push(curvature.finish());
    }
    entries.push(lipschitz.finish());
    InvariantReport { entries }
}

/// Fraction of `m` used as the slope-jump threshold for kink detection.
pub const SHOCK_THRESHOLD_FACTOR: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ShockSeries {
    pub t: Vec<f64>,
    /// `min_i x_i D²F_i`.
    pub min_curvature: Vec<f64>,
    /// `max_i |D⁺F_i − D⁻F_i|`.
    pub max_jump: Vec<f64>,
}

impl ShockSeries {
    /// First time the jump series exceeds `threshold`, interpolated
    /// linearly between the bracketing samples.
    pub fn first_exceedance(&self, threshold: f64) -> Option<f64> {
        let k = self.max_jump.iter().position(|&j| j > threshold)?;
        if k == 0 {
            return Some(self.t[0]);
        }
        let (j0, j1) = (self.max_jump[k - 1], self.max_jump[k]);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        Some(t0 + (t1 - t0) * (threshold - j0) / (j1 - j0))
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(
            out,
            &["t", "min_curvature", "max_jump"],
            (0..self.t.len()).map(|k| vec![self.t[k], self.min_curvature[k], self.max_jump[k]]),
        )
    }
}

pub fn shock_indicator(traj: &Trajectory) -> ShockSeries {
    let grid = traj.grid;
    let dx = grid.dx();
    let mut series = ShockSeries {
        t: Vec::with_capacity(traj.states.len()),
        min_curvature: Vec::with_capacity(traj.states.len()),
        max_jump: Vec::with_capacity(traj.states.len()),
    };
    for s in &traj.states {
        let f = &s.values;
        let mut curv = f64::INFINITY;
        let mut jump = 0.0f64;
        for i in 1..grid.len() - 1 {
            let d2 = f[i + 1] - 2.0 * f[i] + f[i - 1];
            curv = curv.min(grid.x(i) * d2 / (dx * dx));
            jump = jump.max(d2.abs() / dx);
        }
        series.t.push(s.t);
        series.min_curvature.push(curv);
        series.max_jump.push(jump);
    }
    series
}

/// Kink time of `traj`: first exceedance of `SHOCK_THRESHOLD_FACTOR · m`.
pub fn shock_time(traj: &Trajectory) -> Option<f64> {
    shock_indicator(traj).first_exceedance(SHOCK_THRESHOLD_FACTOR * traj.config.m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongtimeReport {
    pub t: Vec<f64>,
    /// `g(t) = sup_{x ≤ R} |F(x, t) − m x|`.
    pub gap: Vec<f64>,
    /// Largest shortfall below `min{¼ m(1−m) x, ¼ m(1−m) t} − tol`.
    pub floor_violation: f64,
    pub floor_pass: bool,
}

impl LongtimeReport {
    pub fn gap_at(&self, t: f64) -> Option<f64> {
        let k = self.t.iter().position(|&s| (s - t).abs() <= 1e-9 * t.max(1.0))?;
        Some(self.gap[k])
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(out, &["t", "gap"], self.t.iter().zip(&self.gap).map(|(t, g)| vec![*t, *g]))
    }
}

pub fn longtime_gap(traj: &Trajectory, m: f64, window: f64) -> Result<LongtimeReport> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "long-time gap needs 0 < m <= 1, got {m}"
        )));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidParameter(format!("window must be positive, got {window}")));
    }
    let grid = traj.grid;
    let tol = traj.config.tolerance(&grid);
    let c = 0.25 * m * (1.0 - m);
    let mut report = LongtimeReport {
        t: Vec::new(),
        gap: Vec::new(),
        floor_violation: 0.0,
        floor_pass: true,
    };
    for s in &traj.states {
        let mut g = 0.0f64;
        for i in 0..grid.len() {
            let x = grid.x(i);
            if x > window + 1e-12 {
                break;
            }
            g = g.max((s.values[i] - m * x).abs());
            let floor = (c * x).min(c * s.t);
            report.floor_violation = report.floor_violation.max(floor - s.values[i]);
        }
        report.t.push(s.t);
        report.gap.push(g);
    }
    report.floor_pass = report.floor_violation <= tol;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub discrepancy: f64,
    pub x: f64,
    pub t: f64,
    pub hj_dx: f64,
    /// Size nodes of the kinetic grid, or paths of the characteristic family.
    pub other_resolution: usize,
}

/// Sup over `x ≤ window` and the common output times of
/// `|F_hj − transform(kinetic)|`. Refuses initial data that differ by more
/// than the solver tolerance.
pub fn compare_with_kinetic(hj: &Trajectory, kinetic: &KineticTrajectory, window: f64) -> Result<Comparison> {
    let grid = hj.grid;
    let tol = hj.config.tolerance(&grid);
    let nodes: Vec<usize> = (0..grid.len()).take_while(|&i| grid.x(i) <= window + 1e-12).collect();
    let initial = &kinetic.states[0].measure;
    let sup0 = nodes
        .iter()
        .map(|&i| (hj.states[0].values[i] - transform(initial, grid.x(i))).abs())
        .fold(0.0, f64::max);
    if sup0 > tol {
        return Err(Error::IncompatibleInitialData { sup: sup0, tol });
    }
    let mut out = Comparison {
        discrepancy: 0.0,
        x: 0.0,
        t: 0.0,
        hj_dx: grid.dx(),
        other_resolution: initial.grid().len(),
    };
    let mut matched = 0;
    for s in &hj.states {
        let Some(k) = kinetic
            .states
            .iter()
            .find(|k| (k.t - s.t).abs() <= 1e-12 * s.t.max(1.0))
        else {
            continue;
        };
        matched += 1;
        for &i in &nodes {
            let x = grid.x(i);
            let d = (s.values[i] - transform(&k.measure, x)).abs();
            if d > out.discrepancy {
                out = Comparison {
                    discrepancy: d,
                    x,
                    t: s.t,
                    ..out
                };
            }
        }
    }
    if matched == 0 {
        return Err(Error::InvalidParameter("trajectories share no output time".into()));
    }
    Ok(out)
}

/// Sup over grid nodes in `[lo, hi]` of `|F_hj − F_char|` at the time of
/// `state`.
pub fn compare_with_characteristics(state: &HjState, paths: &[CharPath], lo: f64, hi: f64) -> Result<Comparison> {
    let grid = state.grid;
    let idx: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.x(i) >= lo - 1e-12 && grid.x(i) <= hi + 1e-12)
        .collect();
    let xs: Vec<f64> = idx.iter().map(|&i| grid.x(i)).collect();
    let f = reconstruct_f(paths, state.t, &xs)?;
    let mut out = Comparison {
        discrepancy: 0.0,
        x: lo,
        t: state.t,
        hj_dx: grid.dx(),
        other_resolution: paths.len(),
    };
    for ((&i, &x), v) in idx.iter().zip(&xs).zip(f) {
        let d = (state.values[i] - v).abs();
        if d > out.discrepancy {
            out.discrepancy = d;
            out.x = x;
        }
    }
    Ok(out)
}
