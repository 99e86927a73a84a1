//! Characteristics of the singular HJ equation.
//!
//! Along a classical solution the triple `(X, P, Z) = (x, F_x, F)` solves
//!
//! ```text
//! X' = P − (m + ½)
//! P' = Z/X² − P/X
//! Z' = P²/2 − Z/X + m(1 − m)/2
//! ```
//!
//! Paths are integrated with classic RK4 and evaluated between samples with
//! cubic Hermite interpolation (derivatives from the right-hand side). A
//! family of paths from ordered starting points is classical as long as the
//! ordering of `X` persists and paths reach `x = 0` with values compatible
//! with `F(0, t) = 0`; the first violation of either marks a shock.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharState {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    HitZero,
    Crossed,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ReachedEnd => "reached_t_end",
            Termination::HitZero => "hit_zero",
            Termination::Crossed => "crossed",
        })
    }
}

/// Right-hand side `(X', P', Z')`.
pub fn char_rhs(s: &CharState, m: f64) -> Result<(f64, f64, f64)> {
    if !(s.x > 0.0) {
        return Err(Error::Singular(s.x));
    }
    let inv = 1.0 / s.x;
    Ok((
        s.p - (m + 0.5),
        (s.z * inv - s.p) * inv,
        0.5 * s.p * s.p - s.z * inv + 0.5 * m * (1.0 - m),
    ))
}

fn rk4(s: &CharState, m: f64, h: f64) -> Result<CharState> {
    let shift = |k: (f64, f64, f64), c: f64| CharState {
        t: s.t + c * h,
        x: s.x + c * h * k.0,
        p: s.p + c * h * k.1,
        z: s.z + c * h * k.2,
    };
    let k1 = char_rhs(s, m)?;
    let k2 = char_rhs(&shift(k1, 0.5), m)?;
    let k3 = char_rhs(&shift(k2, 0.5), m)?;
    let k4 = char_rhs(&shift(k3, 1.0), m)?;
    let comb = |a: f64, b: f64, c: f64, d: f64| h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
    Ok(CharState {
        t: s.t + h,
        x: s.x + comb(k1.0, k2.0, k3.0, k4.0),
        p: s.p + comb(k1.1, k2.1, k3.1, k4.1),
        z: s.z + comb(k1.2, k2.2, k3.2, k4.2),
    })
}

#[derive(Debug, Clone)]
pub struct CharPath {
    pub x0: f64,
    pub m: f64,
    pub dt: f64,
    pub samples: Vec<CharState>,
    pub termination: Termination,
}

/// Default step `10⁻³ · min(1, x0)`.
pub fn default_dt(x0: f64) -> f64 {
    1e-3 * x0.min(1.0)
}

/// Integrates the path from `x0` with `P(0) = F0'(x0)`, `Z(0) = F0(x0)`.
/// Stops at `t_end` or once `X ≤ dt`; a step whose stages would leave
/// `X > 0` is bisected.
pub fn integrate_path(
    x0: f64,
    f0: &dyn Fn(f64) -> f64,
    df0: &dyn Fn(f64) -> f64,
    m: f64,
    t_end: f64,
    dt: Option<f64>,
) -> Result<CharPath> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(Error::InvalidParameter(format!("x0 must be positive, got {x0}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
    }
    let dt = dt.unwrap_or_else(|| default_dt(x0));
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let mut s = CharState {
        t: 0.0,
        x: x0,
        p: df0(x0),
        z: f0(x0),
    };
    let mut samples = vec![s];
    let mut termination = Termination::ReachedEnd;
    let mut k = 0usize;
    while s.t < t_end {
        // Recompute from the step count so sample times stay on the grid.
        let mut h = ((k + 1) as f64 * dt).min(t_end) - s.t;
        let next = loop {
            match rk4(&s, m, h) {
                Ok(n) if n.x > 0.0 => break Some(n),
                _ => {
                    h *= 0.5;
                    if h < 1e-15 * dt {
                        break None;
                    }
                }
            }
        };
        let Some(next) = next else {
            termination = Termination::HitZero;
            break;
        };
        s = next;
        k += 1;
        samples.push(s);
        if s.x <= dt {
            termination = Termination::HitZero;
            break;
        }
    }
    Ok(CharPath {
        x0,
        m,
        dt,
        samples,
        termination,
    })
}

impl CharPath {
    pub fn t_last(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn is_alive(&self, t: f64) -> bool {
        t >= 0.0 && t <= self.t_last()
    }

    /// Cubic Hermite interpolation of the path at `t`, `None` outside the
    /// sampled range.
    pub fn state_at(&self, t: f64) -> Option<CharState> {
        if !self.is_alive(t) {
            return None;
        }
        let n = self.samples.len();
        if n == 1 {
            return Some(self.samples[0]);
        }
        let mut i = ((t / self.dt) as usize).min(n - 2);
        while i > 0 && self.samples[i].t > t {
            i -= 1;
        }
        while i + 2 < n && self.samples[i + 1].t < t {
            i += 1;
        }
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        let h = b.t - a.t;
        if h <= 0.0 {
            return Some(a);
        }
        let da = char_rhs(&a, self.m).ok()?;
        let db = char_rhs(&b, self.m).ok()?;
        let u = ((t - a.t) / h).clamp(0.0, 1.0);
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let herm = |ya: f64, yb: f64, ma: f64, mb: f64| h00 * ya + h * h10 * ma + h01 * yb + h * h11 * mb;
        Some(CharState {
            t,
            x: herm(a.x, b.x, da.0, db.0),
            p: herm(a.p, b.p, da.1, db.1),
            z: herm(a.z, b.z, da.2, db.2),
        })
    }

    /// `X'` at every sample.
    pub fn velocities(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter_map(|s| char_rhs(s, self.m).ok().map(|d| d.0))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(
            out,
            &["t", "X", "P", "Z"],
            self.samples.iter().map(|s| vec![s.t, s.x, s.p, s.z]),
        )
    }
}

/// Paths from an increasing list of starting points, integrated in parallel.
pub fn integrate_family(
    x0s: &[f64],
    f0: &(dyn Fn(f64) -> f64 + Sync),
    df0: &(dyn Fn(f64) -> f64 + Sync),
    m: f64,
    t_end: f64,
    dt: Option<f64>,
) -> Result<Vec<CharPath>> {
    if x0s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("starting points must be strictly increasing".into()));
    }
    x0s.par_iter()
        .map(|&x0| integrate_path(x0, f0, df0, m, t_end, dt))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// Neighbouring paths `left < right` swapped order.
    Interior { left: usize, right: usize },
    /// Path `path` reached `x = 0` carrying a value incompatible with
    /// `F(0, t) = 0`.
    Boundary { path: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub x: f64,
    pub kind: CrossingKind,
}

/// Time step of the common grid on which ordering is checked.
pub const CROSSING_CHECK_DT: f64 = 1e-3;

/// Earliest loss of classical regularity in the family:
///
/// * two neighbouring paths swap order, `X(x0ᵃ, t) − X(x0ᵇ, t) > tol`
///   for `x0ᵃ < x0ᵇ`, with `tol` one hundredth of the smallest starting
///   spacing; the time is the linear interpolation of the zero of the gap;
/// * a path reaches `x = 0` with `Z < −m·tol`. The boundary `x = 0` acts
///   as the leftmost member of the family with value `0`, so such a path
///   carries a value the Dirichlet condition cannot match. The time is the
///   arrival time interpolated at the sign change of the arrival value.
pub fn detect_crossing(paths: &[CharPath]) -> Option<Crossing> {
    if paths.len() < 2 {
        return None;
    }
    let spacing = paths
        .windows(2)
        .map(|w| w[1].x0 - w[0].x0)
        .fold(f64::INFINITY, f64::min);
    let tol = spacing / 100.0;
    let interior = detect_interior(paths, tol);
    let boundary = detect_boundary(paths, tol);
    match (interior, boundary) {
        (Some(a), Some(b)) => Some(if b.t < a.t { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn detect_boundary(paths: &[CharPath], tol: f64) -> Option<Crossing> {
    let arrival = |p: &CharPath| -> Option<(f64, f64)> {
        (p.termination != Termination::ReachedEnd).then(|| {
            let s = p.samples.last().expect("path has samples");
            (s.t, s.z)
        })
    };
    let mut best: Option<Crossing> = None;
    for (i, p) in paths.iter().enumerate() {
        let Some((t, z)) = arrival(p) else { continue };
        if z >= -p.m * tol {
            continue;
        }
        let tc = match i.checked_sub(1).and_then(|j| arrival(&paths[j])) {
            Some((t0, z0)) if z0 >= 0.0 => t0 + (t - t0) * z0 / (z0 - z),
            _ => t,
        };
        if best.map_or(true, |b| tc < b.t) {
            best = Some(Crossing {
                t: tc,
                x: 0.0,
                kind: CrossingKind::Boundary { path: i },
            });
        }
    }
    best
}

fn detect_interior(paths: &[CharPath], tol: f64) -> Option<Crossing> {
    let t_max = paths.iter().map(CharPath::t_last).fold(0.0, f64::max);
    let steps = (t_max / CROSSING_CHECK_DT).ceil() as usize;
    let time = |k: usize| (k as f64 * CROSSING_CHECK_DT).min(t_max);

    let gap = |a: usize, t: f64| -> Option<f64> {
        let sa = paths[a].state_at(t)?;
        let sb = paths[a + 1].state_at(t)?;
        Some(sb.x - sa.x)
    };

    let mut found: Option<Crossing> = None;
    'outer: for k in 0..=steps {
        let t = time(k);
        for a in 0..paths.len() - 1 {
            match gap(a, t) {
                Some(g) if g < -tol => {
                    // Walk back to the last nonnegative gap and interpolate.
                    let mut j = k;
                    let mut g_hi = g;
                    while j > 0 {
                        let g_lo = gap(a, time(j - 1)).unwrap_or(0.0);
                        if g_lo >= 0.0 {
                            let (t0, t1) = (time(j - 1), time(j));
                            let tc = t0 + (t1 - t0) * g_lo / (g_lo - g_hi);
                            let x = paths[a].state_at(tc).map_or(f64::NAN, |s| s.x);
                            found = Some(Crossing {
                                t: tc,
                                x,
                                kind: CrossingKind::Interior { left: a, right: a + 1 },
                            });
                            break;
                        }
                        g_hi = g_lo;
                        j -= 1;
                    }
                    if found.is_none() {
                        found = Some(Crossing {
                            t: 0.0,
                            x: paths[a].x0,
                            kind: CrossingKind::Interior { left: a, right: a + 1 },
                        });
                    }
                    break 'outer;
                }
                _ => {}
            }
        }
    }
    found
}

/// Marks the paths involved in `crossing` as crossed.
pub fn mark_crossing(paths: &mut [CharPath], crossing: &Crossing) {
    match crossing.kind {
        CrossingKind::Interior { left, right } => {
            paths[left].termination = Termination::Crossed;
            paths[right].termination = Termination::Crossed;
        }
        CrossingKind::Boundary { path } => paths[path].termination = Termination::Crossed,
    }
}

/// `F(x, t) = Z(X⁻¹(x, t), t)`: Hermite interpolation of the points
/// `(X, Z)` with slopes `P`, over the paths alive at `t`.
pub fn reconstruct_f(paths: &[CharPath], t: f64, x_query: &[f64]) -> Result<Vec<f64>> {
    if let Some(c) = detect_crossing(paths) {
        if c.t <= t {
            return Err(Error::Crossing(c.t));
        }
    }
    let alive: Vec<CharState> = paths.iter().filter_map(|p| p.state_at(t)).collect();
    if alive.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: alive.len() });
    }
    if alive.windows(2).any(|w| w[1].x <= w[0].x) {
        return Err(Error::Crossing(t));
    }
    let (lo, hi) = (alive[0].x, alive[alive.len() - 1].x);
    x_query
        .iter()
        .map(|&x| {
            if !(x >= lo && x <= hi) {
                return Err(Error::OutOfRange { x, lo, hi });
            }
            let i = alive.partition_point(|s| s.x <= x).clamp(1, alive.len() - 1) - 1;
            let (a, b) = (alive[i], alive[i + 1]);
            let h = b.x - a.x;
            let u = (x - a.x) / h;
            let u2 = u * u;
            let u3 = u2 * u;
            Ok((2.0 * u3 - 3.0 * u2 + 1.0) * a.z
                + h * (u3 - 2.0 * u2 + u) * a.p
                + (-2.0 * u3 + 3.0 * u2) * b.z
                + h * (u3 - u2) * b.p)
        })
        .collect()
}

/// Writes one `t,X,P,Z` file per path plus `manifest.csv`
/// (`index,x0,termination,t_last`).
pub fn save_family(paths: &[CharPath], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::from("index,x0,termination,t_last\n");
    for (i, p) in paths.iter().enumerate() {
        let file = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("path_{i:04}.csv")))?);
        p.write_csv(file)?;
        manifest.push_str(&format!(
            "{i},{},{},{}\n",
            io::fmt_f64(p.x0),
            p.termination,
            io::fmt_f64(p.t_last())
        ));
    }
    std::fs::write(dir.join("manifest.csv"), manifest)?;
    Ok(())
}
