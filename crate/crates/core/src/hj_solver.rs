//! Explicit monotone finite-difference solver for
//!
//! ```text
//! F_t + ½ (F_x − m)(F_x − m − 1) + F / φ(x) − m = ε a(x) F_xx,   F(0, t) = 0,
//! ```
//!
//! on a truncated half-line `[0, L]`. Two regularizations of the singular
//! term `F / x` are provided:
//!
//! * cutoff: `φ = φ_n(x) = max{1/n, x}`, `ε = 0`;
//! * viscous: `φ(x) = x` with the degenerate diffusion `ε a(x) F_xx`, where
//!   `a(x) = x` on `[0, 1]` and `a(x) = 2` on `[3, ∞)`. With `ε = 0` this is
//!   the unregularized singular equation on the grid.
//!
//! The convective part uses the Godunov numerical Hamiltonian of the convex
//! `H(p) = ½ (p − m)(p − m − 1)` and time stepping is forward Euler. Under
//! the step bound returned by [`stability_limit`] every nodal update is
//! nondecreasing in each stencil value, which yields the discrete comparison
//! principle checked in the tests.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// Uniform nodes `x_i = i dx` on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjGrid {
    x_max: f64,
    n: usize,
    dx: f64,
}

impl HjGrid {
    pub const MIN_NODES: usize = 16;

    pub fn new(x_max: f64, n: usize) -> Result<Self> {
        if n < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {} nodes, got {n}",
                Self::MIN_NODES
            )));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!("domain length must be positive, got {x_max}")));
        }
        Ok(Self {
            x_max,
            n,
            dx: x_max / (n - 1) as f64,
        })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Cutoff { n: u32 },
    Viscous { epsilon: f64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Cutoff { .. } => "cutoff",
            Scheme::Viscous { .. } => "viscous",
        }
    }

    /// Unregularized singular scheme: viscous with `ε = 0`.
    pub fn singular() -> Self {
        Scheme::Viscous { epsilon: 0.0 }
    }

    fn epsilon(&self) -> f64 {
        match *self {
            Scheme::Cutoff { .. } => 0.0,
            Scheme::Viscous { epsilon } => epsilon,
        }
    }

    /// Coefficient `1 / φ(x)` of the zeroth-order term.
    fn zeroth_order_coefficient(&self, x: f64) -> f64 {
        match *self {
            Scheme::Cutoff { n } => 1.0 / x.max(1.0 / n as f64),
            Scheme::Viscous { .. } => 1.0 / x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RightBoundary {
    /// `F_{N-1} = 2 F_{N-2} − F_{N-3}`.
    LinearExtrapolation,
    /// `F_{N-1} = F_{N-2} + σ dx`.
    FixedSlope(f64),
}

impl fmt::Display for RightBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RightBoundary::LinearExtrapolation => write!(f, "linear_extrapolation"),
            RightBoundary::FixedSlope(s) => write!(f, "fixed_slope({s})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub m: f64,
    pub scheme: Scheme,
    pub cfl: f64,
    pub right_bc: RightBoundary,
    pub t_end: f64,
    /// Fixed step; `None` recomputes [`cfl_dt`] every step.
    pub dt: Option<f64>,
}

impl SolverConfig {
    pub const DEFAULT_CFL: f64 = 0.9;
    pub const MAX_CFL: f64 = 0.9;

    pub fn new(m: f64, scheme: Scheme, t_end: f64) -> Result<Self> {
        let cfg = Self {
            m,
            scheme,
            cfl: Self::DEFAULT_CFL,
            right_bc: RightBoundary::LinearExtrapolation,
            t_end,
            dt: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cfl(mut self, cfl: f64) -> Result<Self> {
        self.cfl = cfl;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = Some(dt);
        self.validate()?;
        Ok(self)
    }

    pub fn with_right_bc(mut self, bc: RightBoundary) -> Self {
        self.right_bc = bc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.m > 0.0) || !self.m.is_finite() {
            return bad(format!("mass must be positive, got {}", self.m));
        }
        match self.scheme {
            Scheme::Cutoff { n } if n < 1 => return bad("cutoff index must be >= 1".into()),
            Scheme::Viscous { epsilon } if !(epsilon >= 0.0) || !epsilon.is_finite() => {
                return bad(format!("viscosity must be >= 0, got {epsilon}"))
            }
            _ => {}
        }
        if !(self.cfl > 0.0 && self.cfl <= Self::MAX_CFL) {
            return bad(format!("cfl must lie in (0, {}], got {}", Self::MAX_CFL, self.cfl));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        Ok(())
    }

    /// Invariant slack `1e-7 (1 + m L)`.
    pub fn tolerance(&self, grid: &HjGrid) -> f64 {
        1e-7 * (1.0 + self.m * grid.x_max())
    }

    /// Extra room above `m x`: `mx + max(1, m)/n` is a supersolution of the
    /// cutoff problem, while `mx` itself solves the viscous one.
    pub fn upper_slack(&self) -> f64 {
        match self.scheme {
            Scheme::Cutoff { n } => self.m.max(1.0) / n as f64,
            Scheme::Viscous { .. } => 0.0,
        }
    }

    pub fn metadata(&self, grid: &HjGrid) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("m", self.m.to_string()),
            ("scheme", self.scheme.name().to_string()),
        ];
        match self.scheme {
            Scheme::Cutoff { n } => v.push(("n", n.to_string())),
            Scheme::Viscous { epsilon } => v.push(("epsilon", epsilon.to_string())),
        }
        v.extend([
            ("L", grid.x_max().to_string()),
            ("N", grid.len().to_string()),
            ("dx", grid.dx().to_string()),
            ("cfl", self.cfl.to_string()),
            ("right_bc", self.right_bc.to_string()),
            ("t_end", self.t_end.to_string()),
        ]);
        if let Some(dt) = self.dt {
            v.push(("dt", dt.to_string()));
        }
        v
    }
}

/// Nodal values of `F(·, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HjState {
    pub grid: HjGrid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl HjState {
    pub fn from_fn(grid: HjGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Self { grid, values, t: 0.0 }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid.x(i)
    }

    /// Forward differences `(F_{i+1} − F_i) / dx`, `N − 1` entries.
    pub fn slopes(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.values.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
    }

    /// Linear interpolation at `x` inside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let dx = self.grid.dx();
        let n = self.grid.len();
        let pos = (x / dx).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

pub fn hamiltonian(p: f64, m: f64) -> f64 {
    0.5 * (p - m) * (p - m - 1.0)
}

/// `H'(p) = p − m − ½`.
pub fn hamiltonian_derivative(p: f64, m: f64) -> f64 {
    p - m - 0.5
}

/// Godunov numerical Hamiltonian: min of `H` over `[p⁻, p⁺]` when
/// `p⁻ ≤ p⁺`, max over `[p⁺, p⁻]` otherwise. The vertex of `H` is `m + ½`.
pub fn godunov_flux(p_minus: f64, p_plus: f64, m: f64) -> f64 {
    let (hl, hr) = (hamiltonian(p_minus, m), hamiltonian(p_plus, m));
    if p_minus <= p_plus {
        let vertex = m + 0.5;
        if p_minus <= vertex && vertex <= p_plus {
            -0.125
        } else {
            hl.min(hr)
        }
    } else {
        hl.max(hr)
    }
}

/// Diffusion profile: `x` on `[0, 1]`, `2` on `[3, ∞)`, and the C² concave
/// bridge `x − (x−1)³/6` on `[1, 2]`, `2 − (3−x)³/6` on `[2, 3]`
/// (so `a'' = −(x−1)` then `−(3−x)`).
pub fn viscosity_profile(x: f64) -> f64 {
    if x <= 1.0 {
        x.max(0.0)
    } else if x <= 2.0 {
        let u = x - 1.0;
        x - u * u * u / 6.0
    } else if x <= 3.0 {
        let u = 3.0 - x;
        2.0 - u * u * u / 6.0
    } else {
        2.0
    }
}

/// Largest step for which the explicit update is monotone in every stencil
/// value. With `reference_slopes`, slopes in `[0, m]` are included in the
/// wave-speed bound so that a fixed step chosen from it remains admissible
/// while the slopes stay in that range.
pub fn stability_limit(state: &HjState, cfg: &SolverConfig, reference_slopes: bool) -> f64 {
    let m = cfg.m;
    let grid = &state.grid;
    let dx = grid.dx();
    let n = grid.len();
    let mut speed = 0.0f64;
    if reference_slopes {
        speed = hamiltonian_derivative(0.0, m)
            .abs()
            .max(hamiltonian_derivative(m, m).abs());
    }
    for p in state.slopes() {
        speed = speed.max(hamiltonian_derivative(p, m).abs());
    }
    let mut zeroth = 0.0f64;
    let mut diffusion = 0.0f64;
    let eps = cfg.scheme.epsilon();
    for i in 1..n - 1 {
        let x = grid.x(i);
        zeroth = zeroth.max(cfg.scheme.zeroth_order_coefficient(x));
        diffusion = diffusion.max(2.0 * eps * viscosity_profile(x) / (dx * dx));
    }
    1.0 / (speed / dx + zeroth + diffusion)
}

/// Step size `cfl · stability_limit`, with reference slopes `[0, m]`.
pub fn cfl_dt(state: &HjState, cfg: &SolverConfig) -> f64 {
    cfg.cfl * stability_limit(state, cfg, true)
}

fn advance(state: &HjState, cfg: &SolverConfig, dt: f64) -> Result<HjState> {
    let limit = stability_limit(state, cfg, false);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let grid = state.grid;
    let n = grid.len();
    let dx = grid.dx();
    let m = cfg.m;
    let eps = cfg.scheme.epsilon();
    let f = &state.values;
    let mut next = vec![0.0; n];
    for i in 1..n - 1 {
        let x = grid.x(i);
        let p_minus = (f[i] - f[i - 1]) / dx;
        let p_plus = (f[i + 1] - f[i]) / dx;
        let mut rate = godunov_flux(p_minus, p_plus, m) + f[i] * cfg.scheme.zeroth_order_coefficient(x) - m;
        if eps > 0.0 {
            rate -= eps * viscosity_profile(x) * (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (dx * dx);
        }
        next[i] = f[i] - dt * rate;
    }
    next[0] = 0.0;
    next[n - 1] = match cfg.right_bc {
        RightBoundary::LinearExtrapolation => 2.0 * next[n - 2] - next[n - 3],
        RightBoundary::FixedSlope(sigma) => next[n - 2] + sigma * dx,
    };
    Ok(HjState {
        grid,
        values: next,
        t: state.t + dt,
    })
}

/// One forward-Euler step of the cutoff scheme.
pub fn step_cutoff(state: &HjState, cfg: &SolverConfig, dt: f64) -> Result<HjState> {
    if !matches!(cfg.scheme, Scheme::Cutoff { .. }) {
        return Err(Error::InvalidParameter("step_cutoff needs a cutoff scheme".into()));
    }
    advance(state, cfg, dt)
}

/// One forward-Euler step of the viscous scheme. The Dirichlet node keeps
/// `F_0 = 0`, which is the limit of `F/x → F_x(0)` times `x = 0`.
pub fn step_viscous(state: &HjState, cfg: &SolverConfig, dt: f64) -> Result<HjState> {
    if !matches!(cfg.scheme, Scheme::Viscous { .. }) {
        return Err(Error::InvalidParameter("step_viscous needs a viscous scheme".into()));
    }
    advance(state, cfg, dt)
}

pub fn step(state: &HjState, cfg: &SolverConfig, dt: f64) -> Result<HjState> {
    advance(state, cfg, dt)
}

/// Checks `F_0 = 0`, finiteness, `F ≤ m x + slack + tol` and, for `m ≤ 1`
/// (where `0` is a subsolution), `F ≥ −tol`.
pub fn check_state(state: &HjState, cfg: &SolverConfig) -> Result<()> {
    let tol = cfg.tolerance(&state.grid);
    let slack = cfg.upper_slack();
    for (i, &v) in state.values.iter().enumerate() {
        let x = state.x(i);
        let breach = |name, bound| Error::InvariantBreach {
            name,
            x,
            t: state.t,
            value: v,
            bound,
        };
        if !v.is_finite() {
            return Err(breach("finite", 0.0));
        }
        if i == 0 && v != 0.0 {
            return Err(breach("boundary_zero", 0.0));
        }
        let upper = cfg.m * x + slack + tol;
        if v > upper {
            return Err(breach("upper_bound", upper));
        }
        if cfg.m <= 1.0 && v < -tol {
            return Err(breach("lower_bound", -tol));
        }
    }
    Ok(())
}

/// States at `t = 0` and at each requested output time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub grid: HjGrid,
    pub states: Vec<HjState>,
}

impl Trajectory {
    pub fn at(&self, t: f64) -> Option<&HjState> {
        self.states
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn last(&self) -> &HjState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows = self.states.iter().flat_map(|s| {
            s.values
                .iter()
                .enumerate()
                .map(move |(i, v)| vec![s.t, s.x(i), *v])
        });
        io::write_csv(out, &["t", "x", "F"], rows)
    }

    pub fn save(&self, csv: &Path, sidecar: &Path, extra: &[(&str, String)]) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(csv)?);
        self.write_csv(file)?;
        let mut meta = self.config.metadata(&self.grid);
        meta.extend(extra.iter().cloned());
        std::fs::write(sidecar, io::sidecar(&meta))?;
        Ok(())
    }
}

/// Integrates from `F0` to each of `output_times` (or to `t_end` when the
/// list is empty). Every intermediate state is checked with [`check_state`].
pub fn solve(
    f0: impl Fn(f64) -> f64,
    grid: HjGrid,
    cfg: &SolverConfig,
    output_times: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = HjState::from_fn(grid, f0);
    let tol = cfg.tolerance(&grid);
    if state.values[0].abs() > tol {
        return Err(Error::InvalidParameter(format!(
            "initial data must vanish at x = 0, got {}",
            state.values[0]
        )));
    }
    state.values[0] = 0.0;
    for (i, &v) in state.values.iter().enumerate() {
        let x = grid.x(i);
        if !(v >= -tol && v <= cfg.m * x + tol) {
            return Err(Error::InvalidParameter(format!(
                "initial data must satisfy 0 <= F0 <= m x; F0({x}) = {v}"
            )));
        }
    }

    let mut targets: Vec<f64> = if output_times.is_empty() {
        vec![cfg.t_end]
    } else {
        output_times.to_vec()
    };
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    if let Some(&t) = targets.iter().find(|&&t| t < 0.0 || t > cfg.t_end * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "output time {t} outside [0, {}]",
            cfg.t_end
        )));
    }

    let mut states = vec![state.clone()];
    for target in targets {
        let close = 1e-13 * target.max(1.0);
        while state.t < target - close {
            let mut dt = cfg.dt.unwrap_or_else(|| cfl_dt(&state, cfg));
            if state.t + dt >= target - close {
                dt = target - state.t;
            }
            state = advance(&state, cfg, dt)?;
            check_state(&state, cfg)?;
        }
        state.t = target;
        if target > 0.0 || states.is_empty() {
            states.push(state.clone());
        }
    }
    Ok(Trajectory {
        config: *cfg,
        grid,
        states,
    })
}
