//! Kinetic coagulation-fragmentation equation with multiplicative
//! coagulation `a(s, ŝ) = s ŝ` and constant fragmentation `b ≡ 1`, on a
//! truncated size grid.
//!
//! Coagulation: every unordered pair `(j, k)` merges at rate
//! `s_j s_k w_j w_k` (halved for `j = k`); the merged size is split between
//! the two bracketing nodes so that count and mass are both exact. Pairs
//! beyond the top node either leave the system (`mass_lost`) or, in
//! redistribution mode, are put on the top node with their mass.
//!
//! Fragmentation: a cluster of size `s_j` splits at rate `½ s_j`, producing
//! fragments with density `1` on `(0, s_j)`. That density is projected onto
//! hat functions on `[s_0, s_j]`; fragments below `s_0` go to node `0`
//! with their mass. Both choices conserve the first moment exactly.
//!
//! Time stepping is forward Euler under the positivity condition
//! `dt · s_i (m₁ + ½) ≤ 1`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io;
use crate::measures::{DiscreteMeasure, SizeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// Merged clusters above the top node leave; their mass is tallied.
    #[default]
    Outflux,
    /// Merged clusters above the top node are placed on it with their mass.
    Redistribute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub measure: DiscreteMeasure,
    pub t: f64,
    pub mass_lost: f64,
}

impl KineticState {
    pub fn new(measure: DiscreteMeasure) -> Self {
        Self {
            measure,
            t: 0.0,
            mass_lost: 0.0,
        }
    }
}

/// Rates per node plus the mass flux leaving through the top of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub rates: Vec<f64>,
    pub mass_outflux: f64,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    j: u32,
    k: u32,
    /// Lower bracketing node, or `u32::MAX` above the grid.
    lo: u32,
    /// Share of the merged cluster placed on `lo`.
    theta: f64,
}

/// Precomputed pair routing and fragment weights for one grid.
#[derive(Debug, Clone)]
pub struct KineticModel {
    grid: Arc<SizeGrid>,
    truncation: Truncation,
    pairs: Vec<Pair>,
    /// Fragment weight at node `i` from each parent strictly above it.
    frag_below: Vec<f64>,
    /// Fragment weight at node `i` from a parent sitting on `i`.
    frag_self: Vec<f64>,
}

impl KineticModel {
    pub fn new(grid: Arc<SizeGrid>, truncation: Truncation) -> Result<Self> {
        let s = grid.nodes();
        let n = s.len();
        if n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: n });
        }
        let top = s[n - 1];
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for k in j..n {
                let size = s[j] + s[k];
                let (lo, theta) = if size > top * (1.0 + 1e-12) {
                    (u32::MAX, 0.0)
                } else {
                    let l = grid.bracket(size.min(top)).expect("merged size lies above s_0");
                    let theta = ((s[l + 1] - size) / (s[l + 1] - s[l])).clamp(0.0, 1.0);
                    (l as u32, theta)
                };
                pairs.push(Pair {
                    j: j as u32,
                    k: k as u32,
                    lo,
                    theta,
                });
            }
        }
        let mut frag_below = vec![0.0; n];
        let mut frag_self = vec![0.0; n];
        frag_below[0] = 0.5 * s[1];
        frag_self[0] = 0.5 * s[0];
        for i in 1..n {
            frag_below[i] = if i + 1 < n { 0.5 * (s[i + 1] - s[i - 1]) } else { 0.0 };
            frag_self[i] = 0.5 * (s[i] - s[i - 1]);
        }
        Ok(Self {
            grid,
            truncation,
            pairs,
            frag_below,
            frag_self,
        })
    }

    pub fn grid(&self) -> &SizeGrid {
        &self.grid
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    fn check_grid(&self, mu: &DiscreteMeasure) -> Result<()> {
        if mu.sizes() != self.grid.nodes() {
            return Err(Error::InvalidGrid("measure lives on a different grid".into()));
        }
        Ok(())
    }

    pub fn coagulation_rhs(&self, mu: &DiscreteMeasure) -> Result<Rates> {
        self.check_grid(mu)?;
        let s = self.grid.nodes();
        let w = mu.weights();
        let n = s.len();
        let m1 = mu.moment(1);
        let mut rates: Vec<f64> = (0..n).map(|i| -w[i] * s[i] * m1).collect();
        let mut outflux = 0.0;
        for p in &self.pairs {
            let (j, k) = (p.j as usize, p.k as usize);
            let mut r = s[j] * s[k] * w[j] * w[k];
            if r == 0.0 {
                continue;
            }
            if j == k {
                r *= 0.5;
            }
            if p.lo == u32::MAX {
                let size = s[j] + s[k];
                match self.truncation {
                    Truncation::Outflux => outflux += r * size,
                    Truncation::Redistribute => rates[n - 1] += r * size / s[n - 1],
                }
            } else {
                let l = p.lo as usize;
                rates[l] += r * p.theta;
                rates[l + 1] += r * (1.0 - p.theta);
            }
        }
        Ok(Rates {
            rates,
            mass_outflux: outflux,
        })
    }

    pub fn fragmentation_rhs(&self, mu: &DiscreteMeasure) -> Result<Rates> {
        self.check_grid(mu)?;
        let s = self.grid.nodes();
        let w = mu.weights();
        let n = s.len();
        let mut rates = vec![0.0; n];
        let mut above = 0.0;
        for i in (0..n).rev() {
            rates[i] = -0.5 * s[i] * w[i] + self.frag_below[i] * above + self.frag_self[i] * w[i];
            above += w[i];
        }
        Ok(Rates {
            rates,
            mass_outflux: 0.0,
        })
    }

    /// Largest step allowed by the positivity condition.
    pub fn positivity_limit(&self, mu: &DiscreteMeasure) -> f64 {
        1.0 / (self.grid.max() * (mu.moment(1) + 0.5))
    }

    pub fn step(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        let limit = self.positivity_limit(&state.measure);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        let coag = self.coagulation_rhs(&state.measure)?;
        let frag = self.fragmentation_rhs(&state.measure)?;
        let weights: Vec<f64> = state
            .measure
            .weights()
            .iter()
            .zip(coag.rates.iter().zip(&frag.rates))
            .map(|(w, (c, f))| (w + dt * (c + f)).max(0.0))
            .collect();
        Ok(KineticState {
            measure: DiscreteMeasure::new(Arc::clone(&self.grid), weights)?,
            t: state.t + dt,
            mass_lost: state.mass_lost + dt * coag.mass_outflux,
        })
    }

    /// Integrates to every output time (and `t_end`), recording the moment
    /// table at each of them.
    pub fn run(&self, c0: DiscreteMeasure, t_end: f64, output_times: &[f64], cfl: f64) -> Result<KineticTrajectory> {
        self.check_grid(&c0)?;
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        let mut targets: Vec<f64> = output_times.iter().copied().filter(|&t| t > 0.0).collect();
        if let Some(&t) = targets.iter().find(|&&t| t > t_end * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("output time {t} beyond t_end {t_end}")));
        }
        targets.push(t_end);
        targets.sort_by(f64::total_cmp);
        targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

        let m1_0 = c0.moment(1);
        let gel_threshold = GEL_FRACTION * m1_0;
        let mut state = KineticState::new(c0);
        let mut gel_time = None;
        let mut states = vec![state.clone()];
        let mut moments = vec![MomentRow::of(&state, false)];
        for target in targets {
            if target == 0.0 {
                continue;
            }
            let close = 1e-13 * target.max(1.0);
            while state.t < target - close {
                let mut dt = cfl * self.positivity_limit(&state.measure);
                if state.t + dt >= target - close {
                    dt = target - state.t;
                }
                state = self.step(&state, dt)?;
                if gel_time.is_none() && m1_0 > 0.0 && state.mass_lost > gel_threshold {
                    gel_time = Some(state.t);
                }
            }
            state.t = target;
            moments.push(MomentRow::of(&state, gel_time.is_some()));
            states.push(state.clone());
        }
        Ok(KineticTrajectory {
            states,
            moments,
            gel_time,
        })
    }
}

/// Gelation is flagged once `mass_lost > GEL_FRACTION · m₁(0)`.
pub const GEL_FRACTION: f64 = 1e-3;
/// Safety factor applied to the positivity limit by default.
pub const DEFAULT_CFL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub t: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub mass_lost: f64,
    pub gel_flag: bool,
}

impl MomentRow {
    fn of(state: &KineticState, gel_flag: bool) -> Self {
        Self {
            t: state.t,
            m0: state.measure.moment(0),
            m1: state.measure.moment(1),
            m2: state.measure.moment(2),
            mass_lost: state.mass_lost,
            gel_flag,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KineticTrajectory {
    pub states: Vec<KineticState>,
    pub moments: Vec<MomentRow>,
    pub gel_time: Option<f64>,
}

impl KineticTrajectory {
    pub fn last(&self) -> &KineticState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn write_moments<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(
            out,
            &["t", "m0", "m1", "m2", "mass_lost", "gel_flag"],
            self.moments.iter().map(|r| {
                vec![r.t, r.m0, r.m1, r.m2, r.mass_lost, if r.gel_flag { 1.0 } else { 0.0 }]
            }),
        )
    }
}

/// Convenience wrappers building a [`KineticModel`] with outflux truncation.
pub fn coagulation_rhs(state: &KineticState) -> Result<Rates> {
    KineticModel::new(state.measure.shared_grid(), Truncation::Outflux)?.coagulation_rhs(&state.measure)
}

pub fn fragmentation_rhs(state: &KineticState) -> Result<Rates> {
    KineticModel::new(state.measure.shared_grid(), Truncation::Outflux)?.fragmentation_rhs(&state.measure)
}

pub fn run(c0: DiscreteMeasure, t_end: f64, output_times: &[f64]) -> Result<KineticTrajectory> {
    KineticModel::new(c0.shared_grid(), Truncation::Outflux)?.run(c0, t_end, output_times, DEFAULT_CFL)
}
