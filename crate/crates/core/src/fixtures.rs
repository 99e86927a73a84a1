//! Named initial data: `linear(m)`, `exp(m,b)` and `point(s0,w)`, each
//! available both as a closed-form Bernstein function and as a measure.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, MeasureKind, SizeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fixture {
    /// `F0 = m x`, the exact stationary solution.
    Linear { m: f64 },
    /// Transform of `m b^2 e^{-b s}`: `F0 = m b x / (b + x)`.
    Exp { m: f64, b: f64 },
    /// Transform of `w delta_{s0}`: `F0 = w (1 - e^{-s0 x})`.
    Point { s0: f64, w: f64 },
}

impl Fixture {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Fixture::Linear { m } => m * x,
            Fixture::Exp { m, b } => m * b * x / (b + x),
            Fixture::Point { s0, w } => -w * (-s0 * x).exp_m1(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Fixture::Linear { m } => m,
            Fixture::Exp { m, b } => m * b * b / ((b + x) * (b + x)),
            Fixture::Point { s0, w } => w * s0 * (-s0 * x).exp(),
        }
    }

    /// First moment of the underlying distribution, i.e. `F0'(0)`.
    pub fn mass(&self) -> f64 {
        self.derivative(0.0)
    }

    /// The size distribution behind the fixture; `linear` has none (its
    /// measure is concentrated at size zero).
    pub fn measure(&self, grid: Arc<SizeGrid>) -> Result<DiscreteMeasure> {
        match *self {
            Fixture::Linear { .. } => Err(Error::InvalidParameter(
                "linear(m) is not the transform of a measure on (0, inf)".into(),
            )),
            Fixture::Exp { m, b } => {
                DiscreteMeasure::canonical(MeasureKind::Exponential { m, b }, grid)
            }
            Fixture::Point { s0, w } => {
                DiscreteMeasure::canonical(MeasureKind::Point { s0, w }, grid)
            }
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::Linear { m } => write!(f, "linear({m})"),
            Fixture::Exp { m, b } => write!(f, "exp({m},{b})"),
            Fixture::Point { s0, w } => write!(f, "point({s0},{w})"),
        }
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("unrecognised fixture `{s}`"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = &s[..open];
        let args = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?;
        if args.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Parse(format!("fixture `{s}` needs positive arguments")));
        }
        match (name, args.as_slice()) {
            ("linear", [m]) => Ok(Fixture::Linear { m: *m }),
            ("exp", [m, b]) => Ok(Fixture::Exp { m: *m, b: *b }),
            ("point", [s0, w]) => Ok(Fixture::Point { s0: *s0, w: *w }),
            _ => Err(bad()),
        }
    }
}
