//! Bernstein transform `F(x) = sum_i (1 - e^{-s_i x}) w_i` of discrete
//! measures, its derivatives, sampled checks of the regularity assumptions
//! on initial data, complete-monotonicity tests by divided differences, and
//! recovery of the representation `a0 x + a_inf + int (1 - e^{-sx}) mu(ds)`.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io;
use crate::measures::{DiscreteMeasure, SizeGrid};
use crate::nnls::nnls;

/// `sum_i (1 - e^{-s_i x}) w_i`.
pub fn transform(mu: &DiscreteMeasure, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    mu.sizes()
        .iter()
        .zip(mu.weights())
        .map(|(s, w)| -(-s * x).exp_m1() * w)
        .sum()
}

/// `d^n F / dx^n = (-1)^{n+1} sum_i s_i^n e^{-s_i x} w_i`.
pub fn transform_derivative(mu: &DiscreteMeasure, x: f64, order: u32) -> f64 {
    debug_assert!((1..=4).contains(&order));
    let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
    sign * mu
        .sizes()
        .iter()
        .zip(mu.weights())
        .map(|(s, w)| s.powi(order as i32) * (-s * x).exp() * w)
        .sum::<f64>()
}

/// Sampled `F` (and optionally its derivatives) on nonnegative abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinSample {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// `derivs[k]` holds the order-`k+1` derivative at each abscissa.
    pub derivs: Vec<Vec<f64>>,
}

impl BernsteinSample {
    pub fn new(x: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} abscissae for {} values",
                x.len(),
                values.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: x.len(),
            });
        }
        if x[0] < 0.0 || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "abscissae must be nonnegative and strictly increasing".into(),
            ));
        }
        Ok(Self {
            x,
            values,
            derivs: Vec::new(),
        })
    }

    /// Samples the transform of `mu`, with analytic derivatives up to `max_order`.
    pub fn from_measure(mu: &DiscreteMeasure, x: Vec<f64>, max_order: u32) -> Result<Self> {
        let values = x.iter().map(|&xi| transform(mu, xi)).collect();
        let mut sample = Self::new(x, values)?;
        sample.derivs = (1..=max_order.min(4))
            .map(|k| {
                sample
                    .x
                    .iter()
                    .map(|&xi| transform_derivative(mu, xi, k))
                    .collect()
            })
            .collect();
        Ok(sample)
    }

    pub fn from_fn(f: impl Fn(f64) -> f64, x: Vec<f64>) -> Result<Self> {
        let values = x.iter().map(|&xi| f(xi)).collect();
        Self::new(x, values)
    }

    /// Piecewise-linear interpolant; linear extrapolation beyond the last node.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let (f0, f1) = (self.values[i - 1], self.values[i]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// First derivative: stored sample when present, otherwise one-sided
    /// differences of the values.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= x).clamp(1, n - 1);
        let t = (x - self.x[i - 1]) / (self.x[i] - self.x[i - 1]);
        if let Some(d) = self.derivs.first() {
            return d[i - 1] + (d[i] - d[i - 1]) * t;
        }
        (self.values[i] - self.values[i - 1]) / (self.x[i] - self.x[i - 1])
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(
            out,
            &["x", "F"],
            self.x.iter().zip(&self.values).map(|(x, f)| vec![*x, *f]),
        )
    }

    pub fn read_csv<R: std::io::BufRead>(input: R) -> Result<Self> {
        let rows = io::read_csv(input, &["x", "F"])?;
        let (x, values) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
        Self::new(x, values)
    }
}

/// One row of a check report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    fn push(&mut self, name: impl Into<String>, pass: bool, worst_violation: f64) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            worst_violation,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `check,pass,worst_violation` rows.
    pub fn to_text(&self) -> String {
        let mut s = String::from("check,pass,worst_violation\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{}", c.name, c.pass, io::fmt_f64(c.worst_violation));
        }
        s
    }
}

/// Outcome of [`check_assumptions`], with the sampled Hölder seminorm of
/// `x F''` reported separately (no bound is imposed on it).
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub report: CheckReport,
    pub holder_exponent: f64,
    pub holder_seminorm: f64,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.report.all_pass()
    }
}

fn probe_grid() -> Vec<f64> {
    let mut x = vec![0.0];
    let n = 241;
    let (lo, hi) = (1e-4f64.ln(), 1e3f64.ln());
    x.extend((0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()));
    x
}

/// Relative tolerance on `F'(0) = m`: the default size grid truncates `m_1`
/// at the 1e-3 level.
const SLOPE_AT_ZERO_RTOL: f64 = 1e-2;
const HOLDER_EXPONENT: f64 = 0.5;

/// Samples the regularity conditions on `F0 = transform(mu)`:
/// `0 <= F0' <= m`, `F0'(0) = m`, `-C <= F0'' <= 0`, `-m/e <= x F0'' <= 0`
/// and a bounded Hölder seminorm of `x F0''`.
pub fn check_assumptions(mu: &DiscreteMeasure, m: f64) -> AssumptionReport {
    let xs = probe_grid();
    let tol = 1e-12 * (1.0 + m.abs());
    // Bounds that involve m itself inherit the mass tolerance.
    let mass_tol = SLOPE_AT_ZERO_RTOL * m.abs();
    let d1: Vec<f64> = xs.iter().map(|&x| transform_derivative(mu, x, 1)).collect();
    let d2: Vec<f64> = xs.iter().map(|&x| transform_derivative(mu, x, 2)).collect();
    let xd2: Vec<f64> = xs.iter().zip(&d2).map(|(x, v)| x * v).collect();

    let mut report = CheckReport::default();

    let worst = d1
        .iter()
        .map(|&v| (-v - tol).max(v - m - mass_tol).max(0.0))
        .fold(0.0, f64::max);
    report.push("first_derivative_range", worst == 0.0, worst);

    let gap = (d1[0] - m).abs();
    report.push(
        "first_derivative_at_zero",
        gap <= SLOPE_AT_ZERO_RTOL * m.abs().max(f64::MIN_POSITIVE),
        gap,
    );

    // C is the sampled sup of |F''|, which equals m_2 at x = 0.
    let c = d2.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let worst = d2.iter().map(|&v| v.max(0.0)).fold(0.0, f64::max);
    report.push("second_derivative_range", worst <= tol && c.is_finite(), worst);

    let floor = -m / std::f64::consts::E;
    let worst = xd2
        .iter()
        .map(|&v| (floor - mass_tol / std::f64::consts::E - v).max(v - tol).max(0.0))
        .fold(0.0, f64::max);
    report.push("curvature_bound", worst == 0.0, worst);

    let mut seminorm = 0.0f64;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            let dx = xs[j] - xs[i];
            seminorm = seminorm.max((xd2[j] - xd2[i]).abs() / dx.powf(HOLDER_EXPONENT));
        }
    }
    report.push("holder_seminorm_finite", seminorm.is_finite(), 0.0);

    AssumptionReport {
        report,
        holder_exponent: HOLDER_EXPONENT,
        holder_seminorm: seminorm,
    }
}

/// Sign check threshold relative to the local roundoff scale.
const CM_RTOL: f64 = 1e-8;

/// Checks `(-1)^{n+1} f[x_i, ..., x_{i+n}] >= -tol` for each order
/// `n = 1..=max_order`. The tolerance at each window is `1e-8` times the
/// absolute-value divided difference, which bounds the propagated roundoff.
pub fn check_complete_monotonicity(x: &[f64], values: &[f64], max_order: usize) -> Result<CheckReport> {
    if x.len() != values.len() {
        return Err(Error::InvalidParameter("abscissae and values differ in length".into()));
    }
    if !(1..=6).contains(&max_order) {
        return Err(Error::InvalidParameter(format!(
            "max_order must lie in 1..=6, got {max_order}"
        )));
    }
    if x.len() < max_order + 1 {
        return Err(Error::TooFewPoints {
            needed: max_order + 1,
            got: x.len(),
        });
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("abscissae must be strictly increasing".into()));
    }

    let mut report = CheckReport::default();
    let mut diff: Vec<f64> = values.to_vec();
    let mut scale: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    for order in 1..=max_order {
        let len = diff.len() - 1;
        let mut next = Vec::with_capacity(len);
        let mut next_scale = Vec::with_capacity(len);
        for i in 0..len {
            let h = x[i + order] - x[i];
            next.push((diff[i + 1] - diff[i]) / h);
            next_scale.push((scale[i + 1] + scale[i]) / h);
        }
        diff = next;
        scale = next_scale;

        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        let mut worst = 0.0f64;
        let mut pass = true;
        for (d, sc) in diff.iter().zip(&scale) {
            let signed = sign * d;
            if signed < -CM_RTOL * sc {
                pass = false;
            }
            worst = worst.max(-signed);
        }
        report.push(format!("order_{order}"), pass, worst.max(0.0));
    }
    Ok(report)
}

/// `a0 x + a_inf + int (1 - e^{-s x}) mu(ds)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationTriple {
    pub a0: f64,
    pub a_inf: f64,
    pub mu: DiscreteMeasure,
    /// Sup-norm reconstruction error on the input samples.
    pub residual: f64,
}

impl RepresentationTriple {
    pub fn eval(&self, x: f64) -> f64 {
        self.a0 * x + self.a_inf + transform(&self.mu, x)
    }
}

/// Log-spaced support for the fitted measure: 200 nodes, 33 per decade,
/// centred so that `s = 1` is a node.
pub fn representation_support() -> SizeGrid {
    let nodes = (0..200)
        .map(|k| 10f64.powf((k as f64 - 100.0) / 33.0))
        .collect();
    SizeGrid::from_nodes(nodes).expect("support nodes are increasing")
}

/// Relative sup-norm residual above which the fit is declared a failure.
pub const FIT_REL_THRESHOLD: f64 = 1e-4;

/// Fits `a0`, `a_inf` and a nonnegative measure to samples of a Bernstein
/// function by nonnegative least squares on a fixed log-spaced support.
pub fn fit_representation(x: &[f64], values: &[f64]) -> Result<RepresentationTriple> {
    let cm = check_complete_monotonicity(x, values, 2)?;
    if let Some((order, c)) = cm
        .checks
        .iter()
        .enumerate()
        .find(|(_, c)| !c.pass)
    {
        return Err(Error::NotCompletelyMonotone {
            order: order + 1,
            worst: c.worst_violation,
        });
    }

    let support = representation_support();
    let s = support.nodes();
    let rows = x.len();
    let cols = s.len() + 2;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for (i, &xi) in x.iter().enumerate() {
        a[(i, 0)] = xi;
        a[(i, 1)] = 1.0;
        for (k, &sk) in s.iter().enumerate() {
            a[(i, k + 2)] = -(-sk * xi).exp_m1();
        }
    }
    // Unit column norms; nonnegativity is invariant under positive scaling.
    let norms: Vec<f64> = (0..cols)
        .map(|j| a.column(j).norm().max(f64::MIN_POSITIVE))
        .collect();
    for (j, n) in norms.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / n);
    }
    let b = DVector::from_column_slice(values);
    let sol = nnls(&a, &b);
    let coef: Vec<f64> = sol.x.iter().zip(&norms).map(|(c, n)| c / n).collect();

    let mu = DiscreteMeasure::new(Arc::new(support), coef[2..].to_vec())?;
    let mut triple = RepresentationTriple {
        a0: coef[0],
        a_inf: coef[1],
        mu,
        residual: 0.0,
    };
    triple.residual = x
        .iter()
        .zip(values)
        .map(|(&xi, &f)| (triple.eval(xi) - f).abs())
        .fold(0.0, f64::max);

    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let threshold = FIT_REL_THRESHOLD * scale.max(f64::MIN_POSITIVE);
    if triple.residual > threshold {
        return Err(Error::RepresentationFailure {
            residual: triple.residual,
            threshold,
        });
    }
    Ok(triple)
}

/// Geometric abscissae `lo..=hi`, `n` points.
pub fn geometric_abscissae(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp_measure() -> DiscreteMeasure {
        DiscreteMeasure::canonical(
            MeasureKind::Exponential { m: 0.4, b: 1.0 },
            Arc::new(SizeGrid::default_geometric()),
        )
        .unwrap()
    }

    fn unit_point() -> DiscreteMeasure {
        let grid = Arc::new(SizeGrid::linear(1.0, 2.0, 2).unwrap());
        DiscreteMeasure::canonical(MeasureKind::Point { s0: 1.0, w: 1.0 }, grid).unwrap()
    }

    /// Gauss–Legendre-free oracle: composite Simpson in `u = ln s` over a
    /// wide range for `int (1 - e^{-sx}) m b^2 e^{-bs} ds`.
    fn exp_transform_quadrature(m: f64, b: f64, x: f64) -> f64 {
        let (lo, hi) = (1e-9f64.ln(), 80f64.ln());
        let n = 40_000;
        let h = (hi - lo) / n as f64;
        let g = |u: f64| {
            let s = u.exp();
            -(-s * x).exp_m1() * m * b * b * (-b * s).exp() * s
        };
        let mut acc = g(lo) + g(hi);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(lo + h * i as f64);
        }
        acc * h / 3.0
    }

    #[test]
    fn transform_examples() {
        let mu = exp_measure();
        assert_eq!(transform(&mu, 0.0), 0.0);
        assert_relative_eq!(transform(&unit_point(), 2f64.ln()), 0.5, max_relative = 1e-15);

        let closed = 0.4 * 1.0 * 1.0 / (1.0 + 1.0);
        let quad = exp_transform_quadrature(0.4, 1.0, 1.0);
        assert!((closed - quad).abs() < 1e-9);
        assert!((transform(&mu, 1.0) - closed).abs() < 1e-3);
    }

    #[test]
    fn derivative_examples() {
        let mu = exp_measure();
        assert!((transform_derivative(&mu, 1e-6, 1) - 0.4).abs() < 1e-3);
        assert_eq!(transform_derivative(&unit_point(), 0.0, 2), -1.0);
        assert!(transform_derivative(&mu, 10.0, 1) <= transform_derivative(&mu, 1.0, 1));
    }

    #[test]
    fn derivative_matches_centered_difference() {
        let mu = exp_measure();
        let x = 0.7;
        let err = |h: f64| {
            let fd = (transform(&mu, x + h) - transform(&mu, x - h)) / (2.0 * h);
            (fd - transform_derivative(&mu, x, 1)).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 / e2 > 3.8 && e1 / e2 < 4.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn assumptions_hold_for_fixtures() {
        let rep = check_assumptions(&exp_measure(), 0.4);
        assert!(rep.all_pass(), "{}", rep.report.to_text());
        assert!(rep.holder_seminorm.is_finite());

        let grid = Arc::new(SizeGrid::default_geometric());
        let point =
            DiscreteMeasure::canonical(MeasureKind::Point { s0: 1.0, w: 0.4 }, grid).unwrap();
        let rep = check_assumptions(&point, 0.4);
        assert!(rep.all_pass(), "{}", rep.report.to_text());
    }

    #[test]
    fn zero_measure_fails_slope_at_zero() {
        let zero = DiscreteMeasure::zeros(Arc::new(SizeGrid::default_geometric()));
        let rep = check_assumptions(&zero, 0.4);
        assert!(!rep.report.get("first_derivative_at_zero").unwrap().pass);
        assert!(!rep.all_pass());
    }

    #[test]
    fn complete_monotonicity_examples() {
        let x = geometric_abscissae(1e-2, 1e2, 60);
        let lin: Vec<f64> = x.clone();
        let rep = check_complete_monotonicity(&x, &lin, 4).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_text());

        let mu = exp_measure();
        let f: Vec<f64> = x.iter().map(|&v| transform(&mu, v)).collect();
        assert!(check_complete_monotonicity(&x, &f, 4).unwrap().all_pass());

        let closed: Vec<f64> = x.iter().map(|&v| 0.4 * v / (1.0 + v)).collect();
        assert!(check_complete_monotonicity(&x, &closed, 6).unwrap().all_pass());

        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        let rep = check_complete_monotonicity(&x, &sq, 4).unwrap();
        assert!(rep.get("order_1").unwrap().pass);
        assert!(!rep.get("order_2").unwrap().pass);
    }

    #[test]
    fn complete_monotonicity_needs_enough_points() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(
            check_complete_monotonicity(&x, &x, 4),
            Err(Error::TooFewPoints { needed: 5, got: 3 })
        ));
    }

    #[test]
    fn fit_recovers_point_mass() {
        let x = geometric_abscissae(1e-3, 1e2, 80);
        let f: Vec<f64> = x.iter().map(|&v| transform(&unit_point(), v)).collect();
        let rep = fit_representation(&x, &f).unwrap();
        assert!(rep.residual < 1e-6, "residual {}", rep.residual);
        assert!(rep.a0.abs() < 1e-6 && rep.a_inf.abs() < 1e-6);
        assert!((rep.mu.moment(0) - 1.0).abs() < 1e-4);
        // Mass sits near s = 1.
        let near: f64 = rep
            .mu
            .sizes()
            .iter()
            .zip(rep.mu.weights())
            .filter(|(s, _)| (**s - 1.0).abs() < 0.1)
            .map(|(_, w)| w)
            .sum();
        assert!((near - 1.0).abs() < 1e-4);
        // Forward transform of the fitted triple reproduces the input.
        let sup = x
            .iter()
            .zip(&f)
            .map(|(&xi, &fi)| (rep.eval(xi) - fi).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6);
    }

    #[test]
    fn fit_linear_and_constant() {
        let x = geometric_abscissae(1e-3, 1e2, 60);
        let lin: Vec<f64> = x.iter().map(|v| 0.4 * v).collect();
        let rep = fit_representation(&x, &lin).unwrap();
        assert!((rep.a0 - 0.4).abs() < 1e-8);
        assert!(rep.mu.moment(0) < 1e-8);

        let c: Vec<f64> = vec![0.7; x.len()];
        let rep = fit_representation(&x, &c).unwrap();
        assert!((rep.a_inf - 0.7).abs() < 1e-8);
        assert!(rep.mu.moment(0) < 1e-8);
    }

    #[test]
    fn fit_rejects_convex_input() {
        let x = geometric_abscissae(1e-2, 1e1, 40);
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert!(matches!(
            fit_representation(&x, &sq),
            Err(Error::NotCompletelyMonotone { order: 2, .. })
        ));
    }

    #[test]
    fn sample_csv_and_interpolation() {
        let s = BernsteinSample::from_measure(&unit_point(), vec![0.0, 0.5, 1.0], 2).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert_eq!(s.derivs.len(), 2);
        let mid = s.eval(0.25);
        assert!((mid - 0.5 * s.values[1]).abs() < 1e-15);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = BernsteinSample::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values, s.values);
    }

    proptest! {
        #[test]
        fn transform_is_bounded_monotone_concave(
            w in proptest::collection::vec(0.0f64..2.0, 12),
        ) {
            let grid = Arc::new(SizeGrid::geometric(0.05, 20.0, 12).unwrap());
            let mu = DiscreteMeasure::new(grid, w).unwrap();
            let (m0, m1) = (mu.moment(0), mu.moment(1));
            let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
            let f: Vec<f64> = xs.iter().map(|&x| transform(&mu, x)).collect();
            let tol = 1e-12 * (1.0 + m0);
            for (x, v) in xs.iter().zip(&f) {
                prop_assert!(*v >= 0.0);
                prop_assert!(*v <= m0.min(m1 * x) + tol);
            }
            for w in f.windows(2) {
                prop_assert!(w[1] >= w[0] - tol);
            }
            for w in f.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] <= tol);
            }
        }
    }
}
