//! Stationary solutions for `m = 1`.
//!
//! Writing `G = 1 − F'`, the stationary equation reduces to
//! `G / (1 − G)³ = C x` with a free constant `C > 0`. With `C = 1/λ` this
//! gives the family `F_λ(x) = λ F_1(x/λ)` of sublinear profiles. For large
//! `C x` the root is computed through `h = 1 − G`, the root in `(0, 1]` of
//! `C x h³ + h − 1`, which keeps full relative accuracy in `1 − G`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

const NEWTON_MAX_ITER: usize = 100;

fn check_args(x: f64, c: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("x must be >= 0, got {x}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    Ok(())
}

/// Safeguarded Newton for an increasing `f` with `f(lo) ≤ 0 ≤ f(hi)`.
fn newton(f: impl Fn(f64) -> (f64, f64), start: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut u = start;
    for _ in 0..NEWTON_MAX_ITER {
        let (v, dv) = f(u);
        if v == 0.0 {
            return u;
        }
        if v > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - v / dv;
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 4.0 * f64::EPSILON * u.abs() {
            return next;
        }
        u = next;
    }
    u
}

/// Below this value of `C x` the root is computed in `G` directly, above it
/// in `1 − G`; each side keeps full relative accuracy in the small quantity.
const SWITCH: f64 = 4.0;

fn solve_pair(x: f64, c: f64) -> Result<(f64, f64)> {
    check_args(x, c)?;
    let k = c * x;
    if k == 0.0 {
        return Ok((0.0, 1.0));
    }
    if k <= SWITCH {
        // g − k(1 − g)³: increasing and concave, Newton from 0 climbs
        // monotonically onto the root.
        let g = newton(
            |g| {
                let h = 1.0 - g;
                (g - k * h * h * h, 1.0 + 3.0 * k * h * h)
            },
            0.0,
            0.0,
            0.5,
        );
        Ok((g, 1.0 - g))
    } else {
        // k h³ + h − 1: increasing and convex, Newton from the right end
        // descends monotonically.
        let h = newton(|h| (k * h * h * h + h - 1.0, 3.0 * k * h * h + 1.0), 0.5, 1e-300, 0.5);
        Ok((1.0 - h, h.max(1e-300)))
    }
}

/// `1 − G(x)` for the given `C`.
pub fn solve_one_minus_g(x: f64, c: f64) -> Result<f64> {
    Ok(solve_pair(x, c)?.1)
}

/// Root in `[0, 1)` of `g / (1 − g)³ = C x`.
pub fn solve_g(x: f64, c: f64) -> Result<f64> {
    Ok(solve_pair(x, c)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProfile {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    pub lambda: f64,
}

/// `G_λ = solve_g(·, 1/λ)` on `x_grid` (which must start at `0` and
/// increase) and `F` by the composite trapezoid rule for `∫ (1 − G_λ)`.
pub fn equilibrium_profile(x_grid: &[f64], lambda: f64) -> Result<EquilibriumProfile> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if x_grid.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: x_grid.len() });
    }
    if x_grid[0] != 0.0 || x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must start at 0 and increase".into()));
    }
    let c = 1.0 / lambda;
    let (g, h): (Vec<f64>, Vec<f64>) = x_grid
        .iter()
        .map(|&x| solve_pair(x, c))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let mut f = Vec::with_capacity(h.len());
    f.push(0.0);
    for i in 1..h.len() {
        let step = 0.5 * (h[i] + h[i - 1]) * (x_grid[i] - x_grid[i - 1]);
        f.push(f[i - 1] + step);
    }
    Ok(EquilibriumProfile {
        x: x_grid.to_vec(),
        g,
        f,
        lambda,
    })
}

impl EquilibriumProfile {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(
            out,
            &["x", "G", "F"],
            (0..self.x.len()).map(|i| vec![self.x[i], self.g[i], self.f[i]]),
        )
    }

    pub fn save(&self, csv: &Path, sidecar: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(csv)?);
        self.write_csv(file)?;
        std::fs::write(sidecar, io::sidecar(&[("lambda", self.lambda.to_string())]))?;
        Ok(())
    }
}

/// Sup over interior nodes of
/// `|½ (p − m)(p − m − 1) + F/x − m|` with centred slopes `p`.
pub fn equilibrium_residual(x: &[f64], f: &[f64], m: f64) -> Result<f64> {
    if x.len() != f.len() {
        return Err(Error::InvalidParameter("grid and values differ in length".into()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: x.len() });
    }
    if f[0].abs() > 1e-12 * (1.0 + f.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
        return Err(Error::InvalidParameter(format!("F(0) must vanish, got {}", f[0])));
    }
    let mut worst = 0.0f64;
    for i in 1..x.len() - 1 {
        let p = (f[i + 1] - f[i - 1]) / (x[i + 1] - x[i - 1]);
        let r = 0.5 * (p - m) * (p - m - 1.0) + f[i] / x[i] - m;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::{check_complete_monotonicity, geometric_abscissae};
    use proptest::prelude::*;

    fn uniform(l: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| l * i as f64 / (n - 1) as f64).collect()
    }

    /// Closed form of `∫₀ˣ (1 − G)`: with `h = 1 − G(x)`, substituting
    /// `x = (1 − h)/(C h³)` gives `(λ/2)(3/h − 1)(G/h)`.
    fn f_exact(x: f64, lambda: f64) -> f64 {
        let (g, h) = (solve_g(x, 1.0 / lambda).unwrap(), solve_one_minus_g(x, 1.0 / lambda).unwrap());
        0.5 * lambda * (3.0 / h - 1.0) * (g / h)
    }

    #[test]
    fn solve_g_examples() {
        assert_eq!(solve_g(0.0, 3.0).unwrap(), 0.0);
        assert!((solve_g(4.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((solve_g(9.0 / 8.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        for lambda in [0.5, 2.0, 7.0] {
            assert!((solve_g(4.0 * lambda, 1.0 / lambda).unwrap() - 0.5).abs() < 1e-12);
        }
        assert!(solve_g(-1.0, 1.0).is_err());
        assert!(solve_g(1.0, 0.0).is_err());
    }

    #[test]
    fn residual_of_root_is_tiny() {
        for &x in &[1e-8, 1e-3, 0.5, 4.0, 1e3, 1e8, 1e14] {
            let g = solve_g(x, 1.0).unwrap();
            let h = solve_one_minus_g(x, 1.0).unwrap();
            let rel = (g / (h * h * h) - x).abs() / x;
            assert!(rel < 1e-12, "x={x} rel={rel}");
            assert!((0.0..1.0).contains(&g));
        }
    }

    #[test]
    fn small_x_slope_equals_mass() {
        let p = equilibrium_profile(&uniform(1e-3, 11), 1.0).unwrap();
        for (x, g) in p.x.iter().zip(&p.g) {
            assert!((g - x).abs() <= 4.0 * x * x + 1e-16);
        }
        let slope = (p.f[1] - p.f[0]) / (p.x[1] - p.x[0]);
        assert!((slope - 1.0).abs() < 1e-4);
    }

    #[test]
    fn trapezoid_matches_closed_form() {
        let p = equilibrium_profile(&uniform(20.0, 2001), 1.0).unwrap();
        for (x, f) in p.x.iter().zip(&p.f) {
            assert!((f - f_exact(*x, 1.0)).abs() < 1e-5);
        }
    }

    #[test]
    fn profile_shape() {
        let p = equilibrium_profile(&uniform(50.0, 5001), 1.0).unwrap();
        for w in p.g.windows(2) {
            assert!(w[1] > w[0] && w[1] < 1.0);
        }
        for w in p.f.windows(3) {
            assert!(w[1] >= w[0] && w[2] - 2.0 * w[1] + w[0] <= 1e-15);
        }
        for (x, f) in p.x.iter().zip(&p.f) {
            assert!(*f <= *x + 1e-15 && *f >= 0.0);
        }
        // Sublinear growth.
        assert!(f_exact(1e3, 1.0) / 1e3 < 0.2);
        let far = equilibrium_profile(&uniform(1e3, 100_001), 1.0).unwrap();
        assert!(far.f.last().unwrap() / 1e3 < 0.2);
    }

    #[test]
    fn scaling_family() {
        let x = uniform(20.0, 2001);
        for lambda in [0.5, 2.0] {
            let scaled = equilibrium_profile(&x, lambda).unwrap();
            let base_grid: Vec<f64> = x.iter().map(|v| v / lambda).collect();
            let base = equilibrium_profile(&base_grid, 1.0).unwrap();
            for i in 0..x.len() {
                assert!((scaled.f[i] - lambda * base.f[i]).abs() < 1e-12);
                let err = (scaled.f[i] - lambda * f_exact(x[i] / lambda, 1.0)).abs();
                assert!(err < 5e-5, "lambda={lambda} x={} err={err}", x[i]);
            }
        }
        assert!(equilibrium_profile(&x, 0.0).is_err());
        assert!(equilibrium_profile(&[0.5, 1.0], 1.0).is_err());
    }

    #[test]
    fn residual_examples() {
        let x = uniform(10.0, 101);
        for m in [0.3, 1.0, 2.0] {
            let f: Vec<f64> = x.iter().map(|v| m * v).collect();
            assert!(equilibrium_residual(&x, &f, m).unwrap() < 1e-14);
        }
        let zero = vec![0.0; x.len()];
        assert!((equilibrium_residual(&x, &zero, 0.5).unwrap() - 0.125).abs() < 1e-15);
        let mut bad = zero.clone();
        bad[0] = 1.0;
        assert!(equilibrium_residual(&x, &bad, 0.5).is_err());
    }

    #[test]
    fn residual_is_second_order() {
        let r = |n: usize| {
            let p = equilibrium_profile(&uniform(20.0, n), 1.0).unwrap();
            equilibrium_residual(&p.x, &p.f, 1.0).unwrap()
        };
        let (coarse, fine) = (r(2001), r(4001));
        assert!(coarse / fine >= 3.5, "{coarse} / {fine}");
        assert!(coarse < 1e-4);
    }

    #[test]
    fn g_is_bernstein() {
        let x = geometric_abscissae(1e-2, 1e2, 60);
        let g: Vec<f64> = x.iter().map(|&v| solve_g(v, 1.0).unwrap()).collect();
        assert!(check_complete_monotonicity(&x, &g, 4).unwrap().all_pass());
    }

    #[test]
    fn csv_output() {
        let p = equilibrium_profile(&uniform(1.0, 11), 2.0).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let rows = io::read_csv(&buf[..], &["x", "G", "F"]).unwrap();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[10][2], p.f[10]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solve_g_increasing(x in 0.0f64..1e4, dx in 1e-6f64..10.0, c in 1e-3f64..1e3) {
            let a = solve_g(x, c).unwrap();
            prop_assert!(solve_g(x + dx, c).unwrap() >= a);
            prop_assert!(solve_g(x, c * 1.5).unwrap() >= a);
        }

        /// Sublinear concave candidates never solve the stationary equation
        /// when `m < 1`: far out the residual approaches `m(1 − m)/2`.
        #[test]
        fn no_sublinear_equilibrium_below_critical_mass(
            m_idx in 0usize..2,
            family in 0usize..4,
            a in 0.05f64..1.0,
            k in 0.05f64..5.0,
        ) {
            let m = [0.3, 0.7][m_idx];
            let x = uniform(1000.0, 20_001);
            let f: Vec<f64> = match family {
                0 => x.iter().map(|v| m * a * v / (1.0 + k * v)).collect(),
                1 => x.iter().map(|v| m * a * (-(-k * v).exp_m1()) / k).collect(),
                2 => x.iter().map(|v| m * a * (k * v).ln_1p() / k).collect(),
                _ => {
                    let p = equilibrium_profile(&x.iter().map(|v| v * k).collect::<Vec<_>>(), 1.0).unwrap();
                    p.f.iter().map(|v| m * a * v / k).collect()
                }
            };
            let r = equilibrium_residual(&x, &f, m).unwrap();
            prop_assert!(r >= 0.01, "residual {r}");
        }
    }
}
