//! Lawson–Hanson active-set solver for `min ||A x - b||` subject to `x >= 0`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    #[allow(dead_code)]
    pub iterations: usize,
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    let (rows, cols) = a.shape();
    assert_eq!(rows, b.len(), "row count must match right-hand side");

    let norm_a = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 10.0 * f64::EPSILON * norm_a * rows.max(cols) as f64 * b.amax().max(1.0);

    let mut x = DVector::<f64>::zeros(cols);
    let mut passive = vec![false; cols];
    let mut iterations = 0;
    let max_iter = 3 * cols.max(1);

    let gradient = |x: &DVector<f64>| a.transpose() * (b - a * x);
    let mut w = gradient(&x);

    while iterations < max_iter {
        let candidate = (0..cols)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;

        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..cols).filter(|&k| passive[k]).collect();
            let z = solve_subset(a, b, &idx);
            if idx.iter().zip(z.iter()).all(|(_, v)| *v > 0.0) {
                x.fill(0.0);
                for (k, v) in idx.iter().zip(z.iter()) {
                    x[*k] = *v;
                }
                break;
            }
            // Step back toward the infeasible trial point.
            let mut alpha = f64::INFINITY;
            for (k, v) in idx.iter().zip(z.iter()) {
                if *v <= 0.0 {
                    let denom = x[*k] - v;
                    if denom > 0.0 {
                        alpha = alpha.min(x[*k] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            let mut trial = DVector::<f64>::zeros(cols);
            for (k, v) in idx.iter().zip(z.iter()) {
                trial[*k] = *v;
            }
            x += (trial - &x) * alpha;
            for &k in &idx {
                if x[k] <= tol {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if iterations >= max_iter || !passive.iter().any(|p| *p) {
                break;
            }
        }
        w = gradient(&x);
    }

    NnlsSolution { x, iterations }
}

fn solve_subset(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(idx);
    let svd = sub.svd(true, true);
    let eps = f64::EPSILON * svd.singular_values.max() * idx.len().max(a.nrows()) as f64;
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(idx.len()))
}
