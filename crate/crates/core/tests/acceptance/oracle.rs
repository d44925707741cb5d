//! Dense proximal-gradient solver for the L1-penalized squared-hinge
//! problem over an explicit design matrix.

use crate::common::{hinge, hinge_slope};

pub struct DenseSolution {
    pub beta: Vec<f64>,
    pub loss: f64,
    pub margins: Vec<f64>,
    /// Smooth gradient per column at the solution.
    pub gradient: Vec<f64>,
}

fn margins(x: &[Vec<f64>], y: &[f64], beta0: f64, beta: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(row, yi)| yi * (beta0 + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()))
        .collect()
}

fn objective(x: &[Vec<f64>], y: &[f64], beta0: f64, beta: &[f64], c: f64) -> f64 {
    margins(x, y, beta0, beta).iter().map(|&m| hinge(m)).sum::<f64>()
        + c * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Gradient of the data term with respect to (β0, β).
fn gradient(x: &[Vec<f64>], y: &[f64], beta0: f64, beta: &[f64]) -> (f64, Vec<f64>) {
    let m = margins(x, y, beta0, beta);
    let mut g0 = 0.0;
    let mut g = vec![0.0; beta.len()];
    for (i, row) in x.iter().enumerate() {
        let s = hinge_slope(m[i]) * y[i];
        g0 += s;
        for (gj, xij) in g.iter_mut().zip(row) {
            *gj += s * xij;
        }
    }
    (g0, g)
}

/// Largest eigenvalue of `A'A` for `A = [1 | x]` by power iteration.
fn lipschitz(x: &[Vec<f64>]) -> f64 {
    let p = x.first().map_or(0, Vec::len) + 1;
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = x
            .iter()
            .map(|row| v[0] + row.iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let mut w = vec![0.0; p];
        for (row, s) in x.iter().zip(&av) {
            w[0] += s;
            for (wj, a) in w[1..].iter_mut().zip(row) {
                *wj += s * a;
            }
        }
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        lambda = norm;
        v = w.iter().map(|a| a / norm).collect();
    }
    2.0 * lambda * 1.01
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// FISTA with gradient-based restarts.
pub fn solve(x: &[Vec<f64>], y: &[f64], c: f64, max_iter: usize) -> DenseSolution {
    let p = x.first().map_or(0, Vec::len);
    let l = lipschitz(x);
    let step = 1.0 / l;
    let (mut b0, mut b) = (0.0, vec![0.0; p]);
    let (mut z0, mut z) = (b0, b.clone());
    let mut t = 1.0f64;
    for _ in 0..max_iter {
        let (g0, g) = gradient(x, y, z0, &z);
        let nb0 = z0 - step * g0;
        let nb: Vec<f64> = z
            .iter()
            .zip(&g)
            .map(|(zj, gj)| soft(zj - step * gj, step * c))
            .collect();
        let diff0 = nb0 - b0;
        let diff: Vec<f64> = nb.iter().zip(&b).map(|(a, bb)| a - bb).collect();
        let restart = (z0 - nb0) * diff0
            + z.iter().zip(&nb).zip(&diff).map(|((zj, nj), d)| (zj - nj) * d).sum::<f64>()
            > 0.0;
        let moved = diff0.abs().max(diff.iter().fold(0.0, |a, d| a.max(d.abs())));
        if restart {
            t = 1.0;
        }
        let nt = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mom = (t - 1.0) / nt;
        z0 = nb0 + mom * diff0;
        z = nb.iter().zip(&diff).map(|(a, d)| a + mom * d).collect();
        b0 = nb0;
        b = nb;
        t = nt;
        if moved < 1e-14 {
            break;
        }
    }
    let (_, gradient) = gradient(x, y, b0, &b);
    DenseSolution {
        loss: objective(x, y, b0, &b, c),
        margins: margins(x, y, b0, &b),
        beta: b,
        gradient,
    }
}

/// Numerical rank by Gaussian elimination with partial pivoting.
pub fn rank(mut m: Vec<Vec<f64>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let tol = 1e-9 * scale;
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let pivot = (r..rows)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= tol {
            continue;
        }
        m.swap(r, pivot);
        for i in r + 1..rows {
            let f = m[i][col] / m[r][col];
            for j in col..cols {
                m[i][j] -= f * m[r][j];
            }
        }
        r += 1;
    }
    r
}
