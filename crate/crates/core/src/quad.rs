//! One-dimensional quadrature rules.
//!
//! Gauss–Jacobi nodes come from the Golub–Welsch eigenproblem, then get a few
//! Newton steps on the orthonormal recurrence and Christoffel weights, which
//! keeps the weights accurate near the endpoints for a few hundred nodes.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Nodes and weights on `[-1, 1]` for the weight `(1-x)^alpha (1+x)^beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn recurrence(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = alpha + beta;
    let mut diag = Vec::with_capacity(n);
    for k in 0..n {
        let kf = k as f64;
        let d = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            let s = 2.0 * kf + ab;
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        diag.push(d);
    }
    // off[k-1] couples p_{k-1} and p_k
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 1..n {
        let kf = k as f64;
        let b2 = if k == 1 {
            4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            let s = 2.0 * kf + ab;
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off.push(b2.sqrt());
    }
    (diag, off)
}

/// Values of the orthonormal polynomials p_0..p_n at x, and p_n'(x).
fn orthonormal(x: f64, mu0: f64, diag: &[f64], off_ext: &[f64]) -> (Vec<f64>, f64) {
    let n = diag.len();
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    p[0] = 1.0 / mu0.sqrt();
    for k in 0..n {
        let prev = if k == 0 { 0.0 } else { p[k - 1] };
        let dprev = if k == 0 { 0.0 } else { dp[k - 1] };
        let bprev = if k == 0 { 0.0 } else { off_ext[k - 1] };
        p[k + 1] = ((x - diag[k]) * p[k] - bprev * prev) / off_ext[k];
        dp[k + 1] = (p[k] + (x - diag[k]) * dp[k] - bprev * dprev) / off_ext[k];
    }
    let d = dp[n];
    p.truncate(n);
    (p, d)
}

/// Gauss–Jacobi rule with `n` nodes on `[-1, 1]`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(invalid("quadrature needs at least one node"));
    }
    if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(invalid(format!(
            "Jacobi exponents must exceed -1 (alpha={alpha}, beta={beta})"
        )));
    }
    let ab = alpha + beta;
    let mu0 = ((ab + 1.0) * 2f64.ln() + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    let (diag, off) = recurrence(n, alpha, beta);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        j[(k, k)] = diag[k];
        if k + 1 < n {
            j[(k, k + 1)] = off[k];
            j[(k + 1, k)] = off[k];
        }
    }
    let mut nodes: Vec<f64> = j.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // b_n is needed to step the recurrence once past degree n-1
    let (_, off_n) = recurrence(n + 1, alpha, beta);
    let off_ext = off_n;
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (pk, d) = orthonormal(*x, mu0, &diag, &off_ext);
            let pn = {
                let prev = if n >= 2 { pk[n - 2] } else { 0.0 };
                let bprev = if n >= 2 { off_ext[n - 2] } else { 0.0 };
                ((*x - diag[n - 1]) * pk[n - 1] - bprev * prev) / off_ext[n - 1]
            };
            if d != 0.0 {
                let step = pn / d;
                if step.abs() < 1e-3 {
                    *x -= step;
                }
            }
        }
        let (pk, _) = orthonormal(*x, mu0, &diag, &off_ext);
        let s: f64 = pk.iter().map(|v| v * v).sum();
        weights.push(1.0 / s);
    }
    Ok(GaussRule { nodes, weights })
}

/// Gauss–Legendre rule with `n` nodes on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Rule on `[0, 1]` for the weight `(1-u)^alpha`.
pub fn unit_interval_jacobi(n: usize, alpha: f64) -> Result<GaussRule> {
    let r = gauss_jacobi(n, alpha, 0.0)?;
    let scale = 2f64.powf(-alpha - 1.0);
    Ok(GaussRule {
        nodes: r.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: r.weights.iter().map(|w| w * scale).collect(),
    })
}

/// Composite midpoint nodes on `[lo, hi]`; returns `(nodes, spacing)`.
pub fn midpoints(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (hi - lo) / n as f64;
    ((0..n).map(|i| lo + (i as f64 + 0.5) * h).collect(), h)
}
