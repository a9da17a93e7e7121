//! Numeric certification of the coorbit axioms for a supplied voice transform.
//!
//! The continuity axioms are not desk-checkable; their computable consequences
//! are: finiteness of `∫ |F| |W_u(u)|`, the reproducing convolution identity,
//! intertwining with left translation and the isometry of the coorbit norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine::{convolve_at, haar_grid_scaled, int1_integral, lp_r_norm, GridFunction1G, GroupElement, GroupField, Window};
use crate::error::Result;

/// Default tolerance for closed-form identities.
pub const TOL_CLOSED: f64 = 1e-10;
/// Default tolerance for quadrature-backed convolution identities.
pub const TOL_QUADRATURE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub window: Option<Window>,
    pub samples: usize,
}

impl AxiomReport {
    pub fn new(axiom: impl Into<String>, residual: f64, tolerance: f64, window: Option<Window>, samples: usize) -> Self {
        // NaN residuals never pass
        let pass = residual <= tolerance;
        AxiomReport { axiom: axiom.into(), residual, tolerance, pass, window, samples }
    }
}

/// A voice transform `x ↦ ⟨v, π(x)u⟩` over some family of vectors, together
/// with the action `π*(y)` on that family.
pub trait VoiceTransform {
    type Vector: Clone;
    fn eval(&self, v: &Self::Vector, x: GroupElement) -> Complex64;
    fn translate(&self, y: GroupElement, v: &Self::Vector) -> Self::Vector;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// Quadrature of `∫ |W_u(u)|²` over the grid window.
    pub c: f64,
    /// Fraction of the full-group mass lying outside the window under the
    /// `|W_u^s(u)|² = 4^s w_{-2s}` decay model; `None` when no `s` was given.
    pub tail_fraction: Option<f64>,
    /// Set when the tail fraction exceeds 1%.
    pub window_warning: bool,
}

/// `c = Σ weights · |Wuu|²`.
pub fn estimate_admissibility(wuu: &GridFunction1G, decay_s: Option<f64>) -> Admissibility {
    let grid = wuu.grid();
    let c: f64 = grid.weights().iter().zip(wuu.values()).map(|(w, v)| w * v.norm_sqr()).sum();
    let tail_fraction = decay_s.map(|s| admissibility_tail(s, grid.window()));
    let window_warning = tail_fraction.is_some_and(|t| t > 0.01);
    Admissibility { c, tail_fraction, window_warning }
}

/// Mass of `((a + 1/a)² + b²)^{-s}` outside `window`, relative to the whole group.
pub fn admissibility_tail(s: f64, window: Window) -> f64 {
    // whole group: scaled grid wide enough that its own tail is negligible
    let l = 40.0 / (2.0 * s - 2.0).min(2.0 * s);
    let eta = 40.0 / (2.0 * s - 1.0) + 1.0;
    let Ok(big) = haar_grid_scaled(-l, l, eta, 800, 800) else {
        return f64::NAN;
    };
    let total = int1_integral(s, 0.0, &big);
    let inside: f64 = big
        .nodes()
        .iter()
        .zip(big.weights())
        .filter(|(g, _)| window.contains(**g))
        .map(|(g, w)| w * ((g.a() + 1.0 / g.a()).powi(2) + g.b() * g.b()).powf(-s))
        .sum();
    ((total - inside) / total).max(0.0)
}

/// R1: `max_{inner} |(Wv * K)(y) − c Wv(y)| / max |Wv|`.
pub fn check_reproducing(wv: &GridFunction1G, kernel: &(impl GroupField + ?Sized), c: f64, tol: f64) -> AxiomReport {
    let grid = wv.grid();
    let inner = grid.inner_indices();
    let scale = wv.max_abs();
    let window = Some(grid.window().inner_half());
    if scale == 0.0 {
        return AxiomReport::new("R1 reproducing formula", 0.0, tol, window, inner.len());
    }
    let ys: Vec<GroupElement> = inner.iter().map(|&i| grid.nodes()[i]).collect();
    let conv = convolve_at(wv, kernel, &ys);
    let residual = inner
        .iter()
        .zip(&conv)
        .map(|(&i, v)| (v - wv.values()[i] * c).norm())
        .fold(0.0, f64::max)
        / scale;
    AxiomReport::new("R1 reproducing formula", residual, tol, window, inner.len())
}

/// R2 surrogate: `∫ |F| |K|` on the window is finite and its outer frame
/// (outermost eighth of the log a and b ranges) carries at most `tol` of it.
pub fn check_integrability(f: &GridFunction1G, kernel: &(impl GroupField + ?Sized), tol: f64) -> AxiomReport {
    let grid = f.grid();
    let w = grid.window();
    let (l0, l1) = (w.a_min.ln(), w.a_max.ln());
    let dl = (l1 - l0) / 8.0;
    let mut total = 0.0;
    let mut frame = 0.0;
    for ((g, wt), v) in grid.nodes().iter().zip(grid.weights()).zip(f.values()) {
        let m = wt * v.norm() * kernel.value(*g).norm();
        total += m;
        let l = g.a().ln();
        if l < l0 + dl || l > l1 - dl || g.b().abs() > 0.75 * w.b_max {
            frame += m;
        }
    }
    let residual = if total.is_finite() && total > 0.0 { frame / total } else if total == 0.0 { 0.0 } else { f64::INFINITY };
    AxiomReport::new("R2 integrability of F * W_u(u)", residual, tol, Some(w), grid.len())
}

/// `max_x |W(π*(y)φ)(x) − W(φ)(y⁻¹x)|`.
pub fn check_intertwining<V: VoiceTransform>(
    w: &V,
    phi: &V::Vector,
    y: GroupElement,
    samples: &[GroupElement],
    tol: f64,
) -> AxiomReport {
    let moved = w.translate(y, phi);
    let yi = y.inv();
    let residual = samples
        .iter()
        .map(|&x| (w.eval(&moved, x) - w.eval(phi, yi.mul(&x))).norm())
        .fold(0.0, f64::max);
    AxiomReport::new("intertwining with left translation", residual, tol, None, samples.len())
}

/// Recomputes `‖Wφ‖_{L^p_r}` and compares with the claimed coorbit norm.
pub fn check_isometry(wphi: &GridFunction1G, claim: f64, p: f64, r: f64) -> Result<AxiomReport> {
    let norm = lp_r_norm(wphi, p, r)?;
    let residual = if norm == claim { 0.0 } else { (norm - claim).abs() / norm.abs().max(claim.abs()) };
    Ok(AxiomReport::new("isometry of W_u", residual, 1e-12, Some(wphi.grid().window()), wphi.grid().len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{haar_grid, Window};
    use crate::disc::{wavelet_uu, DiscVector, DiscVoice, PowerSeries};
    use std::sync::Arc;

    #[test]
    fn zero_inputs() {
        let grid = Arc::new(haar_grid(Window::new(0.5, 2.0, 2.0).unwrap(), 8, 8).unwrap());
        let z = GridFunction1G::zeros(grid.clone());
        assert_eq!(estimate_admissibility(&z, None).c, 0.0);
        let k = |g: GroupElement| wavelet_uu(2.0, g);
        let rep = check_reproducing(&z, &k, 1.0, 1e-2);
        assert!(rep.pass && rep.residual == 0.0);
        assert!(check_isometry(&z, 0.0, 2.0, 0.0).unwrap().pass);
    }

    #[test]
    fn isometry_detects_wrong_claim() {
        let grid = Arc::new(haar_grid(Window::new(0.5, 2.0, 2.0).unwrap(), 8, 8).unwrap());
        let f = GridFunction1G::sample(grid, &|g: GroupElement| wavelet_uu(3.0, g));
        let n = lp_r_norm(&f, 2.0, 1.0).unwrap();
        assert!(check_isometry(&f, n, 2.0, 1.0).unwrap().pass);
        assert!(!check_isometry(&f, 1.01 * n, 2.0, 1.0).unwrap().pass);
    }

    #[test]
    fn intertwining_identity_translation() {
        let w = DiscVoice::new(3.0).unwrap();
        let phi = DiscVector::poly(PowerSeries::monomial(1));
        let xs = [GroupElement::new(1.3, 0.2).unwrap(), GroupElement::new(0.4, -2.0).unwrap()];
        let rep = check_intertwining(&w, &phi, GroupElement::IDENTITY, &xs, TOL_CLOSED);
        assert_eq!(rep.residual, 0.0);
        let rep = check_intertwining(&w, &phi, GroupElement::new(2.0, 0.0).unwrap(), &xs, TOL_CLOSED);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn admissibility_tail_is_small_for_default_window() {
        assert!(admissibility_tail(4.0, Window::DEFAULT) < 1e-6);
        assert!(admissibility_tail(2.0, Window::DEFAULT) < 1e-2);
        assert!(admissibility_tail(2.0, Window::new(0.5, 2.0, 1.0).unwrap()) > 0.01);
    }
}
