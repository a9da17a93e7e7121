//! The affine group `G = {(a, b) : a > 0}` realised as upper triangular
//! matrices `[[a, b], [0, 1/a]]` in SL2(R), its Cayley image in SU(1,1),
//! the weights `w_r`, Haar quadrature grids and group convolution.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::midpoints;

/// A point `(a, b)` of the affine group, `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    a: f64,
    b: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("group element needs finite a > 0, got ({a}, {b})")));
        }
        Ok(GroupElement { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Matrix product `[[a1, b1], [0, 1/a1]] · [[a2, b2], [0, 1/a2]]`.
    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        GroupElement { a: self.a * o.a, b: self.a * o.b + self.b / o.a }
    }

    pub fn inv(&self) -> GroupElement {
        GroupElement { a: 1.0 / self.a, b: -self.b }
    }

    pub fn cayley(&self) -> SU11Element {
        let (a, b) = (self.a, self.b);
        SU11Element {
            alpha: Complex64::new(0.5 * (a + 1.0 / a), 0.5 * b),
            beta: Complex64::new(0.5 * b, 0.5 * (a - 1.0 / a)),
        }
    }
}

pub fn mul(g1: GroupElement, g2: GroupElement) -> GroupElement {
    g1.mul(&g2)
}

pub fn inv(g: GroupElement) -> GroupElement {
    g.inv()
}

pub fn cayley(g: GroupElement) -> SU11Element {
    g.cayley()
}

/// `[[alpha, beta], [conj beta, conj alpha]]` with `|alpha|² − |beta|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SU11Element {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl SU11Element {
    pub fn det(&self) -> f64 {
        self.alpha.norm_sqr() - self.beta.norm_sqr()
    }

    /// Full 2×2 matrix, row major.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.alpha, self.beta], [self.beta.conj(), self.alpha.conj()]]
    }

    pub fn matmul(&self, o: &SU11Element) -> [[Complex64; 2]; 2] {
        let (x, y) = (self.matrix(), o.matrix());
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        out
    }
}

/// `w_r(a, b) = 2^r [(a + 1/a)² + b²]^{r/2}`.
pub fn weight_w(r: f64, g: GroupElement) -> f64 {
    let q = (g.a + 1.0 / g.a).powi(2) + g.b * g.b;
    2f64.powf(r) * q.powf(0.5 * r)
}

/// Default `(n_a, n_b)` for [`haar_grid`] on [`Window::DEFAULT`].
pub const DEFAULT_RESOLUTION: (usize, usize) = (64, 512);

/// Truncation box `a ∈ [a_min, a_max]`, `|b| ≤ b_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub a_min: f64,
    pub a_max: f64,
    pub b_max: f64,
}

impl Window {
    pub const DEFAULT: Window = Window { a_min: 0.018_315_638_888_734_18, a_max: 54.598_150_033_144_236, b_max: 40.0 };

    pub fn new(a_min: f64, a_max: f64, b_max: f64) -> Result<Self> {
        if !(a_min > 0.0 && a_max > a_min && b_max > 0.0) || !a_max.is_finite() || !b_max.is_finite() {
            return Err(invalid(format!(
                "window needs 0 < a_min < a_max and b_max > 0, got ({a_min}, {a_max}, {b_max})"
            )));
        }
        Ok(Window { a_min, a_max, b_max })
    }

    /// Box `a ∈ [e^{-l}, e^{l}]`, `|b| ≤ b_max`.
    pub fn symmetric(l: f64, b_max: f64) -> Result<Self> {
        Window::new((-l).exp(), l.exp(), b_max)
    }

    pub fn contains(&self, g: GroupElement) -> bool {
        g.a >= self.a_min && g.a <= self.a_max && g.b.abs() <= self.b_max
    }

    /// Middle half in log a and in b.
    pub fn inner_half(&self) -> Window {
        let (l0, l1) = (self.a_min.ln(), self.a_max.ln());
        let (c, h) = (0.5 * (l0 + l1), 0.25 * (l1 - l0));
        Window { a_min: (c - h).exp(), a_max: (c + h).exp(), b_max: 0.5 * self.b_max }
    }

    /// `∫∫ da db / a²` over the box.
    pub fn haar_measure(&self) -> f64 {
        (1.0 / self.a_min - 1.0 / self.a_max) * 2.0 * self.b_max
    }
}

/// How nodes are laid out; both are tensor midpoint grids in some coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    /// Midpoints in `(log a, b)`.
    Uniform { n_a: usize, n_b: usize },
    /// Midpoints in `(log a, eta)` with `b = (a + 1/a) sinh(eta)`, `|eta| ≤ eta_max`.
    Scaled { n_a: usize, n_eta: usize, eta_max: f64 },
}

/// Quadrature for left Haar measure `da db / a²` on a truncated window.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupGrid {
    nodes: Vec<GroupElement>,
    weights: Vec<f64>,
    window: Window,
    layout: Layout,
    /// First axis coordinates (log a), second axis coordinates (b or eta).
    axis_l: Vec<f64>,
    axis_v: Vec<f64>,
}

/// Midpoint grid in `(log a, b)`; weight `Δlog a · Δb / a`.
pub fn haar_grid(window: Window, n_a: usize, n_b: usize) -> Result<GroupGrid> {
    Window::new(window.a_min, window.a_max, window.b_max)?;
    if n_a < 2 || n_b < 2 {
        return Err(invalid("grid resolutions must be at least 2"));
    }
    let (ls, dl) = midpoints(window.a_min.ln(), window.a_max.ln(), n_a);
    let (bs, db) = midpoints(-window.b_max, window.b_max, n_b);
    let mut nodes = Vec::with_capacity(n_a * n_b);
    let mut weights = Vec::with_capacity(n_a * n_b);
    for &l in &ls {
        let a = l.exp();
        for &b in &bs {
            nodes.push(GroupElement { a, b });
            weights.push(dl * db / a);
        }
    }
    Ok(GroupGrid { nodes, weights, window, layout: Layout::Uniform { n_a, n_b }, axis_l: ls, axis_v: bs })
}

/// Midpoint grid in `(log a, eta)` with `b = (a + 1/a) sinh eta`.
///
/// The b-extent follows the natural scale `a + 1/a` of the wavelet
/// `W_u^s(u)`, so slowly decaying tails in both a and b fit on one grid.
pub fn haar_grid_scaled(l_min: f64, l_max: f64, eta_max: f64, n_a: usize, n_eta: usize) -> Result<GroupGrid> {
    if !(l_max > l_min) || !(eta_max > 0.0) || !l_min.is_finite() || !l_max.is_finite() {
        return Err(invalid("scaled grid needs l_min < l_max and eta_max > 0"));
    }
    if n_a < 2 || n_eta < 2 {
        return Err(invalid("grid resolutions must be at least 2"));
    }
    let (ls, dl) = midpoints(l_min, l_max, n_a);
    let (es, de) = midpoints(-eta_max, eta_max, n_eta);
    let mut nodes = Vec::with_capacity(n_a * n_eta);
    let mut weights = Vec::with_capacity(n_a * n_eta);
    let mut b_max: f64 = 0.0;
    for &l in &ls {
        let a = l.exp();
        let scale = a + 1.0 / a;
        for &e in &es {
            let b = scale * e.sinh();
            b_max = b_max.max(b.abs());
            nodes.push(GroupElement { a, b });
            weights.push(dl * de * scale * e.cosh() / a);
        }
    }
    let window = Window { a_min: l_min.exp(), a_max: l_max.exp(), b_max };
    Ok(GroupGrid {
        nodes,
        weights,
        window,
        layout: Layout::Scaled { n_a, n_eta, eta_max },
        axis_l: ls,
        axis_v: es,
    })
}

impl GroupGrid {
    pub fn nodes(&self) -> &[GroupElement] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same window, resolution multiplied by `factor` along each axis.
    pub fn refined(&self, factor: usize) -> Result<GroupGrid> {
        match self.layout {
            Layout::Uniform { n_a, n_b } => haar_grid(self.window, n_a * factor, n_b * factor),
            Layout::Scaled { n_a, n_eta, eta_max } => {
                let (l0, l1) = self.log_range();
                haar_grid_scaled(l0, l1, eta_max, n_a * factor, n_eta * factor)
            }
        }
    }

    fn log_range(&self) -> (f64, f64) {
        (self.window.a_min.ln(), self.window.a_max.ln())
    }

    /// Indices of nodes in the inner half-window, where convolution output is trusted.
    pub fn inner_indices(&self) -> Vec<usize> {
        let inner = self.window.inner_half();
        (0..self.nodes.len()).filter(|&i| inner.contains(self.nodes[i])).collect()
    }

    fn second_coordinate(&self, g: GroupElement) -> f64 {
        match self.layout {
            Layout::Uniform { .. } => g.b,
            Layout::Scaled { .. } => (g.b / (g.a + 1.0 / g.a)).asinh(),
        }
    }

    /// Bilinear interpolation of nodal values in grid coordinates; zero outside
    /// the hull of the nodes.
    pub fn interpolate(&self, values: &[Complex64], g: GroupElement) -> Complex64 {
        let l = g.a.ln();
        let v = self.second_coordinate(g);
        let (Some((i, fi)), Some((j, fj))) = (bracket(&self.axis_l, l), bracket(&self.axis_v, v)) else {
            return Complex64::new(0.0, 0.0);
        };
        let nv = self.axis_v.len();
        let at = |p: usize, q: usize| values[p * nv + q];
        at(i, j) * ((1.0 - fi) * (1.0 - fj))
            + at(i + 1, j) * (fi * (1.0 - fj))
            + at(i, j + 1) * ((1.0 - fi) * fj)
            + at(i + 1, j + 1) * (fi * fj)
    }
}

fn bracket(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if n < 2 || x < axis[0] || x > axis[n - 1] {
        return None;
    }
    let h = axis[1] - axis[0];
    let i = (((x - axis[0]) / h).floor() as usize).min(n - 2);
    Some((i, (x - axis[i]) / h))
}

/// Anything that can be evaluated at a group element.
pub trait GroupField {
    fn value(&self, g: GroupElement) -> Complex64;
}

impl<F: Fn(GroupElement) -> Complex64> GroupField for F {
    fn value(&self, g: GroupElement) -> Complex64 {
        self(g)
    }
}

/// Complex samples on the nodes of a [`GroupGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction1G {
    grid: Arc<GroupGrid>,
    values: Vec<Complex64>,
}

impl GridFunction1G {
    pub fn new(grid: Arc<GroupGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(crate::Error::Grid(format!(
                "{} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction1G { grid, values })
    }

    pub fn zeros(grid: Arc<GroupGrid>) -> Self {
        let n = grid.len();
        GridFunction1G { grid, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn sample(grid: Arc<GroupGrid>, f: &(impl GroupField + ?Sized)) -> Self {
        let values = grid.nodes.iter().map(|&g| f.value(g)).collect();
        GridFunction1G { grid, values }
    }

    pub fn grid(&self) -> &Arc<GroupGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        GridFunction1G { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

impl GroupField for GridFunction1G {
    fn value(&self, g: GroupElement) -> Complex64 {
        self.grid.interpolate(&self.values, g)
    }
}

/// `(F * K)(y) = ∫ F(x) K(x⁻¹y) dx` at the given points; sums run in node order.
pub fn convolve_at(f: &GridFunction1G, k: &(impl GroupField + ?Sized), ys: &[GroupElement]) -> Vec<Complex64> {
    let grid = &f.grid;
    let active: Vec<(GroupElement, Complex64)> = grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .zip(&f.values)
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|((x, w), v)| (x.inv(), v * *w))
        .collect();
    ys.iter()
        .map(|y| active.iter().fold(Complex64::new(0.0, 0.0), |acc, (xi, wv)| acc + wv * k.value(xi.mul(y))))
        .collect()
}

/// Group convolution evaluated at every node of `F`'s grid.
pub fn convolve(f: &GridFunction1G, k: &(impl GroupField + ?Sized)) -> GridFunction1G {
    let values = convolve_at(f, k, &f.grid.nodes);
    GridFunction1G { grid: f.grid.clone(), values }
}

/// `(∫ |F w_r|^p da db / a²)^{1/p}` by the grid quadrature.
pub fn lp_r_norm(f: &GridFunction1G, p: f64, r: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid(format!("L^p_r norm needs p >= 1, got {p}")));
    }
    let grid = &f.grid;
    let s: f64 = grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .zip(&f.values)
        .map(|((g, w), v)| {
            let m = if r == 0.0 { v.norm() } else { v.norm() * weight_w(r, *g) };
            w * m.powf(p)
        })
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Quadrature of `∫ ((a + 1/a)² + b²)^{-t} a^r da db / a²`, the integral whose
/// finiteness is governed by `2(1 − t) < r < 2t`.
pub fn int1_integral(t: f64, r: f64, grid: &GroupGrid) -> f64 {
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(g, w)| {
            let q = (g.a + 1.0 / g.a).powi(2) + g.b * g.b;
            w * q.powf(-t) * g.a.powf(r)
        })
        .sum()
}

/// Closed form of `∫_G |W_u^s(u)|² dx = 2π / (s − 1)` over the whole group.
pub fn admissibility_exact(s: f64) -> f64 {
    2.0 * PI / (s - 1.0)
}
