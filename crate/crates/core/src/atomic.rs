//! Sampling lattices in the affine group, partitions of unity subordinate to
//! lattice cells, the discretization operators `T1`, `T2`, `T3` and their
//! Neumann-series inversion.
//!
//! Cells live in the ax+b coordinates `(A, B) = (a², ab)`, where the group law
//! reads `(A, B)(A', B') = (AA', AB' + B)`. A left translate `x·U` of the box
//! `U = {|ln A| < ε, |B| < η}` is again a box,
//! `{|ln A − ln A_x| < ε, |B − B_x| < A_x η}`, so supports, overlaps and
//! coverage can be checked exactly.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine::{haar_grid, lp_r_norm, weight_w, GridFunction1G, GroupElement, GroupField, GroupGrid, Window};
use crate::disc::{wavelet_closed_unchecked, wavelet_uu, PowerSeries};
use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre;

fn big_a(g: GroupElement) -> f64 {
    g.a() * g.a()
}

fn big_b(g: GroupElement) -> f64 {
    g.a() * g.b()
}

fn from_ab(log_big_a: f64, big_b: f64) -> GroupElement {
    let a = (0.5 * log_big_a).exp();
    GroupElement::new(a, big_b / a).expect("finite coordinates")
}

/// Box `{(A, B) : |ln A| < log_alpha, |B| < shear}` around the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellBox {
    pub log_alpha: f64,
    pub shear: f64,
}

impl CellBox {
    pub fn new(log_alpha: f64, shear: f64) -> Result<Self> {
        if !(log_alpha >= 0.0 && shear >= 0.0) || !log_alpha.is_finite() || !shear.is_finite() {
            return Err(invalid(format!("cell box half-widths must be finite and >= 0, got ({log_alpha}, {shear})")));
        }
        Ok(CellBox { log_alpha, shear })
    }

    /// `|log a| < r`, `|ab| < r`.
    pub fn symmetric(r: f64) -> Self {
        CellBox { log_alpha: 2.0 * r, shear: r }
    }

    /// Box whose translates overlap their neighbours by `overlap` times the
    /// lattice half-spacing (`overlap > 1` leaves no gaps).
    pub fn for_lattice(a0: f64, b0: f64, overlap: f64) -> Self {
        CellBox { log_alpha: overlap * a0.ln(), shear: 0.5 * overlap * b0 }
    }

    pub fn half_log_a(&self) -> f64 {
        0.5 * self.log_alpha
    }

    pub fn contains(&self, u: GroupElement) -> bool {
        big_a(u).ln().abs() < self.log_alpha && big_b(u).abs() < self.shear
    }

    /// Smallest box containing `V·V` for `V = self`.
    pub fn square(&self) -> CellBox {
        CellBox { log_alpha: 2.0 * self.log_alpha, shear: self.shear * (1.0 + self.log_alpha.exp()) }
    }

    pub fn contains_box(&self, other: &CellBox) -> bool {
        other.log_alpha <= self.log_alpha && other.shear <= self.shear
    }

    /// Haar measure `∫ da db / a² = ½ ∫ dA dB / A²` of the box.
    pub fn haar_measure(&self) -> f64 {
        2.0 * self.shear * self.log_alpha.sinh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub j: i64,
    pub a: f64,
    pub k_min: i64,
    pub k_max: i64,
    pub offset: usize,
}

/// Points `x_{j,k} = (a0^j, a0^j k b0) = (a0^j, 0)·(1, k b0)` inside a window,
/// ordered lexicographically in `(j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    a0: f64,
    b0: f64,
    window: Window,
    levels: Option<Vec<Level>>,
    points: Vec<GroupElement>,
}

pub fn generate_lattice(a0: f64, b0: f64, window: Window) -> Result<Lattice> {
    if !(a0 > 1.0) || !(b0 > 0.0) {
        return Err(invalid(format!("lattice needs a0 > 1 and b0 > 0, got ({a0}, {b0})")));
    }
    Window::new(window.a_min, window.a_max, window.b_max)?;
    let la = a0.ln();
    let j0 = (window.a_min.ln() / la - 1e-12).ceil() as i64;
    let j1 = (window.a_max.ln() / la + 1e-12).floor() as i64;
    let mut levels = Vec::new();
    let mut points = Vec::new();
    for j in j0..=j1 {
        let a = a0.powi(j as i32);
        if a < window.a_min * (1.0 - 1e-12) || a > window.a_max * (1.0 + 1e-12) {
            continue;
        }
        let k_max = (window.b_max / (a * b0) + 1e-12).floor() as i64;
        levels.push(Level { j, a, k_min: -k_max, k_max, offset: points.len() });
        for k in -k_max..=k_max {
            points.push(GroupElement::new(a, a * k as f64 * b0)?);
        }
    }
    if points.is_empty() {
        return Err(invalid("window contains no lattice point"));
    }
    Ok(Lattice { a0, b0, window, levels: Some(levels), points })
}

impl Lattice {
    /// Arbitrary point set; neighbour queries fall back to a linear scan.
    pub fn custom(points: Vec<GroupElement>, window: Window) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("empty point set"));
        }
        Ok(Lattice { a0: f64::NAN, b0: f64::NAN, window, levels: None, points })
    }

    pub fn points(&self) -> &[GroupElement] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn generator(&self) -> (f64, f64) {
        (self.a0, self.b0)
    }

    /// Indices `i` whose box `x_i·[±ell] × [±A_i eta]` may contain a point with
    /// coordinates `(ln A, B)`; for regular lattices the result is exact.
    fn near(&self, log_big_a: f64, bb: f64, ell: f64, eta_of: impl Fn(f64) -> f64) -> Vec<usize> {
        let mut out = Vec::new();
        match &self.levels {
            Some(levels) => {
                let step = 2.0 * self.a0.ln();
                let jlo = ((log_big_a - ell) / step).floor() as i64;
                let jhi = ((log_big_a + ell) / step).ceil() as i64;
                for lev in levels.iter().filter(|l| l.j >= jlo && l.j <= jhi) {
                    let big = lev.a * lev.a;
                    if ((big.ln()) - log_big_a).abs() >= ell {
                        continue;
                    }
                    let eta = eta_of(big);
                    let m = bb / big;
                    let klo = (((m - eta / big) / self.b0).floor() as i64).max(lev.k_min);
                    let khi = (((m + eta / big) / self.b0).ceil() as i64).min(lev.k_max);
                    for k in klo..=khi {
                        let i = lev.offset + (k - lev.k_min) as usize;
                        if (big_b(self.points[i]) - bb).abs() < eta {
                            out.push(i);
                        }
                    }
                }
            }
            None => {
                for (i, &p) in self.points.iter().enumerate() {
                    let big = big_a(p);
                    if (big.ln() - log_big_a).abs() < ell && (big_b(p) - bb).abs() < eta_of(big) {
                        out.push(i);
                    }
                }
            }
        }
        out
    }

    /// Indices `i` with `x ∈ x_i·U`.
    pub fn containing_cells(&self, x: GroupElement, cell: &CellBox) -> Vec<usize> {
        self.near(big_a(x).ln(), big_b(x), cell.log_alpha, |big| big * cell.shear)
    }

    /// Indices `j ≠ i` with `x_j·V ∩ x_i·V ≠ ∅`.
    pub fn overlapping_cells(&self, i: usize, cell: &CellBox) -> Vec<usize> {
        let p = self.points[i];
        let ai = big_a(p);
        let mut v = self.near(ai.ln(), big_b(p), 2.0 * cell.log_alpha, |big| (big + ai) * cell.shear);
        v.retain(|&j| j != i);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub separated: bool,
    pub dense: bool,
    pub v_squared_in_u: bool,
    pub overlapping_pairs: usize,
    pub probes: usize,
    pub uncovered_probes: usize,
    /// Largest normalized distance `max(|Δ ln A|/ε, |ΔB|/(A_i η)) − 1` from an
    /// uncovered probe to the nearest cell; 0 when fully covered.
    pub max_uncovered_distance: f64,
}

impl LatticeReport {
    pub fn pass(&self) -> bool {
        self.separated && self.dense && self.v_squared_in_u
    }
}

/// Midpoint probes in `(log a, b)` over `window`.
pub fn probe_points(window: Window, n: usize) -> Vec<GroupElement> {
    let (ls, _) = crate::quad::midpoints(window.a_min.ln(), window.a_max.ln(), n);
    let (bs, _) = crate::quad::midpoints(-window.b_max, window.b_max, n);
    let mut out = Vec::with_capacity(n * n);
    for &l in &ls {
        for &b in &bs {
            out.push(GroupElement::new(l.exp(), b).expect("finite"));
        }
    }
    out
}

/// Separation of `x_i·V`, density of `x_i·U` on `n × n` probes of `probe_window`,
/// and `V·V ⊆ U`.
pub fn certify_lattice(lat: &Lattice, u: &CellBox, v: &CellBox, probe_window: Window, n: usize) -> LatticeReport {
    let mut overlapping_pairs = 0;
    for i in 0..lat.len() {
        overlapping_pairs += lat.overlapping_cells(i, v).iter().filter(|&&j| j > i).count();
    }
    let probes = probe_points(probe_window, n);
    let mut uncovered = 0;
    let mut worst: f64 = 0.0;
    let wide = CellBox { log_alpha: 4.0 * u.log_alpha.max(1e-9), shear: 4.0 * u.shear.max(1e-9) };
    for &x in &probes {
        if lat.containing_cells(x, u).is_empty() {
            uncovered += 1;
            let (lx, bx) = (big_a(x).ln(), big_b(x));
            let mut best = f64::INFINITY;
            for i in lat.containing_cells(x, &wide) {
                let p = lat.points[i];
                let d = ((lx - big_a(p).ln()).abs() / u.log_alpha).max((bx - big_b(p)).abs() / (big_a(p) * u.shear));
                best = best.min(d - 1.0);
            }
            worst = worst.max(if best.is_finite() { best.max(0.0) } else { f64::INFINITY });
        }
    }
    LatticeReport {
        separated: overlapping_pairs == 0,
        dense: uncovered == 0,
        v_squared_in_u: u.contains_box(&v.square()),
        overlapping_pairs,
        probes: probes.len(),
        uncovered_probes: uncovered,
        max_uncovered_distance: worst,
    }
}

/// `exp(1 − 1/(1 − t²))` on `|t| < 1`, zero elsewhere.
pub fn bump(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

/// Quadrature of one cell `x_i·U`: nodes, left Haar weights and `ψ_i` at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CellQuadrature {
    pub nodes: Vec<GroupElement>,
    pub weights: Vec<f64>,
    pub psi: Vec<f64>,
}

/// `ψ_i = φ_i / Σ_j φ_j` with `φ_i(x) = h(ln(A/A_i)/ε) h((B − B_i)/(A_i η))`.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    lattice: Arc<Lattice>,
    cell: CellBox,
    quad: Vec<CellQuadrature>,
    integrals: Vec<f64>,
}

impl PartitionOfUnity {
    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn cell(&self) -> CellBox {
        self.cell
    }

    pub fn phi(&self, i: usize, x: GroupElement) -> f64 {
        let p = self.lattice.points[i];
        let ai = big_a(p);
        bump((big_a(x) / ai).ln() / self.cell.log_alpha) * bump((big_b(x) - big_b(p)) / (ai * self.cell.shear))
    }

    pub fn phi_sum(&self, x: GroupElement) -> f64 {
        self.lattice.containing_cells(x, &self.cell).iter().map(|&j| self.phi(j, x)).sum()
    }

    pub fn psi(&self, i: usize, x: GroupElement) -> f64 {
        let f = self.phi(i, x);
        if f == 0.0 {
            return 0.0;
        }
        f / self.phi_sum(x)
    }

    /// All nonzero `(i, ψ_i(x))`.
    pub fn psi_all(&self, x: GroupElement) -> Vec<(usize, f64)> {
        let idx = self.lattice.containing_cells(x, &self.cell);
        let vals: Vec<f64> = idx.iter().map(|&j| self.phi(j, x)).collect();
        let total: f64 = vals.iter().sum();
        if total == 0.0 {
            return Vec::new();
        }
        idx.into_iter().zip(vals).filter(|(_, v)| *v > 0.0).map(|(j, v)| (j, v / total)).collect()
    }

    pub fn cell_quadrature(&self, i: usize) -> &CellQuadrature {
        &self.quad[i]
    }

    /// `c_i = ∫ ψ_i(x) dx` against left Haar measure.
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }
}

/// Builds the partition and its cell quadratures (`n_quad²` Gauss nodes per
/// cell); fails if one of `probes × probes` points of `probe_window` lies in
/// no cell. Cells near the lattice window edge do not reach the edge itself,
/// so `probe_window` is usually a strictly smaller window.
pub fn build_partition(
    lat: Arc<Lattice>,
    cell: CellBox,
    n_quad: usize,
    probe_window: Window,
    probes: usize,
) -> Result<PartitionOfUnity> {
    if !(cell.log_alpha > 0.0 && cell.shear > 0.0) {
        return Err(invalid("partition needs a cell box with positive half-widths"));
    }
    let mut pou = PartitionOfUnity { lattice: lat.clone(), cell, quad: Vec::new(), integrals: Vec::new() };
    for x in probe_points(probe_window, probes) {
        if pou.phi_sum(x) == 0.0 {
            return Err(Error::Certification(format!(
                "probe (a={}, b={}) lies in no cell: lattice is not dense for this box",
                x.a(),
                x.b()
            )));
        }
    }
    let rule = gauss_legendre(n_quad)?;
    let mut quad = Vec::with_capacity(lat.len());
    let mut integrals = Vec::with_capacity(lat.len());
    for (i, &p) in lat.points.iter().enumerate() {
        let mut nodes = Vec::with_capacity(n_quad * n_quad);
        let mut weights = Vec::with_capacity(n_quad * n_quad);
        let mut psi = Vec::with_capacity(n_quad * n_quad);
        for (tl, wl) in rule.nodes.iter().zip(&rule.weights) {
            let lu = tl * cell.log_alpha;
            for (tb, wb) in rule.nodes.iter().zip(&rule.weights) {
                let bu = tb * cell.shear;
                let x = p.mul(&from_ab(lu, bu));
                let w = 0.5 * (-lu).exp() * wl * cell.log_alpha * wb * cell.shear;
                nodes.push(x);
                weights.push(w);
                psi.push(pou.psi(i, x));
            }
        }
        integrals.push(weights.iter().zip(&psi).map(|(w, s)| w * s).sum());
        quad.push(CellQuadrature { nodes, weights, psi });
    }
    pou.quad = quad;
    pou.integrals = integrals;
    Ok(pou)
}

/// `W_u^s(ux)/W_u^s(x)`.
pub fn oscillation_ratio(s: f64, u: GroupElement, x: GroupElement) -> Complex64 {
    wavelet_uu(s, u.mul(&x)) / wavelet_uu(s, x)
}

/// `sup_{|ζ| = 1} |(ᾱ_u + β̄_u ζ)^{-s} − 1|`, the supremum of the oscillation
/// ratio over the whole group (maximum principle in `ζ = β_x/ᾱ_x`).
pub fn oscillation_sup_circle(s: f64, u: GroupElement, n_theta: usize) -> f64 {
    let c = u.cayley();
    (0..n_theta)
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64);
            (crate::disc::cpow(c.alpha.conj() + c.beta.conj() * z, -s) - 1.0).norm()
        })
        .fold(0.0, f64::max)
}

/// `n × n` samples of the closed box, edges included.
pub fn box_samples(cell: &CellBox, n: usize) -> Vec<GroupElement> {
    let n = n.max(2);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let lu = cell.log_alpha * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
        for j in 0..n {
            let bu = cell.shear * (2.0 * j as f64 / (n - 1) as f64 - 1.0);
            out.push(from_ab(lu, bu));
        }
    }
    out
}

/// `max |W(ux)/W(x) − 1|` over box samples `u` and points `xs`.
pub fn oscillation_sup(s: f64, cell: &CellBox, xs: &[GroupElement], n_u: usize) -> f64 {
    let us = box_samples(cell, n_u);
    let mut worst: f64 = 0.0;
    for &u in &us {
        for &x in xs {
            worst = worst.max((oscillation_ratio(s, u, x) - 1.0).norm());
        }
    }
    worst
}

/// Search ladder for [`oscillation_radius`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationSearch {
    pub window: Window,
    /// `(log a, b)` midpoint samples of `x` per axis.
    pub x_samples: usize,
    /// Samples of `u` per axis of the candidate box.
    pub u_samples: usize,
    /// Largest half-width tried; the ladder halves it `steps` times.
    pub r_max: f64,
    pub steps: usize,
}

impl Default for OscillationSearch {
    fn default() -> Self {
        OscillationSearch { window: Window::DEFAULT, x_samples: 40, u_samples: 9, r_max: 2.0, steps: 30 }
    }
}

/// Largest `CellBox::symmetric(r)` on the dyadic ladder with
/// `|W(ux)/W(x) − 1| < eps` on the samples.
pub fn oscillation_radius(s: f64, eps: f64, search: &OscillationSearch) -> Result<CellBox> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("oscillation bound needs eps in (0, 1), got {eps}")));
    }
    let xs = probe_points(search.window, search.x_samples);
    let mut r = search.r_max;
    for _ in 0..=search.steps {
        let cell = CellBox::symmetric(r);
        if oscillation_sup(s, &cell, &xs, search.u_samples) < eps {
            return Ok(cell);
        }
        r *= 0.5;
    }
    Ok(CellBox { log_alpha: 0.0, shear: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryConstants {
    pub c1: f64,
    pub c2: f64,
    /// Whether `C1 |W(x)| ≤ |W(ux)| ≤ C2 |W(x)|` held on every sample.
    pub verified: bool,
}

/// `C1 = 1 − eps`, `C2 = 1 + eps`, re-verified on samples.
pub fn corollary_constants(cell: &CellBox, s: f64, eps: f64, xs: &[GroupElement], n_u: usize) -> CorollaryConstants {
    let (c1, c2) = (1.0 - eps, 1.0 + eps);
    let mut ok = true;
    for u in box_samples(cell, n_u) {
        for &x in xs {
            let r = wavelet_uu(s, u.mul(&x)).norm() / wavelet_uu(s, x).norm();
            if r < c1 * (1.0 - 1e-14) || r > c2 * (1.0 + 1e-14) {
                ok = false;
            }
        }
    }
    CorollaryConstants { c1, c2, verified: ok }
}

/// `K = W_u^s(u)/c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub s: f64,
    pub c: f64,
}

impl GroupField for Kernel {
    fn value(&self, g: GroupElement) -> Complex64 {
        wavelet_uu(self.s, g) / self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    T1,
    T2,
    T3,
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T1" | "t1" => Ok(Variant::T1),
            "T2" | "t2" => Ok(Variant::T2),
            "T3" | "t3" => Ok(Variant::T3),
            _ => Err(invalid(format!("unknown operator variant '{s}' (expected T1, T2 or T3)"))),
        }
    }
}

/// `T f = Σ_i L_i(f) G_i` with
/// `T1: L_i = f(x_i), G_i = ψ_i * K`;
/// `T2: L_i = c_i f(x_i), G_i = ℓ_{x_i} K`;
/// `T3: L_i = ∫ f ψ_i, G_i = ℓ_{x_i} K`.
#[derive(Debug, Clone)]
pub struct Discretization<'a> {
    pub variant: Variant,
    pub pou: &'a PartitionOfUnity,
    pub kernel: Kernel,
}

impl<'a> Discretization<'a> {
    pub fn new(variant: Variant, pou: &'a PartitionOfUnity, kernel: Kernel) -> Self {
        Discretization { variant, pou, kernel }
    }

    fn points(&self) -> &[GroupElement] {
        self.pou.lattice.points()
    }

    pub fn functional(&self, f: &(impl GroupField + ?Sized)) -> Vec<Complex64> {
        let pts = self.points();
        match self.variant {
            Variant::T1 => pts.iter().map(|&x| f.value(x)).collect(),
            Variant::T2 => pts.iter().zip(self.pou.integrals()).map(|(&x, c)| f.value(x) * *c).collect(),
            Variant::T3 => self
                .pou
                .quad
                .iter()
                .map(|q| {
                    q.nodes.iter().zip(&q.weights).zip(&q.psi).map(|((&x, w), p)| f.value(x) * (w * p)).sum()
                })
                .collect(),
        }
    }

    pub fn generator(&self, i: usize, y: GroupElement) -> Complex64 {
        match self.variant {
            Variant::T1 => {
                let q = &self.pou.quad[i];
                q.nodes
                    .iter()
                    .zip(&q.weights)
                    .zip(&q.psi)
                    .map(|((x, w), p)| self.kernel.value(x.inv().mul(&y)) * (w * p))
                    .sum()
            }
            Variant::T2 | Variant::T3 => self.kernel.value(self.points()[i].inv().mul(&y)),
        }
    }

    /// `Σ_i coeffs_i G_i(y)` for each `y`, summed in lattice order.
    pub fn synthesize_at(&self, coeffs: &[Complex64], ys: &[GroupElement]) -> Vec<Complex64> {
        let active: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i].norm_sqr() > 0.0).collect();
        ys.iter()
            .map(|&y| active.iter().map(|&i| coeffs[i] * self.generator(i, y)).sum())
            .collect()
    }

    /// Row-major `A_{ik} = L_i(G_k)`.
    pub fn gram(&self) -> Vec<Complex64> {
        let n = self.points().len();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        match self.variant {
            Variant::T1 => {
                for k in 0..n {
                    for (i, &x) in self.points().iter().enumerate() {
                        a[i * n + k] = self.generator(k, x);
                    }
                }
            }
            Variant::T2 => {
                let inv: Vec<GroupElement> = self.points().iter().map(|x| x.inv()).collect();
                for (i, &x) in self.points().iter().enumerate() {
                    let ci = self.pou.integrals()[i];
                    for k in 0..n {
                        a[i * n + k] = self.kernel.value(inv[k].mul(&x)) * ci;
                    }
                }
            }
            Variant::T3 => {
                let inv: Vec<GroupElement> = self.points().iter().map(|x| x.inv()).collect();
                for i in 0..n {
                    let q = &self.pou.quad[i];
                    for k in 0..n {
                        a[i * n + k] = q
                            .nodes
                            .iter()
                            .zip(&q.weights)
                            .zip(&q.psi)
                            .map(|((x, w), p)| self.kernel.value(inv[k].mul(x)) * (w * p))
                            .sum();
                    }
                }
            }
        }
        a
    }

    /// `T F` on the nodes of `grid`.
    pub fn apply(&self, f: &(impl GroupField + ?Sized), grid: Arc<GroupGrid>) -> GridFunction1G {
        let coeffs = self.functional(f);
        let values = self.synthesize_at(&coeffs, grid.nodes());
        GridFunction1G::new(grid, values).expect("matching length")
    }
}

/// Empirical `max ‖F * |K|‖_{L^p_r} / ‖F‖_{L^p_r}` over probe functions.
pub fn estimate_dp(probes: &[GridFunction1G], kernel: &Kernel, p: f64, r: f64) -> Result<f64> {
    let abs_k = |g: GroupElement| Complex64::new(kernel.value(g).norm(), 0.0);
    let mut worst: f64 = 0.0;
    for f in probes {
        let n = lp_r_norm(f, p, r)?;
        if n == 0.0 {
            continue;
        }
        let conv = crate::affine::convolve(&f.map(|v| Complex64::new(v.norm(), 0.0)), &abs_k);
        worst = worst.max(lp_r_norm(&conv, p, r)? / n);
    }
    Ok(worst)
}

/// The right-hand side whose preimage under `T` is sought.
pub enum Target<'t> {
    /// An arbitrary field.
    Field(&'t dyn GroupField),
    /// `Σ_i coeffs_i G_i`, already in the range of the generators.
    Span(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannLog {
    /// `‖F − T S_m‖ / ‖F‖` on the evaluation grid, `m = 0..=iters`.
    pub residuals: Vec<f64>,
    /// `‖(I − T)F‖ / ‖F‖`.
    pub q_first: f64,
    /// `exp(slope)` of the least-squares line through `ln residual`, iterations 2..=15.
    pub q_fit: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone)]
pub struct NeumannResult {
    /// `S = mu·F + Σ nu_i G_i`.
    pub mu: f64,
    pub nu: Vec<Complex64>,
    pub approx: GridFunction1G,
    pub log: NeumannLog,
}

/// Least-squares fit of `ln y` against the index over `range`; `(exp(slope), R²)`.
pub fn log_linear_fit(ys: &[f64], lo: usize, hi: usize) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = (lo..=hi.min(ys.len().saturating_sub(1)))
        .filter(|&i| ys[i] > 0.0)
        .map(|i| (i as f64, ys[i].ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope.exp(), r2)
}

/// Truncated Neumann series `S = Σ_{m=0}^{iters} (I − T)^m F`.
///
/// The series is carried in coefficient space: every `S_m` equals
/// `mu F + Σ nu_i G_i`, and `T S_m = Σ_i (mu L_i(F) + (A nu)_i) G_i`.
/// Residuals are measured in `L^p_r` on `eval`. Refuses when the measured
/// contraction `‖(I − T)F‖/‖F‖` is at least 1 or when the residual grows in two
/// consecutive iterations.
pub fn neumann_invert(
    disc: &Discretization,
    target: Target,
    iters: usize,
    eval: Arc<GroupGrid>,
    p: f64,
    r: f64,
) -> Result<NeumannResult> {
    let n = disc.points().len();
    let ys = eval.nodes();
    let (lf, f_vals, span) = match &target {
        Target::Field(f) => (disc.functional(*f), ys.iter().map(|&y| f.value(y)).collect::<Vec<_>>(), None),
        Target::Span(c) => {
            if c.len() != n {
                return Err(Error::Grid(format!("{} coefficients for {} lattice points", c.len(), n)));
            }
            (Vec::new(), disc.synthesize_at(c, ys), Some(c.clone()))
        }
    };
    let norm_of = |v: Vec<Complex64>| -> Result<f64> { lp_r_norm(&GridFunction1G::new(eval.clone(), v)?, p, r) };
    let f_norm = norm_of(f_vals.clone())?;
    if f_norm == 0.0 {
        return Ok(NeumannResult {
            mu: 1.0,
            nu: vec![Complex64::new(0.0, 0.0); n],
            approx: GridFunction1G::new(eval.clone(), f_vals)?,
            log: NeumannLog { residuals: vec![0.0; iters + 1], q_first: 0.0, q_fit: 0.0, r_squared: 1.0 },
        });
    }
    let a = disc.gram();
    let matvec = |v: &[Complex64]| -> Vec<Complex64> {
        (0..n).map(|i| a[i * n..(i + 1) * n].iter().zip(v).map(|(x, y)| x * y).sum()).collect()
    };
    // state: S = mu F + Σ nu G (Field), or S = Σ nu G with nu0 = target coefficients (Span)
    let mut mu = if span.is_some() { 0.0 } else { 1.0 };
    let mut nu = match &span {
        Some(c) => c.clone(),
        None => vec![Complex64::new(0.0, 0.0); n],
    };
    let ts_coeffs = |mu: f64, nu: &[Complex64]| -> Vec<Complex64> {
        let an = matvec(nu);
        if span.is_some() {
            an
        } else {
            an.iter().zip(&lf).map(|(x, l)| x + l * mu).collect()
        }
    };
    let residual_of = |tc: &[Complex64]| -> Result<f64> {
        let t_vals = disc.synthesize_at(tc, ys);
        let diff: Vec<Complex64> = f_vals.iter().zip(&t_vals).map(|(f, t)| f - t).collect();
        Ok(norm_of(diff)? / f_norm)
    };
    let mut residuals = Vec::with_capacity(iters + 1);
    let mut tc = ts_coeffs(mu, &nu);
    let q_first = residual_of(&tc)?;
    residuals.push(q_first);
    if !(q_first < 1.0) {
        return Err(Error::Refused(format!(
            "measured contraction ||(I-T)F||/||F|| = {q_first:.4} >= 1: lattice too coarse"
        )));
    }
    let mut grew = 0;
    for m in 1..=iters {
        // S_m = F + S_{m-1} − T S_{m-1}
        match &span {
            Some(c) => {
                for i in 0..n {
                    nu[i] = c[i] + nu[i] - tc[i];
                }
            }
            None => {
                for i in 0..n {
                    nu[i] -= tc[i];
                }
                mu += 1.0;
                // the F part of T S enters through L(F), and S − T S keeps mu F;
                // adding F raises mu by one while −mu L(F) moved into nu above
            }
        }
        tc = ts_coeffs(mu, &nu);
        let res = residual_of(&tc)?;
        if res > residuals[m - 1] {
            grew += 1;
            if grew >= 2 {
                return Err(Error::Refused(format!(
                    "residual grew in consecutive iterations ({:.3e} at iteration {m}): no contraction",
                    res
                )));
            }
        } else {
            grew = 0;
        }
        residuals.push(res);
    }
    let (q_fit, r_squared) = log_linear_fit(&residuals, 2, 15);
    let approx_vals: Vec<Complex64> = {
        let g = disc.synthesize_at(&nu, ys);
        f_vals.iter().zip(&g).map(|(f, g)| f * mu + g).collect()
    };
    Ok(NeumannResult {
        mu,
        nu,
        approx: GridFunction1G::new(eval, approx_vals)?,
        log: NeumannLog { residuals, q_first, q_fit, r_squared },
    })
}

/// Samples `λ_i` on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficients {
    pub lattice: Arc<Lattice>,
    pub values: Vec<Complex64>,
}

impl SampledCoefficients {
    pub fn sample(lattice: Arc<Lattice>, f: &(impl GroupField + ?Sized)) -> Self {
        let values = lattice.points().iter().map(|&x| f.value(x)).collect();
        SampledCoefficients { lattice, values }
    }

    /// `(Σ |λ_i w_r(x_i)|^p)^{1/p}`.
    pub fn seq_norm(&self, p: f64, r: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(invalid(format!("sequence norm needs p >= 1, got {p}")));
        }
        let s: f64 = self
            .lattice
            .points()
            .iter()
            .zip(&self.values)
            .map(|(&x, v)| (v.norm() * weight_w(r, x)).powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub a0: f64,
    pub b0: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub lattice: LatticeSummary,
    pub q: f64,
    pub final_error: Option<f64>,
    pub q_first: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    /// Relative error after each iteration, when a reference was supplied.
    pub errors: Vec<f64>,
}

/// Reconstructs `W_u^s f` from `λ_i = W_u^s f(x_i)`: forms
/// `Σ c_i λ_i ℓ_{x_i} K` and inverts `T2` by the Neumann series. With
/// `reference`, the relative `L^p_r` error against the closed form is reported
/// on `eval` (and tracked per iteration).
pub fn reconstruct(
    samples: &SampledCoefficients,
    pou: &PartitionOfUnity,
    kernel: Kernel,
    iters: usize,
    eval: Arc<GroupGrid>,
    p: f64,
    r: f64,
    reference: Option<&PowerSeries>,
) -> Result<(GridFunction1G, ReconstructionSummary)> {
    let disc = Discretization::new(Variant::T2, pou, kernel);
    let c0: Vec<Complex64> = samples.values.iter().zip(pou.integrals()).map(|(l, c)| l * *c).collect();
    let summary_lattice = {
        let (a0, b0) = pou.lattice().generator();
        LatticeSummary { a0, b0, count: pou.lattice().len() }
    };
    if c0.iter().all(|v| v.norm_sqr() == 0.0) {
        let zero = GridFunction1G::zeros(eval);
        let summary = ReconstructionSummary {
            lattice: summary_lattice,
            q: 0.0,
            final_error: reference.map(|_| 0.0),
            q_first: 0.0,
            r_squared: 1.0,
            residuals: vec![0.0; iters + 1],
            errors: Vec::new(),
        };
        return Ok((zero, summary));
    }
    let res = neumann_invert(&disc, Target::Span(c0.clone()), iters, eval.clone(), p, r)?;
    let mut errors = Vec::new();
    let final_error = match reference {
        Some(f) => {
            let exact = GridFunction1G::sample(eval.clone(), &|g: GroupElement| wavelet_closed_unchecked(kernel.s, f, g));
            let en = lp_r_norm(&exact, p, r)?;
            // replay the coefficient iteration for the per-iteration error curve
            let a = disc.gram();
            let n = c0.len();
            let mut nu = c0.clone();
            for m in 0..=iters {
                if m > 0 {
                    let an: Vec<Complex64> =
                        (0..n).map(|i| a[i * n..(i + 1) * n].iter().zip(&nu).map(|(x, y)| x * y).sum()).collect();
                    for i in 0..n {
                        nu[i] = c0[i] + nu[i] - an[i];
                    }
                }
                let vals = disc.synthesize_at(&nu, eval.nodes());
                let diff: Vec<Complex64> = vals.iter().zip(exact.values()).map(|(x, y)| x - y).collect();
                errors.push(lp_r_norm(&GridFunction1G::new(eval.clone(), diff)?, p, r)? / en);
            }
            errors.last().copied()
        }
        None => None,
    };
    let summary = ReconstructionSummary {
        lattice: summary_lattice,
        q: res.log.q_fit,
        final_error,
        q_first: res.log.q_first,
        r_squared: res.log.r_squared,
        residuals: res.log.residuals.clone(),
        errors,
    };
    Ok((res.approx, summary))
}

/// Uniform `(log a, b)` evaluation grid on the inner half of `window`.
pub fn inner_eval_grid(window: Window, n_a: usize, n_b: usize) -> Result<Arc<GroupGrid>> {
    Ok(Arc::new(haar_grid(window.inner_half(), n_a, n_b)?))
}
