//! Fourier analysis for the bilinear form `B` on Rⁿ, cone-supported test
//! functions, Littlewood–Paley partitions subordinate to a Whitney cover,
//! Besov norms, the cone wavelet transform and the mixed `L^{p,q}_s` norms.
//!
//! Conventions. `f̃(w) = (2π)^{−n/2} ∫ f(x) e^{−iB(x,w)} dx`, realised on paired
//! grids with `Δx_i Δw_i N_i = 2π`; the discrete transform is unitary, so
//! Plancherel and the inverse round trip hold to rounding. Convolution obeys
//! `(f*g)~ = (2π)^{n/2} f̃ g̃`; this factor appears in [`convolve_via_fourier`]
//! and in [`besov_norm`] (through `f*ψ_j`), and the cone wavelet transform
//! carries it as `W_u f(h, ·) = (2π)^{n/2} γ^{n/2} (f̃ · conj(ũ∘A_h))^∨`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::atomic::bump;
use crate::cone::{
    cone_det, in_cone, invariant_distance, point_from_coords, ConePoint, CoordBox, IwasawaCoords, WhitneyCover,
};
use crate::error::{invalid, Error, Result};

/// Paired regular grids in x and w, `x_k = x0 + k Δx`, `w_m = w0 + m Δw`
/// per axis, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub sizes: Vec<usize>,
    pub x0: Vec<f64>,
    pub dx: Vec<f64>,
    pub w0: Vec<f64>,
    pub dw: Vec<f64>,
}

impl BoxGrid {
    pub fn new(sizes: Vec<usize>, x0: Vec<f64>, dx: Vec<f64>, w0: Vec<f64>, dw: Vec<f64>) -> Result<Self> {
        let n = sizes.len();
        if n == 0 || [x0.len(), dx.len(), w0.len(), dw.len()].iter().any(|&l| l != n) {
            return Err(Error::Grid("axis descriptors must all have the grid dimension".into()));
        }
        for i in 0..n {
            if !sizes[i].is_power_of_two() || sizes[i] < 2 {
                return Err(Error::Grid(format!("axis {i} size {} is not a power of two", sizes[i])));
            }
            let rel = dx[i] * dw[i] * sizes[i] as f64 / (2.0 * PI) - 1.0;
            if !(dx[i] > 0.0 && dw[i] > 0.0) || rel.abs() > 1e-12 {
                return Err(Error::Grid(format!("axis {i} is not paired: Δx Δw N = {}", dx[i] * dw[i] * sizes[i] as f64)));
            }
        }
        Ok(BoxGrid { sizes, x0, dx, w0, dw })
    }

    /// x-grid centred at the origin (`x = 0` is a node) and a w-grid of
    /// half-widths `w_half` centred at `w_centre`.
    pub fn for_spectrum(sizes: &[usize], w_centre: &[f64], w_half: &[f64]) -> Result<Self> {
        if w_centre.len() != sizes.len() || w_half.len() != sizes.len() {
            return Err(Error::Grid("w box does not match the grid dimension".into()));
        }
        let dw: Vec<f64> = sizes.iter().zip(w_half).map(|(&n, h)| 2.0 * h / n as f64).collect();
        let dx: Vec<f64> = sizes.iter().zip(&dw).map(|(&n, d)| 2.0 * PI / (n as f64 * d)).collect();
        let x0 = sizes.iter().zip(&dx).map(|(&n, d)| -((n / 2) as f64) * d).collect();
        let w0 = sizes.iter().zip(w_centre).zip(&dw).map(|((&n, c), d)| c - (n / 2) as f64 * d).collect();
        BoxGrid::new(sizes.to_vec(), x0, dx, w0, dw)
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.sizes[k];
            flat /= self.sizes[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.sizes).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn x_at(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(k, &i)| self.x0[k] + i as f64 * self.dx[k]).collect()
    }

    pub fn w_at(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(k, &i)| self.w0[k] + i as f64 * self.dw[k]).collect()
    }

    pub fn cell_x(&self) -> f64 {
        self.dx.iter().product()
    }

    pub fn cell_w(&self) -> f64 {
        self.dw.iter().product()
    }

    /// Whether the flat index lies on a face of the box.
    pub fn on_boundary(&self, flat: usize) -> bool {
        self.multi_index(flat).iter().zip(&self.sizes).any(|(&i, &n)| i == 0 || i + 1 == n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    X,
    W,
}

/// Complex samples on the x- or w-side of a [`BoxGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunctionN {
    grid: Arc<BoxGrid>,
    domain: Domain,
    values: Vec<Complex64>,
}

impl GridFunctionN {
    pub fn new(grid: Arc<BoxGrid>, domain: Domain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        Ok(GridFunctionN { grid, domain, values })
    }

    pub fn zeros(grid: Arc<BoxGrid>, domain: Domain) -> Self {
        let n = grid.len();
        GridFunctionN { grid, domain, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn sample(grid: Arc<BoxGrid>, domain: Domain, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|i| match domain {
                Domain::X => f(&grid.x_at(i)),
                Domain::W => f(&grid.w_at(i)),
            })
            .collect();
        GridFunctionN { grid, domain, values }
    }

    pub fn grid(&self) -> &Arc<BoxGrid> {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scale(&self, c: Complex64) -> Self {
        GridFunctionN { grid: self.grid.clone(), domain: self.domain, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn cell(&self) -> f64 {
        match self.domain {
            Domain::X => self.grid.cell_x(),
            Domain::W => self.grid.cell_w(),
        }
    }

    /// `(Σ |v|^p · cell)^{1/p}`.
    pub fn norm_p(&self, p: f64) -> Result<f64> {
        check_exponent("p", p)?;
        Ok((self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * self.cell()).powf(1.0 / p))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn check_exponent(name: &str, p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Range(format!("{name} must satisfy 1 <= {name} < inf, got {p}")));
    }
    Ok(())
}

/// Sign of the exponent `e^{±i x_k w_k}` in the forward transform: `+` on the
/// first `n − 1` axes, `−` on the last.
fn axis_sign(k: usize, n: usize) -> f64 {
    if k + 1 == n {
        -1.0
    } else {
        1.0
    }
}

fn transform(grid: &BoxGrid, values: &mut [Complex64], forward: bool) {
    let n = grid.dim();
    let mut planner = FftPlanner::<f64>::new();
    for k in 0..n {
        let len = grid.sizes[k];
        let stride: usize = grid.sizes[k + 1..].iter().product();
        let s = axis_sign(k, n) * if forward { 1.0 } else { -1.0 };
        let fft = planner.plan_fft(len, if s > 0.0 { FftDirection::Inverse } else { FftDirection::Forward });
        // forward: (from, to) = (x, w); inverse: (w, x)
        let (a0, da, b0, db) = if forward {
            (grid.x0[k], grid.dx[k], grid.w0[k], grid.dw[k])
        } else {
            (grid.w0[k], grid.dw[k], grid.x0[k], grid.dx[k])
        };
        let norm = da / (2.0 * PI).sqrt();
        let pre: Vec<Complex64> = (0..len).map(|i| Complex64::from_polar(1.0, s * i as f64 * da * b0)).collect();
        let post: Vec<Complex64> =
            (0..len).map(|m| Complex64::from_polar(norm, s * a0 * (b0 + m as f64 * db))).collect();
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let outer = values.len() / (len * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * len * stride + inner;
                for i in 0..len {
                    line[i] = values[base + i * stride] * pre[i];
                }
                fft.process(&mut line);
                for m in 0..len {
                    values[base + m * stride] = line[m] * post[m];
                }
            }
        }
    }
}

/// `f̃(w) = (2π)^{−n/2} ∫ f(x) e^{−iB(x,w)} dx` on the paired w-grid.
pub fn bfourier(f: &GridFunctionN) -> Result<GridFunctionN> {
    if f.domain != Domain::X {
        return Err(Error::Grid("bfourier expects an x-space function".into()));
    }
    let mut v = f.values.clone();
    transform(&f.grid, &mut v, true);
    GridFunctionN::new(f.grid.clone(), Domain::W, v)
}

pub fn bfourier_inv(f: &GridFunctionN) -> Result<GridFunctionN> {
    if f.domain != Domain::W {
        return Err(Error::Grid("bfourier_inv expects a w-space function".into()));
    }
    let mut v = f.values.clone();
    transform(&f.grid, &mut v, false);
    GridFunctionN::new(f.grid.clone(), Domain::X, v)
}

/// Per-axis index extent of `{|f| > tol · max|f|}`.
fn support_extent(f: &GridFunctionN, tol: f64) -> Vec<usize> {
    let g = &f.grid;
    let cut = tol * f.max_abs();
    let mut lo = g.sizes.clone();
    let mut hi = vec![0usize; g.dim()];
    for (i, v) in f.values.iter().enumerate() {
        if v.norm() > cut {
            for (k, &ix) in g.multi_index(i).iter().enumerate() {
                lo[k] = lo[k].min(ix);
                hi[k] = hi[k].max(ix);
            }
        }
    }
    lo.iter().zip(&hi).map(|(&l, &h)| if h >= l { h - l + 1 } else { 0 }).collect()
}

/// `f * g` through `(f*g)~ = (2π)^{n/2} f̃ g̃`. Rejects inputs whose supports
/// (values above 1e−12 of the maximum) could wrap around the periodic box.
pub fn convolve_via_fourier(f: &GridFunctionN, g: &GridFunctionN) -> Result<GridFunctionN> {
    if f.grid != g.grid || f.domain != Domain::X || g.domain != Domain::X {
        return Err(Error::Grid("convolution needs two x-space functions on the same grid".into()));
    }
    let (ef, eg) = (support_extent(f, 1e-12), support_extent(g, 1e-12));
    for k in 0..f.grid.dim() {
        if ef[k] + eg[k] > f.grid.sizes[k] {
            return Err(Error::Grid(format!(
                "supports along axis {k} span {} + {} nodes of {}: periodic wraparound",
                ef[k], eg[k], f.grid.sizes[k]
            )));
        }
    }
    let (ft, gt) = (bfourier(f)?, bfourier(g)?);
    let c = (2.0 * PI).powf(f.grid.dim() as f64 / 2.0);
    let prod = ft.values.iter().zip(&gt.values).map(|(a, b)| a * b * c).collect();
    bfourier_inv(&GridFunctionN::new(f.grid.clone(), Domain::W, prod)?)
}

/// `h(d(w0, w)/width)` with `h(τ) = exp(1 − 1/(1 − τ²))`, zero off the cone.
pub fn ball_bump(centre: &ConePoint, width: f64, w: &[f64]) -> f64 {
    if !in_cone(w) {
        return 0.0;
    }
    let p = ConePoint::new(w.to_vec()).expect("checked membership");
    bump(invariant_distance(centre, &p) / width)
}

/// `f` with `f̃` a smooth bump supported in the invariant ball `B_width(w0)`.
#[derive(Debug, Clone)]
pub struct ConeTestFunction {
    pub centre: IwasawaCoords,
    pub width: f64,
    pub spectrum: GridFunctionN,
    pub x: GridFunctionN,
}

impl ConeTestFunction {
    pub fn scaled(&self, c: f64) -> ConeTestFunction {
        ConeTestFunction {
            centre: self.centre.clone(),
            width: self.width,
            spectrum: self.spectrum.scale(Complex64::new(c, 0.0)),
            x: self.x.scale(Complex64::new(c, 0.0)),
        }
    }
}

pub fn make_cone_test_function(grid: Arc<BoxGrid>, centre: &IwasawaCoords, width: f64) -> Result<ConeTestFunction> {
    if !(width > 0.0) {
        return Err(invalid(format!("bump width must be > 0, got {width}")));
    }
    if centre.dim() != grid.dim() || !(centre.gamma > 0.0) {
        return Err(invalid("bump centre does not match the grid dimension"));
    }
    let w0 = point_from_coords(centre);
    let spectrum = GridFunctionN::sample(grid.clone(), Domain::W, |w| Complex64::new(ball_bump(&w0, width, w), 0.0));
    let mut inside = 0;
    for (i, v) in spectrum.values.iter().enumerate() {
        if v.norm() > 0.0 {
            inside += 1;
            if grid.on_boundary(i) {
                return Err(Error::Domain(format!("bump at {centre:?} width {width} leaks out of the w-grid")));
            }
            if !in_cone(&grid.w_at(i)) {
                return Err(Error::Domain("bump leaks outside the cone".into()));
            }
        }
    }
    if inside == 0 {
        return Err(Error::Domain(format!("bump at {centre:?} width {width} contains no w-grid node")));
    }
    let x = bfourier_inv(&spectrum)?;
    Ok(ConeTestFunction { centre: centre.clone(), width, spectrum, x })
}

/// Smooth step: 1 on `τ ≤ 1`, 0 on `τ ≥ 2`.
pub fn lp_step(tau: f64) -> f64 {
    let g = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (a, b) = (g(2.0 - tau), g(tau - 1.0));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// `ψ̃_j = φ_j / Σ φ_k`, `φ_j(w) = χ(d(w_j, w)/δ)`, stored sparsely per `j`.
#[derive(Debug, Clone)]
pub struct LPDecomposition {
    pub cover: Arc<WhitneyCover>,
    grid: Arc<BoxGrid>,
    multipliers: Vec<Vec<(usize, f64)>>,
    covered: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCertificate {
    /// `max |Σ_j ψ̃_j − 1|` over nodes with `Φ > 0`.
    pub sum_defect: f64,
    pub covered_nodes: usize,
    pub range_ok: bool,
    pub support_ok: bool,
    /// Smallest `ψ̃_j` on the `B_δ(w_j)` nodes (at least `1/N` by construction).
    pub min_on_delta_ball: f64,
    /// Nodes of `B_{δ/2}(w_j)` where `ψ̃_j < 1`, summed over `j`.
    pub plateau_defects: usize,
    pub plateau_nodes: usize,
}

impl LPDecomposition {
    pub fn grid(&self) -> &Arc<BoxGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }

    pub fn multiplier(&self, j: usize) -> &[(usize, f64)] {
        &self.multipliers[j]
    }

    pub fn is_covered(&self, flat: usize) -> bool {
        self.covered[flat]
    }

    pub fn dense_multiplier(&self, j: usize) -> GridFunctionN {
        let mut g = GridFunctionN::zeros(self.grid.clone(), Domain::W);
        for &(i, v) in &self.multipliers[j] {
            g.values[i] = Complex64::new(v, 0.0);
        }
        g
    }

    pub fn certify(&self) -> PartitionCertificate {
        let delta = self.cover.delta;
        let mut sum = vec![0.0; self.grid.len()];
        let mut range_ok = true;
        let mut support_ok = true;
        let mut min_on = f64::INFINITY;
        let (mut defects, mut plateau) = (0, 0);
        for (j, m) in self.multipliers.iter().enumerate() {
            for &(i, v) in m {
                sum[i] += v;
                range_ok &= (0.0..=1.0 + 1e-15).contains(&v);
                let d = self.cover.distance_to(j, &ConePoint::new(self.grid.w_at(i)).expect("cone node"));
                support_ok &= d < 2.0 * delta;
                if d <= delta {
                    min_on = min_on.min(v);
                }
                if d < 0.5 * delta {
                    plateau += 1;
                    if v < 1.0 - 1e-12 {
                        defects += 1;
                    }
                }
            }
        }
        let defect = sum
            .iter()
            .zip(&self.covered)
            .filter(|(_, &c)| c)
            .map(|(s, _)| (s - 1.0).abs())
            .fold(0.0, f64::max);
        PartitionCertificate {
            sum_defect: defect,
            covered_nodes: self.covered.iter().filter(|&&c| c).count(),
            range_ok,
            support_ok,
            min_on_delta_ball: min_on,
            plateau_defects: defects,
            plateau_nodes: plateau,
        }
    }
}

fn coords_in_box(co: &IwasawaCoords, region: &CoordBox) -> bool {
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    within(co.gamma, region.gamma) && within(co.t, region.t) && co.c.iter().zip(&region.c).all(|(&v, &r)| within(v, r))
}

/// Evaluates the partition on the w-grid nodes inside the cone. Fails when a
/// node whose coordinates lie in the cover region has `Φ = 0`.
pub fn make_lp_partition(cover: Arc<WhitneyCover>, grid: Arc<BoxGrid>) -> Result<LPDecomposition> {
    if cover.points.first().map(|p| p.dim()) != Some(grid.dim()) {
        return Err(Error::Grid("cover and grid dimensions differ".into()));
    }
    let delta = cover.delta;
    let mut multipliers = vec![Vec::new(); cover.len()];
    let mut covered = vec![false; grid.len()];
    let mut vals = Vec::with_capacity(cover.len());
    for i in 0..grid.len() {
        let w = grid.w_at(i);
        if !in_cone(&w) {
            continue;
        }
        let p = ConePoint::new(w).expect("cone node");
        vals.clear();
        let mut total = 0.0;
        for j in 0..cover.len() {
            let v = lp_step(cover.distance_to(j, &p) / delta);
            if v > 0.0 {
                vals.push((j, v));
                total += v;
            }
        }
        if total > 0.0 {
            covered[i] = true;
            for &(j, v) in &vals {
                multipliers[j].push((i, v / total));
            }
        } else if coords_in_box(&crate::cone::coords_from_point(&p), &cover.region) {
            return Err(Error::Certification(format!("w = {:?} lies in the cover region but in no ball", p.as_slice())));
        }
    }
    Ok(LPDecomposition { cover, grid, multipliers, covered })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovReport {
    pub norm: f64,
    /// Per-piece `‖f * ψ_j‖_p`.
    pub pieces: Vec<f64>,
    /// Share of `Σ|f̃|²` on nodes outside every ball.
    pub outside_mass: f64,
    pub warnings: Vec<String>,
}

/// How `‖f * ψ_j‖_p` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormPath {
    /// Discrete Plancherel for `p = 2`, inverse transform otherwise.
    Auto,
    /// Always through the inverse transform.
    Fourier,
}

/// `(Σ_j det(w_j)^{−σ} ‖f * ψ_j‖_p^q)^{1/q}`.
pub fn besov_norm(f: &ConeTestFunction, p: f64, q: f64, sigma: f64, lp: &LPDecomposition) -> Result<f64> {
    Ok(besov_report(&f.spectrum, p, q, sigma, lp, NormPath::Auto)?.norm)
}

pub fn besov_report(
    spectrum: &GridFunctionN,
    p: f64,
    q: f64,
    sigma: f64,
    lp: &LPDecomposition,
    path: NormPath,
) -> Result<BesovReport> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    if spectrum.domain != Domain::W || **spectrum.grid() != *lp.grid {
        return Err(Error::Grid("spectrum must live on the partition's w-grid".into()));
    }
    let grid = &lp.grid;
    let c = (2.0 * PI).powf(grid.dim() as f64 / 2.0);
    let total: f64 = spectrum.values.iter().map(|v| v.norm_sqr()).sum();
    let outside: f64 =
        spectrum.values.iter().enumerate().filter(|(i, _)| !lp.covered[*i]).map(|(_, v)| v.norm_sqr()).sum();
    let outside_mass = if total > 0.0 { outside / total } else { 0.0 };
    let mut warnings = Vec::new();
    if outside_mass > 1e-3 {
        warnings.push(format!("{:.3}% of the spectrum lies outside the covered region", 100.0 * outside_mass));
    }
    let mut pieces = Vec::with_capacity(lp.len());
    let mut sum = 0.0;
    for j in 0..lp.len() {
        let m = &lp.multipliers[j];
        let piece = if p == 2.0 && path == NormPath::Auto {
            (m.iter().map(|&(i, v)| (spectrum.values[i] * (v * c)).norm_sqr()).sum::<f64>() * grid.cell_w()).sqrt()
        } else {
            if m.iter().all(|&(i, _)| spectrum.values[i].norm_sqr() == 0.0) {
                pieces.push(0.0);
                continue;
            }
            let mut g = GridFunctionN::zeros(grid.clone(), Domain::W);
            for &(i, v) in m {
                g.values[i] = spectrum.values[i] * (v * c);
            }
            bfourier_inv(&g)?.norm_p(p)?
        };
        pieces.push(piece);
        let det = lp.cover.coords[j].gamma;
        sum += det.powf(-sigma) * piece.powf(q);
    }
    Ok(BesovReport { norm: sum.powf(1.0 / q), pieces, outside_mass, warnings })
}

/// Fourier-side description of an analysing vector `u`.
pub trait WaveletSpectrum {
    fn eval(&self, w: &[f64]) -> Complex64;
}

/// `ũ(w) = h(d(e, w)/width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSpectrum {
    pub centre: ConePoint,
    pub width: f64,
}

impl BumpSpectrum {
    pub fn at_e(n: usize, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(invalid(format!("width must be > 0, got {width}")));
        }
        Ok(BumpSpectrum { centre: ConePoint::e(n)?, width })
    }
}

impl WaveletSpectrum for BumpSpectrum {
    fn eval(&self, w: &[f64]) -> Complex64 {
        Complex64::new(ball_bump(&self.centre, self.width, w), 0.0)
    }
}

/// Grid samples of `ũ`, evaluated off-grid by multilinear interpolation.
#[derive(Debug, Clone)]
pub struct GridSpectrum {
    values: GridFunctionN,
}

impl GridSpectrum {
    /// Rejects spectra that are nonzero on the box faces (the dilates would
    /// be cut off) or off the cone.
    pub fn new(values: GridFunctionN) -> Result<Self> {
        if values.domain != Domain::W {
            return Err(Error::Grid("wavelet spectrum must be a w-space function".into()));
        }
        for (i, v) in values.values.iter().enumerate() {
            if v.norm() > 0.0 && (values.grid.on_boundary(i) || !in_cone(&values.grid.w_at(i))) {
                return Err(Error::Domain("wavelet spectrum touches the grid boundary or leaves the cone".into()));
            }
        }
        Ok(GridSpectrum { values })
    }
}

impl WaveletSpectrum for GridSpectrum {
    fn eval(&self, w: &[f64]) -> Complex64 {
        let g = &self.values.grid;
        let n = g.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let s = (w[k] - g.w0[k]) / g.dw[k];
            if !(s >= 0.0) || s > (g.sizes[k] - 1) as f64 {
                return Complex64::new(0.0, 0.0);
            }
            let i = (s.floor() as usize).min(g.sizes[k] - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; n];
        for corner in 0..(1usize << n) {
            let mut wgt = 1.0;
            for k in 0..n {
                let bit = corner >> k & 1;
                idx[k] = base[k] + bit;
                wgt *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if wgt != 0.0 {
                acc += self.values.values[g.flat_index(&idx)] * wgt;
            }
        }
        acc
    }
}

/// `A_h w = γ (a_t n_c)⁻¹ w`.
pub fn dilate(co: &IwasawaCoords, w: &[f64]) -> Vec<f64> {
    co.lorentz().inverse().apply(w).into_iter().map(|v| v * co.gamma).collect()
}

/// `W_u f(h, ·)` on the x-grid (as a function of `b`).
pub fn cone_wavelet(u: &dyn WaveletSpectrum, f: &ConeTestFunction, co: &IwasawaCoords) -> Result<GridFunctionN> {
    let spec = &f.spectrum;
    let n = spec.grid.dim();
    if co.dim() != n {
        return Err(invalid("coordinates do not match the grid dimension"));
    }
    let c = (2.0 * PI).powf(n as f64 / 2.0) * co.gamma.powf(n as f64 / 2.0);
    let lin = co.lorentz().inverse();
    let mut g = GridFunctionN::zeros(spec.grid.clone(), Domain::W);
    for (i, v) in spec.values.iter().enumerate() {
        if v.norm_sqr() > 0.0 {
            let w: Vec<f64> = lin.apply(&spec.grid.w_at(i)).into_iter().map(|x| x * co.gamma).collect();
            g.values[i] = v * u.eval(&w).conj() * c;
        }
    }
    bfourier_inv(&g)
}

/// Midpoint grid on an H-region, uniform in `(ln γ, t, c)`, with weights for
/// `dγ dt dc / γ^{n+1}` (the `γ` of `dγ = γ d ln γ` folded in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HGrid {
    pub region: CoordBox,
    pub per_axis: usize,
    pub nodes: Vec<IwasawaCoords>,
    pub weights: Vec<f64>,
}

pub fn h_grid(region: &CoordBox, per_axis: usize) -> Result<HGrid> {
    region.validate()?;
    if per_axis == 0 {
        return Err(invalid("H-grid needs at least one node per axis"));
    }
    let n = region.dim();
    let mut vol = 1.0;
    for (lo, hi) in std::iter::once((region.gamma.0.ln(), region.gamma.1.ln()))
        .chain(std::iter::once(region.t))
        .chain(region.c.iter().copied())
    {
        if hi > lo {
            vol *= (hi - lo) / per_axis as f64;
        }
    }
    let nodes = region.grid(per_axis);
    let weights = nodes.iter().map(|co| vol * co.gamma.powi(-(n as i32))).collect();
    Ok(HGrid { region: region.clone(), per_axis, nodes, weights })
}

/// The cone wavelet transform on an H-grid: either every `b`-slice, or only
/// `∫ |W(h, b)|² db` per node (computed by Plancherel).
#[derive(Debug, Clone)]
pub struct ConeWaveletField {
    pub h: HGrid,
    slices: Slices,
}

#[derive(Debug, Clone)]
enum Slices {
    Full(Vec<GridFunctionN>),
    SquareIntegrals(Vec<f64>),
}

impl ConeWaveletField {
    /// A field given by explicit slices (one per H node).
    pub fn from_slices(h: HGrid, slices: Vec<GridFunctionN>) -> Result<Self> {
        if slices.len() != h.nodes.len() || slices.iter().any(|s| s.domain != Domain::X) {
            return Err(Error::Grid("need one x-space slice per H node".into()));
        }
        Ok(ConeWaveletField { h, slices: Slices::Full(slices) })
    }

    /// `∫ |W(h, b)|^p db` per node.
    pub fn slice_integrals(&self, p: f64) -> Result<Vec<f64>> {
        match &self.slices {
            Slices::Full(v) => v.iter().map(|s| Ok(s.norm_p(p)?.powf(p))).collect(),
            Slices::SquareIntegrals(v) if p == 2.0 => Ok(v.clone()),
            Slices::SquareIntegrals(_) => Err(invalid("field holds only L2 slice integrals; recompute with p")),
        }
    }
}

/// Computes the transform of `f` on all nodes of `h`. For `p = 2` only the
/// slice integrals are kept, via `∫|W|² db = (2π)^n γ^n Σ |f̃ ũ(A_h w)|² Δw`.
pub fn cone_wavelet_field(u: &dyn WaveletSpectrum, f: &ConeTestFunction, h: &HGrid, p: f64) -> Result<ConeWaveletField> {
    check_exponent("p", p)?;
    if p == 2.0 {
        let spec = &f.spectrum;
        let n = spec.grid.dim();
        let support: Vec<(Vec<f64>, f64)> = spec
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(i, v)| (spec.grid.w_at(i), v.norm_sqr()))
            .collect();
        let cell = spec.grid.cell_w();
        let ints = h
            .nodes
            .iter()
            .map(|co| {
                let lin = co.lorentz().inverse();
                let s: f64 = support
                    .iter()
                    .map(|(w, a)| {
                        let y: Vec<f64> = lin.apply(w).into_iter().map(|x| x * co.gamma).collect();
                        a * u.eval(&y).norm_sqr()
                    })
                    .sum();
                (2.0 * PI * co.gamma).powi(n as i32) * s * cell
            })
            .collect();
        return Ok(ConeWaveletField { h: h.clone(), slices: Slices::SquareIntegrals(ints) });
    }
    let slices = h.nodes.iter().map(|co| cone_wavelet(u, f, co)).collect::<Result<Vec<_>>>()?;
    Ok(ConeWaveletField { h: h.clone(), slices: Slices::Full(slices) })
}

/// `(∫_H (∫ |W(h, b)|^p db)^{q/p} γ^s dγ dt dc / γ^{n+1})^{1/q}`.
pub fn lpqs_norm(w: &ConeWaveletField, p: f64, q: f64, s: f64) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let ints = w.slice_integrals(p)?;
    let sum: f64 = ints
        .iter()
        .zip(&w.h.nodes)
        .zip(&w.h.weights)
        .map(|((i, co), wt)| i.powf(q / p) * co.gamma.powf(s) * wt)
        .sum();
    Ok(sum.powf(1.0 / q))
}

/// `C_u = ∫_Λ |ũ(w)|² det(w)^{2(1−n)} (w_n − w_1)^{n−2} dw` on the w-grid.
pub fn admissibility_cu(u: &dyn WaveletSpectrum, grid: &BoxGrid) -> f64 {
    let n = grid.dim();
    let mut s = 0.0;
    for i in 0..grid.len() {
        let w = grid.w_at(i);
        if !in_cone(&w) {
            continue;
        }
        let a = u.eval(&w).norm_sqr();
        if a > 0.0 {
            let det = cone_det(&ConePoint::new(w.clone()).expect("cone node"));
            s += a * det.powf(2.0 * (1.0 - n as f64)) * (w[n - 1] - w[0]).powi(n as i32 - 2);
        }
    }
    s * grid.cell_w()
}

/// `∫_H |ũ(A_h w)|² dγ dt dc / γ` for one `w` (independent of `w` and equal
/// to `C_u` when the H-region holds the whole orbit support).
pub fn orbit_integral(u: &dyn WaveletSpectrum, w: &[f64], h: &HGrid) -> f64 {
    let n = w.len() as i32;
    h.nodes
        .iter()
        .zip(&h.weights)
        .map(|(co, wt)| u.eval(&dilate(co, w)).norm_sqr() * wt * co.gamma.powi(n))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl EquivalenceParams {
    /// `σ = s + nq/2 − n`.
    pub fn sigma(&self) -> f64 {
        self.s + self.n as f64 * self.q / 2.0 - self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRow {
    pub id: usize,
    pub besov: f64,
    pub lpqs: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRun {
    pub per_function: Vec<FunctionRow>,
    #[serde(rename = "C_emp")]
    pub c_emp: f64,
    pub warnings: Vec<String>,
}

/// `ρ(f) = ‖W_u f‖_{L^{p,q}_s} / ‖f‖_{B^{p,q}_σ}` over a family and
/// `C_emp = max ρ / min ρ`.
pub fn equivalence_run(
    params: &EquivalenceParams,
    family: &[ConeTestFunction],
    lp: &LPDecomposition,
    u: &dyn WaveletSpectrum,
    h: &HGrid,
) -> Result<EquivalenceRun> {
    check_exponent("p", params.p)?;
    check_exponent("q", params.q)?;
    if family.is_empty() {
        return Err(invalid("empty test family"));
    }
    let mut rows = Vec::with_capacity(family.len());
    let mut warnings = Vec::new();
    for (id, f) in family.iter().enumerate() {
        let b = besov_report(&f.spectrum, params.p, params.q, params.sigma(), lp, NormPath::Auto)?;
        warnings.extend(b.warnings.iter().map(|w| format!("f{id}: {w}")));
        let field = cone_wavelet_field(u, f, h, params.p)?;
        let l = lpqs_norm(&field, params.p, params.q, params.s)?;
        if b.norm == 0.0 {
            return Err(Error::Domain(format!("f{id} has zero Besov norm")));
        }
        rows.push(FunctionRow { id, besov: b.norm, lpqs: l, rho: l / b.norm });
    }
    let max = rows.iter().map(|r| r.rho).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.rho).fold(f64::INFINITY, f64::min);
    Ok(EquivalenceRun { per_function: rows, c_emp: max / min, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub params: EquivalenceParams,
    pub per_function: Vec<FunctionRow>,
    #[serde(rename = "C_emp")]
    pub c_emp: f64,
    /// `|C_emp(2m) − C_emp(m)| / C_emp(m)` for an H-grid with twice the nodes per axis.
    pub refinement_drift: f64,
    /// Same comparison against an independently generated cover, when given.
    pub cover_drift: Option<f64>,
    pub c_emp_refined: f64,
    pub c_emp_alt_cover: Option<f64>,
    /// Range of `‖f‖_B(cover) / ‖f‖_B(alternative cover)` over the family.
    pub besov_cover_ratio: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Runs the family on `h`, on `h` refined twice per axis and, optionally, with
/// a second partition built from an independent cover.
pub fn equivalence_experiment(
    params: &EquivalenceParams,
    family: &[ConeTestFunction],
    lp: &LPDecomposition,
    alt_lp: Option<&LPDecomposition>,
    u: &dyn WaveletSpectrum,
    h: &HGrid,
) -> Result<EquivalenceReport> {
    let base = equivalence_run(params, family, lp, u, h)?;
    let fine = h_grid(&h.region, 2 * h.per_axis)?;
    let refined = equivalence_run(params, family, lp, u, &fine)?;
    let alt = alt_lp.map(|a| equivalence_run(params, family, a, u, h)).transpose()?;
    let drift = |c: f64| (c - base.c_emp).abs() / base.c_emp;
    let ratio = alt.as_ref().map(|a| {
        base.per_function.iter().zip(&a.per_function).map(|(x, y)| x.besov / y.besov).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), r| (lo.min(r), hi.max(r)),
        )
    });
    Ok(EquivalenceReport {
        params: *params,
        per_function: base.per_function.clone(),
        c_emp: base.c_emp,
        refinement_drift: drift(refined.c_emp),
        cover_drift: alt.as_ref().map(|a| drift(a.c_emp)),
        c_emp_refined: refined.c_emp,
        c_emp_alt_cover: alt.as_ref().map(|a| a.c_emp),
        besov_cover_ratio: ratio,
        warnings: base.warnings,
    })
}

/// Centres `(γ, t, c)` and widths of the default six-bump family (n = 3).
pub const DEFAULT_FAMILY: [((f64, f64, f64), f64); 6] = [
    ((1.0, 0.0, 0.0), 0.4),
    ((0.7, 0.4, 0.3), 0.35),
    ((1.4, -0.3, -0.4), 0.45),
    ((1.0, 0.5, -0.5), 0.3),
    ((0.8, -0.5, 0.5), 0.4),
    ((1.2, 0.2, 0.6), 0.35),
];

pub fn default_family(grid: Arc<BoxGrid>) -> Result<Vec<ConeTestFunction>> {
    DEFAULT_FAMILY
        .iter()
        .map(|&((g, t, c), w)| make_cone_test_function(grid.clone(), &IwasawaCoords { gamma: g, t, c: vec![c] }, w))
        .collect()
}

/// Least-squares `N` in `log|f(x)| ≈ a − N log(1 + |x|²)` along the main
/// diagonal of the x-grid, from the centre node outward, over nodes with
/// `|f| > floor · max|f|`.
pub fn decay_exponent(f: &GridFunctionN, floor: f64) -> Result<f64> {
    if f.domain != Domain::X {
        return Err(Error::Grid("decay is measured on x-space samples".into()));
    }
    let g = &f.grid;
    let m = *g.sizes.iter().min().expect("nonempty grid");
    let cut = floor * f.max_abs();
    let mut pts = Vec::new();
    for k in 0..m / 2 {
        let idx: Vec<usize> = g.sizes.iter().map(|&n| n / 2 + k * n / m).collect();
        let i = g.flat_index(&idx);
        let v = f.values[i].norm();
        if v > cut && v > 0.0 {
            let r2: f64 = g.x_at(i).iter().map(|x| x * x).sum();
            pts.push(((1.0 + r2).ln(), v.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::Domain("too few diagonal samples above the floor".into()));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// Per-axis padding of the default spectrum box.
pub const DEFAULT_SPECTRUM_PAD: f64 = 0.3;

/// A `size`ⁿ grid whose w-box holds the default family (n = 3).
pub fn default_spectrum_grid(size: usize) -> Result<Arc<BoxGrid>> {
    let bumps: Vec<(IwasawaCoords, f64)> =
        DEFAULT_FAMILY.iter().map(|&((g, t, c), w)| (IwasawaCoords { gamma: g, t, c: vec![c] }, w)).collect();
    let (centre, half) = spectrum_box(&bumps, DEFAULT_SPECTRUM_PAD);
    Ok(Arc::new(BoxGrid::for_spectrum(&[size; 3], &centre, &half)?))
}

/// Exact per-axis range of the invariant ball `B_r(w0)`.
pub fn ball_extent(w0: &ConePoint, r: f64) -> Vec<(f64, f64)> {
    let n = w0.dim();
    let g0 = cone_det(w0);
    let y0: Vec<f64> = w0.as_slice().iter().map(|v| v / g0).collect();
    // unit hyperboloid ball of radius R about y0: y_k ∈ y0_k cosh R ± s_k sinh R
    let spread: Vec<f64> = (0..n)
        .map(|k| {
            let mut g = vec![0.0; n];
            g[k] = if k + 1 == n { 1.0 } else { -1.0 };
            let b = crate::cone::bform(&g, &y0).expect("same dimension");
            let gt: Vec<f64> = g.iter().zip(&y0).map(|(a, y)| a - b * y).collect();
            (-crate::cone::bform(&gt, &gt).expect("same dimension")).max(0.0).sqrt()
        })
        .collect();
    let mut ext = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    let steps = 2000;
    for i in 0..=steps {
        let rho = -r + 2.0 * r * i as f64 / steps as f64;
        let big_r = (r * r - rho * rho).max(0.0).sqrt();
        let scale = g0 * rho.exp();
        for k in 0..n {
            let (a, b) = (y0[k] * big_r.cosh(), spread[k] * big_r.sinh());
            ext[k].0 = ext[k].0.min(scale * (a - b));
            ext[k].1 = ext[k].1.max(scale * (a + b));
        }
    }
    ext
}

/// Centre and half-widths of the smallest axis-aligned w-box holding every
/// `B_r(w0)`, padded by `pad`.
pub fn spectrum_box(bumps: &[(IwasawaCoords, f64)], pad: f64) -> (Vec<f64>, Vec<f64>) {
    let n = bumps[0].0.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (co, r) in bumps {
        for (k, (a, b)) in ball_extent(&point_from_coords(co), *r).into_iter().enumerate() {
            lo[k] = lo[k].min(a);
            hi[k] = hi[k].max(b);
        }
    }
    let centre = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let half = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a) + pad).collect();
    (centre, half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_grid() -> Arc<BoxGrid> {
        Arc::new(BoxGrid::for_spectrum(&[16, 16, 16], &[0.0, 0.0, 0.0], &[8.0, 8.0, 8.0]).unwrap())
    }

    #[test]
    fn grid_pairing_is_enforced() {
        assert!(BoxGrid::new(vec![8], vec![0.0], vec![1.0], vec![0.0], vec![1.0]).is_err());
        assert!(BoxGrid::new(vec![6], vec![0.0], vec![1.0], vec![0.0], vec![2.0 * PI / 6.0]).is_err());
        let g = small_grid();
        let origin = g.flat_index(&[8, 8, 8]);
        assert_eq!(g.x_at(origin), vec![0.0; 3]);
    }

    #[test]
    fn gaussian_is_self_dual_in_modulus() {
        let g = Arc::new(BoxGrid::for_spectrum(&[32, 32, 32], &[0.0; 3], &[(2.0 * PI * 32.0).sqrt() / 2.0; 3]).unwrap());
        let f = GridFunctionN::sample(g.clone(), Domain::X, |x| {
            Complex64::new((-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp(), 0.0)
        });
        let ft = bfourier(&f).unwrap();
        for i in (0..g.len()).step_by(97) {
            let w = g.w_at(i);
            let want = (-w.iter().map(|v| v * v).sum::<f64>() / 2.0).exp();
            assert!((ft.values()[i].norm() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_transforms_to_zero() {
        let g = small_grid();
        let z = bfourier(&GridFunctionN::zeros(g, Domain::X)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn lp_step_shape() {
        assert_eq!(lp_step(0.5), 1.0);
        assert_eq!(lp_step(1.0), 1.0);
        assert_eq!(lp_step(2.0), 0.0);
        let mid = lp_step(1.5);
        assert_relative_eq!(mid, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn norm_rejects_bad_exponents() {
        let g = small_grid();
        let z = GridFunctionN::zeros(g, Domain::X);
        assert!(z.norm_p(0.5).is_err());
        assert!(z.norm_p(f64::INFINITY).is_err());
    }

    #[test]
    fn cu_of_zero_is_zero_and_scales_quadratically() {
        let g = Arc::new(BoxGrid::for_spectrum(&[32, 32, 32], &[0.0, 0.0, 1.2], &[1.2, 1.2, 1.2]).unwrap());
        let u = BumpSpectrum::at_e(3, 0.5).unwrap();
        let c1 = admissibility_cu(&u, &g);
        let raw = GridFunctionN::sample(g.clone(), Domain::W, |w| u.eval(w));
        let u3 = GridSpectrum::new(raw.scale(Complex64::new(3.0, 0.0))).unwrap();
        assert_relative_eq!(admissibility_cu(&u3, &g), 9.0 * c1, max_relative = 1e-12);
        let z = GridSpectrum::new(GridFunctionN::zeros(g.clone(), Domain::W)).unwrap();
        assert_eq!(admissibility_cu(&z, &g), 0.0);
    }
}
