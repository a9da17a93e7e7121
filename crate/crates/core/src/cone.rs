//! The forward light cone `Λ = {x ∈ Rⁿ : B(x, x) > 0, x_n > 0}` with
//! `B(x, y) = x_n y_n − x_{n−1} y_{n−1} − … − x_1 y_1`, the Iwasawa factors of
//! SO₀(n−1, 1), the simply transitive coordinates `x = γ a_t n_c e`, invariant
//! balls and Whitney covers.
//!
//! The invariant distance used throughout is
//! `d(w, x)² = (ln det y)² + artanh(|y_⊥|/y_n)²` with `y = h_w⁻¹ x`, a product
//! of the log-determinant line and the hyperbolic distance on `{det = 1}`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre;

pub fn bform(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(invalid(format!("bform needs equal nonzero dimensions, got {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    Ok(x[n - 1] * y[n - 1] - x[..n - 1].iter().zip(&y[..n - 1]).map(|(a, b)| a * b).sum::<f64>())
}

fn bform_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    x[n - 1] * y[n - 1] - x[..n - 1].iter().zip(&y[..n - 1]).map(|(a, b)| a * b).sum::<f64>()
}

pub fn in_cone(x: &[f64]) -> bool {
    x.len() >= 3 && x[x.len() - 1] > 0.0 && bform_unchecked(x, x) > 0.0
}

/// The base point `e = (0, …, 0, 1)`.
pub fn cone_e(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[n - 1] = 1.0;
    e
}

/// A point of `Λ`, `n ≥ 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    x: Vec<f64>,
}

impl ConePoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 3 {
            return Err(invalid(format!("cone dimension must be >= 3, got {}", x.len())));
        }
        if !in_cone(&x) {
            return Err(Error::Domain(format!("{x:?} is not in the open forward cone")));
        }
        Ok(ConePoint { x })
    }

    pub fn e(n: usize) -> Result<Self> {
        ConePoint::new(cone_e(n))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// `√B(x, x)`.
pub fn cone_det(x: &ConePoint) -> f64 {
    bform_unchecked(&x.x, &x.x).sqrt()
}

/// `√B(x, x)` for a raw vector, rejecting points outside `Λ`.
pub fn cone_det_of(x: &[f64]) -> Result<f64> {
    Ok(cone_det(&ConePoint::new(x.to_vec())?))
}

fn signature(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::from_diagonal_element(n, n, -1.0);
    j[(n - 1, n - 1)] = 1.0;
    j
}

/// An element of SO₀(n−1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzMatrix {
    m: DMatrix<f64>,
}

impl LorentzMatrix {
    /// Checks `MᵀJM = J` to 1e−10 (relative), `det M = 1` and `M_nn > 0`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n < 3 || m.ncols() != n {
            return Err(invalid(format!("Lorentz matrix must be square of size >= 3, got {}x{}", n, m.ncols())));
        }
        let j = signature(n);
        let dev = (m.transpose() * &j * &m - &j).amax();
        let scale = m.amax().powi(2).max(1.0);
        if dev > 1e-10 * scale {
            return Err(Error::Domain(format!("matrix does not preserve B (deviation {dev:.3e})")));
        }
        if m[(n - 1, n - 1)] <= 0.0 || m.determinant() <= 0.0 {
            return Err(Error::Domain("matrix is not in the identity component".into()));
        }
        Ok(LorentzMatrix { m })
    }

    fn from_trusted(m: DMatrix<f64>) -> Self {
        LorentzMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        LorentzMatrix { m: DMatrix::identity(n, n) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|k| self.m[(i, k)] * x[k]).sum()).collect()
    }

    pub fn compose(&self, o: &LorentzMatrix) -> LorentzMatrix {
        LorentzMatrix { m: &self.m * &o.m }
    }

    /// `J Mᵀ J`.
    pub fn inverse(&self) -> LorentzMatrix {
        let j = signature(self.dim());
        LorentzMatrix { m: &j * self.m.transpose() * &j }
    }

    /// `max |B(Mx, My) − B(x, y)|` over `samples` seeded random pairs in `[−1, 1]ⁿ`.
    pub fn invariance_defect(&self, samples: usize, seed: u64) -> f64 {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = bform_unchecked(&self.apply(&x), &self.apply(&y)) - bform_unchecked(&x, &y);
            worst = worst.max(d.abs());
        }
        worst
    }
}

/// Boost in the `(x_1, x_n)` plane: `a_t e = (sinh t, 0, …, 0, cosh t)`.
pub fn iwasawa_a(n: usize, t: f64) -> Result<LorentzMatrix> {
    if n < 3 {
        return Err(invalid(format!("cone dimension must be >= 3, got {n}")));
    }
    let mut m = DMatrix::identity(n, n);
    m[(0, 0)] = t.cosh();
    m[(0, n - 1)] = t.sinh();
    m[(n - 1, 0)] = t.sinh();
    m[(n - 1, n - 1)] = t.cosh();
    Ok(LorentzMatrix::from_trusted(m))
}

/// Null rotation fixing `x_n − x_1`: `n_c e = (|c|²/2, −c, 1 + |c|²/2)`.
pub fn iwasawa_n(c: &[f64]) -> Result<LorentzMatrix> {
    if c.is_empty() {
        return Err(invalid("c must have n - 2 >= 1 components"));
    }
    let n = c.len() + 2;
    let c2: f64 = c.iter().map(|v| v * v).sum();
    let mut m = DMatrix::identity(n, n);
    m[(0, 0)] = 1.0 - 0.5 * c2;
    m[(0, n - 1)] = 0.5 * c2;
    m[(n - 1, 0)] = -0.5 * c2;
    m[(n - 1, n - 1)] = 1.0 + 0.5 * c2;
    for (i, &ci) in c.iter().enumerate() {
        m[(0, i + 1)] = -ci;
        m[(n - 1, i + 1)] = -ci;
        m[(i + 1, 0)] = ci;
        m[(i + 1, n - 1)] = -ci;
    }
    Ok(LorentzMatrix::from_trusted(m))
}

/// `diag(σ, 1)` for `σ ∈ SO(n−1)`.
pub fn iwasawa_k(sigma: &DMatrix<f64>) -> Result<LorentzMatrix> {
    let k = sigma.nrows();
    if k < 2 || sigma.ncols() != k {
        return Err(invalid("rotation block must be square of size n - 1 >= 2"));
    }
    let dev = (sigma.transpose() * sigma - DMatrix::identity(k, k)).amax();
    if dev > 1e-10 || sigma.determinant() <= 0.0 {
        return Err(invalid(format!("rotation block is not in SO({k}) (orthogonality defect {dev:.3e})")));
    }
    let mut m = DMatrix::identity(k + 1, k + 1);
    m.view_mut((0, 0), (k, k)).copy_from(sigma);
    Ok(LorentzMatrix::from_trusted(m))
}

/// `(γ, t, c)` with `x = γ a_t n_c e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IwasawaCoords {
    pub gamma: f64,
    pub t: f64,
    pub c: Vec<f64>,
}

impl IwasawaCoords {
    pub fn identity(n: usize) -> Self {
        IwasawaCoords { gamma: 1.0, t: 0.0, c: vec![0.0; n.saturating_sub(2)] }
    }

    pub fn dim(&self) -> usize {
        self.c.len() + 2
    }

    /// `a_t n_c` as a matrix; the group element is `γ` times it.
    pub fn lorentz(&self) -> LorentzMatrix {
        iwasawa_a(self.dim(), self.t).expect("n >= 3").compose(&iwasawa_n(&self.c).expect("n >= 3"))
    }

    /// `h x = γ a_t n_c x`.
    pub fn act(&self, x: &[f64]) -> Vec<f64> {
        self.lorentz().apply(x).into_iter().map(|v| v * self.gamma).collect()
    }

    /// `h⁻¹ x`.
    pub fn act_inv(&self, x: &[f64]) -> Vec<f64> {
        self.lorentz().inverse().apply(x).into_iter().map(|v| v / self.gamma).collect()
    }

    /// Coordinates of the product `h·h'`.
    pub fn compose(&self, o: &IwasawaCoords) -> IwasawaCoords {
        let p = self.act(&point_from_coords(o).x);
        coords_from_point(&ConePoint { x: p })
    }
}

pub fn coords_from_point(x: &ConePoint) -> IwasawaCoords {
    let n = x.dim();
    let g = cone_det(x);
    let c = x.x[1..n - 1].iter().map(|v| -v / g).collect();
    let u = x.x[n - 1] - x.x[0];
    IwasawaCoords { gamma: g, t: -(u / g).ln(), c }
}

pub fn point_from_coords(co: &IwasawaCoords) -> ConePoint {
    let n = co.dim();
    let c2: f64 = co.c.iter().map(|v| v * v).sum();
    let et = co.t.exp();
    let mut x = vec![0.0; n];
    x[0] = co.gamma * (co.t.sinh() + 0.5 * et * c2);
    for (i, ci) in co.c.iter().enumerate() {
        x[i + 1] = -co.gamma * ci;
    }
    x[n - 1] = co.gamma * (co.t.cosh() + 0.5 * et * c2);
    ConePoint { x }
}

/// `Δ(γ a_t n_c) = e^{(n−2)t}`.
pub fn modular(co: &IwasawaCoords) -> f64 {
    ((co.dim() as f64 - 2.0) * co.t).exp()
}

/// `x ∈ B_ρ(w)`, computed literally from `y = h_w⁻¹ x`.
pub fn ball_membership(rho: f64, w: &ConePoint, x: &ConePoint) -> Result<bool> {
    if !(rho > 0.0) {
        return Err(invalid(format!("ball radius must be > 0, got {rho}")));
    }
    if w.dim() != x.dim() {
        return Err(invalid("dimension mismatch"));
    }
    let y = coords_from_point(w).act_inv(&x.x);
    if !in_cone(&y) {
        return Ok(false);
    }
    let n = y.len();
    let det = bform_unchecked(&y, &y).sqrt();
    let perp = y[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = (perp / y[n - 1]).atanh();
    Ok(det.ln().powi(2) + s * s < rho * rho)
}

/// Hyperbolic distance between unit-hyperboloid points, cancellation-free:
/// `2 asinh(√(−B(p−q, p−q))/2)`.
fn hyperbolic(p: &[f64], q: &[f64]) -> f64 {
    let d: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
    2.0 * ((-bform_unchecked(&d, &d)).max(0.0).sqrt() / 2.0).asinh()
}

/// Invariant distance between two cone points.
pub fn invariant_distance(w: &ConePoint, x: &ConePoint) -> f64 {
    let (dw, dx) = (cone_det(w), cone_det(x));
    let pw: Vec<f64> = w.x.iter().map(|v| v / dw).collect();
    let px: Vec<f64> = x.x.iter().map(|v| v / dx).collect();
    (dx / dw).ln().hypot(hyperbolic(&pw, &px))
}

/// A point with its coordinates and unit-hyperboloid projection, for fast
/// repeated distances.
#[derive(Debug, Clone, PartialEq)]
struct Located {
    ln_gamma: f64,
    unit: Vec<f64>,
}

impl Located {
    fn new(co: &IwasawaCoords) -> Self {
        let unit = point_from_coords(&IwasawaCoords { gamma: 1.0, t: co.t, c: co.c.clone() }).x;
        Located { ln_gamma: co.gamma.ln(), unit }
    }

    fn dist(&self, o: &Located) -> f64 {
        (self.ln_gamma - o.ln_gamma).hypot(hyperbolic(&self.unit, &o.unit))
    }
}

/// Coordinate box in `(γ, t, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordBox {
    pub gamma: (f64, f64),
    pub t: (f64, f64),
    pub c: Vec<(f64, f64)>,
}

impl CoordBox {
    /// `γ ∈ [1/2, 2]`, `t, c_i ∈ [−1, 1]`.
    pub fn default_for(n: usize) -> Self {
        CoordBox { gamma: (0.5, 2.0), t: (-1.0, 1.0), c: vec![(-1.0, 1.0); n - 2] }
    }

    pub fn point(co: &IwasawaCoords) -> Self {
        CoordBox { gamma: (co.gamma, co.gamma), t: (co.t, co.t), c: co.c.iter().map(|&v| (v, v)).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !(self.gamma.0 > 0.0) || !ok(self.gamma) || !ok(self.t) || !self.c.iter().all(|&r| ok(r)) || self.c.is_empty() {
            return Err(invalid(format!("invalid coordinate region {self:?}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.c.len() + 2
    }

    fn axes(&self) -> Vec<(f64, f64)> {
        let mut v = vec![(self.gamma.0.ln(), self.gamma.1.ln()), self.t];
        v.extend(self.c.iter().copied());
        v
    }

    fn at(&self, u: &[f64]) -> IwasawaCoords {
        IwasawaCoords { gamma: u[0].exp(), t: u[1], c: u[2..].to_vec() }
    }

    /// Midpoint grid with `m` cells per axis, uniform in `(ln γ, t, c)`;
    /// degenerate axes contribute one node.
    pub fn grid(&self, m: usize) -> Vec<IwasawaCoords> {
        self.grid_shifted(m, &vec![0.5; self.dim()])
    }

    fn grid_shifted(&self, m: usize, shift: &[f64]) -> Vec<IwasawaCoords> {
        let axes: Vec<Vec<f64>> = self
            .axes()
            .iter()
            .zip(shift)
            .map(|(&(lo, hi), s)| {
                if hi == lo {
                    vec![lo]
                } else {
                    (0..m).map(|i| lo + (i as f64 + s) * (hi - lo) / m as f64).collect()
                }
            })
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let u: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            out.push(self.at(&u));
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// `count` seeded uniform samples in `(ln γ, t, c)`.
    pub fn random(&self, count: usize, seed: u64) -> Vec<IwasawaCoords> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axes = self.axes();
        (0..count)
            .map(|_| {
                let u: Vec<f64> =
                    axes.iter().map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo }).collect();
                self.at(&u)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverOptions {
    /// Candidate grid cells per coordinate axis for the greedy insertion.
    pub candidates_per_axis: usize,
    /// Certification probe cells per axis.
    pub probes_per_axis: usize,
    /// Rounds of local candidate refinement after the first pass.
    pub refine_levels: usize,
    /// `None`: start at the cell nearest the region centre. `Some(seed)`: start
    /// at a seeded random cell, giving an independent cover.
    pub seed: Option<u64>,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { candidates_per_axis: 24, probes_per_axis: 12, refine_levels: 2, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverCertificate {
    pub disjoint: bool,
    pub min_separation: f64,
    pub covered: bool,
    pub uncovered: usize,
    /// Largest distance from a probe to the nearest cover point.
    pub covering_radius: f64,
    pub probes: usize,
    /// Maximum number of balls `B_δ(w_j)` containing one probe.
    pub n_overlap: usize,
}

impl CoverCertificate {
    pub fn pass(&self) -> bool {
        self.disjoint && self.covered
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhitneyCover {
    pub delta: f64,
    pub region: CoordBox,
    pub coords: Vec<IwasawaCoords>,
    pub points: Vec<ConePoint>,
    pub n_overlap: usize,
    pub certificate: CoverCertificate,
    located: Vec<Located>,
}

/// Serialized form `{delta, N, points: [{gamma, t, c}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverFile {
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub points: Vec<IwasawaCoords>,
}

impl WhitneyCover {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_file(&self) -> CoverFile {
        CoverFile { delta: self.delta, n: self.n_overlap, points: self.coords.clone() }
    }

    /// A cover with the given centres, certified on `probes`.
    pub fn from_coords(region: &CoordBox, delta: f64, coords: Vec<IwasawaCoords>, probes: &[IwasawaCoords]) -> Result<Self> {
        region.validate()?;
        if !(delta > 0.0) {
            return Err(invalid(format!("delta must be > 0, got {delta}")));
        }
        if coords.is_empty() || coords.iter().any(|c| c.dim() != region.dim() || !(c.gamma > 0.0)) {
            return Err(invalid("cover centres must be nonempty and match the region dimension"));
        }
        let mut cover = WhitneyCover {
            delta,
            region: region.clone(),
            points: coords.iter().map(point_from_coords).collect(),
            located: coords.iter().map(Located::new).collect(),
            coords,
            n_overlap: 0,
            certificate: CoverCertificate {
                disjoint: false,
                min_separation: 0.0,
                covered: false,
                uncovered: 0,
                covering_radius: 0.0,
                probes: 0,
                n_overlap: 0,
            },
        };
        let cert = cover.certify(probes);
        if !cert.pass() {
            return Err(Error::Certification(format!("cover failed certification: {cert:?}")));
        }
        cover.n_overlap = cert.n_overlap;
        cover.certificate = cert;
        Ok(cover)
    }

    /// Separation, coverage and overlap on `probes`.
    pub fn certify(&self, probes: &[IwasawaCoords]) -> CoverCertificate {
        let mut min_sep = f64::INFINITY;
        for i in 0..self.located.len() {
            for j in i + 1..self.located.len() {
                min_sep = min_sep.min(self.located[i].dist(&self.located[j]));
            }
        }
        let mut uncovered = 0;
        let mut radius: f64 = 0.0;
        let mut n_overlap = 0;
        for p in probes {
            let lp = Located::new(p);
            let mut best = f64::INFINITY;
            let mut count = 0;
            for l in &self.located {
                let d = l.dist(&lp);
                best = best.min(d);
                if d < self.delta {
                    count += 1;
                }
            }
            radius = radius.max(best);
            if best >= self.delta {
                uncovered += 1;
            }
            n_overlap = n_overlap.max(count);
        }
        CoverCertificate {
            disjoint: min_sep >= self.delta,
            min_separation: min_sep,
            covered: uncovered == 0,
            uncovered,
            covering_radius: radius,
            probes: probes.len(),
            n_overlap,
        }
    }

    pub fn distance_to(&self, j: usize, w: &ConePoint) -> f64 {
        let co = coords_from_point(w);
        self.located[j].dist(&Located::new(&co))
    }
}

/// Candidate cell in `(ln γ, t, c)` with centre and half-widths.
struct Cell {
    u: Vec<f64>,
    hw: Vec<f64>,
    loc: Located,
    eta: f64,
}

impl Cell {
    fn new(u: Vec<f64>, hw: Vec<f64>) -> Self {
        let at = |v: &[f64]| Located::new(&IwasawaCoords { gamma: v[0].exp(), t: v[1], c: v[2..].to_vec() });
        let loc = at(&u);
        // distance from the centre to the farthest corner
        let dim = u.len();
        let mut eta: f64 = 0.0;
        for mask in 0..(1usize << dim) {
            let v: Vec<f64> =
                (0..dim).map(|k| if mask >> k & 1 == 1 { u[k] + hw[k] } else { u[k] - hw[k] }).collect();
            eta = eta.max(loc.dist(&at(&v)));
        }
        Cell { u, hw, loc, eta }
    }

    fn split(&self) -> Vec<Cell> {
        let mut out = vec![(self.u.clone(), self.hw.clone())];
        for k in 0..self.u.len() {
            if self.hw[k] == 0.0 {
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * 3);
            for (u, hw) in out {
                for off in [-2.0 / 3.0, 0.0, 2.0 / 3.0] {
                    let mut u2 = u.clone();
                    let mut h2 = hw.clone();
                    u2[k] += off * self.hw[k];
                    h2[k] = self.hw[k] / 3.0;
                    next.push((u2, h2));
                }
            }
            out = next;
        }
        out.into_iter().map(|(u, hw)| Cell::new(u, hw)).collect()
    }

    fn coords(&self) -> IwasawaCoords {
        IwasawaCoords { gamma: self.u[0].exp(), t: self.u[1], c: self.u[2..].to_vec() }
    }
}

/// Farthest-point insertion among `cells`; returns the indices added.
fn insert_farthest(cells: &[Cell], chosen: &mut Vec<Located>, delta: f64) -> Vec<usize> {
    let mut mind: Vec<f64> =
        cells.iter().map(|c| chosen.iter().map(|l| l.dist(&c.loc)).fold(f64::INFINITY, f64::min)).collect();
    let mut added = Vec::new();
    loop {
        let (far, d) = mind.iter().enumerate().fold((0, -1.0), |a, (i, &d)| if d > a.1 { (i, d) } else { a });
        if d < delta {
            return added;
        }
        added.push(far);
        chosen.push(cells[far].loc.clone());
        for (m, c) in mind.iter_mut().zip(cells) {
            *m = m.min(c.loc.dist(&cells[far].loc));
        }
    }
}

/// Greedy farthest-point cover of `region` at scale `delta`: the chosen points
/// are pairwise at invariant distance `≥ δ` (so the half-balls `B_{δ/2}` are
/// disjoint) and every candidate lies within `δ` of one of them.
///
/// Candidates are cell centres of a grid in `(ln γ, t, c)`. After the first
/// pass, cells that may still hold a point at distance `≥ δ` are split in
/// three along every axis and the insertion is repeated on the pieces
/// (`opts.refine_levels` times), which shrinks the gaps a coarse candidate
/// grid leaves between the balls.
pub fn whitney_cover(region: &CoordBox, delta: f64, opts: &CoverOptions) -> Result<WhitneyCover> {
    region.validate()?;
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be > 0, got {delta}")));
    }
    let axes = region.axes();
    let m = opts.candidates_per_axis.max(1);
    let mut rng = opts.seed.map(ChaCha8Rng::seed_from_u64);
    let cells: Vec<Cell> = region
        .grid(m)
        .into_iter()
        .map(|co| {
            let mut u = vec![co.gamma.ln(), co.t];
            u.extend(co.c.iter().copied());
            let hw: Vec<f64> = axes.iter().map(|&(lo, hi)| 0.5 * (hi - lo) / m as f64).collect();
            Cell::new(u, hw)
        })
        .collect();
    let start = match rng.as_mut() {
        Some(r) => r.gen_range(0..cells.len()),
        None => {
            let centre = Located::new(&region.grid(1).remove(0));
            (0..cells.len())
                .map(|i| (i, cells[i].loc.dist(&centre)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
                .0
        }
    };
    let mut chosen_loc = vec![cells[start].loc.clone()];
    let mut coords = vec![cells[start].coords()];
    for i in insert_farthest(&cells, &mut chosen_loc, delta) {
        coords.push(cells[i].coords());
    }
    let mut active = cells;
    for _ in 0..opts.refine_levels {
        let sub: Vec<Cell> = active
            .iter()
            .filter(|c| {
                let d = chosen_loc.iter().map(|l| l.dist(&c.loc)).fold(f64::INFINITY, f64::min);
                d + c.eta >= delta
            })
            .flat_map(|c| c.split())
            .filter(|c| c.u.iter().zip(&axes).all(|(&v, &(lo, hi))| v >= lo && v <= hi))
            .collect();
        for i in insert_farthest(&sub, &mut chosen_loc, delta) {
            coords.push(sub[i].coords());
        }
        active = sub;
    }
    WhitneyCover::from_coords(region, delta, coords, &region.grid(opts.probes_per_axis))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureCheck {
    /// `∫_Λ f(x) det(x)^{−n} dx` by a midpoint rule on an x-box.
    pub lebesgue: f64,
    /// `∫_H f(γ a_t n_c e) dγ dt dc / γ` by Gauss–Legendre in `(ln γ, t, c)`.
    pub coordinate: f64,
    pub rel_diff: f64,
}

/// Compares both sides of the change of variables for
/// `f(x) = h(d(e, x)/R)`, `h(τ) = exp(1 − 1/(1 − τ²))`.
pub fn measure_identity(n: usize, radius: f64, m_x: usize, m_h: usize) -> Result<MeasureCheck> {
    if n < 3 {
        return Err(invalid(format!("cone dimension must be >= 3, got {n}")));
    }
    if !(radius > 0.0 && radius < 3.0) {
        return Err(invalid(format!("radius must be in (0, 3), got {radius}")));
    }
    let e = ConePoint::e(n)?;
    let f = |x: &ConePoint| {
        let d = invariant_distance(&e, x) / radius;
        crate::atomic::bump(d)
    };
    // x-side box containing the ball
    let (r_perp, r_top) = (radius.exp() * radius.sinh(), radius.exp() * radius.cosh());
    let (nodes, h) = crate::quad::midpoints(-r_perp, r_perp, m_x);
    let (top, ht) = crate::quad::midpoints(0.0, r_top, m_x);
    let mut leb = 0.0;
    let mut idx = vec![0usize; n - 1];
    let mut x = vec![0.0; n];
    'outer: loop {
        for (k, &i) in idx.iter().enumerate() {
            x[k] = nodes[i];
        }
        for &xn in &top {
            x[n - 1] = xn;
            if in_cone(&x) {
                let p = ConePoint { x: x.clone() };
                let v = f(&p);
                if v > 0.0 {
                    leb += v * cone_det(&p).powi(-(n as i32));
                }
            }
        }
        let mut k = n - 1;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < m_x {
                break;
            }
            idx[k] = 0;
        }
    }
    leb *= h.powi(n as i32 - 1) * ht;
    // coordinate side
    let rule = gauss_legendre(m_h)?;
    let cmax = (2.0 * (radius.cosh() - 1.0) * radius.exp()).sqrt();
    let ranges: Vec<f64> = std::iter::once(radius).chain(std::iter::once(radius)).chain(std::iter::repeat(cmax).take(n - 2)).collect();
    let mut coord = 0.0;
    let mut idx = vec![0usize; n];
    'outer2: loop {
        let mut w = 1.0;
        let mut u = vec![0.0; n];
        for (k, &i) in idx.iter().enumerate() {
            u[k] = rule.nodes[i] * ranges[k];
            w *= rule.weights[i] * ranges[k];
        }
        let co = IwasawaCoords { gamma: u[0].exp(), t: u[1], c: u[2..].to_vec() };
        coord += w * f(&point_from_coords(&co));
        let mut k = n;
        loop {
            if k == 0 {
                break 'outer2;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < m_h {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(MeasureCheck { lebesgue: leb, coordinate: coord, rel_diff: (leb - coord).abs() / coord.abs() })
}
