//! Weighted Bergman spaces on the unit disc and the discrete series `π_s` of
//! the affine group acting on them.
//!
//! Test functions are polynomials. The voice transform with analysing vector
//! `u = 1` has the closed form `W_u^s(f)(g) = ᾱ^{-s} f(β/ᾱ)`, `(α, β)` the
//! Cayley image of `g`; a quadrature path through the weighted inner product
//! is kept as an independent check.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::affine::{haar_grid_scaled, lp_r_norm, GridFunction1G, GroupElement, GroupGrid};
use crate::error::{invalid, Error, Result};
use crate::quad::unit_interval_jacobi;

/// Truncated power series `Σ a_k z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct Coefficient {
    re: f64,
    im: f64,
}

impl Serialize for PowerSeries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<Coefficient> = self.coeffs.iter().map(|c| Coefficient { re: c.re, im: c.im }).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PowerSeries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Coefficient>::deserialize(d)?;
        Ok(PowerSeries { coeffs: v.into_iter().map(|c| Complex64::new(c.re, c.im)).collect() })
    }
}

impl PowerSeries {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        PowerSeries { coeffs }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        PowerSeries { coeffs: coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect() }
    }

    pub fn monomial(k: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); k + 1];
        c[k] = Complex64::new(1.0, 0.0);
        PowerSeries { coeffs: c }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm_sqr() == 0.0)
    }

    /// Horner evaluation without the disc check.
    pub fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if !(z.norm() < 1.0) {
            return Err(Error::Domain(format!("|z| = {} is not inside the unit disc", z.norm())));
        }
        Ok(self.eval_unchecked(z))
    }
}

pub fn eval(f: &PowerSeries, z: Complex64) -> Result<Complex64> {
    f.eval(z)
}

/// `z^e` on the principal branch, with repeated multiplication for integer `e`.
pub(crate) fn cpow(z: Complex64, e: f64) -> Complex64 {
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        z.powi(e as i32)
    } else {
        z.powf(e)
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(invalid(format!("discrete series parameter needs s > 1, got {s}")));
    }
    Ok(())
}

/// `(π_s(g) f)(z) = (−β̄z + α)^{-s} f((ᾱz − β)/(−β̄z + α))`.
pub fn pi_s_act(s: f64, g: GroupElement, f: &PowerSeries, z: Complex64) -> Result<Complex64> {
    check_s(s)?;
    if !(z.norm() < 1.0) {
        return Err(Error::Domain(format!("|z| = {} is not inside the unit disc", z.norm())));
    }
    Ok(pi_s_act_unchecked(s, g, f, z))
}

fn pi_s_act_unchecked(s: f64, g: GroupElement, f: &PowerSeries, z: Complex64) -> Complex64 {
    let c = g.cayley();
    let den = -c.beta.conj() * z + c.alpha;
    cpow(den, -s) * f.eval_unchecked((c.alpha.conj() * z - c.beta) / den)
}

/// Closed form of `⟨f, h⟩_s = Σ a_k b̄_k k! Γ(s) / Γ(s + k)`.
pub fn inner_product_s(f: &PowerSeries, h: &PowerSeries, s: f64) -> Result<Complex64> {
    check_s(s)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, (a, b)) in f.coeffs.iter().zip(&h.coeffs).enumerate() {
        let kf = k as f64;
        let m = (ln_gamma(kf + 1.0) + ln_gamma(s) - ln_gamma(s + kf)).exp();
        acc += a * b.conj() * m;
    }
    Ok(acc)
}

/// Polar product rule: Gauss–Jacobi in `u = r²` for the weight `(1 − u)^alpha`,
/// trapezoid in angle. `Σ w_i F(z_i) ≈ ∫_D F(z) (1 − |z|²)^alpha dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrid {
    nodes: Vec<Complex64>,
    weights: Vec<f64>,
    n_radial: usize,
    n_angular: usize,
    alpha: f64,
}

impl DiscGrid {
    /// Gauss–Legendre in `r²`: plain area measure, weights sum to π.
    pub fn legendre(n_radial: usize, n_angular: usize) -> Result<Self> {
        Self::jacobi(n_radial, n_angular, 0.0)
    }

    /// Rule carrying the weight `(1 − |z|²)^alpha`.
    pub fn jacobi(n_radial: usize, n_angular: usize, alpha: f64) -> Result<Self> {
        if n_radial < 1 || n_angular < 1 {
            return Err(invalid("disc grid needs at least one radial and one angular node"));
        }
        let rule = unit_interval_jacobi(n_radial, alpha)?;
        let dtheta = 2.0 * PI / n_angular as f64;
        let mut nodes = Vec::with_capacity(n_radial * n_angular);
        let mut weights = Vec::with_capacity(n_radial * n_angular);
        for (u, wu) in rule.nodes.iter().zip(&rule.weights) {
            let r = u.sqrt();
            for k in 0..n_angular {
                nodes.push(Complex64::from_polar(r, k as f64 * dtheta));
                weights.push(0.5 * wu * dtheta);
            }
        }
        Ok(DiscGrid { nodes, weights, n_radial, n_angular, alpha })
    }

    /// Default 128 × 256 rule matched to the weight exponent `alpha`.
    pub fn default_for(alpha: f64) -> Result<Self> {
        Self::jacobi(128, 256, alpha)
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.n_radial, self.n_angular)
    }

    /// `∫_D F(z) (1 − |z|²)^exponent dz`.
    pub fn integrate(&self, exponent: f64, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
        let extra = exponent - self.alpha;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| {
                let m = if extra == 0.0 { 1.0 } else { (1.0 - z.norm_sqr()).powf(extra) };
                f(z) * (w * m)
            })
            .sum()
    }
}

/// Quadrature path for `⟨f, h⟩_s`.
pub fn inner_product_quadrature(f: &PowerSeries, h: &PowerSeries, s: f64, grid: &DiscGrid) -> Result<Complex64> {
    check_s(s)?;
    Ok(grid.integrate(s - 2.0, |z| f.eval_unchecked(z) * h.eval_unchecked(z).conj()) * ((s - 1.0) / PI))
}

/// `W_u^s(f)(g) = ᾱ^{-s} f(β/ᾱ)` for `u = 1`.
pub fn wavelet_closed(s: f64, f: &PowerSeries, g: GroupElement) -> Result<Complex64> {
    check_s(s)?;
    Ok(wavelet_closed_unchecked(s, f, g))
}

pub(crate) fn wavelet_closed_unchecked(s: f64, f: &PowerSeries, g: GroupElement) -> Complex64 {
    let c = g.cayley();
    let ab = c.alpha.conj();
    cpow(ab, -s) * f.eval_unchecked(c.beta / ab)
}

/// `W_u^s(u)(a, b) = 2^s (a + 1/a − ib)^{-s}`.
pub fn wavelet_uu(s: f64, g: GroupElement) -> Complex64 {
    let z = Complex64::new(g.a() + 1.0 / g.a(), -g.b());
    cpow(z, -s) * 2f64.powf(s)
}

/// `(s − 1)/π ∫ f(z) conj((π_s(g)u)(z)) (1 − |z|²)^{s−2} dz` on the grid.
pub fn wavelet_quadrature(s: f64, f: &PowerSeries, g: GroupElement, grid: &DiscGrid) -> Result<Complex64> {
    check_s(s)?;
    let one = PowerSeries::real(&[1.0]);
    let v = grid.integrate(s - 2.0, |z| f.eval_unchecked(z) * pi_s_act_unchecked(s, g, &one, z).conj());
    Ok(v * ((s - 1.0) / PI))
}

/// Voice transform of `π_s(y) f` at `x`, evaluated in closed form:
/// `ᾱ_x^{-s} (π_s(y) f)(β_x/ᾱ_x)`.
pub fn wavelet_of_translate(s: f64, y: GroupElement, f: &PowerSeries, x: GroupElement) -> Result<Complex64> {
    check_s(s)?;
    let c = x.cayley();
    let ab = c.alpha.conj();
    Ok(cpow(ab, -s) * pi_s_act_unchecked(s, y, f, c.beta / ab))
}

/// `(∫_D |f|^p (1 − |z|²)^{σ−2} dz)^{1/p}`.
pub fn bergman_norm(f: &PowerSeries, p: f64, sigma: f64, grid: &DiscGrid) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid(format!("Bergman norm needs p >= 1, got {p}")));
    }
    if !(sigma > 1.0) {
        return Err(invalid(format!("Bergman weight needs sigma > 1 (integrable weight), got {sigma}")));
    }
    let v = grid.integrate(sigma - 2.0, |z| Complex64::new(f.eval_unchecked(z).norm().powf(p), 0.0));
    Ok(v.re.powf(1.0 / p))
}

/// `φ(a, b) = ((a² + b² − 1) − 2ib) / ((1 + a)² + b²)`.
pub fn phi_map(a: f64, b: f64) -> Result<Complex64> {
    if !(a > 0.0) {
        return Err(invalid(format!("phi map needs a > 0, got {a}")));
    }
    let d = (1.0 + a).powi(2) + b * b;
    Ok(Complex64::new((a * a + b * b - 1.0) / d, -2.0 * b / d))
}

/// Vectors reachable from polynomials by the action of `π_s`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscVector {
    Poly(PowerSeries),
    Translated(GroupElement, Box<DiscVector>),
}

impl DiscVector {
    pub fn poly(f: PowerSeries) -> Self {
        DiscVector::Poly(f)
    }

    /// Pointwise value on the disc.
    pub fn eval(&self, s: f64, z: Complex64) -> Complex64 {
        match self {
            DiscVector::Poly(f) => f.eval_unchecked(z),
            DiscVector::Translated(y, inner) => {
                let c = y.cayley();
                let den = -c.beta.conj() * z + c.alpha;
                cpow(den, -s) * inner.eval(s, (c.alpha.conj() * z - c.beta) / den)
            }
        }
    }
}

/// The closed-form voice transform of the discrete series with `u = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscVoice {
    s: f64,
}

impl DiscVoice {
    pub fn new(s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(DiscVoice { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

impl crate::axioms::VoiceTransform for DiscVoice {
    type Vector = DiscVector;

    /// `ᾱ_x^{-s} v(β_x/ᾱ_x)`: the reproducing kernel evaluates any Bergman vector.
    fn eval(&self, v: &DiscVector, x: GroupElement) -> Complex64 {
        let c = x.cayley();
        let ab = c.alpha.conj();
        cpow(ab, -self.s) * v.eval(self.s, c.beta / ab)
    }

    fn translate(&self, y: GroupElement, v: &DiscVector) -> DiscVector {
        DiscVector::Translated(y, Box::new(v.clone()))
    }
}

/// Ratio of the coorbit norm to the Bergman norm for one test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub id: String,
    pub coeffs: PowerSeries,
    pub skipped: bool,
    pub lp_r_norm: f64,
    pub bergman_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub s: f64,
    pub r: f64,
    pub p: f64,
    pub sigma: f64,
    pub entries: Vec<RatioEntry>,
    /// `(max R − min R) / min R` over non-skipped entries.
    pub spread: f64,
    /// Product of the factors displayed in the proof chain, `2^{s+r}`.
    pub chain_literal: f64,
    /// Constant after redoing the substitution with its Jacobian, `2^{2r+1/p}`.
    pub chain_corrected: f64,
    pub chain_literal_agrees: bool,
    pub warnings: Vec<String>,
}

/// Checks `2 − s < r + 2/p < s` and `1 < (s − r)p/2 < (s − 1)p + 1`.
pub fn check_correspondence_range(s: f64, r: f64, p: f64) -> Result<()> {
    check_s(s)?;
    if !(p >= 1.0) {
        return Err(invalid(format!("p >= 1 required, got {p}")));
    }
    let m = r + 2.0 / p;
    if !(2.0 - s < m && m < s) {
        return Err(Error::Range(format!("2-s < r+2/p < s fails: 2-s = {}, r+2/p = {m}, s = {s}", 2.0 - s)));
    }
    let sigma = (s - r) * p / 2.0;
    let hi = (s - 1.0) * p + 1.0;
    if !(1.0 < sigma && sigma < hi) {
        return Err(Error::Range(format!("1 < (s-r)p/2 < (s-1)p+1 fails: (s-r)p/2 = {sigma}, (s-1)p+1 = {hi}")));
    }
    Ok(())
}

/// Scaled group grid whose truncation tails are below `e^{-tail}` for the
/// decay exponent `sigma` of `|W_u^s f · w_r|^p`; `spacing` is the node
/// spacing in both `log a` and `eta`.
pub fn correspondence_group_grid(sigma: f64, spacing: f64, tail: f64) -> Result<GroupGrid> {
    let l_min = -(tail / (2.0 * sigma - 2.0)).min(120.0);
    let l_max = tail / (2.0 * sigma);
    let eta = tail / (2.0 * sigma - 1.0) + 2f64.ln();
    let n_a = ((l_max - l_min) / spacing).ceil() as usize;
    let n_eta = (2.0 * eta / spacing).ceil() as usize;
    haar_grid_scaled(l_min, l_max, eta, n_a.max(2), n_eta.max(2))
}

/// Compares `‖W_u^s f‖_{L^p_r}` with `‖f‖_{A^p_{(s−r)p/2}}` over a family.
///
/// `disc` defaults to the 128 × 256 rule matched to the Bergman weight and
/// `group` to [`correspondence_group_grid`] with spacing 0.1 and tail 24.
pub fn norm_correspondence(
    s: f64,
    r: f64,
    p: f64,
    fs: &[(String, PowerSeries)],
    disc: Option<&DiscGrid>,
    group: Option<std::sync::Arc<GroupGrid>>,
) -> Result<NormReport> {
    check_correspondence_range(s, r, p)?;
    let sigma = (s - r) * p / 2.0;
    let mut warnings = Vec::new();
    if sigma <= 1.05 {
        warnings.push(format!("sigma = {sigma} is close to 1; the Bergman weight is nearly non-integrable"));
    }
    let own_disc;
    let disc = match disc {
        Some(d) => d,
        None => {
            own_disc = DiscGrid::default_for(sigma - 2.0)?;
            &own_disc
        }
    };
    let group = match group {
        Some(g) => g,
        None => std::sync::Arc::new(correspondence_group_grid(sigma, 0.1, 24.0)?),
    };
    let mut entries = Vec::new();
    for (id, f) in fs {
        if f.is_zero() {
            entries.push(RatioEntry {
                id: id.clone(),
                coeffs: f.clone(),
                skipped: true,
                lp_r_norm: 0.0,
                bergman_norm: 0.0,
                ratio: f64::NAN,
            });
            continue;
        }
        let w = GridFunction1G::sample(group.clone(), &|g: GroupElement| wavelet_closed_unchecked(s, f, g));
        let num = lp_r_norm(&w, p, r)?;
        let den = bergman_norm(f, p, sigma, disc)?;
        entries.push(RatioEntry {
            id: id.clone(),
            coeffs: f.clone(),
            skipped: false,
            lp_r_norm: num,
            bergman_norm: den,
            ratio: num / den,
        });
    }
    let ratios: Vec<f64> = entries.iter().filter(|e| !e.skipped).map(|e| e.ratio).collect();
    let spread = if ratios.is_empty() {
        0.0
    } else {
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo
    };
    let chain_literal = 2f64.powf(s + r);
    let chain_corrected = 2f64.powf(2.0 * r + 1.0 / p);
    let chain_literal_agrees = ratios.iter().all(|x| ((x - chain_literal) / chain_literal).abs() < 0.01);
    if !chain_literal_agrees && !ratios.is_empty() {
        warnings.push(format!(
            "measured ratio disagrees with the literal chain constant 2^(s+r) = {chain_literal}; corrected trace gives {chain_corrected}"
        ));
    }
    Ok(NormReport { s, r, p, sigma, entries, spread, chain_literal, chain_corrected, chain_literal_agrees, warnings })
}

/// The family `{1, z, z², 1 + z, z³}`.
pub fn standard_family() -> Vec<(String, PowerSeries)> {
    vec![
        ("1".into(), PowerSeries::real(&[1.0])),
        ("z".into(), PowerSeries::monomial(1)),
        ("z^2".into(), PowerSeries::monomial(2)),
        ("1+z".into(), PowerSeries::real(&[1.0, 1.0])),
        ("z^3".into(), PowerSeries::monomial(3)),
    ]
}
