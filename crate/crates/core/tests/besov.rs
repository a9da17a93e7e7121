use std::f64::consts::PI;
use std::sync::Arc;

use coorbit::besov::*;
use coorbit::cone::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn co(gamma: f64, t: f64, c: f64) -> IwasawaCoords {
    IwasawaCoords { gamma, t, c: vec![c] }
}

fn random_values(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn l2(f: &GridFunctionN) -> f64 {
    f.norm_p(2.0).unwrap()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn spectrum_grid(size: usize, centre: [f64; 3], half: f64) -> Arc<BoxGrid> {
    Arc::new(BoxGrid::for_spectrum(&[size; 3], &centre, &[half; 3]).unwrap())
}

#[test]
fn plancherel_and_round_trip() {
    let g = Arc::new(BoxGrid::for_spectrum(&[16, 8, 32], &[0.4, -0.3, 1.7], &[2.0, 3.0, 1.5]).unwrap());
    let f = GridFunctionN::new(g.clone(), Domain::X, random_values(g.len(), 1)).unwrap();
    let ft = bfourier(&f).unwrap();
    assert!((l2(&ft) - l2(&f)).abs() / l2(&f) < 1e-10);
    let back = bfourier_inv(&ft).unwrap();
    assert!(max_diff(back.values(), f.values()) < 1e-12 * f.max_abs().max(1.0));
}

#[test]
fn unpaired_grids_and_wrong_domains_are_rejected() {
    assert!(BoxGrid::new(vec![8, 8], vec![0.0; 2], vec![1.0; 2], vec![0.0; 2], vec![1.0; 2]).is_err());
    let g = spectrum_grid(8, [0.0, 0.0, 1.0], 1.0);
    let w = GridFunctionN::zeros(g.clone(), Domain::W);
    assert!(bfourier(&w).is_err());
    assert!(bfourier_inv(&GridFunctionN::zeros(g, Domain::X)).is_err());
}

/// Block-supported random function on a 16³ grid.
fn block(g: &Arc<BoxGrid>, lo: usize, hi: usize, seed: u64) -> GridFunctionN {
    let vals = random_values(g.len(), seed);
    let values = (0..g.len())
        .map(|i| if g.multi_index(i).iter().all(|&k| (lo..=hi).contains(&k)) { vals[i] } else { Complex64::new(0.0, 0.0) })
        .collect();
    GridFunctionN::new(g.clone(), Domain::X, values).unwrap()
}

#[test]
fn convolution_matches_brute_force_on_16_cubed() {
    let g = Arc::new(BoxGrid::for_spectrum(&[16; 3], &[0.3, -0.2, 1.0], &[2.0, 3.0, 4.0]).unwrap());
    let f = block(&g, 5, 11, 2);
    let h = block(&g, 6, 10, 3);
    let fast = convolve_via_fourier(&f, &h).unwrap();
    // (f*h)(x_k) = Σ_l f(x_l) h(x_k − x_l) Δx, and x_k − x_l is the node k − l + N/2
    let n = 16i64;
    let mut brute = vec![Complex64::new(0.0, 0.0); g.len()];
    for (k, out) in brute.iter_mut().enumerate() {
        let ki = g.multi_index(k);
        for l in 0..g.len() {
            if f.values()[l].norm() == 0.0 {
                continue;
            }
            let li = g.multi_index(l);
            let m: Vec<i64> = (0..3).map(|a| ki[a] as i64 - li[a] as i64 + n / 2).collect();
            if m.iter().all(|&v| (0..n).contains(&v)) {
                let mi: Vec<usize> = m.iter().map(|&v| v as usize).collect();
                *out += f.values()[l] * h.values()[g.flat_index(&mi)] * g.cell_x();
            }
        }
    }
    let scale = brute.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(max_diff(fast.values(), &brute) / scale < 1e-8);
    let swapped = convolve_via_fourier(&h, &f).unwrap();
    assert!(max_diff(fast.values(), swapped.values()) / scale < 1e-12);
}

#[test]
fn convolution_with_normalised_delta_is_identity() {
    let g = Arc::new(BoxGrid::for_spectrum(&[16; 3], &[0.0, 0.0, 1.0], &[2.0; 3]).unwrap());
    let f = block(&g, 4, 10, 4);
    let mut d = GridFunctionN::zeros(g.clone(), Domain::X);
    let origin = g.flat_index(&[8, 8, 8]);
    let mut vals = d.values().to_vec();
    vals[origin] = Complex64::new(1.0 / g.cell_x(), 0.0);
    d = GridFunctionN::new(g.clone(), Domain::X, vals).unwrap();
    let out = convolve_via_fourier(&f, &d).unwrap();
    assert!(max_diff(out.values(), f.values()) < 1e-12);
}

#[test]
fn wraparound_guard_rejects_wide_supports() {
    let g = Arc::new(BoxGrid::for_spectrum(&[16; 3], &[0.0, 0.0, 1.0], &[2.0; 3]).unwrap());
    let f = block(&g, 2, 11, 5);
    let h = block(&g, 3, 12, 6);
    assert!(convolve_via_fourier(&f, &h).is_err());
}

#[test]
fn test_function_is_a_cone_supported_bump() {
    let g = spectrum_grid(32, [0.0, 0.0, 1.0], 0.8);
    let f = make_cone_test_function(g.clone(), &co(1.0, 0.0, 0.0), 0.3).unwrap();
    let centre = g.flat_index(&[16, 16, 16]);
    assert_eq!(g.w_at(centre), vec![0.0, 0.0, 1.0]);
    assert!((f.spectrum.values()[centre].re - 1.0).abs() < 1e-15);
    for (i, v) in f.spectrum.values().iter().enumerate() {
        if !in_cone(&g.w_at(i)) {
            assert_eq!(v.norm(), 0.0);
        }
    }
    // too wide for the box
    assert!(make_cone_test_function(g.clone(), &co(1.0, 0.0, 0.0), 0.9).is_err());
    assert!(make_cone_test_function(g, &co(1.0, 0.0, 0.0), 0.0).is_err());
}

#[test]
fn translated_bump_is_the_dilated_bump() {
    let e = ConePoint::e(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let h = co(rng.gen_range(0.6..1.6), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
        let w0 = point_from_coords(&h);
        for _ in 0..20 {
            let w = h.act(&point_from_coords(&co(rng.gen_range(0.7..1.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4))).as_slice());
            let pulled = h.act_inv(&w);
            let a = ball_bump(&w0, 0.5, &w);
            let b = ball_bump(&e, 0.5, &pulled);
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }
}

#[test]
fn lp_partition_of_default_cover_sums_to_one() {
    let cover = Arc::new(whitney_cover(&CoordBox::default_for(3), 0.4, &CoverOptions::default()).unwrap());
    let lp = make_lp_partition(cover, default_spectrum_grid(32).unwrap()).unwrap();
    let cert = lp.certify();
    assert!(cert.sum_defect < 1e-12, "{cert:?}");
    assert!(cert.range_ok && cert.support_ok);
    assert!(cert.covered_nodes > 0);
    assert!(cert.min_on_delta_ball > 0.0);
}

fn single_ball(centre: IwasawaCoords, delta: f64) -> Arc<WhitneyCover> {
    let region = CoordBox::point(&centre);
    Arc::new(WhitneyCover::from_coords(&region, delta, vec![centre], &region.grid(1)).unwrap())
}

#[test]
fn single_ball_partition_is_one_on_its_support() {
    let g = spectrum_grid(32, [0.0, 0.0, 1.0], 1.6);
    let lp = make_lp_partition(single_ball(co(1.0, 0.0, 0.0), 0.4), g).unwrap();
    assert_eq!(lp.len(), 1);
    assert!(!lp.multiplier(0).is_empty());
    assert!(lp.multiplier(0).iter().all(|&(_, v)| v == 1.0));
}

#[test]
fn two_balls_split_the_overlap() {
    let region = CoordBox { gamma: (1.0, 1.0), t: (0.0, 0.5), c: vec![(0.0, 0.0)] };
    let cover = Arc::new(
        WhitneyCover::from_coords(&region, 0.4, vec![co(1.0, 0.0, 0.0), co(1.0, 0.5, 0.0)], &region.grid(8)).unwrap(),
    );
    let g = spectrum_grid(32, [0.0, 0.0, 1.2], 1.8);
    let lp = make_lp_partition(cover, g.clone()).unwrap();
    let mut sum = vec![0.0; g.len()];
    let mut count = vec![0; g.len()];
    for j in 0..2 {
        for &(i, v) in lp.multiplier(j) {
            sum[i] += v;
            count[i] += 1;
        }
    }
    let mut overlap = 0;
    for i in 0..g.len() {
        if count[i] == 2 {
            assert!((sum[i] - 1.0).abs() < 1e-12);
            let v: Vec<f64> = (0..2).map(|j| lp.multiplier(j).iter().find(|p| p.0 == i).unwrap().1).collect();
            assert!(v.iter().all(|&x| x > 0.0 && x <= 1.0));
            if v.iter().all(|&x| x < 1.0) {
                overlap += 1;
            }
        }
    }
    assert!(overlap > 0);
}

#[test]
fn uncovered_region_node_is_a_cover_defect() {
    // region larger than the single ball: nodes in the region fall outside every ball
    let region = CoordBox { gamma: (1.0, 1.0), t: (0.0, 0.0), c: vec![(0.0, 0.0)] };
    let mut cover = WhitneyCover::from_coords(&region, 0.4, vec![co(1.0, 0.0, 0.0)], &region.grid(1)).unwrap();
    cover.region = CoordBox { gamma: (0.3, 3.0), t: (-1.5, 1.5), c: vec![(-1.5, 1.5)] };
    let g = spectrum_grid(16, [0.0, 0.0, 1.5], 1.5);
    assert!(make_lp_partition(Arc::new(cover), g).is_err());
}

#[test]
fn single_multiplier_besov_norm() {
    let centre = co(1.3, 0.2, 0.1);
    let lp = make_lp_partition(single_ball(centre.clone(), 0.4), spectrum_grid(32, [0.3, -0.2, 1.6], 1.2)).unwrap();
    let f = make_cone_test_function(lp.grid().clone(), &centre, 0.35).unwrap();
    let det = cone_det(&point_from_coords(&centre));
    let (q, sigma) = (2.0, 1.7);
    for p in [2.0, 3.0] {
        let want = det.powf(-sigma / q) * (2.0 * PI).powf(1.5) * f.x.norm_p(p).unwrap();
        let got = besov_norm(&f, p, q, sigma, &lp).unwrap();
        assert!((got - want).abs() / want < 1e-10, "p={p}: {got} vs {want}");
    }
    let zero = f.scaled(0.0);
    assert_eq!(besov_norm(&zero, 2.0, 2.0, sigma, &lp).unwrap(), 0.0);
    let lam = besov_norm(&f.scaled(-2.5), 3.0, 1.5, sigma, &lp).unwrap();
    assert!((lam - 2.5 * besov_norm(&f, 3.0, 1.5, sigma, &lp).unwrap()).abs() < 1e-12 * lam);
    assert!(besov_norm(&f, 0.5, 2.0, sigma, &lp).is_err());
    assert!(besov_norm(&f, 2.0, f64::INFINITY, sigma, &lp).is_err());
}

#[test]
fn besov_plancherel_path_matches_fourier_path() {
    let cover = Arc::new(whitney_cover(&CoordBox::default_for(3), 0.4, &CoverOptions::default()).unwrap());
    let grid = default_spectrum_grid(32).unwrap();
    let lp = make_lp_partition(cover, grid.clone()).unwrap();
    let f = make_cone_test_function(grid, &co(1.1, 0.3, -0.2), 0.4).unwrap();
    let a = besov_report(&f.spectrum, 2.0, 2.0, 1.5, &lp, NormPath::Auto).unwrap();
    let b = besov_report(&f.spectrum, 2.0, 2.0, 1.5, &lp, NormPath::Fourier).unwrap();
    assert!((a.norm - b.norm).abs() < 1e-10 * a.norm);
    assert!(a.outside_mass < 1e-3 && a.warnings.is_empty());
}

#[test]
fn wavelet_at_identity_is_the_inner_product() {
    let g = spectrum_grid(32, [0.0, 0.0, 1.1], 1.0);
    let f = make_cone_test_function(g.clone(), &co(1.1, 0.1, 0.1), 0.4).unwrap();
    let u = make_cone_test_function(g.clone(), &co(1.0, 0.0, 0.0), 0.5).unwrap();
    let spec = GridSpectrum::new(u.spectrum.clone()).unwrap();
    let id = IwasawaCoords::identity(3);
    let origin = g.flat_index(&[16, 16, 16]);
    let w = cone_wavelet(&spec, &f, &id).unwrap();
    let inner: Complex64 = f.x.values().iter().zip(u.x.values()).map(|(a, b)| a * b.conj()).sum::<Complex64>() * g.cell_x();
    assert!((w.values()[origin] - inner).norm() < 1e-10 * inner.norm());
    let self_w = cone_wavelet(&spec, &u, &id).unwrap();
    assert!((self_w.values()[origin].re - l2(&u.x).powi(2)).abs() < 1e-10 * l2(&u.x).powi(2));
    assert!(self_w.values()[origin].im.abs() < 1e-12);
}

#[test]
fn translating_f_shifts_the_wavelet_transform() {
    let g = spectrum_grid(32, [0.2, 0.0, 1.3], 1.2);
    let f = make_cone_test_function(g.clone(), &co(1.2, 0.2, -0.1), 0.4).unwrap();
    let u = BumpSpectrum::at_e(3, 0.5).unwrap();
    let shift = [3i64, 0, -2];
    let tau: Vec<f64> = (0..3).map(|k| shift[k] as f64 * g.dx[k]).collect();
    let moved_spec = GridFunctionN::sample(g.clone(), Domain::W, |w| {
        let b = tau[2] * w[2] - tau[0] * w[0] - tau[1] * w[1];
        Complex64::from_polar(1.0, -b) * ball_bump(&point_from_coords(&f.centre), f.width, w)
    });
    let moved = ConeTestFunction { spectrum: moved_spec.clone(), x: bfourier_inv(&moved_spec).unwrap(), ..f.clone() };
    let h = co(0.9, 0.3, -0.2);
    let a = cone_wavelet(&u, &f, &h).unwrap();
    let b = cone_wavelet(&u, &moved, &h).unwrap();
    let scale = a.max_abs();
    for i in 0..g.len() {
        let k = g.multi_index(i);
        let src: Vec<i64> = (0..3).map(|a| k[a] as i64 - shift[a]).collect();
        if src.iter().any(|&v| !(0..32).contains(&v)) {
            continue;
        }
        let src: Vec<usize> = src.iter().map(|&v| v as usize).collect();
        assert!((b.values()[i] - a.values()[g.flat_index(&src)]).norm() < 1e-6 * scale);
    }
}

#[test]
fn lpqs_box_oracle_and_homogeneity() {
    let g = spectrum_grid(8, [0.0, 0.0, 1.0], 1.0);
    let region = CoordBox::default_for(3);
    let volume: f64 = (0..3).map(|k| 8.0 * g.dx[k]).product();
    let ones = GridFunctionN::new(g.clone(), Domain::X, vec![Complex64::new(1.0, 0.0); g.len()]).unwrap();
    for (s, m, tol) in [(3.0, 4, 1e-12), (4.5, 64, 1e-4)] {
        let h = h_grid(&region, m).unwrap();
        let field = ConeWaveletField::from_slices(h.clone(), vec![ones.clone(); h.nodes.len()]).unwrap();
        for (p, q) in [(2.0, 2.0), (1.0, 3.0), (3.0, 1.5)] {
            // ∫ γ^{s−n−1} dγ over [1/2, 2], times 2 · 2 for t and c
            let e = s - 3.0;
            let gamma_int = if e == 0.0 { 4f64.ln() } else { (2f64.powf(e) - 0.5f64.powf(e)) / e };
            let want = (volume.powf(q / p) * 4.0 * gamma_int).powf(1.0 / q);
            let got = lpqs_norm(&field, p, q, s).unwrap();
            assert!((got - want).abs() / want < tol, "s={s} p={p} q={q}: {got} vs {want}");
        }
    }
    let h = h_grid(&region, 3).unwrap();
    let zero = ConeWaveletField::from_slices(h.clone(), vec![ones.scale(Complex64::new(0.0, 0.0)); h.nodes.len()]).unwrap();
    assert_eq!(lpqs_norm(&zero, 2.0, 2.0, 3.0).unwrap(), 0.0);
    let a = lpqs_norm(&ConeWaveletField::from_slices(h.clone(), vec![ones.clone(); 27]).unwrap(), 3.0, 2.0, 1.0).unwrap();
    let b = lpqs_norm(&ConeWaveletField::from_slices(h, vec![ones.scale(Complex64::new(0.0, 2.0)); 27]).unwrap(), 3.0, 2.0, 1.0).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12 * b);
    assert!(lpqs_norm(&zero, 0.0, 2.0, 3.0).is_err());
}

#[test]
fn plancherel_field_matches_explicit_slices() {
    let g = spectrum_grid(32, [0.0, 0.0, 1.2], 1.1);
    let f = make_cone_test_function(g, &co(1.1, 0.1, 0.2), 0.4).unwrap();
    let u = BumpSpectrum::at_e(3, 0.5).unwrap();
    let h = h_grid(&CoordBox::default_for(3), 3).unwrap();
    let fast = cone_wavelet_field(&u, &f, &h, 2.0).unwrap();
    let slices = h.nodes.iter().map(|c| cone_wavelet(&u, &f, c).unwrap()).collect();
    let full = ConeWaveletField::from_slices(h, slices).unwrap();
    for (q, s) in [(2.0, 3.0), (1.0, 2.0)] {
        let a = lpqs_norm(&fast, 2.0, q, s).unwrap();
        let b = lpqs_norm(&full, 2.0, q, s).unwrap();
        assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
    }
    assert!(lpqs_norm(&fast, 3.0, 2.0, 3.0).is_err());
    assert!(lpqs_norm(&cone_wavelet_field(&u, &f, &fast.h, 3.0).unwrap(), 3.0, 2.0, 3.0).unwrap() > 0.0);
}

#[test]
fn admissibility_constant_small_support_limit() {
    let eps = 0.05;
    let g = spectrum_grid(64, [0.0, 0.0, 1.0], 0.1);
    let u = BumpSpectrum::at_e(3, eps).unwrap();
    let mass: f64 = (0..g.len()).map(|i| u.eval(&g.w_at(i)).norm_sqr()).sum::<f64>() * g.cell_w();
    let cu = admissibility_cu(&u, &g);
    assert!(mass > 0.0);
    assert!((cu - mass).abs() / mass < 0.02, "{cu} vs {mass}");
}

#[test]
fn orbit_integral_equals_admissibility_constant() {
    let u = BumpSpectrum::at_e(3, 0.5).unwrap();
    let cu = admissibility_cu(&u, &spectrum_grid(64, [0.0, 0.0, 1.5], 2.0));
    let h = h_grid(&CoordBox::default_for(3), 16).unwrap();
    for c in [co(1.0, 0.0, 0.0), co(1.1, 0.2, -0.1), co(0.9, -0.15, 0.15)] {
        let o = orbit_integral(&u, point_from_coords(&c).as_slice(), &h);
        assert!((o - cu).abs() / cu < 0.03, "{c:?}: {o} vs {cu}");
    }
}

#[test]
fn bump_transforms_decay() {
    let grid = default_spectrum_grid(64).unwrap();
    let f = make_cone_test_function(grid, &co(1.0, 0.0, 0.0), 0.4).unwrap();
    let nf = decay_exponent(&f.x, 1e-9).unwrap();
    let w = cone_wavelet(&BumpSpectrum::at_e(3, 0.5).unwrap(), &f, &co(1.0, 0.0, 0.0)).unwrap();
    let nw = decay_exponent(&w, 1e-9).unwrap();
    assert!(nf > 1.0 && nw > 1.0, "{nf} {nw}");
}

fn experiment_inputs(size: usize) -> (Vec<ConeTestFunction>, LPDecomposition) {
    let grid = default_spectrum_grid(size).unwrap();
    let cover = Arc::new(whitney_cover(&CoordBox::default_for(3), 0.4, &CoverOptions::default()).unwrap());
    (default_family(grid.clone()).unwrap(), make_lp_partition(cover, grid).unwrap())
}

#[test]
fn equivalence_ratio_is_scale_free() {
    let (family, lp) = experiment_inputs(32);
    let u = BumpSpectrum::at_e(3, 0.5).unwrap();
    let h = h_grid(&CoordBox::default_for(3), 4).unwrap();
    let params = EquivalenceParams { n: 3, p: 2.0, q: 2.0, s: 3.0 };
    assert_eq!(params.sigma(), 3.0);
    let one = equivalence_run(&params, &family[..1], &lp, &u, &h).unwrap();
    assert_eq!(one.c_emp, 1.0);
    let scaled = equivalence_run(&params, &[family[0].scaled(7.0)], &lp, &u, &h).unwrap();
    let (a, b) = (one.per_function[0].rho, scaled.per_function[0].rho);
    assert!((a - b).abs() < 1e-12 * a);
    let all = equivalence_run(&params, &family, &lp, &u, &h).unwrap();
    assert!(all.c_emp.is_finite() && all.c_emp >= 1.0);
    assert!(equivalence_run(&params, &[], &lp, &u, &h).is_err());
    assert!(equivalence_run(&EquivalenceParams { p: 0.5, ..params }, &family, &lp, &u, &h).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_is_unitary(a in 1u32..5, b in 1u32..5, seed in any::<u64>(), c in -1.0f64..1.0, half in 0.5f64..4.0) {
        let sizes = [1usize << a, 1usize << b, 4];
        let g = Arc::new(BoxGrid::for_spectrum(&sizes, &[c, -c, 1.0], &[half, 2.0 * half, half]).unwrap());
        let f = GridFunctionN::new(g.clone(), Domain::X, random_values(g.len(), seed)).unwrap();
        let ft = bfourier(&f).unwrap();
        prop_assert!((l2(&ft) - l2(&f)).abs() < 1e-10 * l2(&f));
        let back = bfourier_inv(&ft).unwrap();
        prop_assert!(max_diff(back.values(), f.values()) < 1e-12);
    }

    #[test]
    fn lp_step_is_a_monotone_cutoff(a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(lp_step(lo) >= lp_step(hi));
        prop_assert!((0.0..=1.0).contains(&lp_step(a)));
    }

    #[test]
    fn ball_extent_bounds_the_ball(g in 0.5f64..2.0, t in -0.8f64..0.8, c in -0.8f64..0.8, r in 0.1f64..0.8, seed in any::<u64>()) {
        let centre = co(g, t, c);
        let w0 = point_from_coords(&centre);
        let ext = ball_extent(&w0, r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let p = point_from_coords(&co(g * rng.gen_range(-r..r).exp(), t + rng.gen_range(-2.0 * r..2.0 * r), c + rng.gen_range(-3.0 * r..3.0 * r)));
            if invariant_distance(&w0, &p) < r {
                for k in 0..3 {
                    prop_assert!(p.as_slice()[k] >= ext[k].0 - 1e-9 && p.as_slice()[k] <= ext[k].1 + 1e-9);
                }
            }
        }
    }
}
