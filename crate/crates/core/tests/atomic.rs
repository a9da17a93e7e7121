use std::sync::{Arc, OnceLock};

use coorbit::affine::*;
use coorbit::atomic::*;
use coorbit::disc::{standard_family, wavelet_closed, wavelet_uu, PowerSeries};
use coorbit::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const S: f64 = 4.0;

fn window() -> Window {
    Window::new((-1.5f64).exp(), 1.5f64.exp(), 6.0).unwrap()
}

fn kernel() -> Kernel {
    Kernel { s: S, c: admissibility_exact(S) }
}

fn wuu(g: GroupElement) -> Complex64 {
    wavelet_uu(S, g)
}

struct Setup {
    pou: PartitionOfUnity,
    eval: Arc<GroupGrid>,
    full: Arc<GroupGrid>,
}

fn setup() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| {
        let win = window();
        let lat = Arc::new(generate_lattice(1.2, 0.25, win).unwrap());
        let pou = build_partition(lat, CellBox::for_lattice(1.2, 0.25, 1.5), 8, win.inner_half(), 60).unwrap();
        Setup { pou, eval: inner_eval_grid(win, 24, 64).unwrap(), full: Arc::new(haar_grid(win, 48, 192).unwrap()) }
    })
}

fn rel_dev(a: &GridFunction1G, b: &GridFunction1G) -> f64 {
    let d: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    lp_r_norm(&GridFunction1G::new(a.grid().clone(), d).unwrap(), 2.0, 0.0).unwrap() / lp_r_norm(b, 2.0, 0.0).unwrap()
}

#[test]
fn dense_t2_reproduces_the_kernel() {
    let st = setup();
    let exact = GridFunction1G::sample(st.eval.clone(), &wuu);
    let t2 = Discretization::new(Variant::T2, &st.pou, kernel()).apply(&wuu, st.eval.clone());
    assert!(rel_dev(&t2, &exact) < 0.05);
}

#[test]
fn t1_deviation_respects_the_oscillation_estimate() {
    let st = setup();
    let exact = GridFunction1G::sample(st.eval.clone(), &wuu);
    let t1 = Discretization::new(Variant::T1, &st.pou, kernel()).apply(&wuu, st.eval.clone());
    let eps = oscillation_sup(S, &st.pou.cell(), &probe_points(window().inner_half(), 30), 9);
    let dp = estimate_dp(&[GridFunction1G::sample(st.full.clone(), &wuu)], &kernel(), 2.0, 0.0).unwrap();
    let dev = rel_dev(&t1, &exact);
    assert!(dp.is_finite() && dp > 0.0);
    assert!(dev <= eps * dp, "{dev} > {eps} * {dp}");
}

#[test]
fn zero_field_maps_to_zero() {
    let st = setup();
    let zero = |_: GroupElement| Complex64::new(0.0, 0.0);
    for v in [Variant::T1, Variant::T2, Variant::T3] {
        assert_eq!(Discretization::new(v, &st.pou, kernel()).apply(&zero, st.eval.clone()).max_abs(), 0.0);
    }
}

fn ratio_spread(rs: &[f64]) -> f64 {
    rs.iter().cloned().fold(0.0, f64::max) / rs.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn sampling_and_integral_maps_are_uniformly_bounded() {
    let st = setup();
    let lat = st.pou.lattice().clone();
    let t3 = Discretization::new(Variant::T3, &st.pou, kernel());
    let (mut k_sample, mut k_integral) = (Vec::new(), Vec::new());
    for (_, f) in standard_family() {
        let field = |g: GroupElement| wavelet_closed(S, &f, g).unwrap();
        let norm = lp_r_norm(&GridFunction1G::sample(st.full.clone(), &field), 2.0, 0.0).unwrap();
        let samples = SampledCoefficients::sample(lat.clone(), &field);
        k_sample.push(samples.seq_norm(2.0, 0.0).unwrap() / norm);
        let ints = SampledCoefficients { lattice: lat.clone(), values: t3.functional(&field) };
        k_integral.push(ints.seq_norm(2.0, 0.0).unwrap() / norm);
    }
    assert!(ratio_spread(&k_sample) < 2.0, "{k_sample:?}");
    assert!(ratio_spread(&k_integral) < 2.0, "{k_integral:?}");
}

#[test]
fn synthesis_map_obeys_the_schur_bound() {
    let st = setup();
    let lat = st.pou.lattice();
    let disc = Discretization::new(Variant::T2, &st.pou, kernel());
    let k = kernel();
    let central: Vec<usize> = (0..lat.len()).filter(|&i| window().inner_half().contains(lat.points()[i])).collect();
    // ⟨ℓ_x K, ℓ_y K⟩ = K(x⁻¹y) by the reproducing identity; Schur's test bounds the Gram matrix
    let schur = central
        .iter()
        .map(|&i| central.iter().map(|&j| k.value(lat.points()[i].inv().mul(&lat.points()[j])).norm()).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let mut lambda = vec![Complex64::new(0.0, 0.0); lat.len()];
        for _ in 0..25 {
            let i = central[rng.gen_range(0..central.len())];
            lambda[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let synth = GridFunction1G::new(st.full.clone(), disc.synthesize_at(&lambda, st.full.nodes())).unwrap();
        let seq = SampledCoefficients { lattice: lat.clone(), values: lambda }.seq_norm(2.0, 0.0).unwrap();
        let ratio = lp_r_norm(&synth, 2.0, 0.0).unwrap() / seq;
        assert!(ratio <= 1.05 * schur, "{ratio} > {schur}");
    }
}

#[test]
fn oscillation_box_survives_denser_samples_and_widening_breaks_it() {
    let search = OscillationSearch { x_samples: 40, ..Default::default() };
    let cell = oscillation_radius(S, 0.1, &search).unwrap();
    assert!(cell.log_alpha > 0.0);
    // 10× the (x, y) samples
    let dense = probe_points(search.window, 127);
    assert!(oscillation_sup(S, &cell, &dense, search.u_samples) < 0.1);
    assert!(corollary_constants(&cell, S, 0.1, &dense, search.u_samples).verified);
    let wider = CellBox { log_alpha: 2.0 * cell.log_alpha, shear: 2.0 * cell.shear };
    let xs = probe_points(search.window, search.x_samples);
    assert!(oscillation_sup(S, &wider, &xs, search.u_samples) >= 0.1);
    // the modulus bound is weaker than the complex ratio bound and breaks one rung further out
    let widest = CellBox { log_alpha: 4.0 * cell.log_alpha, shear: 4.0 * cell.shear };
    assert!(!corollary_constants(&widest, S, 0.1, &xs, search.u_samples).verified);
}

#[test]
fn neumann_zeroth_partial_sum_is_the_target() {
    let st = setup();
    let disc = Discretization::new(Variant::T2, &st.pou, kernel());
    let res = neumann_invert(&disc, Target::Field(&wuu), 0, st.eval.clone(), 2.0, 0.0).unwrap();
    assert_eq!(res.mu, 1.0);
    assert!(res.nu.iter().all(|v| v.norm() == 0.0));
    let exact = GridFunction1G::sample(st.eval.clone(), &wuu);
    assert!(rel_dev(&res.approx, &exact) < 1e-14);
}

#[test]
fn zero_samples_reconstruct_to_zero() {
    let st = setup();
    let zero = SampledCoefficients::sample(st.pou.lattice().clone(), &|_: GroupElement| Complex64::new(0.0, 0.0));
    let (rec, summary) =
        reconstruct(&zero, &st.pou, kernel(), 5, st.eval.clone(), 2.0, 0.0, Some(&PowerSeries::real(&[0.0]))).unwrap();
    assert_eq!(rec.max_abs(), 0.0);
    assert_eq!(summary.final_error, Some(0.0));
}
