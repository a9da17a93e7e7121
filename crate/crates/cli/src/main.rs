mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use coorbit::affine::{GridFunction1G, Window, DEFAULT_RESOLUTION};
use coorbit::axioms::AxiomReport;
use coorbit::besov::{
    besov_report, default_family, default_spectrum_grid, make_lp_partition, BesovReport, EquivalenceParams, NormPath,
    PartitionCertificate,
};
use coorbit::cone::{whitney_cover, CoordBox, CoverCertificate, CoverFile, CoverOptions};
use coorbit::disc::{check_correspondence_range, wavelet_uu, DiscVoice};
use coorbit::experiments::{
    axiom_suite, closed_form_experiment, correspondence_experiment, equivalence_default,
    reconstruct_wuu, reproducing_experiment, wavelet_grid, AtomicSetup, EquivalenceSetup,
};
use coorbit::io::{write_csv_file, write_grid_function_csv, write_json};
use coorbit::Error;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "coorbit", version, about = "Coorbit-space experiments on the disc and on the light cone")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete series of the affine group on the disc.
    Disc {
        #[command(subcommand)]
        op: DiscOp,
    },
    /// Besov spaces on the forward light cone.
    Cone {
        #[command(subcommand)]
        op: ConeOp,
    },
    /// Axiom checks of the disc voice transform; writes axioms.json.
    Check(Common),
}

#[derive(Subcommand)]
enum DiscOp {
    /// Samples W_u^s(u), checks closed form and reproducing formula; writes wavelet.csv and axioms.json.
    Wavelet(Common),
    /// Coorbit versus Bergman norm ratios over {1, z, z^2, 1+z, z^3}; writes ratios.json.
    Norms(Common),
    /// Atomic reconstruction of W_u^s(u) from lattice samples; writes reconstruction.csv and reconstruction.json.
    Reconstruct(Common),
}

#[derive(Subcommand)]
enum ConeOp {
    /// Certified Whitney cover of the default region; writes cover.json.
    Cover(Common),
    /// Besov norms of the default bump family; writes besov.json.
    Besov(Common),
    /// Besov versus coorbit norm equivalence; writes equivalence.json.
    Equivalence(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// File of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<String>,
    /// Any other parameter, e.g. `--set a0=1.4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn flags(&self) -> Result<BTreeMap<String, String>, Error> {
        let mut m = BTreeMap::new();
        for (k, v) in [
            ("n", &self.n),
            ("p", &self.p),
            ("q", &self.q),
            ("s", &self.s),
            ("r", &self.r),
            ("delta", &self.delta),
            ("seed", &self.seed),
            ("tol", &self.tol),
            ("out", &self.out),
        ] {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                return Err(Error::InvalidParameter(format!("--set expects KEY=VALUE, got '{kv}'")));
            };
            m.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(m)
    }

    fn config(&self, command: &str, allowed: &[&str]) -> Result<ExperimentConfig, Error> {
        ExperimentConfig::build(command, self.config.as_deref(), self.flags()?, allowed)
    }
}

/// Threshold outcome of a finished run.
enum Outcome {
    Pass,
    Fail,
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn prepare(out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("cannot create output directory {}: {e}", out.display())))
}

fn group_window(cfg: &ExperimentConfig, l: f64, b_max: f64) -> Result<Window, Error> {
    Window::symmetric(cfg.positive("l", l)?, cfg.positive("b_max", b_max)?)
}

fn disc_s(cfg: &ExperimentConfig, default: f64) -> Result<f64, Error> {
    let s = cfg.get("s", default)?;
    DiscVoice::new(s)?;
    Ok(s)
}

#[derive(Serialize)]
struct WaveletArtifact {
    s: f64,
    c: f64,
    c_exact: f64,
    tail_fraction: Option<f64>,
    window_warning: bool,
    reports: Vec<AxiomReport>,
    pass: bool,
}

fn disc_wavelet(common: &Common) -> Result<Outcome, Error> {
    let cfg = common.config("disc wavelet", &["s", "seed", "tol", "n_a", "n_b", "l", "b_max"])?;
    let s = disc_s(&cfg, 4.0)?;
    let seed = cfg.get("seed", 0u64)?;
    let tol = cfg.get("tol", 1e-2)?;
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be >= 0, got {tol}")));
    }
    let res = (cfg.count("n_a", DEFAULT_RESOLUTION.0, 2)?, cfg.count("n_b", DEFAULT_RESOLUTION.1, 2)?);
    let window = group_window(&cfg, 4.0, 40.0)?;
    prepare(&cfg.out)?;

    let grid = wavelet_grid(window, res)?;
    let wuu = GridFunction1G::sample(grid, &|g| wavelet_uu(s, g));
    write_csv_file(&cfg.out.join("wavelet.csv"), |w| write_grid_function_csv(&wuu, w))?;
    let cf = closed_form_experiment(&[s], 20, seed, 1e-6)?;
    let rep = reproducing_experiment(s, window, res, tol)?;
    let reports = vec![
        AxiomReport::new("closed form agrees with disc quadrature", cf.max_error, 1e-6, None, cf.cases),
        rep.report,
    ];
    let pass = reports.iter().all(|r| r.pass);
    let art = WaveletArtifact {
        s,
        c: rep.admissibility.c,
        c_exact: rep.c_exact,
        tail_fraction: rep.admissibility.tail_fraction,
        window_warning: rep.admissibility.window_warning,
        reports,
        pass,
    };
    write_json(&cfg.out.join("axioms.json"), &art)?;
    println!("disc wavelet s={s}: c={:.6} (exact {:.6}), pass={pass}", art.c, art.c_exact);
    Ok(outcome(pass))
}

fn disc_norms(common: &Common) -> Result<Outcome, Error> {
    let cfg = common.config("disc norms", &["s", "r", "p", "tol", "refine"])?;
    let s = cfg.get("s", 4.0)?;
    let r = cfg.get("r", 0.0)?;
    let p = cfg.get("p", 2.0)?;
    let tol = cfg.positive("tol", 5e-3)?;
    let refine = cfg.get("refine", false)?;
    check_correspondence_range(s, r, p)?;
    prepare(&cfg.out)?;
    let run = correspondence_experiment(s, r, p, refine, tol)?;
    write_json(&cfg.out.join("ratios.json"), &run)?;
    println!("disc norms s={s} r={r} p={p}: spread {:.3e}, pass={}", run.default.spread, run.pass);
    Ok(outcome(run.pass))
}

#[derive(Serialize)]
struct Thresholds {
    error: f64,
    r_squared: f64,
}

#[derive(Serialize)]
struct ReconstructionArtifact {
    setup: AtomicSetup,
    thresholds: Thresholds,
    summary: Option<coorbit::atomic::ReconstructionSummary>,
    refusal: Option<String>,
    contraction_ok: bool,
    geometric_ok: bool,
    error_ok: bool,
    pass: bool,
}

fn disc_reconstruct(common: &Common) -> Result<Outcome, Error> {
    let cfg = common.config(
        "disc reconstruct",
        &["s", "p", "r", "a0", "b0", "iters", "l", "b_max", "n_a", "n_b", "tol", "r2_min"],
    )?;
    let d = AtomicSetup::default();
    let a0 = cfg.get("a0", d.a0)?;
    if !(a0 > 1.0) {
        return Err(Error::InvalidParameter(format!("lattice dilation a0 must be > 1, got {a0}")));
    }
    let setup = AtomicSetup {
        s: disc_s(&cfg, d.s)?,
        p: cfg.exponent("p", d.p)?,
        r: cfg.get("r", d.r)?,
        a0,
        b0: cfg.positive("b0", d.b0)?,
        window: group_window(&cfg, 2.0, d.window.b_max)?,
        eval: (cfg.count("n_a", d.eval.0, 2)?, cfg.count("n_b", d.eval.1, 2)?),
        iters: cfg.count("iters", d.iters, 1)?,
        ..d
    };
    let thresholds = Thresholds { error: cfg.positive("tol", 1e-2)?, r_squared: cfg.get("r2_min", 0.99)? };
    prepare(&cfg.out)?;
    let mut art = ReconstructionArtifact {
        setup,
        thresholds,
        summary: None,
        refusal: None,
        contraction_ok: false,
        geometric_ok: false,
        error_ok: false,
        pass: false,
    };
    match reconstruct_wuu(&setup) {
        Ok((field, summary)) => {
            write_csv_file(&cfg.out.join("reconstruction.csv"), |w| write_grid_function_csv(&field, w))?;
            art.contraction_ok = summary.q_first < 1.0 && summary.q < 1.0;
            art.geometric_ok = summary.r_squared > art.thresholds.r_squared;
            art.error_ok = summary.final_error.is_some_and(|e| e < art.thresholds.error);
            art.pass = art.contraction_ok && art.geometric_ok && art.error_ok;
            println!(
                "disc reconstruct a0={} b0={}: {} points, error {:.3e}, R^2 {:.3}, pass={}",
                setup.a0,
                setup.b0,
                summary.lattice.count,
                summary.final_error.unwrap_or(f64::NAN),
                summary.r_squared,
                art.pass
            );
            art.summary = Some(summary);
        }
        Err(e @ (Error::Refused(_) | Error::Certification(_))) => {
            println!("disc reconstruct a0={} b0={}: {e}", setup.a0, setup.b0);
            art.refusal = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    write_json(&cfg.out.join("reconstruction.json"), &art)?;
    Ok(outcome(art.pass))
}

#[derive(Serialize)]
struct CoverArtifact {
    #[serde(flatten)]
    file: CoverFile,
    certificate: CoverCertificate,
    dense_certificate: CoverCertificate,
}

fn cone_cover(common: &Common) -> Result<Outcome, Error> {
    let cfg = common.config("cone cover", &["n", "delta", "seed"])?;
    let n = cfg.dimension(3)?;
    let delta = cfg.positive("delta", 0.4)?;
    let seed = cfg.opt::<u64>("seed")?;
    prepare(&cfg.out)?;
    let region = CoordBox::default_for(n);
    let cover = whitney_cover(&region, delta, &CoverOptions { seed, ..CoverOptions::default() })?;
    let dense = cover.certify(&region.random(10 * cover.certificate.probes, seed.unwrap_or(0)));
    let pass = cover.certificate.pass() && dense.pass();
    let art = CoverArtifact { file: cover.to_file(), certificate: cover.certificate.clone(), dense_certificate: dense };
    write_json(&cfg.out.join("cover.json"), &art)?;
    println!("cone cover n={n} delta={delta}: {} points, N={}, pass={pass}", cover.len(), cover.n_overlap);
    Ok(outcome(pass))
}

fn spectrum_size(cfg: &ExperimentConfig) -> Result<usize, Error> {
    let size = cfg.get("size", 64usize)?;
    if size < 8 || !size.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("size must be a power of two >= 8, got {size}")));
    }
    Ok(size)
}

fn cone_dimension_three(cfg: &ExperimentConfig) -> Result<(), Error> {
    let n = cfg.dimension(3)?;
    if n != 3 {
        return Err(Error::InvalidParameter(format!("{} is implemented for n = 3 only, got n = {n}", cfg.command)));
    }
    Ok(())
}

#[derive(Serialize)]
struct BesovRow {
    gamma: f64,
    t: f64,
    c: Vec<f64>,
    width: f64,
    report: BesovReport,
}

#[derive(Serialize)]
struct BesovArtifact {
    p: f64,
    q: f64,
    sigma: f64,
    delta: f64,
    cover_points: usize,
    partition: PartitionCertificate,
    functions: Vec<BesovRow>,
    pass: bool,
}

fn cone_besov(common: &Common) -> Result<Outcome, Error> {
    let cfg = common.config("cone besov", &["n", "p", "q", "s", "delta", "size"])?;
    cone_dimension_three(&cfg)?;
    let p = cfg.exponent("p", 2.0)?;
    let q = cfg.exponent("q", 2.0)?;
    let sigma = cfg.get("s", 1.5)?;
    let delta = cfg.positive("delta", 0.4)?;
    let size = spectrum_size(&cfg)?;
    prepare(&cfg.out)?;
    let grid = default_spectrum_grid(size)?;
    let cover = Arc::new(whitney_cover(&CoordBox::default_for(3), delta, &CoverOptions::default())?);
    let lp = make_lp_partition(cover.clone(), grid.clone())?;
    let partition = lp.certify();
    let mut functions = Vec::new();
    for f in default_family(grid)? {
        let report = besov_report(&f.spectrum, p, q, sigma, &lp, NormPath::Auto)?;
        functions.push(BesovRow { gamma: f.centre.gamma, t: f.centre.t, c: f.centre.c.clone(), width: f.width, report });
    }
    let pass = partition.sum_defect < 1e-12
        && partition.range_ok
        && partition.support_ok
        && functions.iter().all(|f| f.report.norm.is_finite() && f.report.warnings.is_empty());
    let art = BesovArtifact { p, q, sigma, delta, cover_points: cover.len(), partition, functions, pass };
    write_json(&cfg.out.join("besov.json"), &art)?;
    println!("cone besov p={p} q={q} sigma={sigma}: {} functions, pass={pass}", art.functions.len());
    Ok(outcome(pass))
}

fn cone_equivalence(common: &Common) -> Result<Outcome, Error> {
    let cfg = common.config(
        "cone equivalence",
        &["n", "p", "q", "s", "delta", "seed", "tol", "size", "h", "u_width"],
    )?;
    cone_dimension_three(&cfg)?;
    let d = EquivalenceSetup::default();
    let setup = EquivalenceSetup {
        params: EquivalenceParams {
            n: 3,
            p: cfg.exponent("p", d.params.p)?,
            q: cfg.exponent("q", d.params.q)?,
            s: cfg.get("s", d.params.s)?,
        },
        delta: cfg.positive("delta", d.delta)?,
        spectrum_size: spectrum_size(&cfg)?,
        h_per_axis: cfg.count("h", d.h_per_axis, 1)?,
        u_width: cfg.positive("u_width", d.u_width)?,
        alt_seed: cfg.get("seed", d.alt_seed)?,
        drift_tol: cfg.positive("tol", d.drift_tol)?,
    };
    prepare(&cfg.out)?;
    let out = equivalence_default(&setup)?;
    write_json(&cfg.out.join("equivalence.json"), &out)?;
    println!(
        "cone equivalence p={} q={} s={}: C_emp {:.4}, refinement drift {:.2}%, cover drift {:.2}%, pass={}",
        setup.params.p,
        setup.params.q,
        setup.params.s,
        out.report.c_emp,
        100.0 * out.report.refinement_drift,
        100.0 * out.report.cover_drift.unwrap_or(f64::NAN),
        out.pass
    );
    Ok(outcome(out.pass))
}

fn check(common: &Common) -> Result<Outcome, Error> {
    let cfg = common.config("check", &["seed", "tol", "n_a", "n_b", "l", "b_max"])?;
    let seed = cfg.get("seed", 0u64)?;
    let tol = cfg.get("tol", 1e-2)?;
    let res = (cfg.count("n_a", DEFAULT_RESOLUTION.0, 2)?, cfg.count("n_b", DEFAULT_RESOLUTION.1, 2)?);
    let window = group_window(&cfg, 4.0, 40.0)?;
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be >= 0, got {tol}")));
    }
    prepare(&cfg.out)?;
    let suite = axiom_suite(seed, tol, window, res)?;
    write_json(&cfg.out.join("axioms.json"), &suite)?;
    for r in suite.closed_form.iter().chain(&suite.quadrature) {
        println!("{:<55} residual {:.3e} tol {:.1e} {}", r.axiom, r.residual, r.tolerance, if r.pass { "pass" } else { "FAIL" });
    }
    Ok(outcome(suite.pass))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Range(_) | Error::Domain(_) => 2,
        Error::Refused(_) | Error::Certification(_) => 3,
        Error::Grid(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Disc { op: DiscOp::Wavelet(c) } => disc_wavelet(c),
        Command::Disc { op: DiscOp::Norms(c) } => disc_norms(c),
        Command::Disc { op: DiscOp::Reconstruct(c) } => disc_reconstruct(c),
        Command::Cone { op: ConeOp::Cover(c) } => cone_cover(c),
        Command::Cone { op: ConeOp::Besov(c) } => cone_besov(c),
        Command::Cone { op: ConeOp::Equivalence(c) } => cone_equivalence(c),
        Command::Check(c) => check(c),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
