//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so that every line is printed; the
//! process exits non-zero if any criterion fails.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwpsr::degrade::{degrade, gaussian_kernel, noise_field, NoiseSpec, Preset};
use rwpsr::grid::dft2;
use rwpsr::imgio::{encode_image, format_curve, read_image, ExperimentMeta, ImageFormat};
use rwpsr::linops::{embed_kernel, DEFAULT_EPSILON};
use rwpsr::metrics::{bicubic_upsample, bicubic_upsample_aligned, isnr, quality_report, BicubicAlignment, IsnrConvention};
use rwpsr::solver::{dense_solve, residual_lr, solve};
use rwpsr::tuning::{select_dp, select_rwp, tau_of_mu, MuGrid};
use rwpsr::whiteness::{fast_whiteness, whiteness_measure, CurvePoint, WhitenessCurve};
use rwpsr::{
    AliasGroups, DecimationFactors, DegradationOperator, ImageGrid, RegularizerStack, SpectralSolveContext,
    WhitenessTable,
};

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_grid(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ImageGrid {
    ImageGrid::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_kernel(side: usize, rng: &mut ChaCha8Rng) -> ImageGrid {
    let k = ImageGrid::from_fn(side, side, |_, _| rng.random_range(0.05..1.0));
    let s = k.sum();
    k.scale(1.0 / s)
}

fn fixture(name: &str) -> ImageGrid {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    read_image(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rel_err(a: &ImageGrid, b: &ImageGrid) -> f64 {
    a.sub(b).unwrap().norm() / b.norm()
}

/// Spectral solve against the dense normal equations on random problems.
fn solver_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for inst in 0..50 {
        let d = if inst % 2 == 0 { 1 } else { 2 };
        let lr = (rng.random_range(2..=8), rng.random_range(2..=8));
        let hr = (lr.0 * d, lr.1 * d);
        let f = DecimationFactors::uniform(d).unwrap();
        let sides: Vec<usize> = [1, 3, 5].into_iter().filter(|&s| s <= hr.0.min(hr.1)).collect();
        let side = sides[rng.random_range(0..sides.len())];
        let op = DegradationOperator::new(&random_kernel(side, &mut rng), hr, f).unwrap();
        let reg = if inst % 4 < 2 {
            let mut blocks = RegularizerStack::finite_differences(hr, DEFAULT_EPSILON)
                .unwrap()
                .blocks()
                .iter()
                .map(|b| (b.kernel().clone(), random_grid(hr.0, hr.1, &mut rng)))
                .collect::<Vec<_>>();
            blocks.truncate(2);
            RegularizerStack::new(hr, blocks, DEFAULT_EPSILON).unwrap()
        } else {
            let k = embed_kernel(&random_grid(3.min(hr.0), 3.min(hr.1), &mut rng), hr).unwrap();
            RegularizerStack::new(hr, vec![(k, random_grid(hr.0, hr.1, &mut rng))], DEFAULT_EPSILON).unwrap()
        };
        let b = random_grid(lr.0, lr.1, &mut rng);
        let ctx = SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
        for mu in [1e-2, 1.0, 1e2] {
            let fast = solve(mu, &ctx).unwrap();
            let dense = dense_solve(mu, &b, &op, &reg).unwrap();
            worst = worst.max(rel_err(&fast, &dense));
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 10.0,
        format!("{count} solves, max rel err {worst:.2e} (tol 1e-8), {secs:.2} s (limit 10 s)"),
    )
}

/// Closed-form whiteness is a mu-independent multiple of the explicit one.
fn whiteness_fast_path() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = MuGrid::new(1e-3, 1e3, 20).unwrap();
    let mut worst_spread: f64 = 0.0;
    let mut argmin_agree = 0;
    for inst in 0..20 {
        let d = 1 + inst % 3;
        let lr = (rng.random_range(4..=12), rng.random_range(4..=12));
        let hr = (lr.0 * d, lr.1 * d);
        let f = DecimationFactors::uniform(d).unwrap();
        let op = DegradationOperator::new(&random_kernel(3, &mut rng), hr, f).unwrap();
        let reg = RegularizerStack::finite_differences(hr, DEFAULT_EPSILON).unwrap();
        let b = random_grid(lr.0, lr.1, &mut rng);
        let ctx = SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
        let table = WhitenessTable::build(&ctx);
        let mut ratios = Vec::new();
        let (mut fast, mut slow) = (Vec::new(), Vec::new());
        for mu in grid.values() {
            let w_fast = fast_whiteness(mu, &table).unwrap();
            let r = residual_lr(&solve(mu, &ctx).unwrap(), &b, &op).unwrap();
            let w_slow = whiteness_measure(&r).unwrap();
            ratios.push(w_fast / w_slow);
            fast.push(w_fast);
            slow.push(w_slow);
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(l, h), &r| (l.min(r), h.max(r)));
        worst_spread = worst_spread.max((hi - lo) / lo);
        let argmin = |v: &[f64]| (0..v.len()).fold(0, |best, k| if v[k] < v[best] { k } else { best });
        if argmin(&fast) == argmin(&slow) {
            argmin_agree += 1;
        }
    }
    outcome(
        worst_spread <= 1e-8 && argmin_agree == 20,
        format!("20 instances, max ratio spread {worst_spread:.2e} (tol 1e-8), argmins equal {argmin_agree}/20"),
    )
}

/// Direct spatial autocorrelation against the spectral whiteness measure.
fn autocorrelation_bridge() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (r, c) = (rng.random_range(3..=20), rng.random_range(3..=20));
        let e = random_grid(r, c, &mut rng);
        let mut acf_sq = 0.0;
        for l in 0..r {
            for m in 0..c {
                let mut s = 0.0;
                for i in 0..r {
                    for j in 0..c {
                        s += e.get(i, j) * e.get((i + l) % r, (j + m) % c);
                    }
                }
                acf_sq += s * s;
            }
        }
        let spatial = acf_sq / e.norm_sq().powi(2);
        let spectral = e.len() as f64 * whiteness_measure(&e).unwrap();
        worst = worst.max((spatial - spectral).abs() / spectral);
    }
    outcome(worst <= 1e-10, format!("20 images, max rel err {worst:.2e} (tol 1e-10)"))
}

/// Unitary 2-D DFT as a dense matrix on row-major vectors.
fn dft_matrix(rows: usize, cols: usize) -> DMatrix<Complex64> {
    let n = rows * cols;
    let mut m = DMatrix::zeros(n, n);
    for q in 0..n {
        let basis = ImageGrid::from_fn(rows, cols, |i, j| if i * cols + j == q { 1.0 } else { 0.0 });
        for (p, v) in dft2(&basis).data().iter().enumerate() {
            m[(p, q)] = *v;
        }
    }
    m
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Structure of `F S^H S F^H` for a 3x3 grid decimated by 2 in each direction.
fn alias_structure() -> Outcome {
    let (n, d) = (3, 2);
    let hr = (n * d, n * d);
    let f = DecimationFactors::uniform(d).unwrap();
    let big_n = hr.0 * hr.1;
    let fm = dft_matrix(hr.0, hr.1);
    let mask = DMatrix::from_fn(big_n, big_n, |p, q| {
        let keep = p == q && (p / hr.1) % d == 0 && (p % hr.1) % d == 0;
        Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
    });
    let m = &fm * mask * fm.adjoint();

    let j = DMatrix::from_element(d, d, 1.0);
    let i3 = DMatrix::identity(n, n);
    let factor = kron(&j, &i3);
    let expected = kron(&factor, &factor) / (d * d) as f64;
    let mut dev: f64 = 0.0;
    for p in 0..big_n {
        for q in 0..big_n {
            dev = dev.max((m[(p, q)] - Complex64::new(expected[(p, q)], 0.0)).norm());
        }
    }

    let groups = AliasGroups::new(hr, f).unwrap();
    let perm = groups.permutation();
    let block = kron(&DMatrix::identity(n * n, n * n), &DMatrix::from_element(d * d, d * d, 1.0));
    let mut pattern_ok = true;
    let mut perm_dev: f64 = 0.0;
    for p in 0..big_n {
        for q in 0..big_n {
            let v = m[(perm[p], perm[q])];
            let nonzero = v.norm() > 1e-10;
            pattern_ok &= nonzero == (block[(p, q)] != 0.0);
            perm_dev = perm_dev.max((v - Complex64::new(block[(p, q)] / (d * d) as f64, 0.0)).norm());
        }
    }
    outcome(
        dev <= 1e-10 && pattern_ok && perm_dev <= 1e-10,
        format!(
            "Kronecker form max dev {dev:.2e} (tol 1e-10), permuted pattern I_9 x J_4 {}, permuted max dev {perm_dev:.2e}",
            if pattern_ok { "exact" } else { "MISMATCH" }
        ),
    )
}

/// Discrepancy selection hits `tau = 1`, checked through an explicit solve.
fn dp_contract() -> Outcome {
    let x = fixture("cameraman.pgm");
    let preset = Preset::Test1;
    let sigma = preset.noise_sigma();
    let (b, _) = degrade(&x, &preset.psf(), preset.decimation(), &NoiseSpec { sigma, seed: 5 }).unwrap();
    let op = DegradationOperator::new(&gaussian_kernel(&preset.psf()).unwrap(), x.shape(), preset.decimation()).unwrap();
    let reg = RegularizerStack::finite_differences(x.shape(), DEFAULT_EPSILON).unwrap();
    let ctx = SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
    let table = WhitenessTable::build(&ctx);
    let report = select_dp(&table, sigma, 1.0, &MuGrid::default()).unwrap();
    let tau = tau_of_mu(report.mu_star, &ctx, sigma).unwrap();
    let err = (tau - 1.0).abs();
    outcome(
        err <= 1e-6,
        format!("mu*={:.6e}, tau from explicit residual {tau:.9} (|tau-1| {err:.1e}, tol 1e-6)", report.mu_star),
    )
}

/// Whiteness selection on natural images in both degradation settings.
fn natural_image_band() -> Outcome {
    let mut pass = true;
    let mut detail = String::new();
    for preset in [Preset::Test1, Preset::Test2] {
        for (name, seed) in [("cameraman.pgm", 11), ("astronaut.pgm", 12)] {
            let start = Instant::now();
            let x = fixture(name);
            let f = preset.decimation();
            let sigma = preset.noise_sigma();
            let (b, _) = degrade(&x, &preset.psf(), f, &NoiseSpec { sigma, seed }).unwrap();
            let op = DegradationOperator::new(&gaussian_kernel(&preset.psf()).unwrap(), x.shape(), f).unwrap();
            let reg = RegularizerStack::finite_differences(x.shape(), DEFAULT_EPSILON).unwrap();
            let ctx = SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
            let table = WhitenessTable::build(&ctx);
            let report = select_rwp(&table, &MuGrid::default()).unwrap();
            let x_star = solve(report.mu_star, &ctx).unwrap();
            let tau = tau_of_mu(report.mu_star, &ctx, sigma).unwrap();
            let baseline = bicubic_upsample(&b, f);
            let q = quality_report(&x, &x_star, &baseline, IsnrConvention::Norm, Some(tau)).unwrap();
            let q_base = rwpsr::metrics::ssim(&x, &baseline).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let ok = (0.85..=1.15).contains(&tau) && q.isnr > 0.0 && q.ssim > q_base && secs < 60.0;
            // reported only: the baseline interpolated on the decimation phase
            let phase = bicubic_upsample_aligned(&b, f, BicubicAlignment::SamplePhase);
            let isnr_phase = isnr(&x, &x_star, &phase, IsnrConvention::Norm).unwrap();
            pass &= ok;
            write!(
                detail,
                "\n    {} {name}: tau*={tau:.4} [0.85,1.15], ISNR={:+.4} dB (>0; {isnr_phase:+.4} vs phase-aligned bicubic), SSIM {:.4} vs bicubic {:.4}, {secs:.1} s -> {}",
                preset.name(),
                q.isnr,
                q.ssim,
                q_base,
                if ok { "ok" } else { "FAIL" }
            )
            .unwrap();
        }
    }
    outcome(pass, detail)
}

/// Table precomputation once, then a 200-point sweep at 512x512.
fn sweep_cost() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = ImageGrid::from_fn(512, 512, |_, _| rng.random_range(0.0..1.0));
    let preset = Preset::Test1;
    let (b, _) = degrade(&x, &preset.psf(), preset.decimation(), &NoiseSpec { sigma: 0.05, seed: 7 }).unwrap();
    let t0 = Instant::now();
    let op = DegradationOperator::new(&gaussian_kernel(&preset.psf()).unwrap(), x.shape(), preset.decimation()).unwrap();
    let reg = RegularizerStack::finite_differences(x.shape(), DEFAULT_EPSILON).unwrap();
    let ctx = SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
    let table = WhitenessTable::build(&ctx);
    let pre = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let curve: Vec<f64> = MuGrid::default()
        .values()
        .into_iter()
        .map(|mu| fast_whiteness(mu, &table).unwrap())
        .collect();
    let sweep = t1.elapsed().as_secs_f64();
    outcome(
        sweep < 5.0 && curve.len() == 200,
        format!("precompute {pre:.3} s, 200-point sweep {sweep:.4} s (limit 5 s)"),
    )
}

/// Plain `O(n^2)` DFT, unnormalised.
fn naive_dft(x: &ImageGrid) -> Vec<Complex64> {
    let (r, c) = x.shape();
    let mut out = vec![Complex64::new(0.0, 0.0); r * c];
    for u in 0..r {
        for v in 0..c {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..r {
                for j in 0..c {
                    let phase = -2.0 * std::f64::consts::PI * ((u * i) as f64 / r as f64 + (v * j) as f64 / c as f64);
                    s += Complex64::from_polar(x.get(i, j), phase);
                }
            }
            out[u * c + v] = s;
        }
    }
    out
}

/// Without decimation the residual spectrum is
/// `(lambda conj(gamma) v - (|gamma|^2 + eps) b) / (mu |lambda|^2 + |gamma|^2 + eps)`.
fn deblurring_whiteness(mu: f64, lambda: &[Complex64], gammas: &[Vec<Complex64>], targets: &[Vec<Complex64>], b: &[Complex64], eps: f64) -> f64 {
    let (mut quartic, mut square) = (0.0, 0.0);
    for i in 0..b.len() {
        let g2: f64 = gammas.iter().map(|g| g[i].norm_sqr()).sum::<f64>() + eps;
        let gv: Complex64 = gammas.iter().zip(targets).map(|(g, v)| g[i].conj() * v[i]).sum();
        let r = (lambda[i] * gv - b[i] * g2) / (mu * lambda[i].norm_sqr() + g2);
        let p = r.norm_sqr();
        quartic += p * p;
        square += p;
    }
    quartic / (square * square)
}

fn no_decimation_cross_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let hr = (rng.random_range(8..=24), rng.random_range(8..=24));
        let f = DecimationFactors::uniform(1).unwrap();
        let psf = embed_kernel(&random_kernel(5, &mut rng), hr).unwrap();
        let op = DegradationOperator::from_embedded(psf.clone(), f).unwrap();
        let blocks: Vec<(ImageGrid, ImageGrid)> = RegularizerStack::finite_differences(hr, DEFAULT_EPSILON)
            .unwrap()
            .blocks()
            .iter()
            .map(|blk| (blk.kernel().clone(), random_grid(hr.0, hr.1, &mut rng)))
            .collect();
        let reg = RegularizerStack::new(hr, blocks.clone(), DEFAULT_EPSILON).unwrap();
        let b = random_grid(hr.0, hr.1, &mut rng);
        let ctx = SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
        let table = WhitenessTable::build(&ctx);

        let lambda = naive_dft(&psf);
        let gammas: Vec<_> = blocks.iter().map(|(k, _)| naive_dft(k)).collect();
        let targets: Vec<_> = blocks.iter().map(|(_, v)| naive_dft(v)).collect();
        let b_hat = naive_dft(&b);
        for mu in [1e-3, 0.1, 1.0, 10.0, 1e3] {
            let fast = fast_whiteness(mu, &table).unwrap();
            let direct = deblurring_whiteness(mu, &lambda, &gammas, &targets, &b_hat, DEFAULT_EPSILON);
            worst = worst.max((fast - direct).abs() / direct);
        }
    }
    outcome(worst <= 1e-12, format!("5 problems x 5 mu, max rel err {worst:.2e} (tol 1e-12)"))
}

/// Degrade, select, reconstruct and tabulate; every artifact as bytes.
fn pipeline_bytes(x: &ImageGrid) -> Vec<Vec<u8>> {
    let preset = Preset::Test1;
    let f = preset.decimation();
    let (b, _) = degrade(x, &preset.psf(), f, &NoiseSpec { sigma: preset.noise_sigma(), seed: 99 }).unwrap();
    let lr_bytes = encode_image(&b, ImageFormat::Pgm16);
    let b = rwpsr::imgio::decode_image(&lr_bytes).unwrap();
    let op = DegradationOperator::new(&gaussian_kernel(&preset.psf()).unwrap(), x.shape(), f).unwrap();
    let reg = RegularizerStack::finite_differences(x.shape(), DEFAULT_EPSILON).unwrap();
    let ctx = SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
    let table = WhitenessTable::build(&ctx);
    let report = select_rwp(&table, &MuGrid::default()).unwrap();
    let x_star = solve(report.mu_star, &ctx).unwrap();
    let points = MuGrid::default()
        .values()
        .into_iter()
        .map(|mu| CurvePoint {
            mu,
            whiteness: fast_whiteness(mu, &table).unwrap(),
            tau: None,
        })
        .collect();
    let curve = WhitenessCurve::new(points).unwrap();
    let meta = ExperimentMeta {
        mu_star: Some(report.mu_star),
        ..ExperimentMeta::default()
    };
    vec![
        lr_bytes,
        encode_image(&x_star, ImageFormat::Pfm),
        encode_image(&x_star, ImageFormat::Pgm16),
        format_curve(&curve, None).unwrap().into_bytes(),
        meta.serialise().into_bytes(),
    ]
}

fn determinism() -> Outcome {
    let x = fixture("astronaut.pgm");
    let a = pipeline_bytes(&x);
    let b = pipeline_bytes(&x);
    let noise_a = noise_field(64, 64, &NoiseSpec { sigma: 1.0, seed: 3 }).unwrap();
    let noise_b = noise_field(64, 64, &NoiseSpec { sigma: 1.0, seed: 3 }).unwrap();
    let same = a == b && noise_a == noise_b;
    let total: usize = a.iter().map(Vec::len).sum();
    outcome(same, format!("{} artifacts, {total} bytes, identical across runs: {same}", a.len()))
}

fn main() {
    // the libtest protocol asks for a listing; there are no sub-tests to list
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Check; 9] = [
        ("solver matches dense oracle", solver_oracle),
        ("closed-form whiteness proportional to explicit", whiteness_fast_path),
        ("autocorrelation bridge", autocorrelation_bridge),
        ("alias structure of F S^H S F^H", alias_structure),
        ("discrepancy principle contract", dp_contract),
        ("natural-image behaviour band", natural_image_band),
        ("sweep cost after precomputation", sweep_cost),
        ("no-decimation cross-check", no_decimation_cross_check),
        ("pipeline determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {}: {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            k + 1,
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
