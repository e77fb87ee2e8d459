//! `rwpsr` command-line interface.
//!
//! Exit codes: 0 on success, 2 for user or data errors, 3 when an internal
//! invariant is violated. Results go to stdout, diagnostics to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rwpsr::degrade::{degrade, gaussian_kernel, GaussianPsfSpec, NoiseSpec, Preset};
use rwpsr::imgio::{read_image, write_curve, write_image, ExperimentMeta, ImageFormat};
use rwpsr::metrics::{bicubic_upsample_aligned, quality_report, BicubicAlignment, IsnrConvention, QualityReport};
use rwpsr::solver::{residual_lr, solve};
use rwpsr::tuning::{select_dp, select_rwp, MuGrid, Strategy};
use rwpsr::whiteness::{fast_whiteness, CurvePoint, WhitenessCurve, WhitenessTable};
use rwpsr::{DecimationFactors, DegradationOperator, Error, ImageGrid, RegularizerStack, SpectralSolveContext};

#[derive(Parser)]
#[command(name = "rwpsr", version, about = "Tikhonov super-resolution with whiteness-based parameter selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blur, decimate and add noise to a high-resolution image.
    Degrade(DegradeArgs),
    /// Reconstruct a high-resolution image from an observation.
    Solve(SolveArgs),
    /// Tabulate the whiteness curve (and quality metrics) over a grid of mu.
    Sweep(SweepArgs),
    /// Compare an estimate and the bicubic baseline against the truth.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output image; the sidecar is written to `<out>.meta`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, conflicts_with_all = ["band", "psf_sigma", "decim", "noise_sigma"])]
    preset: Option<Preset>,
    /// Odd side length of the Gaussian PSF.
    #[arg(long, default_value_t = 9)]
    band: usize,
    #[arg(long, default_value_t = 2.0)]
    psf_sigma: f64,
    /// `d` or `RxC`.
    #[arg(long, default_value = "4", value_parser = parse_decim)]
    decim: DecimationFactors,
    #[arg(long, default_value_t = 0.05)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
#[group(id = "selector", required = true, multiple = false)]
struct Selector {
    /// Use this regularisation parameter.
    #[arg(long, group = "selector")]
    mu: Option<f64>,
    /// Minimise residual whiteness; the noise level is never read.
    #[arg(long, group = "selector")]
    rwp: bool,
    /// Discrepancy principle with this noise standard deviation.
    #[arg(long, group = "selector", value_name = "SIGMA")]
    dp: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    /// Reconstruction; `.pfm` keeps values outside `[0, 1]`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    selector: Selector,
    #[arg(long)]
    epsilon: Option<f64>,
    /// `lo:hi:count` in log10 mu.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Option<MuGrid>,
    /// Discrepancy multiplier for `--dp`.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Noise level used only to report `tau_star` after an `--rwp` selection.
    #[arg(long, value_name = "SIGMA")]
    report_sigma: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    /// Ground truth; adds PSNR, ISNR and SSIM columns.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Option<MuGrid>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "norm")]
    isnr_convention: IsnrConvention,
    /// Bicubic baseline grid: `centres` or `phase`.
    #[arg(long, default_value = "centres")]
    bicubic: BicubicAlignment,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    lr: PathBuf,
    #[arg(long, value_parser = parse_decim)]
    decim: DecimationFactors,
    #[arg(long, default_value = "norm")]
    isnr_convention: IsnrConvention,
    /// Bicubic baseline grid: `centres` or `phase`.
    #[arg(long, default_value = "centres")]
    bicubic: BicubicAlignment,
}

fn parse_decim(s: &str) -> Result<DecimationFactors, String> {
    let (r, c) = s.split_once('x').unwrap_or((s, s));
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    DecimationFactors::new(num(r)?, num(c)?).map_err(|e| e.to_string())
}

fn parse_grid(s: &str) -> Result<MuGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err("expected lo:hi:count".into());
    };
    let exp = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    let count = count.trim().parse::<usize>().map_err(|e| format!("{count:?}: {e}"))?;
    MuGrid::from_exponents(exp(lo)?, exp(hi)?, count).map_err(|e| e.to_string())
}

fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write_output(grid: &ImageGrid, path: &Path) -> anyhow::Result<()> {
    write_image(grid, path, ImageFormat::from_path(path)).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> anyhow::Result<ImageGrid> {
    read_image(path).with_context(|| format!("reading {}", path.display()))
}

/// Operator, regulariser and solve context described by a sidecar.
fn context_from_meta(b: &ImageGrid, meta: &ExperimentMeta, epsilon: f64) -> anyhow::Result<SpectralSolveContext> {
    let f = DecimationFactors::new(meta.decim_rows, meta.decim_cols)?;
    let hr = f.hr_shape(b.shape());
    let kernel = gaussian_kernel(&GaussianPsfSpec::new(meta.psf_band, meta.psf_sigma)?)?;
    let op = DegradationOperator::new(&kernel, hr, f)?;
    let reg = RegularizerStack::finite_differences(hr, epsilon)?;
    Ok(SpectralSolveContext::prepare(b, &op, &reg)?)
}

fn cmd_degrade(args: DegradeArgs) -> anyhow::Result<()> {
    let x = load(&args.input)?;
    let (psf, f, sigma) = match args.preset {
        Some(p) => (p.psf(), p.decimation(), p.noise_sigma()),
        None => (GaussianPsfSpec::new(args.band, args.psf_sigma)?, args.decim, args.noise_sigma),
    };
    let noise = NoiseSpec { sigma, seed: args.seed };
    let (b, _) = degrade(&x, &psf, f, &noise)?;
    write_output(&b, &args.out)?;
    let meta = ExperimentMeta {
        psf_band: psf.band,
        psf_sigma: psf.sigma,
        decim_rows: f.rows(),
        decim_cols: f.cols(),
        noise_sigma: Some(sigma),
        seed: Some(args.seed),
        ..ExperimentMeta::default()
    };
    let path = sidecar_path(&args.out);
    meta.write(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<()> {
    let b = load(&args.input)?;
    let sel = &args.selector;
    // the whiteness path parses the sidecar without its noise entries
    let mut meta = if sel.rwp {
        ExperimentMeta::read_without_noise(&args.meta)
    } else {
        ExperimentMeta::read(&args.meta)
    }
    .with_context(|| format!("reading {}", args.meta.display()))?;
    let epsilon = args.epsilon.unwrap_or(meta.epsilon);
    let grid = args.grid.unwrap_or(meta.grid);
    let ctx = context_from_meta(&b, &meta, epsilon)?;
    let table = WhitenessTable::build(&ctx);

    let (mu, strategy, tau_star) = if let Some(mu) = sel.mu {
        (mu, Strategy::Fixed, None)
    } else if let Some(sigma) = sel.dp {
        let report = select_dp(&table, sigma, args.tau, &grid)?;
        (report.mu_star, Strategy::Dp, report.tau_star)
    } else {
        let report = select_rwp(&table, &grid)?;
        if report.boundary_minimum {
            eprintln!(
                "warning: whiteness minimum at the edge of the grid (mu={:e}); consider widening --grid",
                report.mu_star
            );
        }
        (report.mu_star, Strategy::Rwp, None)
    };
    let x = solve(mu, &ctx)?;
    let tau_star = match (tau_star, args.report_sigma) {
        (Some(t), _) => Some(t),
        (None, Some(sigma)) if sigma > 0.0 => {
            let r = residual_lr(&x, &b, ctx.op())?;
            Some(r.norm() / ((b.len() as f64).sqrt() * sigma))
        }
        (None, Some(sigma)) => return Err(Error::NonPositiveSigma(sigma).into()),
        (None, None) => None,
    };
    let w = fast_whiteness(mu, &table)?;
    let tau_text = tau_star.map_or_else(|| "NA".to_string(), |t| format!("{t:.6}"));
    println!("mu_star={mu:.9e} tau_star={tau_text} W={w:.9e}");

    write_output(&x, &args.out)?;
    meta.epsilon = epsilon;
    meta.grid = grid;
    meta.mu_star = Some(mu);
    meta.strategy = Some(strategy);
    meta.tau_star = tau_star;
    let path = sidecar_path(&args.out);
    meta.write(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let b = load(&args.input)?;
    let meta = ExperimentMeta::read(&args.meta).with_context(|| format!("reading {}", args.meta.display()))?;
    let epsilon = args.epsilon.unwrap_or(meta.epsilon);
    let grid = args.grid.unwrap_or(meta.grid);
    let ctx = context_from_meta(&b, &meta, epsilon)?;
    let table = WhitenessTable::build(&ctx);

    let points = grid
        .values()
        .into_iter()
        .map(|mu| {
            Ok(CurvePoint {
                mu,
                whiteness: fast_whiteness(mu, &table)?,
                tau: None,
            })
        })
        .collect::<rwpsr::Result<Vec<_>>>()?;
    let mut curve = WhitenessCurve::new(points)?;
    if let Some(sigma) = meta.noise_sigma.filter(|s| *s > 0.0) {
        curve = curve.with_tau(&table, sigma)?;
    }

    let reports = match &args.truth {
        Some(path) => {
            let truth = load(path)?;
            let baseline = bicubic_upsample_aligned(&b, ctx.op().factors(), args.bicubic);
            let reports = curve
                .points()
                .iter()
                .map(|p| quality_report(&truth, &solve(p.mu, &ctx)?, &baseline, args.isnr_convention, p.tau))
                .collect::<rwpsr::Result<Vec<QualityReport>>>()?;
            Some(reports)
        }
        None => None,
    };
    write_curve(&curve, reports.as_deref(), &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> anyhow::Result<()> {
    let truth = load(&args.truth)?;
    let est = load(&args.est)?;
    let lr = load(&args.lr)?;
    let expected = args.decim.lr_shape(truth.shape())?;
    if lr.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: lr.shape(),
        }
        .into());
    }
    let baseline = bicubic_upsample_aligned(&lr, args.decim, args.bicubic);
    let conv = args.isnr_convention;
    for (name, image) in [("estimate", &est), ("bicubic", &baseline)] {
        let q = quality_report(&truth, image, &baseline, conv, None)?;
        println!("{name} psnr={:.4} isnr={:.4} ssim={:.4}", q.psnr, q.isnr, q.ssim);
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::SymmetryViolation { .. } | Error::SingularSystem) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Degrade(a) => cmd_degrade(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", one_line(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

fn one_line(err: &anyhow::Error) -> String {
    err.chain().map(|e| e.to_string()).collect::<Vec<_>>().join(": ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::anyhow;

    #[test]
    fn decimation_flag() {
        let f = parse_decim("4").unwrap();
        assert_eq!((f.rows(), f.cols()), (4, 4));
        let f = parse_decim("2x3").unwrap();
        assert_eq!((f.rows(), f.cols()), (2, 3));
        assert!(parse_decim("0").is_err());
        assert!(parse_decim("a").is_err());
    }

    #[test]
    fn grid_flag() {
        let g = parse_grid("-3:6:200").unwrap();
        assert_eq!(g, MuGrid::default());
        assert_eq!(parse_grid("0:0:1").unwrap().values(), vec![1.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("2:1:5").is_err());
    }

    #[test]
    fn internal_errors_map_to_three() {
        assert_eq!(exit_code(&Error::SingularSystem.into()), 3);
        assert_eq!(exit_code(&Error::IdenticalImages.into()), 2);
        assert_eq!(exit_code(&anyhow!("io")), 2);
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar_path(Path::new("a/lr.pgm")), PathBuf::from("a/lr.pgm.meta"));
    }
}
