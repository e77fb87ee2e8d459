use rwpsr::degrade::{degrade, gaussian_kernel, NoiseSpec, Preset};
use rwpsr::linops::DEFAULT_EPSILON;
use rwpsr::metrics::bicubic_upsample;
use rwpsr::solver::{residual_lr, solve};
use rwpsr::tuning::{select_rwp, MuGrid};
use rwpsr::{DecimationFactors, DegradationOperator, ImageGrid, RegularizerStack, SpectralSolveContext, WhitenessTable};

fn scene() -> ImageGrid {
    ImageGrid::from_fn(96, 96, |i, j| {
        let (y, x) = (i as f64 / 96.0, j as f64 / 96.0);
        0.3 + 0.5 * (6.0 * x).sin() * (4.0 * y).cos() + if x > 0.6 { 0.2 } else { 0.0 }
    })
}

fn context(x: &ImageGrid, preset: Preset, sigma: f64) -> SpectralSolveContext {
    let f = preset.decimation();
    let (b, _) = degrade(x, &preset.psf(), f, &NoiseSpec { sigma, seed: 1 }).unwrap();
    let op = DegradationOperator::new(&gaussian_kernel(&preset.psf()).unwrap(), x.shape(), f).unwrap();
    let reg = RegularizerStack::finite_differences(x.shape(), DEFAULT_EPSILON).unwrap();
    SpectralSolveContext::prepare(&b, &op, &reg).unwrap()
}

#[test]
fn noiseless_data_is_fitted_as_mu_grows() {
    let x = scene();
    let ctx = context(&x, Preset::Test1, 0.0);
    let b = ctx.observation();
    let rel = |mu: f64| {
        let r = residual_lr(&solve(mu, &ctx).unwrap(), b, ctx.op()).unwrap();
        r.norm() / b.norm()
    };
    let norms: Vec<f64> = [1e2, 1e4, 1e6, 1e8].into_iter().map(rel).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    assert!(norms[3] < 1e-5, "{norms:?}");
}

#[test]
fn rwp_reconstruction_beats_bicubic() {
    let x = scene();
    let ctx = context(&x, Preset::Test2, 0.1);
    let report = select_rwp(&WhitenessTable::build(&ctx), &MuGrid::default()).unwrap();
    assert!(!report.boundary_minimum);
    let x_star = solve(report.mu_star, &ctx).unwrap();
    let baseline = bicubic_upsample(ctx.observation(), DecimationFactors::uniform(4).unwrap());
    assert!(x_star.sub(&x).unwrap().norm() < baseline.sub(&x).unwrap().norm());
}
