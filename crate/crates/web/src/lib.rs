//! Browser bindings: degrade an image, plot its whiteness curve and
//! reconstruct at any `mu`.

use rwpsr::degrade::{degrade, gaussian_kernel, GaussianPsfSpec, NoiseSpec};
use rwpsr::imgio::decode_image;
use rwpsr::linops::DEFAULT_EPSILON;
use rwpsr::metrics::{bicubic_upsample, quality_report, IsnrConvention};
use rwpsr::solver::{residual_lr, solve};
use rwpsr::tuning::{select_rwp, MuGrid};
use rwpsr::whiteness::fast_whiteness;
use rwpsr::{
    DecimationFactors, DegradationOperator, ImageGrid, RegularizerStack, Result, SpectralSolveContext,
    WhitenessTable,
};
use wasm_bindgen::prelude::*;

/// Test card with edges, a smooth ramp and fine stripes, values in `[0, 1]`.
pub fn test_card(size: usize) -> ImageGrid {
    let n = size as f64;
    ImageGrid::from_fn(size, size, |i, j| {
        let (y, x) = (i as f64 / n, j as f64 / n);
        let mut v = 0.15 + 0.35 * x;
        if (x - 0.3).powi(2) + (y - 0.3).powi(2) < 0.03 {
            v = 0.9;
        }
        if (0.55..0.85).contains(&x) && (0.2..0.45).contains(&y) {
            v = 0.05;
        }
        if y > 0.6 && x < 0.5 {
            v = 0.5 + 0.4 * (40.0 * x * (1.0 + y)).sin();
        }
        if y > 0.65 && x > 0.6 && ((x - 0.6) * 10.0).fract() < (y - 0.65) * 2.5 {
            v = 0.8;
        }
        v
    })
}

/// Greyscale to RGBA bytes, clamped to `[0, 1]`.
pub fn to_rgba(x: &ImageGrid) -> Vec<u8> {
    x.data()
        .iter()
        .flat_map(|&v| {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// Degraded observation together with everything needed to reconstruct it.
pub struct Experiment {
    truth: ImageGrid,
    ctx: SpectralSolveContext,
    table: WhitenessTable,
    baseline: ImageGrid,
    sigma: f64,
}

impl Experiment {
    pub fn new(truth: ImageGrid, band: usize, psf_sigma: f64, decim: usize, sigma: f64, seed: u64) -> Result<Self> {
        let psf = GaussianPsfSpec::new(band, psf_sigma)?;
        let f = DecimationFactors::uniform(decim)?;
        let (b, _) = degrade(&truth, &psf, f, &NoiseSpec { sigma, seed })?;
        let op = DegradationOperator::new(&gaussian_kernel(&psf)?, truth.shape(), f)?;
        let reg = RegularizerStack::finite_differences(truth.shape(), DEFAULT_EPSILON)?;
        let ctx = SpectralSolveContext::prepare(&b, &op, &reg)?;
        let table = WhitenessTable::build(&ctx);
        let baseline = bicubic_upsample(&b, f);
        Ok(Self {
            truth,
            ctx,
            table,
            baseline,
            sigma,
        })
    }

    pub fn truth(&self) -> &ImageGrid {
        &self.truth
    }

    pub fn observation(&self) -> &ImageGrid {
        self.ctx.observation()
    }

    pub fn baseline(&self) -> &ImageGrid {
        &self.baseline
    }

    /// `[mu, W, tau]` triples, flattened; `tau` is NaN without noise.
    pub fn curve(&self, grid: &MuGrid) -> Result<Vec<f64>> {
        let scale = (self.table.len() as f64).sqrt() * self.sigma;
        let mut out = Vec::with_capacity(3 * grid.count());
        for mu in grid.values() {
            out.push(mu);
            out.push(fast_whiteness(mu, &self.table)?);
            out.push(if scale > 0.0 {
                self.table.residual_norm(mu)? / scale
            } else {
                f64::NAN
            });
        }
        Ok(out)
    }

    pub fn select(&self, grid: &MuGrid) -> Result<f64> {
        Ok(select_rwp(&self.table, grid)?.mu_star)
    }

    /// Reconstruction with `[psnr, isnr, ssim, tau]`.
    pub fn reconstruct(&self, mu: f64) -> Result<(ImageGrid, [f64; 4])> {
        let x = solve(mu, &self.ctx)?;
        let r = residual_lr(&x, self.ctx.observation(), self.ctx.op())?;
        let tau = if self.sigma > 0.0 {
            r.norm() / ((r.len() as f64).sqrt() * self.sigma)
        } else {
            f64::NAN
        };
        let q = quality_report(&self.truth, &x, &self.baseline, IsnrConvention::Norm, Some(tau))?;
        Ok((x, [q.psnr, q.isnr, q.ssim, tau]))
    }
}

fn js(e: rwpsr::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A degraded test image, held across calls from the page.
#[wasm_bindgen]
pub struct Demo {
    inner: Experiment,
    last: Vec<f64>,
}

#[wasm_bindgen]
impl Demo {
    /// Degrades the built-in test card, or `pgm` when it is non-empty.
    #[wasm_bindgen(constructor)]
    pub fn new(
        pgm: &[u8],
        size: usize,
        band: usize,
        psf_sigma: f64,
        decim: usize,
        sigma: f64,
        seed: u64,
    ) -> std::result::Result<Demo, JsError> {
        let truth = if pgm.is_empty() {
            test_card(size)
        } else {
            decode_image(pgm).map_err(js)?
        };
        let inner = Experiment::new(truth, band, psf_sigma, decim, sigma, seed).map_err(js)?;
        Ok(Demo {
            inner,
            last: Vec::new(),
        })
    }

    pub fn hr_rows(&self) -> usize {
        self.inner.truth().rows()
    }

    pub fn hr_cols(&self) -> usize {
        self.inner.truth().cols()
    }

    pub fn lr_rows(&self) -> usize {
        self.inner.observation().rows()
    }

    pub fn lr_cols(&self) -> usize {
        self.inner.observation().cols()
    }

    pub fn truth_rgba(&self) -> Vec<u8> {
        to_rgba(self.inner.truth())
    }

    pub fn observation_rgba(&self) -> Vec<u8> {
        to_rgba(self.inner.observation())
    }

    pub fn bicubic_rgba(&self) -> Vec<u8> {
        to_rgba(self.inner.baseline())
    }

    /// Whiteness curve over `10^lo ..= 10^hi` as `[mu, W, tau]` triples.
    pub fn curve(&self, lo: f64, hi: f64, count: usize) -> std::result::Result<Vec<f64>, JsError> {
        let grid = MuGrid::from_exponents(lo, hi, count).map_err(js)?;
        self.inner.curve(&grid).map_err(js)
    }

    /// Whiteness-minimising `mu` on the given grid.
    pub fn select_rwp(&self, lo: f64, hi: f64, count: usize) -> std::result::Result<f64, JsError> {
        let grid = MuGrid::from_exponents(lo, hi, count).map_err(js)?;
        self.inner.select(&grid).map_err(js)
    }

    /// RGBA reconstruction at `mu`; quality figures via [`Demo::last_metrics`].
    pub fn reconstruct(&mut self, mu: f64) -> std::result::Result<Vec<u8>, JsError> {
        let (x, q) = self.inner.reconstruct(mu).map_err(js)?;
        self.last = q.to_vec();
        Ok(to_rgba(&x))
    }

    /// `[psnr, isnr, ssim, tau]` of the latest reconstruction.
    pub fn last_metrics(&self) -> Vec<f64> {
        self.last.clone()
    }
}
