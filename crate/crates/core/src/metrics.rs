//! Reconstruction quality: PSNR, ISNR, SSIM and the bicubic baseline.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::linops::DecimationFactors;

/// How ISNR turns the error-norm ratio into decibels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsnrConvention {
    /// `10 log10(||x - b_bar|| / ||x - x*||)`.
    #[default]
    Norm,
    /// `10 log10(||x - b_bar||^2 / ||x - x*||^2)`.
    Squared,
}

impl std::str::FromStr for IsnrConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Self::Norm),
            "squared" => Ok(Self::Squared),
            other => Err(Error::InvalidParameter(format!("unknown ISNR convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub isnr: f64,
    pub ssim: f64,
    pub tau_star: Option<f64>,
}

fn error_norm(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    let e = a.sub(b)?.norm();
    if e == 0.0 {
        return Err(Error::IdenticalImages);
    }
    Ok(e)
}

/// `20 log10(sqrt(N) max(x, x*) / ||x - x*||)`, the maximum taken over both
/// images.
pub fn psnr(x_true: &ImageGrid, x_est: &ImageGrid) -> Result<f64> {
    let err = error_norm(x_true, x_est)?;
    let peak = x_true.max().max(x_est.max());
    Ok(20.0 * ((x_true.len() as f64).sqrt() * peak / err).log10())
}

pub fn isnr(x_true: &ImageGrid, x_est: &ImageGrid, b_interp: &ImageGrid, convention: IsnrConvention) -> Result<f64> {
    x_true.expect_shape(b_interp.shape())?;
    let est = error_norm(x_true, x_est)?;
    let base = x_true.sub(b_interp)?.norm();
    let ratio = base / est;
    Ok(match convention {
        IsnrConvention::Norm => 10.0 * ratio.log10(),
        IsnrConvention::Squared => 20.0 * ratio.log10(),
    })
}

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Half-sample symmetric index reflection (`x[-1] = x[0]`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn ssim_window() -> Vec<f64> {
    let w: Vec<f64> = (0..=2 * SSIM_RADIUS)
        .map(|k| {
            let t = k as f64 - SSIM_RADIUS as f64;
            (-t * t / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable filtering with a symmetric 1-D window and reflected borders.
fn smooth(img: &ImageGrid, w: &[f64]) -> ImageGrid {
    let (r, c) = img.shape();
    let rad = (w.len() / 2) as isize;
    let horiz = ImageGrid::from_fn(r, c, |i, j| {
        w.iter()
            .enumerate()
            .map(|(k, wk)| wk * img.get(i, reflect(j as isize + k as isize - rad, c)))
            .sum()
    });
    ImageGrid::from_fn(r, c, |i, j| {
        w.iter()
            .enumerate()
            .map(|(k, wk)| wk * horiz.get(reflect(i as isize + k as isize - rad, r), j))
            .sum()
    })
}

/// Mean SSIM for images with unit dynamic range: 11x11 Gaussian window with
/// standard deviation 1.5, `K1 = 0.01`, `K2 = 0.03`, symmetric borders.
pub fn ssim(x_true: &ImageGrid, x_est: &ImageGrid) -> Result<f64> {
    x_true.expect_shape(x_est.shape())?;
    let w = ssim_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mx = smooth(x_true, &w);
    let my = smooth(x_est, &w);
    let mxx = smooth(&x_true.zip_map(x_true, |a, b| a * b)?, &w);
    let myy = smooth(&x_est.zip_map(x_est, |a, b| a * b)?, &w);
    let mxy = smooth(&x_true.zip_map(x_est, |a, b| a * b)?, &w);
    let mut total = 0.0;
    for k in 0..x_true.len() {
        let (ux, uy) = (mx.data()[k], my.data()[k]);
        let vx = mxx.data()[k] - ux * ux;
        let vy = myy.data()[k] - uy * uy;
        let cxy = mxy.data()[k] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / x_true.len() as f64)
}

/// Cubic convolution kernel with `a = -0.5`.
fn cubic(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Where the LR samples sit on the HR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BicubicAlignment {
    /// Pixel centres coincide: HR pixel `k` reads LR position
    /// `(k + 1/2) / d - 1/2`. This is what common image-resizing tools do.
    #[default]
    PixelCentres,
    /// LR sample `i` sits on HR pixel `d i`, the phase kept by decimation.
    SamplePhase,
}

impl std::str::FromStr for BicubicAlignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centres" => Ok(Self::PixelCentres),
            "phase" => Ok(Self::SamplePhase),
            other => Err(Error::InvalidParameter(format!("unknown bicubic alignment {other:?}"))),
        }
    }
}

/// 1-D periodic cubic upsampling: output `k` samples input position
/// `(k + shift) / d - shift`.
fn upsample_line(get: impl Fn(isize) -> f64, d: usize, shift: f64, out: usize) -> Vec<f64> {
    (0..out)
        .map(|k| {
            let t = (k as f64 + shift) / d as f64 - shift;
            let base = t.floor() as isize;
            (-1..=2)
                .map(|o| {
                    let idx = base + o;
                    cubic(t - idx as f64) * get(idx)
                })
                .sum()
        })
        .collect()
}

/// Bicubic interpolation of an LR image onto the HR grid with pixel centres
/// aligned, extended periodically.
pub fn bicubic_upsample(b: &ImageGrid, f: DecimationFactors) -> ImageGrid {
    bicubic_upsample_aligned(b, f, BicubicAlignment::default())
}

pub fn bicubic_upsample_aligned(b: &ImageGrid, f: DecimationFactors, alignment: BicubicAlignment) -> ImageGrid {
    let shift = match alignment {
        BicubicAlignment::PixelCentres => 0.5,
        BicubicAlignment::SamplePhase => 0.0,
    };
    let (nr, nc) = b.shape();
    let (hr, hc) = f.hr_shape((nr, nc));
    let mut rows_done = Vec::with_capacity(nr * hc);
    for i in 0..nr {
        rows_done.extend(upsample_line(|j| b.get_wrapped(i as isize, j), f.cols(), shift, hc));
    }
    let mut out = vec![0.0; hr * hc];
    for j in 0..hc {
        let col = upsample_line(
            |i| rows_done[i.rem_euclid(nr as isize) as usize * hc + j],
            f.rows(),
            shift,
            hr,
        );
        for (i, v) in col.into_iter().enumerate() {
            out[i * hc + j] = v;
        }
    }
    ImageGrid::new(hr, hc, out).expect("finite interpolation of finite data")
}

pub fn quality_report(
    x_true: &ImageGrid,
    x_est: &ImageGrid,
    b_interp: &ImageGrid,
    convention: IsnrConvention,
    tau_star: Option<f64>,
) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr: psnr(x_true, x_est)?,
        isnr: isnr(x_true, x_est, b_interp, convention)?,
        ssim: ssim(x_true, x_est)?,
        tau_star,
    })
}
