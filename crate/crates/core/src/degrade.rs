//! Synthetic observations `b = S K x + e`.
//!
//! Noise is drawn from a ChaCha8 stream seeded with the 64-bit seed through
//! `rand_chacha::ChaCha8Rng::seed_from_u64`, and mapped to standard normal
//! variates by the ziggurat sampler of `rand_distr::StandardNormal`. Both are
//! platform independent, so equal seeds give bit-identical noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::linops::{DecimationFactors, DegradationOperator};

/// Square Gaussian blur kernel of odd side `band`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPsfSpec {
    pub band: usize,
    pub sigma: f64,
}

impl GaussianPsfSpec {
    pub fn new(band: usize, sigma: f64) -> Result<Self> {
        if band.is_multiple_of(2) {
            return Err(Error::EvenBand(band));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("psf sigma must be positive, got {sigma}")));
        }
        Ok(Self { band, sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation in intensity units.
    pub sigma: f64,
    pub seed: u64,
}

/// Named degradation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 9x9 Gaussian, sigma 2, decimation 4, noise 0.05.
    Test1,
    /// 13x13 Gaussian, sigma 3, decimation 4, noise 0.1.
    Test2,
}

impl Preset {
    pub fn psf(&self) -> GaussianPsfSpec {
        match self {
            Preset::Test1 => GaussianPsfSpec { band: 9, sigma: 2.0 },
            Preset::Test2 => GaussianPsfSpec { band: 13, sigma: 3.0 },
        }
    }

    pub fn decimation(&self) -> DecimationFactors {
        DecimationFactors::uniform(4).expect("non-zero factor")
    }

    pub fn noise_sigma(&self) -> f64 {
        match self {
            Preset::Test1 => 0.05,
            Preset::Test2 => 0.1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Test1 => "test1",
            Preset::Test2 => "test2",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test1" => Ok(Preset::Test1),
            "test2" => Ok(Preset::Test2),
            other => Err(Error::InvalidParameter(format!("unknown preset {other:?}"))),
        }
    }
}

/// Sum-normalised sampled Gaussian on a `band x band` support.
pub fn gaussian_kernel(spec: &GaussianPsfSpec) -> Result<ImageGrid> {
    if spec.band.is_multiple_of(2) {
        return Err(Error::EvenBand(spec.band));
    }
    let c = (spec.band - 1) as f64 / 2.0;
    let two_s2 = 2.0 * spec.sigma * spec.sigma;
    let k = ImageGrid::from_fn(spec.band, spec.band, |i, j| {
        let (di, dj) = (i as f64 - c, j as f64 - c);
        (-(di * di + dj * dj) / two_s2).exp()
    });
    let total = k.sum();
    Ok(k.scale(1.0 / total))
}

/// i.i.d. `N(0, sigma^2)` samples, row-major.
pub fn noise_field(rows: usize, cols: usize, spec: &NoiseSpec) -> Result<ImageGrid> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be non-negative, got {}",
            spec.sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(ImageGrid::from_fn(rows, cols, |_, _| {
        spec.sigma * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// Returns the observation `b` and the noise realisation `e`.
pub fn degrade(
    x_true: &ImageGrid,
    psf: &GaussianPsfSpec,
    f: DecimationFactors,
    noise: &NoiseSpec,
) -> Result<(ImageGrid, ImageGrid)> {
    let op = DegradationOperator::new(&gaussian_kernel(psf)?, x_true.shape(), f)?;
    degrade_with(x_true, &op, noise)
}

/// As [`degrade`] with an arbitrary operator.
pub fn degrade_with(x_true: &ImageGrid, op: &DegradationOperator, noise: &NoiseSpec) -> Result<(ImageGrid, ImageGrid)> {
    let clean = op.forward(x_true)?;
    let e = noise_field(clean.rows(), clean.cols(), noise)?;
    let b = clean.add(&e)?;
    Ok((b, e))
}
