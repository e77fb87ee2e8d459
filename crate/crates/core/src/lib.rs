//! Single-image super-resolution of blurred, decimated and noisy images with a
//! generalised Tikhonov model solved in closed form in the Fourier domain.
//!
//! The regularisation parameter is chosen by minimising the whiteness of the
//! low-resolution residual. Since the residual spectrum of every alias group
//! has a closed form in `mu`, the whiteness curve costs `O(n)` per evaluation
//! once a [`WhitenessTable`] has been built. A discrepancy-principle selector
//! is provided as the noise-aware baseline.
//!
//! ```
//! use rwpsr::{degrade, linops, solver, tuning, whiteness, DecimationFactors, ImageGrid};
//!
//! let x = ImageGrid::from_fn(32, 32, |i, j| ((i / 4 + j / 4) % 2) as f64);
//! let psf = degrade::GaussianPsfSpec::new(5, 1.0).unwrap();
//! let f = DecimationFactors::uniform(2).unwrap();
//! let noise = degrade::NoiseSpec { sigma: 0.02, seed: 7 };
//! let (b, _) = degrade::degrade(&x, &psf, f, &noise).unwrap();
//!
//! let op = linops::DegradationOperator::new(&degrade::gaussian_kernel(&psf).unwrap(), x.shape(), f).unwrap();
//! let reg = linops::RegularizerStack::finite_differences(x.shape(), linops::DEFAULT_EPSILON).unwrap();
//! let ctx = solver::SpectralSolveContext::prepare(&b, &op, &reg).unwrap();
//! let table = whiteness::WhitenessTable::build(&ctx);
//! let report = tuning::select_rwp(&table, &tuning::MuGrid::default()).unwrap();
//! let x_star = solver::solve(report.mu_star, &ctx).unwrap();
//! assert_eq!(x_star.shape(), (32, 32));
//! ```

pub mod degrade;
pub mod error;
pub mod grid;
pub mod imgio;
pub mod linops;
pub mod metrics;
pub mod solver;
pub mod tuning;
pub mod whiteness;

pub use error::{Error, Result};
pub use grid::{ImageGrid, Spectrum};
pub use linops::{AliasGroups, DecimationFactors, DegradationOperator, RegularizerStack};
pub use solver::SpectralSolveContext;
pub use tuning::{MuGrid, SelectionReport, Strategy};
pub use whiteness::{WhitenessCurve, WhitenessTable};
