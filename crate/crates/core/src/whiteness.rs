//! Residual whiteness.
//!
//! The whiteness of a signal `e` is `sum |e~|^4 / (sum |e~|^2)^2` over its
//! DFT bins, which equals `||e (*) e||^2 / (n ||e||^4)` for the periodic
//! autocorrelation. It is scale invariant, smallest (`1/n`) for a spectrally
//! flat signal and equal to one for a constant.
//!
//! For the Tikhonov reconstruction the alias-group sum of the HR residual
//! spectrum is `(nu_g - rho_g) / (1 + eta_g mu)`, so after one `O(N log N)`
//! precomputation the whiteness of the LR residual costs `O(n)` per `mu`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{dft2, idft2, ImageGrid};
use crate::solver::SpectralSolveContext;

/// Periodic sample autocorrelation `a[l,m] = (1/n) sum e[i,j] e[i+l,j+m]`
/// for lags `0 <= l < rows`, `0 <= m < cols`.
pub fn autocorrelation(e: &ImageGrid) -> Result<ImageGrid> {
    let mut s = dft2(e);
    let scale = 1.0 / (e.len() as f64).sqrt();
    s.data_mut()
        .iter_mut()
        .for_each(|z| *z = Complex64::new(z.norm_sqr() * scale, 0.0));
    idft2(&s)
}

fn ratio_of_moments(weights: impl Iterator<Item = f64>) -> (f64, f64) {
    weights.fold((0.0, 0.0), |(q, s), p| (q + p * p, s + p))
}

/// Whiteness measure of a real signal, computed from its spectrum.
pub fn whiteness_measure(e: &ImageGrid) -> Result<f64> {
    let spec = dft2(e);
    let (quartic, square) = ratio_of_moments(spec.data().iter().map(|z| z.norm_sqr()));
    if square == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(quartic / (square * square))
}

/// Per-alias-group constants of the closed-form whiteness function.
#[derive(Debug, Clone)]
pub struct WhitenessTable {
    eta: Vec<f64>,
    rho: Vec<Complex64>,
    nu: Vec<Complex64>,
    group_size: usize,
}

impl WhitenessTable {
    /// `eta_g = omega_g / d`, `rho_g = sum_g F S^H b`,
    /// `nu_g = sum_g lambda psi Gamma^H F v`.
    pub fn build(ctx: &SpectralSolveContext) -> Self {
        let groups = ctx.groups();
        let d = groups.group_size();
        let lambda = ctx.op().otf().data();
        let psi = ctx.reg().psi();
        let bh = ctx.bh_spectrum().data();
        let zr = ctx.z_reg().data();
        let eta = ctx.omega().iter().map(|w| w / d as f64).collect();
        let mut rho = Vec::with_capacity(groups.count());
        let mut nu = Vec::with_capacity(groups.count());
        for g in 0..groups.count() {
            let mut r = Complex64::new(0.0, 0.0);
            let mut v = Complex64::new(0.0, 0.0);
            for i in groups.members(g) {
                r += bh[i];
                v += lambda[i] * zr[i] * psi[i];
            }
            rho.push(r);
            nu.push(v);
        }
        Self {
            eta,
            rho,
            nu,
            group_size: d,
        }
    }

    /// Table from raw per-group values.
    pub fn from_parts(eta: Vec<f64>, rho: Vec<Complex64>, nu: Vec<Complex64>, group_size: usize) -> Result<Self> {
        if eta.len() != rho.len() || eta.len() != nu.len() || eta.is_empty() || group_size == 0 {
            return Err(Error::InvalidParameter(
                "whiteness table parts must be non-empty and of equal length".into(),
            ));
        }
        if eta.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::InvalidParameter("eta must be finite and non-negative".into()));
        }
        Ok(Self {
            eta,
            rho,
            nu,
            group_size,
        })
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn rho(&self) -> &[Complex64] {
        &self.rho
    }

    pub fn nu(&self) -> &[Complex64] {
        &self.nu
    }

    /// Members per group, `d`.
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Number of groups, `n`.
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Total number of HR bins, `N = n d`.
    pub fn hr_len(&self) -> usize {
        self.eta.len() * self.group_size
    }

    /// `|w_g(mu)|^2` for every group, where `w_g` is the group sum of the HR
    /// residual spectrum.
    fn group_energies(&self, mu: f64) -> impl Iterator<Item = f64> + '_ {
        self.eta
            .iter()
            .zip(&self.rho)
            .zip(&self.nu)
            .map(move |((eta, rho), nu)| (nu - rho).norm_sqr() / (1.0 + eta * mu).powi(2))
    }

    /// `||S K x*(mu) - b||_2`, evaluated in `O(n)`.
    pub fn residual_norm(&self, mu: f64) -> Result<f64> {
        check_mu(mu)?;
        let total: f64 = self.group_energies(mu).sum();
        Ok((total / self.group_size as f64).sqrt())
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveMu(mu))
    }
}

pub fn build_whiteness_table(ctx: &SpectralSolveContext) -> WhitenessTable {
    WhitenessTable::build(ctx)
}

/// Whiteness function `W(mu)` in closed form.
///
/// Sums run over all `N` HR bins, each group contributing `d` equal terms,
/// so the value is `1/d` times [`whiteness_measure`] of the LR residual.
pub fn fast_whiteness(mu: f64, tbl: &WhitenessTable) -> Result<f64> {
    check_mu(mu)?;
    let (quartic, square) = ratio_of_moments(tbl.group_energies(mu));
    if square == 0.0 {
        return Err(Error::ZeroResidualSpectrum);
    }
    let d = tbl.group_size as f64;
    Ok(d * quartic / (d * square).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub mu: f64,
    pub whiteness: f64,
    /// Residual norm over `sqrt(n) sigma`, when the noise level is known.
    pub tau: Option<f64>,
}

/// Sampled whiteness function, sorted by `mu`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WhitenessCurve {
    points: Vec<CurvePoint>,
}

impl WhitenessCurve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[0].mu < w[1].mu)) {
            return Err(Error::InvalidParameter("curve mu values must increase strictly".into()));
        }
        if points.iter().any(|p| !(p.mu > 0.0) || !(p.whiteness >= 0.0)) {
            return Err(Error::InvalidParameter(
                "curve needs positive mu and non-negative whiteness".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fills the `tau` column from a residual-norm table and noise level.
    pub fn with_tau(mut self, tbl: &WhitenessTable, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::NonPositiveSigma(sigma));
        }
        let scale = (tbl.len() as f64).sqrt() * sigma;
        for p in &mut self.points {
            p.tau = Some(tbl.residual_norm(p.mu)? / scale);
        }
        Ok(self)
    }
}
