//! Regularisation-parameter selection.

use crate::error::{Error, Result};
use crate::solver::{residual_lr, solve, SpectralSolveContext};
use crate::whiteness::{fast_whiteness, CurvePoint, WhitenessCurve, WhitenessTable};

const GOLDEN_TOLERANCE: f64 = 1e-3;
const DP_RELATIVE_TOLERANCE: f64 = 1e-6;
const DP_MAX_ITERATIONS: usize = 100;

/// Logarithmically spaced `mu` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuGrid {
    mu_min: f64,
    mu_max: f64,
    count: usize,
}

impl Default for MuGrid {
    fn default() -> Self {
        Self {
            mu_min: 1e-3,
            mu_max: 1e6,
            count: 200,
        }
    }
}

impl MuGrid {
    pub fn new(mu_min: f64, mu_max: f64, count: usize) -> Result<Self> {
        let valid = mu_min > 0.0
            && mu_max.is_finite()
            && count > 0
            && (mu_min < mu_max || (count == 1 && mu_min <= mu_max));
        if !valid {
            return Err(Error::InvalidParameter(format!(
                "mu grid needs 0 < min < max and count > 0, got {mu_min}..{mu_max} x {count}"
            )));
        }
        Ok(Self {
            mu_min,
            mu_max,
            count,
        })
    }

    /// Grid from base-10 exponents: `lo:hi:count` means `10^lo ..= 10^hi`.
    pub fn from_exponents(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(10f64.powf(lo), 10f64.powf(hi), count)
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.mu_min];
        }
        let (lo, hi) = (self.mu_min.log10(), self.mu_max.log10());
        let step = (hi - lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| match k {
                0 => self.mu_min,
                k if k == self.count - 1 => self.mu_max,
                k => 10f64.powf(lo + step * k as f64),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Rwp,
    Dp,
    Fixed,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Rwp => "rwp",
            Strategy::Dp => "dp",
            Strategy::Fixed => "fixed",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rwp" => Ok(Strategy::Rwp),
            "dp" => Ok(Strategy::Dp),
            "fixed" => Ok(Strategy::Fixed),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionCurve {
    Whiteness(WhitenessCurve),
    /// `(mu, ||r||_2)` samples.
    ResidualNorm(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub mu_star: f64,
    /// Only known when the noise level is; RWP leaves it empty.
    pub tau_star: Option<f64>,
    pub strategy: Strategy,
    pub curve: SelectionCurve,
    /// Whiteness at `mu_star` (RWP only).
    pub whiteness: Option<f64>,
    /// The grid minimiser sat on the first or last grid point.
    pub boundary_minimum: bool,
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
fn golden_section(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Grid search for the whiteness minimiser, refined by golden section in
/// `log10 mu` between the neighbours of the best grid point. Ties go to the
/// smallest `mu`. The noise level is not an input.
pub fn select_rwp(tbl: &WhitenessTable, grid: &MuGrid) -> Result<SelectionReport> {
    let mus = grid.values();
    let points = mus
        .iter()
        .map(|&mu| {
            Ok(CurvePoint {
                mu,
                whiteness: fast_whiteness(mu, tbl)?,
                tau: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = points
        .iter()
        .enumerate()
        .fold(0, |best, (k, p)| if p.whiteness < points[best].whiteness { k } else { best });
    let boundary_minimum = best == 0 || best == points.len() - 1;

    let (mut mu_star, mut w_star) = (points[best].mu, points[best].whiteness);
    if points.len() > 1 {
        let lo = mus[best.saturating_sub(1)].log10();
        let hi = mus[(best + 1).min(mus.len() - 1)].log10();
        let (lm, w) = golden_section(lo, hi, GOLDEN_TOLERANCE, |lm| fast_whiteness(10f64.powf(lm), tbl))?;
        // rounding-level gains on a flat curve keep the grid point
        if w < w_star * (1.0 - 1e-12) {
            mu_star = 10f64.powf(lm);
            w_star = w;
        }
    }
    Ok(SelectionReport {
        mu_star,
        tau_star: None,
        strategy: Strategy::Rwp,
        curve: SelectionCurve::Whiteness(WhitenessCurve::new(points)?),
        whiteness: Some(w_star),
        boundary_minimum,
    })
}

/// Discrepancy principle: bisection in `log10 mu` on `[mu_min, mu_max]` for
/// `||r(mu)||_2 = tau sqrt(n) sigma`.
pub fn select_dp(tbl: &WhitenessTable, sigma: f64, tau: f64, bracket: &MuGrid) -> Result<SelectionReport> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let target = tau * (tbl.len() as f64).sqrt() * sigma;
    let norm_at = |lm: f64| tbl.residual_norm(10f64.powf(lm));
    let (mut lo, mut hi) = (bracket.mu_min().log10(), bracket.mu_max().log10());
    // residual norm is non-increasing in mu
    let (r_lo, r_hi) = (norm_at(lo)?, norm_at(hi)?);
    if target > r_lo || target < r_hi {
        return Err(Error::TargetUnreachable {
            target,
            low: r_hi,
            high: r_lo,
        });
    }
    let mut samples = vec![(10f64.powf(lo), r_lo), (10f64.powf(hi), r_hi)];
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..DP_MAX_ITERATIONS {
        mid = 0.5 * (lo + hi);
        let r = norm_at(mid)?;
        samples.push((10f64.powf(mid), r));
        if (r - target).abs() <= DP_RELATIVE_TOLERANCE * target {
            break;
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);
    let mu_star = 10f64.powf(mid);
    Ok(SelectionReport {
        mu_star,
        tau_star: Some(tbl.residual_norm(mu_star)? / ((tbl.len() as f64).sqrt() * sigma)),
        strategy: Strategy::Dp,
        curve: SelectionCurve::ResidualNorm(samples),
        whiteness: None,
        boundary_minimum: false,
    })
}

/// `||S K x*(mu) - b||_2 / (sqrt(n) sigma)` through an explicit reconstruction.
pub fn tau_of_mu(mu: f64, ctx: &SpectralSolveContext, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let x = solve(mu, ctx)?;
    let r = residual_lr(&x, ctx.observation(), ctx.op())?;
    Ok(r.norm() / ((ctx.lr_len() as f64).sqrt() * sigma))
}
