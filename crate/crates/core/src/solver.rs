//! Closed-form minimiser of
//! `mu/2 ||S K x - b||^2 + 1/2 ||L x - v||^2 + eps/2 ||x||^2`.
//!
//! In the Fourier domain the normal matrix is diagonal plus a rank-`n`
//! term coupling the `d` bins of each alias group. The Woodbury identity turns
//! its inverse into two sweeps over the spectrum: one accumulating per-group
//! sums, one applying the per-group correction.
//!
//! [`dense_solve`] assembles the same system as explicit matrices and is kept
//! as a verification oracle for small grids.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{dft2, idft2_with_tolerance, ImageGrid, Spectrum};
use crate::linops::{upsample_zero, AliasGroups, DegradationOperator, RegularizerStack};

/// Relative imaginary residue tolerated when mapping a solution back to space.
const SOLUTION_SYMMETRY_TOLERANCE: f64 = 1e-6;

/// Everything about a problem instance that does not depend on `mu`.
#[derive(Debug, Clone)]
pub struct SpectralSolveContext {
    op: DegradationOperator,
    reg: RegularizerStack,
    groups: AliasGroups,
    b: ImageGrid,
    bh_spec: Spectrum,
    z_reg: Spectrum,
    omega: Vec<f64>,
}

impl SpectralSolveContext {
    /// Precomputes `F S^H b`, `Gamma^H F v` and the per-group `omega`.
    pub fn prepare(b: &ImageGrid, op: &DegradationOperator, reg: &RegularizerStack) -> Result<Self> {
        let groups = AliasGroups::new(op.hr_shape(), op.factors())?;
        prepare_context(b, op, reg, groups)
    }

    pub fn op(&self) -> &DegradationOperator {
        &self.op
    }

    pub fn reg(&self) -> &RegularizerStack {
        &self.reg
    }

    pub fn groups(&self) -> &AliasGroups {
        &self.groups
    }

    /// Observed low-resolution image.
    pub fn observation(&self) -> &ImageGrid {
        &self.b
    }

    /// `F S^H b`.
    pub fn bh_spectrum(&self) -> &Spectrum {
        &self.bh_spec
    }

    /// `sum_k conj(gamma_k) F v_k`.
    pub fn z_reg(&self) -> &Spectrum {
        &self.z_reg
    }

    /// `omega_g = sum_{i in g} |lambda_i|^2 psi_i`.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Number of LR pixels, `n`.
    pub fn lr_len(&self) -> usize {
        self.b.len()
    }
}

pub fn prepare_context(
    b: &ImageGrid,
    op: &DegradationOperator,
    reg: &RegularizerStack,
    groups: AliasGroups,
) -> Result<SpectralSolveContext> {
    b.expect_shape(op.lr_shape())?;
    if reg.hr_shape() != op.hr_shape() {
        return Err(Error::ShapeMismatch {
            expected: op.hr_shape(),
            actual: reg.hr_shape(),
        });
    }
    if groups.hr_shape() != op.hr_shape() || groups.factors() != op.factors() {
        return Err(Error::ShapeMismatch {
            expected: op.hr_shape(),
            actual: groups.hr_shape(),
        });
    }
    let bh_spec = dft2(&upsample_zero(b, op.factors()));
    let z_reg = reg.adjoint_target_spectrum();
    let lambda = op.otf().data();
    let psi = reg.psi();
    let omega = (0..groups.count())
        .map(|g| groups.members(g).map(|i| lambda[i].norm_sqr() * psi[i]).sum())
        .collect();
    Ok(SpectralSolveContext {
        op: op.clone(),
        reg: reg.clone(),
        groups,
        b: b.clone(),
        bh_spec,
        z_reg,
        omega,
    })
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveMu(mu))
    }
}

/// Spectrum of `x*(mu)`.
///
/// Per alias group `g` with `z_i = mu conj(lambda_i) F S^H b + Gamma^H F v`,
/// the Woodbury correction `psi_i z_i - mu psi_i conj(lambda_i) s_g / (d + mu omega_g)`
/// is evaluated as
/// `psi_i (d z_i + mu (z_i omega_{g\i} - conj(lambda_i) s_{g\i})) / (d + mu omega_g)`,
/// where `\i` drops member `i` from the sum. Both are equal, but only the
/// second stays accurate when `psi_i` is as large as `1/eps`.
pub fn solve_spectrum(mu: f64, ctx: &SpectralSolveContext) -> Result<Spectrum> {
    check_mu(mu)?;
    let lambda = ctx.op.otf().data();
    let psi = ctx.reg.psi();
    let bh = ctx.bh_spec.data();
    let zr = ctx.z_reg.data();
    let groups = &ctx.groups;
    let d = groups.group_size();
    let df = d as f64;

    let (rows, cols) = ctx.op.hr_shape();
    let mut x = Spectrum::zeros(rows, cols);
    let xs = x.data_mut();
    let zero = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; d];
    let mut z = vec![zero; d];
    let mut w = vec![0.0; d];
    let mut s = vec![zero; d];
    // suffix sums; prefix sums are carried in the second sweep
    let mut w_tail = vec![0.0; d + 1];
    let mut s_tail = vec![zero; d + 1];
    for (g, &omega) in ctx.omega.iter().enumerate() {
        for (k, i) in groups.members(g).enumerate() {
            idx[k] = i;
            z[k] = lambda[i].conj() * bh[i] * mu + zr[i];
            w[k] = lambda[i].norm_sqr() * psi[i];
            s[k] = lambda[i] * z[k] * psi[i];
        }
        for k in (0..d).rev() {
            w_tail[k] = w_tail[k + 1] + w[k];
            s_tail[k] = s_tail[k + 1] + s[k];
        }
        let denom = df + mu * omega;
        let (mut w_head, mut s_head) = (0.0, zero);
        for k in 0..d {
            let i = idx[k];
            let w_rest = w_head + w_tail[k + 1];
            let s_rest = s_head + s_tail[k + 1];
            let num = z[k] * df + (z[k] * w_rest - lambda[i].conj() * s_rest) * mu;
            xs[i] = num * (psi[i] / denom);
            w_head += w[k];
            s_head += s[k];
        }
    }
    Ok(x)
}

/// Reconstruction `x*(mu)` on the HR grid.
pub fn solve(mu: f64, ctx: &SpectralSolveContext) -> Result<ImageGrid> {
    idft2_with_tolerance(&solve_spectrum(mu, ctx)?, SOLUTION_SYMMETRY_TOLERANCE)
}

/// `S K x - b` on the LR grid.
pub fn residual_lr(x: &ImageGrid, b: &ImageGrid, op: &DegradationOperator) -> Result<ImageGrid> {
    b.expect_shape(op.lr_shape())?;
    x.expect_shape(op.hr_shape())?;
    op.forward(x)?.sub(b)
}

/// Periodic convolution matrix of an embedded kernel, row-major indexing.
fn circulant(kernel: &ImageGrid) -> DMatrix<f64> {
    let (r, c) = kernel.shape();
    let n = r * c;
    DMatrix::from_fn(n, n, |row, col| {
        let (i, j) = (row / c, row % c);
        let (a, b) = (col / c, col % c);
        kernel.get((i + r - a) % r, (j + c - b) % c)
    })
}

/// Dense solve of
/// `(mu (SK)^T SK + L^T L + eps I) x = mu (SK)^T b + L^T v`.
///
/// Intended for grids up to a few hundred pixels.
pub fn dense_solve(
    mu: f64,
    b: &ImageGrid,
    op: &DegradationOperator,
    reg: &RegularizerStack,
) -> Result<ImageGrid> {
    check_mu(mu)?;
    b.expect_shape(op.lr_shape())?;
    let (hr_r, hr_c) = op.hr_shape();
    let (lr_r, lr_c) = op.lr_shape();
    let f = op.factors();
    let big_n = hr_r * hr_c;
    let small_n = lr_r * lr_c;

    let mut s = DMatrix::<f64>::zeros(small_n, big_n);
    for i in 0..lr_r {
        for j in 0..lr_c {
            s[(i * lr_c + j, i * f.rows() * hr_c + j * f.cols())] = 1.0;
        }
    }
    let sk = &s * circulant(op.psf());
    let bvec = DVector::from_column_slice(b.data());

    let mut normal = sk.transpose() * &sk * mu;
    let mut rhs = sk.transpose() * bvec * mu;
    for block in reg.blocks() {
        let l = circulant(block.kernel());
        normal += l.transpose() * &l;
        rhs += l.transpose() * DVector::from_column_slice(block.target().data());
    }
    for k in 0..big_n {
        normal[(k, k)] += reg.epsilon();
    }
    let x = normal.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    ImageGrid::new(hr_r, hr_c, x.as_slice().to_vec())
}
