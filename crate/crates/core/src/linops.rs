//! Decimation, blur and regularisation operators together with their Fourier
//! diagonalisations and the alias-group structure of decimation.

use crate::error::{Error, Result};
use crate::grid::{dft2, idft2, ImageGrid, Spectrum};

/// Default Tikhonov shift that keeps `1 / (|gamma|^2 + eps)` finite at DC.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Decimation factors along rows (`d_r`) and columns (`d_c`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecimationFactors {
    rows: usize,
    cols: usize,
}

impl DecimationFactors {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "decimation factors must be positive, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(d, d)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total factor `d = d_r * d_c`.
    pub fn total(&self) -> usize {
        self.rows * self.cols
    }

    /// Low-resolution shape of an `hr` grid; errors unless divisible.
    pub fn lr_shape(&self, hr: (usize, usize)) -> Result<(usize, usize)> {
        if hr.0 == 0 || hr.1 == 0 || !hr.0.is_multiple_of(self.rows) || !hr.1.is_multiple_of(self.cols) {
            return Err(Error::ShapeMismatch {
                expected: (
                    hr.0.div_ceil(self.rows).max(1) * self.rows,
                    hr.1.div_ceil(self.cols).max(1) * self.cols,
                ),
                actual: hr,
            });
        }
        Ok((hr.0 / self.rows, hr.1 / self.cols))
    }

    pub fn hr_shape(&self, lr: (usize, usize)) -> (usize, usize) {
        (lr.0 * self.rows, lr.1 * self.cols)
    }
}

/// `S`: keeps the sample at `(i*d_r, j*d_c)`.
pub fn downsample(x_hr: &ImageGrid, f: DecimationFactors) -> Result<ImageGrid> {
    let (nr, nc) = f.lr_shape(x_hr.shape())?;
    Ok(ImageGrid::from_fn(nr, nc, |i, j| {
        x_hr.get(i * f.rows, j * f.cols)
    }))
}

/// `S^H`: zero interleaving.
pub fn upsample_zero(y_lr: &ImageGrid, f: DecimationFactors) -> ImageGrid {
    let (nr, nc) = f.hr_shape(y_lr.shape());
    let mut out = ImageGrid::zeros(nr, nc);
    for i in 0..y_lr.rows() {
        for j in 0..y_lr.cols() {
            out.set(i * f.rows, j * f.cols, y_lr.get(i, j));
        }
    }
    out
}

/// Places a small kernel on an `hr`-sized periodic grid with its centre tap
/// `(rows/2, cols/2)` at the origin, wrapping negative offsets.
pub fn embed_kernel(kernel: &ImageGrid, hr: (usize, usize)) -> Result<ImageGrid> {
    if kernel.rows() > hr.0 || kernel.cols() > hr.1 {
        return Err(Error::InvalidShape(format!(
            "{}x{} kernel does not fit a {}x{} grid",
            kernel.rows(),
            kernel.cols(),
            hr.0,
            hr.1
        )));
    }
    let (cr, cc) = (kernel.rows() / 2, kernel.cols() / 2);
    let mut out = ImageGrid::zeros(hr.0, hr.1);
    for i in 0..kernel.rows() {
        for j in 0..kernel.cols() {
            let r = (i as isize - cr as isize).rem_euclid(hr.0 as isize) as usize;
            let c = (j as isize - cc as isize).rem_euclid(hr.1 as isize) as usize;
            out.set(r, c, out.get(r, c) + kernel.get(i, j));
        }
    }
    Ok(out)
}

/// Eigenvalues of periodic convolution with an embedded kernel, i.e. the
/// unnormalised DFT of the kernel. With the unitary `F`,
/// `kernel * x = F^H diag(otf) F x`.
pub fn transfer_function(embedded: &ImageGrid) -> Spectrum {
    let gain = (embedded.len() as f64).sqrt();
    let mut s = dft2(embedded);
    s.data_mut().iter_mut().for_each(|z| *z *= gain);
    s
}

fn apply_diagonal(x: &ImageGrid, diag: &Spectrum) -> Result<ImageGrid> {
    x.expect_shape(diag.shape())?;
    let mut s = dft2(x);
    s.data_mut()
        .iter_mut()
        .zip(diag.data())
        .for_each(|(z, l)| *z *= l);
    idft2(&s)
}

/// Blur `K` followed by decimation `S`.
#[derive(Debug, Clone)]
pub struct DegradationOperator {
    psf: ImageGrid,
    otf: Spectrum,
    factors: DecimationFactors,
    lr_shape: (usize, usize),
}

impl DegradationOperator {
    /// Builds the operator from a small, centred kernel.
    pub fn new(kernel: &ImageGrid, hr_shape: (usize, usize), factors: DecimationFactors) -> Result<Self> {
        Self::from_embedded(embed_kernel(kernel, hr_shape)?, factors)
    }

    /// Builds the operator from a PSF already embedded on the HR grid.
    pub fn from_embedded(psf: ImageGrid, factors: DecimationFactors) -> Result<Self> {
        let lr_shape = factors.lr_shape(psf.shape())?;
        let otf = transfer_function(&psf);
        Ok(Self {
            psf,
            otf,
            factors,
            lr_shape,
        })
    }

    /// Identity blur with the given decimation.
    pub fn identity(hr_shape: (usize, usize), factors: DecimationFactors) -> Result<Self> {
        Self::from_embedded(ImageGrid::impulse(hr_shape.0, hr_shape.1), factors)
    }

    pub fn psf(&self) -> &ImageGrid {
        &self.psf
    }

    pub fn otf(&self) -> &Spectrum {
        &self.otf
    }

    pub fn factors(&self) -> DecimationFactors {
        self.factors
    }

    pub fn hr_shape(&self) -> (usize, usize) {
        self.psf.shape()
    }

    pub fn lr_shape(&self) -> (usize, usize) {
        self.lr_shape
    }

    /// `S K x`.
    pub fn forward(&self, x: &ImageGrid) -> Result<ImageGrid> {
        downsample(&apply_blur(x, self)?, self.factors)
    }
}

/// `K x` evaluated through the OTF.
pub fn apply_blur(x: &ImageGrid, op: &DegradationOperator) -> Result<ImageGrid> {
    apply_diagonal(x, &op.otf)
}

/// Alias groups of decimation in the frequency domain.
///
/// Group `g = u * n_c + v` holds the `d` HR bins
/// `(u + a*n_r, v + b*n_c)` for `0 <= a < d_r`, `0 <= b < d_c`, ordered with
/// `a` as the slow index. Everything is computed by index arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliasGroups {
    hr_shape: (usize, usize),
    lr_shape: (usize, usize),
    factors: DecimationFactors,
}

impl AliasGroups {
    pub fn new(hr_shape: (usize, usize), factors: DecimationFactors) -> Result<Self> {
        let lr_shape = factors.lr_shape(hr_shape)?;
        Ok(Self {
            hr_shape,
            lr_shape,
            factors,
        })
    }

    pub fn hr_shape(&self) -> (usize, usize) {
        self.hr_shape
    }

    pub fn lr_shape(&self) -> (usize, usize) {
        self.lr_shape
    }

    pub fn factors(&self) -> DecimationFactors {
        self.factors
    }

    /// Number of groups, `n`.
    pub fn count(&self) -> usize {
        self.lr_shape.0 * self.lr_shape.1
    }

    /// Members per group, `d`.
    pub fn group_size(&self) -> usize {
        self.factors.total()
    }

    /// Group of the row-major HR frequency index `i`.
    pub fn group_of(&self, i: usize) -> usize {
        let (p, q) = (i / self.hr_shape.1, i % self.hr_shape.1);
        (p % self.lr_shape.0) * self.lr_shape.1 + q % self.lr_shape.1
    }

    /// `k`-th member (row-major HR index) of group `g`.
    pub fn member(&self, g: usize, k: usize) -> usize {
        let (u, v) = (g / self.lr_shape.1, g % self.lr_shape.1);
        let (a, b) = (k / self.factors.cols, k % self.factors.cols);
        let p = u + a * self.lr_shape.0;
        let q = v + b * self.lr_shape.1;
        p * self.hr_shape.1 + q
    }

    pub fn members(&self, g: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.group_size()).map(move |k| self.member(g, k))
    }

    /// Gathering permutation: entry `g*d + k` is the HR index of member `k`
    /// of group `g`.
    pub fn permutation(&self) -> Vec<usize> {
        (0..self.count())
            .flat_map(|g| self.members(g).collect::<Vec<_>>())
            .collect()
    }
}

pub fn build_alias_groups(hr_shape: (usize, usize), f: DecimationFactors) -> Result<AliasGroups> {
    AliasGroups::new(hr_shape, f)
}

/// One convolutional regularisation block `||l_k * x - v_k||^2`.
#[derive(Debug, Clone)]
pub struct RegularizerBlock {
    kernel: ImageGrid,
    gamma: Spectrum,
    target: ImageGrid,
}

impl RegularizerBlock {
    pub fn kernel(&self) -> &ImageGrid {
        &self.kernel
    }

    pub fn gamma(&self) -> &Spectrum {
        &self.gamma
    }

    pub fn target(&self) -> &ImageGrid {
        &self.target
    }

    /// `L_k x`.
    pub fn apply(&self, x: &ImageGrid) -> Result<ImageGrid> {
        apply_diagonal(x, &self.gamma)
    }
}

/// Stack of convolutional regularisers `L = [L_1; ...; L_m]` with targets `v`.
#[derive(Debug, Clone)]
pub struct RegularizerStack {
    blocks: Vec<RegularizerBlock>,
    epsilon: f64,
    gamma_sq: Vec<f64>,
    psi: Vec<f64>,
    hr_shape: (usize, usize),
}

impl RegularizerStack {
    /// `blocks` holds `(embedded kernel, target)` pairs on the HR grid.
    pub fn new(hr_shape: (usize, usize), blocks: Vec<(ImageGrid, ImageGrid)>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        let n = hr_shape.0 * hr_shape.1;
        let mut gamma_sq = vec![0.0; n];
        let mut built = Vec::with_capacity(blocks.len());
        for (kernel, target) in blocks {
            kernel.expect_shape(hr_shape)?;
            target.expect_shape(hr_shape)?;
            let gamma = transfer_function(&kernel);
            for (acc, z) in gamma_sq.iter_mut().zip(gamma.data()) {
                *acc += z.norm_sqr();
            }
            built.push(RegularizerBlock {
                kernel,
                gamma,
                target,
            });
        }
        let psi = gamma_sq.iter().map(|g| 1.0 / (g + epsilon)).collect();
        Ok(Self {
            blocks: built,
            epsilon,
            gamma_sq,
            psi,
            hr_shape,
        })
    }

    /// Periodic forward differences along columns (horizontal) and rows
    /// (vertical) with zero targets.
    pub fn finite_differences(hr_shape: (usize, usize), epsilon: f64) -> Result<Self> {
        let (nr, nc) = hr_shape;
        if nr == 0 || nc == 0 {
            return Err(Error::InvalidShape(format!("{nr}x{nc} grid is empty")));
        }
        // (D_h x)[i,j] = x[i,j+1] - x[i,j] as a convolution kernel.
        let mut dh = ImageGrid::zeros(nr, nc);
        dh.set(0, 0, -1.0);
        dh.set(0, (nc - 1) % nc, dh.get(0, (nc - 1) % nc) + 1.0);
        let mut dv = ImageGrid::zeros(nr, nc);
        dv.set(0, 0, -1.0);
        dv.set((nr - 1) % nr, 0, dv.get((nr - 1) % nr, 0) + 1.0);
        let zero = ImageGrid::zeros(nr, nc);
        Self::new(hr_shape, vec![(dh, zero.clone()), (dv, zero)], epsilon)
    }

    pub fn blocks(&self) -> &[RegularizerBlock] {
        &self.blocks
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn hr_shape(&self) -> (usize, usize) {
        self.hr_shape
    }

    /// `sum_k |gamma_k,i|^2` per HR bin.
    pub fn gamma_sq(&self) -> &[f64] {
        &self.gamma_sq
    }

    /// `1 / (gamma_sq_i + eps)` per HR bin.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// `sum_k conj(gamma_k) * F v_k`, the Fourier image of `L^H v`.
    pub fn adjoint_target_spectrum(&self) -> Spectrum {
        let mut acc = Spectrum::zeros(self.hr_shape.0, self.hr_shape.1);
        for block in &self.blocks {
            if block.target.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            let vt = dft2(&block.target);
            for ((a, g), v) in acc.data_mut().iter_mut().zip(block.gamma.data()).zip(vt.data()) {
                *a += g.conj() * v;
            }
        }
        acc
    }
}

pub fn build_difference_regularizer(hr_shape: (usize, usize), epsilon: f64) -> Result<RegularizerStack> {
    RegularizerStack::finite_differences(hr_shape, epsilon)
}
