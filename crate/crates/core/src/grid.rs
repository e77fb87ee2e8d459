//! Real and complex rasters and the unitary 2-D DFT.
//!
//! Both transform directions carry a `1/sqrt(rows*cols)` factor, so `dft2` is
//! an isometry and `idft2` is its exact inverse. Bin `(0, 0)` is DC; nothing
//! is shifted in storage.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Default relative tolerance for the imaginary residue accepted by [`idft2`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Real-valued raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Complex-valued raster on a frequency grid, row-major, DC at `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

fn check_dims(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidShape(format!("{rows}x{cols} grid is empty")));
    }
    if rows.checked_mul(cols) != Some(len) {
        return Err(Error::InvalidShape(format!(
            "{len} samples do not fill a {rows}x{cols} grid"
        )));
    }
    Ok(())
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols, data.len())?;
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        assert!(value.is_finite());
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a grid by evaluating `f(row, col)` at every pixel.
    ///
    /// Panics if `f` produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite value at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    /// Unit impulse at `(0, 0)`.
    pub fn impulse(rows: usize, cols: usize) -> Self {
        let mut g = Self::zeros(rows, cols);
        g.data[0] = 1.0;
        g
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Periodic access: indices are reduced modulo the grid shape.
    pub fn get_wrapped(&self, row: isize, col: isize) -> f64 {
        let r = row.rem_euclid(self.rows as isize) as usize;
        let c = col.rem_euclid(self.cols as isize) as usize;
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(value.is_finite());
        self.data[row * self.cols + col] = value;
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| f(self.get(i, j)))
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        self.expect_shape(other.shape())?;
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            f(self.get(i, j), other.get(i, j))
        }))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.expect_shape(other.shape())?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub(crate) fn expect_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: self.shape(),
            });
        }
        Ok(())
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }
}

impl Spectrum {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dims(rows, cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Largest deviation from `S[p,q] = conj(S[-p,-q])`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 0..self.rows {
            for q in 0..self.cols {
                let mirror = self.get((self.rows - p) % self.rows, (self.cols - q) % self.cols);
                worst = worst.max((self.get(p, q) - mirror.conj()).norm());
            }
        }
        worst
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place, unnormalised 2-D FFT of a row-major buffer.
fn fft2_in_place(rows: usize, cols: usize, data: &mut [Complex64], direction: FftDirection) {
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(cols, direction), p.plan_fft(rows, direction))
    });
    row_fft.process(data);
    if rows > 1 {
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = data[r * cols + c];
            }
            col_fft.process(&mut column);
            for r in 0..rows {
                data[r * cols + c] = column[r];
            }
        }
    }
}

/// Unitary forward 2-D DFT.
pub fn dft2(img: &ImageGrid) -> Spectrum {
    let mut data: Vec<Complex64> = img.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(img.rows, img.cols, &mut data, FftDirection::Forward);
    let scale = 1.0 / ((img.rows * img.cols) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    Spectrum {
        rows: img.rows,
        cols: img.cols,
        data,
    }
}

/// Unitary inverse 2-D DFT returning the complex result without a symmetry check.
pub fn idft2_complex(spec: &Spectrum) -> Vec<Complex64> {
    let mut data = spec.data.clone();
    fft2_in_place(spec.rows, spec.cols, &mut data, FftDirection::Inverse);
    let scale = 1.0 / ((spec.rows * spec.cols) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    data
}

/// Unitary inverse 2-D DFT of a conjugate-symmetric spectrum.
pub fn idft2(spec: &Spectrum) -> Result<ImageGrid> {
    idft2_with_tolerance(spec, SYMMETRY_TOLERANCE)
}

/// As [`idft2`], rejecting outputs whose imaginary part exceeds
/// `tolerance * ||spec||`.
pub fn idft2_with_tolerance(spec: &Spectrum, tolerance: f64) -> Result<ImageGrid> {
    let data = idft2_complex(spec);
    let residue = data.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let limit = tolerance * spec.norm();
    if residue > limit {
        return Err(Error::SymmetryViolation {
            residue,
            tolerance: limit,
        });
    }
    let real: Vec<f64> = data.iter().map(|z| z.re).collect();
    if let Some(idx) = real.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(idx));
    }
    Ok(ImageGrid::from_raw(spec.rows, spec.cols, real))
}

/// Periodic convolution `(a * b)[i,j] = sum_{k,l} a[k,l] b[i-k, j-l]`.
pub fn circular_convolve(a: &ImageGrid, b: &ImageGrid) -> Result<ImageGrid> {
    a.expect_shape(b.shape())?;
    let fa = dft2(a);
    let fb = dft2(b);
    let gain = ((a.rows * a.cols) as f64).sqrt();
    let prod: Vec<Complex64> = fa
        .data
        .iter()
        .zip(&fb.data)
        .map(|(x, y)| x * y * gain)
        .collect();
    idft2(&Spectrum {
        rows: a.rows,
        cols: a.cols,
        data: prod,
    })
}
