//! Per-band convolution H_ℓ and its adjoint H_ℓ†.
//!
//! Boundary conditions are circular, so H_ℓ is diagonalized by the 2-D DFT:
//! apply = IFFT(FFT(x) ∘ T), adjoint = IFFT(FFT(x) ∘ conj(T)) with T the
//! transfer function (FFT of the PSF plane). This makes the adjoint exact to
//! rounding and the operator norm available in closed form,
//! ‖H_ℓ‖² = max |T|².

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::cube::ImageCube;
use crate::error::{CoreError, Result};

/// Cached 1-D plans for a fixed W×H grid; 2-D transforms are row passes then
/// column passes. Plans are immutable and shared across band workers.
pub(crate) struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(width);
        let row_inv = planner.plan_fft_inverse(width);
        let col_fwd = planner.plan_fft_forward(height);
        let col_inv = planner.plan_fft_inverse(height);
        Fft2 {
            width,
            height,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
        }
    }

    fn rows_then_cols(&self, buf: &mut [Complex<f64>], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        for r in buf.chunks_exact_mut(self.width) {
            row.process(r);
        }
        let mut column = vec![Complex::default(); self.height];
        for c in 0..self.width {
            for (y, slot) in column.iter_mut().enumerate() {
                *slot = buf[y * self.width + c];
            }
            col.process(&mut column);
            for (y, &v) in column.iter().enumerate() {
                buf[y * self.width + c] = v;
            }
        }
    }

    /// Unnormalized forward 2-D DFT of a real plane.
    pub(crate) fn forward(&self, real: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = real.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.rows_then_cols(&mut buf, &self.row_fwd, &self.col_fwd);
        buf
    }

    /// Inverse 2-D DFT, normalized by 1/(W·H).
    pub(crate) fn inverse(&self, mut spec: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.rows_then_cols(&mut spec, &self.row_inv, &self.col_inv);
        let scale = 1.0 / (self.width * self.height) as f64;
        for v in &mut spec {
            *v *= scale;
        }
        spec
    }
}

/// Circular convolution by one band's PSF.
pub struct BandOperator {
    width: usize,
    height: usize,
    psf: Vec<f64>,
    transfer: Vec<Complex<f64>>,
    norm_sq: f64,
    fft: Arc<Fft2>,
}

impl BandOperator {
    pub fn new(psf: &[f64], width: usize, height: usize) -> Result<Self> {
        Self::with_fft(psf, width, height, Arc::new(Fft2::new(width, height)))
    }

    fn with_fft(psf: &[f64], width: usize, height: usize, fft: Arc<Fft2>) -> Result<Self> {
        if psf.len() != width * height {
            return Err(CoreError::DimensionMismatch(format!(
                "psf has {} samples for a {width}x{height} grid",
                psf.len()
            )));
        }
        let transfer = fft.forward(psf);
        let norm_sq = transfer.iter().map(|t| t.norm_sqr()).fold(0.0, f64::max);
        Ok(BandOperator {
            width,
            height,
            psf: psf.to_vec(),
            transfer,
            norm_sq,
            fft,
        })
    }

    fn check_dims(&self, img: &[f64]) -> Result<()> {
        if img.len() != self.width * self.height {
            return Err(CoreError::DimensionMismatch(format!(
                "image has {} samples for a {}x{} grid",
                img.len(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    /// H x: circular convolution of `img` with the PSF.
    pub fn apply(&self, img: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(img)?;
        let mut spec = self.fft.forward(img);
        for (s, t) in spec.iter_mut().zip(&self.transfer) {
            *s *= t;
        }
        Ok(self.fft.inverse(spec).into_iter().map(|c| c.re).collect())
    }

    /// H† x: circular correlation (conjugate transfer function).
    pub fn adjoint(&self, img: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(img)?;
        let mut spec = self.fft.forward(img);
        for (s, t) in spec.iter_mut().zip(&self.transfer) {
            *s *= t.conj();
        }
        Ok(self.fft.inverse(spec).into_iter().map(|c| c.re).collect())
    }

    /// Data-fidelity gradient H†(Hx − y).
    pub fn gradient(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(y)?;
        let mut residual = self.apply(x)?;
        for (r, &yv) in residual.iter_mut().zip(y) {
            *r -= yv;
        }
        self.adjoint(&residual)
    }

    /// Exact squared operator norm, max |T|².
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn psf(&self) -> &[f64] {
        &self.psf
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// One BandOperator per band, sharing a grid and FFT plans.
pub struct PsfSet {
    width: usize,
    height: usize,
    ops: Vec<BandOperator>,
}

impl PsfSet {
    pub fn from_cube(psf_cube: &ImageCube) -> Result<Self> {
        let width = psf_cube.width();
        let height = psf_cube.height();
        let fft = Arc::new(Fft2::new(width, height));
        let ops = (0..psf_cube.bands())
            .map(|l| BandOperator::with_fft(psf_cube.plane(l), width, height, fft.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PsfSet { width, height, ops })
    }

    pub fn bands(&self) -> usize {
        self.ops.len()
    }

    pub fn band(&self, l: usize) -> &BandOperator {
        &self.ops[l]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// β = max_ℓ ‖H_ℓ‖², the Lipschitz constant of the data-fidelity gradient.
    pub fn max_norm_sq(&self) -> f64 {
        self.ops.iter().map(|o| o.norm_sq()).fold(0.0, f64::max)
    }
}
