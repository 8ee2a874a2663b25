//! Synthetic desk-scale datasets: PSF cubes from randomized Fourier-plane
//! coverage, power-law spectral sky cubes, and SNR-calibrated noise.
//!
//! The PSF model mimics an aperture-synthesis dirty beam: a binary
//! Hermitian-symmetric mask selects which Fourier cells are "measured"
//! (DC always included, so total flux is observed), and the PSF is the
//! inverse transform, peak-normalized to 1. Masks are drawn by weighted
//! sampling without replacement with an exponential radial density, so
//! coverage concentrates at low spatial frequencies; per band the radial
//! scale shrinks with wavelength (the same layout measures ∝ 1/λ), which
//! gives the slight band-to-band variation of a broadband instrument.
//!
//! The sky follows a first-order power law per pixel:
//!   x_ℓ(n) = x_ref(n) · (λ_ref/λ_ℓ)^β(n),
//!   β(n) = 0.3·G(n) + 0.5·x̂_ref(n),
//! with G a seeded smooth Gaussian random field (correlation length dims/8)
//! and x̂_ref the unit-normalized reference image. Wavelengths span a 2:1
//! range uniformly with band 0 as reference.
//!
//! Everything is driven by seeded generators: same seed, bitwise-identical
//! dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;

use crate::cube::{ImageCube, NoiseModel};
use crate::error::{CoreError, Result};
use crate::operators::{Fft2, PsfSet};

/// Variance stamped into the noise model when no noise is requested; small
/// enough that Nσ² terms are negligible against any real signal.
pub const NOISELESS_VARIANCE: f64 = 1e-30;

/// Uniform wavelength grid over a 2:1 range: λ_ℓ = 1 + ℓ/(L−1), so band 0
/// is the reference and the last band has twice its wavelength.
pub fn make_wavelengths(bands: usize) -> Vec<f64> {
    if bands <= 1 {
        return vec![1.0; bands];
    }
    (0..bands)
        .map(|l| 1.0 + l as f64 / (bands - 1) as f64)
        .collect()
}

/// Binary Fourier-plane coverage, one mask per band.
#[derive(Debug, Clone)]
pub struct UvCoverage {
    width: usize,
    height: usize,
    masks: Vec<Vec<f64>>,
    seed: u64,
    fill: f64,
}

impl UvCoverage {
    /// Randomized coverage at the given fill fraction. Requires
    /// power-of-two dims and fill ∈ (0, 1].
    pub fn random(
        width: usize,
        height: usize,
        wavelengths: &[f64],
        fill: f64,
        seed: u64,
    ) -> Result<Self> {
        if width == 0 || height == 0 || !width.is_power_of_two() || !height.is_power_of_two() {
            return Err(CoreError::InvalidArgument(format!(
                "mask grid {width}x{height} must be power-of-two"
            )));
        }
        if !(fill > 0.0 && fill <= 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "fill fraction {fill} outside (0, 1]"
            )));
        }
        if wavelengths.is_empty() {
            return Err(CoreError::InvalidArgument("no bands".into()));
        }
        let n = width * height;
        let target = ((fill * n as f64).round() as usize).max(1);
        let lambda_ref = wavelengths[0];

        // One exponential race value per canonical cell, shared across bands
        // so masks are correlated; the per-band radial weight reshuffles the
        // ranking slightly with wavelength.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let race: Vec<f64> = (0..n)
            .map(|_| -f64::ln(1.0 - rng.random::<f64>()))
            .collect();

        let signed = |k: usize, dim: usize| -> f64 {
            let k = k as isize;
            let dim = dim as isize;
            let s = if k > dim / 2 { k - dim } else { k };
            s as f64
        };
        let rho = (width.min(height)) as f64 / 6.0;

        let mut masks = Vec::with_capacity(wavelengths.len());
        for &lambda in wavelengths {
            let mut mask = vec![0.0; n];
            if fill == 1.0 {
                mask.fill(1.0);
                masks.push(mask);
                continue;
            }
            let scale = lambda_ref / lambda; // ≤ 1: longer λ sees shorter baselines
            // Score canonical cells (cell ≤ its conjugate in index order).
            let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n / 2 + 2);
            for v in 0..height {
                for u in 0..width {
                    let idx = v * width + u;
                    let conj = ((height - v) % height) * width + (width - u) % width;
                    if idx > conj {
                        continue;
                    }
                    let du = signed(u, width);
                    let dv = signed(v, height);
                    let dist = (du * du + dv * dv).sqrt() / scale;
                    // Efraimidis–Spirakis: smallest race/weight wins.
                    let weight = (-dist / rho).exp().max(1e-300);
                    scored.push((race[idx] / weight, idx));
                }
            }
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

            mask[0] = 1.0; // DC: total flux is always measured
            let mut set = 1usize;
            for &(_, idx) in &scored {
                if set >= target {
                    break;
                }
                if mask[idx] != 0.0 {
                    continue;
                }
                let v = idx / width;
                let u = idx % width;
                let conj = ((height - v) % height) * width + (width - u) % width;
                mask[idx] = 1.0;
                set += 1;
                if conj != idx && mask[conj] == 0.0 {
                    mask[conj] = 1.0;
                    set += 1;
                }
            }
            masks.push(mask);
        }
        let coverage = UvCoverage {
            width,
            height,
            masks,
            seed,
            fill,
        };
        coverage.check_invariants()?;
        Ok(coverage)
    }

    fn check_invariants(&self) -> Result<()> {
        for (band, mask) in self.masks.iter().enumerate() {
            if mask[0] <= 0.0 {
                return Err(CoreError::Numerical(format!("band {band}: DC cell unmeasured")));
            }
            for v in 0..self.height {
                for u in 0..self.width {
                    let conj =
                        ((self.height - v) % self.height) * self.width + (self.width - u) % self.width;
                    if mask[v * self.width + u] != mask[conj] {
                        return Err(CoreError::Numerical(format!(
                            "band {band}: mask not Hermitian at ({u},{v})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mask(&self, band: usize) -> &[f64] {
        &self.masks[band]
    }

    pub fn bands(&self) -> usize {
        self.masks.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fill(&self) -> f64 {
        self.fill
    }

    /// PSFs = inverse transform of each mask, peak-normalized to 1 at the
    /// origin pixel. A Hermitian binary mask has a real inverse transform
    /// whose maximum sits at the origin, so the normalization is exact.
    pub fn to_psf_cube(&self, wavelengths: &[f64]) -> Result<ImageCube> {
        if wavelengths.len() != self.masks.len() {
            return Err(CoreError::DimensionMismatch(
                "wavelength count differs from mask count".into(),
            ));
        }
        let n = self.width * self.height;
        let fft = Fft2::new(self.width, self.height);
        let mut cube = ImageCube::zeros(self.width, self.height, self.bands(), wavelengths.to_vec())?;
        for (band, mask) in self.masks.iter().enumerate() {
            let spectrum: Vec<Complex<f64>> = mask.iter().map(|&m| Complex::new(m, 0.0)).collect();
            let img = fft.inverse(spectrum);
            let peak = img[0].re;
            debug_assert!(img.iter().all(|c| c.im.abs() < 1e-12 * peak.abs().max(1.0)));
            debug_assert!(img.iter().all(|c| c.re <= peak + 1e-12));
            let plane = cube.plane_mut(band);
            for i in 0..n {
                plane[i] = img[i].re / peak;
            }
            plane[0] = 1.0;
        }
        Ok(cube)
    }
}

/// Convenience wrapper: random coverage at the standard wavelength grid,
/// rendered to PSFs.
pub fn make_psf_cube(
    width: usize,
    height: usize,
    bands: usize,
    fill: f64,
    seed: u64,
) -> Result<ImageCube> {
    let wavelengths = make_wavelengths(bands);
    UvCoverage::random(width, height, &wavelengths, fill, seed)?.to_psf_cube(&wavelengths)
}

/// Band-independent structure plus a per-pixel power-law exponent.
#[derive(Debug, Clone)]
pub struct SkyModel {
    width: usize,
    height: usize,
    reference: Vec<f64>,
    beta: Vec<f64>,
}

impl SkyModel {
    pub fn new(width: usize, height: usize, reference: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if reference.len() != n || beta.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "sky model arrays must have {n} pixels"
            )));
        }
        if reference.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "reference image must be finite and ≥ 0".into(),
            ));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidArgument("spectral index must be finite".into()));
        }
        Ok(SkyModel {
            width,
            height,
            reference,
            beta,
        })
    }

    /// Flat spectrum: every band equals the reference image.
    pub fn flat(width: usize, height: usize, reference: Vec<f64>) -> Result<Self> {
        let beta = vec![0.0; reference.len()];
        Self::new(width, height, reference, beta)
    }

    /// Seeded synthetic sky: a handful of Gaussian blobs plus point sources,
    /// β = 0.3·G + 0.5·x̂_ref with G a smooth unit-variance Gaussian field of
    /// correlation length dims/8.
    pub fn synthetic(width: usize, height: usize, seed: u64) -> Result<Self> {
        let n = width * height;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reference = vec![0.0; n];

        let blobs = 3 + (width.min(height) / 16);
        for _ in 0..blobs {
            let cx = rng.random_range(0.0..width as f64);
            let cy = rng.random_range(0.0..height as f64);
            let sigma = rng.random_range(width.min(height) as f64 / 16.0..width.min(height) as f64 / 4.0);
            let amp = rng.random_range(0.2..1.0);
            for y in 0..height {
                for x in 0..width {
                    // Toroidal distance keeps the field periodic like the
                    // circular convolution model.
                    let dx = (x as f64 - cx).abs().min(width as f64 - (x as f64 - cx).abs());
                    let dy = (y as f64 - cy).abs().min(height as f64 - (y as f64 - cy).abs());
                    reference[y * width + x] +=
                        amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        let points = 2 + width.min(height) / 8;
        for _ in 0..points {
            let x = rng.random_range(0..width);
            let y = rng.random_range(0..height);
            reference[y * width + x] += rng.random_range(0.5..1.5);
        }

        let field = gaussian_field(width, height, width.min(height) as f64 / 8.0, rng.random());
        let max_ref = reference.iter().cloned().fold(0.0, f64::max).max(1e-12);
        let beta: Vec<f64> = field
            .iter()
            .zip(&reference)
            .map(|(g, r)| 0.3 * g + 0.5 * (r / max_ref))
            .collect();
        Self::new(width, height, reference, beta)
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Smooth unit-variance Gaussian random field: white noise convolved with a
/// Gaussian kernel of the given correlation length, then standardized.
fn gaussian_field(width: usize, height: usize, corr_len: f64, seed: u64) -> Vec<f64> {
    let n = width * height;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let white: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();

    let mut kernel = vec![0.0; n];
    for y in 0..height {
        for x in 0..width {
            let dx = (x.min(width - x)) as f64;
            let dy = (y.min(height - y)) as f64;
            kernel[y * width + x] = (-(dx * dx + dy * dy) / (2.0 * corr_len * corr_len)).exp();
        }
    }

    let fft = Fft2::new(width, height);
    let kf = fft.forward(&kernel);
    let wf = fft.forward(&white);
    let prod: Vec<Complex<f64>> = kf.iter().zip(&wf).map(|(a, b)| a * b).collect();
    let smooth = fft.inverse(prod);
    let vals: Vec<f64> = smooth.into_iter().map(|c| c.re).collect();

    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt().max(1e-12);
    vals.into_iter().map(|v| (v - mean) / std).collect()
}

/// x_ℓ(n) = x_ref(n) · (λ_ref/λ_ℓ)^β(n), reference = band 0.
pub fn make_sky_cube(sky: &SkyModel, wavelengths: &[f64]) -> Result<ImageCube> {
    if wavelengths.is_empty() {
        return Err(CoreError::InvalidArgument("no bands".into()));
    }
    if wavelengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(CoreError::InvalidArgument("wavelengths must be positive".into()));
    }
    let lambda_ref = wavelengths[0];
    let n = sky.width * sky.height;
    let mut cube = ImageCube::zeros(sky.width, sky.height, wavelengths.len(), wavelengths.to_vec())?;
    for (band, &lambda) in wavelengths.iter().enumerate() {
        let ratio = lambda_ref / lambda;
        let plane = cube.plane_mut(band);
        for i in 0..n {
            plane[i] = sky.reference[i] * ratio.powf(sky.beta[i]);
        }
    }
    Ok(cube)
}

/// Noiseless dirty cube: y_ℓ = H_ℓ x⋆_ℓ per band.
pub fn make_dirty_cube(sky: &ImageCube, psf: &ImageCube) -> Result<ImageCube> {
    let psfs = PsfSet::from_cube(psf)?;
    if psfs.width() != sky.width() || psfs.height() != sky.height() || psfs.bands() != sky.bands()
    {
        return Err(CoreError::DimensionMismatch(
            "sky and psf cubes disagree".into(),
        ));
    }
    let mut dirty = ImageCube::zeros_like(sky);
    for band in 0..sky.bands() {
        let blurred = psfs.band(band).apply(sky.plane(band))?;
        dirty.plane_mut(band).copy_from_slice(&blurred);
    }
    Ok(dirty)
}

/// Add i.i.d. Gaussian noise calibrated so 10·log₁₀(‖dirty‖²/‖noise‖²)
/// matches the target (within sampling error); a single variance is used
/// for all bands. `None` target → zero noise and a tiny positive variance
/// stamp (`NOISELESS_VARIANCE`) so downstream risk terms stay negligible.
pub fn add_noise(
    dirty: &ImageCube,
    target_snr_db: Option<f64>,
    seed: u64,
) -> Result<(ImageCube, NoiseModel)> {
    let bands = dirty.bands();
    let Some(target) = target_snr_db else {
        return Ok((dirty.clone(), NoiseModel::uniform(NOISELESS_VARIANCE, bands)?));
    };
    if !target.is_finite() {
        return Ok((dirty.clone(), NoiseModel::uniform(NOISELESS_VARIANCE, bands)?));
    }
    let energy: f64 = dirty.data().iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(CoreError::InvalidArgument("zero-energy dirty cube".into()));
    }
    let samples = dirty.data().len() as f64;
    let variance = energy / (samples * 10f64.powf(target / 10.0));
    let normal = Normal::new(0.0, variance.sqrt())
        .map_err(|e| CoreError::Numerical(format!("noise sampler: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = dirty.clone();
    for v in noisy.data_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok((noisy, NoiseModel::uniform(variance, bands)?))
}

/// A complete replayable synthetic experiment.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub sky: ImageCube,
    pub psf: ImageCube,
    /// H x⋆ with no noise.
    pub noiseless: ImageCube,
    /// The observed data: noiseless + noise.
    pub dirty: ImageCube,
    pub noise: NoiseModel,
    pub wavelengths: Vec<f64>,
    /// Sub-seeds actually used (sky, psf, noise), derived from the master
    /// seed; recorded so a manifest can replay each stage independently.
    pub seeds: [u64; 3],
}

/// End-to-end synthesis from one master seed.
pub fn synthesize(
    width: usize,
    height: usize,
    bands: usize,
    fill: f64,
    target_snr_db: Option<f64>,
    seed: u64,
) -> Result<SyntheticDataset> {
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let seeds = [root.random::<u64>(), root.random::<u64>(), root.random::<u64>()];
    let wavelengths = make_wavelengths(bands);
    let sky_model = SkyModel::synthetic(width, height, seeds[0])?;
    let sky = make_sky_cube(&sky_model, &wavelengths)?;
    let psf = UvCoverage::random(width, height, &wavelengths, fill, seeds[1])?
        .to_psf_cube(&wavelengths)?;
    let noiseless = make_dirty_cube(&sky, &psf)?;
    let (dirty, noise) = add_noise(&noiseless, target_snr_db, seeds[2])?;
    Ok(SyntheticDataset {
        sky,
        psf,
        noiseless,
        dirty,
        noise,
        wavelengths,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::BandOperator;

    #[test]
    fn wavelength_grid_spans_two_to_one() {
        assert_eq!(make_wavelengths(1), vec![1.0]);
        let w = make_wavelengths(4);
        assert_eq!(w, vec![1.0, 1.0 + 1.0 / 3.0, 1.0 + 2.0 / 3.0, 2.0]);
        let w = make_wavelengths(5);
        assert_eq!(w[0], 1.0);
        assert_eq!(w[4], 2.0);
        for pair in w.windows(2) {
            assert!((pair[1] - pair[0] - 0.25).abs() < 1e-15, "uniform spacing");
        }
    }

    #[test]
    fn full_coverage_gives_delta_psf() {
        let cube = make_psf_cube(8, 8, 2, 1.0, 5).unwrap();
        for band in 0..2 {
            let plane = cube.plane(band);
            assert_eq!(plane[0], 1.0);
            for &v in &plane[1..] {
                assert!(v.abs() < 1e-12, "off-origin value {v}");
            }
        }
    }

    #[test]
    fn psf_peak_is_one_at_origin_and_dominates() {
        let cube = make_psf_cube(16, 16, 3, 0.3, 6).unwrap();
        for band in 0..3 {
            let plane = cube.plane(band);
            assert_eq!(plane[0], 1.0);
            for &v in &plane[1..] {
                assert!(v.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn psf_transfer_is_a_binary_hermitian_mask() {
        let (w, h) = (16, 16);
        let wavelengths = make_wavelengths(2);
        let coverage = UvCoverage::random(w, h, &wavelengths, 0.4, 7).unwrap();
        let cube = coverage.to_psf_cube(&wavelengths).unwrap();
        let fft = Fft2::new(w, h);
        for band in 0..2 {
            let spectrum = fft.forward(cube.plane(band));
            let peak = spectrum.iter().map(|c| c.re).fold(0.0, f64::max);
            for (k, c) in spectrum.iter().enumerate() {
                assert!(
                    c.im.abs() < 1e-9 * peak,
                    "imaginary leakage at cell {k}: {}",
                    c.im
                );
                let normalized = c.re / peak;
                assert!(
                    normalized.abs() < 1e-9 || (normalized - 1.0).abs() < 1e-9,
                    "cell {k} not binary: {normalized}"
                );
            }
            // And it matches the mask that generated it.
            for (k, c) in spectrum.iter().enumerate() {
                let expect = coverage.mask(band)[k];
                assert!((c.re / peak - expect).abs() < 1e-9, "cell {k}");
            }
            assert!(spectrum[0].re > 0.0, "DC measured");
        }
    }

    #[test]
    fn coverage_fill_fraction_is_respected() {
        let (w, h) = (32, 32);
        let wavelengths = make_wavelengths(3);
        for fill in [0.1, 0.5, 0.9] {
            let cov = UvCoverage::random(w, h, &wavelengths, fill, 11).unwrap();
            for band in 0..3 {
                let set = cov.mask(band).iter().filter(|&&v| v != 0.0).count();
                let target = (fill * (w * h) as f64).round() as usize;
                assert!(
                    (set as isize - target as isize).unsigned_abs() <= 1,
                    "fill {fill}: {set} cells vs target {target}"
                );
            }
        }
        assert!(UvCoverage::random(w, h, &wavelengths, 0.0, 1).is_err());
        assert!(UvCoverage::random(w, h, &wavelengths, 1.1, 1).is_err());
        assert!(UvCoverage::random(12, 16, &wavelengths, 0.5, 1).is_err());
    }

    #[test]
    fn same_seed_means_bitwise_identical_psfs() {
        let a = make_psf_cube(16, 16, 4, 0.25, 42).unwrap();
        let b = make_psf_cube(16, 16, 4, 0.25, 42).unwrap();
        let c = make_psf_cube(16, 16, 4, 0.25, 43).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn flat_spectrum_repeats_reference() {
        let reference: Vec<f64> = (0..16).map(|i| i as f64 / 7.0).collect();
        let sky = SkyModel::flat(4, 4, reference.clone()).unwrap();
        let cube = make_sky_cube(&sky, &make_wavelengths(3)).unwrap();
        for band in 0..3 {
            assert_eq!(cube.plane(band), &reference[..]);
        }
    }

    #[test]
    fn power_law_doubles_when_wavelength_ratio_is_two() {
        // β = 1 at one pixel; λ_ref/λ_1 = 2 ⇒ that pixel doubles in band 1.
        let mut reference = vec![0.0; 16];
        reference[5] = 1.0;
        let mut beta = vec![0.0; 16];
        beta[5] = 1.0;
        let sky = SkyModel::new(4, 4, reference, beta).unwrap();
        let cube = make_sky_cube(&sky, &[2.0, 1.0]).unwrap();
        assert_eq!(cube.plane(0)[5], 1.0);
        assert!((cube.plane(1)[5] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sky_cube_positive_where_reference_positive() {
        let sky = SkyModel::synthetic(16, 16, 9).unwrap();
        let cube = make_sky_cube(&sky, &make_wavelengths(4)).unwrap();
        let n = 16 * 16;
        for band in 0..4 {
            for i in 0..n {
                if sky.reference()[i] > 0.0 {
                    assert!(cube.plane(band)[i] > 0.0);
                } else {
                    assert_eq!(cube.plane(band)[i], 0.0);
                }
            }
        }
        // The synthetic spectral index stays in a modest range, so spectra
        // vary by a factor of about two across the 2:1 wavelength span.
        assert!(sky.beta().iter().all(|b| b.abs() < 2.0));
    }

    #[test]
    fn realized_snr_matches_target() {
        let data = synthesize(32, 32, 4, 0.4, Some(10.0), 100).unwrap();
        let signal: f64 = data.noiseless.data().iter().map(|v| v * v).sum();
        let noise_energy: f64 = data
            .dirty
            .data()
            .iter()
            .zip(data.noiseless.data())
            .map(|(y, s)| (y - s) * (y - s))
            .sum();
        let realized = 10.0 * (signal / noise_energy).log10();
        assert!(
            (realized - 10.0).abs() < 0.5,
            "realized SNR {realized:.2} dB vs target 10 dB"
        );
        assert_eq!(data.noise.bands(), 4);
        assert!(data.noise.variance(0) > 0.0);
    }

    #[test]
    fn noiseless_flag_keeps_data_and_stamps_tiny_variance() {
        let sky = make_sky_cube(&SkyModel::synthetic(8, 8, 3).unwrap(), &make_wavelengths(2)).unwrap();
        let psf = make_psf_cube(8, 8, 2, 0.5, 4).unwrap();
        let dirty = make_dirty_cube(&sky, &psf).unwrap();
        let (noisy, noise) = add_noise(&dirty, None, 17).unwrap();
        assert_eq!(noisy.data(), dirty.data());
        assert_eq!(noise.variance(0), NOISELESS_VARIANCE);
        let (noisy, _) = add_noise(&dirty, Some(f64::INFINITY), 17).unwrap();
        assert_eq!(noisy.data(), dirty.data());

        let zero = ImageCube::zeros(4, 4, 1, vec![1.0]).unwrap();
        assert!(add_noise(&zero, Some(10.0), 1).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let sky = make_sky_cube(&SkyModel::synthetic(8, 8, 5).unwrap(), &make_wavelengths(2)).unwrap();
        let psf = make_psf_cube(8, 8, 2, 0.5, 6).unwrap();
        let dirty = make_dirty_cube(&sky, &psf).unwrap();
        let (a, _) = add_noise(&dirty, Some(10.0), 7).unwrap();
        let (b, _) = add_noise(&dirty, Some(10.0), 7).unwrap();
        let (c, _) = add_noise(&dirty, Some(10.0), 8).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn end_to_end_synthesis_is_replayable_and_consistent() {
        let a = synthesize(16, 16, 3, 0.3, Some(12.0), 55).unwrap();
        let b = synthesize(16, 16, 3, 0.3, Some(12.0), 55).unwrap();
        assert_eq!(a.sky.data(), b.sky.data());
        assert_eq!(a.psf.data(), b.psf.data());
        assert_eq!(a.dirty.data(), b.dirty.data());
        assert_eq!(a.seeds, b.seeds);

        // The emitted noiseless cube really is H applied to the sky.
        for band in 0..3 {
            let op = BandOperator::new(a.psf.plane(band), 16, 16).unwrap();
            let blurred = op.apply(a.sky.plane(band)).unwrap();
            assert_eq!(&blurred[..], a.noiseless.plane(band), "band {band}");
        }
    }
}
