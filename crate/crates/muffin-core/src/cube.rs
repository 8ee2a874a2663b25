//! Spectral image cubes and the on-disk cube format.
//!
//! A cube is an N-pixel × L-band stack of real images held in one flat
//! buffer, plane-major: element (pixel n, band ℓ) lives at offset ℓ·N + n,
//! and pixels are row-major inside a plane (n = y·width + x).
//!
//! The file format is a single UTF-8 JSON header line
//! `{"w":W,"h":H,"l":L,"dtype":"f64le","wavelengths":[...]}\n`
//! followed by W·H·L raw little-endian 64-bit floats in the same plane-major
//! order. The exact bytes are deterministic for equal cubes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Real-valued spectral cube; all arithmetic in the toolkit is f64.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCube {
    width: usize,
    height: usize,
    bands: usize,
    wavelengths: Vec<f64>,
    data: Vec<f64>,
}

impl ImageCube {
    pub fn zeros(width: usize, height: usize, bands: usize, wavelengths: Vec<f64>) -> Result<Self> {
        let data = vec![0.0; width * height * bands];
        Self::from_data(width, height, bands, wavelengths, data)
    }

    /// Same grid and wavelength labels as `other`, zero data.
    pub fn zeros_like(other: &ImageCube) -> Self {
        ImageCube {
            width: other.width,
            height: other.height,
            bands: other.bands,
            wavelengths: other.wavelengths.clone(),
            data: vec![0.0; other.data.len()],
        }
    }

    pub fn from_data(
        width: usize,
        height: usize,
        bands: usize,
        wavelengths: Vec<f64>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "cube dimensions must be positive, got {width}x{height}x{bands}"
            )));
        }
        if wavelengths.len() != bands {
            return Err(CoreError::InvalidArgument(format!(
                "{} wavelength labels for {} bands",
                wavelengths.len(),
                bands
            )));
        }
        if let Some(bad) = wavelengths.iter().position(|w| !w.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "non-finite wavelength at band {bad}"
            )));
        }
        if data.len() != width * height * bands {
            return Err(CoreError::PayloadSizeMismatch {
                expected: width * height * bands,
                actual: data.len(),
            });
        }
        let cube = ImageCube {
            width,
            height,
            bands,
            wavelengths,
            data,
        };
        cube.check_finite()?;
        Ok(cube)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Pixels per plane, N = width × height.
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Raw mutable access for the solver's hot loops. Finiteness is enforced
    /// at the I/O boundary (`cube_write`/`cube_read`), not per mutation.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn plane(&self, band: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    pub fn plane_mut(&mut self, band: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[band * n..(band + 1) * n]
    }

    /// Gather the length-L spectrum of pixel n into `out`.
    pub fn spectrum_into(&self, pixel: usize, out: &mut [f64]) {
        let n = self.pixels();
        for (l, slot) in out.iter_mut().enumerate() {
            *slot = self.data[l * n + pixel];
        }
    }

    pub fn set_spectrum(&mut self, pixel: usize, values: &[f64]) {
        let n = self.pixels();
        for (l, &v) in values.iter().enumerate() {
            self.data[l * n + pixel] = v;
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let n = self.pixels();
        if let Some(idx) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite {
                index: idx % n,
                band: idx / n,
            });
        }
        Ok(())
    }
}

/// Stacked analysis coefficients: B same-sized coefficient planes per band.
/// Layout: coefficient (band ℓ, basis b, position n) at ((ℓ·B + b)·N + n).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientCube {
    width: usize,
    height: usize,
    bands: usize,
    basis_count: usize,
    data: Vec<f64>,
}

impl CoefficientCube {
    pub fn zeros(width: usize, height: usize, bands: usize, basis_count: usize) -> Self {
        CoefficientCube {
            width,
            height,
            bands,
            basis_count,
            data: vec![0.0; width * height * bands * basis_count],
        }
    }

    pub fn basis_count(&self) -> usize {
        self.basis_count
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Coefficients per band: B × N.
    pub fn stack_len(&self) -> usize {
        self.basis_count * self.pixels()
    }

    /// All B coefficient planes of one band, contiguous.
    pub fn stack(&self, band: usize) -> &[f64] {
        let s = self.stack_len();
        &self.data[band * s..(band + 1) * s]
    }

    pub fn stack_mut(&mut self, band: usize) -> &mut [f64] {
        let s = self.stack_len();
        &mut self.data[band * s..(band + 1) * s]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Per-band Gaussian noise variances σ_ℓ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    variances: Vec<f64>,
}

impl NoiseModel {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(CoreError::InvalidArgument(
                "noise model needs at least one band".into(),
            ));
        }
        if let Some(bad) = variances.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CoreError::InvalidArgument(format!(
                "noise variance for band {bad} must be finite and > 0, got {}",
                variances[bad]
            )));
        }
        Ok(NoiseModel { variances })
    }

    pub fn uniform(variance: f64, bands: usize) -> Result<Self> {
        Self::new(vec![variance; bands])
    }

    pub fn bands(&self) -> usize {
        self.variances.len()
    }

    pub fn variance(&self, band: usize) -> f64 {
        self.variances[band]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

#[derive(Serialize, Deserialize)]
struct CubeHeader {
    w: usize,
    h: usize,
    l: usize,
    dtype: String,
    wavelengths: Vec<f64>,
}

pub fn cube_write<P: AsRef<Path>>(cube: &ImageCube, path: P) -> Result<()> {
    cube.check_finite()?;
    let header = CubeHeader {
        w: cube.width(),
        h: cube.height(),
        l: cube.bands(),
        dtype: "f64le".to_string(),
        wavelengths: cube.wavelengths().to_vec(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header)
        .map_err(|e| CoreError::Io(std::io::Error::other(e)))?;
    out.write_all(b"\n")?;
    for v in cube.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn cube_read<P: AsRef<Path>>(path: P) -> Result<ImageCube> {
    let mut reader = BufReader::new(File::open(path)?);

    // Header: everything up to the first newline. Cap the scan so a binary
    // blob without a newline fails as a malformed header, not an OOM.
    const HEADER_CAP: usize = 1 << 20;
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read(&mut byte)? {
            0 => {
                return Err(CoreError::MalformedHeader(
                    "no newline-terminated header line".into(),
                ))
            }
            _ => {
                if byte[0] == b'\n' {
                    break;
                }
                header_bytes.push(byte[0]);
                if header_bytes.len() > HEADER_CAP {
                    return Err(CoreError::MalformedHeader(
                        "header line exceeds 1 MiB".into(),
                    ));
                }
            }
        }
    }
    let header_str = std::str::from_utf8(&header_bytes)
        .map_err(|e| CoreError::MalformedHeader(format!("header is not UTF-8: {e}")))?;
    let header: CubeHeader = serde_json::from_str(header_str)
        .map_err(|e| CoreError::MalformedHeader(e.to_string()))?;
    if header.dtype != "f64le" {
        return Err(CoreError::MalformedHeader(format!(
            "unsupported dtype {:?}",
            header.dtype
        )));
    }
    if header.w == 0 || header.h == 0 || header.l == 0 {
        return Err(CoreError::MalformedHeader(format!(
            "non-positive dimensions {}x{}x{}",
            header.w, header.h, header.l
        )));
    }
    if header.wavelengths.len() != header.l {
        return Err(CoreError::MalformedHeader(format!(
            "{} wavelengths for {} bands",
            header.wavelengths.len(),
            header.l
        )));
    }

    let expected = header.w * header.h * header.l;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != expected * 8 {
        return Err(CoreError::PayloadSizeMismatch {
            expected,
            actual: payload.len() / 8 + usize::from(payload.len() % 8 != 0),
        });
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageCube::from_data(header.w, header.h, header.l, header.wavelengths, data)
}
