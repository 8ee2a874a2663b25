//! Analysis operators for the two regularizers.
//!
//! Spatial: W_s stacks B orthonormal 2-D wavelet decompositions (periodic
//! extension, critically sampled pyramid), so W_s† W_s = B·I — a tight frame
//! with ‖W_s‖² = B exactly. Coefficients are stored unnormalized per basis;
//! the constant B is never folded into the filters.
//!
//! Spectral: W_λ is the orthonormal DCT-II along the band axis, W_λ†W_λ = I,
//! ‖W_λ‖ = 1.

mod daubechies;

use crate::error::{CoreError, Result};

/// One orthonormal conjugate-quadrature filter pair.
#[derive(Debug, Clone)]
pub struct WaveletBasis {
    name: String,
    h: Vec<f64>,
    g: Vec<f64>,
}

impl WaveletBasis {
    /// db`p` for p in 1..=8 (db1 = Haar).
    pub fn daubechies(p: usize) -> Self {
        let h = daubechies::scaling_filter(p).to_vec();
        let len = h.len();
        let g = (0..len).map(|m| sign(m) * h[len - 1 - m]).collect();
        WaveletBasis {
            name: format!("db{p}"),
            h,
            g,
        }
    }

    pub fn haar() -> Self {
        Self::daubechies(1)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

fn sign(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// One periodic analysis step: x (even length n) → approx ‖ detail, each n/2.
/// a_k = Σ_m h[m]·x[(2k+m) mod n], d_k likewise with g. Orthonormal for any
/// even n, including n shorter than the filter (the filter wraps).
fn dwt_step(h: &[f64], g: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let half = n / 2;
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for m in 0..h.len() {
            let v = x[(2 * k + m) % n];
            a += h[m] * v;
            d += g[m] * v;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

/// Transpose (= inverse) of `dwt_step`.
fn idwt_step(h: &[f64], g: &[f64], coeffs: &[f64], out: &mut [f64]) {
    let n = coeffs.len();
    let half = n / 2;
    out[..n].fill(0.0);
    for k in 0..half {
        let a = coeffs[k];
        let d = coeffs[half + k];
        for m in 0..h.len() {
            out[(2 * k + m) % n] += h[m] * a + g[m] * d;
        }
    }
}

/// Union of B orthonormal wavelet bases over one image grid.
pub struct SpatialAnalysis {
    bases: Vec<WaveletBasis>,
    depth: usize,
    width: usize,
    height: usize,
}

impl SpatialAnalysis {
    pub fn new(bases: Vec<WaveletBasis>, depth: usize, width: usize, height: usize) -> Result<Self> {
        if bases.is_empty() {
            return Err(CoreError::InvalidArgument("no wavelet bases".into()));
        }
        if depth == 0 {
            return Err(CoreError::InvalidArgument("depth must be ≥ 1".into()));
        }
        if !width.is_power_of_two() || !height.is_power_of_two() {
            return Err(CoreError::InvalidArgument(format!(
                "wavelet grid must be power-of-two, got {width}x{height}"
            )));
        }
        if width >> depth == 0 || height >> depth == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "depth {depth} exceeds {width}x{height} grid"
            )));
        }
        Ok(SpatialAnalysis {
            bases,
            depth,
            width,
            height,
        })
    }

    /// The standard configuration: db1..db8 at full dyadic depth
    /// min(log2 W, log2 H) − 2, floored at 1.
    pub fn daubechies_union(width: usize, height: usize) -> Result<Self> {
        let bases = (1..=8).map(WaveletBasis::daubechies).collect();
        let depth = Self::default_depth(width, height)?;
        Self::new(bases, depth, width, height)
    }

    pub fn default_depth(width: usize, height: usize) -> Result<usize> {
        if !width.is_power_of_two() || !height.is_power_of_two() || width < 2 || height < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "wavelet grid must be power-of-two ≥ 2, got {width}x{height}"
            )));
        }
        let lg = width.trailing_zeros().min(height.trailing_zeros()) as usize;
        Ok(lg.saturating_sub(2).max(1))
    }

    pub fn basis_count(&self) -> usize {
        self.bases.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Coefficients per image: B·N (each basis critically sampled).
    pub fn coeff_len(&self) -> usize {
        self.basis_count() * self.width * self.height
    }

    /// ‖W_s‖² = B, exact (union of B orthonormal bases).
    pub fn norm_sq(&self) -> f64 {
        self.basis_count() as f64
    }

    fn check_img(&self, img: &[f64]) -> Result<()> {
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

    fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.coeff_len() {
            return Err(CoreError::DimensionMismatch(format!(
                "coefficient stack has {} values, expected {}",
                coeffs.len(),
                self.coeff_len()
            )));
        }
        Ok(())
    }

    /// W_s x: B stacked pyramid planes, each W×H.
    pub fn analyze_into(&self, img: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_img(img)?;
        self.check_coeffs(out)?;
        let n = self.width * self.height;
        let mut scratch = Scratch::new(self.width, self.height);
        for (b, basis) in self.bases.iter().enumerate() {
            let plane = &mut out[b * n..(b + 1) * n];
            plane.copy_from_slice(img);
            for level in 0..self.depth {
                let w = self.width >> level;
                let h = self.height >> level;
                forward_level(basis, plane, self.width, w, h, &mut scratch);
            }
        }
        Ok(())
    }

    pub fn analyze(&self, img: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.coeff_len()];
        self.analyze_into(img, &mut out)?;
        Ok(out)
    }

    /// W_s† u: sum of per-basis syntheses (adjoint of `analyze`).
    pub fn adjoint_into(&self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_coeffs(coeffs)?;
        self.check_img(out)?;
        let n = self.width * self.height;
        out.fill(0.0);
        let mut scratch = Scratch::new(self.width, self.height);
        let mut plane = vec![0.0; n];
        for (b, basis) in self.bases.iter().enumerate() {
            plane.copy_from_slice(&coeffs[b * n..(b + 1) * n]);
            for level in (0..self.depth).rev() {
                let w = self.width >> level;
                let h = self.height >> level;
                inverse_level(basis, &mut plane, self.width, w, h, &mut scratch);
            }
            for (o, &p) in out.iter_mut().zip(&plane) {
                *o += p;
            }
        }
        Ok(())
    }

    pub fn adjoint(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.width * self.height];
        self.adjoint_into(coeffs, &mut out)?;
        Ok(out)
    }
}

struct Scratch {
    row: Vec<f64>,
    row_out: Vec<f64>,
    col: Vec<f64>,
    col_out: Vec<f64>,
}

impl Scratch {
    fn new(width: usize, height: usize) -> Self {
        Scratch {
            row: vec![0.0; width],
            row_out: vec![0.0; width],
            col: vec![0.0; height],
            col_out: vec![0.0; height],
        }
    }
}

/// One separable 2-D level over the top-left w×h sub-rectangle of a plane
/// with row stride `stride`: rows then columns.
fn forward_level(basis: &WaveletBasis, plane: &mut [f64], stride: usize, w: usize, h: usize, s: &mut Scratch) {
    for y in 0..h {
        let row = &mut s.row[..w];
        row.copy_from_slice(&plane[y * stride..y * stride + w]);
        dwt_step(&basis.h, &basis.g, row, &mut s.row_out[..w]);
        plane[y * stride..y * stride + w].copy_from_slice(&s.row_out[..w]);
    }
    for x in 0..w {
        for y in 0..h {
            s.col[y] = plane[y * stride + x];
        }
        dwt_step(&basis.h, &basis.g, &s.col[..h], &mut s.col_out[..h]);
        for y in 0..h {
            plane[y * stride + x] = s.col_out[y];
        }
    }
}

fn inverse_level(basis: &WaveletBasis, plane: &mut [f64], stride: usize, w: usize, h: usize, s: &mut Scratch) {
    for x in 0..w {
        for y in 0..h {
            s.col[y] = plane[y * stride + x];
        }
        idwt_step(&basis.h, &basis.g, &s.col[..h], &mut s.col_out[..h]);
        for y in 0..h {
            plane[y * stride + x] = s.col_out[y];
        }
    }
    for y in 0..h {
        let row = &mut s.row[..w];
        row.copy_from_slice(&plane[y * stride..y * stride + w]);
        idwt_step(&basis.h, &basis.g, row, &mut s.row_out[..w]);
        plane[y * stride..y * stride + w].copy_from_slice(&s.row_out[..w]);
    }
}

/// Orthonormal DCT-II along the band axis, applied per pixel.
pub struct SpectralAnalysis {
    len: usize,
    // Row-major L×L analysis matrix; adjoint is the transpose.
    mat: Vec<f64>,
}

impl SpectralAnalysis {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(CoreError::InvalidArgument("spectral length 0".into()));
        }
        let l = len as f64;
        let mut mat = vec![0.0; len * len];
        for k in 0..len {
            let scale = if k == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
            for n in 0..len {
                mat[k * len + n] =
                    scale * (std::f64::consts::PI * (2.0 * n as f64 + 1.0) * k as f64 / (2.0 * l)).cos();
            }
        }
        Ok(SpectralAnalysis { len, mat })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// ‖W_λ‖² = 1, exact (orthonormal).
    pub fn norm_sq(&self) -> f64 {
        1.0
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len {
            return Err(CoreError::DimensionMismatch(format!(
                "spectrum has length {}, expected {}",
                v.len(),
                self.len
            )));
        }
        Ok(())
    }

    pub fn analyze_into(&self, spectrum: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(spectrum)?;
        self.check(out)?;
        for k in 0..self.len {
            let row = &self.mat[k * self.len..(k + 1) * self.len];
            out[k] = row.iter().zip(spectrum).map(|(m, s)| m * s).sum();
        }
        Ok(())
    }

    pub fn analyze(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len];
        self.analyze_into(spectrum, &mut out)?;
        Ok(out)
    }

    /// Transpose multiply; equals the inverse for an orthonormal transform.
    pub fn adjoint_into(&self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(coeffs)?;
        self.check(out)?;
        out.fill(0.0);
        for k in 0..self.len {
            let c = coeffs[k];
            if c == 0.0 {
                continue;
            }
            let row = &self.mat[k * self.len..(k + 1) * self.len];
            for (o, m) in out.iter_mut().zip(row) {
                *o += m * c;
            }
        }
        Ok(())
    }

    pub fn adjoint(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len];
        self.adjoint_into(coeffs, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn filters_are_orthonormal_cqf_pairs() {
        for p in 1..=8 {
            let basis = WaveletBasis::daubechies(p);
            let n = basis.h.len();
            assert_eq!(n, 2 * p);
            assert!((dot(&basis.h, &basis.h) - 1.0).abs() < 1e-14, "db{p} norm");
            assert!((basis.h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-14);
            for k in 1..p {
                let shifted = dot(&basis.h[..n - 2 * k], &basis.h[2 * k..]);
                assert!(shifted.abs() < 1e-14, "db{p} shift-{k} orthogonality");
            }
            // Detail filter annihilates constants (first vanishing moment).
            assert!(basis.g.iter().sum::<f64>().abs() < 1e-13, "db{p} detail DC");
        }
    }

    #[test]
    fn single_basis_round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [1usize, 3, 8] {
            let ws = SpatialAnalysis::new(vec![WaveletBasis::daubechies(p)], 2, 8, 8).unwrap();
            let img = random_vec(&mut rng, 64);
            let coeffs = ws.analyze(&img).unwrap();
            let back = ws.adjoint(&coeffs).unwrap();
            for (a, b) in back.iter().zip(&img) {
                assert!((a - b).abs() < 1e-10, "db{p} synthesis∘analysis ≠ I");
            }
        }
    }

    #[test]
    fn constant_image_haar_details_vanish() {
        let ws = SpatialAnalysis::new(vec![WaveletBasis::haar()], 2, 8, 8).unwrap();
        let img = vec![3.25; 64];
        let coeffs = ws.analyze(&img).unwrap();
        // Depth 2 on 8×8: the final approximation block is the top-left 2×2
        // sub-square; everything else is detail and must vanish.
        for y in 0..8 {
            for x in 0..8 {
                let v = coeffs[y * 8 + x];
                if x < 2 && y < 2 {
                    assert!((v - 4.0 * 3.25).abs() < 1e-12); // 2 levels × gain 2
                } else {
                    assert!(v.abs() < 1e-12, "detail at ({x},{y}) = {v}");
                }
            }
        }
    }

    #[test]
    fn haar_2x2_matches_explicit_matrix() {
        // Depth-1 Haar on 2×2 in row-major order [x00, x01, x10, x11] is
        // 0.5·[[1,1,1,1], [1,-1,1,-1], [1,1,-1,-1], [1,-1,-1,1]] (rows:
        // LL, LH, HL, HH in pyramid positions (0,0),(0,1),(1,0),(1,1)).
        let ws = SpatialAnalysis::new(vec![WaveletBasis::haar()], 1, 2, 2).unwrap();
        let x = [0.7, -1.3, 2.1, 0.4];
        let c = ws.analyze(&x).unwrap();
        let m = [
            [0.5, 0.5, 0.5, 0.5],
            [0.5, -0.5, 0.5, -0.5],
            [0.5, 0.5, -0.5, -0.5],
            [0.5, -0.5, -0.5, 0.5],
        ];
        for (row, &got) in m.iter().zip(&c) {
            let want = dot(row, &x);
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn union_parseval_and_tight_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ws = SpatialAnalysis::daubechies_union(16, 16).unwrap();
        assert_eq!(ws.basis_count(), 8);
        assert_eq!(ws.depth(), 2);
        let img = random_vec(&mut rng, 256);
        let coeffs = ws.analyze(&img).unwrap();
        // Parseval per union: ‖W_s x‖² = B·‖x‖².
        let lhs = dot(&coeffs, &coeffs);
        let rhs = 8.0 * dot(&img, &img);
        assert!((lhs - rhs).abs() / rhs < 1e-10);
        // Tight frame: W_s†W_s = B·I.
        let back = ws.adjoint(&coeffs).unwrap();
        let scale = img.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in back.iter().zip(&img) {
            assert!((a - 8.0 * b).abs() / (8.0 * scale) < 1e-10);
        }
    }

    #[test]
    fn spatial_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ws = SpatialAnalysis::daubechies_union(8, 8).unwrap();
        for _ in 0..20 {
            let x = random_vec(&mut rng, 64);
            let u = random_vec(&mut rng, ws.coeff_len());
            let lhs = dot(&ws.analyze(&x).unwrap(), &u);
            let rhs = dot(&x, &ws.adjoint(&u).unwrap());
            assert!((lhs - rhs).abs() / lhs.abs().max(rhs.abs()) < 1e-10);
        }
    }

    #[test]
    fn zero_coefficients_give_zero_image() {
        let ws = SpatialAnalysis::daubechies_union(8, 8).unwrap();
        let img = ws.adjoint(&vec![0.0; ws.coeff_len()]).unwrap();
        assert!(img.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(SpatialAnalysis::new(vec![WaveletBasis::haar()], 1, 6, 8).is_err());
        assert!(SpatialAnalysis::daubechies_union(12, 16).is_err());
        // Depth too deep for the grid.
        assert!(SpatialAnalysis::new(vec![WaveletBasis::haar()], 4, 8, 8).is_err());
    }

    #[test]
    fn norm_certificates_match_power_iteration() {
        // Power iteration on W†W estimates ‖W‖²; certificates are exact.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ws = SpatialAnalysis::daubechies_union(8, 8).unwrap();
        let mut z = random_vec(&mut rng, 64);
        let mut lambda = 0.0;
        for _ in 0..60 {
            let wz = ws.analyze(&z).unwrap();
            let mut wtz = ws.adjoint(&wz).unwrap();
            lambda = dot(&wtz, &z) / dot(&z, &z);
            let norm = dot(&wtz, &wtz).sqrt();
            for v in &mut wtz {
                *v /= norm;
            }
            z = wtz;
        }
        assert!((lambda - ws.norm_sq()).abs() < 1e-6);

        let wl = SpectralAnalysis::new(7).unwrap();
        let mut z = random_vec(&mut rng, 7);
        let mut lambda = 0.0;
        for _ in 0..60 {
            let wz = wl.analyze(&z).unwrap();
            let mut wtz = wl.adjoint(&wz).unwrap();
            lambda = dot(&wtz, &z) / dot(&z, &z);
            let norm = dot(&wtz, &wtz).sqrt();
            for v in &mut wtz {
                *v /= norm;
            }
            z = wtz;
        }
        assert!((lambda - wl.norm_sq()).abs() < 1e-6);
    }

    #[test]
    fn dct_constant_spectrum_hits_dc_only() {
        let l = 5;
        let wl = SpectralAnalysis::new(l).unwrap();
        let c = 2.5;
        let out = wl.analyze(&vec![c; l]).unwrap();
        assert!((out[0] - (l as f64).sqrt() * c).abs() < 1e-12);
        for &v in &out[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn dct_matches_explicit_matrix_oracle() {
        // L=4 against the DCT-II definition evaluated term by term.
        let l = 4;
        let wl = SpectralAnalysis::new(l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = random_vec(&mut rng, l);
        let got = wl.analyze(&x).unwrap();
        for k in 0..l {
            let scale = if k == 0 {
                (1.0 / l as f64).sqrt()
            } else {
                (2.0 / l as f64).sqrt()
            };
            let mut want = 0.0;
            for (n, &xn) in x.iter().enumerate() {
                want += xn
                    * (std::f64::consts::PI * (2.0 * n as f64 + 1.0) * k as f64 / (2.0 * l as f64))
                        .cos();
            }
            want *= scale;
            assert!((got[k] - want).abs() < 1e-12);
        }

        // L=3 transpose oracle: ⟨Wx, c⟩ = ⟨x, W†c⟩ and W†W = I.
        let l = 3;
        let wl = SpectralAnalysis::new(l).unwrap();
        let x = random_vec(&mut rng, l);
        let c = random_vec(&mut rng, l);
        let lhs = dot(&wl.analyze(&x).unwrap(), &c);
        let rhs = dot(&x, &wl.adjoint(&c).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn dct_round_trip_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for l in [1usize, 2, 3, 4, 7, 16] {
            let wl = SpectralAnalysis::new(l).unwrap();
            let x = random_vec(&mut rng, l);
            let c = wl.analyze(&x).unwrap();
            assert!((dot(&c, &c) - dot(&x, &x)).abs() < 1e-12, "norm preserved, L={l}");
            let back = wl.adjoint(&c).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
            let fwd = wl.analyze(&wl.adjoint(&c).unwrap()).unwrap();
            for (a, b) in fwd.iter().zip(&c) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let wl = SpectralAnalysis::new(4).unwrap();
        assert!(wl.analyze(&[1.0; 3]).is_err());
        assert!(wl.adjoint(&[1.0; 5]).is_err());
        let ws = SpatialAnalysis::daubechies_union(8, 8).unwrap();
        assert!(ws.analyze(&[1.0; 63]).is_err());
        assert!(ws.adjoint(&[1.0; 100]).is_err());
    }
}
