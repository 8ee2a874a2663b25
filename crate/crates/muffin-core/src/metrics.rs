//! Ground-truth-aware quality metrics and the run-trace CSV.
//!
//! true WMSE(X, X⋆) = (1/LN) Σ_ℓ ‖H_ℓ(x_ℓ − x_ℓ⋆)‖² — the quantity the
//! risk estimate predicts, blind to errors in the null space of every H_ℓ.
//! SNR(X, X⋆) = 10·log₁₀(‖X⋆‖² / ‖X − X⋆‖²).
//!
//! Values are kept linear internally; dB conversion happens at reporting
//! time only, and non-positive linear values render as blank CSV cells.

use std::io::Write;

use crate::cube::ImageCube;
use crate::error::{CoreError, Result};
use crate::operators::PsfSet;

/// (1/LN) Σ_ℓ ‖H_ℓ(x_ℓ − x⋆_ℓ)‖², reduced in ascending band order.
pub fn true_wmse(x: &ImageCube, truth: &ImageCube, psfs: &PsfSet) -> Result<f64> {
    if x.width() != truth.width() || x.height() != truth.height() || x.bands() != truth.bands() {
        return Err(CoreError::DimensionMismatch(
            "cube and truth dims differ".into(),
        ));
    }
    if psfs.width() != x.width() || psfs.height() != x.height() || psfs.bands() != x.bands() {
        return Err(CoreError::DimensionMismatch("psf set dims differ".into()));
    }
    let n = x.pixels();
    let l = x.bands();
    let mut total = 0.0;
    let mut diff = vec![0.0; n];
    for band in 0..l {
        for ((d, &a), &b) in diff.iter_mut().zip(x.plane(band)).zip(truth.plane(band)) {
            *d = a - b;
        }
        let hd = psfs.band(band).apply(&diff)?;
        total += hd.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total / (l as f64 * n as f64))
}

/// 10·log₁₀(‖X⋆‖²/‖X−X⋆‖²); +∞ when the error energy is exactly zero.
pub fn snr_db(x: &ImageCube, truth: &ImageCube) -> Result<f64> {
    if x.width() != truth.width() || x.height() != truth.height() || x.bands() != truth.bands() {
        return Err(CoreError::DimensionMismatch(
            "cube and truth dims differ".into(),
        ));
    }
    let signal: f64 = truth.data().iter().map(|v| v * v).sum();
    let error: f64 = x
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if error == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / error).log10())
}

/// dB of a linear power value; `None` for values that have no dB
/// representation (≤ 0, NaN).
pub fn db(linear: f64) -> Option<f64> {
    (linear > 0.0 && linear.is_finite()).then(|| 10.0 * linear.log10())
}

/// One row of the run trace. dB fields are `None` when unavailable (no
/// ground truth, or a non-positive linear value).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iter: u64,
    pub phase: u8,
    pub mu_s: f64,
    pub mu_lambda: f64,
    pub wmse_db: Option<f64>,
    pub wmse_hat_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub cost: f64,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "iter,phase,mu_s,mu_lambda,wmse_db,wmse_hat_db,snr_db,cost,seconds";

/// CSV emitter for the run trace; enforces strictly increasing iterations.
pub struct MetricsWriter<W: Write> {
    writer: csv::Writer<W>,
    last_iter: Option<u64>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(sink: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(METRICS_HEADER.split(','))?;
        Ok(MetricsWriter {
            writer,
            last_iter: None,
        })
    }

    pub fn write_row(&mut self, row: &MetricsRow) -> Result<()> {
        if let Some(last) = self.last_iter {
            if row.iter <= last {
                return Err(CoreError::InvalidArgument(format!(
                    "metrics rows must be strictly increasing in iteration ({} after {last})",
                    row.iter
                )));
            }
        }
        self.last_iter = Some(row.iter);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        self.writer.write_record([
            row.iter.to_string(),
            row.phase.to_string(),
            row.mu_s.to_string(),
            row.mu_lambda.to_string(),
            opt(row.wmse_db),
            opt(row.wmse_hat_db),
            opt(row.snr_db),
            row.cost.to_string(),
            row.seconds.to_string(),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

impl From<csv::Error> for CoreError {
    fn from(e: csv::Error) -> Self {
        CoreError::Io(std::io::Error::other(e))
    }
}

/// Parse a run-trace CSV (as written by `MetricsWriter`) back into rows.
pub fn read_metrics(data: &str) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(data.as_bytes());
    {
        let headers = reader.headers()?;
        let joined = headers.iter().collect::<Vec<_>>().join(",");
        if joined != METRICS_HEADER {
            return Err(CoreError::MalformedHeader(format!(
                "unexpected metrics header: {joined}"
            )));
        }
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .map_err(|e| CoreError::MalformedHeader(format!("bad float {s:?}: {e}")))
    };
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| CoreError::MalformedHeader(format!("bad float {s:?}: {e}")))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        if r.len() != 9 {
            return Err(CoreError::MalformedHeader(format!(
                "expected 9 fields, got {}",
                r.len()
            )));
        }
        rows.push(MetricsRow {
            iter: r[0]
                .parse()
                .map_err(|e| CoreError::MalformedHeader(format!("bad iter: {e}")))?,
            phase: r[1]
                .parse()
                .map_err(|e| CoreError::MalformedHeader(format!("bad phase: {e}")))?,
            mu_s: parse(&r[2])?,
            mu_lambda: parse(&r[3])?,
            wmse_db: parse_opt(&r[4])?,
            wmse_hat_db: parse_opt(&r[5])?,
            snr_db: parse_opt(&r[6])?,
            cost: parse(&r[7])?,
            seconds: parse(&r[8])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cube(rng: &mut ChaCha8Rng, w: usize, h: usize, l: usize) -> ImageCube {
        let data: Vec<f64> = (0..w * h * l).map(|_| rng.random_range(-1.0..1.0)).collect();
        ImageCube::from_data(w, h, l, (0..l).map(|i| 1.0 + i as f64).collect(), data).unwrap()
    }

    fn delta_psfs(w: usize, h: usize, l: usize) -> PsfSet {
        let mut cube = ImageCube::zeros(w, h, l, (0..l).map(|i| 1.0 + i as f64).collect()).unwrap();
        for band in 0..l {
            cube.plane_mut(band)[0] = 1.0;
        }
        PsfSet::from_cube(&cube).unwrap()
    }

    #[test]
    fn wmse_zero_at_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_cube(&mut rng, 8, 8, 2);
        let psfs = delta_psfs(8, 8, 2);
        assert_eq!(true_wmse(&x, &x, &psfs).unwrap(), 0.0);
    }

    #[test]
    fn wmse_blind_to_psf_null_space() {
        // All-ones PSF: H averages, so any zero-mean difference vanishes.
        let (w, h) = (4, 4);
        let n = w * h;
        let mut psf_cube = ImageCube::zeros(w, h, 1, vec![1.0]).unwrap();
        psf_cube.plane_mut(0).fill(1.0 / n as f64);
        let psfs = PsfSet::from_cube(&psf_cube).unwrap();

        let truth = ImageCube::zeros(w, h, 1, vec![1.0]).unwrap();
        let mut x = ImageCube::zeros(w, h, 1, vec![1.0]).unwrap();
        for (i, v) in x.plane_mut(0).iter_mut().enumerate() {
            *v = if i % 2 == 0 { 1.0 } else { -1.0 }; // zero mean
        }
        let wmse = true_wmse(&x, &truth, &psfs).unwrap();
        assert!(wmse < 1e-25, "wmse {wmse}");
        assert_ne!(x.data(), truth.data());
    }

    #[test]
    fn wmse_matches_direct_convolution_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (w, h, l) = (6, 4, 2);
        let x = random_cube(&mut rng, w, h, l);
        let truth = random_cube(&mut rng, w, h, l);
        let psf_cube = random_cube(&mut rng, w, h, l);
        let psfs = PsfSet::from_cube(&psf_cube).unwrap();

        let got = true_wmse(&x, &truth, &psfs).unwrap();

        // O(N²) direct circular convolution.
        let mut want = 0.0;
        for band in 0..l {
            let psf = psf_cube.plane(band);
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = 0.0;
                    for ky in 0..h {
                        for kx in 0..w {
                            let sx = (ox + w - kx) % w;
                            let sy = (oy + h - ky) % h;
                            let d = x.plane(band)[sy * w + sx] - truth.plane(band)[sy * w + sx];
                            acc += psf[ky * w + kx] * d;
                        }
                    }
                    want += acc * acc;
                }
            }
        }
        want /= (l * w * h) as f64;
        assert!((got - want).abs() / want < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn snr_basics_and_log_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = random_cube(&mut rng, 8, 8, 2);

        // Error energy equal to signal energy → 0 dB: x = 2·x⋆.
        let mut x = truth.clone();
        for v in x.data_mut() {
            *v *= 2.0;
        }
        assert!(snr_db(&x, &truth).unwrap().abs() < 1e-12);

        // Shrinking the error by 10 in amplitude adds exactly 20 dB.
        let err = random_cube(&mut rng, 8, 8, 2);
        let mut x1 = truth.clone();
        let mut x2 = truth.clone();
        for ((a, b), e) in x1.data_mut().iter_mut().zip(x2.data_mut()).zip(err.data()) {
            *a += e;
            *b += e / 10.0;
        }
        let s1 = snr_db(&x1, &truth).unwrap();
        let s2 = snr_db(&x2, &truth).unwrap();
        assert!((s2 - s1 - 20.0).abs() < 1e-10, "{s1} vs {s2}");

        // Exact reconstruction → +∞ sentinel.
        assert!(snr_db(&truth, &truth).unwrap().is_infinite());
    }

    #[test]
    fn snr_matches_direct_oracle_and_scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth = random_cube(&mut rng, 8, 8, 3);
        let x = random_cube(&mut rng, 8, 8, 3);
        let signal: f64 = truth.data().iter().map(|v| v * v).sum();
        let error: f64 = x
            .data()
            .iter()
            .zip(truth.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let want = 10.0 * (signal / error).log10();
        assert!((snr_db(&x, &truth).unwrap() - want).abs() < 1e-12);

        let mut xs = x.clone();
        let mut ts = truth.clone();
        for v in xs.data_mut() {
            *v *= 3.5;
        }
        for v in ts.data_mut() {
            *v *= 3.5;
        }
        let a = snr_db(&x, &truth).unwrap();
        let b = snr_db(&xs, &ts).unwrap();
        assert!((a - b).abs() < 1e-10, "scaling changed SNR: {a} vs {b}");
    }

    #[test]
    fn db_conversion_handles_nonpositive() {
        assert_eq!(db(100.0), Some(20.0));
        assert_eq!(db(0.0), None);
        assert_eq!(db(-3.0), None);
        assert_eq!(db(f64::NAN), None);
        assert_eq!(db(f64::INFINITY), None);
    }

    #[test]
    fn csv_surface_is_exact() {
        let mut buf = Vec::new();
        {
            let mut writer = MetricsWriter::new(&mut buf).unwrap();
            writer
                .write_row(&MetricsRow {
                    iter: 1,
                    phase: 1,
                    mu_s: 0.5,
                    mu_lambda: 0.0,
                    wmse_db: Some(-3.25),
                    wmse_hat_db: Some(-3.5),
                    snr_db: Some(12.5),
                    cost: 42.0,
                    seconds: 0.125,
                })
                .unwrap();
            writer
                .write_row(&MetricsRow {
                    iter: 2,
                    phase: 3,
                    mu_s: 0.5,
                    mu_lambda: 1.25,
                    wmse_db: None,
                    wmse_hat_db: None,
                    snr_db: None,
                    cost: 41.5,
                    seconds: 0.25,
                })
                .unwrap();
            writer.flush().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter,phase,mu_s,mu_lambda,wmse_db,wmse_hat_db,snr_db,cost,seconds\n\
             1,1,0.5,0,-3.25,-3.5,12.5,42,0.125\n\
             2,3,0.5,1.25,,,,41.5,0.25\n"
        );

        let rows = read_metrics(&text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].iter, 1);
        assert_eq!(rows[0].wmse_db, Some(-3.25));
        assert_eq!(rows[1].wmse_hat_db, None);
        assert_eq!(rows[1].mu_lambda, 1.25);
    }

    #[test]
    fn rows_must_increase() {
        let mut buf = Vec::new();
        let mut writer = MetricsWriter::new(&mut buf).unwrap();
        let row = MetricsRow {
            iter: 5,
            phase: 1,
            mu_s: 0.0,
            mu_lambda: 0.0,
            wmse_db: None,
            wmse_hat_db: None,
            snr_db: None,
            cost: 0.0,
            seconds: 0.0,
        };
        writer.write_row(&row).unwrap();
        assert!(writer.write_row(&row).is_err());
        let less = MetricsRow { iter: 4, ..row };
        assert!(writer.write_row(&less).is_err());
        let more = MetricsRow { iter: 6, ..row };
        writer.write_row(&more).unwrap();
    }

    #[test]
    fn dimension_mismatches_are_errors() {
        let a = ImageCube::zeros(4, 4, 2, vec![1.0, 2.0]).unwrap();
        let b = ImageCube::zeros(4, 4, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(snr_db(&a, &b).is_err());
        let psfs = delta_psfs(4, 4, 2);
        assert!(true_wmse(&a, &b, &psfs).is_err());
        let c = ImageCube::zeros(8, 8, 2, vec![1.0, 2.0]).unwrap();
        assert!(true_wmse(&c, &c, &psfs).is_err());
    }
}
