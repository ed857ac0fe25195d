//! Evaluation metrics: empirical 1D Wasserstein distance, isotropic power
//! spectra with log-MAE comparison, and magnetogram-style summary statistics
//! (unsigned flux, horizontal gradients) with NMAE aggregation.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A 2D scalar field with a uniform pixel area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pixel_area: f64,
}

impl Field2D {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, pixel_area: f64) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Domain("field needs at least 2x2 pixels".into()));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} field",
                values.len()
            )));
        }
        if !(pixel_area > 0.0) {
            return Err(Error::Domain("pixel area must be > 0".into()));
        }
        Ok(Self {
            rows,
            cols,
            values,
            pixel_area,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_area
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

/// Three co-registered field components.
#[derive(Debug, Clone)]
pub struct VectorField2D {
    pub bx: Field2D,
    pub by: Field2D,
    pub bz: Field2D,
}

impl VectorField2D {
    pub fn new(bx: Field2D, by: Field2D, bz: Field2D) -> Result<Self> {
        if bx.rows != by.rows || bx.rows != bz.rows || bx.cols != by.cols || bx.cols != bz.cols {
            return Err(Error::DimensionMismatch(
                "vector field components differ in shape".into(),
            ));
        }
        Ok(Self { bx, by, bz })
    }
}

/// Mean squared Fourier magnitude per radial wavenumber bin.
///
/// Power is normalized as `|F_k|^2 / N^2` (N = number of samples), so summing
/// `power * count` over all bins returns `sum(values^2) / N` exactly
/// (Parseval). Bins cover every radius present in the transform; comparisons
/// against another spectrum usually truncate to the common Nyquist radius
/// first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumProfile {
    power: Vec<f64>,
    counts: Vec<u64>,
}

impl SpectrumProfile {
    pub fn bins(&self) -> usize {
        self.power.len()
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Keep bins `0..=max_bin` (Nyquist truncation before comparison).
    pub fn truncated(&self, max_bin: usize) -> SpectrumProfile {
        let n = (max_bin + 1).min(self.power.len());
        SpectrumProfile {
            power: self.power[..n].to_vec(),
            counts: self.counts[..n].to_vec(),
        }
    }
}

/// Empirical 1D Wasserstein-1 distance between two sample sets.
///
/// Equal sizes reduce to the mean absolute difference of sorted samples;
/// unequal sizes integrate the gap between the two empirical CDFs over the
/// merged support (equivalently, the quantile coupling).
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("wasserstein distance needs non-empty samples".into()));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);

    if xa.len() == xb.len() {
        let n = xa.len() as f64;
        return Ok(xa
            .iter()
            .zip(&xb)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / n);
    }

    let mut support: Vec<f64> = Vec::with_capacity(xa.len() + xb.len());
    support.extend_from_slice(&xa);
    support.extend_from_slice(&xb);
    support.sort_unstable_by(f64::total_cmp);
    support.dedup();

    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut w = 0.0;
    for seg in support.windows(2) {
        while ia < xa.len() && xa[ia] <= seg[0] {
            ia += 1;
        }
        while ib < xb.len() && xb[ib] <= seg[0] {
            ib += 1;
        }
        w += (ia as f64 / na - ib as f64 / nb).abs() * (seg[1] - seg[0]);
    }
    Ok(w)
}

fn fft_2d(field: &Field2D) -> Vec<Complex<f64>> {
    let (rows, cols) = (field.rows, field.cols);
    let mut data: Vec<Complex<f64>> = field
        .values
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::new();

    let row_fft = planner.plan_fft_forward(cols);
    for r in 0..rows {
        row_fft.process(&mut data[r * cols..(r + 1) * cols]);
    }

    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
    data
}

/// Signed wavenumber of DFT index `i` for length `n`.
fn signed_wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Radially averaged power spectrum of a 2D field.
///
/// Squared transform magnitudes are binned by the rounded radial wavenumber
/// `round(sqrt(kx^2 + ky^2))` and averaged per bin; bin 0 is the DC
/// component.
pub fn isotropic_spectrum(field: &Field2D) -> SpectrumProfile {
    let (rows, cols) = (field.rows, field.cols);
    let data = fft_2d(field);
    let n = (rows * cols) as f64;

    let max_radius = (((rows / 2) as f64).hypot((cols / 2) as f64)).round() as usize;
    let mut power = vec![0.0; max_radius + 1];
    let mut counts = vec![0u64; max_radius + 1];
    for r in 0..rows {
        let ky = signed_wavenumber(r, rows) as f64;
        for c in 0..cols {
            let kx = signed_wavenumber(c, cols) as f64;
            let bin = kx.hypot(ky).round() as usize;
            let p = data[r * cols + c].norm_sqr() / (n * n);
            power[bin] += p;
            counts[bin] += 1;
        }
    }
    for (p, &c) in power.iter_mut().zip(&counts) {
        if c > 0 {
            *p /= c as f64;
        }
    }
    SpectrumProfile { power, counts }
}

/// Power spectrum of a 1D series, binned by absolute frequency (the 1D case
/// of the radial binning: conjugate frequencies `k` and `n - k` average into
/// bin `k`).
pub fn power_spectrum_1d(series: &[f64]) -> Result<SpectrumProfile> {
    if series.len() < 2 {
        return Err(Error::Domain("spectrum needs at least 2 samples".into()));
    }
    let n = series.len();
    let mut data: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut data);

    let nf = n as f64;
    let mut power = vec![0.0; n / 2 + 1];
    let mut counts = vec![0u64; n / 2 + 1];
    for (i, v) in data.iter().enumerate() {
        let bin = signed_wavenumber(i, n).unsigned_abs() as usize;
        power[bin] += v.norm_sqr() / (nf * nf);
        counts[bin] += 1;
    }
    for (p, &c) in power.iter_mut().zip(&counts) {
        if c > 0 {
            *p /= c as f64;
        }
    }
    Ok(SpectrumProfile { power, counts })
}

/// Floor applied under the log when comparing spectra.
pub const SPECTRUM_LOG_FLOOR: f64 = 1e-12;

/// Mean absolute error between two spectra on log10 power.
///
/// The log scale keeps the strongly peaked low wavenumbers of power-law
/// spectra from dominating the average; the floor guards empty bins.
pub fn spectrum_mae(a: &SpectrumProfile, b: &SpectrumProfile) -> Result<f64> {
    if a.bins() != b.bins() {
        return Err(Error::DimensionMismatch(format!(
            "spectra have {} vs {} bins",
            a.bins(),
            b.bins()
        )));
    }
    let n = a.bins() as f64;
    Ok(a.power
        .iter()
        .zip(&b.power)
        .map(|(&pa, &pb)| {
            ((pa + SPECTRUM_LOG_FLOOR).log10() - (pb + SPECTRUM_LOG_FLOOR).log10()).abs()
        })
        .sum::<f64>()
        / n)
}

/// Total unsigned flux: `sum |B_z| * dA`.
pub fn usflux(bz: &Field2D) -> f64 {
    bz.values.iter().map(|v| v.abs()).sum::<f64>() * bz.pixel_area
}

/// (d/dx, d/dy) of a field: central differences in the interior, one-sided
/// first-order at the borders, unit pixel spacing.
fn finite_differences(rows: usize, cols: usize, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; rows * cols];
    let mut gy = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            gx[i] = if c == 0 {
                v[i + 1] - v[i]
            } else if c == cols - 1 {
                v[i] - v[i - 1]
            } else {
                0.5 * (v[i + 1] - v[i - 1])
            };
            gy[i] = if r == 0 {
                v[i + cols] - v[i]
            } else if r == rows - 1 {
                v[i] - v[i - cols]
            } else {
                0.5 * (v[i + cols] - v[i - cols])
            };
        }
    }
    (gx, gy)
}

fn mean_gradient_magnitude(rows: usize, cols: usize, v: &[f64]) -> f64 {
    let (gx, gy) = finite_differences(rows, cols, v);
    gx.iter()
        .zip(&gy)
        .map(|(&x, &y)| x.hypot(y))
        .sum::<f64>()
        / (rows * cols) as f64
}

/// Mean horizontal gradient of the total field strength
/// `B = sqrt(Bx^2 + By^2 + Bz^2)`.
pub fn mean_gbt(v: &VectorField2D) -> f64 {
    let total: Vec<f64> = v
        .bx
        .values
        .iter()
        .zip(&v.by.values)
        .zip(&v.bz.values)
        .map(|((&x, &y), &z)| (x * x + y * y + z * z).sqrt())
        .collect();
    mean_gradient_magnitude(v.bx.rows, v.bx.cols, &total)
}

/// Mean horizontal gradient of the vertical field component.
pub fn mean_gbz(bz: &Field2D) -> f64 {
    mean_gradient_magnitude(bz.rows, bz.cols, &bz.values)
}

/// Normalized mean absolute error: each term is normalized by its own
/// observed value.
pub fn nmae(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() {
        return Err(Error::DimensionMismatch(format!(
            "nmae over {} predictions vs {} observations",
            pred.len(),
            obs.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Domain("nmae needs at least one pair".into()));
    }
    let mut acc = 0.0;
    for (&p, &o) in pred.iter().zip(obs) {
        if o == 0.0 {
            return Err(Error::Domain("nmae undefined for a zero observation".into()));
        }
        acc += (p - o).abs() / o.abs();
    }
    Ok(acc / pred.len() as f64)
}

/// A future-step range `lo..=hi` used to pool samples by prediction distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonBucket {
    pub lo: i64,
    pub hi: i64,
}

impl HorizonBucket {
    pub fn contains(&self, t: i64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.lo, self.hi)
    }
}

/// The near/mid/far bucket convention, far end stretched to the rollout
/// length.
pub fn default_buckets(total: i64) -> Vec<HorizonBucket> {
    if total > 16 {
        vec![
            HorizonBucket { lo: 1, hi: 4 },
            HorizonBucket { lo: 4, hi: 16 },
            HorizonBucket { lo: 16, hi: total },
        ]
    } else if total > 4 {
        vec![
            HorizonBucket { lo: 1, hi: 4 },
            HorizonBucket { lo: 4, hi: total },
        ]
    } else {
        vec![HorizonBucket { lo: 1, hi: total }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_test_field2d, FieldKind};

    fn constant_field(v: f64, size: usize) -> Field2D {
        generate_test_field2d(FieldKind::Constant { value: v }, size).unwrap()
    }

    #[test]
    fn wasserstein_identities() {
        let a = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);

        let zeros = vec![0.0; 5];
        let cs = vec![-1.25; 7];
        assert!((wasserstein_1d(&zeros, &cs).unwrap() - 1.25).abs() < 1e-12);

        let shifted: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert!((wasserstein_1d(&a, &shifted).unwrap() - 0.7).abs() < 1e-12);

        assert!(wasserstein_1d(&[], &a).is_err());
    }

    #[test]
    fn wasserstein_unequal_sizes() {
        // By hand from the quantile functions: W1({0,1}, {0,1/2,1}) = 1/6.
        let w = wasserstein_1d(&[0.0, 1.0], &[0.0, 0.5, 1.0]).unwrap();
        assert!((w - 1.0 / 6.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn spectrum_of_constant_is_dc_only() {
        let f = constant_field(3.0, 16);
        let s = isotropic_spectrum(&f);
        // DC bin holds the squared mean; radius 0 has a single element.
        assert_eq!(s.counts()[0], 1);
        assert!((s.power()[0] - 9.0).abs() < 1e-10);
        let off: f64 = s.power()[1..].iter().sum();
        assert!(off < 1e-12);
    }

    #[test]
    fn spectrum_of_tone_concentrates_in_its_bin() {
        let f = generate_test_field2d(
            FieldKind::SinusoidX {
                wavenumber: 5,
                amplitude: 2.0,
            },
            32,
        )
        .unwrap();
        let s = isotropic_spectrum(&f);
        let leak: f64 = s
            .power()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 5)
            .map(|(_, &p)| p)
            .sum();
        assert!(leak < 1e-10, "leak {leak}");
        assert!(s.power()[5] > 0.0);
    }

    #[test]
    fn parseval_2d() {
        let f = generate_test_field2d(FieldKind::GaussianNoise { std: 1.3, seed: 4 }, 24).unwrap();
        let s = isotropic_spectrum(&f);
        let lhs: f64 = s
            .power()
            .iter()
            .zip(s.counts())
            .map(|(&p, &c)| p * c as f64)
            .sum();
        let rhs = f.values().iter().map(|v| v * v).sum::<f64>() / (24.0 * 24.0);
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn parseval_1d_and_tone() {
        let n = 64;
        let series: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 4.0 * t as f64 / n as f64).sin())
            .collect();
        let s = power_spectrum_1d(&series).unwrap();
        let nonzero: Vec<usize> = s
            .power()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 1e-12)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero, vec![4]);

        let lhs: f64 = s
            .power()
            .iter()
            .zip(s.counts())
            .map(|(&p, &c)| p * c as f64)
            .sum();
        let rhs = series.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((lhs - rhs).abs() < 1e-10);

        let constant = vec![2.0; 10];
        let s = power_spectrum_1d(&constant).unwrap();
        assert!(s.power()[1..].iter().all(|&p| p < 1e-14));
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        // Averaged over draws, every non-DC bin estimates the variance / n.
        let n = 256;
        let draws = 1000;
        let mut mean_power = vec![0.0; n / 2 + 1];
        for d in 0..draws {
            let mut rng = crate::rng::rng_stream(99, d);
            let series: Vec<f64> = (0..n).map(|_| crate::rng::standard_normal(&mut rng)).collect();
            let s = power_spectrum_1d(&series).unwrap();
            for (m, &p) in mean_power.iter_mut().zip(s.power()) {
                *m += p / draws as f64;
            }
        }
        // E |F_k|^2 / n^2 = var / n for k != 0 (counts fold conjugates).
        let expect = 1.0 / n as f64;
        for (k, &p) in mean_power.iter().enumerate().skip(1).take(n / 2 - 1) {
            assert!(
                (p - expect).abs() < 0.1 * expect,
                "bin {k}: {p} vs {expect}"
            );
        }
    }

    #[test]
    fn spectrum_mae_cases() {
        let f = generate_test_field2d(FieldKind::GaussianNoise { std: 1.0, seed: 8 }, 16).unwrap();
        let s = isotropic_spectrum(&f);
        assert_eq!(spectrum_mae(&s, &s).unwrap(), 0.0);

        let decade = SpectrumProfile {
            power: s.power().iter().map(|p| p * 10.0).collect(),
            counts: s.counts().to_vec(),
        };
        assert!((spectrum_mae(&s, &decade).unwrap() - 1.0).abs() < 1e-9);

        // One of 8 bins scaled by 10: MAE = 1/8.
        let a = SpectrumProfile {
            power: vec![1.0; 8],
            counts: vec![1; 8],
        };
        let mut b = a.clone();
        b.power[3] = 10.0;
        assert!((spectrum_mae(&a, &b).unwrap() - 0.125).abs() < 1e-9);

        assert!(spectrum_mae(&a, &s).is_err());
    }

    #[test]
    fn usflux_cases() {
        let f = constant_field(-2.0, 8);
        assert!((usflux(&f) - 2.0 * 64.0).abs() < 1e-12);
        assert_eq!(usflux(&constant_field(0.0, 8)), 0.0);

        // Checkerboard of +/- c has the same unsigned flux as constant c.
        let mut vals = vec![0.0; 64];
        for r in 0..8 {
            for c in 0..8 {
                vals[r * 8 + c] = if (r + c) % 2 == 0 { 2.0 } else { -2.0 };
            }
        }
        let cb = Field2D::new(8, 8, vals, 1.0).unwrap();
        assert!((usflux(&cb) - 2.0 * 64.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_metrics_on_closed_forms() {
        let size = 12;
        let zero = constant_field(0.0, size);
        assert_eq!(mean_gbz(&constant_field(5.0, size)), 0.0);

        // bz = a*x: the stencil is exact for linear fields, borders included.
        let a = 0.75;
        let ramp: Vec<f64> = (0..size * size).map(|i| a * (i % size) as f64).collect();
        let ramp = Field2D::new(size, size, ramp, 1.0).unwrap();
        assert!((mean_gbz(&ramp) - a).abs() < 1e-12);

        // bz = a*x + b*y: gradient magnitude sqrt(a^2 + b^2) everywhere.
        let (ax, by) = (0.3, -0.4);
        let plane: Vec<f64> = (0..size * size)
            .map(|i| ax * (i % size) as f64 + by * (i / size) as f64)
            .collect();
        let plane = Field2D::new(size, size, plane, 1.0).unwrap();
        assert!((mean_gbz(&plane) - ax.hypot(by)).abs() < 1e-12);

        // Doubling the field doubles the gradient metric.
        let doubled: Vec<f64> = plane.values().iter().map(|v| 2.0 * v).collect();
        let doubled = Field2D::new(size, size, doubled, 1.0).unwrap();
        assert!((mean_gbz(&doubled) - 2.0 * mean_gbz(&plane)).abs() < 1e-12);

        let constant_vec = VectorField2D::new(
            constant_field(1.0, size),
            constant_field(-2.0, size),
            constant_field(2.0, size),
        )
        .unwrap();
        assert_eq!(mean_gbt(&constant_vec), 0.0);

        // Components rotate but |B| stays constant: total-field gradient 0.
        let angle: Vec<f64> = (0..size * size).map(|i| 0.1 * i as f64).collect();
        let bx: Vec<f64> = angle.iter().map(|t| 3.0 * t.cos()).collect();
        let byv: Vec<f64> = angle.iter().map(|t| 3.0 * t.sin()).collect();
        let rot = VectorField2D::new(
            Field2D::new(size, size, bx, 1.0).unwrap(),
            Field2D::new(size, size, byv, 1.0).unwrap(),
            zero,
        )
        .unwrap();
        assert!(mean_gbt(&rot) < 1e-12);

        // Linear ramp in bz only reproduces the slope through mean_gbt too.
        let ramp_vec = VectorField2D::new(
            constant_field(0.0, size),
            constant_field(0.0, size),
            ramp,
        )
        .unwrap();
        assert!((mean_gbt(&ramp_vec) - a).abs() < 1e-12);
    }

    #[test]
    fn nmae_cases() {
        let obs = [1.0, 8.0];
        assert_eq!(nmae(&obs, &obs).unwrap(), 0.0);
        let scaled: Vec<f64> = obs.iter().map(|v| v * 1.1).collect();
        assert!((nmae(&scaled, &obs).unwrap() - 0.1).abs() < 1e-12);
        // (|2-1|/1 + |4-8|/8) / 2 = 0.75
        assert!((nmae(&[2.0, 4.0], &obs).unwrap() - 0.75).abs() < 1e-12);
        assert!(nmae(&[1.0], &[0.0]).is_err());
        assert!(nmae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bucket_defaults() {
        let b = default_buckets(36);
        assert_eq!(b.len(), 3);
        assert_eq!(b[2].label(), "16:36");
        assert!(b[1].contains(16) && b[2].contains(16));
        assert_eq!(default_buckets(12).len(), 2);
        assert_eq!(default_buckets(3).len(), 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn samples() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-50.0f64..50.0, 1..40)
        }

        proptest! {
            #[test]
            fn w1_metric_axioms(a in samples(), b in samples(), c in samples()) {
                let ab = wasserstein_1d(&a, &b).unwrap();
                let ba = wasserstein_1d(&b, &a).unwrap();
                prop_assert!(ab >= 0.0);
                prop_assert!((ab - ba).abs() < 1e-9);
                prop_assert!(wasserstein_1d(&a, &a).unwrap() < 1e-12);
                let ac = wasserstein_1d(&a, &c).unwrap();
                let cb = wasserstein_1d(&c, &b).unwrap();
                prop_assert!(ab <= ac + cb + 1e-9);
            }

            #[test]
            fn gradient_metrics_nonnegative(seed in 0u64..500) {
                let f = generate_test_field2d(FieldKind::GaussianNoise { std: 2.0, seed }, 8).unwrap();
                prop_assert!(mean_gbz(&f) >= 0.0);
            }
        }
    }
}
