//! Synthetic data: noisy sinusoids for the 1D experiment and small 2D fields
//! with analytically known statistics for metric tests.
//!
//! A sinusoid trajectory is `x_t = A sin(2 pi t / period + phase) +
//! noise_std * z_t` with i.i.d. standard normal `z_t`. With the default
//! parameters (period 60, amplitude 1, noise 0.5) the trend moves ~0.1 per
//! step — well under the noise floor, so the slowly varying component is not
//! recoverable from a handful of adjacent samples. Datasets draw a fresh
//! uniform phase per trajectory so models see every trend position.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::exec::{map_indexed, Parallelism};
use crate::metrics::Field2D;
use crate::rng::{self, rng_stream};
use crate::{Error, Result};

/// Parameters of one sinusoid-plus-noise trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidConfig {
    pub length: usize,
    /// Trend period in steps, > 0.
    pub period: f64,
    pub amplitude: f64,
    /// Trend phase in radians.
    pub phase: f64,
    /// Observation noise standard deviation, >= 0.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SinusoidConfig {
    fn default() -> Self {
        // Negative trend peak at t = 30: sin(2 pi t / 60 + pi/2) = cos(2 pi t / 60).
        Self {
            length: 120,
            period: 60.0,
            amplitude: 1.0,
            phase: PI / 2.0,
            noise_std: 0.5,
            seed: 0,
        }
    }
}

impl SinusoidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length < 1 {
            return Err(Error::Domain("trajectory length must be >= 1".into()));
        }
        if !(self.period > 0.0) {
            return Err(Error::Domain("period must be > 0".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Domain("noise std must be >= 0".into()));
        }
        Ok(())
    }

    /// Noise-free trend at step `t`.
    pub fn trend(&self, t: usize) -> f64 {
        self.amplitude * (2.0 * PI * t as f64 / self.period + self.phase).sin()
    }
}

/// A time-indexed value series split into observed past (`<= present_index`)
/// and future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub present_index: usize,
}

impl Trajectory {
    pub fn new(values: Vec<f64>, present_index: usize) -> Result<Self> {
        if values.is_empty() || present_index >= values.len() {
            return Err(Error::Domain(format!(
                "present index {present_index} outside trajectory of length {}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            present_index,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a time index relative to the present (0 = present).
    pub fn at_offset(&self, offset: i64) -> Option<f64> {
        let idx = self.present_index as i64 + offset;
        if idx < 0 || idx >= self.values.len() as i64 {
            None
        } else {
            Some(self.values[idx as usize])
        }
    }
}

/// One seeded trajectory. Bit-reproducible for a fixed config.
pub fn generate_sinusoid(config: &SinusoidConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut rng = rng_stream(config.seed, 0);
    let values = (0..config.length)
        .map(|t| config.trend(t) + config.noise_std * rng::standard_normal(&mut rng))
        .collect();
    Trajectory::new(values, config.length - 1)
}

/// A dataset trajectory together with the phase it was drawn with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhasedTrajectory {
    pub trajectory: Trajectory,
    pub phase: f64,
}

/// `n` independent trajectories with uniform random phases.
///
/// Trajectory `j` draws from substream `j` of `base_seed` (phase first, then
/// the noise sequence), so the dataset is reproducible and each trajectory is
/// independent of the others; generation parallelizes over trajectories.
pub fn generate_dataset_detailed(
    config: &SinusoidConfig,
    n: usize,
    base_seed: u64,
) -> Result<Vec<PhasedTrajectory>> {
    config.validate()?;
    if n < 1 {
        return Err(Error::Domain("dataset size must be >= 1".into()));
    }
    let results = map_indexed(Parallelism::default(), n, |j| {
        let mut rng = rng_stream(base_seed, j as u64);
        let phase = rng::uniform_in(&mut rng, 0.0, 2.0 * PI);
        let values: Vec<f64> = (0..config.length)
            .map(|t| {
                config.amplitude * (2.0 * PI * t as f64 / config.period + phase).sin()
                    + config.noise_std * rng::standard_normal(&mut rng)
            })
            .collect();
        PhasedTrajectory {
            trajectory: Trajectory {
                values,
                present_index: config.length - 1,
            },
            phase,
        }
    });
    Ok(results)
}

/// [`generate_dataset_detailed`] without the phase records.
pub fn generate_dataset(
    config: &SinusoidConfig,
    n: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    Ok(generate_dataset_detailed(config, n, base_seed)?
        .into_iter()
        .map(|p| p.trajectory)
        .collect())
}

/// Test-field kinds with analytically known spectra and gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldKind {
    /// Every pixel equals `value`.
    Constant { value: f64 },
    /// `amplitude * sin(2 pi q x / size)` along columns; power sits in radial
    /// bin `q` of the spectrum.
    SinusoidX { wavenumber: usize, amplitude: f64 },
    /// I.i.d. normal pixels with standard deviation `std`.
    GaussianNoise { std: f64, seed: u64 },
}

/// A deterministic square field for exercising the metric suite.
pub fn generate_test_field2d(kind: FieldKind, size: usize) -> Result<Field2D> {
    if size < 4 {
        return Err(Error::Domain("field size must be >= 4".into()));
    }
    let values = match kind {
        FieldKind::Constant { value } => vec![value; size * size],
        FieldKind::SinusoidX { wavenumber, amplitude } => {
            if wavenumber == 0 || wavenumber >= size / 2 {
                return Err(Error::Domain(format!(
                    "tone wavenumber must be in 1..{}",
                    size / 2
                )));
            }
            let mut v = Vec::with_capacity(size * size);
            for _y in 0..size {
                for x in 0..size {
                    v.push(amplitude * (2.0 * PI * wavenumber as f64 * x as f64 / size as f64).sin());
                }
            }
            v
        }
        FieldKind::GaussianNoise { std, seed } => {
            let mut rng = rng_stream(seed, 0);
            (0..size * size)
                .map(|_| std * rng::standard_normal(&mut rng))
                .collect()
        }
    };
    Field2D::new(size, size, values, 1.0)
}
