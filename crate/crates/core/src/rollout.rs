//! Scheme execution: drive a trained denoiser through an inference scheme to
//! extend observed trajectories into sampled futures.
//!
//! Each ensemble member owns a value buffer keyed by time offset from the
//! present. Actions run strictly in order (conditioning is a data
//! dependency); members are independent and run in parallel on substreams of
//! the request seed, so ensembles are reproducible at any thread count.

use serde::{Deserialize, Serialize};

use crate::diffusion::{sample_with_rng, Denoise, MaskedSample, SamplerConfig};
use crate::exec::{try_map_indexed, Parallelism};
use crate::metrics::HorizonBucket;
use crate::rng::rng_stream;
use crate::scheme::{extend_scheme, validate_scheme, InferenceScheme};
use crate::synthetic::Trajectory;
use crate::{Error, Result};

/// Everything needed to roll a scheme forward from observed data.
#[derive(Debug, Clone)]
pub struct RolloutRequest<'a> {
    pub scheme: &'a InferenceScheme,
    /// Observed trajectory; values after `present_index` are ignored.
    pub observed: &'a Trajectory,
    /// Future steps to produce.
    pub total: usize,
    pub n_ensemble: usize,
    pub sampler: SamplerConfig,
}

/// Which action (and scheme block) produced a future step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub step: i64,
    pub action: usize,
    pub block: usize,
}

/// Sampled futures sharing one observed past.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub members: Vec<Trajectory>,
    /// Future steps per member beyond the present.
    pub total: usize,
    /// One record per future step in `1..=total`.
    pub provenance: Vec<ProvenanceRecord>,
}

impl TrajectoryEnsemble {
    pub fn present_index(&self) -> usize {
        self.members[0].present_index
    }

    /// Member values at future offset `t` (1-based).
    pub fn future_values(&self, t: i64) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.values[m.present_index + t as usize])
            .collect()
    }
}

/// Execute the request with the default parallelism.
pub fn run(req: &RolloutRequest, denoiser: &(impl Denoise + Sync)) -> Result<TrajectoryEnsemble> {
    run_with(req, denoiser, Parallelism::default())
}

pub fn run_with(
    req: &RolloutRequest,
    denoiser: &(impl Denoise + Sync),
    mode: Parallelism,
) -> Result<TrajectoryEnsemble> {
    if req.total < 1 || req.n_ensemble < 1 {
        return Err(Error::Domain(
            "rollout needs total >= 1 and n_ensemble >= 1".into(),
        ));
    }
    let target = (req.total as i64).max(req.scheme.horizon);
    let extended = extend_scheme(req.scheme, target)?;
    let report = validate_scheme(&extended);
    if !report.passed() {
        return Err(Error::InvalidScheme(format!(
            "extended scheme fails validation: {report}"
        )));
    }

    let lookback = -extended.min_window_index();
    let observed = req.observed;
    if (observed.present_index as i64) < lookback {
        return Err(Error::Domain(format!(
            "scheme looks back {lookback} steps but only {} are observed",
            observed.present_index
        )));
    }

    let actions_per_block = req.scheme.actions.len().max(1);
    let provenance: Vec<ProvenanceRecord> = (0..extended.actions.len())
        .flat_map(|i| {
            extended
                .generated(i)
                .into_iter()
                .filter(|&t| t >= 1 && t <= req.total as i64)
                .map(move |t| ProvenanceRecord {
                    step: t,
                    action: i,
                    block: i / actions_per_block,
                })
        })
        .collect();

    let ext_horizon = extended.horizon;
    let members = try_map_indexed(mode, req.n_ensemble, |member| {
        let offset = |t: i64| (t + lookback) as usize;
        let mut buffer: Vec<Option<f64>> = vec![None; (lookback + ext_horizon + 1) as usize];
        for t in -lookback..=0 {
            buffer[offset(t)] = observed.at_offset(t);
        }

        for i in 0..extended.actions.len() {
            let window = extended.window(i);
            let rel = extended.template_indices(i);
            let mask = extended.actions[i].cond_mask.clone();
            let mut values = vec![0.0; window.len()];
            for (j, (&t, &cond)) in window.iter().zip(&mask).enumerate() {
                if cond {
                    values[j] = buffer[offset(t)]
                        .ok_or(Error::UnavailableIndex { action: i, index: t })?;
                }
            }
            let masked = MaskedSample::new(values, mask, rel.to_vec())?;
            let mut rng = rng_stream(
                req.sampler.seed,
                ((member as u64) << 32) | i as u64,
            );
            let out = sample_with_rng(
                denoiser,
                &masked,
                &req.sampler.schedule,
                req.sampler.method,
                &mut rng,
            )?;
            for ((&t, &cond), &v) in window.iter().zip(&masked.mask).zip(&out) {
                if !cond {
                    let slot = &mut buffer[offset(t)];
                    if slot.is_some() {
                        return Err(Error::Domain(format!(
                            "action {i} rewrote step {t}; scheme is not write-once"
                        )));
                    }
                    *slot = Some(v);
                }
            }
        }

        let mut values = observed.values[..=observed.present_index].to_vec();
        for t in 1..=req.total as i64 {
            values.push(buffer[offset(t)].expect("complete scheme covers every step"));
        }
        Trajectory::new(values, observed.present_index)
    })?;

    Ok(TrajectoryEnsemble {
        members,
        total: req.total,
        provenance,
    })
}

/// Per-step mean and standard deviation over members, futures only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleStats {
    /// Index 0 = future step 1.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn ensemble_statistics(e: &TrajectoryEnsemble) -> EnsembleStats {
    let n = e.members.len() as f64;
    let mut mean = Vec::with_capacity(e.total);
    let mut std = Vec::with_capacity(e.total);
    for t in 1..=e.total as i64 {
        let vals = e.future_values(t);
        let m = vals.iter().sum::<f64>() / n;
        let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        mean.push(m);
        std.push(v.sqrt());
    }
    EnsembleStats { mean, std }
}

/// All member values whose future offset falls in each bucket.
pub fn pooled_by_bucket(e: &TrajectoryEnsemble, buckets: &[HorizonBucket]) -> Vec<Vec<f64>> {
    buckets
        .iter()
        .map(|b| {
            let mut pool = Vec::new();
            for t in 1..=e.total as i64 {
                if b.contains(t) {
                    pool.extend(e.future_values(t));
                }
            }
            pool
        })
        .collect()
}
