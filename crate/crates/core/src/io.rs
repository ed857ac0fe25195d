//! On-disk artifact formats.
//!
//! Binary files carry a 4-byte magic and a u32 version, then fixed-width
//! little-endian fields; floating-point payloads are raw f64 bits, so a
//! write/read round trip is exact. Human-facing outputs (metric reports,
//! loss curves, trajectory exports) are plain CSV.
//!
//! * dataset   `FCDS`: n, length, then n*length values row-major
//!             (+ JSON sidecar with the generating config)
//! * model     `FCKP`: layer widths, data_std, time_scale, parameters
//! * ensemble  `FENS`: members, length, present index, future steps, values
//!             (+ JSON sidecar with provenance records)

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::rollout::{ProvenanceRecord, TrajectoryEnsemble};
use crate::synthetic::{PhasedTrajectory, SinusoidConfig, Trajectory};
use crate::{Error, Result};

const DATASET_MAGIC: &[u8; 4] = b"FCDS";
const CHECKPOINT_MAGIC: &[u8; 4] = b"FCKP";
const ENSEMBLE_MAGIC: &[u8; 4] = b"FENS";
const FORMAT_VERSION: u32 = 1;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64s(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8>(r)?))
}

fn check_header(r: &mut impl Read, path: &Path, magic: &[u8; 4]) -> Result<()> {
    let got = read_exact::<4>(r)?;
    if &got != magic {
        return Err(format_err(path, format!("bad magic {got:?}")));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    Ok(())
}

/// Sidecar metadata stored next to a dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub config: SinusoidConfig,
    pub base_seed: u64,
    pub phases: Vec<f64>,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    std::path::PathBuf::from(p)
}

/// Write a dataset and its JSON sidecar.
pub fn write_dataset(path: &Path, data: &[PhasedTrajectory], sidecar: &DatasetSidecar) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Domain("refusing to write an empty dataset".into()));
    }
    let length = data[0].trajectory.len();
    if data.iter().any(|t| t.trajectory.len() != length) {
        return Err(Error::Domain("dataset trajectories differ in length".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    write_u32(&mut w, FORMAT_VERSION)?;
    write_u64(&mut w, data.len() as u64)?;
    write_u64(&mut w, length as u64)?;
    for t in data {
        write_f64s(&mut w, &t.trajectory.values)?;
    }
    w.flush()?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

/// Read a dataset and its sidecar back.
pub fn read_dataset(path: &Path) -> Result<(Vec<PhasedTrajectory>, DatasetSidecar)> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, path, DATASET_MAGIC)?;
    let n = read_u64(&mut r)? as usize;
    let length = read_u64(&mut r)? as usize;
    if length == 0 || n == 0 {
        return Err(format_err(path, "empty dataset"));
    }
    let sidecar: DatasetSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.phases.len() != n {
        return Err(format_err(path, "sidecar phase count differs from dataset"));
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut values = Vec::with_capacity(length);
        for _ in 0..length {
            values.push(read_f64(&mut r)?);
        }
        out.push(PhasedTrajectory {
            trajectory: Trajectory::new(values, length - 1)?,
            phase: sidecar.phases[j],
        });
    }
    Ok((out, sidecar))
}

/// Write a model checkpoint.
pub fn write_checkpoint(path: &Path, model: &Denoiser) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(&mut w, FORMAT_VERSION)?;
    let widths = model.widths();
    write_u32(&mut w, widths.len() as u32)?;
    for width in &widths {
        write_u32(&mut w, *width as u32)?;
    }
    w.write_all(&model.data_std().to_le_bytes())?;
    w.write_all(&model.time_scale().to_le_bytes())?;
    write_f64s(&mut w, &model.flat_params())?;
    w.flush()?;
    Ok(())
}

/// Load a model checkpoint.
pub fn read_checkpoint(path: &Path) -> Result<Denoiser> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, path, CHECKPOINT_MAGIC)?;
    let n_widths = read_u32(&mut r)? as usize;
    if n_widths < 2 || n_widths > 64 {
        return Err(format_err(path, format!("implausible width count {n_widths}")));
    }
    let mut widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        widths.push(read_u32(&mut r)? as usize);
    }
    let data_std = read_f64(&mut r)?;
    let time_scale = read_f64(&mut r)?;
    let n_params: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(read_f64(&mut r)?);
    }
    Denoiser::from_parts(&widths, data_std, time_scale, &params)
        .map_err(|e| format_err(path, e.to_string()))
}

/// Sidecar metadata stored next to an ensemble file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSidecar {
    pub scheme_label: String,
    pub seed: u64,
    pub provenance: Vec<ProvenanceRecord>,
}

/// Write an ensemble and its provenance sidecar.
pub fn write_ensemble(path: &Path, e: &TrajectoryEnsemble, label: &str, seed: u64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(ENSEMBLE_MAGIC)?;
    write_u32(&mut w, FORMAT_VERSION)?;
    write_u64(&mut w, e.members.len() as u64)?;
    write_u64(&mut w, e.members[0].len() as u64)?;
    write_u64(&mut w, e.present_index() as u64)?;
    write_u64(&mut w, e.total as u64)?;
    for m in &e.members {
        write_f64s(&mut w, &m.values)?;
    }
    w.flush()?;
    let sidecar = EnsembleSidecar {
        scheme_label: label.to_string(),
        seed,
        provenance: e.provenance.clone(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Read an ensemble and its sidecar back.
pub fn read_ensemble(path: &Path) -> Result<(TrajectoryEnsemble, EnsembleSidecar)> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, path, ENSEMBLE_MAGIC)?;
    let members = read_u64(&mut r)? as usize;
    let length = read_u64(&mut r)? as usize;
    let present = read_u64(&mut r)? as usize;
    let total = read_u64(&mut r)? as usize;
    if members == 0 || present >= length {
        return Err(format_err(path, "inconsistent ensemble header"));
    }
    let sidecar: EnsembleSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let mut out = Vec::with_capacity(members);
    for _ in 0..members {
        let mut values = Vec::with_capacity(length);
        for _ in 0..length {
            values.push(read_f64(&mut r)?);
        }
        out.push(Trajectory::new(values, present)?);
    }
    Ok((
        TrajectoryEnsemble {
            members: out,
            total,
            provenance: sidecar.provenance.clone(),
        },
        sidecar,
    ))
}

/// One metric report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scheme: String,
    pub metric: String,
    pub bucket: String,
    pub value: f64,
}

/// Report rows as `scheme,metric,bucket,value` CSV. Float formatting is the
/// shortest round-trip representation, so identical values give identical
/// bytes.
pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "scheme,metric,bucket,value")?;
    for row in rows {
        writeln!(w, "{},{},{},{}", row.scheme, row.metric, row.bucket, row.value)?;
    }
    w.flush()?;
    Ok(())
}

/// Loss curve as `step,loss` CSV.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,loss")?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectories side by side as `t,traj_0,traj_1,...` CSV.
pub fn write_trajectories_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    if trajectories.is_empty() {
        return Err(Error::Domain("nothing to export".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "t")?;
    for i in 0..trajectories.len() {
        write!(w, ",traj_{i}")?;
    }
    writeln!(w)?;
    let len = trajectories.iter().map(|t| t.len()).max().unwrap();
    for t in 0..len {
        write!(w, "{t}")?;
        for tr in trajectories {
            match tr.values.get(t) {
                Some(v) => write!(w, ",{v}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step ensemble statistics as `t,mean,std` CSV.
pub fn write_stats_csv(path: &Path, stats: &crate::rollout::EnsembleStats) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,mean,std")?;
    for (i, (m, s)) in stats.mean.iter().zip(&stats.std).enumerate() {
        writeln!(w, "{},{m},{s}", i + 1)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::generate_dataset_detailed;

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.ds");
        let config = SinusoidConfig {
            length: 32,
            ..Default::default()
        };
        let data = generate_dataset_detailed(&config, 5, 42).unwrap();
        let sidecar = DatasetSidecar {
            config,
            base_seed: 42,
            phases: data.iter().map(|p| p.phase).collect(),
        };
        write_dataset(&path, &data, &sidecar).unwrap();
        let (back, side) = read_dataset(&path).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.trajectory.values, b.trajectory.values);
            assert_eq!(a.phase, b.phase);
        }
        assert_eq!(side.base_seed, 42);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = Denoiser::new(7, &[16, 16], 0.9, 9.0, 7).unwrap();
        write_checkpoint(&path, &model).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn corrupt_magic_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, b"NOPE....").unwrap();
        match read_checkpoint(&path) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn metrics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_metrics_csv(
            &path,
            &[MetricRow {
                scheme: "multiscale".into(),
                metric: "w1".into(),
                bucket: "16:36".into(),
                value: 0.125,
            }],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "scheme,metric,bucket,value\nmultiscale,w1,16:36,0.125\n");
    }
}
