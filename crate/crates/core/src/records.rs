//! On-disk trajectory records and the manifest that ties a directory of them
//! together.
//!
//! A record file is UTF-8 text. It opens with `#` metadata lines of the form
//! `# key = <JSON value>`, in this order:
//!
//! ```text
//! # format = "fluorsqueeze-record/1"
//! # params = {"gamma":1.0,...}
//! # seed = 20240601
//! # traj_index = 0
//! # dt = 0.001
//! # steps = 200000
//! # projections = 0
//! # max_violation = 0.0
//! # final_state = [x, y, z]
//! t,x,y,z,dY1,dY2
//! ```
//!
//! followed by one row per step `n = 0 … steps−1`: the time `n·dt`, the
//! state at that time and the current increments over `[t_n, t_n + dt]`.
//! Numbers are printed with 17 significant digits (`{:.16e}`), so they parse
//! back to the same `f64`. The state after the last step is `final_state`.
//!
//! `manifest.json` lists the shared parameters and, per file, its SHA-256.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::BlochVector;
use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::trajectories::{simulate_trajectory, BallRepairs, InitialState, SmeConfig, TrajectoryRecord};

pub const RECORD_FORMAT: &str = "fluorsqueeze-record/1";
pub const MANIFEST_FORMAT: &str = "fluorsqueeze-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";
const COLUMNS: &str = "t,x,y,z,dY1,dY2";

/// Writer that hashes everything passing through it.
struct Hashing<W> {
    inner: W,
    hash: Sha256,
}

impl<W: Write> Write for Hashing<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hash.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(hex(&h.finalize()))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data always serializes")
}

/// Writes `rec` to `path` and returns the file's SHA-256 in hex.
pub fn write_record(path: &Path, rec: &TrajectoryRecord) -> Result<String> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = Hashing {
        inner: BufWriter::new(file),
        hash: Sha256::new(),
    };
    let last = rec
        .states
        .last()
        .copied()
        .unwrap_or(BlochVector::new(f64::NAN, f64::NAN, f64::NAN));
    let header = [
        ("format", json(&RECORD_FORMAT)),
        ("params", json(&rec.params)),
        ("seed", json(&rec.seed)),
        ("traj_index", json(&rec.traj_index)),
        ("dt", json(&rec.dt)),
        ("steps", json(&rec.steps())),
        ("projections", json(&rec.repairs.projections)),
        ("max_violation", json(&rec.repairs.max_violation)),
        ("final_state", json(&last.to_array())),
    ];
    let io = |e| Error::io(path, e);
    for (k, v) in header {
        writeln!(w, "# {k} = {v}").map_err(io)?;
    }
    writeln!(w, "{COLUMNS}").map_err(io)?;
    for n in 0..rec.steps() {
        let x = rec.states[n];
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            rec.times[n], x.x, x.y, x.z, rec.dy1[n], rec.dy2[n]
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(hex(&w.hash.finalize()))
}

fn mismatch(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::RecordMismatch(format!("{}: {msg}", path.display()))
}

fn header_value<T: for<'de> Deserialize<'de>>(path: &Path, line: Option<&str>, key: &str) -> Result<T> {
    let line = line.ok_or_else(|| mismatch(path, format!("missing header {key}")))?;
    let rest = line
        .strip_prefix("# ")
        .and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(" = "))
        .ok_or_else(|| mismatch(path, format!("expected header {key}, found \"{line}\"")))?;
    serde_json::from_str(rest).map_err(|e| mismatch(path, format!("header {key}: {e}")))
}

/// Reads a record file written by [`write_record`].
pub fn read_record(path: &Path) -> Result<TrajectoryRecord> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<Option<String>> { lines.next().transpose().map_err(|e| Error::io(path, e)) };

    let format: String = header_value(path, next()?.as_deref(), "format")?;
    if format != RECORD_FORMAT {
        return Err(mismatch(path, format!("unsupported format \"{format}\"")));
    }
    let params: ModelParams = header_value(path, next()?.as_deref(), "params")?;
    let seed: u64 = header_value(path, next()?.as_deref(), "seed")?;
    let traj_index: u64 = header_value(path, next()?.as_deref(), "traj_index")?;
    let dt: f64 = header_value(path, next()?.as_deref(), "dt")?;
    let steps: usize = header_value(path, next()?.as_deref(), "steps")?;
    let projections: usize = header_value(path, next()?.as_deref(), "projections")?;
    let max_violation: f64 = header_value(path, next()?.as_deref(), "max_violation")?;
    let last: [f64; 3] = header_value(path, next()?.as_deref(), "final_state")?;
    if next()?.as_deref() != Some(COLUMNS) {
        return Err(mismatch(path, "missing column line"));
    }

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut dy1 = Vec::with_capacity(steps);
    let mut dy2 = Vec::with_capacity(steps);
    while let Some(line) = next()? {
        let mut row = [0.0; 6];
        let mut fields = line.split(',');
        for slot in row.iter_mut() {
            *slot = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| mismatch(path, format!("bad row {}", times.len())))?;
        }
        if fields.next().is_some() {
            return Err(mismatch(path, format!("extra columns in row {}", times.len())));
        }
        times.push(row[0]);
        states.push(BlochVector::new(row[1], row[2], row[3]));
        dy1.push(row[4]);
        dy2.push(row[5]);
    }
    if dy1.len() != steps {
        return Err(mismatch(path, format!("{} rows for {steps} steps", dy1.len())));
    }
    times.push(steps as f64 * dt);
    states.push(BlochVector::from_array(last));
    Ok(TrajectoryRecord {
        params,
        seed,
        traj_index,
        dt,
        times,
        states,
        dy1,
        dy2,
        repairs: BallRepairs {
            steps,
            projections,
            max_violation,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub traj_index: u64,
    pub sha256: String,
    pub projections: usize,
    pub max_violation: f64,
    pub final_state: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub params: ModelParams,
    pub seed: u64,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub n_traj: usize,
    pub initial: InitialState,
    pub projections: usize,
    pub projection_fraction: f64,
    pub max_violation: f64,
    pub records: Vec<ManifestEntry>,
}

impl Manifest {
    /// Ensemble mean of the states after the last step.
    pub fn mean_final_state(&self) -> [f64; 3] {
        let n = self.records.len() as f64;
        let mut mean = [0.0; 3];
        for r in &self.records {
            for (m, v) in mean.iter_mut().zip(r.final_state) {
                *m += v / n;
            }
        }
        mean
    }

    pub fn config(&self) -> SmeConfig {
        SmeConfig {
            dt: self.dt,
            t_final: self.t_final,
            seed: self.seed,
            n_traj: self.n_traj,
            initial: self.initial,
        }
    }
}

pub fn record_file_name(index: u64) -> String {
    format!("traj-{index:06}.csv")
}

/// Simulates the ensemble described by `cfg` into `dir`: one record file per
/// trajectory plus `manifest.json`. The directory is created if needed.
pub fn write_ensemble(dir: &Path, p: &ModelParams, cfg: &SmeConfig) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let records: Vec<ManifestEntry> = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|j| {
            let rec = simulate_trajectory(p, cfg, j)?;
            let file = record_file_name(j);
            let sha256 = write_record(&dir.join(&file), &rec)?;
            Ok(ManifestEntry {
                file,
                traj_index: j,
                sha256,
                projections: rec.repairs.projections,
                max_violation: rec.repairs.max_violation,
                final_state: rec.states.last().expect("at least one state").to_array(),
            })
        })
        .collect::<Result<_>>()?;
    let steps = cfg.steps();
    let projections: usize = records.iter().map(|r| r.projections).sum();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        params: *p,
        seed: cfg.seed,
        dt: cfg.dt,
        t_final: cfg.t_final,
        steps,
        n_traj: cfg.n_traj,
        initial: cfg.initial,
        projections,
        projection_fraction: projections as f64 / (steps * cfg.n_traj) as f64,
        max_violation: records.iter().map(|r| r.max_violation).fold(0.0, f64::max),
        records,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("plain data always serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text =
        std::fs::read_to_string(&path).map_err(|_| Error::RecordMismatch(format!("{}: no manifest", dir.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| mismatch(&path, e))?;
    if m.format != MANIFEST_FORMAT {
        return Err(mismatch(&path, format!("unsupported format \"{}\"", m.format)));
    }
    if m.records.is_empty() {
        return Err(mismatch(&path, "no records listed"));
    }
    Ok(m)
}

/// Reads every record listed in the manifest, checking checksums and that
/// each file agrees with the manifest.
pub fn load_records(dir: &Path) -> Result<(Manifest, Vec<TrajectoryRecord>)> {
    let m = read_manifest(dir)?;
    let records = m
        .records
        .par_iter()
        .map(|entry| {
            let path: PathBuf = dir.join(&entry.file);
            if sha256_file(&path)? != entry.sha256 {
                return Err(mismatch(&path, "checksum differs from manifest"));
            }
            let rec = read_record(&path)?;
            if rec.params != m.params || rec.seed != m.seed || rec.dt != m.dt || rec.steps() != m.steps {
                return Err(mismatch(&path, "header disagrees with manifest"));
            }
            if rec.traj_index != entry.traj_index {
                return Err(mismatch(&path, "trajectory index disagrees with manifest"));
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((m, records))
}
