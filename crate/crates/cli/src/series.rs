//! Snapshot series on disk: binary field files, curve and varifold CSVs,
//! a diagnostics CSV and a manifest with a SHA-256 per file.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vflow_core::dynamics::{run_parameters, Diagnostics, RunOutcome};
use vflow_core::fields::{PeriodicGrid, ScalarField, VectorField};
use vflow_core::interface::{DiscreteVarifold, MarkerCurve, VarifoldAtom};
use vflow_core::trajectory::{Snapshot, Trajectory};

use crate::scenario::{parse_scenario_in, Scenario};
use crate::CliError;

pub const MAGIC: [u8; 4] = *b"VFLW";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;
/// `rho`, `chi`, `u_x`, `u_y`.
pub const FIELD_COUNT: u32 = 4;

pub const MANIFEST: &str = "manifest.toml";
pub const SCENARIO: &str = "scenario.toml";
pub const DIAGNOSTICS: &str = "diagnostics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopInfo {
    /// `self_intersection` or `numeric`.
    pub kind: String,
    pub step: usize,
    pub time: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    pub time: f64,
    pub fields: FileEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varifold: Option<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker_spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub scenario: FileEntry,
    pub diagnostics: FileEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopInfo>,
    pub snapshots: Vec<SnapshotEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let io = |e| CliError::io(path, e);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

fn put(dir: &Path, name: String, bytes: &[u8]) -> Result<FileEntry, CliError> {
    write_atomic(&dir.join(&name), bytes)?;
    Ok(FileEntry { path: name, sha256: sha256_hex(bytes) })
}

pub fn encode_snapshot(s: &Snapshot) -> Vec<u8> {
    let n = s.grid().n();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * 8 * n * n);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&FIELD_COUNT.to_le_bytes());
    out.extend_from_slice(&s.time.to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for field in [s.rho.values(), s.chi.values(), &s.u.x, &s.u.y] {
        for v in field {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Time, density, indicator and velocity from a binary snapshot.
pub fn decode_snapshot(bytes: &[u8]) -> Result<(f64, ScalarField, ScalarField, VectorField), String> {
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err("not a snapshot file".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(format!("unsupported snapshot version {}", word(4)));
    }
    let n = word(8) as usize;
    if word(12) != FIELD_COUNT {
        return Err(format!("expected {FIELD_COUNT} fields, header says {}", word(12)));
    }
    let time = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let grid = PeriodicGrid::new(n).map_err(|e| e.to_string())?;
    let len = n * n;
    if bytes.len() != HEADER_LEN + FIELD_COUNT as usize * 8 * len {
        return Err(format!("length {} does not match a {n}-point grid", bytes.len()));
    }
    let field = |k: usize| -> Vec<f64> {
        bytes[HEADER_LEN + 8 * k * len..HEADER_LEN + 8 * (k + 1) * len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let err = |e: vflow_core::Error| e.to_string();
    Ok((
        time,
        ScalarField::new(grid, field(0)).map_err(err)?,
        ScalarField::new(grid, field(1)).map_err(err)?,
        VectorField::new(grid, field(2), field(3)).map_err(err)?,
    ))
}

fn curve_csv(c: &MarkerCurve) -> String {
    let mut s = String::from("index,x,y\n");
    for (i, p) in c.points().iter().enumerate() {
        let _ = writeln!(s, "{i},{:?},{:?}", p[0], p[1]);
    }
    s
}

fn varifold_csv(v: &DiscreteVarifold) -> String {
    let mut s = String::from("x,y,zx,zy,w\n");
    for a in &v.atoms {
        let _ = writeln!(s, "{:?},{:?},{:?},{:?},{:?}", a.x[0], a.x[1], a.z[0], a.z[1], a.w);
    }
    s
}

fn read_rows(bytes: &[u8], columns: usize) -> Result<Vec<Vec<f64>>, String> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != columns {
            return Err(format!("expected {columns} columns, got {}", rec.len()));
        }
        rows.push(rec.iter().map(|v| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"))).collect::<Result<_, _>>()?);
    }
    Ok(rows)
}

pub fn diagnostics_csv(rows: &[Diagnostics]) -> String {
    let mut s = String::from(
        "time,kinetic,internal,interface,dissipated_cum,hyper_cum,balance_residual,mass,max_div_u,min_rho,max_rho,perimeter\n",
    );
    for d in rows {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            d.time,
            d.kinetic,
            d.internal,
            d.interface,
            d.dissipated_cum,
            d.hyper_cum,
            d.balance_residual,
            d.mass,
            d.max_div_u,
            d.min_rho,
            d.max_rho,
            d.perimeter
        );
    }
    s
}

/// Writes the run into `dir` with the canonical scenario alongside.
pub fn write_series(dir: &Path, scenario: &Scenario, outcome: &RunOutcome) -> Result<Manifest, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let scenario_entry = put(dir, SCENARIO.into(), scenario.emit().as_bytes())?;
    let diagnostics = put(dir, DIAGNOSTICS.into(), diagnostics_csv(&outcome.diagnostics).as_bytes())?;
    let traj = &outcome.trajectory;
    let mut snapshots = Vec::with_capacity(traj.snapshots.len());
    for (k, s) in traj.snapshots.iter().enumerate() {
        let fields = put(dir, format!("snap_{k:05}.bin"), &encode_snapshot(s))?;
        let (curve, varifold, marker_spacing) = match &s.curve {
            Some(c) => (
                Some(put(dir, format!("curve_{k:05}.csv"), curve_csv(c).as_bytes())?),
                Some(put(dir, format!("varifold_{k:05}.csv"), varifold_csv(&s.varifold()).as_bytes())?),
                Some(c.target_spacing()),
            ),
            None => (None, None, None),
        };
        snapshots.push(SnapshotEntry { time: s.time, fields, curve, varifold, marker_spacing });
    }
    let stop = outcome.stop.as_ref().map(|e| StopInfo {
        kind: match e {
            vflow_core::Error::SelfIntersection { .. } => "self_intersection".into(),
            _ => "numeric".into(),
        },
        step: outcome.final_state.step,
        time: outcome.final_state.time,
        message: e.to_string(),
    });
    let manifest = Manifest {
        format: "vflow-series".into(),
        version: VERSION,
        n: traj.grid().n(),
        rho_lo: traj.params.rho_lo,
        rho_hi: traj.params.rho_hi,
        scenario: scenario_entry,
        diagnostics,
        stop,
        snapshots,
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::series(dir, e.to_string()))?;
    write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub scenario: Scenario,
    pub trajectory: Trajectory,
}

/// Reads a series from its manifest (or the directory holding it),
/// verifying every hash and the time ordering.
pub fn load_series(path: &Path) -> Result<LoadedSeries, CliError> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| CliError::series(&manifest_path, e.to_string()))?;
    let read = |entry: &FileEntry| -> Result<Vec<u8>, CliError> {
        let p = dir.join(&entry.path);
        let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        let got = sha256_hex(&bytes);
        if got != entry.sha256 {
            return Err(CliError::series(&p, format!("hash mismatch: manifest {}, file {got}", entry.sha256)));
        }
        Ok(bytes)
    };
    let scenario_bytes = read(&manifest.scenario)?;
    let scenario_text = String::from_utf8(scenario_bytes).map_err(|e| CliError::series(&dir, e.to_string()))?;
    let (scenario, setup) = parse_scenario_in(&scenario_text, &dir)?;
    read(&manifest.diagnostics)?;

    let mut snapshots = Vec::with_capacity(manifest.snapshots.len());
    for entry in &manifest.snapshots {
        let at = |m: String| CliError::series(&dir.join(&entry.fields.path), m);
        let (time, rho, chi, u) = decode_snapshot(&read(&entry.fields)?).map_err(at)?;
        if time != entry.time {
            return Err(at(format!("header time {time} differs from manifest time {}", entry.time)));
        }
        if rho.grid().n() != manifest.n {
            return Err(at(format!("grid {} differs from manifest grid {}", rho.grid().n(), manifest.n)));
        }
        let curve = match &entry.curve {
            Some(f) => {
                let rows = read_rows(&read(f)?, 3).map_err(at)?;
                let pts = rows.iter().map(|r| [r[1], r[2]]).collect();
                let spacing = entry.marker_spacing.ok_or_else(|| at("curve without marker spacing".into()))?;
                Some(MarkerCurve::new(pts, spacing)?)
            }
            None => None,
        };
        let varifold = match &entry.varifold {
            Some(f) => {
                let rows = read_rows(&read(f)?, 5).map_err(at)?;
                let atoms = rows.iter().map(|r| VarifoldAtom { x: [r[0], r[1]], z: [r[2], r[3]], w: r[4] }).collect();
                Some(DiscreteVarifold { atoms })
            }
            None => None,
        };
        snapshots.push(Snapshot { time, rho, chi, u, curve, varifold });
    }
    let trajectory = Trajectory {
        params: run_parameters(&setup.model, &setup.config, (manifest.rho_lo, manifest.rho_hi)),
        snapshots,
    };
    trajectory.validate()?;
    Ok(LoadedSeries { dir, manifest, scenario, trajectory })
}
