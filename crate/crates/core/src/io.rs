//! On-disk formats: measurement records as CSV with a JSON sidecar, Wigner
//! fields as CSV, states in the row-major matrix JSON layout, fit results and
//! per-directory run manifests.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::hilbert::{MatrixJson, QuantumState};
use crate::sequences::{ExperimentResult, MeasurementRecord};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record metadata stored next to its CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSidecar {
    pub sequence_id: String,
    pub delta_rad_s: f64,
    pub points: usize,
}

/// `foo.csv` → `foo.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn format_value(x: f64) -> String {
    format!("{x:.17e}")
}

/// Writes `t_s,p_excited` rows and the sidecar.
pub fn write_record(csv_path: &Path, record: &MeasurementRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(["t_s", "p_excited"])?;
    for (t, p) in record.times.iter().zip(&record.p_excited) {
        w.write_record([format_value(*t), format_value(*p)])?;
    }
    w.flush()?;
    let sidecar = RecordSidecar { sequence_id: record.sequence_id.clone(), delta_rad_s: record.delta, points: record.len() };
    write_json(&sidecar_path(csv_path), &sidecar)
}

/// Reads a record CSV; the sidecar is optional.
pub fn read_record(csv_path: &Path) -> Result<MeasurementRecord> {
    let mut r = csv::Reader::from_path(csv_path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Config {
            context: csv_path.display().to_string(),
            message: format!("missing column '{name}'"),
        })
    };
    let (it, ip) = (col("t_s")?, col("p_excited")?);
    let (mut times, mut p_excited) = (Vec::new(), Vec::new());
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let parse = |i: usize| {
            row.get(i).and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| Error::Config {
                context: format!("{}:{}", csv_path.display(), line + 2),
                message: format!("bad number in column {}", headers.get(i).unwrap_or("?")),
            })
        };
        times.push(parse(it)?);
        p_excited.push(parse(ip)?);
    }
    let side = sidecar_path(csv_path);
    let (sequence_id, delta) = if side.exists() {
        let s: RecordSidecar = read_json(&side)?;
        (s.sequence_id, s.delta_rad_s)
    } else {
        (csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), 0.0)
    };
    Ok(MeasurementRecord { sequence_id, delta, times, p_excited })
}

/// Summary written as `result.json` by [`write_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentIndex {
    pub experiment: String,
    pub seed: u64,
    pub records: Vec<String>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// Writes `record_000.csv …` plus `result.json`; returns the files written.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut names = Vec::new();
    for (k, rec) in result.records.iter().enumerate() {
        let name = format!("record_{k:03}.csv");
        let path = dir.join(&name);
        write_record(&path, rec)?;
        files.push(path.clone());
        files.push(sidecar_path(&path));
        names.push(name);
    }
    let index = ExperimentIndex {
        experiment: result.experiment.clone(),
        seed: result.seed,
        records: names,
        metadata: result.metadata.clone(),
    };
    let path = dir.join("result.json");
    write_json(&path, &index)?;
    files.push(path);
    Ok(files)
}

pub fn read_experiment(dir: &Path) -> Result<ExperimentResult> {
    let index: ExperimentIndex = read_json(&dir.join("result.json"))?;
    let records = index.records.iter().map(|n| read_record(&dir.join(n))).collect::<Result<_>>()?;
    Ok(ExperimentResult { experiment: index.experiment, records, metadata: index.metadata, seed: index.seed })
}

pub fn write_wigner_csv(path: &Path, grid: &[C64], w: &[f64]) -> Result<()> {
    if grid.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: w.len() });
    }
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["re_beta", "im_beta", "w"])?;
    for (b, v) in grid.iter().zip(w) {
        out.write_record([format_value(b.re), format_value(b.im), format_value(*v)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_wigner_csv(path: &Path) -> Result<Vec<(C64, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        re_beta: f64,
        im_beta: f64,
        w: f64,
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<Row>().map(|row| row.map(|x| (C64::new(x.re_beta, x.im_beta), x.w)).map_err(Error::from)).collect()
}

pub fn write_state(path: &Path, state: &QuantumState) -> Result<()> {
    write_json(path, &state.to_json())
}

pub fn read_state(path: &Path) -> Result<QuantumState> {
    let json: MatrixJson = read_json(path)?;
    QuantumState::from_json(&json)
}

pub fn write_fit(path: &Path, fit: &FitResult) -> Result<()> {
    write_json(path, fit)
}

pub fn read_fit(path: &Path) -> Result<FitResult> {
    read_json(path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        context: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Everything needed to re-run a command: the argument vector and the
/// resolved configuration, plus provenance of the run itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>, config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            config,
            wall_time_s: 0.0,
            files: Vec::new(),
        }
    }

    /// Records `files` relative to `dir` and writes `manifest.json` there.
    pub fn write(mut self, dir: &Path, files: &[PathBuf], wall_time_s: f64) -> Result<PathBuf> {
        self.wall_time_s = wall_time_s;
        self.files = files
            .iter()
            .map(|f| f.strip_prefix(dir).unwrap_or(f).display().to_string())
            .collect();
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, &self)?;
        Ok(path)
    }
}

pub fn read_manifest(dir_or_file: &Path) -> Result<Manifest> {
    let path = if dir_or_file.is_dir() { dir_or_file.join(MANIFEST_FILE) } else { dir_or_file.to_path_buf() };
    read_json(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = MeasurementRecord {
            sequence_id: "rpn/test".into(),
            delta: -1.5,
            times: vec![0.0, 1e-7, 2e-7],
            p_excited: vec![0.1, 0.2 + 1e-16, 1.0 / 3.0],
        };
        let path = dir.path().join("r.csv");
        write_record(&path, &rec).unwrap();
        assert_eq!(read_record(&path).unwrap(), rec);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t_s,p_excited\n"));
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "time,p\n0,1\n").unwrap();
        assert!(matches!(read_record(&path), Err(Error::Config { .. })));
    }

    #[test]
    fn wigner_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let grid = vec![C64::new(0.0, 0.0), C64::new(-1.25, 0.5)];
        write_wigner_csv(&path, &grid, &[0.5, -0.1]).unwrap();
        let back = read_wigner_csv(&path).unwrap();
        assert_eq!(back, vec![(grid[0], 0.5), (grid[1], -0.1)]);
        assert!(fs::read_to_string(&path).unwrap().starts_with("re_beta,im_beta,w\n"));
    }

    #[test]
    fn state_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let s = QuantumState::fock_mixture(4, &[0.25, 0.75]).unwrap();
        write_state(&path, &s).unwrap();
        assert_eq!(read_state(&path).unwrap().density_matrix(), s.density_matrix());
    }

    #[test]
    fn experiment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ExperimentResult::new("demo");
        r.records.push(MeasurementRecord { sequence_id: "a".into(), delta: 0.0, times: vec![0.0, 1.0], p_excited: vec![0.0, 1.0] });
        r.insert("note", "x");
        let files = write_experiment(dir.path(), &r).unwrap();
        assert_eq!(files.len(), 3);
        assert_eq!(read_experiment(dir.path()).unwrap(), r);
    }
}
