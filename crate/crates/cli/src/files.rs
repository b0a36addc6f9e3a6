//! On-disk artifacts of the pipeline.
//!
//! Outputs are staged in memory and committed together once a command has
//! finished computing, each through a temporary file and a rename, so a
//! failing command leaves no partial files behind.

use std::path::{Path, PathBuf};

use fdlpv_core::synthesis::ControllerParameters;
use fdlpv_core::{Error, Experiment, Result, TimeRecord, Trace};
use serde::{Deserialize, Serialize};

/// Synthesized controller as written by `synthesize` and read by the
/// downstream commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    pub sample_rate: f64,
    pub gamma: f64,
    pub lti: bool,
    pub params: ControllerParameters,
}

impl ControllerFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        if text.trim().is_empty() {
            return Err(Error::Parse { location: path.display().to_string(), message: "empty controller file".into() });
        }
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
            message: e.to_string(),
        })?;
        // Re-validate shapes and normalization.
        let p = file.params;
        let params = ControllerParameters::new(p.w, p.v, p.basis_n, p.basis_d, p.scheduling)?;
        Ok(Self { params, ..file })
    }
}

pub fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Error::Numerical(format!("JSON encoding failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Tabular CSV with a header row.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| Error::Numerical(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(enc)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(enc)?;
    }
    w.into_inner().map_err(|e| Error::Numerical(format!("CSV encoding failed: {e}")))
}

pub fn trace_csv(tr: &Trace) -> Result<Vec<u8>> {
    let rows = (0..tr.len()).map(|k| vec![k as f64 / tr.sample_rate, tr.r[k], tr.e[k], tr.u[k], tr.d[k], tr.y[k], tr.p[k]]);
    to_csv(&["t", "r", "e", "u", "d", "y", "p"], rows)
}

pub fn records_csv(exp: &Experiment) -> Result<Vec<u8>> {
    let fs = exp.d.sample_rate();
    let (d, u, y) = (exp.d.samples(), exp.u_g.samples(), exp.y.samples());
    to_csv(&["t", "d", "u_G", "y"], (0..d.len()).map(|k| vec![k as f64 / fs, d[k], u[k], y[k]]))
}

pub fn records_name(p: f64) -> String {
    format!("records_p{p}.csv")
}

/// Reads a record file written by `generate`; the sample rate is inferred
/// from the time column.
pub fn load_records(path: &Path) -> Result<Experiment> {
    let parse_err = |line: u64, message: String| Error::Parse { location: format!("{}:{line}", path.display()), message };
    let mut rd = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => io(path, err),
        other => parse_err(1, format!("{other:?}")),
    })?;
    let headers = rd.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "d", "u_G", "y"] {
        return Err(parse_err(1, "expected header t,d,u_G,y".into()));
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (i, rec) in rd.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
            cols[c].push(v);
        }
    }
    if cols[0].len() < 2 {
        return Err(parse_err(1, "record file holds fewer than two samples".into()));
    }
    let fs = 1.0 / (cols[0][1] - cols[0][0]);
    if !(fs.is_finite() && fs > 0.0) {
        return Err(parse_err(2, "time column must be strictly increasing".into()));
    }
    let [_, d, u, y] = cols;
    Ok(Experiment {
        d: TimeRecord::new(d, fs, "d")?,
        u_g: TimeRecord::new(u, fs, "u_G")?,
        y: TimeRecord::new(y, fs, "y")?,
    })
}

/// Files produced by a command, committed together.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn paths(&self) -> Vec<&Path> {
        self.files.iter().map(|(p, _)| p.as_path()).collect()
    }

    /// Writes every file through `<name>.tmp` and renames; on failure the
    /// temporary files written so far are removed.
    pub fn commit(self) -> Result<()> {
        let mut staged: Vec<(PathBuf, &PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, &PathBuf)]| {
            for (tmp, _) in staged {
                let _ = std::fs::remove_file(tmp);
            }
        };
        for (path, bytes) in &self.files {
            let mut tmp = path.clone().into_os_string();
            tmp.push(".tmp");
            let tmp = PathBuf::from(tmp);
            if let Err(e) = std::fs::write(&tmp, bytes) {
                cleanup(&staged);
                return Err(io(path, e));
            }
            staged.push((tmp, path));
        }
        for (tmp, path) in &staged {
            std::fs::rename(tmp, path).map_err(|e| io(path, e))?;
        }
        Ok(())
    }
}
