//! Frequency grids, frozen frequency-response datasets, dataset files and
//! nonparametric estimation from time records.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing normalized frequencies in `[0, pi]` (rad/sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    /// Samples per second; informational (Hz display only). Datasets loaded
    /// from file carry no rate.
    sample_rate: Option<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>, sample_rate: Option<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::invalid("frequency grid is empty"));
        }
        for (k, &w) in omegas.iter().enumerate() {
            if !(0.0..=std::f64::consts::PI).contains(&w) {
                return Err(Error::OutOfRange(format!("grid frequency {w} at index {k} outside [0, pi]")));
            }
        }
        if let Some(k) = omegas.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::invalid(format!(
                "grid frequencies not strictly increasing at index {}",
                k + 1
            )));
        }
        if let Some(fs) = sample_rate {
            if !(fs > 0.0 && fs.is_finite()) {
                return Err(Error::invalid(format!("sample rate must be positive, got {fs}")));
            }
        }
        Ok(Self { omegas, sample_rate })
    }

    /// `n` logarithmically spaced frequencies from `w_min` to `w_max` inclusive.
    pub fn logspace(w_min: f64, w_max: f64, n: usize, sample_rate: Option<f64>) -> Result<Self> {
        if n < 2 || !(w_min > 0.0) || !(w_max > w_min) {
            return Err(Error::invalid("logspace needs n >= 2 and 0 < w_min < w_max"));
        }
        let (l0, l1) = (w_min.ln(), w_max.ln());
        let mut omegas: Vec<f64> = (0..n)
            .map(|k| (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp())
            .collect();
        omegas[0] = w_min;
        omegas[n - 1] = w_max;
        Self::new(omegas, sample_rate)
    }

    /// `n` equally spaced frequencies on `[w_min, w_max]` inclusive.
    pub fn linspace(w_min: f64, w_max: f64, n: usize, sample_rate: Option<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("linspace needs n >= 2"));
        }
        let omegas = (0..n)
            .map(|k| w_min + (w_max - w_min) * k as f64 / (n - 1) as f64)
            .collect();
        Self::new(omegas, sample_rate)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    /// Frequencies in Hz, when a sample rate is known.
    pub fn hz(&self) -> Option<Vec<f64>> {
        self.sample_rate
            .map(|fs| self.omegas.iter().map(|w| w * fs / (2.0 * std::f64::consts::PI)).collect())
    }

    /// Points on the unit circle `e^{i omega_k}`.
    pub fn unit_circle(&self) -> Vec<Complex64> {
        self.omegas.iter().map(|&w| Complex64::from_polar(1.0, w)).collect()
    }
}

/// Operating points `p_tau` inside a closed scheduling interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulingGrid {
    points: Vec<f64>,
    range: (f64, f64),
}

impl SchedulingGrid {
    pub fn new(points: Vec<f64>, range: (f64, f64)) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("scheduling grid is empty"));
        }
        if !(range.0 <= range.1) || !range.0.is_finite() || !range.1.is_finite() {
            return Err(Error::invalid(format!("invalid scheduling range {range:?}")));
        }
        for &p in &points {
            if p < range.0 || p > range.1 {
                return Err(Error::OutOfRange(format!(
                    "operating point {p} outside [{}, {}]",
                    range.0, range.1
                )));
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::invalid(format!("duplicate operating point {}", points[i])));
                }
            }
        }
        Ok(Self { points, range })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, p: f64) -> Option<usize> {
        self.points.iter().position(|&q| q == p)
    }
}

/// Complex response values on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrfResponse {
    values: Vec<Complex64>,
    grid: Arc<FrequencyGrid>,
}

impl FrfResponse {
    pub fn new(values: Vec<Complex64>, grid: Arc<FrequencyGrid>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "response has {} values but grid has {} frequencies",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite response value at index {k}")));
        }
        Ok(Self { values, grid })
    }

    pub fn constant(value: Complex64, grid: Arc<FrequencyGrid>) -> Result<Self> {
        let n = grid.len();
        Self::new(vec![value; n], grid)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &FrfResponse) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Pointwise map keeping the grid.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect(), self.grid.clone())
    }

    /// Maximum pointwise relative deviation `|self - reference| / |reference|`
    /// over grid frequencies selected by `keep`.
    pub fn max_relative_error(&self, reference: &FrfResponse, keep: impl Fn(f64) -> bool) -> f64 {
        self.values
            .iter()
            .zip(reference.values.iter())
            .zip(self.grid.omegas())
            .filter(|(_, &w)| keep(w))
            .map(|((a, b), _)| (a - b).norm() / b.norm())
            .fold(0.0, f64::max)
    }
}

/// Frozen FRF data indexed by operating point and channel label.
#[derive(Clone, Debug, PartialEq)]
pub struct FrfDataset {
    grid: Arc<FrequencyGrid>,
    scheduling: SchedulingGrid,
    channels: Vec<String>,
    /// Key: (operating-point index, channel index).
    entries: BTreeMap<(usize, usize), FrfResponse>,
}

impl FrfDataset {
    /// Builds a dataset from `responses[p_index][channel_index]`.
    pub fn new(
        grid: Arc<FrequencyGrid>,
        scheduling: SchedulingGrid,
        channels: Vec<String>,
        responses: Vec<Vec<FrfResponse>>,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("dataset declares no channels"));
        }
        if responses.len() != scheduling.len() {
            return Err(Error::invalid(format!(
                "{} response groups for {} operating points",
                responses.len(),
                scheduling.len()
            )));
        }
        let mut entries = BTreeMap::new();
        for (pi, group) in responses.into_iter().enumerate() {
            if group.len() != channels.len() {
                return Err(Error::invalid(format!(
                    "operating point {} has {} channels, expected {}",
                    scheduling.points()[pi],
                    group.len(),
                    channels.len()
                )));
            }
            for (ci, r) in group.into_iter().enumerate() {
                if *r.grid() != grid {
                    return Err(Error::GridMismatch(format!(
                        "channel {} at p = {} uses a different grid",
                        channels[ci],
                        scheduling.points()[pi]
                    )));
                }
                entries.insert((pi, ci), FrfResponse { values: r.values, grid: grid.clone() });
            }
        }
        Ok(Self { grid, scheduling, channels, entries })
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn scheduling(&self) -> &SchedulingGrid {
        &self.scheduling
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == label)
    }

    pub fn get(&self, p_index: usize, channel: &str) -> Result<&FrfResponse> {
        let ci = self
            .channel_index(channel)
            .ok_or_else(|| Error::invalid(format!("dataset has no channel {channel:?}")))?;
        self.entries
            .get(&(p_index, ci))
            .ok_or_else(|| Error::invalid(format!("no operating point with index {p_index}")))
    }

    /// Drops the grid's informational sample rate (file formats do not carry it)
    /// or sets a new one.
    pub fn with_sample_rate(mut self, sample_rate: Option<f64>) -> Result<Self> {
        let grid = Arc::new(FrequencyGrid::new(self.grid.omegas.clone(), sample_rate)?);
        for r in self.entries.values_mut() {
            r.grid = grid.clone();
        }
        self.grid = grid;
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    channel: String,
    p: f64,
    omega: f64,
    re: f64,
    im: f64,
}

fn dataset_rows(ds: &FrfDataset) -> Vec<Row> {
    let mut rows = Vec::with_capacity(ds.entries.len() * ds.grid.len());
    for (ci, ch) in ds.channels.iter().enumerate() {
        for (pi, &p) in ds.scheduling.points().iter().enumerate() {
            let r = &ds.entries[&(pi, ci)];
            for (&w, v) in ds.grid.omegas().iter().zip(r.values()) {
                rows.push(Row { channel: ch.clone(), p, omega: w, re: v.re, im: v.im });
            }
        }
    }
    rows
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).map(|e| e.eq_ignore_ascii_case("json")) == Some(true)
}

/// Writes a dataset as CSV (`channel,p,omega,re,im`) or, for a `.json`
/// extension, as a JSON array of records with the same fields.
pub fn save_dataset(ds: &FrfDataset, path: &Path) -> Result<()> {
    if ds.entries.is_empty() {
        return Err(Error::invalid("dataset has no entries to serialize"));
    }
    let rows = dataset_rows(ds);
    if is_json(path) {
        let text = serde_json::to_string_pretty(&rows)
            .map_err(|e| Error::Numerical(format!("JSON encoding failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
        return Ok(());
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in &rows {
        w.serialize(r).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse { location: path.display().to_string(), message: format!("{other:?}") },
    }
}

/// Reads a dataset written by [`save_dataset`] (CSV, or JSON by extension).
///
/// Rows may appear in any order; blocks are keyed by `(channel, p)`. Every
/// block must use the same strictly increasing frequency list and every
/// operating point must be present for every channel.
pub fn load_dataset(path: &Path) -> Result<FrfDataset> {
    let loc = |line: usize| format!("{}:{}", path.display(), line);
    let mut rows: Vec<(usize, Row)> = Vec::new();
    if is_json(path) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: Vec<Row> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
            message: e.to_string(),
        })?;
        rows.extend(parsed.into_iter().enumerate().map(|(i, r)| (i + 1, r)));
    } else {
        let mut rd = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
        let headers = rd.headers().map_err(|e| csv_io(path, e))?.clone();
        let want = ["channel", "p", "omega", "re", "im"];
        if headers.iter().collect::<Vec<_>>() != want {
            return Err(Error::Parse {
                location: loc(1),
                message: format!("expected header {}, found {:?}", want.join(","), headers),
            });
        }
        for (i, rec) in rd.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let r = rec.map_err(|e| Error::Parse { location: loc(line), message: e.to_string() })?;
            rows.push((line, r));
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse { location: loc(1), message: "no data rows".into() });
    }

    let mut channels: Vec<String> = Vec::new();
    let mut points: Vec<f64> = Vec::new();
    // (channel idx, point idx) -> list of (line, omega, value)
    let mut blocks: BTreeMap<(usize, usize), Vec<(usize, f64, Complex64)>> = BTreeMap::new();
    for (line, r) in rows {
        if !(r.p.is_finite() && r.omega.is_finite() && r.re.is_finite() && r.im.is_finite()) {
            return Err(Error::Parse { location: loc(line), message: "non-finite field".into() });
        }
        let ci = match channels.iter().position(|c| *c == r.channel) {
            Some(i) => i,
            None => {
                channels.push(r.channel.clone());
                channels.len() - 1
            }
        };
        let pi = match points.iter().position(|&q| q == r.p) {
            Some(i) => i,
            None => {
                points.push(r.p);
                points.len() - 1
            }
        };
        blocks.entry((ci, pi)).or_default().push((line, r.omega, Complex64::new(r.re, r.im)));
    }

    let mut reference: Option<(String, f64, Vec<f64>)> = None;
    for (&(ci, pi), block) in &blocks {
        for pair in block.windows(2) {
            if pair[1].1 <= pair[0].1 {
                return Err(Error::Parse {
                    location: loc(pair[1].0),
                    message: format!(
                        "non-monotone frequencies in block channel={} p={}",
                        channels[ci], points[pi]
                    ),
                });
            }
        }
        let omegas: Vec<f64> = block.iter().map(|b| b.1).collect();
        match &reference {
            None => reference = Some((channels[ci].clone(), points[pi], omegas)),
            Some((rc, rp, ro)) => {
                if *ro != omegas {
                    return Err(Error::GridMismatch(format!(
                        "{}: block channel={} p={} differs from block channel={} p={}",
                        loc(block[0].0),
                        channels[ci],
                        points[pi],
                        rc,
                        rp
                    )));
                }
            }
        }
    }
    let omegas = reference.map(|r| r.2).unwrap_or_default();
    let grid = Arc::new(FrequencyGrid::new(omegas, None).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?);

    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scheduling = SchedulingGrid::new(points.clone(), (lo, hi))?;
    let mut responses = Vec::with_capacity(points.len());
    for pi in 0..points.len() {
        let mut group = Vec::with_capacity(channels.len());
        for ci in 0..channels.len() {
            let block = blocks.get(&(ci, pi)).ok_or_else(|| {
                Error::GridMismatch(format!(
                    "{}: channel {} missing operating point {}",
                    path.display(),
                    channels[ci],
                    points[pi]
                ))
            })?;
            group.push(FrfResponse::new(block.iter().map(|b| b.2).collect(), grid.clone())?);
        }
        responses.push(group);
    }
    FrfDataset::new(grid, scheduling, channels, responses)
}

/// A sampled real signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeRecord {
    samples: Vec<f64>,
    sample_rate: f64,
    label: String,
}

impl TimeRecord {
    pub fn new(samples: Vec<f64>, sample_rate: f64, label: impl Into<String>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {k}")));
        }
        Ok(Self { samples, sample_rate, label: label.into() })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // Periodic Hann: exact partition of unity under 50% overlap.
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Empirical transfer function estimate `sum Y conj(U) / sum |U|^2`.
///
/// The record is split into `segments` blocks of length `L = n / segments`.
/// With more than one segment, windows of length `L` advance by `L / 2`
/// (50% overlap), giving `2 segments - 1` windows. Bin estimates are
/// interpolated linearly (real and imaginary parts separately) onto `grid`.
pub fn etfe_estimate(
    input: &TimeRecord,
    output: &TimeRecord,
    grid: &Arc<FrequencyGrid>,
    window: Window,
    segments: usize,
) -> Result<FrfResponse> {
    let n = input.len();
    if output.len() != n {
        return Err(Error::invalid(format!("record lengths differ: {} vs {}", n, output.len())));
    }
    if input.sample_rate() != output.sample_rate() {
        return Err(Error::invalid("record sample rates differ"));
    }
    if segments == 0 || n == 0 || n % segments != 0 {
        return Err(Error::invalid(format!(
            "record length {n} not divisible into {segments} segments"
        )));
    }
    let len = n / segments;
    if len < 2 {
        return Err(Error::invalid("segments shorter than two samples"));
    }
    let hop = if segments > 1 { len / 2 } else { len };
    let n_windows = if segments > 1 { (n - len) / hop + 1 } else { 1 };
    let win = window.coefficients(len);
    let n_bins = len / 2 + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);
    let mut syu = vec![Complex64::new(0.0, 0.0); n_bins];
    let mut suu = vec![0.0; n_bins];
    let mut bu = vec![Complex64::new(0.0, 0.0); len];
    let mut by = vec![Complex64::new(0.0, 0.0); len];
    for s in 0..n_windows {
        let off = s * hop;
        for k in 0..len {
            bu[k] = Complex64::new(input.samples()[off + k] * win[k], 0.0);
            by[k] = Complex64::new(output.samples()[off + k] * win[k], 0.0);
        }
        fft.process(&mut bu);
        fft.process(&mut by);
        for k in 0..n_bins {
            syu[k] += by[k] * bu[k].conj();
            suu[k] += bu[k].norm_sqr();
        }
    }
    let peak = suu.iter().copied().fold(0.0, f64::max);
    let floor = peak * 1e-24;
    let bin_w = 2.0 * std::f64::consts::PI / len as f64;
    let excited = |k: usize| suu[k] > floor && suu[k] > 0.0;
    let ratio = |k: usize| syu[k] / suu[k];

    let mut values = Vec::with_capacity(grid.len());
    let mut missing = Vec::new();
    let last_bin = (n_bins - 1) as f64 * bin_w;
    for &w in grid.omegas() {
        if w > last_bin + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "requested frequency {w} beyond highest DFT bin {last_bin}"
            )));
        }
        let pos = w / bin_w;
        let k0 = (pos.floor() as usize).min(n_bins - 1);
        let frac = pos - k0 as f64;
        if frac.abs() < 1e-9 || k0 + 1 >= n_bins {
            if !excited(k0) {
                missing.push(w);
                continue;
            }
            values.push(ratio(k0));
        } else {
            if !excited(k0) || !excited(k0 + 1) {
                missing.push(w);
                continue;
            }
            values.push(ratio(k0) * (1.0 - frac) + ratio(k0 + 1) * frac);
        }
    }
    if !missing.is_empty() {
        return Err(Error::NoExcitation(missing));
    }
    FrfResponse::new(values, grid.clone())
}

/// Default threshold on `|S|` below which plant recovery is refused.
pub const DEFAULT_SENSITIVITY_THRESHOLD: f64 = 1e-8;

/// Plant response `proc_sens / sens` from closed-loop estimates.
pub fn closed_loop_to_plant(sens: &FrfResponse, proc_sens: &FrfResponse) -> Result<FrfResponse> {
    closed_loop_to_plant_with_threshold(sens, proc_sens, DEFAULT_SENSITIVITY_THRESHOLD)
}

pub fn closed_loop_to_plant_with_threshold(
    sens: &FrfResponse,
    proc_sens: &FrfResponse,
    threshold: f64,
) -> Result<FrfResponse> {
    if !sens.same_grid(proc_sens) {
        return Err(Error::GridMismatch("sensitivity and process sensitivity grids differ".into()));
    }
    let bad: Vec<f64> = sens
        .values()
        .iter()
        .zip(sens.grid().omegas())
        .filter(|(v, _)| v.norm() <= threshold)
        .map(|(_, &w)| w)
        .collect();
    if !bad.is_empty() {
        return Err(Error::SmallSensitivity(bad));
    }
    FrfResponse::new(
        proc_sens.values().iter().zip(sens.values()).map(|(g, s)| g / s).collect(),
        sens.grid().clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![], None).is_err());
        assert!(FrequencyGrid::new(vec![0.1, 0.1], None).is_err());
        assert!(FrequencyGrid::new(vec![0.1, 4.0], None).is_err());
        let g = FrequencyGrid::logspace(1e-3, std::f64::consts::PI, 10, Some(200.0)).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g.omegas()[9], std::f64::consts::PI);
    }

    #[test]
    fn scheduling_validation() {
        assert!(SchedulingGrid::new(vec![30.0, 30.0], (30.0, 50.0)).is_err());
        assert!(SchedulingGrid::new(vec![60.0], (30.0, 50.0)).is_err());
        assert!(SchedulingGrid::new(vec![30.0, 40.0, 50.0], (30.0, 50.0)).is_ok());
    }

    #[test]
    fn hann_periodic_partition_of_unity() {
        let w = Window::Hann.coefficients(8);
        for k in 0..4 {
            assert!((w[k] + w[k + 4] - 1.0).abs() < 1e-15);
        }
    }
}
