use num_complex::Complex64;

use crate::error::{Error, Result};

/// Fuzzy c-means settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterOptions {
    /// Fuzziness exponent, must exceed 1.
    pub fuzziness: f64,
    /// Stop once no center moves by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self { fuzziness: 2.0, tolerance: 1e-9, max_iterations: 500 }
    }
}

/// Fuzzy c-means centers of complex pole samples.
pub fn cluster_poles(samples: &[Complex64], c: usize, fuzziness: f64) -> Result<Vec<Complex64>> {
    cluster_poles_with(samples, c, ClusterOptions { fuzziness, ..ClusterOptions::default() })
}

/// Fuzzy c-means with deterministic farthest-point initialization.
///
/// Centers that coincide (within `1e-9`) are merged, so identical samples
/// yield a single center whatever `c` is.
pub fn cluster_poles_with(samples: &[Complex64], c: usize, opts: ClusterOptions) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to cluster"));
    }
    if c == 0 || c > samples.len() {
        return Err(Error::invalid(format!("cluster count {c} must be in 1..={}", samples.len())));
    }
    if !(opts.fuzziness > 1.0) {
        return Err(Error::invalid("fuzziness exponent must exceed 1"));
    }
    if let Some(s) = samples.iter().find(|s| !(s.norm() < 1.0)) {
        return Err(Error::OutOfRange(format!("sample {s} not inside the unit disk")));
    }

    let mut centers = vec![samples[0]];
    while centers.len() < c {
        let (idx, dist) = samples
            .iter()
            .enumerate()
            .map(|(j, s)| (j, centers.iter().map(|v| (s - v).norm()).fold(f64::INFINITY, f64::min)))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if dist <= 0.0 {
            break;
        }
        centers.push(samples[idx]);
    }

    let expo = 2.0 / (opts.fuzziness - 1.0);
    let k = centers.len();
    let mut u = vec![0.0; k];
    for _ in 0..opts.max_iterations {
        let mut num = vec![Complex64::new(0.0, 0.0); k];
        let mut den = vec![0.0; k];
        for s in samples {
            let d: Vec<f64> = centers.iter().map(|v| (s - v).norm()).collect();
            let zero: Vec<usize> = (0..k).filter(|&i| d[i] <= 1e-300).collect();
            if zero.is_empty() {
                for i in 0..k {
                    u[i] = 1.0 / (0..k).map(|l| (d[i] / d[l]).powf(expo)).sum::<f64>();
                }
            } else {
                u.iter_mut().for_each(|v| *v = 0.0);
                for &i in &zero {
                    u[i] = 1.0 / zero.len() as f64;
                }
            }
            for i in 0..k {
                let w = u[i].powf(opts.fuzziness);
                num[i] += s * w;
                den[i] += w;
            }
        }
        let mut shift: f64 = 0.0;
        for i in 0..k {
            if den[i] > 0.0 {
                let next = num[i] / den[i];
                shift = shift.max((next - centers[i]).norm());
                centers[i] = next;
            }
        }
        if shift <= opts.tolerance {
            break;
        }
    }

    let mut merged: Vec<Complex64> = Vec::with_capacity(k);
    for v in centers {
        if merged.iter().all(|m| (m - v).norm() > 1e-9) {
            merged.push(v);
        }
    }
    Ok(merged)
}
