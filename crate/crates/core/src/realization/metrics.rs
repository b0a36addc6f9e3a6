use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::Trace;

/// Tracking metrics of a closed-loop trace. Overshoot and settling time are
/// the worst values over all reference edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub l2_error: f64,
    pub linf_error: f64,
    pub overshoot_pct: f64,
    pub settling_s: f64,
}

/// Edge indices with their direction (rising or not), found by two-level
/// hysteresis at 25% and 75% of the reference span. The signal is taken to
/// be zero before the first sample.
fn edges(r: &[f64]) -> Vec<(usize, bool)> {
    let lo = r.iter().copied().fold(0.0_f64, f64::min);
    let hi = r.iter().copied().fold(0.0_f64, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return Vec::new();
    }
    let (t_lo, t_hi) = (lo + 0.25 * span, lo + 0.75 * span);
    let mut high = 0.0 >= t_hi;
    let mut out = Vec::new();
    for (k, &v) in r.iter().enumerate() {
        if !high && v >= t_hi {
            high = true;
            out.push((k, true));
        } else if high && v <= t_lo {
            high = false;
            out.push((k, false));
        }
    }
    out
}

/// `l2` and `linf` norms of the tracking error, and per-edge overshoot (%)
/// and 2% settling time (s), maximized over the edges. Settling is the time
/// after the edge until `|e|` stays within 2% of the step size.
pub fn step_metrics(trace: &Trace) -> Result<StepMetrics> {
    let n = trace.len();
    if n == 0 {
        return Err(Error::invalid("empty trace"));
    }
    let l2_error = trace.e.iter().map(|e| e * e).sum::<f64>().sqrt();
    let linf_error = trace.e.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let ks = edges(&trace.r);
    if ks.is_empty() {
        return Err(Error::invalid("no step edges found in the reference"));
    }
    let mut overshoot_pct: f64 = 0.0;
    let mut settling_s: f64 = 0.0;
    for (j, &(k0, rising)) in ks.iter().enumerate() {
        let end = ks.get(j + 1).map_or(n, |e| e.0);
        // Settled levels: the extreme of this segment in the edge direction
        // and the opposite extreme of the previous one (the implicit zero
        // counts for the first edge). For sharp steps these are the plateaus.
        let seg_r = &trace.r[k0..end];
        let prev = if j == 0 { 0 } else { ks[j - 1].0 };
        let mut before_r = trace.r[prev..k0].to_vec();
        if j == 0 {
            before_r.push(0.0);
        }
        let (target, before) = if rising {
            (
                seg_r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                before_r.iter().copied().fold(f64::INFINITY, f64::min),
            )
        } else {
            (
                seg_r.iter().copied().fold(f64::INFINITY, f64::min),
                before_r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let step = target - before;
        if step == 0.0 {
            continue;
        }
        let seg = &trace.y[k0..end];
        let peak = seg.iter().map(|y| (y - target) * step.signum()).fold(0.0_f64, f64::max);
        overshoot_pct = overshoot_pct.max(100.0 * peak / step.abs());
        let band = 0.02 * step.abs();
        if let Some(last) = trace.e[k0..end].iter().rposition(|e| e.abs() > band) {
            settling_s = settling_s.max((last + 1) as f64 / trace.sample_rate);
        }
    }
    Ok(StepMetrics { l2_error, linf_error, overshoot_pct, settling_s })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(r: Vec<f64>, y: Vec<f64>) -> Trace {
        let n = r.len();
        let e = r.iter().zip(&y).map(|(a, b)| a - b).collect();
        Trace { r, e, u: vec![0.0; n], d: vec![0.0; n], y, p: vec![0.0; n], sample_rate: 100.0 }
    }

    #[test]
    fn perfect_tracking_has_zero_metrics() {
        let r: Vec<f64> = (0..200).map(|k| if k >= 20 { 1.0 } else { 0.0 }).collect();
        let m = step_metrics(&trace(r.clone(), r)).unwrap();
        assert_eq!(m, StepMetrics { l2_error: 0.0, linf_error: 0.0, overshoot_pct: 0.0, settling_s: 0.0 });
    }

    #[test]
    fn constant_reference_has_no_edges() {
        assert!(step_metrics(&trace(vec![0.0; 10], vec![0.0; 10])).is_err());
    }

    #[test]
    fn down_and_up_edges_are_found() {
        let r: Vec<f64> = (0..40).map(|k| if (10..20).contains(&k) || k >= 30 { 2.0 } else { 0.0 }).collect();
        assert_eq!(edges(&r), vec![(10, true), (20, false), (30, true)]);
    }
}
