//! Tracking, transient, constraint and estimator metrics computed from a
//! trace. Flows are reported in µl/s.

use serde::Serialize;

use super::trace::{Record, Trace};
use crate::units::si_to_ul_s;
use crate::LINES;

/// Relative tolerance of the input-bound audit.
pub const AUDIT_REL_TOL: f64 = 1e-6;
/// A reference level must hold this many periods to count as a step.
pub const MIN_STEP_PERIODS: usize = 10;
/// Fraction of the run, at the end, used for steady estimator statistics.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineMetrics {
    /// RMS of measured minus reference over the run (µl/s).
    pub rmse: f64,
    /// Longest time to reach 95% of a reference step (s).
    pub response_time: Option<f64>,
    /// Longest time after a step until the true flow stays within 1% of the
    /// reference for the rest of that level (s).
    pub settling_time: Option<f64>,
    /// Largest overshoot past a step target, in % of the step size.
    pub overshoot_pct: f64,
    /// Largest |true − reference| / reference over the last period of each
    /// step level, where the flow should have settled.
    pub final_error_rel: Option<f64>,
    /// Mean and standard deviation of estimated minus true flow over the
    /// final part of the run (µl/s).
    pub estimate_bias: f64,
    pub estimate_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub lines: [LineMetrics; LINES],
    /// Applied pressures outside their absolute bounds.
    pub input_violations: usize,
    /// Applied increments larger than the rate bound allows.
    pub rate_violations: usize,
    /// True flows outside their bounds by more than 1% of the bound
    /// magnitude (at least 1 µl/s).
    pub output_violations: usize,
    pub softened_steps: usize,
    pub held_steps: usize,
}

impl MetricsReport {
    pub fn violations(&self) -> usize {
        self.input_violations + self.rate_violations
    }

    pub fn rmse(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.lines[i].rmse)
    }
}

/// RMS of `a − b` over equal-length slices.
pub fn rms_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rms_error needs equal lengths");
    if a.is_empty() {
        return 0.0;
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// A step of the reference: the level holds on `start..end`, coming from `from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSegment {
    pub start: usize,
    pub end: usize,
    pub from: f64,
    pub to: f64,
}

/// Maximal constant runs of `refs` that follow a jump and last at least
/// `MIN_STEP_PERIODS` samples.
pub fn step_segments(refs: &[f64]) -> Vec<StepSegment> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=refs.len() {
        if k == refs.len() || refs[k] != refs[start] {
            if start > 0 && k - start >= MIN_STEP_PERIODS && refs[start] != refs[start - 1] {
                out.push(StepSegment {
                    start,
                    end: k,
                    from: refs[start - 1],
                    to: refs[start],
                });
            }
            start = k;
        }
    }
    out
}

fn column(records: &[Record], f: impl Fn(&Record) -> f64) -> Vec<f64> {
    records.iter().map(f).collect()
}

/// Transient metrics of a step level stop `guard` periods before the next
/// change, where a previewing controller starts anticipating it.
fn line_metrics(records: &[Record], i: usize, period: f64, guard: usize) -> LineMetrics {
    let refs = column(records, |r| si_to_ul_s(r.refs[i]));
    let meas = column(records, |r| si_to_ul_s(r.measured_flows[i]));
    let truth = column(records, |r| si_to_ul_s(r.true_flows[i]));
    let est = column(records, |r| si_to_ul_s(r.estimated_flows[i]));

    let mut response: Option<f64> = None;
    let mut settling: Option<f64> = None;
    let mut final_error: Option<f64> = None;
    let mut overshoot: f64 = 0.0;
    for mut seg in step_segments(&refs) {
        if seg.end < refs.len() {
            seg.end = seg.end.saturating_sub(guard).max(seg.start + 1);
        }
        let delta = seg.to - seg.from;
        let progress = |k: usize| (truth[k] - seg.from) / delta;
        if let Some(k) = (seg.start..seg.end).find(|&k| progress(k) >= 0.95) {
            let t = (k - seg.start) as f64 * period;
            response = Some(response.map_or(t, |r| r.max(t)));
        } else {
            response = Some(f64::INFINITY);
        }
        let peak = (seg.start..seg.end).map(progress).fold(f64::NEG_INFINITY, f64::max);
        overshoot = overshoot.max(100.0 * (peak - 1.0));
        let band = 0.01 * seg.to.abs().max(1e-12);
        let last_out = (seg.start..seg.end).rev().find(|&k| (truth[k] - seg.to).abs() > band);
        let t = match last_out {
            None => 0.0,
            Some(k) if k + 1 == seg.end => f64::INFINITY,
            Some(k) => (k + 1 - seg.start) as f64 * period,
        };
        settling = Some(settling.map_or(t, |s| s.max(t)));
        if seg.to != 0.0 {
            let e = (truth[seg.end - 1] - seg.to).abs() / seg.to.abs();
            final_error = Some(final_error.map_or(e, |f| f.max(e)));
        }
    }

    let n = records.len();
    let tail = (n - (n as f64 * TAIL_FRACTION).ceil() as usize).min(n.saturating_sub(1));
    let diff: Vec<f64> = (tail..n).map(|k| est[k] - truth[k]).collect();
    let m = diff.len().max(1) as f64;
    let bias = diff.iter().sum::<f64>() / m;
    let var = diff.iter().map(|d| (d - bias) * (d - bias)).sum::<f64>() / m;

    LineMetrics {
        rmse: rms_error(&meas, &refs),
        response_time: response,
        settling_time: settling,
        overshoot_pct: overshoot.max(0.0),
        final_error_rel: final_error,
        estimate_bias: bias,
        estimate_std: var.sqrt(),
    }
}

fn exceeds(v: f64, lo: f64, hi: f64) -> bool {
    let tol = |b: f64| AUDIT_REL_TOL * b.abs().max(1.0);
    v < lo - tol(lo) || v > hi + tol(hi)
}

pub fn compute(trace: &Trace) -> MetricsReport {
    let s = &trace.scenario;
    let limits = s.constraints.resolve();
    let records = &trace.records;
    let guard = if s.tuning.reference_preview { s.tuning.horizon } else { 0 };
    let lines = std::array::from_fn(|i| line_metrics(records, i, s.sample_period_s, guard));

    let mut input = 0;
    let mut rate = 0;
    let mut output = 0;
    let mut prev = [0.0; LINES];
    for r in records {
        for i in 0..LINES {
            if exceeds(r.applied[i], limits.u_min[i], limits.u_max[i]) {
                input += 1;
            }
            let du_max = limits.du_rate[i] * s.sample_period_s;
            if exceeds(r.applied[i] - prev[i], -du_max, du_max) {
                rate += 1;
            }
            let scale = [limits.y_min[i], limits.y_max[i]]
                .into_iter()
                .filter(|b| b.is_finite())
                .fold(crate::units::UL_PER_S, |a, b| a.max(b.abs()));
            let q = r.true_flows[i];
            if q < limits.y_min[i] - 0.01 * scale || q > limits.y_max[i] + 0.01 * scale {
                output += 1;
            }
        }
        prev = r.applied;
    }
    MetricsReport {
        lines,
        input_violations: input,
        rate_violations: rate,
        output_violations: output,
        softened_steps: records.iter().filter(|r| r.status == "softened").count(),
        held_steps: records.iter().filter(|r| r.status == "held").count(),
    }
}
