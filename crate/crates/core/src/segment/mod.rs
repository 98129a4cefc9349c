//! Changepoint detection and semantic filtering.
//!
//! Detection normalizes each of the 16 kinematic channels by its maximum
//! absolute value, low-passes it, estimates the second derivative with a
//! Savitzky–Golay filter and keeps local maxima of `|k''|` above a fraction
//! `alpha` of that channel's largest peak. Filtering then walks the sorted
//! candidates once and drops a candidate when it is closer than `min_gap` to
//! the previous candidate, or when the scene fluents at both are identical.
//! The "previous candidate" is updated on every step, kept or not.

pub mod filter;
pub mod savgol;

use serde::{Deserialize, Serialize};

pub use filter::{default_padlen, lowpass_series, Biquad};
pub use savgol::{savgol_coefficients, sg_second_derivative};

use crate::error::{Error, Result};
use crate::fluent::{compute_fluents, FluentSet};
use crate::trace::{kinematic_matrix, ExecutionTrace, FeatureRow, NUM_FEATURES};

/// Second-derivative magnitude (normalized units / s^2) below which a
/// channel is treated as motionless; keeps round-off ripple on constant
/// channels from passing the relative threshold.
pub const FLAT_CHANNEL_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    /// Peak threshold as a fraction of the channel's largest peak.
    pub alpha: f64,
    pub sg_window: usize,
    pub sg_polyorder: usize,
    /// Low-pass cutoff in Hz.
    pub lowpass_cutoff: f64,
    /// Minimum spacing between consecutive candidates, seconds.
    pub min_gap: f64,
    pub use_reachable_in_filtering: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            alpha: 0.20,
            sg_window: 21,
            sg_polyorder: 3,
            lowpass_cutoff: 1.5,
            min_gap: 1.0,
            use_reachable_in_filtering: true,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} must lie in (0, 1)", self.alpha));
        }
        if self.sg_window % 2 == 0 || self.sg_window <= self.sg_polyorder + 1 {
            return bad(format!(
                "sg_window {} must be odd and greater than sg_polyorder + 1",
                self.sg_window
            ));
        }
        if self.sg_polyorder < 2 {
            return bad("sg_polyorder must be at least 2 for a second derivative".into());
        }
        if !(self.min_gap > 0.0) {
            return bad(format!("min_gap {} must be positive", self.min_gap));
        }
        if !(self.lowpass_cutoff > 0.0) {
            return bad(format!("lowpass_cutoff {} must be positive", self.lowpass_cutoff));
        }
        Ok(())
    }

    /// Validation that depends on the trace: Nyquist limit and length.
    fn check_trace(&self, trace: &ExecutionTrace) -> Result<()> {
        self.validate()?;
        if self.lowpass_cutoff >= trace.sample_rate / 2.0 {
            return Err(Error::InvalidConfig(format!(
                "lowpass_cutoff {} Hz must be below Nyquist ({} Hz)",
                self.lowpass_cutoff,
                trace.sample_rate / 2.0
            )));
        }
        let required = 2 * self.sg_window;
        if trace.len() < required {
            return Err(Error::TraceTooShort {
                frames: trace.len(),
                required,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Changepoint {
    pub index: usize,
    pub t: f64,
    /// Kinematic channel (0..16) whose peak produced the candidate; `None`
    /// for the implicit trace-edge boundaries.
    pub source_feature: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Changepoint,
    pub end: Changepoint,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end.t - self.start.t
    }

    /// Number of frames covered, both ends inclusive.
    pub fn samples(&self) -> usize {
        self.end.index - self.start.index + 1
    }
}

/// On-disk segment record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub start_t: f64,
    pub end_t: f64,
    pub start_idx: usize,
    pub end_idx: usize,
}

impl From<&Segment> for SegmentRecord {
    fn from(s: &Segment) -> Self {
        SegmentRecord {
            start_t: s.start.t,
            end_t: s.end.t,
            start_idx: s.start.index,
            end_idx: s.end.index,
        }
    }
}

/// Divides each column by its maximum absolute value; all-zero columns are
/// returned unchanged.
pub fn normalize_features(k: &[FeatureRow]) -> Vec<FeatureRow> {
    let scales = column_scales(k);
    k.iter()
        .map(|row| {
            let mut out = *row;
            for (v, s) in out.iter_mut().zip(&scales) {
                *v /= s;
            }
            out
        })
        .collect()
}

/// Per-column divisor used by [`normalize_features`] (1 for zero columns).
pub fn column_scales(k: &[FeatureRow]) -> [f64; NUM_FEATURES] {
    let mut scales = [0.0_f64; NUM_FEATURES];
    for row in k {
        for (s, v) in scales.iter_mut().zip(row) {
            *s = s.max(v.abs());
        }
    }
    scales.map(|s| if s > 0.0 { s } else { 1.0 })
}

pub fn column(k: &[FeatureRow], c: usize) -> Vec<f64> {
    k.iter().map(|r| r[c]).collect()
}

/// Zero-phase low-pass applied independently to every column.
pub fn lowpass(k: &[FeatureRow], cutoff: f64, sample_rate: f64) -> Vec<FeatureRow> {
    let mut out = k.to_vec();
    for c in 0..NUM_FEATURES {
        let y = lowpass_series(&column(k, c), cutoff, sample_rate);
        for (row, v) in out.iter_mut().zip(y) {
            row[c] = v;
        }
    }
    out
}

/// Strict local maxima over three samples. A plateau counts as one peak at
/// its leftmost index when the values on both sides are lower.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i + 1;
            while j < n && x[j] == x[i] {
                j += 1;
            }
            if j < n && x[j] < x[i] {
                peaks.push(i);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Peaks of `|d2|` above `alpha` times the largest peak.
pub fn threshold_peaks(d2: &[f64], alpha: f64) -> Vec<usize> {
    let mag: Vec<f64> = d2.iter().map(|v| v.abs()).collect();
    let peaks = local_maxima(&mag);
    let max = peaks.iter().map(|&p| mag[p]).fold(0.0_f64, f64::max);
    if max <= FLAT_CHANNEL_EPS {
        return Vec::new();
    }
    peaks.into_iter().filter(|&p| mag[p] > alpha * max).collect()
}

/// Normalized, low-passed second derivative of every channel.
pub fn second_derivatives(trace: &ExecutionTrace, cfg: &SegmenterConfig) -> Result<Vec<Vec<f64>>> {
    let k = lowpass(
        &normalize_features(&kinematic_matrix(trace)),
        cfg.lowpass_cutoff,
        trace.sample_rate,
    );
    (0..NUM_FEATURES)
        .map(|c| sg_second_derivative(&column(&k, c), cfg.sg_window, cfg.sg_polyorder, trace.dt()))
        .collect()
}

/// Surviving peak indices for each channel separately.
pub fn detect_per_feature(trace: &ExecutionTrace, cfg: &SegmenterConfig) -> Result<Vec<Vec<usize>>> {
    cfg.check_trace(trace)?;
    Ok(second_derivatives(trace, cfg)?
        .iter()
        .map(|d2| threshold_peaks(d2, cfg.alpha))
        .collect())
}

/// Candidate changepoints: union of per-channel peaks, sorted, with exact
/// index duplicates merged (the lowest channel id is kept as the source).
pub fn detect_changepoints(trace: &ExecutionTrace, cfg: &SegmenterConfig) -> Result<Vec<Changepoint>> {
    let per_feature = detect_per_feature(trace, cfg)?;
    let mut all: Vec<(usize, usize)> = per_feature
        .iter()
        .enumerate()
        .flat_map(|(f, peaks)| peaks.iter().map(move |&p| (p, f)))
        .collect();
    all.sort_unstable();
    all.dedup_by_key(|(index, _)| *index);
    Ok(all
        .into_iter()
        .map(|(index, f)| Changepoint {
            index,
            t: trace.frames[index].t,
            source_feature: Some(f),
        })
        .collect())
}

fn fluents_for_filtering(trace: &ExecutionTrace, index: usize, cfg: &SegmenterConfig) -> FluentSet {
    let set = compute_fluents(&trace.frames[index]);
    if cfg.use_reachable_in_filtering {
        set
    } else {
        set.without_reachable()
    }
}

/// Single pass over sorted candidates: a candidate is removed when its
/// fluent set equals the previous candidate's, or when it lies less than
/// `min_gap` after it. The previous candidate advances every iteration,
/// whether or not the current one was kept. The reference starts at trace
/// time 0 with an empty fluent set.
pub fn filter_changepoints(
    trace: &ExecutionTrace,
    candidates: &[Changepoint],
    cfg: &SegmenterConfig,
) -> Vec<Changepoint> {
    let mut fluents = FluentSet::new();
    let mut prev_index = 0usize;
    let mut kept = Vec::new();
    for c in candidates {
        let prev_fluents = std::mem::replace(&mut fluents, fluents_for_filtering(trace, c.index, cfg));
        let gap = c.index.saturating_sub(prev_index) as f64 / trace.sample_rate;
        if !(fluents == prev_fluents || gap < cfg.min_gap) {
            kept.push(*c);
        }
        prev_index = c.index;
    }
    kept
}

/// Tiles the trace with segments between consecutive boundaries, adding the
/// first and last frames as implicit boundaries.
pub fn segments_from_changepoints(trace: &ExecutionTrace, changepoints: &[Changepoint]) -> Vec<Segment> {
    let last = trace.len() - 1;
    let edge = |index: usize| Changepoint {
        index,
        t: trace.frames[index].t,
        source_feature: None,
    };
    let mut bounds = vec![edge(0)];
    bounds.extend(changepoints.iter().filter(|c| c.index > 0 && c.index < last).copied());
    bounds.push(edge(last));
    bounds.dedup_by_key(|c| c.index);
    bounds
        .windows(2)
        .map(|w| Segment {
            start: w[0],
            end: w[1],
        })
        .collect()
}

/// Full segmentation: detection, filtering, tiling.
pub fn segment(trace: &ExecutionTrace, cfg: &SegmenterConfig) -> Result<Vec<Segment>> {
    let candidates = detect_changepoints(trace, cfg)?;
    let kept = filter_changepoints(trace, &candidates, cfg);
    Ok(segments_from_changepoints(trace, &kept))
}

pub fn segment_records(segments: &[Segment]) -> Vec<SegmentRecord> {
    segments.iter().map(SegmentRecord::from).collect()
}
