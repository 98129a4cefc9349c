//! Segmentation and classification scoring against annotations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{KChoice, MatchingMode, PipelineConfig};
use crate::error::{Error, Result};
use crate::features::{build_all, SegmentFeatures};
use crate::knn::{choose_k, context_for, knn_retrieve, FeatureMask, RetrievalSet};
use crate::segment::{segment, Segment};
use crate::trace::{Action, Annotation, ExecutionTrace};

/// Closed time interval in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Interval { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

impl From<&Segment> for Interval {
    fn from(s: &Segment) -> Self {
        Interval::new(s.start.t, s.end.t)
    }
}

impl From<&Annotation> for Interval {
    fn from(a: &Annotation) -> Self {
        Interval::new(a.start, a.end)
    }
}

/// Fraction of `truth` covered by `identified`.
pub fn matching_score(identified: Interval, truth: Interval) -> Result<f64> {
    if !(truth.len() > 0.0) {
        return Err(Error::ZeroLengthTruth);
    }
    Ok(identified.overlap(&truth) / truth.len())
}

/// For each truth interval, the identified interval with the largest overlap
/// (earliest on ties), or `None` when nothing overlaps.
pub fn match_segments(identified: &[Interval], truth: &[Interval]) -> Vec<Option<usize>> {
    truth
        .iter()
        .map(|g| {
            let mut best: Option<(usize, f64)> = None;
            for (i, s) in identified.iter().enumerate() {
                let o = s.overlap(g);
                if o > 0.0 && best.is_none_or(|(_, b)| o > b) {
                    best = Some((i, o));
                }
            }
            best.map(|(i, _)| i)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub p_size: usize,
    pub n_occ: usize,
}

/// Precision, recall and F1 of the P set for `action`, where `labels[id]` is
/// the ground-truth class of segment `id` and P is the retrieval prefix of
/// length `n_occ` extended over ties.
pub fn precision_recall_f1(retrieval: &RetrievalSet, labels: &[Option<Action>], action: Action) -> Result<Prf> {
    let n_occ = labels.iter().filter(|l| **l == Some(action)).count();
    if n_occ == 0 {
        return Err(Error::MissingAction(action.as_str().into()));
    }
    let p = retrieval.p_set(n_occ);
    let tp = p
        .iter()
        .filter(|(id, _)| labels.get(*id).copied().flatten() == Some(action))
        .count();
    Ok(prf_from_counts(tp, p.len(), n_occ))
}

pub fn prf_from_counts(tp: usize, p_size: usize, n_occ: usize) -> Prf {
    let precision = if p_size == 0 { 0.0 } else { tp as f64 / p_size as f64 };
    let recall = if n_occ == 0 { 0.0 } else { tp as f64 / n_occ as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1, tp, p_size, n_occ }
}

/// One annotated action occurrence and its best identified segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub trace: usize,
    pub annotation: usize,
    pub action: Action,
    /// Global id of the matched segment.
    pub segment: Option<usize>,
    pub overlap: f64,
    pub truth_len: f64,
    pub score: f64,
}

/// Segments, features and labels for a set of traces, ready for retrieval.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    /// `(trace index, segment)` in global id order.
    pub segments: Vec<(usize, Segment)>,
    pub features: Vec<SegmentFeatures>,
    /// Class of the annotation overlapping each segment most, if any.
    pub labels: Vec<Option<Action>>,
    pub occurrences: Vec<Occurrence>,
}

impl PreparedDataset {
    /// Annotated classes in canonical order.
    pub fn classes(&self) -> Vec<Action> {
        Action::ALL
            .into_iter()
            .filter(|a| self.occurrences.iter().any(|o| o.action == *a))
            .collect()
    }

    pub fn n_occ(&self, action: Action) -> usize {
        self.labels.iter().filter(|l| **l == Some(action)).count()
    }

    pub fn matching(&self, action: Action, mode: MatchingMode) -> f64 {
        let occ: Vec<&Occurrence> = self.occurrences.iter().filter(|o| o.action == action).collect();
        if occ.is_empty() {
            return 0.0;
        }
        match mode {
            MatchingMode::PerOccurrence => occ.iter().map(|o| o.score).sum::<f64>() / occ.len() as f64,
            MatchingMode::Pooled => {
                occ.iter().map(|o| o.overlap).sum::<f64>() / occ.iter().map(|o| o.truth_len).sum::<f64>()
            }
        }
    }

    pub fn mean_duration(&self, action: Action) -> f64 {
        let d: Vec<f64> = self
            .occurrences
            .iter()
            .filter(|o| o.action == action)
            .map(|o| o.truth_len)
            .collect();
        d.iter().sum::<f64>() / d.len().max(1) as f64
    }

    /// Query segment for `action`: first occurrence whose matched segment
    /// scores at least 0.5, else the best-matching occurrence.
    pub fn default_exemplar(&self, action: Action) -> Option<usize> {
        let occ = self.occurrences.iter().filter(|o| o.action == action && o.segment.is_some());
        if let Some(o) = occ.clone().find(|o| o.score >= 0.5) {
            return o.segment;
        }
        occ.fold(None::<&Occurrence>, |best, o| match best {
            Some(b) if b.score >= o.score => Some(b),
            _ => Some(o),
        })
        .and_then(|o| o.segment)
    }
}

/// Segment every trace and build features, labels and occurrence matches.
pub fn prepare(traces: &[ExecutionTrace], cfg: &PipelineConfig) -> Result<PreparedDataset> {
    cfg.validate()?;
    let mut out = PreparedDataset {
        segments: Vec::new(),
        features: Vec::new(),
        labels: Vec::new(),
        occurrences: Vec::new(),
    };
    for (ti, trace) in traces.iter().enumerate() {
        let anns = match &trace.annotations {
            Some(a) if !a.is_empty() => a.as_slice(),
            _ => return Err(Error::Unannotated(trace.name().to_string())),
        };
        let segs = segment(trace, &cfg.segmenter)?;
        let feats = build_all(trace, &segs, &cfg.features)?;
        let base = out.segments.len();
        let seg_iv: Vec<Interval> = segs.iter().map(Interval::from).collect();
        let ann_iv: Vec<Interval> = anns.iter().map(Interval::from).collect();

        for s in &seg_iv {
            let label = match_segments(&ann_iv, std::slice::from_ref(s))[0].map(|a| anns[a].action);
            out.labels.push(label);
        }
        for (ai, (m, g)) in match_segments(&seg_iv, &ann_iv).into_iter().zip(&ann_iv).enumerate() {
            let ident = m.map_or(Interval::new(g.start, g.start), |si| seg_iv[si]);
            let score = matching_score(ident, *g)?;
            let overlap = ident.overlap(g);
            out.occurrences.push(Occurrence {
                trace: ti,
                annotation: ai,
                action: anns[ai].action,
                segment: m.map(|si| base + si),
                overlap,
                truth_len: g.len(),
                score,
            });
        }
        out.segments.extend(segs.into_iter().map(|s| (ti, s)));
        out.features.extend(feats);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub matching: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_occ: usize,
    pub tp: usize,
    pub p_size: usize,
    pub exemplar: usize,
    pub mask: FeatureMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub matching: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub per_action: BTreeMap<Action, ActionReport>,
    pub averages: Averages,
}

/// Retrieval sets of one classification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub k: usize,
    pub queries: Vec<RetrievalSet>,
}

/// Retrieve and score every annotated class. `k` overrides the configured
/// choice when given.
pub fn classify(data: &PreparedDataset, cfg: &PipelineConfig, k: Option<usize>) -> Result<(EvalReport, ClassificationReport)> {
    let classes = data.classes();
    let mut n_occ = BTreeMap::new();
    for &a in &classes {
        let n = data.n_occ(a);
        if n == 0 {
            return Err(Error::MissingAction(a.as_str().into()));
        }
        n_occ.insert(a, n);
    }
    let k = match (k, cfg.k) {
        (Some(k), _) | (None, KChoice::Fixed(k)) => k,
        (None, KChoice::Auto) => choose_k(n_occ.values().copied())?,
    };
    let ctx = context_for(&data.features, cfg.context, k)?;

    let mut per_action = BTreeMap::new();
    let mut queries = Vec::new();
    for &a in &classes {
        let exemplar = match cfg.exemplars.get(&a) {
            Some(&id) if id < data.features.len() => id,
            Some(&id) => return Err(Error::UnknownSegment(id)),
            None => data.default_exemplar(a).ok_or_else(|| Error::MissingAction(a.as_str().into()))?,
        };
        let mask = cfg.mask_for(a, data.mean_duration(a));
        let r = knn_retrieve(exemplar, &data.features, k, &ctx, mask)?;
        let prf = precision_recall_f1(&r, &data.labels, a)?;
        per_action.insert(
            a,
            ActionReport {
                matching: data.matching(a, cfg.matching),
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
                n_occ: prf.n_occ,
                tp: prf.tp,
                p_size: prf.p_size,
                exemplar,
                mask,
            },
        );
        queries.push(r);
    }
    let n = per_action.len().max(1) as f64;
    let mean = |f: fn(&ActionReport) -> f64| per_action.values().map(f).sum::<f64>() / n;
    let averages = Averages {
        matching: mean(|r| r.matching),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
    };
    Ok((EvalReport { k, per_action, averages }, ClassificationReport { k, queries }))
}

/// Segment, build features, classify and score `traces`.
pub fn evaluate(traces: &[ExecutionTrace], cfg: &PipelineConfig) -> Result<EvalReport> {
    let data = prepare(traces, cfg)?;
    Ok(classify(&data, cfg, None)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub average_f1: f64,
}

/// Average F1 for each `k`, reusing one prepared dataset.
pub fn k_sweep(data: &PreparedDataset, cfg: &PipelineConfig, ks: impl IntoIterator<Item = usize>) -> Result<Vec<SweepRow>> {
    ks.into_iter()
        .map(|k| {
            let (rep, _) = classify(data, cfg, Some(k))?;
            Ok(SweepRow { k, average_f1: rep.averages.f1 })
        })
        .collect()
}

fn mask_label(m: FeatureMask) -> &'static str {
    match (m.use_f1, m.use_f23) {
        (true, true) => "[f1,f2,f3]",
        (false, true) => "[f2,f3]",
        _ => "[f1]",
    }
}

impl EvalReport {
    /// One row per class plus an average row; values in percent.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("action,features,matching,precision,recall,f1,n_occ\n");
        for (a, r) in &self.per_action {
            let _ = writeln!(
                s,
                "\"{}\",\"{}\",{:.2},{:.2},{:.2},{:.2},{}",
                a.label(),
                mask_label(r.mask),
                100.0 * r.matching,
                100.0 * r.precision,
                100.0 * r.recall,
                100.0 * r.f1,
                r.n_occ
            );
        }
        let v = &self.averages;
        let _ = writeln!(
            s,
            "Average,,{:.2},{:.2},{:.2},{:.2},",
            100.0 * v.matching,
            100.0 * v.precision,
            100.0 * v.recall,
            100.0 * v.f1
        );
        s
    }

    pub fn average_row(&self) -> String {
        let v = &self.averages;
        format!(
            "Average  matching {:.2}  precision {:.2}  recall {:.2}  f1 {:.2}",
            100.0 * v.matching,
            100.0 * v.precision,
            100.0 * v.recall,
            100.0 * v.f1
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("k,average_f1\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.2}", r.k, 100.0 * r.average_f1);
    }
    s
}
