//! Mixed Euclidean/Hamming k-NN retrieval over segment features.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{SegmentFeatures, F23_LEN};

/// Which feature groups take part in the distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMask {
    pub use_f1: bool,
    pub use_f23: bool,
}

impl FeatureMask {
    pub const FULL: FeatureMask = FeatureMask { use_f1: true, use_f23: true };
    pub const BOOLEAN_ONLY: FeatureMask = FeatureMask { use_f1: false, use_f23: true };
    pub const F1_ONLY: FeatureMask = FeatureMask { use_f1: true, use_f23: false };

    pub fn validate(&self) -> Result<()> {
        if self.use_f1 || self.use_f23 {
            Ok(())
        } else {
            Err(Error::InvalidConfig("feature mask must enable at least one group".into()))
        }
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask::FULL
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricContext {
    pub d_emax: f64,
    pub d_hmax: f64,
}

/// How the normalizers of the mixed metric are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Largest pairwise distance over the dataset.
    #[default]
    PairwiseMax,
    /// Largest k-th neighbour distance over all queries, per single metric.
    /// Depends on k.
    KnnCost,
}

pub fn euclidean_f1(a: &SegmentFeatures, b: &SegmentFeatures) -> f64 {
    debug_assert_eq!(a.f1.len(), b.f1.len());
    a.f1.iter()
        .zip(&b.f1)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fraction of differing entries of `[f2, f3]`.
pub fn hamming_f23(a: &SegmentFeatures, b: &SegmentFeatures) -> f64 {
    let diff = a.f23().zip(b.f23()).filter(|(x, y)| x != y).count();
    diff as f64 / F23_LEN as f64
}

fn guard(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Maximum pairwise distance under each single metric; zero maxima (all
/// segments identical) become 1.
pub fn compute_metric_context(dataset: &[SegmentFeatures]) -> Result<MetricContext> {
    if dataset.len() < 2 {
        return Err(Error::DatasetTooSmall { got: dataset.len(), required: 2 });
    }
    let (mut de, mut dh) = (0.0_f64, 0.0_f64);
    for (i, a) in dataset.iter().enumerate() {
        for b in &dataset[i + 1..] {
            de = de.max(euclidean_f1(a, b));
            dh = dh.max(hamming_f23(a, b));
        }
    }
    Ok(MetricContext { d_emax: guard(de), d_hmax: guard(dh) })
}

/// Largest distance to the k-th nearest neighbour (query included) over all
/// queries, for each single metric.
pub fn compute_knn_context(dataset: &[SegmentFeatures], k: usize) -> Result<MetricContext> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::DatasetTooSmall { got: n, required: 2 });
    }
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let kth = |metric: &dyn Fn(&SegmentFeatures, &SegmentFeatures) -> f64| {
        dataset
            .iter()
            .map(|q| {
                let mut d: Vec<f64> = dataset.iter().map(|s| metric(q, s)).collect();
                d.sort_by(f64::total_cmp);
                d[k - 1]
            })
            .fold(0.0_f64, f64::max)
    };
    Ok(MetricContext {
        d_emax: guard(kth(&euclidean_f1)),
        d_hmax: guard(kth(&hamming_f23)),
    })
}

pub fn context_for(dataset: &[SegmentFeatures], mode: ContextMode, k: usize) -> Result<MetricContext> {
    match mode {
        ContextMode::PairwiseMax => compute_metric_context(dataset),
        ContextMode::KnnCost => compute_knn_context(dataset, k),
    }
}

pub fn mixed_distance(a: &SegmentFeatures, b: &SegmentFeatures, ctx: &MetricContext, mask: FeatureMask) -> f64 {
    let e = if mask.use_f1 { euclidean_f1(a, b) / ctx.d_emax } else { 0.0 };
    let h = if mask.use_f23 { hamming_f23(a, b) / ctx.d_hmax } else { 0.0 };
    match (mask.use_f1, mask.use_f23) {
        (true, false) => e,
        (false, true) => h,
        _ => (e * e + h * h).sqrt(),
    }
}

/// Ranked neighbours of one query segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSet {
    #[serde(rename = "query_id")]
    pub query: usize,
    pub mask: FeatureMask,
    pub k: usize,
    /// `(segment id, distance)` ascending, ties ordered by id.
    pub members: Vec<(usize, f64)>,
}

/// Length of the prefix of `ranked` holding the first `n` entries plus every
/// later entry tying the n-th score.
fn tie_expanded(ranked: &[(usize, f64)], n: usize) -> usize {
    if n == 0 || ranked.is_empty() {
        return 0;
    }
    let n = n.min(ranked.len());
    let last = ranked[n - 1].1;
    n + ranked[n..].iter().take_while(|(_, s)| *s == last).count()
}

impl RetrievalSet {
    /// The first `n_occ` members, extended over ties with the `n_occ`-th score.
    pub fn p_set(&self, n_occ: usize) -> &[(usize, f64)] {
        &self.members[..tie_expanded(&self.members, n_occ)]
    }
}

/// All segments sorted by distance to `query`, ties by id.
pub fn rank(query: usize, dataset: &[SegmentFeatures], ctx: &MetricContext, mask: FeatureMask) -> Result<Vec<(usize, f64)>> {
    let q = dataset.get(query).ok_or(Error::UnknownSegment(query))?;
    let mut ranked: Vec<(usize, f64)> = dataset
        .iter()
        .enumerate()
        .map(|(i, s)| (i, mixed_distance(q, s, ctx, mask)))
        .collect();
    ranked.sort_by(|a, b| match a.1.total_cmp(&b.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    Ok(ranked)
}

/// The `k` nearest segments to `query` (itself included, at distance 0),
/// extended by every segment tying the k-th distance.
pub fn knn_retrieve(
    query: usize,
    dataset: &[SegmentFeatures],
    k: usize,
    ctx: &MetricContext,
    mask: FeatureMask,
) -> Result<RetrievalSet> {
    mask.validate()?;
    if k == 0 || k > dataset.len() {
        return Err(Error::KOutOfRange { k, n: dataset.len() });
    }
    let mut members = rank(query, dataset, ctx, mask)?;
    members.truncate(tie_expanded(&members, k));
    Ok(RetrievalSet { query, mask, k, members })
}

/// Occurrence count of the most frequent class.
pub fn choose_k<I>(counts: I) -> Result<usize>
where
    I: IntoIterator<Item = usize>,
{
    counts.into_iter().max().ok_or(Error::EmptyCounts)
}
