//! Per-segment feature vectors: polynomial coefficients of the kinematic
//! signature (`f1`), color-blind start fluents (`f2`) and per-channel
//! variation flags (`f3`). Packing is arm-invariant: a segment where only
//! PSM2 moves produces the same layout as the mirrored PSM1 segment.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluent::{compute_fluents, FluentSet, Predicate};
use crate::segment::{normalize_features, Segment};
use crate::trace::{kinematic_matrix, Arm, ExecutionTrace, FeatureRow, ARM_FEATURES, NUM_FEATURES};

pub const F2_LEN: usize = 12;
pub const F3_LEN: usize = NUM_FEATURES;
pub const F23_LEN: usize = F2_LEN + F3_LEN;

/// Predicate order of the `f2` slots, two slots each.
pub const F2_PREDICATES: [Predicate; 6] = [
    Predicate::AtRing,
    Predicate::AtPeg,
    Predicate::InHand,
    Predicate::On,
    Predicate::ClosedGripper,
    Predicate::AtCenter,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub poly_degree: usize,
    /// Minimum normalized end-to-start change for an arm to count as moving.
    pub move_eps: f64,
    /// Minimum normalized excursion for a channel to count as varying.
    pub var_eps: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            poly_degree: 5,
            move_eps: 0.02,
            var_eps: 0.02,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.poly_degree < 1 {
            return Err(Error::InvalidConfig("poly_degree must be at least 1".into()));
        }
        if !(self.move_eps > 0.0 && self.var_eps > 0.0) {
            return Err(Error::InvalidConfig("move_eps and var_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn f1_len(&self) -> usize {
        (self.poly_degree + 1) * NUM_FEATURES
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmOrder {
    Psm1First,
    Psm2First,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFeatures {
    pub f1: Vec<f64>,
    pub f2: [bool; F2_LEN],
    pub f3: [bool; F3_LEN],
    pub arm_order: ArmOrder,
}

impl SegmentFeatures {
    /// Concatenated Boolean part `[f2, f3]`.
    pub fn f23(&self) -> impl Iterator<Item = bool> + '_ {
        self.f2.iter().chain(self.f3.iter()).copied()
    }
}

/// Per-trace state shared by all segments: the max-abs normalized signature
/// used for the movement tests, and the raw signature used for fitting.
pub struct FeatureBuilder<'a> {
    trace: &'a ExecutionTrace,
    raw: Vec<FeatureRow>,
    normalized: Vec<FeatureRow>,
    cfg: FeatureConfig,
}

impl<'a> FeatureBuilder<'a> {
    pub fn new(trace: &'a ExecutionTrace, cfg: &FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let raw = kinematic_matrix(trace);
        let normalized = normalize_features(&raw);
        Ok(FeatureBuilder {
            trace,
            raw,
            normalized,
            cfg: cfg.clone(),
        })
    }

    pub fn arm_moved(&self, seg: &Segment, arm: Arm) -> bool {
        let (a, b) = (&self.normalized[seg.start.index], &self.normalized[seg.end.index]);
        arm_columns(arm).any(|c| (b[c] - a[c]).abs() >= self.cfg.move_eps)
    }

    pub fn arm_order(&self, seg: &Segment) -> ArmOrder {
        match (self.arm_moved(seg, Arm::Psm1), self.arm_moved(seg, Arm::Psm2)) {
            (true, false) => ArmOrder::Psm1First,
            (false, true) => ArmOrder::Psm2First,
            _ => ArmOrder::Both,
        }
    }

    /// Least-squares polynomial coefficients `[a_0..a_n]` of every channel,
    /// time measured in seconds from the segment start.
    pub fn coefficients(&self, seg: &Segment) -> Result<Vec<[f64; NUM_FEATURES]>> {
        let n = self.cfg.poly_degree;
        let samples = seg.samples();
        if samples < n + 1 {
            return Err(Error::SegmentTooShort { samples, degree: n });
        }
        let t0 = self.trace.frames[seg.start.index].t;
        // fit on u = t / span for conditioning, then undo the scaling
        let span = (self.trace.frames[seg.end.index].t - t0).max(f64::MIN_POSITIVE);
        let rows = seg.start.index..=seg.end.index;
        let times: Vec<f64> = rows.clone().map(|i| (self.trace.frames[i].t - t0) / span).collect();
        let vander = DMatrix::from_fn(samples, n + 1, |r, j| times[r].powi(j as i32));
        let rhs = DMatrix::from_fn(samples, NUM_FEATURES, |r, c| self.raw[seg.start.index + r][c]);
        let sol = vander
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::InvalidConfig(format!("polynomial fit failed: {e}")))?;
        Ok((0..=n)
            .map(|j| {
                let s = span.powi(j as i32);
                std::array::from_fn(|c| sol[(j, c)] / s)
            })
            .collect())
    }

    pub fn build_f1(&self, seg: &Segment) -> Result<(Vec<f64>, ArmOrder)> {
        let coeffs = self.coefficients(seg)?;
        let order = self.arm_order(seg);
        let block = |arm: Arm| -> Vec<f64> {
            arm_columns(arm)
                .flat_map(|c| coeffs.iter().map(move |row| row[c]))
                .collect()
        };
        let half = self.cfg.f1_len() / 2;
        let f1 = match order {
            ArmOrder::Psm1First => [block(Arm::Psm1), vec![0.0; half]].concat(),
            ArmOrder::Psm2First => [block(Arm::Psm2), vec![0.0; half]].concat(),
            ArmOrder::Both => [block(Arm::Psm1), block(Arm::Psm2)].concat(),
        };
        Ok((f1, order))
    }

    pub fn build_f2(&self, seg: &Segment) -> [bool; F2_LEN] {
        encode_f2(&compute_fluents(&self.trace.frames[seg.start.index]))
    }

    /// Variation flags for one arm's eight channels.
    fn variation(&self, seg: &Segment, arm: Arm) -> [bool; ARM_FEATURES] {
        let start = &self.normalized[seg.start.index];
        let rows = &self.normalized[seg.start.index..=seg.end.index];
        std::array::from_fn(|i| {
            let c = arm.index() * ARM_FEATURES + i;
            rows.iter().any(|r| (r[c] - start[c]).abs() >= self.cfg.var_eps)
        })
    }

    /// `f3` packed by `order`. With a single acting arm its block comes
    /// first; otherwise the blocks are sorted so that exchanging the arms
    /// cannot change the vector.
    pub fn build_f3(&self, seg: &Segment, order: ArmOrder) -> [bool; F3_LEN] {
        let v1 = self.variation(seg, Arm::Psm1);
        let v2 = self.variation(seg, Arm::Psm2);
        let (first, second) = match order {
            ArmOrder::Psm1First => (v1, v2),
            ArmOrder::Psm2First => (v2, v1),
            ArmOrder::Both => {
                if v1 >= v2 {
                    (v1, v2)
                } else {
                    (v2, v1)
                }
            }
        };
        let mut out = [false; F3_LEN];
        out[..ARM_FEATURES].copy_from_slice(&first);
        out[ARM_FEATURES..].copy_from_slice(&second);
        out
    }

    pub fn build(&self, seg: &Segment) -> Result<SegmentFeatures> {
        let (f1, arm_order) = self.build_f1(seg)?;
        Ok(SegmentFeatures {
            f1,
            f2: self.build_f2(seg),
            f3: self.build_f3(seg, arm_order),
            arm_order,
        })
    }
}

fn arm_columns(arm: Arm) -> std::ops::Range<usize> {
    let base = arm.index() * ARM_FEATURES;
    base..base + ARM_FEATURES
}

/// Count encoding of the start fluents: slot 0 is set when the predicate
/// holds at least once, slot 1 when it holds at least twice (for the arm
/// predicates: for both arms). Colors and arm identities are dropped;
/// `reachable` is skipped.
pub fn encode_f2(fluents: &FluentSet) -> [bool; F2_LEN] {
    let mut out = [false; F2_LEN];
    for (i, pred) in F2_PREDICATES.iter().enumerate() {
        let n = if *pred == Predicate::On {
            fluents.count(*pred)
        } else {
            let mut arms: Vec<Arm> = fluents.arms_with(*pred).collect();
            arms.sort();
            arms.dedup();
            arms.len()
        };
        out[2 * i] = n >= 1;
        out[2 * i + 1] = n >= 2;
    }
    out
}

pub fn arm_moved(trace: &ExecutionTrace, seg: &Segment, arm: Arm, cfg: &FeatureConfig) -> Result<bool> {
    Ok(FeatureBuilder::new(trace, cfg)?.arm_moved(seg, arm))
}

pub fn build_f1(trace: &ExecutionTrace, seg: &Segment, cfg: &FeatureConfig) -> Result<(Vec<f64>, ArmOrder)> {
    FeatureBuilder::new(trace, cfg)?.build_f1(seg)
}

pub fn build_f2(trace: &ExecutionTrace, seg: &Segment) -> [bool; F2_LEN] {
    encode_f2(&compute_fluents(&trace.frames[seg.start.index]))
}

pub fn build_f3(trace: &ExecutionTrace, seg: &Segment, cfg: &FeatureConfig) -> Result<[bool; F3_LEN]> {
    let b = FeatureBuilder::new(trace, cfg)?;
    Ok(b.build_f3(seg, b.arm_order(seg)))
}

pub fn build_features(trace: &ExecutionTrace, seg: &Segment, cfg: &FeatureConfig) -> Result<SegmentFeatures> {
    FeatureBuilder::new(trace, cfg)?.build(seg)
}

/// Features for every segment of one trace, sharing the normalization.
pub fn build_all(trace: &ExecutionTrace, segs: &[Segment], cfg: &FeatureConfig) -> Result<Vec<SegmentFeatures>> {
    let b = FeatureBuilder::new(trace, cfg)?;
    segs.iter().map(|s| b.build(s)).collect()
}
