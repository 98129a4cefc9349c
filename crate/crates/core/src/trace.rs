//! Execution-trace data model: the 16-channel kinematic signature of the two
//! arms, the synchronized scene stream, and optional ground-truth annotations.
//!
//! Traces are stored as UTF-8 JSON. Unknown keys are rejected and every
//! structural invariant is checked on load, with errors naming the offending
//! frame.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
/// Quaternion in `(x, y, z, w)` order.
pub type Quat = [f64; 4];

/// Channels per arm: position (3), quaternion (4), jaw (1).
pub const ARM_FEATURES: usize = 8;
pub const NUM_FEATURES: usize = 2 * ARM_FEATURES;
/// Offset of the jaw channel inside an arm block.
pub const JAW_OFFSET: usize = 7;

pub const QUAT_NORM_TOL: f64 = 1e-6;
pub const SPACING_TOL: f64 = 1e-9;

/// One row of the kinematic signature.
pub type FeatureRow = [f64; NUM_FEATURES];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
    Grey,
}

impl Color {
    pub const ALL: [Color; 5] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Yellow,
        Color::Grey,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Color {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Color::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown color `{s}`"))
    }
}

/// Patient-side manipulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Psm1,
    Psm2,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Psm1, Arm::Psm2];

    pub fn index(self) -> usize {
        match self {
            Arm::Psm1 => 0,
            Arm::Psm2 => 1,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Psm1 => Arm::Psm2,
            Arm::Psm2 => Arm::Psm1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Psm1 => "psm1",
            Arm::Psm2 => "psm2",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Arm attribution of an annotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmSel {
    Psm1,
    Psm2,
    Both,
}

impl ArmSel {
    pub fn covers(self, arm: Arm) -> bool {
        matches!(
            (self, arm),
            (ArmSel::Both, _) | (ArmSel::Psm1, Arm::Psm1) | (ArmSel::Psm2, Arm::Psm2)
        )
    }
}

impl From<Arm> for ArmSel {
    fn from(arm: Arm) -> Self {
        match arm {
            Arm::Psm1 => ArmSel::Psm1,
            Arm::Psm2 => ArmSel::Psm2,
        }
    }
}

/// The six ring-transfer action classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveRing,
    MovePeg,
    MoveCenter,
    Grasp,
    Extract,
    Release,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::MoveRing,
        Action::MovePeg,
        Action::MoveCenter,
        Action::Grasp,
        Action::Extract,
        Action::Release,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::MoveRing => "move_ring",
            Action::MovePeg => "move_peg",
            Action::MoveCenter => "move_center",
            Action::Grasp => "grasp",
            Action::Extract => "extract",
            Action::Release => "release",
        }
    }

    /// Abstract, arm- and color-free label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Action::MoveRing => "move(A,ring,C)",
            Action::MovePeg => "move(A,peg,C)",
            Action::MoveCenter => "move(A,center,C)",
            Action::Grasp => "grasp(A,ring,C)",
            Action::Extract => "extract(A,ring,C)",
            Action::Release => "release(A)",
        }
    }

    pub fn is_move(self) -> bool {
        matches!(
            self,
            Action::MoveRing | Action::MovePeg | Action::MoveCenter
        )
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmState {
    pub pos: Vec3,
    pub quat: Quat,
    pub jaw: f64,
}

impl ArmState {
    /// Builds an arm state with the quaternion renormalized to unit length.
    pub fn new(pos: Vec3, quat: Quat, jaw: f64) -> Self {
        ArmState {
            pos,
            quat: normalize_quat(quat),
            jaw,
        }
    }

    pub fn features(&self) -> [f64; ARM_FEATURES] {
        let [x, y, z] = self.pos;
        let [qx, qy, qz, qw] = self.quat;
        [x, y, z, qx, qy, qz, qw, self.jaw]
    }
}

pub fn normalize_quat(q: Quat) -> Quat {
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n == 0.0 {
        [0.0, 0.0, 0.0, 1.0]
    } else {
        q.map(|c| c / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ring {
    pub color: Color,
    /// Ring center.
    pub pos: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Peg {
    pub color: Color,
    /// Peg tip.
    pub pos: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneState {
    pub rings: Vec<Ring>,
    pub pegs: Vec<Peg>,
    pub base_center: Vec3,
    pub ring_radius: f64,
}

impl SceneState {
    pub fn ring(&self, color: Color) -> Option<&Ring> {
        self.rings.iter().find(|r| r.color == color)
    }

    pub fn peg(&self, color: Color) -> Option<&Peg> {
        self.pegs.iter().find(|p| p.color == color)
    }
}

/// One synchronized sample: both arms plus the scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "FrameRepr", into = "FrameRepr")]
pub struct Frame {
    pub t: f64,
    /// Index 0 is PSM1, index 1 is PSM2.
    pub arms: [ArmState; 2],
    pub scene: SceneState,
}

impl Frame {
    pub fn arm(&self, arm: Arm) -> &ArmState {
        &self.arms[arm.index()]
    }

    /// Inverse of [`Frame::features`]; quaternions are renormalized.
    pub fn from_features(t: f64, row: &FeatureRow, scene: SceneState) -> Frame {
        let arm = |r: &[f64]| ArmState::new([r[0], r[1], r[2]], [r[3], r[4], r[5], r[6]], r[7]);
        Frame {
            t,
            arms: [arm(&row[..ARM_FEATURES]), arm(&row[ARM_FEATURES..])],
            scene,
        }
    }

    pub fn features(&self) -> FeatureRow {
        let mut row = [0.0; NUM_FEATURES];
        row[..ARM_FEATURES].copy_from_slice(&self.arms[0].features());
        row[ARM_FEATURES..].copy_from_slice(&self.arms[1].features());
        row
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRepr {
    t: f64,
    psm1: ArmState,
    psm2: ArmState,
    scene: SceneState,
}

impl From<FrameRepr> for Frame {
    fn from(r: FrameRepr) -> Self {
        Frame {
            t: r.t,
            arms: [r.psm1, r.psm2],
            scene: r.scene,
        }
    }
}

impl From<Frame> for FrameRepr {
    fn from(f: Frame) -> Self {
        let [psm1, psm2] = f.arms;
        FrameRepr {
            t: f.t,
            psm1,
            psm2,
            scene: f.scene,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub start: f64,
    pub end: f64,
    pub action: Action,
    pub arm: ArmSel,
    pub color: Option<Color>,
}

impl Annotation {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionTrace {
    pub sample_rate: f64,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub frames: Vec<Frame>,
    #[serde(default)]
    pub annotations: Option<Vec<Annotation>>,
}

impl ExecutionTrace {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Time of frame `index` relative to the first frame, derived from the
    /// sample index so that equal index gaps give bit-identical durations.
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    /// Frame index closest to time `t` (seconds from trace start), clamped.
    pub fn index_at(&self, t: f64) -> usize {
        let i = (t * self.sample_rate).round();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.frames.len().saturating_sub(1))
        }
    }

    pub fn annotations(&self) -> &[Annotation] {
        self.annotations.as_deref().unwrap_or(&[])
    }

    pub fn name(&self) -> &str {
        self.meta.get("name").map(String::as_str).unwrap_or("trace")
    }

    /// Checks every structural invariant of the data model.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::invalid_trace(None, "sample_rate must be positive"));
        }
        if self.frames.is_empty() {
            return Err(Error::invalid_trace(None, "trace has no frames"));
        }
        let dt = self.dt();
        for (i, frame) in self.frames.iter().enumerate() {
            validate_frame(frame).map_err(|reason| Error::invalid_trace(Some(i), reason))?;
            if i == 0 {
                continue;
            }
            let prev = self.frames[i - 1].t;
            if frame.t <= prev {
                return Err(Error::invalid_trace(
                    Some(i),
                    format!("t = {} is not strictly increasing (previous {prev})", frame.t),
                ));
            }
            if ((frame.t - prev) - dt).abs() > SPACING_TOL {
                return Err(Error::invalid_trace(
                    Some(i),
                    format!("frame spacing {} differs from 1/sample_rate = {dt}", frame.t - prev),
                ));
            }
        }
        if let Some(annotations) = &self.annotations {
            validate_annotations(annotations)?;
        }
        Ok(())
    }

    /// Parses and validates a trace document.
    pub fn from_json(text: &str) -> Result<Self> {
        let trace: ExecutionTrace = serde_json::from_str(text)?;
        trace.validate()?;
        Ok(trace)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("trace serialization cannot fail");
        s.push('\n');
        s
    }
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

fn validate_frame(frame: &Frame) -> std::result::Result<(), String> {
    if !(frame.t.is_finite() && frame.t >= 0.0) {
        return Err(format!("t = {} must be finite and non-negative", frame.t));
    }
    for arm in Arm::BOTH {
        let s = frame.arm(arm);
        if !finite3(&s.pos) || !s.quat.iter().all(|c| c.is_finite()) {
            return Err(format!("{arm} state is not finite"));
        }
        let norm = s.quat.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(format!("{arm} quaternion norm {norm} is not 1"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&s.jaw) {
            return Err(format!("{arm} jaw angle {} outside [0, pi]", s.jaw));
        }
    }
    let scene = &frame.scene;
    if !(scene.ring_radius.is_finite() && scene.ring_radius > 0.0) {
        return Err("ring_radius must be positive".into());
    }
    if !finite3(&scene.base_center)
        || !scene.rings.iter().all(|r| finite3(&r.pos))
        || !scene.pegs.iter().all(|p| finite3(&p.pos))
    {
        return Err("scene position is not finite".into());
    }
    for (i, r) in scene.rings.iter().enumerate() {
        if scene.rings[..i].iter().any(|o| o.color == r.color) {
            return Err(format!("duplicate ring color {}", r.color));
        }
    }
    for (i, p) in scene.pegs.iter().enumerate() {
        if scene.pegs[..i].iter().any(|o| o.color == p.color) {
            return Err(format!("duplicate peg color {}", p.color));
        }
    }
    Ok(())
}

fn validate_annotations(annotations: &[Annotation]) -> Result<()> {
    for a in annotations {
        if !(a.start.is_finite() && a.end.is_finite() && a.start < a.end) {
            return Err(Error::invalid_trace(
                None,
                format!("annotation {} [{}, {}] must have start < end", a.action, a.start, a.end),
            ));
        }
    }
    for arm in Arm::BOTH {
        let mut spans: Vec<(f64, f64)> = annotations
            .iter()
            .filter(|a| a.arm.covers(arm))
            .map(|a| (a.start, a.end))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = spans.windows(2).find(|w| w[1].0 < w[0].1) {
            return Err(Error::invalid_trace(
                None,
                format!("overlapping {arm} annotations at t = {}", w[1].0),
            ));
        }
    }
    Ok(())
}

/// Reads and validates a trace file.
pub fn load_trace(path: impl AsRef<Path>) -> Result<ExecutionTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExecutionTrace::from_json(&text)
}

/// Writes a trace file. Output is deterministic; floats use the shortest
/// representation that parses back to the same value.
pub fn save_trace(trace: &ExecutionTrace, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path, trace.to_json().as_bytes())
}

/// The `T x 16` kinematic signature: PSM1 pos(3), quat(4), jaw(1), then PSM2.
pub fn kinematic_matrix(trace: &ExecutionTrace) -> Vec<FeatureRow> {
    trace.frames.iter().map(Frame::features).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: Quat = [0.0, 0.0, 0.0, 1.0];

    fn scene() -> SceneState {
        SceneState {
            rings: vec![Ring {
                color: Color::Red,
                pos: [0.01, 0.02, 0.0],
            }],
            pegs: vec![Peg {
                color: Color::Grey,
                pos: [0.0, 0.05, 0.03],
            }],
            base_center: [0.0; 3],
            ring_radius: 0.01,
        }
    }

    fn trace(n: usize) -> ExecutionTrace {
        let frames = (0..n)
            .map(|i| Frame {
                t: i as f64 / 50.0,
                arms: [
                    ArmState::new([0.0; 3], IDENTITY, 0.0),
                    ArmState::new([0.1, -0.2, 0.3], [0.1, 0.2, 0.3, 0.9], 1.0),
                ],
                scene: scene(),
            })
            .collect();
        ExecutionTrace {
            sample_rate: 50.0,
            meta: BTreeMap::from([("name".to_string(), "unit".to_string())]),
            frames,
            annotations: Some(vec![Annotation {
                start: 0.0,
                end: 0.02,
                action: Action::Grasp,
                arm: ArmSel::Psm1,
                color: Some(Color::Red),
            }]),
        }
    }

    #[test]
    fn two_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let t = trace(2);
        save_trace(&t, &path).unwrap();
        let back = load_trace(&path).unwrap();
        assert_eq!(back.frames.len(), 2);
        assert_eq!(back, t);
        assert_eq!(back.sample_rate, 50.0);
        assert_eq!(back.frames[0].arms[0].quat, IDENTITY);
    }

    #[test]
    fn saves_are_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let t = trace(7);
        save_trace(&t, &a).unwrap();
        save_trace(&load_trace(&a).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn non_monotone_time_names_the_frame() {
        let mut t = trace(8);
        t.frames[5].t = t.frames[3].t;
        match ExecutionTrace::from_json(&t.to_json()) {
            Err(Error::InvalidTrace { frame: Some(5), .. }) => {}
            other => panic!("expected invariant error at frame 5, got {other:?}"),
        }
    }

    #[test]
    fn third_arm_is_a_parse_error() {
        let t = trace(2);
        let mut v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        let arm = v["frames"][1]["psm1"].clone();
        v["frames"][1]["psm3"] = arm;
        let err = ExecutionTrace::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn unknown_top_level_key_rejected() {
        let t = trace(2);
        let mut v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(matches!(
            ExecutionTrace::from_json(&v.to_string()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn rejects_bad_invariants() {
        let mut t = trace(3);
        t.frames[1].arms[0].quat = [0.0, 0.0, 0.0, 2.0];
        assert!(matches!(t.validate(), Err(Error::InvalidTrace { frame: Some(1), .. })));

        let mut t = trace(3);
        t.frames[2].arms[1].jaw = 4.0;
        assert!(matches!(t.validate(), Err(Error::InvalidTrace { frame: Some(2), .. })));

        let mut t = trace(3);
        t.frames[2].t += 0.001;
        assert!(matches!(t.validate(), Err(Error::InvalidTrace { frame: Some(2), .. })));

        let mut t = trace(3);
        let peg = t.frames[0].scene.pegs[0];
        t.frames[0].scene.pegs.push(peg);
        assert!(matches!(t.validate(), Err(Error::InvalidTrace { frame: Some(0), .. })));

        let mut t = trace(3);
        t.annotations.as_mut().unwrap().push(Annotation {
            start: 0.01,
            end: 0.04,
            action: Action::Release,
            arm: ArmSel::Both,
            color: None,
        });
        assert!(matches!(t.validate(), Err(Error::InvalidTrace { frame: None, .. })));
    }

    #[test]
    fn kinematic_matrix_layout() {
        let mut t = trace(1);
        t.frames[0].arms[1] = ArmState::new([0.0; 3], IDENTITY, 0.0);
        let k = kinematic_matrix(&t);
        assert_eq!(k.len(), 1);
        let expected = [
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        ];
        assert_eq!(k[0], expected);

        let mut t = trace(5);
        for (i, f) in t.frames.iter_mut().enumerate() {
            f.arms[0].jaw = 0.1 * i as f64;
        }
        let mut k = kinematic_matrix(&t);
        assert_eq!(k.len(), 5);
        let jaw: Vec<f64> = k.iter().map(|r| r[7]).collect();
        assert_eq!(jaw, t.frames.iter().map(|f| f.arms[0].jaw).collect::<Vec<_>>());
        k[0][7] = 99.0;
        assert_eq!(t.frames[0].arms[0].jaw, 0.0);
    }
}
