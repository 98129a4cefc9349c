//! Synthetic ring-transfer executions with ground-truth annotations.
//!
//! A scenario script is executed symbolically: every action turns into arm
//! waypoints (tip position, orientation, jaw) at its start and end times and
//! into ring attach/detach events. Arm channels are then sampled from
//! piecewise-linear paths with minimum-jerk corner blends, and ring
//! positions follow the gripper while held.

mod dataset;
mod noise;
mod scenario;
mod trajectory;

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{generate_dataset, mirror_trace, DatasetName, GenerateSpec};
pub use noise::{augment_with_noise, periodogram, synthesize_noise, synthesize_noise_with, NoiseConfig};
pub use scenario::{Geometry, Scenario, ScenarioName, Step};
pub use trajectory::{blend_integral, min_jerk, BlendedPath};

use crate::error::{Error, Result};
use crate::trace::{
    Action, Annotation, Arm, ArmSel, ArmState, Color, ExecutionTrace, Frame, Quat, SceneState, Vec3,
    ARM_FEATURES,
};

/// Action durations in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingTable {
    pub move_duration: f64,
    pub short_duration: f64,
    /// Half-width of the uniform jitter added to move durations.
    pub move_jitter: f64,
    pub short_jitter: f64,
    pub min_duration: f64,
    /// Idle time before the first and after the last action.
    pub lead_in: f64,
    pub lead_out: f64,
}

impl Default for TimingTable {
    fn default() -> Self {
        TimingTable {
            move_duration: 3.69,
            short_duration: 1.05,
            move_jitter: 0.0,
            short_jitter: 0.0,
            min_duration: 0.3,
            lead_in: 1.5,
            lead_out: 1.5,
        }
    }
}

impl TimingTable {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.move_duration,
            self.short_duration,
            self.move_jitter,
            self.short_jitter,
            self.min_duration,
            self.lead_in,
            self.lead_out,
        ];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.min_duration <= 0.0 {
            return Err(Error::InvalidConfig("timing values must be finite and non-negative, min_duration positive".into()));
        }
        Ok(())
    }

    fn sample(&self, action: Action, rng: &mut ChaCha8Rng) -> f64 {
        let (mean, jitter) = match action {
            Action::MoveRing | Action::MovePeg | Action::MoveCenter => (self.move_duration, self.move_jitter),
            Action::Grasp | Action::Extract | Action::Release => (self.short_duration, self.short_jitter),
        };
        let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
        (mean + jitter * u).max(self.min_duration)
    }
}

/// Waypoint channels in kinematic-signature order: pos(3), quat(4), jaw.
type Channels = [f64; ARM_FEATURES];

#[derive(Clone, Debug)]
struct ArmSim {
    pos: Vec3,
    quat: Quat,
    jaw: f64,
    held: Option<Color>,
    knots: Vec<(f64, Channels)>,
}

impl ArmSim {
    fn channels(&self) -> Channels {
        let q = self.quat;
        let p = self.pos;
        [p[0], p[1], p[2], q[0], q[1], q[2], q[3], self.jaw]
    }

    /// Records the current state at `t`, skipping a repeat of the last knot.
    fn knot(&mut self, t: f64) {
        let c = self.channels();
        match self.knots.last() {
            Some(&(tl, _)) if tl >= t => {}
            _ => self.knots.push((t, c)),
        }
    }

    fn idle_until(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.0)
    }
}

#[derive(Clone, Copy, Debug)]
enum RingPhase {
    Static(Vec3),
    Attached { arm: Arm, offset: Vec3 },
    Dropping { from: Vec3, to: Vec3, t0: f64, t1: f64 },
}

#[derive(Clone, Debug)]
struct RingSim {
    color: Color,
    pos: Vec3,
    holders: [bool; 2],
    on_peg: Option<Color>,
    events: Vec<(f64, RingPhase)>,
}

fn yaw_quat(yaw: f64) -> Quat {
    [0.0, 0.0, (0.5 * yaw).sin(), (0.5 * yaw).cos()]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

struct Executor<'a> {
    g: &'a Geometry,
    scene: SceneState,
    arms: [ArmSim; 2],
    rings: Vec<RingSim>,
    stacks: BTreeMap<Color, usize>,
    annotations: Vec<Annotation>,
}

impl<'a> Executor<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let g = &sc.geometry;
        let arm = |arm: Arm| {
            let pos = g.rest(arm);
            ArmSim {
                pos,
                quat: yaw_quat(g.yaw(arm, &pos)),
                jaw: g.jaw_open,
                held: None,
                knots: Vec::new(),
            }
        };
        let mut arms = [arm(Arm::Psm1), arm(Arm::Psm2)];
        for a in arms.iter_mut() {
            a.knot(0.0);
        }
        let mut stacks = BTreeMap::new();
        let rings = sc
            .initial_scene
            .rings
            .iter()
            .map(|r| {
                let on_peg = sc
                    .initial_scene
                    .pegs
                    .iter()
                    .find(|p| {
                        let dxy = ((r.pos[0] - p.pos[0]).powi(2) + (r.pos[1] - p.pos[1]).powi(2)).sqrt();
                        dxy < g.ring_radius && r.pos[2] < p.pos[2]
                    })
                    .map(|p| p.color);
                if let Some(c) = on_peg {
                    *stacks.entry(c).or_insert(0) += 1;
                }
                RingSim {
                    color: r.color,
                    pos: r.pos,
                    holders: [false; 2],
                    on_peg,
                    events: vec![(0.0, RingPhase::Static(r.pos))],
                }
            })
            .collect();
        Executor {
            g,
            scene: sc.initial_scene.clone(),
            arms,
            rings,
            stacks,
            annotations: Vec::new(),
        }
    }

    fn ring_index(&self, color: Color) -> Option<usize> {
        self.rings.iter().position(|r| r.color == color)
    }

    fn grasp_point(&self, arm: Arm, ring: Vec3) -> Vec3 {
        add(ring, [0.0, Geometry::side(arm) * self.g.grasp_offset, 0.0])
    }

    /// Moves `arm` to `target` over `[t0, t1]`, carrying its ring.
    fn move_arm(&mut self, arm: Arm, target: Vec3, t0: f64, t1: f64) {
        let yaw = self.g.yaw(arm, &target);
        let a = &mut self.arms[arm.index()];
        a.knot(t0);
        a.pos = target;
        a.quat = yaw_quat(yaw);
        a.knot(t1);
        if let Some(c) = a.held {
            let tip = a.pos;
            let i = self.ring_index(c).expect("held ring exists");
            if let Some(RingPhase::Attached { offset, .. }) = self.rings[i].events.last().map(|e| e.1) {
                self.rings[i].pos = add(tip, offset);
            }
        }
    }

    fn set_jaw(&mut self, arm: Arm, jaw: f64, t0: f64, t1: f64) {
        let a = &mut self.arms[arm.index()];
        a.knot(t0);
        a.jaw = jaw;
        a.knot(t1);
    }

    fn execute(&mut self, step_no: usize, step: &Step, t0: f64, t1: f64) -> Result<()> {
        let fail = |reason: String| Error::UnexecutableScript { step: step_no, reason };
        let arm = step.arm;
        let ai = arm.index();
        if self.arms[ai].idle_until() > t0 + 1e-12 {
            return Err(fail(format!("{arm} is still busy")));
        }
        let need_color = || step.color.ok_or_else(|| fail(format!("{} needs a color", step.action)));
        let mut note_color = step.color;
        match step.action {
            Action::MoveRing => {
                let c = need_color()?;
                if self.arms[ai].held.is_some() {
                    return Err(fail(format!("{arm} already holds a ring")));
                }
                let ri = self.ring_index(c).ok_or_else(|| fail(format!("no {c} ring")))?;
                let target = self.grasp_point(arm, self.rings[ri].pos);
                self.move_arm(arm, target, t0, t1);
            }
            Action::Grasp => {
                let c = need_color()?;
                let ri = self.ring_index(c).ok_or_else(|| fail(format!("no {c} ring")))?;
                let a = &self.arms[ai];
                if a.held.is_some() || a.jaw < self.g.jaw_open {
                    return Err(fail(format!("{arm} gripper is not open and empty")));
                }
                if dist(a.pos, self.rings[ri].pos) >= self.g.ring_radius {
                    return Err(fail(format!("{arm} is not at the {c} ring")));
                }
                let tip = a.pos;
                self.set_jaw(arm, self.g.jaw_closed, t0, t1);
                self.arms[ai].held = Some(c);
                let ring = &mut self.rings[ri];
                if !ring.holders.iter().any(|h| *h) {
                    ring.events.push((t1, RingPhase::Attached { arm, offset: sub(ring.pos, tip) }));
                }
                ring.holders[ai] = true;
            }
            Action::Extract => {
                let c = need_color()?;
                if self.arms[ai].held != Some(c) {
                    return Err(fail(format!("{arm} does not hold the {c} ring")));
                }
                let ri = self.ring_index(c).expect("held ring exists");
                let peg_color = self.rings[ri]
                    .on_peg
                    .ok_or_else(|| fail(format!("the {c} ring is not on a peg")))?;
                let peg = *self.scene.peg(peg_color).expect("peg exists");
                if let Some(n) = self.stacks.get_mut(&peg_color) {
                    *n = n.saturating_sub(1);
                }
                self.rings[ri].on_peg = None;
                let mut target = self.arms[ai].pos;
                target[2] = peg.pos[2] + self.g.lift_height;
                self.move_arm(arm, target, t0, t1);
            }
            Action::MoveCenter => {
                let c = need_color()?;
                if self.arms[ai].held != Some(c) {
                    return Err(fail(format!("{arm} does not hold the {c} ring")));
                }
                let b = self.g.base_center;
                let target = [
                    b[0],
                    b[1] + Geometry::side(arm) * self.g.grasp_offset,
                    b[2] + self.g.center_height,
                ];
                self.move_arm(arm, target, t0, t1);
            }
            Action::MovePeg => {
                let c = need_color()?;
                let peg = *self.scene.peg(c).ok_or_else(|| fail(format!("no {c} peg")))?;
                let held = self.arms[ai]
                    .held
                    .ok_or_else(|| fail(format!("{arm} carries nothing to the {c} peg")))?;
                let ri = self.ring_index(held).expect("held ring exists");
                if self.rings[ri].holders[arm.other().index()] {
                    return Err(fail(format!("the {held} ring is still held by {}", arm.other())));
                }
                let target = add(
                    self.grasp_point(arm, peg.pos),
                    [0.0, 0.0, self.g.approach_height],
                );
                if let Some(f) = step.drop_at {
                    // the ring slips out part way and lands on the base
                    let from = self.arms[ai].pos;
                    let tf = t0 + f * (t1 - t0);
                    let tip = add(from, sub(target, from).map(|d| d * f));
                    let RingPhase::Attached { offset, .. } = self.rings[ri].events.last().expect("events").1 else {
                        return Err(fail("ring is not attached".into()));
                    };
                    let mut landed = add(tip, offset);
                    landed[2] = self.g.base_center[2] + self.g.ring_on_base_z;
                    let ring = &mut self.rings[ri];
                    ring.events.push((tf, RingPhase::Static(landed)));
                    ring.pos = landed;
                    ring.holders = [false; 2];
                    self.arms[ai].held = None;
                }
                self.move_arm(arm, target, t0, t1);
            }
            Action::Release => {
                let a = &self.arms[ai];
                if a.jaw > self.g.jaw_closed {
                    return Err(fail(format!("{arm} gripper is not closed")));
                }
                note_color = a.held;
                if let Some(c) = a.held {
                    let ri = self.ring_index(c).expect("held ring exists");
                    let other = arm.other();
                    let ring_pos = self.rings[ri].pos;
                    if self.rings[ri].holders[other.index()] {
                        let otip = self.arms[other.index()].pos;
                        self.rings[ri]
                            .events
                            .push((t0, RingPhase::Attached { arm: other, offset: sub(ring_pos, otip) }));
                    } else {
                        let peg = self
                            .scene
                            .pegs
                            .iter()
                            .find(|p| {
                                let dxy = ((ring_pos[0] - p.pos[0]).powi(2) + (ring_pos[1] - p.pos[1]).powi(2)).sqrt();
                                dxy < self.g.ring_radius && ring_pos[2] >= p.pos[2]
                            })
                            .copied()
                            .ok_or_else(|| fail(format!("{arm} would drop the {c} ring in mid-air")))?;
                        let level = self.stacks.entry(peg.color).or_insert(0);
                        let rest = self.g.stacked(&peg, 0);
                        let rest = [rest[0], rest[1], rest[2] - *level as f64 * self.g.stack_spacing];
                        *level += 1;
                        let ring = &mut self.rings[ri];
                        ring.events.push((t0, RingPhase::Dropping { from: ring_pos, to: rest, t0, t1 }));
                        ring.events.push((t1, RingPhase::Static(rest)));
                        ring.pos = rest;
                        ring.on_peg = Some(peg.color);
                    }
                    self.rings[ri].holders[ai] = false;
                }
                self.arms[ai].held = None;
                self.set_jaw(arm, self.g.jaw_open, t0, t1);
            }
        }
        self.annotations.push(Annotation {
            start: t0,
            end: t1,
            action: step.action,
            arm: ArmSel::from(arm),
            color: note_color,
        });
        Ok(())
    }
}

fn ring_position(events: &[(f64, RingPhase)], t: f64, tips: &[Vec3; 2]) -> Vec3 {
    let idx = events.partition_point(|e| e.0 <= t).saturating_sub(1);
    match events[idx].1 {
        RingPhase::Static(p) => p,
        RingPhase::Attached { arm, offset } => add(tips[arm.index()], offset),
        RingPhase::Dropping { from, to, t0, t1 } => {
            let s = min_jerk((t - t0) / (t1 - t0));
            [0, 1, 2].map(|k| from[k] + s * (to[k] - from[k]))
        }
    }
}

/// Runs the scenario script and samples the resulting motion at
/// `sample_rate`. Action durations are drawn from `timing` with the
/// scenario seed.
pub fn generate_trace(scenario: &Scenario, sample_rate: f64, timing: &TimingTable) -> Result<ExecutionTrace> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidConfig(format!("sample_rate {sample_rate} must be positive")));
    }
    timing.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut ex = Executor::new(scenario);
    let mut cursor = timing.lead_in;
    let mut prev: Option<(f64, f64)> = None;
    for (i, step) in scenario.script.iter().enumerate() {
        let (t0, t1) = match (step.with_previous, prev) {
            (true, Some(p)) => p,
            (true, None) => {
                return Err(Error::UnexecutableScript { step: i, reason: "first step cannot run with a previous one".into() })
            }
            (false, _) => {
                let d = timing.sample(step.action, &mut rng);
                (cursor, cursor + d)
            }
        };
        ex.execute(i, step, t0, t1)?;
        cursor = cursor.max(t1);
        prev = Some((t0, t1));
    }
    let end = cursor + timing.lead_out;
    let n = (end * sample_rate).floor() as usize + 1;

    let width = scenario.geometry.blend_width;
    let paths: Vec<Vec<BlendedPath>> = ex
        .arms
        .iter()
        .map(|a| {
            (0..ARM_FEATURES)
                .map(|c| {
                    let knots: Vec<(f64, f64)> = a.knots.iter().map(|(t, v)| (*t, v[c])).collect();
                    BlendedPath::new(&knots, width)
                })
                .collect()
        })
        .collect();

    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            let states: Vec<ArmState> = paths
                .iter()
                .map(|p| {
                    let v: Vec<f64> = p.iter().map(|path| path.eval(t)).collect();
                    ArmState::new([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]], v[7].clamp(0.0, std::f64::consts::PI))
                })
                .collect();
            let tips = [states[0].pos, states[1].pos];
            let mut scene = ex.scene.clone();
            for (ring, sim) in scene.rings.iter_mut().zip(&ex.rings) {
                ring.pos = ring_position(&sim.events, t, &tips);
            }
            Frame {
                t,
                arms: [states[0], states[1]],
                scene,
            }
        })
        .collect();

    let mut meta = BTreeMap::new();
    meta.insert("name".to_string(), scenario.name.to_string());
    meta.insert("scenario".to_string(), scenario.name.to_string());
    meta.insert("seed".to_string(), scenario.seed.to_string());
    meta.insert("geometry".to_string(), serde_json::to_string(&scenario.geometry)?);
    meta.insert("timing".to_string(), serde_json::to_string(timing)?);
    let trace = ExecutionTrace {
        sample_rate,
        meta,
        frames,
        annotations: Some(ex.annotations),
    };
    trace.validate()?;
    Ok(trace)
}
