//! Helpers shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_8;

use rand::{Rng, RngExt};
use surgseg::trace::{ArmState, Color, Frame, Peg, Ring, SceneState};

const ARMS: [&str; 2] = ["psm1", "psm2"];

fn sq(a: [f64; 3], b: [f64; 3], dims: usize) -> f64 {
    (0..dims).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Brute-force evaluation of the seven rule bodies over every argument
/// tuple, producing atoms in their textual form. Distances are compared
/// squared.
pub fn oracle_fluents(frame: &Frame) -> BTreeSet<String> {
    let s = &frame.scene;
    let r2 = s.ring_radius * s.ring_radius;
    let mut out = BTreeSet::new();
    for (ai, name) in ARMS.iter().enumerate() {
        let arm = frame.arms[ai];
        let closed = arm.jaw < FRAC_PI_8;
        if closed {
            out.insert(format!("closed_gripper({name})"));
        }
        if sq(arm.pos, s.base_center, 2) < r2 {
            out.insert(format!("at({name},center)"));
        }
        for c in Color::ALL {
            if let Some(r) = s.rings.iter().find(|r| r.color == c) {
                if sq(arm.pos, r.pos, 3) < r2 {
                    out.insert(format!("at({name},ring,{c})"));
                    if closed {
                        out.insert(format!("in_hand({name},ring,{c})"));
                    }
                }
            }
            if let Some(p) = s.pegs.iter().find(|p| p.color == c) {
                if sq(arm.pos, p.pos, 3) < r2 && p.pos[2] < arm.pos[2] {
                    out.insert(format!("at({name},peg,{c})"));
                }
            }
        }
    }
    let nearest = |y: f64| {
        let d: Vec<f64> = frame.arms.iter().map(|a| (y - a.pos[1]).abs()).collect();
        if d[1] < d[0] { ARMS[1] } else { ARMS[0] }
    };
    for r in &s.rings {
        for p in &s.pegs {
            if sq(r.pos, p.pos, 3) < r2 && r.pos[2] < p.pos[2] {
                out.insert(format!("on(ring,{},peg,{})", r.color, p.color));
            }
        }
        out.insert(format!("reachable({},ring,{})", nearest(r.pos[1]), r.color));
    }
    for p in &s.pegs {
        out.insert(format!("reachable({},peg,{})", nearest(p.pos[1]), p.color));
    }
    out
}

pub fn engine_fluents(frame: &Frame) -> BTreeSet<String> {
    surgseg::fluent::compute_fluents(frame).iter().map(|f| f.to_string()).collect()
}

/// Ring radius and grid step are powers of two so that grid frames hit the
/// strict-inequality boundaries exactly.
pub const GRID_RADIUS: f64 = 1.0 / 128.0;
const GRID_STEP: f64 = 1.0 / 512.0;

fn grid_point<R: Rng>(rng: &mut R, near: [f64; 3]) -> [f64; 3] {
    near.map(|c| c + rng.random_range(-6i32..=6) as f64 * GRID_STEP)
}

fn cont_point<R: Rng>(rng: &mut R, near: [f64; 3], spread: f64) -> [f64; 3] {
    near.map(|c| c + rng.random_range(-spread..spread))
}

/// A random two-arm frame with a random subset of rings and pegs. Half of
/// the frames are snapped to a grid that makes ties and boundary distances
/// common; the rest are continuous.
pub fn random_frame<R: Rng>(rng: &mut R) -> Frame {
    let grid = rng.random_bool(0.5);
    let rr = if grid { GRID_RADIUS } else { rng.random_range(0.005..0.02) };
    let anchor = [0.0, 0.0, 0.0];
    let pick = |rng: &mut R, near: [f64; 3]| {
        if grid {
            grid_point(rng, near)
        } else {
            cont_point(rng, near, 3.0 * rr)
        }
    };
    let mut objects = Vec::new();
    let mut pegs = Vec::new();
    let mut rings = Vec::new();
    for c in Color::ALL {
        if rng.random_bool(0.7) {
            let p = pick(rng, anchor);
            pegs.push(Peg { color: c, pos: p });
            objects.push(p);
        }
        if rng.random_bool(0.7) {
            let near = if objects.is_empty() { anchor } else { objects[rng.random_range(0..objects.len())] };
            let p = pick(rng, near);
            rings.push(Ring { color: c, pos: p });
            objects.push(p);
        }
    }
    let arm = |rng: &mut R| {
        let near = if objects.is_empty() || rng.random_bool(0.2) { anchor } else { objects[rng.random_range(0..objects.len())] };
        let jaw = match rng.random_range(0..4) {
            0 => FRAC_PI_8,
            1 => rng.random_range(0.0..FRAC_PI_8),
            _ => rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
        };
        ArmState::new(pick(rng, near), [0.0, 0.0, 0.0, 1.0], jaw)
    };
    let a1 = arm(rng);
    let a2 = arm(rng);
    Frame {
        t: 0.0,
        arms: [a1, a2],
        scene: SceneState { rings, pegs, base_center: anchor, ring_radius: rr },
    }
}
