//! Scripted ring-transfer scenarios and their initial scenes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trace::{Action, Arm, Color, Peg, Ring, SceneState, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Standard,
    Failure,
    OccupiedPegs,
    Simultaneous,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::Standard,
        ScenarioName::Failure,
        ScenarioName::OccupiedPegs,
        ScenarioName::Simultaneous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Standard => "standard",
            ScenarioName::Failure => "failure",
            ScenarioName::OccupiedPegs => "occupied_pegs",
            ScenarioName::Simultaneous => "simultaneous",
        }
    }

    /// Number of annotated actions the script produces.
    pub fn expected_actions(self) -> usize {
        match self {
            ScenarioName::Standard => 36,
            ScenarioName::Failure => 18,
            ScenarioName::OccupiedPegs => 17,
            ScenarioName::Simultaneous => 12,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Workspace layout and motion constants, meters and radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub ring_radius: f64,
    pub base_center: Vec3,
    /// Peg tip height above the base.
    pub peg_height: f64,
    /// |y| of the peg rows; the grey peg sits on the PSM1 side.
    pub peg_row_y: f64,
    pub peg_spacing: f64,
    pub grey_peg_x: f64,
    /// Vertical distance between stacked rings on a peg.
    pub stack_spacing: f64,
    /// Depth of the top resting ring below the peg tip.
    pub rest_depth: f64,
    /// Ring center height when lying on the base.
    pub ring_on_base_z: f64,
    /// Lateral tip-to-ring-center offset while grasping, toward the arm.
    pub grasp_offset: f64,
    /// Ring center height above the peg tip before a release.
    pub approach_height: f64,
    /// Tip height above the peg tip after an extraction.
    pub lift_height: f64,
    pub center_height: f64,
    pub rest_psm1: Vec3,
    pub rest_psm2: Vec3,
    pub jaw_open: f64,
    pub jaw_closed: f64,
    /// Yaw model for move targets: `side * yaw_side + yaw_x * x + yaw_y * y`.
    pub yaw_side: f64,
    pub yaw_x: f64,
    pub yaw_y: f64,
    /// Width of the minimum-jerk corner blends, seconds.
    pub blend_width: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            ring_radius: 0.01,
            base_center: [0.0, 0.0, 0.0],
            peg_height: 0.05,
            peg_row_y: 0.06,
            peg_spacing: 0.03,
            grey_peg_x: -0.02,
            stack_spacing: 0.012,
            rest_depth: 0.004,
            ring_on_base_z: 0.002,
            grasp_offset: 0.004,
            approach_height: 0.006,
            lift_height: 0.005,
            center_height: 0.06,
            rest_psm1: [0.0, 0.10, 0.07],
            rest_psm2: [0.0, -0.10, 0.07],
            jaw_open: PI / 2.0,
            jaw_closed: PI / 16.0,
            yaw_side: 0.5,
            yaw_x: 3.0,
            yaw_y: 2.0,
            blend_width: 0.2,
        }
    }
}

impl Geometry {
    /// +1 for PSM1 (positive y side), -1 for PSM2.
    pub fn side(arm: Arm) -> f64 {
        match arm {
            Arm::Psm1 => 1.0,
            Arm::Psm2 => -1.0,
        }
    }

    pub fn rest(&self, arm: Arm) -> Vec3 {
        match arm {
            Arm::Psm1 => self.rest_psm1,
            Arm::Psm2 => self.rest_psm2,
        }
    }

    pub fn yaw(&self, arm: Arm, p: &Vec3) -> f64 {
        Geometry::side(arm) * self.yaw_side + self.yaw_x * p[0] + self.yaw_y * p[1]
    }

    fn peg_tip(&self, x: f64, y: f64) -> Vec3 {
        [self.base_center[0] + x, self.base_center[1] + y, self.base_center[2] + self.peg_height]
    }

    /// Default peg layout: grey peg on the PSM1 side, colored pegs in a row
    /// on the PSM2 side.
    pub fn standard_pegs(&self) -> Vec<Peg> {
        let colored = [Color::Red, Color::Green, Color::Blue, Color::Yellow];
        let mut pegs = vec![Peg {
            color: Color::Grey,
            pos: self.peg_tip(self.grey_peg_x, self.peg_row_y),
        }];
        pegs.extend(colored.iter().enumerate().map(|(i, &color)| Peg {
            color,
            pos: self.peg_tip((i as f64 - 1.5) * self.peg_spacing, -self.peg_row_y),
        }));
        pegs
    }

    /// Center of the `level`-th ring from the top resting on `peg`.
    pub fn stacked(&self, peg: &Peg, level: usize) -> Vec3 {
        [
            peg.pos[0],
            peg.pos[1],
            peg.pos[2] - self.rest_depth - level as f64 * self.stack_spacing,
        ]
    }

    pub fn on_base(&self, x: f64, y: f64) -> Vec3 {
        [
            self.base_center[0] + x,
            self.base_center[1] + y,
            self.base_center[2] + self.ring_on_base_z,
        ]
    }
}

/// One scripted action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub action: Action,
    pub arm: Arm,
    /// Ring color for ring actions, peg color for `move_peg`, unused for
    /// `release`.
    pub color: Option<Color>,
    /// Runs concurrently with the previous step, with the same duration.
    #[serde(default)]
    pub with_previous: bool,
    /// Fraction of the action after which the held ring falls to the base.
    #[serde(default)]
    pub drop_at: Option<f64>,
}

impl Step {
    pub fn new(action: Action, arm: Arm, color: Option<Color>) -> Self {
        Step {
            action,
            arm,
            color,
            with_previous: false,
            drop_at: None,
        }
    }

    fn parallel(mut self) -> Self {
        self.with_previous = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub initial_scene: SceneState,
    pub script: Vec<Step>,
    pub seed: u64,
    pub geometry: Geometry,
}

use Action::*;
use Arm::{Psm1, Psm2};

fn s(action: Action, arm: Arm, color: Color) -> Step {
    Step::new(action, arm, Some(color))
}

fn release(arm: Arm) -> Step {
    Step::new(Release, arm, None)
}

/// Ring from the PSM1 side to its own peg on the PSM2 side via a hand-over
/// at the center.
fn transfer(c: Color) -> Vec<Step> {
    vec![
        s(MoveRing, Psm1, c),
        s(Grasp, Psm1, c),
        s(Extract, Psm1, c),
        s(MoveCenter, Psm1, c),
        s(MoveRing, Psm2, c),
        s(Grasp, Psm2, c),
        release(Psm1),
        s(MovePeg, Psm2, c),
        release(Psm2),
    ]
}

fn scene(g: &Geometry, pegs: Vec<Peg>, rings: Vec<Ring>) -> SceneState {
    SceneState {
        rings,
        pegs,
        base_center: g.base_center,
        ring_radius: g.ring_radius,
    }
}

impl Scenario {
    pub fn build(name: ScenarioName, geometry: &Geometry, seed: u64) -> Scenario {
        let g = geometry;
        let pegs = g.standard_pegs();
        let peg = |c: Color| *pegs.iter().find(|p| p.color == c).expect("standard peg");
        let (initial_scene, script) = match name {
            ScenarioName::Standard => {
                let order = [Color::Red, Color::Green, Color::Blue, Color::Yellow];
                let rings = order
                    .iter()
                    .enumerate()
                    .map(|(i, &color)| Ring { color, pos: g.stacked(&peg(Color::Grey), i) })
                    .collect();
                (scene(g, pegs.clone(), rings), order.iter().flat_map(|&c| transfer(c)).collect())
            }
            ScenarioName::Failure => {
                let rings = vec![
                    Ring { color: Color::Red, pos: g.stacked(&peg(Color::Grey), 0) },
                    Ring { color: Color::Blue, pos: g.stacked(&peg(Color::Yellow), 0) },
                ];
                let mut script = transfer(Color::Red);
                let mut carry = s(MovePeg, Psm2, Color::Blue);
                carry.drop_at = Some(0.5);
                script.extend([
                    s(MoveRing, Psm2, Color::Blue),
                    s(Grasp, Psm2, Color::Blue),
                    s(Extract, Psm2, Color::Blue),
                    carry,
                    release(Psm2),
                    s(MoveRing, Psm2, Color::Blue),
                    s(Grasp, Psm2, Color::Blue),
                    s(MovePeg, Psm2, Color::Blue),
                    release(Psm2),
                ]);
                (scene(g, pegs.clone(), rings), script)
            }
            ScenarioName::OccupiedPegs => {
                let rings = vec![
                    Ring { color: Color::Blue, pos: g.stacked(&peg(Color::Red), 0) },
                    Ring { color: Color::Red, pos: g.stacked(&peg(Color::Grey), 0) },
                    Ring { color: Color::Green, pos: g.on_base(0.03, -0.025) },
                ];
                let script = vec![
                    s(MoveRing, Psm2, Color::Blue),
                    s(Grasp, Psm2, Color::Blue),
                    s(Extract, Psm2, Color::Blue),
                    s(MovePeg, Psm2, Color::Blue),
                    release(Psm2),
                    s(MoveRing, Psm1, Color::Red),
                    s(Grasp, Psm1, Color::Red),
                    s(Extract, Psm1, Color::Red),
                    s(MoveRing, Psm2, Color::Red),
                    s(Grasp, Psm2, Color::Red),
                    release(Psm1),
                    s(MovePeg, Psm2, Color::Red),
                    release(Psm2),
                    s(MoveRing, Psm2, Color::Green),
                    s(Grasp, Psm2, Color::Green),
                    s(MovePeg, Psm2, Color::Green),
                    release(Psm2),
                ];
                (scene(g, pegs.clone(), rings), script)
            }
            ScenarioName::Simultaneous => {
                // red peg moved to the PSM1 side so both arms can place at once
                let mut pegs = pegs.clone();
                for p in pegs.iter_mut() {
                    if p.color == Color::Red {
                        p.pos = g.peg_tip(-0.045, g.peg_row_y);
                    }
                    if p.color == Color::Grey {
                        p.pos = g.peg_tip(0.03, g.peg_row_y);
                    }
                }
                let rings = vec![
                    Ring { color: Color::Red, pos: g.on_base(-0.03, 0.03) },
                    Ring { color: Color::Blue, pos: g.on_base(-0.03, -0.03) },
                    Ring { color: Color::Green, pos: g.on_base(0.03, -0.03) },
                ];
                let script = vec![
                    s(MoveRing, Psm1, Color::Red),
                    s(MoveRing, Psm2, Color::Blue).parallel(),
                    s(Grasp, Psm1, Color::Red),
                    s(Grasp, Psm2, Color::Blue).parallel(),
                    s(MovePeg, Psm1, Color::Red),
                    s(MovePeg, Psm2, Color::Blue).parallel(),
                    release(Psm1),
                    release(Psm2).parallel(),
                    s(MoveRing, Psm2, Color::Green),
                    s(Grasp, Psm2, Color::Green),
                    s(MovePeg, Psm2, Color::Green),
                    release(Psm2),
                ];
                (scene(g, pegs, rings), script)
            }
        };
        Scenario {
            name,
            initial_scene,
            script,
            seed,
            geometry: g.clone(),
        }
    }
}
