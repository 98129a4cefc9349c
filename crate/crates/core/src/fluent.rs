//! Semantic scene fluents: ground logic atoms computed from arm kinematics and
//! the geometric scene features of one frame.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::trace::{Arm, Color, Frame, Vec3};

/// Jaw angle below which a gripper counts as closed.
pub const CLOSED_JAW: f64 = PI / 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectClass {
    Ring,
    Peg,
}

impl ObjectClass {
    fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Ring => "ring",
            ObjectClass::Peg => "peg",
        }
    }
}

/// Predicate names, also the order used by feature encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    AtRing,
    AtPeg,
    InHand,
    On,
    Reachable,
    ClosedGripper,
    AtCenter,
}

/// A ground atom. Arity is fixed by the variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fluent {
    AtRing { arm: Arm, color: Color },
    AtPeg { arm: Arm, color: Color },
    InHand { arm: Arm, color: Color },
    On { ring: Color, peg: Color },
    Reachable { arm: Arm, object: ObjectClass, color: Color },
    ClosedGripper { arm: Arm },
    AtCenter { arm: Arm },
}

impl Fluent {
    pub fn predicate(&self) -> Predicate {
        match self {
            Fluent::AtRing { .. } => Predicate::AtRing,
            Fluent::AtPeg { .. } => Predicate::AtPeg,
            Fluent::InHand { .. } => Predicate::InHand,
            Fluent::On { .. } => Predicate::On,
            Fluent::Reachable { .. } => Predicate::Reachable,
            Fluent::ClosedGripper { .. } => Predicate::ClosedGripper,
            Fluent::AtCenter { .. } => Predicate::AtCenter,
        }
    }

    /// The arm argument, if the predicate has one.
    pub fn arm(&self) -> Option<Arm> {
        match *self {
            Fluent::AtRing { arm, .. }
            | Fluent::AtPeg { arm, .. }
            | Fluent::InHand { arm, .. }
            | Fluent::Reachable { arm, .. }
            | Fluent::ClosedGripper { arm }
            | Fluent::AtCenter { arm } => Some(arm),
            Fluent::On { .. } => None,
        }
    }

    /// The same atom with PSM1 and PSM2 exchanged.
    pub fn swap_arms(self) -> Fluent {
        match self {
            Fluent::AtRing { arm, color } => Fluent::AtRing { arm: arm.other(), color },
            Fluent::AtPeg { arm, color } => Fluent::AtPeg { arm: arm.other(), color },
            Fluent::InHand { arm, color } => Fluent::InHand { arm: arm.other(), color },
            Fluent::On { .. } => self,
            Fluent::Reachable { arm, object, color } => Fluent::Reachable {
                arm: arm.other(),
                object,
                color,
            },
            Fluent::ClosedGripper { arm } => Fluent::ClosedGripper { arm: arm.other() },
            Fluent::AtCenter { arm } => Fluent::AtCenter { arm: arm.other() },
        }
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fluent::AtRing { arm, color } => write!(f, "at({arm},ring,{color})"),
            Fluent::AtPeg { arm, color } => write!(f, "at({arm},peg,{color})"),
            Fluent::InHand { arm, color } => write!(f, "in_hand({arm},ring,{color})"),
            Fluent::On { ring, peg } => write!(f, "on(ring,{ring},peg,{peg})"),
            Fluent::Reachable { arm, object, color } => {
                write!(f, "reachable({arm},{},{color})", object.as_str())
            }
            Fluent::ClosedGripper { arm } => write!(f, "closed_gripper({arm})"),
            Fluent::AtCenter { arm } => write!(f, "at({arm},center)"),
        }
    }
}

impl FromStr for Fluent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed fluent `{s}`");
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(bad)?.split(',').collect();
        let arm = |a: &str| match a {
            "psm1" => Ok(Arm::Psm1),
            "psm2" => Ok(Arm::Psm2),
            _ => Err(bad()),
        };
        let color = |c: &str| c.parse::<Color>();
        Ok(match (name, args.as_slice()) {
            ("at", [a, "ring", c]) => Fluent::AtRing { arm: arm(a)?, color: color(c)? },
            ("at", [a, "peg", c]) => Fluent::AtPeg { arm: arm(a)?, color: color(c)? },
            ("at", [a, "center"]) => Fluent::AtCenter { arm: arm(a)? },
            ("in_hand", [a, "ring", c]) => Fluent::InHand { arm: arm(a)?, color: color(c)? },
            ("on", ["ring", r, "peg", p]) => Fluent::On { ring: color(r)?, peg: color(p)? },
            ("reachable", [a, o, c]) => Fluent::Reachable {
                arm: arm(a)?,
                object: match *o {
                    "ring" => ObjectClass::Ring,
                    "peg" => ObjectClass::Peg,
                    _ => return Err(bad()),
                },
                color: color(c)?,
            },
            ("closed_gripper", [a]) => Fluent::ClosedGripper { arm: arm(a)? },
            _ => return Err(bad()),
        })
    }
}

impl Serialize for Fluent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fluent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Set of fluents holding in one frame; equality ignores insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FluentSet(BTreeSet<Fluent>);

impl FluentSet {
    pub fn new() -> Self {
        FluentSet::default()
    }

    pub fn insert(&mut self, fluent: Fluent) -> bool {
        self.0.insert(fluent)
    }

    pub fn contains(&self, fluent: &Fluent) -> bool {
        self.0.contains(fluent)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fluent> {
        self.0.iter()
    }

    pub fn without_reachable(&self) -> FluentSet {
        self.0
            .iter()
            .filter(|f| f.predicate() != Predicate::Reachable)
            .copied()
            .collect()
    }

    pub fn swap_arms(&self) -> FluentSet {
        self.0.iter().map(|f| f.swap_arms()).collect()
    }

    /// Arms for which some atom of `predicate` holds.
    pub fn arms_with(&self, predicate: Predicate) -> impl Iterator<Item = Arm> + '_ {
        Arm::BOTH
            .into_iter()
            .filter(move |&a| self.0.iter().any(|f| f.predicate() == predicate && f.arm() == Some(a)))
    }

    pub fn count(&self, predicate: Predicate) -> usize {
        self.0.iter().filter(|f| f.predicate() == predicate).count()
    }
}

impl FromIterator<Fluent> for FluentSet {
    fn from_iter<I: IntoIterator<Item = Fluent>>(iter: I) -> Self {
        FluentSet(iter.into_iter().collect())
    }
}

impl fmt::Display for FluentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, fl) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{fl}")?;
        }
        f.write_str("}")
    }
}

pub fn fluents_equal(a: &FluentSet, b: &FluentSet) -> bool {
    a == b
}

fn dist(a: &Vec3, b: &Vec3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn dist_xy(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Arm whose y coordinate is closest to `y`; PSM1 wins exact ties.
fn closest_arm(frame: &Frame, y: f64) -> Arm {
    let d1 = (y - frame.arm(Arm::Psm1).pos[1]).abs();
    let d2 = (y - frame.arm(Arm::Psm2).pos[1]).abs();
    if d2 < d1 {
        Arm::Psm2
    } else {
        Arm::Psm1
    }
}

/// All fluents whose rule bodies hold in `frame`. Comparisons are strict.
pub fn compute_fluents(frame: &Frame) -> FluentSet {
    let scene = &frame.scene;
    let rr = scene.ring_radius;
    let mut out = FluentSet::new();

    for arm in Arm::BOTH {
        let state = frame.arm(arm);
        let p = &state.pos;
        let closed = state.jaw < CLOSED_JAW;
        if closed {
            out.insert(Fluent::ClosedGripper { arm });
        }
        if dist_xy(p, &scene.base_center) < rr {
            out.insert(Fluent::AtCenter { arm });
        }
        for ring in &scene.rings {
            if dist(p, &ring.pos) < rr {
                out.insert(Fluent::AtRing { arm, color: ring.color });
                if closed {
                    out.insert(Fluent::InHand { arm, color: ring.color });
                }
            }
        }
        for peg in &scene.pegs {
            if dist(p, &peg.pos) < rr && peg.pos[2] < p[2] {
                out.insert(Fluent::AtPeg { arm, color: peg.color });
            }
        }
    }

    for ring in &scene.rings {
        for peg in &scene.pegs {
            if dist(&ring.pos, &peg.pos) < rr && ring.pos[2] < peg.pos[2] {
                out.insert(Fluent::On { ring: ring.color, peg: peg.color });
            }
        }
        out.insert(Fluent::Reachable {
            arm: closest_arm(frame, ring.pos[1]),
            object: ObjectClass::Ring,
            color: ring.color,
        });
    }
    for peg in &scene.pegs {
        out.insert(Fluent::Reachable {
            arm: closest_arm(frame, peg.pos[1]),
            object: ObjectClass::Peg,
            color: peg.color,
        });
    }
    out
}
