//! Named datasets built from the scenarios, and the arm-mirroring transform.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{augment_with_noise, generate_trace, Geometry, NoiseConfig, Scenario, ScenarioName, TimingTable};
use crate::error::{Error, Result};
use crate::trace::{Arm, ArmSel, ArmState, ExecutionTrace, Frame};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetName {
    Single(ScenarioName),
    /// Nine standard executions with jittered durations.
    TestA,
    /// One noiseless standard execution plus nine noisy replicas with
    /// beta = 0.01, 0.02, ..., 0.09.
    TestB,
    /// Standard, failure, occupied-pegs and simultaneous executions.
    TestC,
}

impl DatasetName {
    pub fn default_timing(self) -> TimingTable {
        match self {
            DatasetName::TestA => TimingTable {
                move_jitter: 0.6,
                short_jitter: 0.04,
                ..TimingTable::default()
            },
            _ => TimingTable::default(),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetName::Single(s) => write!(f, "{s}"),
            DatasetName::TestA => f.write_str("test_a"),
            DatasetName::TestB => f.write_str("test_b"),
            DatasetName::TestC => f.write_str("test_c"),
        }
    }
}

impl FromStr for DatasetName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "test_a" => Ok(DatasetName::TestA),
            "test_b" => Ok(DatasetName::TestB),
            "test_c" => Ok(DatasetName::TestC),
            _ => s
                .parse::<ScenarioName>()
                .map(DatasetName::Single)
                .map_err(|_| format!("unknown scenario or dataset `{s}`")),
        }
    }
}

impl Serialize for DatasetName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DatasetName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Scenario specification file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub name: DatasetName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    /// Defaults depend on the dataset (jitter only for `test_a`).
    #[serde(default)]
    pub timing: Option<TimingTable>,
    #[serde(default)]
    pub geometry: Geometry,
    /// Noise for `test_b` replicas (its beta is replaced by the sweep), or
    /// added to every trace of other datasets when present.
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

fn default_rate() -> f64 {
    50.0
}

impl GenerateSpec {
    pub fn new(name: DatasetName, seed: u64) -> Self {
        GenerateSpec {
            name,
            seed,
            sample_rate: default_rate(),
            timing: None,
            geometry: Geometry::default(),
            noise: None,
        }
    }

    pub fn timing(&self) -> TimingTable {
        self.timing.clone().unwrap_or_else(|| self.name.default_timing())
    }
}

fn named(mut t: ExecutionTrace, name: String) -> ExecutionTrace {
    t.meta.insert("name".into(), name);
    t
}

/// All traces of a dataset, in a fixed order, each named in `meta["name"]`.
pub fn generate_dataset(spec: &GenerateSpec) -> Result<Vec<ExecutionTrace>> {
    let timing = spec.timing();
    let g = &spec.geometry;
    let one = |name: ScenarioName, seed: u64| generate_trace(&Scenario::build(name, g, seed), spec.sample_rate, &timing);
    let noisy = |t: ExecutionTrace, offset: u64| -> Result<ExecutionTrace> {
        match &spec.noise {
            Some(n) => augment_with_noise(&t, &NoiseConfig { seed: n.seed.wrapping_add(offset), ..n.clone() }),
            None => Ok(t),
        }
    };
    match spec.name {
        DatasetName::Single(s) => Ok(vec![noisy(one(s, spec.seed)?, 0)?]),
        DatasetName::TestA => (0..9u64)
            .map(|i| Ok(named(noisy(one(ScenarioName::Standard, spec.seed + i)?, i)?, format!("test_a_{i:02}"))))
            .collect(),
        DatasetName::TestB => {
            let base = one(ScenarioName::Standard, spec.seed)?;
            let noise = spec.noise.clone().unwrap_or_default();
            let mut out = vec![named(base.clone(), "test_b_00".into())];
            for i in 1..=9u64 {
                let cfg = NoiseConfig {
                    beta: 0.01 * i as f64,
                    seed: noise.seed.wrapping_add(spec.seed).wrapping_add(i),
                    ..noise.clone()
                };
                out.push(named(augment_with_noise(&base, &cfg)?, format!("test_b_{i:02}")));
            }
            Ok(out)
        }
        DatasetName::TestC => ScenarioName::ALL
            .iter()
            .enumerate()
            .map(|(i, &s)| Ok(named(noisy(one(s, spec.seed)?, i as u64)?, format!("test_c_{i:02}_{s}"))))
            .collect(),
    }
}

fn mirror_arm(a: &ArmState) -> ArmState {
    let [x, y, z, w] = a.quat;
    ArmState::new([a.pos[0], -a.pos[1], a.pos[2]], [-x, y, -z, w], a.jaw)
}

/// Reflects the whole execution through the y = 0 plane and exchanges the
/// arms, so that PSM2 performs what PSM1 did on a mirrored scene.
pub fn mirror_trace(trace: &ExecutionTrace) -> Result<ExecutionTrace> {
    let flip = |p: [f64; 3]| [p[0], -p[1], p[2]];
    let mut out = trace.clone();
    for f in out.frames.iter_mut() {
        let Frame { arms, scene, .. } = f;
        *arms = [mirror_arm(&arms[1]), mirror_arm(&arms[0])];
        for r in scene.rings.iter_mut() {
            r.pos = flip(r.pos);
        }
        for p in scene.pegs.iter_mut() {
            p.pos = flip(p.pos);
        }
        scene.base_center = flip(scene.base_center);
    }
    if let Some(ann) = out.annotations.as_mut() {
        for a in ann.iter_mut() {
            a.arm = match a.arm {
                ArmSel::Psm1 => ArmSel::from(Arm::Psm2),
                ArmSel::Psm2 => ArmSel::from(Arm::Psm1),
                ArmSel::Both => ArmSel::Both,
            };
        }
    }
    out.validate()?;
    if out.frames.is_empty() {
        return Err(Error::invalid_trace(None, "empty trace"));
    }
    Ok(out)
}
