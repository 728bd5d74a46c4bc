//! Disturbance definitions: per-robot sensor/actuator faults, software
//! disruptions, and environmental perturbations, plus their samplers.
//!
//! Sensor faults mutate the *raw* readings (proximity raw in `[0,1]`,
//! ground raw in `[0,1]`) before the simulator scales them to `[-1,1]`.
//! Proximity faults hit only the five front sensors; ground faults hit both
//! ground sensors. Actuator faults scale the post-clamp wheel commands.
//!
//! Scenario text record (one line, replayable):
//! `s1 <category> <seed>|<kind> ...|food=<idx|->|disrupt=<nest:<robot>|food:<robot>:<src>|->`

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot decode scenario: {0}")]
    Decode(String),
}

/// Per-robot fault condition. Exactly one per robot per scenario; equality
/// of this value is the grouping key for the decentralised optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum FaultCondition {
    #[default]
    None,
    ProximityRandom,
    ProximityMax,
    ProximityMin,
    GroundRandom,
    GroundMax,
    GroundMin,
    ActuatorLeftHalf,
    ActuatorRightHalf,
    ActuatorBothHalf,
}

impl FaultCondition {
    pub fn tag(self) -> &'static str {
        match self {
            FaultCondition::None => "none",
            FaultCondition::ProximityRandom => "prox-rand",
            FaultCondition::ProximityMax => "prox-max",
            FaultCondition::ProximityMin => "prox-min",
            FaultCondition::GroundRandom => "ground-rand",
            FaultCondition::GroundMax => "ground-max",
            FaultCondition::GroundMin => "ground-min",
            FaultCondition::ActuatorLeftHalf => "act-left-half",
            FaultCondition::ActuatorRightHalf => "act-right-half",
            FaultCondition::ActuatorBothHalf => "act-both-half",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Some(match s {
            "none" => FaultCondition::None,
            "prox-rand" => FaultCondition::ProximityRandom,
            "prox-max" => FaultCondition::ProximityMax,
            "prox-min" => FaultCondition::ProximityMin,
            "ground-rand" => FaultCondition::GroundRandom,
            "ground-max" => FaultCondition::GroundMax,
            "ground-min" => FaultCondition::GroundMin,
            "act-left-half" => FaultCondition::ActuatorLeftHalf,
            "act-right-half" => FaultCondition::ActuatorRightHalf,
            "act-both-half" => FaultCondition::ActuatorBothHalf,
            _ => return None,
        })
    }
}

/// Software disruption: one robot loses its normal control algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disruption {
    /// Robot wanders back and forth on the nest border, ignoring its
    /// controller.
    NestWanderer { robot: usize },
    /// Robot sits immobile on a food source.
    FoodSquatter { robot: usize, source: usize },
}

impl Disruption {
    pub fn robot(&self) -> usize {
        match *self {
            Disruption::NestWanderer { robot } => robot,
            Disruption::FoodSquatter { robot, .. } => robot,
        }
    }
}

/// Disturbance categories available to the experiment protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Proximity,
    Ground,
    Actuator,
    SoftwareNest,
    SoftwareFood,
    FoodScarcity,
    Proximity2x,
    FoodScarcity2x,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Proximity,
        Category::Ground,
        Category::Actuator,
        Category::SoftwareNest,
        Category::SoftwareFood,
        Category::FoodScarcity,
        Category::Proximity2x,
        Category::FoodScarcity2x,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Proximity => "proximity",
            Category::Ground => "ground",
            Category::Actuator => "actuator",
            Category::SoftwareNest => "software-nest",
            Category::SoftwareFood => "software-food",
            Category::FoodScarcity => "food-scarcity",
            Category::Proximity2x => "proximity-2x",
            Category::FoodScarcity2x => "food-scarcity-2x",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Category::ALL.iter().copied().find(|c| c.name() == s)
    }

    /// Whether the category runs on the doubled arena with a doubled swarm.
    pub fn is_2x(self) -> bool {
        matches!(self, Category::Proximity2x | Category::FoodScarcity2x)
    }

    /// Default swarm size for this category given the base size.
    pub fn n_robots(self, base: usize) -> usize {
        if self.is_2x() { base * 2 } else { base }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully sampled disturbance: per-robot faults plus environment overrides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub category: Category,
    /// One fault condition per robot.
    pub robot_faults: Vec<FaultCondition>,
    /// Food-scarcity: index of the single surviving food source.
    pub keep_food_source: Option<usize>,
    pub disruption: Option<Disruption>,
    /// Seed the scenario was sampled from.
    pub seed: u64,
}

/// Number of food sources in the default arena, used when sampling the
/// food-based disturbances before the arena is known.
const DEFAULT_FOOD_COUNT: usize = 10;

/// Sample a scenario for a category. All randomness derives from `seed`,
/// so any experiment row is replayable from its scenario line.
pub fn sample_scenario(category: Category, n_robots: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0x5ce7]));
    let mut robot_faults = vec![FaultCondition::None; n_robots];
    let mut keep_food_source = None;
    let mut disruption = None;
    match category {
        Category::Proximity | Category::Proximity2x => {
            let kinds = [
                FaultCondition::ProximityRandom,
                FaultCondition::ProximityMax,
                FaultCondition::ProximityMin,
                FaultCondition::None,
            ];
            for f in &mut robot_faults {
                *f = kinds[rng.random_range(0..4)];
            }
        }
        Category::Ground => {
            let kinds = [
                FaultCondition::GroundRandom,
                FaultCondition::GroundMax,
                FaultCondition::GroundMin,
                FaultCondition::None,
            ];
            for f in &mut robot_faults {
                *f = kinds[rng.random_range(0..4)];
            }
        }
        Category::Actuator => {
            let kinds = [
                FaultCondition::ActuatorLeftHalf,
                FaultCondition::ActuatorRightHalf,
                FaultCondition::ActuatorBothHalf,
                FaultCondition::None,
            ];
            for f in &mut robot_faults {
                *f = kinds[rng.random_range(0..4)];
            }
        }
        Category::SoftwareNest => {
            let robot = rng.random_range(0..n_robots);
            disruption = Some(Disruption::NestWanderer { robot });
        }
        Category::SoftwareFood => {
            let robot = rng.random_range(0..n_robots);
            let source = rng.random_range(0..DEFAULT_FOOD_COUNT);
            disruption = Some(Disruption::FoodSquatter { robot, source });
        }
        Category::FoodScarcity | Category::FoodScarcity2x => {
            keep_food_source = Some(rng.random_range(0..DEFAULT_FOOD_COUNT));
        }
    }
    Scenario { category, robot_faults, keep_food_source, disruption, seed }
}

impl Scenario {
    pub fn n_robots(&self) -> usize {
        self.robot_faults.len()
    }

    /// Short label for result rows.
    pub fn label(&self) -> String {
        format!("{}#{}", self.category, self.seed)
    }

    /// One-line replayable text record.
    pub fn encode(&self) -> String {
        let kinds: Vec<&str> = self.robot_faults.iter().map(|f| f.tag()).collect();
        let food = match self.keep_food_source {
            Some(i) => i.to_string(),
            None => "-".to_string(),
        };
        let disrupt = match self.disruption {
            Some(Disruption::NestWanderer { robot }) => format!("nest:{robot}"),
            Some(Disruption::FoodSquatter { robot, source }) => format!("food:{robot}:{source}"),
            None => "-".to_string(),
        };
        format!(
            "s1 {} {}|{}|food={}|disrupt={}",
            self.category,
            self.seed,
            kinds.join(" "),
            food,
            disrupt
        )
    }

    pub fn decode(s: &str) -> Result<Self, ScenarioError> {
        let err = |m: &str| ScenarioError::Decode(m.to_string());
        let rest = s.strip_prefix("s1 ").ok_or_else(|| err("missing s1 header"))?;
        let mut parts = rest.split('|');
        let head = parts.next().ok_or_else(|| err("missing header fields"))?;
        let (cat, seed) = head.split_once(' ').ok_or_else(|| err("bad header"))?;
        let category = Category::from_name(cat).ok_or_else(|| err("unknown category"))?;
        let seed: u64 = seed.parse().map_err(|e| err(&format!("bad seed: {e}")))?;
        let kinds = parts.next().ok_or_else(|| err("missing fault list"))?;
        let robot_faults: Vec<FaultCondition> = kinds
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(|t| FaultCondition::from_tag(t).ok_or_else(|| err("unknown fault kind")))
            .collect::<Result<_, _>>()?;
        let food = parts
            .next()
            .and_then(|f| f.strip_prefix("food="))
            .ok_or_else(|| err("missing food field"))?;
        let keep_food_source = match food {
            "-" => None,
            v => Some(v.parse().map_err(|e| err(&format!("bad food index: {e}")))?),
        };
        let disrupt = parts
            .next()
            .and_then(|f| f.strip_prefix("disrupt="))
            .ok_or_else(|| err("missing disrupt field"))?;
        let disruption = match disrupt {
            "-" => None,
            v => {
                let fields: Vec<&str> = v.split(':').collect();
                match fields.as_slice() {
                    ["nest", r] => Some(Disruption::NestWanderer {
                        robot: r.parse().map_err(|e| err(&format!("bad robot: {e}")))?,
                    }),
                    ["food", r, s] => Some(Disruption::FoodSquatter {
                        robot: r.parse().map_err(|e| err(&format!("bad robot: {e}")))?,
                        source: s.parse().map_err(|e| err(&format!("bad source: {e}")))?,
                    }),
                    _ => return Err(err("bad disrupt field")),
                }
            }
        };
        Ok(Scenario { category, robot_faults, keep_food_source, disruption, seed })
    }
}

/// Apply a sensor fault to raw readings (before scaling to `[-1,1]`).
/// Proximity raw values live in `[0,1]` (1 = touching); ground raw values in
/// `[0,1]` (0 = black/food, 0.5 = grey, 1 = white/nest). Random faults draw
/// anew from the raw range each call (i.e. each control cycle).
pub fn apply_sensor_fault(
    condition: FaultCondition,
    proximity: &mut [f64; 7],
    ground: &mut [f64; 2],
    rng: &mut impl Rng,
) {
    match condition {
        FaultCondition::ProximityRandom => {
            for p in proximity.iter_mut().take(5) {
                *p = rng.random::<f64>();
            }
        }
        FaultCondition::ProximityMax => {
            for p in proximity.iter_mut().take(5) {
                *p = 1.0;
            }
        }
        FaultCondition::ProximityMin => {
            for p in proximity.iter_mut().take(5) {
                *p = 0.0;
            }
        }
        FaultCondition::GroundRandom => {
            for g in ground.iter_mut() {
                *g = rng.random::<f64>();
            }
        }
        FaultCondition::GroundMax => {
            for g in ground.iter_mut() {
                *g = 1.0;
            }
        }
        FaultCondition::GroundMin => {
            for g in ground.iter_mut() {
                *g = 0.0;
            }
        }
        _ => {}
    }
}

/// Apply an actuator fault to post-clamp wheel commands (m/s).
pub fn apply_actuator_fault(condition: FaultCondition, left: &mut f64, right: &mut f64) {
    match condition {
        FaultCondition::ActuatorLeftHalf => *left *= 0.5,
        FaultCondition::ActuatorRightHalf => *right *= 0.5,
        FaultCondition::ActuatorBothHalf => {
            *left *= 0.5;
            *right *= 0.5;
        }
        _ => {}
    }
}
