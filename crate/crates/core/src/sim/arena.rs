//! Arena geometry and robot hardware parameters.

use serde::{Deserialize, Serialize};

use super::SimError;

/// A circular food disc on the arena floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoodSource {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// Foraging arena: a `width x height` rectangle with the nest strip along
/// `y in [0, nest_width]` (the full-width white band) and black food discs
/// elsewhere on the grey floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaConfig {
    pub width: f64,
    pub height: f64,
    /// Depth of the nest strip measured from the `y = 0` wall.
    pub nest_width: f64,
    pub food_sources: Vec<FoodSource>,
    /// Control cycle length, seconds.
    pub control_dt: f64,
    /// Simulated trial length, seconds.
    pub trial_duration: f64,
    pub wall_thickness: f64,
}

/// Default food layout, transcribed from the reference arena drawing
/// (centers in metres, radii 0.1/0.2/0.3 m).
pub const DEFAULT_FOOD: [FoodSource; 10] = [
    FoodSource { x: 1.2, y: 0.8, radius: 0.1 },
    FoodSource { x: 0.5, y: 0.8, radius: 0.1 },
    FoodSource { x: 1.0, y: 1.3, radius: 0.2 },
    FoodSource { x: 0.5, y: 1.5, radius: 0.2 },
    FoodSource { x: 1.7, y: 1.6, radius: 0.3 },
    FoodSource { x: 3.3, y: 0.8, radius: 0.1 },
    FoodSource { x: 2.6, y: 0.8, radius: 0.1 },
    FoodSource { x: 3.1, y: 1.3, radius: 0.2 },
    FoodSource { x: 2.6, y: 1.5, radius: 0.2 },
    FoodSource { x: 3.8, y: 1.6, radius: 0.3 },
];

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            width: 4.2,
            height: 2.1,
            nest_width: 0.32,
            food_sources: DEFAULT_FOOD.to_vec(),
            control_dt: 0.20,
            trial_duration: 200.0,
            wall_thickness: 0.05,
        }
    }
}

impl ArenaConfig {
    /// Doubled arena for the 2x experiments: width, height and trial time
    /// doubled, food centers scaled with the arena, robot-scale quantities
    /// (nest depth, food radii) unchanged.
    pub fn scaled_2x(&self) -> Self {
        Self {
            width: self.width * 2.0,
            height: self.height * 2.0,
            nest_width: self.nest_width,
            food_sources: self
                .food_sources
                .iter()
                .map(|f| FoodSource { x: f.x * 2.0, y: f.y * 2.0, radius: f.radius })
                .collect(),
            control_dt: self.control_dt,
            trial_duration: self.trial_duration * 2.0,
            wall_thickness: self.wall_thickness,
        }
    }

    /// Number of control cycles per trial: `floor(trial_duration / control_dt)`
    /// (with a guard against representation error in the quotient).
    pub fn n_cycles(&self) -> usize {
        (self.trial_duration / self.control_dt + 1e-9).floor() as usize
    }

    pub fn diagonal(&self) -> f64 {
        (self.width * self.width + self.height * self.height).sqrt()
    }

    /// Point lies inside the nest strip.
    pub fn in_nest(&self, _x: f64, y: f64) -> bool {
        y <= self.nest_width
    }

    /// Index of the food disc containing the point, if any.
    pub fn food_at(&self, x: f64, y: f64) -> Option<usize> {
        self.food_sources.iter().position(|f| {
            let dx = x - f.x;
            let dy = y - f.y;
            dx * dx + dy * dy <= f.radius * f.radius
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(SimError::Config("arena dimensions must be positive".into()));
        }
        if !(self.nest_width > 0.0 && self.nest_width < self.height) {
            return Err(SimError::Config("nest strip must fit inside the arena".into()));
        }
        if !(self.control_dt > 0.0 && self.trial_duration >= self.control_dt) {
            return Err(SimError::Config("trial must span at least one control cycle".into()));
        }
        if !(self.wall_thickness > 0.0) {
            return Err(SimError::Config("wall thickness must be positive".into()));
        }
        for (i, f) in self.food_sources.iter().enumerate() {
            let inside = f.x - f.radius >= 0.0
                && f.x + f.radius <= self.width
                && f.y - f.radius >= 0.0
                && f.y + f.radius <= self.height;
            if !inside {
                return Err(SimError::Config(format!("food source {i} leaves the arena")));
            }
            if f.y - f.radius <= self.nest_width {
                return Err(SimError::Config(format!("food source {i} overlaps the nest strip")));
            }
            if !(f.radius > 0.0) {
                return Err(SimError::Config(format!("food source {i} has no area")));
            }
        }
        Ok(())
    }
}

/// Differential-drive robot parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotSpec {
    pub body_length: f64,
    pub body_width: f64,
    /// Wheel-speed limit, m/s; commands are clamped to `[-max, max]`.
    pub max_linear_speed: f64,
    /// rad/s; consistent with the wheel track and linear limit.
    pub max_angular_speed: f64,
    /// Proximity sensors register obstacles up to this range, metres.
    pub proximity_range: f64,
    pub n_front_proximity: usize,
    pub n_rear_proximity: usize,
    pub n_ground: usize,
    /// Distance between the wheels, metres.
    pub wheel_track: f64,
}

impl Default for RobotSpec {
    fn default() -> Self {
        let max_linear_speed = 0.10;
        let wheel_track = 0.09;
        Self {
            body_length: 0.11,
            body_width: 0.085,
            max_linear_speed,
            max_angular_speed: 2.0 * max_linear_speed / wheel_track,
            proximity_range: 0.11,
            n_front_proximity: 5,
            n_rear_proximity: 2,
            n_ground: 2,
            wheel_track,
        }
    }
}

impl RobotSpec {
    /// Radius of the collision disc: half the body diagonal.
    pub fn collision_radius(&self) -> f64 {
        (self.body_length * self.body_length + self.body_width * self.body_width).sqrt() / 2.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_front_proximity != 5 || self.n_rear_proximity != 2 || self.n_ground != 2 {
            return Err(SimError::Config(
                "sensor layout must be 5 front + 2 rear proximity and 2 ground".into(),
            ));
        }
        if !(self.body_length > 0.0 && self.body_width > 0.0) {
            return Err(SimError::Config("robot body must have positive size".into()));
        }
        if !(self.max_linear_speed > 0.0 && self.wheel_track > 0.0 && self.proximity_range > 0.0) {
            return Err(SimError::Config("speed, track and range must be positive".into()));
        }
        // differential-drive consistency between the stated limits
        let implied = 2.0 * self.max_linear_speed / self.wheel_track;
        if (implied - self.max_angular_speed).abs() > 1e-9 {
            return Err(SimError::Config(format!(
                "max_angular_speed {} inconsistent with 2*max_linear/track = {}",
                self.max_angular_speed, implied
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_arena_is_valid_and_matches_reference_geometry() {
        let a = ArenaConfig::default();
        a.validate().unwrap();
        assert_eq!(a.width, 4.2);
        assert_eq!(a.height, 2.1);
        assert_eq!(a.nest_width, 0.32);
        assert_eq!(a.food_sources.len(), 10);
        assert_eq!(a.n_cycles(), 1000);
        let mut radii: Vec<f64> = a.food_sources.iter().map(|f| f.radius).collect();
        radii.sort_by(|x, y| x.partial_cmp(y).unwrap());
        radii.dedup();
        assert_eq!(radii, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn scaled_arena_doubles_dimensions_and_duration() {
        let a = ArenaConfig::default();
        let b = a.scaled_2x();
        b.validate().unwrap();
        assert_eq!(b.width, 8.4);
        assert_eq!(b.height, 4.2);
        assert_eq!(b.trial_duration, 400.0);
        assert_eq!(b.nest_width, a.nest_width);
        assert_eq!(b.n_cycles(), 2000);
        assert_eq!(b.food_sources[0].radius, a.food_sources[0].radius);
    }

    #[test]
    fn validation_rejects_food_in_nest_or_outside() {
        let mut a = ArenaConfig::default();
        a.food_sources[0].y = 0.2;
        assert!(a.validate().is_err());
        let mut a = ArenaConfig::default();
        a.food_sources[0].x = 4.15;
        assert!(a.validate().is_err());
    }

    #[test]
    fn robot_spec_consistency() {
        let s = RobotSpec::default();
        s.validate().unwrap();
        assert!((s.max_angular_speed - 2.2222).abs() < 1e-3);
        assert!((s.collision_radius() - 0.0695).abs() < 1e-3);
        let mut bad = RobotSpec::default();
        bad.max_angular_speed = 3.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn region_queries() {
        let a = ArenaConfig::default();
        assert!(a.in_nest(1.0, 0.1));
        assert!(!a.in_nest(1.0, 0.5));
        assert_eq!(a.food_at(1.2, 0.8), Some(0));
        assert_eq!(a.food_at(2.1, 1.05), None);
    }
}
