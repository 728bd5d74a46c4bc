//! Deterministic discrete-time 2D simulator of the foraging arena:
//! differential-drive kinematics, proximity/ground sensing, collision
//! resolution, food pickup and delivery, and trial orchestration.
//!
//! Physics is a kinematic unicycle with circular collision discs (radius =
//! half the body diagonal). Robots sense walls and each other with linear
//! proximity activations `1 - d/range`, and read the floor colour class
//! under two sample points at the body front. All randomness is derived
//! from the trial seed, so a trial is a pure function of its inputs.

mod arena;
mod trace;

pub use arena::{ArenaConfig, FoodSource, RobotSpec, DEFAULT_FOOD};
pub use trace::{RobotFrame, Trace, TrialResult};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::controller::{CompiledNetwork, ControllerError, Genotype, N_SENSOR_INPUTS};
use crate::faults::{apply_actuator_fault, apply_sensor_fault, Disruption, FaultCondition};
use crate::seeds;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown robot id {0}")]
    UnknownRobot(usize),
    #[error("controller rejected: {0}")]
    Controller(#[from] ControllerError),
    #[error("trial setup mismatch: {0}")]
    Setup(String),
}

/// Sensor mounting angles relative to the heading: five front, two rear.
const PROX_ANGLES: [f64; 7] = [
    -0.7,
    -0.35,
    0.0,
    0.35,
    0.7,
    std::f64::consts::PI - 0.35,
    std::f64::consts::PI + 0.35,
];

/// Raw ground classes before scaling to `[-1, 1]`.
const GROUND_FOOD: f64 = 0.0;
const GROUND_GREY: f64 = 0.5;
const GROUND_NEST: f64 = 1.0;

/// Wanderer disruption resamples its wheel commands every this many cycles.
const WANDER_RESAMPLE_CYCLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotBody {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub carrying: bool,
}

/// Mutable world state during a trial.
#[derive(Debug, Clone)]
pub struct World {
    arena: ArenaConfig,
    spec: RobotSpec,
    robots: Vec<RobotBody>,
    /// Robots that other robots cannot displace.
    pinned: Vec<bool>,
    items_delivered: usize,
    per_robot_delivered: Vec<usize>,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Distance along a ray from inside the arena rectangle to its boundary.
fn ray_to_walls(ox: f64, oy: f64, dx: f64, dy: f64, w: f64, h: f64) -> f64 {
    let tx = if dx > 1e-12 {
        (w - ox) / dx
    } else if dx < -1e-12 {
        -ox / dx
    } else {
        f64::INFINITY
    };
    let ty = if dy > 1e-12 {
        (h - oy) / dy
    } else if dy < -1e-12 {
        -oy / dy
    } else {
        f64::INFINITY
    };
    tx.min(ty).max(0.0)
}

/// Nearest non-negative intersection of a ray with a circle, if any.
fn ray_to_circle(ox: f64, oy: f64, dx: f64, dy: f64, cx: f64, cy: f64, r: f64) -> Option<f64> {
    let mx = cx - ox;
    let my = cy - oy;
    let b = mx * dx + my * dy;
    let c = mx * mx + my * my - r * r;
    if c <= 0.0 {
        return Some(0.0); // origin on or inside the circle
    }
    if b <= 0.0 {
        return None; // circle behind the ray
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    Some((b - disc.sqrt()).max(0.0))
}

impl World {
    pub fn new(
        arena: ArenaConfig,
        spec: RobotSpec,
        poses: Vec<(f64, f64, f64)>,
    ) -> Result<Self, SimError> {
        arena.validate()?;
        spec.validate()?;
        let n = poses.len();
        if n == 0 {
            return Err(SimError::Setup("at least one robot required".into()));
        }
        let robots = poses
            .into_iter()
            .map(|(x, y, heading)| RobotBody { x, y, heading, carrying: false })
            .collect();
        Ok(Self {
            arena,
            spec,
            robots,
            pinned: vec![false; n],
            items_delivered: 0,
            per_robot_delivered: vec![0; n],
        })
    }

    pub fn arena(&self) -> &ArenaConfig {
        &self.arena
    }

    pub fn spec(&self) -> &RobotSpec {
        &self.spec
    }

    pub fn robots(&self) -> &[RobotBody] {
        &self.robots
    }

    pub fn items_delivered(&self) -> usize {
        self.items_delivered
    }

    pub fn per_robot_delivered(&self) -> &[usize] {
        &self.per_robot_delivered
    }

    pub fn set_pinned(&mut self, robot: usize, pinned: bool) {
        self.pinned[robot] = pinned;
    }

    /// Raw sensor readings before faults and scaling: proximity activations
    /// in `[0,1]` (1 = touching) and ground colour classes in `[0,1]`.
    pub fn sense_raw(&self, robot: usize) -> Result<([f64; 7], [f64; 2]), SimError> {
        let body = *self.robots.get(robot).ok_or(SimError::UnknownRobot(robot))?;
        let r_coll = self.spec.collision_radius();
        let range = self.spec.proximity_range;

        let mut prox = [0.0; 7];
        for (k, off) in PROX_ANGLES.iter().enumerate() {
            let dir = body.heading + off;
            let (dy, dx) = dir.sin_cos();
            let ox = body.x + r_coll * dx;
            let oy = body.y + r_coll * dy;
            let mut d = ray_to_walls(ox, oy, dx, dy, self.arena.width, self.arena.height);
            for (j, other) in self.robots.iter().enumerate() {
                if j == robot {
                    continue;
                }
                if let Some(t) = ray_to_circle(ox, oy, dx, dy, other.x, other.y, r_coll) {
                    d = d.min(t);
                }
            }
            if d < range {
                prox[k] = 1.0 - d / range;
            }
        }

        let mut ground = [0.0; 2];
        let (hy, hx) = body.heading.sin_cos();
        let fw = self.spec.body_length / 2.0;
        let lat = self.spec.body_width / 4.0;
        for (k, side) in [1.0, -1.0].iter().enumerate() {
            let px = body.x + fw * hx - side * lat * hy;
            let py = body.y + fw * hy + side * lat * hx;
            ground[k] = if self.arena.food_at(px, py).is_some() {
                GROUND_FOOD
            } else if self.arena.in_nest(px, py) {
                GROUND_NEST
            } else {
                GROUND_GREY
            };
        }
        Ok((prox, ground))
    }

    /// Faulted, scaled sensor vector: 7 proximity then 2 ground, in `[-1,1]`.
    pub fn sense(
        &self,
        robot: usize,
        fault: FaultCondition,
        rng: &mut impl Rng,
    ) -> Result<[f64; N_SENSOR_INPUTS], SimError> {
        let (mut prox, mut ground) = self.sense_raw(robot)?;
        apply_sensor_fault(fault, &mut prox, &mut ground, rng);
        let mut out = [0.0; N_SENSOR_INPUTS];
        for k in 0..7 {
            out[k] = 2.0 * prox[k] - 1.0;
        }
        out[7] = 2.0 * ground[0] - 1.0;
        out[8] = 2.0 * ground[1] - 1.0;
        Ok(out)
    }

    /// Advance one control cycle with per-robot wheel commands (m/s).
    /// Commands are clamped to the speed limit; wall and robot overlaps are
    /// resolved by rigid displacement; pickups and deliveries are scored.
    pub fn step(&mut self, commands: &[(f64, f64)]) -> Result<(), SimError> {
        if commands.len() != self.robots.len() {
            return Err(SimError::Setup(format!(
                "{} commands for {} robots",
                commands.len(),
                self.robots.len()
            )));
        }
        let dt = self.arena.control_dt;
        let vmax = self.spec.max_linear_speed;
        let track = self.spec.wheel_track;

        for (i, body) in self.robots.iter_mut().enumerate() {
            let l = commands[i].0.clamp(-vmax, vmax);
            let rr = commands[i].1.clamp(-vmax, vmax);
            let v = 0.5 * (l + rr);
            let w = (rr - l) / track;
            if w.abs() < 1e-12 {
                let (sy, cx) = body.heading.sin_cos();
                body.x += v * dt * cx;
                body.y += v * dt * sy;
            } else {
                let radius = v / w;
                let h1 = body.heading + w * dt;
                body.x += radius * (h1.sin() - body.heading.sin());
                body.y -= radius * (h1.cos() - body.heading.cos());
            }
            body.heading = wrap_angle(body.heading + w * dt);
        }

        self.clamp_to_walls();
        self.resolve_robot_overlaps();
        self.clamp_to_walls();

        for i in 0..self.robots.len() {
            let body = &mut self.robots[i];
            if !body.carrying {
                if self.arena.food_at(body.x, body.y).is_some() {
                    body.carrying = true;
                }
            } else if self.arena.in_nest(body.x, body.y) {
                body.carrying = false;
                self.items_delivered += 1;
                self.per_robot_delivered[i] += 1;
            }
        }
        Ok(())
    }

    fn clamp_to_walls(&mut self) {
        let r = self.spec.collision_radius();
        let (w, h) = (self.arena.width, self.arena.height);
        for (i, body) in self.robots.iter_mut().enumerate() {
            if self.pinned[i] {
                continue;
            }
            body.x = body.x.clamp(r, w - r);
            body.y = body.y.clamp(r, h - r);
        }
    }

    fn resolve_robot_overlaps(&mut self) {
        let r2 = 2.0 * self.spec.collision_radius();
        let n = self.robots.len();
        for _pass in 0..8 {
            let mut moved = false;
            for i in 0..n {
                for j in i + 1..n {
                    let dx = self.robots[j].x - self.robots[i].x;
                    let dy = self.robots[j].y - self.robots[i].y;
                    let d2 = dx * dx + dy * dy;
                    if d2 >= r2 * r2 {
                        continue;
                    }
                    let d = d2.sqrt();
                    // coincident centers separate along x
                    let (ux, uy) = if d > 1e-12 { (dx / d, dy / d) } else { (1.0, 0.0) };
                    let overlap = r2 - d;
                    match (self.pinned[i], self.pinned[j]) {
                        (false, false) => {
                            let half = overlap / 2.0;
                            self.robots[i].x -= ux * half;
                            self.robots[i].y -= uy * half;
                            self.robots[j].x += ux * half;
                            self.robots[j].y += uy * half;
                        }
                        (true, false) => {
                            self.robots[j].x += ux * overlap;
                            self.robots[j].y += uy * overlap;
                        }
                        (false, true) => {
                            self.robots[i].x -= ux * overlap;
                            self.robots[i].y -= uy * overlap;
                        }
                        (true, true) => continue,
                    }
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }
}

/// Everything needed to run one trial.
#[derive(Debug, Clone)]
pub struct TrialSetup<'a> {
    pub arena: &'a ArenaConfig,
    pub robot: &'a RobotSpec,
    /// One controller genotype per robot (homogeneous swarms pass the same
    /// reference for every slot).
    pub genotypes: Vec<&'a Genotype>,
    /// One fault condition per robot.
    pub faults: &'a [FaultCondition],
    pub disruption: Option<Disruption>,
    pub seed: u64,
}

/// Internal per-robot command source during a trial.
enum ControlMode {
    Controller,
    Wanderer,
    Squatter,
}

/// Run one foraging trial. Bit-exact reproducible for equal inputs.
pub fn run_trial(setup: &TrialSetup) -> Result<TrialResult, SimError> {
    let n = setup.genotypes.len();
    if n == 0 {
        return Err(SimError::Setup("at least one robot required".into()));
    }
    if setup.faults.len() != n {
        return Err(SimError::Setup(format!(
            "{} fault conditions for {} robots",
            setup.faults.len(),
            n
        )));
    }
    let nets: Vec<CompiledNetwork> = setup
        .genotypes
        .iter()
        .map(|g| CompiledNetwork::compile(g))
        .collect::<Result<_, _>>()?;

    let mut modes: Vec<ControlMode> = (0..n).map(|_| ControlMode::Controller).collect();
    if let Some(d) = setup.disruption {
        let robot = d.robot();
        if robot >= n {
            return Err(SimError::Setup(format!("disrupted robot {robot} out of range")));
        }
        modes[robot] = match d {
            Disruption::NestWanderer { .. } => ControlMode::Wanderer,
            Disruption::FoodSquatter { source, .. } => {
                if source >= setup.arena.food_sources.len() {
                    return Err(SimError::Setup(format!("food source {source} out of range")));
                }
                ControlMode::Squatter
            }
        };
    }

    let poses = place_robots(setup, &modes)?;
    let mut world = World::new(setup.arena.clone(), setup.robot.clone(), poses)?;
    if let Some(d) = setup.disruption {
        world.set_pinned(d.robot(), true);
    }

    let mut fault_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| ChaCha8Rng::seed_from_u64(seeds::mix(&[setup.seed, 0xFA01, i as u64])))
        .collect();
    let mut wander_rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[setup.seed, 0x3A1D]));
    let mut wander_cmd = (0.0, 0.0);

    let mut states: Vec<_> = nets.iter().map(|net| net.fresh_state()).collect();
    let n_cycles = setup.arena.n_cycles();
    let initial: Vec<RobotFrame> = world
        .robots()
        .iter()
        .map(|b| RobotFrame::pose_only(b.x, b.y, b.heading))
        .collect();
    let mut trace = Trace::new(initial, n_cycles);

    let vmax = setup.robot.max_linear_speed;
    let band = setup.robot.body_length / 2.0;
    let r_coll = setup.robot.collision_radius();
    let mut commands = vec![(0.0, 0.0); n];
    let mut sensor_log = vec![[0.0; 9]; n];
    let mut frames = vec![RobotFrame::pose_only(0.0, 0.0, 0.0); n];

    for cycle in 0..n_cycles {
        for i in 0..n {
            let sensors = world.sense(i, setup.faults[i], &mut fault_rngs[i])?;
            sensor_log[i] = sensors;
            commands[i] = match modes[i] {
                ControlMode::Controller => {
                    let out = nets[i].activate(&mut states[i], &sensors);
                    let mut l = (out[0] * vmax).clamp(-vmax, vmax);
                    let mut r = (out[1] * vmax).clamp(-vmax, vmax);
                    apply_actuator_fault(setup.faults[i], &mut l, &mut r);
                    (l, r)
                }
                ControlMode::Wanderer => {
                    if cycle % WANDER_RESAMPLE_CYCLES == 0 {
                        wander_cmd = (
                            wander_rng.random_range(-vmax..=vmax),
                            wander_rng.random_range(-vmax..=vmax),
                        );
                    }
                    wander_cmd
                }
                ControlMode::Squatter => (0.0, 0.0),
            };
        }
        world.step(&commands)?;

        // a wandering disruptor stays in a band around the nest border
        if let Some(Disruption::NestWanderer { robot }) = setup.disruption {
            let nest = setup.arena.nest_width;
            let lo = (nest - band).max(r_coll);
            let hi = (nest + band).min(setup.arena.height - r_coll);
            let body = world.robots[robot];
            world.robots[robot].y = body.y.clamp(lo, hi);
            world.robots[robot].x = body.x.clamp(r_coll, setup.arena.width - r_coll);
        }

        for (i, body) in world.robots().iter().enumerate() {
            frames[i] = RobotFrame {
                x: body.x,
                y: body.y,
                heading: body.heading,
                carrying: body.carrying,
                sensors: sensor_log[i],
                wheels: [commands[i].0, commands[i].1],
            };
        }
        trace.push_cycle(&frames);
    }

    Ok(TrialResult {
        fitness: world.items_delivered() as f64 / n as f64,
        items_delivered: world.items_delivered(),
        per_robot_delivered: world.per_robot_delivered().to_vec(),
        trace,
        seed: setup.seed,
    })
}

/// Place robots without overlap: disrupted robots first at their mandated
/// spots, then the rest by rejection sampling (grid fallback after 1000
/// misses per robot).
fn place_robots(setup: &TrialSetup, modes: &[ControlMode]) -> Result<Vec<(f64, f64, f64)>, SimError> {
    let n = modes.len();
    let r = setup.robot.collision_radius();
    let (w, h) = (setup.arena.width, setup.arena.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[setup.seed, 0x91AC]));
    let mut placed: Vec<Option<(f64, f64, f64)>> = vec![None; n];

    if let Some(d) = setup.disruption {
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pose = match d {
            Disruption::NestWanderer { .. } => {
                let x = rng.random_range(r..=(w - r));
                (x, setup.arena.nest_width.clamp(r, h - r), heading)
            }
            Disruption::FoodSquatter { source, .. } => {
                let f = &setup.arena.food_sources[source];
                (f.x.clamp(r, w - r), f.y.clamp(r, h - r), heading)
            }
        };
        placed[d.robot()] = Some(pose);
    }

    let overlaps = |placed: &[Option<(f64, f64, f64)>], x: f64, y: f64| {
        placed.iter().flatten().any(|&(px, py, _)| {
            let dx = px - x;
            let dy = py - y;
            dx * dx + dy * dy < (2.0 * r) * (2.0 * r)
        })
    };

    for i in 0..n {
        if placed[i].is_some() {
            continue;
        }
        let mut found = false;
        for _ in 0..1000 {
            let x = rng.random_range(r..=(w - r));
            let y = rng.random_range(r..=(h - r));
            if !overlaps(&placed, x, y) {
                let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                placed[i] = Some((x, y, heading));
                found = true;
                break;
            }
        }
        if !found {
            // deterministic lattice fallback
            let pitch = 2.5 * r;
            let cols = ((w - 2.0 * r) / pitch).floor() as usize + 1;
            let rows = ((h - 2.0 * r) / pitch).floor() as usize + 1;
            'grid: for gy in 0..rows {
                for gx in 0..cols {
                    let x = r + gx as f64 * pitch;
                    let y = r + gy as f64 * pitch;
                    if !overlaps(&placed, x, y) {
                        placed[i] = Some((x, y, 0.0));
                        break 'grid;
                    }
                }
            }
            if placed[i].is_none() {
                return Err(SimError::Setup("arena too crowded to place robots".into()));
            }
        }
    }
    Ok(placed.into_iter().map(|p| p.unwrap()).collect())
}
