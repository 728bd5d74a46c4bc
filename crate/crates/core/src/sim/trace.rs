//! Per-cycle trial records.

use std::io::Write;

/// Snapshot of one robot at the end of a control cycle: post-step pose and
/// carrying flag, plus the scaled sensor vector and applied wheel commands
/// of the cycle that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotFrame {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub carrying: bool,
    /// 7 proximity + 2 ground, scaled to `[-1, 1]`, after faults.
    pub sensors: [f64; 9],
    /// Applied wheel commands (left, right), m/s, after clamp and faults.
    pub wheels: [f64; 2],
}

impl RobotFrame {
    pub fn pose_only(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading, carrying: false, sensors: [0.0; 9], wheels: [0.0; 2] }
    }
}

/// Cycle-major trial recording: `frames[cycle * n_robots + robot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    n_robots: usize,
    /// Poses at trial start, before the first control cycle.
    initial: Vec<RobotFrame>,
    frames: Vec<RobotFrame>,
}

impl Trace {
    pub fn new(initial: Vec<RobotFrame>, n_cycles_hint: usize) -> Self {
        let n_robots = initial.len();
        Self {
            n_robots,
            initial,
            frames: Vec::with_capacity(n_cycles_hint * n_robots),
        }
    }

    pub fn n_robots(&self) -> usize {
        self.n_robots
    }

    pub fn n_cycles(&self) -> usize {
        self.frames.len() / self.n_robots.max(1)
    }

    pub fn initial(&self) -> &[RobotFrame] {
        &self.initial
    }

    pub fn push_cycle(&mut self, frames: &[RobotFrame]) {
        debug_assert_eq!(frames.len(), self.n_robots);
        self.frames.extend_from_slice(frames);
    }

    pub fn frame(&self, cycle: usize, robot: usize) -> &RobotFrame {
        &self.frames[cycle * self.n_robots + robot]
    }

    pub fn cycle(&self, cycle: usize) -> &[RobotFrame] {
        let s = cycle * self.n_robots;
        &self.frames[s..s + self.n_robots]
    }

    pub fn cycles(&self) -> impl Iterator<Item = &[RobotFrame]> {
        self.frames.chunks_exact(self.n_robots)
    }

    /// Line-delimited export: `cycle,robot_id,x,y,heading,carrying`.
    pub fn export_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "cycle,robot_id,x,y,heading,carrying")?;
        for (c, frames) in self.cycles().enumerate() {
            for (r, f) in frames.iter().enumerate() {
                writeln!(w, "{},{},{},{},{},{}", c, r, f.x, f.y, f.heading, f.carrying as u8)?;
            }
        }
        Ok(())
    }
}

/// Outcome of one foraging trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Food items delivered per robot (items / swarm size).
    pub fitness: f64,
    pub items_delivered: usize,
    /// Items delivered by each robot individually.
    pub per_robot_delivered: Vec<usize>,
    pub trace: Trace,
    pub seed: u64,
}
