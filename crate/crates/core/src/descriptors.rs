//! Behaviour descriptors in `[0,1]^D` computed from trial traces.
//!
//! Two families are provided:
//!
//! * **HBD** — grid statistics of the arena: fraction of a 7x14 cell grid
//!   visited by any robot, mean fraction of robots in the nest-side half,
//!   and normalised mean linear speed (D = 3).
//! * **SDBC** — relations between the entities of the task (robots and
//!   arena walls): mean pairwise robot distance, mean robot-to-nearest-wall
//!   distance, and mean linear speed, each normalised by its analytic
//!   maximum (D = 3; a variant adding the per-feature standard deviation
//!   across cycles gives D = 6).
//!
//! Descriptors are averaged over the traces passed in (the same trials used
//! for the fitness estimate) and clamped into the closed unit cube.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{ArenaConfig, RobotSpec, Trace};

/// Rows (along the arena height) and columns (along the width) of the HBD
/// occupancy grid.
pub const HBD_ROWS: usize = 7;
pub const HBD_COLS: usize = 14;

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("descriptor needs at least one trace with at least one cycle")]
    EmptyTrace,
    #[error("pairwise statistics need at least two robots")]
    SingleRobot,
    #[error("descriptor component {0} is not a number")]
    NotFinite(usize),
}

/// A point in the closed unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor(Vec<f64>);

impl Descriptor {
    /// Clamp components into `[0,1]`; NaN is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self, DescriptorError> {
        for (i, v) in values.iter().enumerate() {
            if v.is_nan() {
                return Err(DescriptorError::NotFinite(i));
            }
        }
        Ok(Self(values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Which descriptor the pipeline computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Hbd,
    Sdbc,
    /// SDBC with per-feature standard deviations appended.
    Sdbc6,
}

impl DescriptorKind {
    pub fn dim(self) -> usize {
        match self {
            DescriptorKind::Hbd | DescriptorKind::Sdbc => 3,
            DescriptorKind::Sdbc6 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Hbd => "hbd",
            DescriptorKind::Sdbc => "sdbc",
            DescriptorKind::Sdbc6 => "sdbc6",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "hbd" => Some(DescriptorKind::Hbd),
            "sdbc" => Some(DescriptorKind::Sdbc),
            "sdbc6" => Some(DescriptorKind::Sdbc6),
            _ => None,
        }
    }

    pub fn compute(
        self,
        traces: &[&Trace],
        arena: &ArenaConfig,
        robot: &RobotSpec,
    ) -> Result<Descriptor, DescriptorError> {
        match self {
            DescriptorKind::Hbd => hbd_compute(traces, arena, robot),
            DescriptorKind::Sdbc => sdbc_compute(traces, arena, robot, false),
            DescriptorKind::Sdbc6 => sdbc_compute(traces, arena, robot, true),
        }
    }
}

fn cell_of(arena: &ArenaConfig, x: f64, y: f64) -> usize {
    let cx = ((x / arena.width * HBD_COLS as f64).floor() as usize).min(HBD_COLS - 1);
    let cy = ((y / arena.height * HBD_ROWS as f64).floor() as usize).min(HBD_ROWS - 1);
    cy * HBD_COLS + cx
}

/// Mean realised speed of one robot over a cycle, as a fraction of the
/// speed limit.
fn step_speed(prev: (f64, f64), cur: (f64, f64), dt: f64, vmax: f64) -> f64 {
    let d = ((cur.0 - prev.0).powi(2) + (cur.1 - prev.1).powi(2)).sqrt();
    d / dt / vmax
}

/// Hand-coded grid-statistics descriptor (D = 3).
pub fn hbd_compute(
    traces: &[&Trace],
    arena: &ArenaConfig,
    robot: &RobotSpec,
) -> Result<Descriptor, DescriptorError> {
    if traces.is_empty() || traces.iter().any(|t| t.n_cycles() == 0) {
        return Err(DescriptorError::EmptyTrace);
    }
    let mut acc = [0.0f64; 3];
    for trace in traces {
        let n = trace.n_robots();
        let mut visited = vec![false; HBD_ROWS * HBD_COLS];
        for f in trace.initial() {
            visited[cell_of(arena, f.x, f.y)] = true;
        }
        let mut nest_half = 0.0;
        let mut speed = 0.0;
        let mut prev: Vec<(f64, f64)> = trace.initial().iter().map(|f| (f.x, f.y)).collect();
        for cycle in trace.cycles() {
            let mut in_half = 0usize;
            for (i, f) in cycle.iter().enumerate() {
                visited[cell_of(arena, f.x, f.y)] = true;
                if f.y < arena.height / 2.0 {
                    in_half += 1;
                }
                speed += step_speed(prev[i], (f.x, f.y), arena.control_dt, robot.max_linear_speed);
                prev[i] = (f.x, f.y);
            }
            nest_half += in_half as f64 / n as f64;
        }
        let cycles = trace.n_cycles() as f64;
        acc[0] += visited.iter().filter(|v| **v).count() as f64 / (HBD_ROWS * HBD_COLS) as f64;
        acc[1] += nest_half / cycles;
        acc[2] += speed / (cycles * n as f64);
    }
    let k = traces.len() as f64;
    Descriptor::new(vec![acc[0] / k, acc[1] / k, acc[2] / k])
}

/// Entity-relation descriptor over robots and arena walls (D = 3 or 6).
pub fn sdbc_compute(
    traces: &[&Trace],
    arena: &ArenaConfig,
    robot: &RobotSpec,
    with_std: bool,
) -> Result<Descriptor, DescriptorError> {
    if traces.is_empty() || traces.iter().any(|t| t.n_cycles() == 0) {
        return Err(DescriptorError::EmptyTrace);
    }
    if traces.iter().any(|t| t.n_robots() < 2) {
        return Err(DescriptorError::SingleRobot);
    }
    let diag = arena.diagonal();
    let wall_max = arena.width.min(arena.height) / 2.0;
    let dim = if with_std { 6 } else { 3 };
    let mut acc = vec![0.0f64; dim];
    for trace in traces {
        let n = trace.n_robots();
        let pairs = (n * (n - 1) / 2) as f64;
        let mut prev: Vec<(f64, f64)> = trace.initial().iter().map(|f| (f.x, f.y)).collect();
        // per-cycle feature series
        let mut series: Vec<[f64; 3]> = Vec::with_capacity(trace.n_cycles());
        for cycle in trace.cycles() {
            let mut pair_dist = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (&cycle[i], &cycle[j]);
                    pair_dist += ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
                }
            }
            let mut wall = 0.0;
            let mut speed = 0.0;
            for (i, f) in cycle.iter().enumerate() {
                wall += f.x.min(arena.width - f.x).min(f.y).min(arena.height - f.y);
                speed += step_speed(prev[i], (f.x, f.y), arena.control_dt, robot.max_linear_speed);
                prev[i] = (f.x, f.y);
            }
            series.push([
                pair_dist / pairs / diag,
                wall / n as f64 / wall_max,
                speed / n as f64,
            ]);
        }
        let cycles = series.len() as f64;
        for k in 0..3 {
            let mean = series.iter().map(|s| s[k]).sum::<f64>() / cycles;
            acc[k] += mean;
            if with_std {
                let var = series.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / cycles;
                // a [0,1]-bounded variable has standard deviation at most 1/2
                acc[3 + k] += var.sqrt() / 0.5;
            }
        }
    }
    let k = traces.len() as f64;
    Descriptor::new(acc.into_iter().map(|v| v / k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RobotFrame;
    use approx::assert_abs_diff_eq;

    fn arena() -> ArenaConfig {
        ArenaConfig::default()
    }

    fn spec() -> RobotSpec {
        RobotSpec::default()
    }

    /// Trace where each robot follows a fixed list of positions.
    fn trace_from_paths(paths: &[Vec<(f64, f64)>]) -> Trace {
        let initial: Vec<RobotFrame> = paths
            .iter()
            .map(|p| RobotFrame::pose_only(p[0].0, p[0].1, 0.0))
            .collect();
        let cycles = paths[0].len() - 1;
        let mut t = Trace::new(initial, cycles);
        for c in 1..=cycles {
            let frames: Vec<RobotFrame> = paths
                .iter()
                .map(|p| RobotFrame::pose_only(p[c].0, p[c].1, 0.0))
                .collect();
            t.push_cycle(&frames);
        }
        t
    }

    #[test]
    fn motionless_swarm_has_zero_speed_component() {
        let paths = vec![
            vec![(0.5, 0.5); 11],
            vec![(3.0, 1.8); 11],
            vec![(2.0, 0.2); 11],
        ];
        let t = trace_from_paths(&paths);
        let d = hbd_compute(&[&t], &arena(), &spec()).unwrap();
        assert_eq!(d.values()[0], 3.0 / 98.0);
        // robots at y = 0.5 and 0.2 are in the nest-side half
        assert_abs_diff_eq!(d.values()[1], 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(d.values()[2], 0.0);
    }

    #[test]
    fn full_speed_straight_line_saturates_speed_component() {
        // one cycle moves exactly vmax * dt
        let step = 0.1 * 0.2;
        let path: Vec<(f64, f64)> = (0..50).map(|i| (0.2 + i as f64 * step, 1.5)).collect();
        let stay = vec![(3.9, 1.5); 50];
        let t = trace_from_paths(&[path, stay]);
        let d = hbd_compute(&[&t], &arena(), &spec()).unwrap();
        assert_abs_diff_eq!(d.values()[2], 0.5, epsilon = 1e-12); // one of two at full speed
    }

    #[test]
    fn straight_line_visited_cells_match_brute_count() {
        let step = 0.1 * 0.2;
        let path: Vec<(f64, f64)> = (0..100).map(|i| (0.15 + i as f64 * step, 0.9)).collect();
        let stay = vec![(0.15, 0.9); 100];
        let t = trace_from_paths(&[path.clone(), stay]);
        let d = hbd_compute(&[&t], &arena(), &spec()).unwrap();
        // brute-force count over the hand-built path
        let mut cells = std::collections::BTreeSet::new();
        for &(x, y) in &path {
            cells.insert(cell_of(&arena(), x, y));
        }
        assert_eq!(d.values()[0], cells.len() as f64 / 98.0);
    }

    #[test]
    fn visited_fraction_never_decreases_when_extending_a_path() {
        let step = 0.02;
        let mut prev_frac = 0.0;
        for len in [10, 40, 80, 160] {
            let path: Vec<(f64, f64)> = (0..len).map(|i| (0.2 + i as f64 * step, 1.0)).collect();
            let stay = vec![(4.0, 2.0); len];
            let t = trace_from_paths(&[path, stay]);
            let d = hbd_compute(&[&t], &arena(), &spec()).unwrap();
            assert!(d.values()[0] >= prev_frac);
            prev_frac = d.values()[0];
        }
    }

    #[test]
    fn sdbc_coincident_robots_have_zero_distance_component() {
        let paths = vec![vec![(1.0, 1.0); 10], vec![(1.0, 1.0); 10]];
        let t = trace_from_paths(&paths);
        let d = sdbc_compute(&[&t], &arena(), &spec(), false).unwrap();
        assert_eq!(d.values()[0], 0.0);
    }

    #[test]
    fn sdbc_opposite_corners_read_full_separation() {
        let paths = vec![vec![(0.0, 0.0); 10], vec![(4.2, 2.1); 10]];
        let t = trace_from_paths(&paths);
        let d = sdbc_compute(&[&t], &arena(), &spec(), false).unwrap();
        assert_abs_diff_eq!(d.values()[0], 1.0, epsilon = 1e-12);
        // corners touch the walls
        assert_eq!(d.values()[1], 0.0);
    }

    #[test]
    fn sdbc_three_robot_two_cycle_hand_computation() {
        let paths = vec![
            vec![(1.0, 1.0), (1.0, 1.0), (1.1, 1.0)],
            vec![(2.0, 1.0), (2.0, 1.5), (2.0, 1.5)],
            vec![(3.0, 2.0), (3.0, 2.0), (3.0, 2.0)],
        ];
        let t = trace_from_paths(&paths);
        let d = sdbc_compute(&[&t], &arena(), &spec(), false).unwrap();

        let a = arena();
        let diag = a.diagonal();
        let wall_max = 1.05;
        let dist = |p: (f64, f64), q: (f64, f64)| {
            ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
        };
        // cycle 1 positions
        let c1 = [(1.0, 1.0), (2.0, 1.5), (3.0, 2.0)];
        let c2 = [(1.1, 1.0), (2.0, 1.5), (3.0, 2.0)];
        let pd = |c: &[(f64, f64); 3]| {
            (dist(c[0], c[1]) + dist(c[0], c[2]) + dist(c[1], c[2])) / 3.0 / diag
        };
        let wd = |c: &[(f64, f64); 3]| {
            c.iter()
                .map(|&(x, y)| x.min(4.2 - x).min(y).min(2.1 - y))
                .sum::<f64>()
                / 3.0
                / wall_max
        };
        // robot 1 moved 0.5 m in cycle 1; robot 0 moved 0.1 m in cycle 2
        let speed1: f64 = (0.0 + 0.5 / 0.2 / 0.1 + 0.0) / 3.0;
        let speed2: f64 = (0.1 / 0.2 / 0.1 + 0.0 + 0.0) / 3.0;
        let expect = [
            (pd(&c1) + pd(&c2)) / 2.0,
            (wd(&c1) + wd(&c2)) / 2.0,
            ((speed1 + speed2) / 2.0).clamp(0.0, 1.0),
        ];
        for k in 0..3 {
            assert_abs_diff_eq!(d.values()[k], expect[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn sdbc_std_variant_appends_three_components() {
        let paths = vec![
            vec![(1.0, 1.0), (1.5, 1.0), (1.5, 1.2)],
            vec![(2.0, 1.0), (2.0, 1.0), (2.0, 1.0)],
        ];
        let t = trace_from_paths(&paths);
        let d3 = sdbc_compute(&[&t], &arena(), &spec(), false).unwrap();
        let d6 = sdbc_compute(&[&t], &arena(), &spec(), true).unwrap();
        assert_eq!(d3.dim(), 3);
        assert_eq!(d6.dim(), 6);
        assert_eq!(&d6.values()[..3], d3.values());
        assert!(d6.values()[3..].iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn descriptors_are_permutation_invariant() {
        let paths = vec![
            vec![(1.0, 1.0), (1.2, 1.1), (1.3, 1.2)],
            vec![(2.5, 0.5), (2.5, 0.7), (2.6, 0.8)],
            vec![(3.5, 1.8), (3.4, 1.8), (3.3, 1.7)],
        ];
        let swapped = vec![paths[2].clone(), paths[0].clone(), paths[1].clone()];
        let t1 = trace_from_paths(&paths);
        let t2 = trace_from_paths(&swapped);
        assert_eq!(
            hbd_compute(&[&t1], &arena(), &spec()).unwrap(),
            hbd_compute(&[&t2], &arena(), &spec()).unwrap()
        );
        assert_eq!(
            sdbc_compute(&[&t1], &arena(), &spec(), true).unwrap(),
            sdbc_compute(&[&t2], &arena(), &spec(), true).unwrap()
        );
    }

    #[test]
    fn outputs_stay_in_unit_cube_and_average_over_traces() {
        let fast: Vec<(f64, f64)> = (0..20).map(|i| (0.1 + i as f64 * 0.01, 1.0)).collect();
        let slow = vec![(2.0, 1.5); 20];
        let t1 = trace_from_paths(&[fast.clone(), slow.clone()]);
        let t2 = trace_from_paths(&[slow.clone(), slow.clone()]);
        for kind in [DescriptorKind::Hbd, DescriptorKind::Sdbc, DescriptorKind::Sdbc6] {
            let d = kind.compute(&[&t1, &t2], &arena(), &spec()).unwrap();
            assert_eq!(d.dim(), kind.dim());
            assert!(d.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // averaging: speed of the pair is the mean of the per-trace speeds
        let a = hbd_compute(&[&t1], &arena(), &spec()).unwrap().values()[2];
        let b = hbd_compute(&[&t2], &arena(), &spec()).unwrap().values()[2];
        let ab = hbd_compute(&[&t1, &t2], &arena(), &spec()).unwrap().values()[2];
        assert_abs_diff_eq!(ab, (a + b) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn contract_violations_are_errors() {
        assert!(hbd_compute(&[], &arena(), &spec()).is_err());
        let single = trace_from_paths(&[vec![(1.0, 1.0); 5]]);
        assert!(sdbc_compute(&[&single], &arena(), &spec(), false).is_err());
        assert!(Descriptor::new(vec![0.5, f64::NAN]).is_err());
    }
}
