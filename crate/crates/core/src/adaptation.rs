//! Centralised recovery loop over a behaviour-performance map, plus its
//! baselines: map-prior Bayesian optimisation (`smbo`), the same with a
//! uniform prior (`smbo-uniform`), random search, and prior-guided hill
//! climbing (`gradient`).
//!
//! All learners share one evaluation harness: deploying a bin means copying
//! its genotype to every robot and running the configured number of trials
//! under the active disturbance. Trial seeds depend only on
//! (run seed, scenario, bin, trial index), so any learner measuring the same
//! bin under the same seed observes the same fitness.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::faults::Scenario;
use crate::gp::{ucb, Candidate, GpError, GpModel, KernelConfig};
use crate::map_elites::BehaviourPerformanceMap;
use crate::seeds;
use crate::sim::{run_trial, ArenaConfig, RobotSpec, SimError, TrialSetup};
use crate::Real;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("adaptation needs a non-empty behaviour-performance map")]
    EmptyMap,
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Stop conditions for one adaptation run; the loop halts at whichever
/// limit binds first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationBudget {
    pub max_evaluations: usize,
    /// Total simulated seconds available for evaluations.
    pub max_sim_time: f64,
    pub trials_per_evaluation: usize,
}

impl Default for AdaptationBudget {
    fn default() -> Self {
        Self { max_evaluations: 30, max_sim_time: 3600.0, trials_per_evaluation: 1 }
    }
}

/// One completed evaluation in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    /// 1-based evaluation index.
    pub eval: usize,
    /// Cumulative simulated seconds spent after this evaluation.
    pub sim_time: f64,
    pub bin: usize,
    pub descriptor: Vec<f64>,
    pub fitness: f64,
    pub best_so_far: f64,
}

/// Trace of one adaptation run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationTrace {
    pub learner: String,
    /// Disturbance label the run was executed under.
    pub fault: String,
    pub seed: u64,
    pub records: Vec<EvalRecord>,
    /// The map ran out of unexplored bins before the budget did.
    pub exhausted_map: bool,
}

impl AdaptationTrace {
    fn new(learner: &str, fault: String, seed: u64) -> Self {
        Self { learner: learner.to_string(), fault, seed, records: Vec::new(), exhausted_map: false }
    }

    fn record(&mut self, sim_time: f64, bin: usize, descriptor: Vec<f64>, fitness: f64) {
        let best = self.best_so_far().max(fitness);
        self.records.push(EvalRecord {
            eval: self.records.len() + 1,
            sim_time,
            bin,
            descriptor,
            fitness,
            best_so_far: best,
        });
    }

    pub fn best_so_far(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.best_so_far)
    }

    /// Bin of the best evaluation so far, if any.
    pub fn best_bin(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in &self.records {
            best = match best {
                None => Some((r.bin, r.fitness)),
                Some((_, bf)) if r.fitness > bf => Some((r.bin, r.fitness)),
                other => other,
            };
        }
        best.map(|(b, _)| b)
    }

    pub fn csv_header(descriptor_dim: usize) -> String {
        let ds: Vec<String> = (0..descriptor_dim).map(|i| format!("d{i}")).collect();
        format!("eval,sim_time_s,bin_index,{},fitness,best_so_far,learner,fault,seed", ds.join(","))
    }

    /// CSV rows matching [`AdaptationTrace::csv_header`].
    pub fn write_csv_rows(&self, w: &mut impl Write) -> std::io::Result<()> {
        for r in &self.records {
            let ds: Vec<String> = r.descriptor.iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.eval,
                r.sim_time,
                r.bin,
                ds.join(","),
                r.fitness,
                r.best_so_far,
                self.learner,
                self.fault,
                self.seed
            )?;
        }
        Ok(())
    }
}

/// Measures the fitness of deploying one map bin.
pub trait BinEvaluator {
    fn evaluate(&mut self, bin: usize) -> Result<f64, SimError>;
    /// Simulated seconds one evaluation costs.
    fn sim_time_per_evaluation(&self) -> f64;
}

/// Production harness: homogeneous deployment of a bin's genotype under a
/// sampled disturbance scenario.
pub struct ScenarioEvaluator<'a> {
    map: &'a BehaviourPerformanceMap,
    scenario: &'a Scenario,
    arena: ArenaConfig,
    robot: &'a RobotSpec,
    run_seed: u64,
    trials: usize,
}

impl<'a> ScenarioEvaluator<'a> {
    pub fn new(
        map: &'a BehaviourPerformanceMap,
        scenario: &'a Scenario,
        base_arena: &ArenaConfig,
        robot: &'a RobotSpec,
        run_seed: u64,
        trials: usize,
    ) -> Self {
        Self {
            map,
            scenario,
            arena: scenario_arena(scenario, base_arena),
            robot,
            run_seed,
            trials: trials.max(1),
        }
    }

    pub fn arena(&self) -> &ArenaConfig {
        &self.arena
    }
}

/// Arena a scenario runs in: the 2x variant doubles geometry and trial
/// time; food scarcity truncates the food list to the one surviving source.
pub fn scenario_arena(scenario: &Scenario, base: &ArenaConfig) -> ArenaConfig {
    let mut arena = if scenario.category.is_2x() { base.scaled_2x() } else { base.clone() };
    if let Some(keep) = scenario.keep_food_source {
        let keep = keep.min(arena.food_sources.len().saturating_sub(1));
        arena.food_sources = vec![arena.food_sources[keep]];
    }
    arena
}

impl BinEvaluator for ScenarioEvaluator<'_> {
    fn evaluate(&mut self, bin: usize) -> Result<f64, SimError> {
        let elite = self
            .map
            .get(bin)
            .unwrap_or_else(|| panic!("evaluated bin {bin} is not in the map"));
        let n = self.scenario.n_robots();
        let mut total = 0.0;
        for t in 0..self.trials {
            let setup = TrialSetup {
                arena: &self.arena,
                robot: self.robot,
                genotypes: vec![&elite.genotype; n],
                faults: &self.scenario.robot_faults,
                disruption: self.scenario.disruption,
                seed: seeds::mix(&[self.run_seed, self.scenario.seed, bin as u64, t as u64]),
            };
            total += run_trial(&setup)?.fitness;
        }
        Ok(total / self.trials as f64)
    }

    fn sim_time_per_evaluation(&self) -> f64 {
        self.arena.trial_duration * self.trials as f64
    }
}

/// Fixed lookup table; test evaluator for the learner loops.
#[derive(Debug, Clone)]
pub struct TableEvaluator {
    pub table: std::collections::BTreeMap<usize, f64>,
    pub sim_time: f64,
}

impl BinEvaluator for TableEvaluator {
    fn evaluate(&mut self, bin: usize) -> Result<f64, SimError> {
        Ok(self.table[&bin])
    }

    fn sim_time_per_evaluation(&self) -> f64 {
        self.sim_time
    }
}

/// Prior mean over map bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// The fitness recorded in the map (undisturbed performance).
    MapFitness,
    /// A constant, typically the mean map fitness.
    Uniform(f64),
}

impl Prior {
    fn at(&self, elite_fitness: f64) -> f64 {
        match *self {
            Prior::MapFitness => elite_fitness,
            Prior::Uniform(c) => c,
        }
    }

    /// Uniform prior at the mean performance across the map.
    pub fn uniform_mean(map: &BehaviourPerformanceMap) -> Prior {
        Prior::Uniform(map.metrics().average_performance)
    }
}

struct RunState<'a> {
    entries: Vec<(usize, &'a [f64], f64)>,
    sampled: BTreeSet<usize>,
    sim_time: f64,
    trace: AdaptationTrace,
}

impl<'a> RunState<'a> {
    fn new(
        map: &'a BehaviourPerformanceMap,
        prior: Prior,
        learner: &str,
        fault: String,
        seed: u64,
    ) -> Result<Self, AdaptError> {
        if map.is_empty() {
            return Err(AdaptError::EmptyMap);
        }
        let entries = map
            .iter()
            .map(|(bin, e)| (bin, e.descriptor.values(), prior.at(e.fitness)))
            .collect();
        Ok(Self {
            entries,
            sampled: BTreeSet::new(),
            sim_time: 0.0,
            trace: AdaptationTrace::new(learner, fault, seed),
        })
    }

    /// True when a further evaluation would exceed the budget.
    fn budget_bound(&self, budget: &AdaptationBudget, eval: &dyn BinEvaluator) -> bool {
        self.trace.records.len() >= budget.max_evaluations
            || self.sim_time + eval.sim_time_per_evaluation() > budget.max_sim_time + 1e-9
    }

    fn unexplored(&self) -> Vec<(usize, &'a [f64], f64)> {
        self.entries
            .iter()
            .filter(|(bin, _, _)| !self.sampled.contains(bin))
            .copied()
            .collect()
    }

    fn measure(
        &mut self,
        bin: usize,
        eval: &mut dyn BinEvaluator,
    ) -> Result<f64, AdaptError> {
        let fitness = eval.evaluate(bin)?;
        self.sim_time += eval.sim_time_per_evaluation();
        let descriptor = self
            .entries
            .iter()
            .find(|(b, _, _)| *b == bin)
            .map(|(_, x, _)| x.to_vec())
            .expect("measured bin is a map entry");
        self.sampled.insert(bin);
        self.trace.record(self.sim_time, bin, descriptor, fitness);
        Ok(fitness)
    }
}

/// Map-prior Bayesian optimisation against an arbitrary evaluator.
pub fn smbo_loop(
    map: &BehaviourPerformanceMap,
    prior: Prior,
    budget: &AdaptationBudget,
    kernel: &KernelConfig<Real>,
    seed: u64,
    eval: &mut dyn BinEvaluator,
    learner: &str,
    fault: String,
) -> Result<AdaptationTrace, AdaptError> {
    kernel.validate()?;
    let mut st = RunState::new(map, prior, learner, fault, seed)?;
    let mut model = GpModel::new(*kernel)?;
    loop {
        if st.budget_bound(budget, eval) {
            break;
        }
        let unexplored = st.unexplored();
        if unexplored.is_empty() {
            st.trace.exhausted_map = true;
            break;
        }
        let fit = model.fit()?;
        let cands: Vec<Candidate<'_, Real>> = unexplored
            .iter()
            .map(|(bin, x, p)| Candidate { bin: *bin, x, prior: *p })
            .collect();
        let bin = ucb(&fit, &cands, kernel.alpha).expect("non-empty candidate set");
        let prior_at_bin = unexplored.iter().find(|(b, _, _)| *b == bin).unwrap().2;
        let fitness = st.measure(bin, eval)?;
        let x = st.entries.iter().find(|(b, _, _)| *b == bin).unwrap().1.to_vec();
        model.push(x, fitness, prior_at_bin, kernel.noise_var);
    }
    Ok(st.trace)
}

/// Uniform random search without replacement against an arbitrary evaluator.
pub fn random_search_loop(
    map: &BehaviourPerformanceMap,
    budget: &AdaptationBudget,
    seed: u64,
    eval: &mut dyn BinEvaluator,
    learner: &str,
    fault: String,
) -> Result<AdaptationTrace, AdaptError> {
    let mut st = RunState::new(map, Prior::MapFitness, learner, fault, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0x5a4d]));
    loop {
        if st.budget_bound(budget, eval) {
            break;
        }
        let unexplored = st.unexplored();
        if unexplored.is_empty() {
            st.trace.exhausted_map = true;
            break;
        }
        let bin = unexplored[rng.random_range(0..unexplored.len())].0;
        st.measure(bin, eval)?;
    }
    Ok(st.trace)
}

/// Hill climbing on the bin grid guided by map priors: start at the
/// max-prior bin; evaluate the best-prior unexplored axis-neighbour of the
/// current bin; move when the measured fitness improves; restart at a random
/// unexplored bin when the neighbourhood is exhausted.
pub fn gradient_ascent_loop(
    map: &BehaviourPerformanceMap,
    budget: &AdaptationBudget,
    seed: u64,
    eval: &mut dyn BinEvaluator,
    learner: &str,
    fault: String,
) -> Result<AdaptationTrace, AdaptError> {
    let mut st = RunState::new(map, Prior::MapFitness, learner, fault, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0x6ead]));
    let grid = map.grid().clone();

    // start at the highest-prior bin (lowest index on ties)
    let (start, _, _) = *st
        .entries
        .iter()
        .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(b.0.cmp(&a.0)))
        .expect("non-empty map");
    if st.budget_bound(budget, eval) {
        return Ok(st.trace);
    }
    let mut current = start;
    let mut current_fitness = st.measure(start, eval)?;

    loop {
        if st.budget_bound(budget, eval) {
            break;
        }
        let neighbours: Vec<(usize, f64)> = grid
            .axis_neighbors(current)
            .into_iter()
            .filter(|nb| !st.sampled.contains(nb))
            .filter_map(|nb| st.entries.iter().find(|(b, _, _)| *b == nb).map(|e| (e.0, e.2)))
            .collect();
        if let Some(&(bin, _)) = neighbours
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
        {
            let f = st.measure(bin, eval)?;
            if f > current_fitness {
                current = bin;
                current_fitness = f;
            }
        } else {
            // local optimum: random restart on an unexplored bin
            let unexplored = st.unexplored();
            if unexplored.is_empty() {
                st.trace.exhausted_map = true;
                break;
            }
            let (bin, _, _) = unexplored[rng.random_range(0..unexplored.len())];
            current = bin;
            current_fitness = st.measure(bin, eval)?;
        }
    }
    Ok(st.trace)
}

/// SMBO under a disturbance scenario.
pub fn run_smbo(
    map: &BehaviourPerformanceMap,
    scenario: &Scenario,
    base_arena: &ArenaConfig,
    robot: &RobotSpec,
    budget: &AdaptationBudget,
    kernel: &KernelConfig<Real>,
    seed: u64,
) -> Result<AdaptationTrace, AdaptError> {
    let mut eval =
        ScenarioEvaluator::new(map, scenario, base_arena, robot, seed, budget.trials_per_evaluation);
    smbo_loop(map, Prior::MapFitness, budget, kernel, seed, &mut eval, "smbo", scenario.label())
}

/// SMBO with the prior flattened to the mean map performance.
pub fn run_smbo_uniform(
    map: &BehaviourPerformanceMap,
    scenario: &Scenario,
    base_arena: &ArenaConfig,
    robot: &RobotSpec,
    budget: &AdaptationBudget,
    kernel: &KernelConfig<Real>,
    seed: u64,
) -> Result<AdaptationTrace, AdaptError> {
    let mut eval =
        ScenarioEvaluator::new(map, scenario, base_arena, robot, seed, budget.trials_per_evaluation);
    smbo_loop(
        map,
        Prior::uniform_mean(map),
        budget,
        kernel,
        seed,
        &mut eval,
        "smbo-uniform",
        scenario.label(),
    )
}

pub fn run_random_search(
    map: &BehaviourPerformanceMap,
    scenario: &Scenario,
    base_arena: &ArenaConfig,
    robot: &RobotSpec,
    budget: &AdaptationBudget,
    seed: u64,
) -> Result<AdaptationTrace, AdaptError> {
    let mut eval =
        ScenarioEvaluator::new(map, scenario, base_arena, robot, seed, budget.trials_per_evaluation);
    random_search_loop(map, budget, seed, &mut eval, "random", scenario.label())
}

pub fn run_gradient_ascent(
    map: &BehaviourPerformanceMap,
    scenario: &Scenario,
    base_arena: &ArenaConfig,
    robot: &RobotSpec,
    budget: &AdaptationBudget,
    seed: u64,
) -> Result<AdaptationTrace, AdaptError> {
    let mut eval =
        ScenarioEvaluator::new(map, scenario, base_arena, robot, seed, budget.trials_per_evaluation);
    gradient_ascent_loop(map, budget, seed, &mut eval, "gradient", scenario.label())
}

/// Performance of the map's best elite deployed homogeneously under the
/// disturbance: the pre-adaptation baseline.
pub fn fitness_at_injection(
    map: &BehaviourPerformanceMap,
    scenario: &Scenario,
    base_arena: &ArenaConfig,
    robot: &RobotSpec,
    seed: u64,
) -> Result<f64, AdaptError> {
    let best = map.best_bin().ok_or(AdaptError::EmptyMap)?;
    let mut eval = ScenarioEvaluator::new(map, scenario, base_arena, robot, seed, 1);
    Ok(eval.evaluate(best)?)
}

#[cfg(test)]
mod tests;
