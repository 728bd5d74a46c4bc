//! Evolution and storage of the behaviour-performance map: a grid archive
//! over the unit behaviour cube holding, per bin, the best controller found
//! and its fitness.
//!
//! Archive file format (line-delimited text):
//!
//! ```text
//! swarm-map v1
//! descriptor=<hbd|sdbc|sdbc6>
//! dim=<D>
//! grid=<n1,n2,...>
//! config_hash=<hex>
//! count=<k>
//! <bin>|<d0,d1,...>|<fitness>|<genotype record>
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::controller::{Genotype, MutationParams};
use crate::descriptors::{Descriptor, DescriptorKind};
use crate::faults::FaultCondition;
use crate::grid::GridShape;
use crate::seeds;
use crate::sim::{run_trial, ArenaConfig, RobotSpec, SimError, TrialSetup};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("descriptor dimension {got} does not match map dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("simulation failed during evolution: {0}")]
    Sim(#[from] SimError),
    #[error("descriptor computation failed: {0}")]
    Descriptor(#[from] crate::descriptors::DescriptorError),
    #[error("archive i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One stored solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Elite {
    pub genotype: Genotype,
    /// Evaluated fitness of the stored genotype (food items per robot).
    pub fitness: f64,
    /// Exact real-valued descriptor the genotype was binned by.
    pub descriptor: Descriptor,
}

/// Grid archive mapping descriptor bins to elites.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviourPerformanceMap {
    grid: GridShape,
    descriptor_kind: DescriptorKind,
    config_hash: String,
    bins: BTreeMap<usize, Elite>,
}

/// Coverage and performance summary of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMetrics {
    /// Best fitness across the map; 0 when empty.
    pub global_performance: f64,
    /// Number of non-empty bins.
    pub coverage: usize,
    /// Mean fitness over non-empty bins; 0 when empty.
    pub average_performance: f64,
}

impl BehaviourPerformanceMap {
    pub fn new(grid: GridShape, descriptor_kind: DescriptorKind, config_hash: String) -> Self {
        Self { grid, descriptor_kind, config_hash, bins: BTreeMap::new() }
    }

    pub fn grid(&self) -> &GridShape {
        &self.grid
    }

    pub fn descriptor_kind(&self) -> DescriptorKind {
        self.descriptor_kind
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn get(&self, bin: usize) -> Option<&Elite> {
        self.bins.get(&bin)
    }

    /// Non-empty bins in ascending bin order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Elite)> {
        self.bins.iter().map(|(&b, e)| (b, e))
    }

    pub fn bin_of(&self, descriptor: &Descriptor) -> usize {
        self.grid.bin_of(descriptor.values())
    }

    /// Replacement rule: accept iff the bin is empty or the candidate's
    /// fitness is strictly greater than the incumbent's.
    pub fn insert(
        &mut self,
        genotype: Genotype,
        descriptor: Descriptor,
        fitness: f64,
    ) -> Result<bool, MapError> {
        if descriptor.dim() != self.grid.dim() {
            return Err(MapError::DimensionMismatch { got: descriptor.dim(), want: self.grid.dim() });
        }
        let bin = self.bin_of(&descriptor);
        match self.bins.get(&bin) {
            Some(incumbent) if fitness <= incumbent.fitness => Ok(false),
            _ => {
                self.bins.insert(bin, Elite { genotype, fitness, descriptor });
                Ok(true)
            }
        }
    }

    pub fn metrics(&self) -> MapMetrics {
        if self.bins.is_empty() {
            return MapMetrics { global_performance: 0.0, coverage: 0, average_performance: 0.0 };
        }
        let mut best = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for e in self.bins.values() {
            best = best.max(e.fitness);
            sum += e.fitness;
        }
        MapMetrics {
            global_performance: best,
            coverage: self.bins.len(),
            average_performance: sum / self.bins.len() as f64,
        }
    }

    /// Bin of the highest-fitness elite (lowest bin index on ties).
    pub fn best_bin(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (&bin, e) in &self.bins {
            best = match best {
                None => Some((bin, e.fitness)),
                Some((_, bf)) if e.fitness > bf => Some((bin, e.fitness)),
                other => other,
            };
        }
        best.map(|(b, _)| b)
    }

    pub fn save(&self, path: &Path) -> Result<(), MapError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<(), MapError> {
        writeln!(w, "swarm-map v1")?;
        writeln!(w, "descriptor={}", self.descriptor_kind.name())?;
        writeln!(w, "dim={}", self.grid.dim())?;
        let dims: Vec<String> = self.grid.dims().iter().map(|d| d.to_string()).collect();
        writeln!(w, "grid={}", dims.join(","))?;
        writeln!(w, "config_hash={}", self.config_hash)?;
        writeln!(w, "count={}", self.bins.len())?;
        for (bin, e) in &self.bins {
            let desc: Vec<String> = e.descriptor.values().iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}|{}|{}|{}", bin, desc.join(","), e.fitness, e.genotype.encode())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MapError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(f)
    }

    pub fn read(r: impl BufRead) -> Result<Self, MapError> {
        let perr = |line: usize, msg: &str| MapError::Parse { line, msg: msg.to_string() };
        let mut lines = r.lines().enumerate();
        let mut next = |want: &str| -> Result<(usize, String), MapError> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(perr(i + 1, &e.to_string())),
                None => Err(perr(0, &format!("missing {want}"))),
            }
        };
        let (i, magic) = next("magic line")?;
        if magic != "swarm-map v1" {
            return Err(perr(i, "bad magic line"));
        }
        let (i, l) = next("descriptor")?;
        let kind = l
            .strip_prefix("descriptor=")
            .and_then(DescriptorKind::from_name)
            .ok_or_else(|| perr(i, "bad descriptor line"))?;
        let (i, l) = next("dim")?;
        let dim: usize = l
            .strip_prefix("dim=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(i, "bad dim line"))?;
        let (i, l) = next("grid")?;
        let dims: Vec<usize> = l
            .strip_prefix("grid=")
            .ok_or_else(|| perr(i, "bad grid line"))?
            .split(',')
            .map(|v| v.parse().map_err(|_| perr(i, "bad grid size")))
            .collect::<Result<_, _>>()?;
        if dims.len() != dim {
            return Err(perr(i, "grid arity does not match dim"));
        }
        let (i, l) = next("config_hash")?;
        let config_hash = l
            .strip_prefix("config_hash=")
            .ok_or_else(|| perr(i, "bad config_hash line"))?
            .to_string();
        let (i, l) = next("count")?;
        let count: usize = l
            .strip_prefix("count=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(i, "bad count line"))?;
        let mut map = Self::new(GridShape::new(dims), kind, config_hash);
        for _ in 0..count {
            let (i, l) = next("elite record")?;
            let fields: Vec<&str> = l.splitn(4, '|').collect();
            if fields.len() != 4 {
                return Err(perr(i, "elite record needs 4 fields"));
            }
            let bin: usize = fields[0].parse().map_err(|_| perr(i, "bad bin index"))?;
            let values: Vec<f64> = fields[1]
                .split(',')
                .map(|v| v.parse().map_err(|_| perr(i, "bad descriptor value")))
                .collect::<Result<_, _>>()?;
            let descriptor =
                Descriptor::new(values).map_err(|e| perr(i, &format!("bad descriptor: {e}")))?;
            let fitness: f64 = fields[2].parse().map_err(|_| perr(i, "bad fitness"))?;
            let genotype =
                Genotype::decode(fields[3]).map_err(|e| perr(i, &format!("bad genotype: {e}")))?;
            if map.grid.bin_of(descriptor.values()) != bin {
                return Err(perr(i, "bin index does not match descriptor"));
            }
            map.bins.insert(bin, Elite { genotype, fitness, descriptor });
        }
        Ok(map)
    }
}

/// Everything `evolve` needs besides a seed.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub generations: usize,
    pub batch_size: usize,
    pub initial_population: usize,
    /// Trials per fitness estimate; fitness and descriptor are means over
    /// these trials.
    pub trials_per_evaluation: usize,
    pub n_robots: usize,
    pub descriptor: DescriptorKind,
    pub bins_per_dim: usize,
    pub mutation: MutationParams,
    pub arena: ArenaConfig,
    pub robot: RobotSpec,
    /// Recorded in the archive header so outputs name their provenance.
    pub config_hash: String,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            generations: 200,
            batch_size: 32,
            initial_population: 64,
            trials_per_evaluation: 3,
            n_robots: 6,
            descriptor: DescriptorKind::Hbd,
            bins_per_dim: 10,
            mutation: MutationParams::default(),
            arena: ArenaConfig::default(),
            robot: RobotSpec::default(),
            config_hash: String::new(),
        }
    }
}

/// Per-generation archive summary (generation 0 = evaluated initial
/// population).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub global_performance: f64,
    pub coverage: usize,
    pub average_performance: f64,
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub map: BehaviourPerformanceMap,
    /// `generations + 1` rows.
    pub history: Vec<GenerationStats>,
}

/// Evaluate one genotype deployed to the whole (homogeneous) swarm:
/// mean fitness and averaged descriptor over the configured trials.
pub fn evaluate_genotype(
    cfg: &EvolutionConfig,
    genotype: &Genotype,
    eval_seed: u64,
) -> Result<(f64, Descriptor), MapError> {
    let faults = vec![FaultCondition::None; cfg.n_robots];
    let mut results = Vec::with_capacity(cfg.trials_per_evaluation);
    for t in 0..cfg.trials_per_evaluation {
        let setup = TrialSetup {
            arena: &cfg.arena,
            robot: &cfg.robot,
            genotypes: vec![genotype; cfg.n_robots],
            faults: &faults,
            disruption: None,
            seed: seeds::mix(&[eval_seed, 0x7121a1, t as u64]),
        };
        results.push(run_trial(&setup)?);
    }
    let fitness = results.iter().map(|r| r.fitness).sum::<f64>() / results.len() as f64;
    let traces: Vec<&crate::sim::Trace> = results.iter().map(|r| &r.trace).collect();
    let descriptor = cfg.descriptor.compute(&traces, &cfg.arena, &cfg.robot)?;
    Ok((fitness, descriptor))
}

pub fn evolve(cfg: &EvolutionConfig, seed: u64) -> Result<EvolveOutcome, MapError> {
    evolve_observed(cfg, seed, |_, _| {})
}

/// `evolve` with a per-generation observer called after each insertion wave
/// (including generation 0).
pub fn evolve_observed(
    cfg: &EvolutionConfig,
    seed: u64,
    mut observer: impl FnMut(usize, &BehaviourPerformanceMap),
) -> Result<EvolveOutcome, MapError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0xe701]));
    let mut map = BehaviourPerformanceMap::new(
        GridShape::uniform(cfg.bins_per_dim, cfg.descriptor.dim()),
        cfg.descriptor,
        cfg.config_hash.clone(),
    );
    let mut history = Vec::with_capacity(cfg.generations + 1);

    // initial population: random genotypes, evaluated in parallel, inserted
    // in draw order
    let initial: Vec<(Genotype, u64)> = (0..cfg.initial_population)
        .map(|_| {
            let g = Genotype::random(&mut rng);
            let s: u64 = rng.random();
            (g, s)
        })
        .collect();
    let evaluated: Vec<Result<(f64, Descriptor), MapError>> = initial
        .par_iter()
        .map(|(g, s)| evaluate_genotype(cfg, g, *s))
        .collect();
    for ((g, _), ev) in initial.into_iter().zip(evaluated) {
        let (fitness, descriptor) = ev?;
        map.insert(g, descriptor, fitness)?;
    }
    let m = map.metrics();
    history.push(GenerationStats {
        generation: 0,
        global_performance: m.global_performance,
        coverage: m.coverage,
        average_performance: m.average_performance,
    });
    observer(0, &map);

    for generation in 1..=cfg.generations {
        // parent keys and child seeds drawn serially so the outcome does not
        // depend on evaluation parallelism
        let keys: Vec<usize> = map.bins.keys().copied().collect();
        let picks: Vec<(usize, u64)> = (0..cfg.batch_size)
            .map(|_| {
                let k = keys[rng.random_range(0..keys.len())];
                let s: u64 = rng.random();
                (k, s)
            })
            .collect();
        let children: Vec<(Genotype, u64)> = picks
            .iter()
            .map(|(bin, child_seed)| {
                let parent = &map.bins[bin].genotype;
                let mut mrng = ChaCha8Rng::seed_from_u64(seeds::mix(&[*child_seed, 0x307]));
                (parent.mutate(&cfg.mutation, &mut mrng), *child_seed)
            })
            .collect();
        let evaluated: Vec<Result<(f64, Descriptor), MapError>> = children
            .par_iter()
            .map(|(g, s)| evaluate_genotype(cfg, g, *s))
            .collect();
        for ((g, _), ev) in children.into_iter().zip(evaluated) {
            let (fitness, descriptor) = ev?;
            map.insert(g, descriptor, fitness)?;
        }
        let m = map.metrics();
        history.push(GenerationStats {
            generation,
            global_performance: m.global_performance,
            coverage: m.coverage,
            average_performance: m.average_performance,
        });
        observer(generation, &map);
    }

    Ok(EvolveOutcome { map, history })
}
