//! The four execution models.
//!
//! Every model is batch-synchronous: a run is cut into dispatches of
//! `batch_size` packets, all workers finish a dispatch before the
//! coordinator aggregates it, and the run returns only after the last
//! dispatch is complete. Workers write only to their own result slots.
//!
//! | model    | unit of work                        | ruleset per worker |
//! |----------|-------------------------------------|--------------------|
//! | data     | contiguous chunk of packets         | complete           |
//! | function | every packet of the dispatch        | one partition      |
//! | hybrid   | one (packet, partition) pair        | one partition      |

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;
use std::time::Instant;

use parfw_core::{
    aggregate, classify, classify_batch_sequential, partition_rules, scan_partition,
    AggregateError, ClassifyStats, MatchResult, Packet, PartialMatch, RulePartition, Ruleset,
};
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Upper bound on `nodes`, the thread-block size limit of the original
/// hardware.
pub const MAX_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    Sequential,
    DataParallel,
    FunctionParallel,
    Hybrid,
}

impl Model {
    pub const ALL: [Model; 4] = [
        Model::Sequential,
        Model::DataParallel,
        Model::FunctionParallel,
        Model::Hybrid,
    ];

    /// Name used on the command line and in CSV files.
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Sequential => "sequential",
            Model::DataParallel => "data",
            Model::FunctionParallel => "function",
            Model::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Model::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown model {s:?} (expected sequential, data, function or hybrid)"))
    }
}

impl serde::Serialize for Model {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for Model {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("nodes must be within 1..={MAX_NODES} (threads per block are limited to {MAX_NODES}), got {0}")]
    Nodes(usize),
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error("{called} runner called with a {configured} configuration")]
    ModelMismatch { called: Model, configured: Model },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub model: Model,
    /// Firewall nodes (data, function) or rule-scanning lanes per packet
    /// (hybrid). Ignored by the sequential model.
    pub nodes: usize,
    /// Packets per dispatch.
    pub batch_size: usize,
}

impl EngineConfig {
    pub fn new(model: Model, nodes: usize, batch_size: usize) -> Self {
        EngineConfig {
            model,
            nodes,
            batch_size,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=MAX_NODES).contains(&self.nodes) {
            return Err(ConfigError::Nodes(self.nodes));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::BatchSize);
        }
        Ok(())
    }
}

/// Coordinator-side reduction of per-partition results for one packet.
pub type Aggregator = fn(&[PartialMatch], usize) -> Result<MatchResult, AggregateError>;

/// A configured model plus its worker pool. Reusable across batches.
pub struct Engine {
    config: EngineConfig,
    pool: Option<ThreadPool>,
    aggregator: Aggregator,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("workers", &self.workers())
            .finish()
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, ConfigError> {
        Self::with_aggregator(config, aggregate)
    }

    /// Same as [`Engine::new`] with a custom reduction step. Only the
    /// function-parallel and hybrid models aggregate.
    pub fn with_aggregator(config: EngineConfig, aggregator: Aggregator) -> Result<Self, ConfigError> {
        config.validate()?;
        let threads = match config.model {
            Model::Sequential => None,
            Model::DataParallel | Model::FunctionParallel => Some(config.nodes),
            Model::Hybrid => Some(
                std::thread::available_parallelism()
                    .map(NonZeroUsize::get)
                    .unwrap_or(1),
            ),
        };
        let pool = threads
            .map(|n| {
                ThreadPoolBuilder::new()
                    .num_threads(n)
                    .thread_name(|i| format!("parfw-worker-{i}"))
                    .build()
                    .map_err(|e| ConfigError::Pool(e.to_string()))
            })
            .transpose()?;
        Ok(Engine {
            config,
            pool,
            aggregator,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Threads in the pool; 0 for the sequential model.
    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(0, ThreadPool::current_num_threads)
    }

    /// Classifies `packets`; `results[i]` always belongs to `packets[i]`.
    pub fn run(&self, ruleset: &Ruleset, packets: &[Packet]) -> (Vec<MatchResult>, ClassifyStats) {
        let start = Instant::now();
        let (results, mut stats) = match (self.config.model, &self.pool) {
            (Model::DataParallel, Some(pool)) => self.data_parallel(pool, ruleset, packets),
            (Model::FunctionParallel, Some(pool)) => self.function_parallel(pool, ruleset, packets),
            (Model::Hybrid, Some(pool)) => self.hybrid(pool, ruleset, packets),
            _ => classify_batch_sequential(ruleset, packets),
        };
        stats.wall_time = start.elapsed();
        (results, stats)
    }

    fn dispatches<'p>(&self, packets: &'p [Packet]) -> std::slice::Chunks<'p, Packet> {
        packets.chunks(self.config.batch_size)
    }

    fn data_parallel(
        &self,
        pool: &ThreadPool,
        ruleset: &Ruleset,
        packets: &[Packet],
    ) -> (Vec<MatchResult>, ClassifyStats) {
        let mut results = vec![MatchResult::default_deny(0); packets.len()];
        let mut offset = 0;
        for dispatch in self.dispatches(packets) {
            let out = &mut results[offset..offset + dispatch.len()];
            let chunk = dispatch.len().div_ceil(self.config.nodes);
            pool.install(|| {
                out.par_chunks_mut(chunk)
                    .zip(dispatch.par_chunks(chunk))
                    .for_each(|(slots, mine)| {
                        for (slot, packet) in slots.iter_mut().zip(mine) {
                            *slot = classify(ruleset, packet);
                        }
                    })
            });
            offset += dispatch.len();
        }
        let mut stats = ClassifyStats::default();
        for r in &results {
            stats.record(r);
            stats.max_worker_comparisons = stats.max_worker_comparisons.max(r.comparisons());
        }
        (results, stats)
    }

    fn function_parallel(
        &self,
        pool: &ThreadPool,
        ruleset: &Ruleset,
        packets: &[Packet],
    ) -> (Vec<MatchResult>, ClassifyStats) {
        let parts = partition_rules(ruleset, self.config.nodes);
        let workers = parts.len();
        let mut results = Vec::with_capacity(packets.len());
        let mut stats = ClassifyStats::default();
        // Partition-major: worker t owns partials[t * n .. (t + 1) * n].
        let mut partials = Vec::new();
        let mut gathered = Vec::with_capacity(workers);
        for dispatch in self.dispatches(packets) {
            let n = dispatch.len();
            partials.clear();
            partials.resize(workers * n, PartialMatch::default());
            pool.install(|| {
                partials
                    .par_chunks_mut(n)
                    .zip(parts.par_iter())
                    .for_each(|(slots, part)| {
                        for (slot, packet) in slots.iter_mut().zip(dispatch) {
                            *slot = scan_partition(part, packet);
                        }
                    })
            });
            for i in 0..n {
                gathered.clear();
                gathered.extend((0..workers).map(|t| partials[t * n + i]));
                results.push(self.reduce(&gathered, ruleset.len(), &mut stats));
            }
        }
        (results, stats)
    }

    fn hybrid(
        &self,
        pool: &ThreadPool,
        ruleset: &Ruleset,
        packets: &[Packet],
    ) -> (Vec<MatchResult>, ClassifyStats) {
        let parts = partition_rules(ruleset, self.config.nodes);
        let lanes = parts.len();
        let mut results = Vec::with_capacity(packets.len());
        let mut stats = ClassifyStats::default();
        // Packet-major: packet i owns partials[i * lanes .. (i + 1) * lanes].
        let mut partials = Vec::new();
        for dispatch in self.dispatches(packets) {
            partials.clear();
            partials.resize(dispatch.len() * lanes, PartialMatch::default());
            pool.install(|| {
                partials
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(k, slot)| {
                        let part: &RulePartition<'_> = &parts[k % lanes];
                        *slot = scan_partition(part, &dispatch[k / lanes]);
                    })
            });
            for block in partials.chunks(lanes) {
                results.push(self.reduce(block, ruleset.len(), &mut stats));
            }
        }
        (results, stats)
    }

    fn reduce(&self, partials: &[PartialMatch], rule_count: usize, stats: &mut ClassifyStats) -> MatchResult {
        let result = (self.aggregator)(partials, rule_count)
            .expect("workers emit one partial per partition with in-range indices");
        for p in partials {
            stats.max_worker_comparisons = stats.max_worker_comparisons.max(p.comparisons);
        }
        stats.record(&result);
        result
    }
}

/// Builds an engine for `config` and runs one batch.
pub fn run(
    ruleset: &Ruleset,
    packets: &[Packet],
    config: &EngineConfig,
) -> Result<(Vec<MatchResult>, ClassifyStats), ConfigError> {
    Ok(Engine::new(*config)?.run(ruleset, packets))
}

fn run_as(
    expected: Model,
    ruleset: &Ruleset,
    packets: &[Packet],
    config: &EngineConfig,
) -> Result<(Vec<MatchResult>, ClassifyStats), ConfigError> {
    if config.model != expected {
        return Err(ConfigError::ModelMismatch {
            called: expected,
            configured: config.model,
        });
    }
    run(ruleset, packets, config)
}

pub fn run_data_parallel(
    ruleset: &Ruleset,
    packets: &[Packet],
    config: &EngineConfig,
) -> Result<(Vec<MatchResult>, ClassifyStats), ConfigError> {
    run_as(Model::DataParallel, ruleset, packets, config)
}

pub fn run_function_parallel(
    ruleset: &Ruleset,
    packets: &[Packet],
    config: &EngineConfig,
) -> Result<(Vec<MatchResult>, ClassifyStats), ConfigError> {
    run_as(Model::FunctionParallel, ruleset, packets, config)
}

pub fn run_hybrid(
    ruleset: &Ruleset,
    packets: &[Packet],
    config: &EngineConfig,
) -> Result<(Vec<MatchResult>, ClassifyStats), ConfigError> {
    run_as(Model::Hybrid, ruleset, packets, config)
}
