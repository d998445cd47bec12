//! Delay and throughput sweeps over ruleset size or node count.
//!
//! Wall-clock fields depend on the machine. Comparison counters are a pure
//! function of the seed and configuration and are what tests assert on.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use parfw_core::{
    generate_ruleset, generate_traffic, MatchMode, Packet, Ruleset, RulesetGenParams, TrafficProfile,
};
use serde::{Deserialize, Serialize};

use crate::engine::{ConfigError, Engine, EngineConfig, Model};
use crate::error::Error;

/// Column order of the results CSV.
pub const REPORT_HEADER: [&str; 9] = [
    "model",
    "nodes",
    "rules",
    "batch",
    "reps",
    "avg_delay_ns",
    "throughput_pps",
    "total_comparisons",
    "max_worker_comparisons",
];

/// One benchmark point. Timing fields come from the median repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: Model,
    pub nodes: usize,
    #[serde(rename = "rules")]
    pub ruleset_size: usize,
    /// Packets classified per repetition.
    #[serde(rename = "batch")]
    pub batch_size: usize,
    #[serde(rename = "reps")]
    pub repetitions: usize,
    /// Median wall time divided by `batch_size`.
    #[serde(rename = "avg_delay_ns")]
    pub avg_packet_delay_ns: f64,
    #[serde(rename = "throughput_pps")]
    pub throughput_pps: f64,
    pub total_comparisons: u64,
    pub max_worker_comparisons: u32,
}

impl BenchReport {
    /// Comparisons per packet, averaged over the batch.
    pub fn comparisons_per_packet(&self) -> f64 {
        if self.batch_size == 0 {
            0.0
        } else {
            self.total_comparisons as f64 / self.batch_size as f64
        }
    }
}

fn median(mut samples: Vec<Duration>) -> Duration {
    samples.sort_unstable();
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2
    }
}

/// One untimed warm-up pass, then `repetitions` timed passes.
///
/// # Panics
///
/// If `repetitions` is zero, or if comparison counters differ between
/// passes (the engines are deterministic, so that would be a bug).
pub fn run_point(
    ruleset: &Ruleset,
    packets: &[Packet],
    config: &EngineConfig,
    repetitions: usize,
) -> Result<BenchReport, ConfigError> {
    assert!(repetitions >= 1, "run_point needs at least one repetition");
    let engine = Engine::new(*config)?;
    let (_, warm) = engine.run(ruleset, packets);

    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let (_, stats) = engine.run(ruleset, packets);
        assert_eq!(
            (stats.total_comparisons, stats.max_worker_comparisons),
            (warm.total_comparisons, warm.max_worker_comparisons),
            "comparison counters changed between repetitions"
        );
        times.push(stats.wall_time);
    }
    let wall = median(times).as_secs_f64();
    let n = packets.len() as f64;
    let (delay, throughput) = if packets.is_empty() || wall == 0.0 {
        (0.0, 0.0)
    } else {
        (wall * 1e9 / n, n / wall)
    };
    Ok(BenchReport {
        model: config.model,
        nodes: config.nodes,
        ruleset_size: ruleset.len(),
        batch_size: packets.len(),
        repetitions,
        avg_packet_delay_ns: delay,
        throughput_pps: throughput,
        total_comparisons: warm.total_comparisons,
        max_worker_comparisons: warm.max_worker_comparisons,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rules,
    Nodes,
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rules" => Ok(Axis::Rules),
            "nodes" => Ok(Axis::Nodes),
            _ => Err(format!("unknown axis {s:?} (expected rules or nodes)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SweepError {
    #[error("axis values must be non-empty")]
    EmptyAxis,
    #[error("axis values must be strictly increasing")]
    NotIncreasing,
    #[error("at least one model is required")]
    NoModels,
    #[error("repetitions must be at least 1")]
    Repetitions,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// A sweep along one axis with everything else fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<usize>,
    /// Ruleset size when sweeping nodes.
    pub rules: usize,
    /// Node count when sweeping rules.
    pub nodes: usize,
    /// Packets per batch; each batch is one dispatch.
    pub batch: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub models: Vec<Model>,
    pub traffic: MatchMode,
}

impl SweepSpec {
    /// Delay against ruleset size at a fixed 64 nodes.
    pub fn rules_axis(values: Vec<usize>) -> Self {
        SweepSpec {
            axis: Axis::Rules,
            values,
            rules: 2048,
            nodes: 64,
            batch: 4096,
            seed: 1,
            repetitions: 5,
            models: Model::ALL.to_vec(),
            traffic: MatchMode::WorstCase,
        }
    }

    /// Delay against node count at a fixed 2048 rules.
    pub fn nodes_axis(values: Vec<usize>) -> Self {
        SweepSpec {
            axis: Axis::Nodes,
            ..Self::rules_axis(values)
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::EmptyAxis);
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SweepError::NotIncreasing);
        }
        if self.models.is_empty() {
            return Err(SweepError::NoModels);
        }
        if self.repetitions == 0 {
            return Err(SweepError::Repetitions);
        }
        for (nodes, _) in self.points() {
            EngineConfig::new(Model::Sequential, nodes, self.batch).validate()?;
        }
        Ok(())
    }

    /// (nodes, rules) for each axis value.
    fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.values.iter().map(move |&v| match self.axis {
            Axis::Rules => (self.nodes, v),
            Axis::Nodes => (v, self.rules),
        })
    }
}

/// Error type for sweeps that generate their own workloads.
#[derive(Debug, thiserror::Error)]
pub enum SweepRunError {
    #[error(transparent)]
    Spec(#[from] SweepError),
    #[error(transparent)]
    Gen(#[from] parfw_core::GenError),
}

/// Runs every model at every axis value, model-major. Each ruleset size gets
/// its own generated ruleset and traffic, derived from `spec.seed`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<BenchReport>, SweepRunError> {
    spec.validate()?;
    let mut workloads: Vec<(usize, Ruleset, Vec<Packet>)> = Vec::new();
    for (_, rules) in spec.points() {
        if workloads.iter().any(|(r, _, _)| *r == rules) {
            continue;
        }
        let ruleset = generate_ruleset(&RulesetGenParams::new(rules, spec.seed))?;
        let profile = TrafficProfile {
            match_mode: spec.traffic,
            ..TrafficProfile::new(spec.batch as u64, spec.seed.wrapping_add(1))
        };
        let packets = generate_traffic(&profile, Some(&ruleset))?;
        workloads.push((rules, ruleset, packets));
    }

    let mut reports = Vec::with_capacity(spec.models.len() * spec.values.len());
    for &model in &spec.models {
        for (nodes, rules) in spec.points() {
            let (_, ruleset, packets) = workloads
                .iter()
                .find(|(r, _, _)| *r == rules)
                .expect("workload generated above");
            let config = EngineConfig::new(model, nodes, spec.batch);
            reports.push(run_point(ruleset, packets, &config, spec.repetitions).map_err(SweepError::from)?);
        }
    }
    Ok(reports)
}

pub fn write_csv<W: Write>(reports: &[BenchReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header row followed by one row per report.
pub fn emit_csv(reports: &[BenchReport], path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(reports, std::io::BufWriter::new(file)).map_err(|e| Error::csv(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchReport>, Error> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<BenchReport>, _>>()
        .map_err(|e| Error::csv(path, e))
}
