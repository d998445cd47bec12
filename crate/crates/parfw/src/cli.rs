//! `parfw` command line.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 invalid options,
//! 3 an engine disagreed with the sequential classifier.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use parfw_core::{
    aggregate, classify_batch_sequential, generate_ruleset, generate_traffic, Action, MatchResult,
    Packet, Ruleset, RulesetGenParams, TrafficProfile,
};

use crate::bench::{run_sweep, write_csv, Axis, SweepRunError, SweepSpec};
use crate::engine::{Aggregator, ConfigError, Engine, EngineConfig, Model};
use crate::error::Error;
use crate::io::{load_ruleset, load_traffic, write_ruleset, write_traffic};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;

/// Node counts `verify` checks when `--nodes` is not given.
pub const DEFAULT_VERIFY_NODES: [usize; 6] = [1, 2, 3, 4, 8, 64];

#[derive(Debug, Parser)]
#[command(name = "parfw", version, about = "Parallel first-match packet filter engines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a traffic file and print `id,verdict,matched_index` per packet.
    Classify(ClassifyArgs),
    /// Run a delay/throughput sweep and write the results CSV.
    Bench(BenchArgs),
    /// Generate a seeded random ruleset.
    GenRules(GenRulesArgs),
    /// Generate seeded homogeneous traffic.
    GenTraffic(GenTrafficArgs),
    /// Check every parallel model against the sequential classifier.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub traffic: PathBuf,
    #[arg(long, default_value = "sequential")]
    pub model: Model,
    #[arg(long, default_value_t = 1)]
    pub nodes: usize,
    #[arg(long, default_value_t = 4096)]
    pub batch: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub axis: Axis,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    /// Ruleset size held fixed while sweeping nodes.
    #[arg(long, default_value_t = 2048)]
    pub rules: usize,
    /// Node count held fixed while sweeping rules.
    #[arg(long, default_value_t = 64)]
    pub nodes: usize,
    #[arg(long, default_value_t = 4096)]
    pub batch: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Models to run (comma separated); all four by default.
    #[arg(long, value_delimiter = ',')]
    pub model: Vec<Model>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenRulesArgs {
    #[arg(long, default_value_t = 2048)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenTrafficArgs {
    #[arg(long, default_value_t = 10_000)]
    pub count: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Only emit packets that match no rule of `--rules`.
    #[arg(long, requires = "rules")]
    pub worst_case: bool,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub traffic: PathBuf,
    /// Node counts to check (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<usize>,
    #[arg(long, default_value_t = 4096)]
    pub batch: usize,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_CONFIG,
            _ => EXIT_IO,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &str, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{path}: {e}"),
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Classify(args) => cmd_classify(&args, out),
        Command::Bench(args) => cmd_bench(&args, out),
        Command::GenRules(args) => cmd_gen_rules(&args, out),
        Command::GenTraffic(args) => cmd_gen_traffic(&args, out),
        Command::Verify(args) => return cmd_verify_with(&args, aggregate, out, err),
    };
    finish(result, err)
}

fn finish(result: CmdResult, err: &mut dyn Write) -> u8 {
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "parfw: {}", f.message);
            f.code
        }
    }
}

/// `DROP,-` or `ACCEPT,17`.
pub fn format_decision(verdict: Action, index: Option<usize>) -> String {
    match index {
        Some(i) => format!("{verdict},{i}"),
        None => format!("{verdict},-"),
    }
}

fn cmd_classify(args: &ClassifyArgs, out: &mut dyn Write) -> CmdResult {
    let config = EngineConfig::new(args.model, args.nodes, args.batch);
    let engine = Engine::new(config)?;
    let ruleset = load_ruleset(&args.rules)?;
    let packets = load_traffic(&args.traffic)?;
    let (results, _) = engine.run(&ruleset, &packets);
    let mut w = BufWriter::new(out);
    for (p, r) in packets.iter().zip(&results) {
        writeln!(w, "{},{}", p.id, format_decision(r.verdict(), r.matched_index()))
            .map_err(|e| io_failure("<stdout>", e))?;
    }
    w.flush().map_err(|e| io_failure("<stdout>", e))
}

fn with_output(
    path: Option<&Path>,
    out: &mut dyn Write,
    write: impl FnOnce(&mut dyn Write) -> Result<(), String>,
) -> CmdResult {
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(&path.display().to_string(), e))?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(|e| io_failure(&path.display().to_string(), e))?;
            w.flush().map_err(|e| io_failure(&path.display().to_string(), e))
        }
        None => write(out).map_err(|e| io_failure("<stdout>", e)),
    }
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    let spec = SweepSpec {
        axis: args.axis,
        values: args.values.clone(),
        rules: args.rules,
        nodes: args.nodes,
        batch: args.batch,
        seed: args.seed,
        repetitions: args.reps,
        models: if args.model.is_empty() {
            Model::ALL.to_vec()
        } else {
            args.model.clone()
        },
        ..SweepSpec::rules_axis(Vec::new())
    };
    spec.validate().map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    })?;
    let reports = run_sweep(&spec).map_err(|e| Failure {
        code: match e {
            SweepRunError::Spec(_) => EXIT_CONFIG,
            SweepRunError::Gen(_) => EXIT_IO,
        },
        message: e.to_string(),
    })?;
    with_output(args.out.as_deref(), out, |w| {
        write_csv(&reports, w).map_err(|e| e.to_string())
    })
}

fn cmd_gen_rules(args: &GenRulesArgs, out: &mut dyn Write) -> CmdResult {
    let ruleset = generate_ruleset(&RulesetGenParams::new(args.count, args.seed)).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    })?;
    with_output(args.out.as_deref(), out, |w| {
        write_ruleset(&ruleset, w).map_err(|e| e.to_string())
    })
}

fn cmd_gen_traffic(args: &GenTrafficArgs, out: &mut dyn Write) -> CmdResult {
    let companion: Option<Ruleset> = match &args.rules {
        Some(path) if args.worst_case => Some(load_ruleset(path)?),
        _ => None,
    };
    let mut profile = TrafficProfile::new(args.count, args.seed);
    if args.worst_case {
        profile = profile.worst_case();
    }
    let packets = generate_traffic(&profile, companion.as_ref()).map_err(|e| Failure {
        code: EXIT_IO,
        message: e.to_string(),
    })?;
    with_output(args.out.as_deref(), out, |w| {
        write_traffic(&packets, w).map_err(|e| e.to_string())
    })
}

/// First packet on which an engine disagrees with the sequential classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub packet_id: u64,
    pub model: Model,
    pub nodes: usize,
    pub expected: (Action, Option<usize>),
    pub actual: (Action, Option<usize>),
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "divergence at packet {}: model={} nodes={} expected {} got {}",
            self.packet_id,
            self.model,
            self.nodes,
            format_decision(self.expected.0, self.expected.1),
            format_decision(self.actual.0, self.actual.1),
        )
    }
}

/// Runs the data-parallel, function-parallel and hybrid models at every
/// node count and compares each packet's verdict and matched index with
/// the sequential classifier. Stops at the first disagreement.
pub fn verify_engines(
    ruleset: &Ruleset,
    packets: &[Packet],
    nodes: &[usize],
    batch: usize,
    aggregator: Aggregator,
) -> Result<Option<Divergence>, ConfigError> {
    let engines = [Model::DataParallel, Model::FunctionParallel, Model::Hybrid]
        .into_iter()
        .flat_map(|m| nodes.iter().map(move |&n| EngineConfig::new(m, n, batch)))
        .map(|c| Engine::with_aggregator(c, aggregator))
        .collect::<Result<Vec<_>, _>>()?;
    let (oracle, _) = classify_batch_sequential(ruleset, packets);
    for engine in &engines {
        let (results, _) = engine.run(ruleset, packets);
        let diverged = packets
            .iter()
            .zip(oracle.iter().zip(&results))
            .find(|(_, (want, got))| want.decision() != got.decision());
        if let Some((packet, (want, got))) = diverged {
            return Ok(Some(Divergence {
                packet_id: packet.id,
                model: engine.config().model,
                nodes: engine.config().nodes,
                expected: MatchResult::decision(want),
                actual: MatchResult::decision(got),
            }));
        }
    }
    Ok(None)
}

/// `verify` with a caller-chosen aggregation step.
pub fn cmd_verify_with(args: &VerifyArgs, aggregator: Aggregator, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let nodes = if args.nodes.is_empty() {
        DEFAULT_VERIFY_NODES.to_vec()
    } else {
        args.nodes.clone()
    };
    let result = (|| -> Result<Option<Divergence>, Failure> {
        for &n in &nodes {
            EngineConfig::new(Model::Hybrid, n, args.batch).validate()?;
        }
        let ruleset = load_ruleset(&args.rules)?;
        let packets = load_traffic(&args.traffic)?;
        let outcome = verify_engines(&ruleset, &packets, &nodes, args.batch, aggregator)?;
        if outcome.is_none() {
            let _ = writeln!(
                out,
                "ok: {} packets x {} rules agree across data, function, hybrid at nodes {:?}",
                packets.len(),
                ruleset.len(),
                nodes
            );
        }
        Ok(outcome)
    })();
    match result {
        Ok(None) => EXIT_OK,
        Ok(Some(divergence)) => {
            let _ = writeln!(err, "parfw: {divergence}");
            EXIT_DIVERGENCE
        }
        Err(f) => finish(Err(f), err),
    }
}
