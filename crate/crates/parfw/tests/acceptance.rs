//! Acceptance criteria. Runs as a plain binary (no libtest harness) so that
//! every criterion prints exactly one PASS/FAIL/SKIP line.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use parfw::bench::{emit_csv, read_csv, run_point, run_sweep, SweepSpec};
use parfw::cli::{cmd_verify_with, VerifyArgs, EXIT_DIVERGENCE, EXIT_OK};
use parfw::{Engine, EngineConfig, Model};
use parfw_core::{
    classify_batch_sequential, generate_ruleset, generate_traffic, Action, AggregateError, CidrMatcher,
    MatchResult, Packet, PartialMatch, PortRange, Ruleset, RulesetGenParams, TrafficProfile,
    WildcardProbabilities,
};

const NODE_COUNTS: [usize; 6] = [1, 2, 3, 4, 8, 64];

enum Outcome {
    Pass(String),
    Skip(String),
}

type Check = Result<Outcome, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn uniform(rules: usize, packets: u64, seed: u64) -> (Ruleset, Vec<Packet>) {
    let rs = generate_ruleset(&RulesetGenParams::new(rules, seed)).unwrap();
    let pk = generate_traffic(&TrafficProfile::new(packets, seed.wrapping_mul(31).wrapping_add(17)), None).unwrap();
    (rs, pk)
}

fn worst_case(rules: usize, packets: u64, seed: u64) -> (Ruleset, Vec<Packet>) {
    let rs = generate_ruleset(&RulesetGenParams::new(rules, seed)).unwrap();
    let profile = TrafficProfile::new(packets, seed.wrapping_add(1)).worst_case();
    let pk = generate_traffic(&profile, Some(&rs)).unwrap();
    (rs, pk)
}

fn decisions(results: &[MatchResult]) -> Vec<(Action, Option<usize>)> {
    results.iter().map(MatchResult::decision).collect()
}

/// 1. Every model at every node count reproduces the sequential verdict and
///    matched index for every packet.
fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut checked = 0u64;
    let mut matched = 0u64;
    for seed in 1..=10u64 {
        for size in [16, 256, 2048] {
            let (rs, pk) = uniform(size, 10_000, seed);
            let (oracle, _) = classify_batch_sequential(&rs, &pk);
            let expected = decisions(&oracle);
            matched += oracle.iter().filter(|r| r.matched_index().is_some()).count() as u64;
            for model in Model::ALL {
                for nodes in NODE_COUNTS {
                    let engine = Engine::new(EngineConfig::new(model, nodes, 1024)).unwrap();
                    let (results, _) = engine.run(&rs, &pk);
                    ensure!(results.len() == pk.len(), "{model} W={nodes}: result count {}", results.len());
                    if let Some(i) = (0..pk.len()).find(|&i| results[i].decision() != expected[i]) {
                        return Err(format!(
                            "seed {seed} |R|={size} {model} W={nodes}: packet {} expected {:?} got {:?}",
                            pk[i].id,
                            expected[i],
                            results[i].decision()
                        ));
                    }
                    checked += pk.len() as u64;
                }
            }
        }
    }
    Ok(Outcome::Pass(format!(
        "{checked} packet classifications identical to the oracle ({matched} of 300000 oracle packets matched a rule), {:.1}s",
        start.elapsed().as_secs_f64()
    )))
}

/// Dense workload so that both outcomes are common.
fn dense_ruleset(rules: usize, seed: u64) -> Ruleset {
    generate_ruleset(&RulesetGenParams {
        wildcard: WildcardProbabilities::uniform(0.6),
        address_space: CidrMatcher::new([10, 0, 0, 0].into(), 28).unwrap(),
        ..RulesetGenParams::new(rules, seed)
    })
    .unwrap()
}

fn dense_traffic(packets: u64, seed: u64) -> Vec<Packet> {
    let subnet = CidrMatcher::new([10, 0, 0, 0].into(), 28).unwrap();
    generate_traffic(
        &TrafficProfile {
            src_subnet: subnet,
            dst_subnet: subnet,
            dport_range: PortRange::new(0, 15).unwrap(),
            ..TrafficProfile::new(packets, seed)
        },
        None,
    )
    .unwrap()
}

/// 2. Default deny and first match, checked by exhaustive rescans.
fn first_match_properties() -> Check {
    let empty = Ruleset::new();
    let probe = dense_traffic(100_000, 99);
    let (results, _) = classify_batch_sequential(&empty, &probe);
    ensure!(
        results.iter().all(|r| r.decision() == (Action::Drop, None)),
        "empty ruleset let a packet through"
    );

    let (mut cases, mut hits, mut misses) = (0u64, 0u64, 0u64);
    for seed in 0..1000u64 {
        let rs = dense_ruleset(1 + (seed as usize % 64), seed);
        let pk = dense_traffic(100, seed + 5000);
        let (results, _) = classify_batch_sequential(&rs, &pk);
        for (p, r) in pk.iter().zip(&results) {
            cases += 1;
            match r.matched_index() {
                Some(i) => {
                    hits += 1;
                    ensure!(rs.rules()[i].matches(p), "seed {seed}: reported rule {i} does not match");
                    ensure!(
                        rs.rules()[..i].iter().all(|rule| !rule.matches(p)),
                        "seed {seed}: a rule before {i} also matches packet {}",
                        p.id
                    );
                    ensure!(r.verdict() == rs.rules()[i].action, "seed {seed}: verdict differs from rule action");
                }
                None => {
                    misses += 1;
                    ensure!(rs.iter().all(|rule| !rule.matches(p)), "seed {seed}: unmatched packet has a matching rule");
                    ensure!(r.verdict() == Action::Drop, "seed {seed}: unmatched packet not dropped");
                }
            }
        }
    }
    ensure!(cases >= 100_000, "only {cases} cases");
    ensure!(hits > 0 && misses > 0, "degenerate sample: {hits} hits, {misses} misses");
    Ok(Outcome::Pass(format!(
        "100000 packets vs empty ruleset all DROP; {cases} (ruleset, packet) cases rescanned ({hits} matched, {misses} default-deny)"
    )))
}

/// 3. Comparison accounting under worst-case traffic.
fn work_accounting() -> Check {
    let mut notes = Vec::new();
    for rules in [2048usize, 1000] {
        let (rs, pk) = worst_case(rules, 4096, 21);
        let (_, seq) = classify_batch_sequential(&rs, &pk);
        let expected = pk.len() as u64 * rules as u64;
        ensure!(seq.total_comparisons == expected, "sequential {} != {expected}", seq.total_comparisons);
        for nodes in NODE_COUNTS {
            let (_, dp) = Engine::new(EngineConfig::new(Model::DataParallel, nodes, 4096)).unwrap().run(&rs, &pk);
            ensure!(
                dp.total_comparisons == seq.total_comparisons,
                "|R|={rules} data W={nodes}: {} != {}",
                dp.total_comparisons,
                seq.total_comparisons
            );
            let (_, fp) = Engine::new(EngineConfig::new(Model::FunctionParallel, nodes, 4096)).unwrap().run(&rs, &pk);
            let bound = rules.div_ceil(nodes) as u32;
            ensure!(
                fp.max_worker_comparisons == bound,
                "|R|={rules} function W={nodes}: max per-worker {} != ceil = {bound}",
                fp.max_worker_comparisons
            );
        }
        notes.push(format!("|R|={rules}: seq total {expected}"));
    }
    Ok(Outcome::Pass(format!(
        "{}; data totals equal; function max per-worker == ceil(|R|/W) for W in {NODE_COUNTS:?}",
        notes.join(", ")
    )))
}

/// 4. Degenerate configurations collapse onto simpler models exactly.
fn degeneracy() -> Check {
    let run = |model, nodes, batch, rs: &Ruleset, pk: &[Packet]| {
        Engine::new(EngineConfig::new(model, nodes, batch)).unwrap().run(rs, pk)
    };
    for seed in 1..=3u64 {
        for (rs, pk) in [uniform(2048, 2000, seed), worst_case(300, 500, seed)] {
            let (seq, seq_s) = classify_batch_sequential(&rs, &pk);
            let (fp1, fp1_s) = run(Model::FunctionParallel, 1, 256, &rs, &pk);
            ensure!(fp1 == seq, "seed {seed}: W=1 function-parallel differs from sequential");
            ensure!(fp1_s.total_comparisons == seq_s.total_comparisons, "seed {seed}: W=1 comparison totals differ");

            for w in [1, 3, 8] {
                let (dp, dp_s) = run(Model::DataParallel, w, 256, &rs, &pk);
                let (hy, hy_s) = run(Model::Hybrid, 1, 256, &rs, &pk);
                ensure!(hy == dp, "seed {seed}: nodes=1 hybrid differs from data-parallel W={w}");
                ensure!(hy_s.total_comparisons == dp_s.total_comparisons, "seed {seed}: nodes=1 hybrid totals differ");
            }

            for nodes in [2, 4, 64] {
                let (fp, fp_s) = run(Model::FunctionParallel, nodes, 1, &rs, &pk);
                let (hy, hy_s) = run(Model::Hybrid, nodes, 1, &rs, &pk);
                ensure!(hy == fp, "seed {seed}: batch=1 hybrid differs from function-parallel at {nodes} nodes");
                ensure!(
                    (hy_s.total_comparisons, hy_s.max_worker_comparisons)
                        == (fp_s.total_comparisons, fp_s.max_worker_comparisons),
                    "seed {seed}: batch=1 hybrid counters differ at {nodes} nodes"
                );
            }
        }
    }
    Ok(Outcome::Pass(
        "W=1 function == sequential, nodes=1 hybrid == data, batch=1 hybrid == function (results and comparisons)".into(),
    ))
}

/// 5. Data-parallel with four workers beats sequential on a multi-core host.
fn throughput_trend() -> Check {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores < 4 {
        return Ok(Outcome::Skip(format!(
            "host exposes {cores} logical core(s); the trend check requires at least 4"
        )));
    }
    let (rs, pk) = worst_case(2048, 16_384, 5);
    let seq = run_point(&rs, &pk, &EngineConfig::new(Model::Sequential, 1, 16_384), 5).unwrap();
    let dp = run_point(&rs, &pk, &EngineConfig::new(Model::DataParallel, 4, 16_384), 5).unwrap();
    let ratio = dp.throughput_pps / seq.throughput_pps;
    ensure!(ratio > 1.0, "data-parallel/sequential throughput ratio {ratio:.3} <= 1.0");
    Ok(Outcome::Pass(format!(
        "throughput ratio {ratio:.2} ({:.0} vs {:.0} packets/s) on {cores} cores",
        dp.throughput_pps, seq.throughput_pps
    )))
}

fn aggregate_max_index(partials: &[PartialMatch], _rule_count: usize) -> Result<MatchResult, AggregateError> {
    let comparisons = partials.iter().map(|p| p.comparisons).sum();
    Ok(partials
        .iter()
        .filter_map(|p| p.local_match)
        .max_by_key(|&(i, _)| i)
        .map_or(MatchResult::default_deny(comparisons), |(i, a)| MatchResult::matched(i, a, comparisons)))
}

fn parfw(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_parfw"))
        .args(args)
        .output()
        .map_err(|e| format!("spawn parfw: {e}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 6. Generators are byte-reproducible; verify passes and catches a broken
///    aggregation step.
fn determinism_and_verify() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    for run in ["a", "b"] {
        let rules = d.join(format!("rules_{run}.txt"));
        let traffic = d.join(format!("traffic_{run}.csv"));
        let out = parfw(&["gen-rules", "--count", "2048", "--seed", "7", "--out", p(&rules)])?;
        ensure!(out.status.success(), "gen-rules failed");
        let out = parfw(&["gen-traffic", "--count", "10000", "--seed", "8", "--out", p(&traffic)])?;
        ensure!(out.status.success(), "gen-traffic failed");
        let worst = d.join(format!("worst_{run}.csv"));
        let out = parfw(&["gen-traffic", "--count", "2000", "--seed", "9", "--worst-case", "--rules", p(&rules), "--out", p(&worst)])?;
        ensure!(out.status.success(), "gen-traffic --worst-case failed");
    }
    for (a, b) in [("rules_a.txt", "rules_b.txt"), ("traffic_a.csv", "traffic_b.csv"), ("worst_a.csv", "worst_b.csv")] {
        let (x, y) = (fs::read(d.join(a)).unwrap(), fs::read(d.join(b)).unwrap());
        ensure!(x == y, "{a} and {b} differ");
    }

    let rules = d.join("rules_a.txt");
    let traffic = d.join("traffic_a.csv");
    let out = parfw(&["verify", "--rules", p(&rules), "--traffic", p(&traffic)])?;
    ensure!(
        out.status.code() == Some(0),
        "verify exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );

    let args = VerifyArgs {
        rules: rules.clone(),
        traffic: traffic.clone(),
        nodes: vec![],
        batch: 4096,
    };
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let good = cmd_verify_with(&args, parfw_core::aggregate, &mut o, &mut e);
    ensure!(good == EXIT_OK, "verify with the real aggregation exited {good}");
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = cmd_verify_with(&args, aggregate_max_index, &mut o, &mut e);
    ensure!(code == EXIT_DIVERGENCE, "mutated aggregation exited {code}, expected {EXIT_DIVERGENCE}");
    let msg = String::from_utf8_lossy(&e).trim().to_owned();
    Ok(Outcome::Pass(format!(
        "byte-identical gen-rules/gen-traffic reruns; verify exit 0 on 2048x10000; mutation exit 3 ({msg})"
    )))
}

/// 7. The two sweeps, restated in comparison counts.
fn sweeps_in_comparison_space() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;

    let rules_axis = vec![128, 256, 512, 1024, 2048];
    let spec = SweepSpec {
        batch: 2048,
        repetitions: 1,
        models: vec![Model::Sequential],
        ..SweepSpec::rules_axis(rules_axis.clone())
    };
    let csv = dir.path().join("rules.csv");
    emit_csv(&run_sweep(&spec).map_err(|e| e.to_string())?, &csv).map_err(|e| e.to_string())?;
    let reports = read_csv(&csv).map_err(|e| e.to_string())?;
    ensure!(reports.len() == rules_axis.len(), "rules sweep has {} rows", reports.len());
    for (r, &size) in reports.iter().zip(&rules_axis) {
        ensure!(
            r.ruleset_size == size && r.total_comparisons == (size * r.batch_size) as u64,
            "|R|={size}: {} comparisons over {} packets",
            r.total_comparisons,
            r.batch_size
        );
    }
    for w in reports.windows(2) {
        let slope = (w[1].comparisons_per_packet() - w[0].comparisons_per_packet())
            / (w[1].ruleset_size - w[0].ruleset_size) as f64;
        ensure!(slope == 1.0, "slope {slope} between |R|={} and |R|={}", w[0].ruleset_size, w[1].ruleset_size);
    }

    let nodes_axis = vec![1, 2, 4, 8, 16, 32, 64];
    let spec = SweepSpec {
        batch: 1024,
        repetitions: 1,
        models: vec![Model::FunctionParallel],
        ..SweepSpec::nodes_axis(nodes_axis.clone())
    };
    let csv = dir.path().join("nodes.csv");
    emit_csv(&run_sweep(&spec).map_err(|e| e.to_string())?, &csv).map_err(|e| e.to_string())?;
    let reports = read_csv(&csv).map_err(|e| e.to_string())?;
    ensure!(reports.len() == nodes_axis.len(), "nodes sweep has {} rows", reports.len());
    let per_node: Vec<u32> = reports.iter().map(|r| r.max_worker_comparisons).collect();
    for w in per_node.windows(2) {
        let half = f64::from(w[0]) / 2.0;
        ensure!((f64::from(w[1]) - half).abs() <= 1.0, "max per-worker went {} -> {}", w[0], w[1]);
    }
    ensure!(per_node[0] == 2048, "W=1 max per-worker {}", per_node[0]);
    Ok(Outcome::Pass(format!(
        "sequential comparisons/packet == |R| (slope 1) over {rules_axis:?}; function max per-worker {per_node:?} over W={nodes_axis:?}"
    )))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("oracle equivalence", oracle_equivalence),
        ("default deny and first match", first_match_properties),
        ("work accounting", work_accounting),
        ("degeneracy collapses", degeneracy),
        ("throughput trend", throughput_trend),
        ("determinism and verify gate", determinism_and_verify),
        ("sweeps in comparison space", sweeps_in_comparison_space),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(Outcome::Pass(detail)) => println!("PASS {label}: {detail}"),
            Ok(Outcome::Skip(detail)) => println!("SKIP {label}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
