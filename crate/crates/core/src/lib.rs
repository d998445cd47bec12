//! First-match, default-deny 5-tuple packet classification.
//!
//! This crate holds everything that does not need an operating system: the
//! rule and packet model, the textual rule grammar, the sequential reference
//! classifier, rule partitioning with verdict aggregation for the
//! function-parallel and hybrid execution models, and seeded generators for
//! rulesets and traffic. Threads, files and the command line live in the
//! `parfw` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod gen;
pub mod model;
pub mod partition;
pub mod rng;
pub mod text;

pub use classify::{classify, classify_batch_sequential, ClassifyStats};
pub use gen::{
    generate_ruleset, generate_traffic, GenError, MatchMode, RulesetGenParams, TrafficProfile,
    WildcardProbabilities,
};
pub use model::{
    rule_matches, Action, CidrMatcher, InvalidPrefix, InvalidRange, MatchResult, Packet,
    PortRange, ProtoMatch, Protocol, Rule, Ruleset,
};
pub use partition::{
    aggregate, partition_rules, scan_partition, AggregateError, PartialMatch, RulePartition,
};
pub use rng::Xorshift64Star;
pub use text::{format_rule, parse_rule, ParseRuleError, ParseRuleErrorKind};
