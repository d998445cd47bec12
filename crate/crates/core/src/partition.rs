//! Rule-level decomposition for the function-parallel and hybrid models.
//!
//! The ordered ruleset is cut into contiguous, balanced slices. Each worker
//! scans one slice with early exit and reports the earliest local match; a
//! single coordinator then picks the smallest global index, which is exactly
//! the sequential first match.

use alloc::vec::Vec;
use core::fmt;

use crate::model::{Action, MatchResult, Packet, Rule, Ruleset};

/// A contiguous run of the ruleset owned by one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RulePartition<'a> {
    pub part_index: usize,
    /// Global index of `rules[0]`.
    pub global_offset: usize,
    pub rules: &'a [Rule],
}

impl RulePartition<'_> {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Global index range covered by this partition.
    pub fn range(&self) -> core::ops::Range<usize> {
        self.global_offset..self.global_offset + self.rules.len()
    }
}

/// Splits `ruleset` into `workers` contiguous partitions whose sizes differ by
/// at most one. The first `len % workers` partitions get the extra rule;
/// when `workers > len` the trailing partitions are empty.
///
/// # Panics
///
/// If `workers` is zero.
pub fn partition_rules(ruleset: &Ruleset, workers: usize) -> Vec<RulePartition<'_>> {
    assert!(workers >= 1, "partition_rules needs at least one worker");
    let rules = ruleset.rules();
    let base = rules.len() / workers;
    let extra = rules.len() % workers;
    let mut offset = 0;
    (0..workers)
        .map(|part_index| {
            let size = base + usize::from(part_index < extra);
            let part = RulePartition {
                part_index,
                global_offset: offset,
                rules: &rules[offset..offset + size],
            };
            offset += size;
            part
        })
        .collect()
}

/// One worker's answer for one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartialMatch {
    pub part_index: usize,
    /// Earliest match inside the partition, as (global rule index, action).
    pub local_match: Option<(usize, Action)>,
    /// Rules this worker examined.
    pub comparisons: u32,
}

/// Scans one partition with early exit.
#[inline]
pub fn scan_partition(part: &RulePartition<'_>, packet: &Packet) -> PartialMatch {
    match part.rules.iter().position(|r| r.matches(packet)) {
        Some(local) => PartialMatch {
            part_index: part.part_index,
            local_match: Some((part.global_offset + local, part.rules[local].action)),
            comparisons: (local + 1) as u32,
        },
        None => PartialMatch {
            part_index: part.part_index,
            local_match: None,
            comparisons: part.rules.len() as u32,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateError {
    /// Two partial results claim the same partition.
    DuplicatePartition(usize),
    /// A local match points past the end of the ruleset.
    IndexOutOfRange { index: usize, rule_count: usize },
}

impl fmt::Display for AggregateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregateError::DuplicatePartition(p) => {
                write!(f, "partition {p} reported more than once")
            }
            AggregateError::IndexOutOfRange { index, rule_count } => {
                write!(f, "rule index {index} out of range for {rule_count} rules")
            }
        }
    }
}

impl core::error::Error for AggregateError {}

/// Coordinator step: the minimum global index among local matches decides;
/// with no local match the packet is dropped. Comparisons are summed over
/// all partials.
pub fn aggregate(partials: &[PartialMatch], rule_count: usize) -> Result<MatchResult, AggregateError> {
    check_unique(partials)?;
    let mut best: Option<(usize, Action)> = None;
    let mut comparisons = 0u32;
    for p in partials {
        comparisons += p.comparisons;
        if let Some((index, action)) = p.local_match {
            if index >= rule_count {
                return Err(AggregateError::IndexOutOfRange { index, rule_count });
            }
            if best.is_none_or(|(b, _)| index < b) {
                best = Some((index, action));
            }
        }
    }
    Ok(match best {
        Some((index, action)) => MatchResult::matched(index, action, comparisons),
        None => MatchResult::default_deny(comparisons),
    })
}

fn check_unique(partials: &[PartialMatch]) -> Result<(), AggregateError> {
    // Engines emit partials in partition order, which is trivially unique.
    if partials.iter().enumerate().all(|(i, p)| p.part_index == i) {
        return Ok(());
    }
    let mut seen: Vec<usize> = partials.iter().map(|p| p.part_index).collect();
    seen.sort_unstable();
    match seen.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(AggregateError::DuplicatePartition(w[0])),
        None => Ok(()),
    }
}
