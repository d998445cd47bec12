//! Sequential first-match classifier. Every parallel engine is checked
//! against this.

use alloc::vec::Vec;
use core::time::Duration;

use crate::model::{MatchResult, Packet, Ruleset};

/// Aggregate counters for one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifyStats {
    /// Sum of `MatchResult::comparisons` over the batch.
    pub total_comparisons: u64,
    pub packets_processed: u64,
    /// Largest number of rules a single worker examined for a single packet.
    pub max_worker_comparisons: u32,
    /// Zero unless the caller timed the run.
    pub wall_time: Duration,
}

impl ClassifyStats {
    pub fn record(&mut self, result: &MatchResult) {
        self.total_comparisons += u64::from(result.comparisons());
        self.packets_processed += 1;
    }

    /// Folds another batch's counters into this one. Wall time is summed.
    pub fn merge(&mut self, other: &ClassifyStats) {
        self.total_comparisons += other.total_comparisons;
        self.packets_processed += other.packets_processed;
        self.max_worker_comparisons = self.max_worker_comparisons.max(other.max_worker_comparisons);
        self.wall_time += other.wall_time;
    }
}

/// First-match lookup with early exit. No match means DROP.
pub fn classify(ruleset: &Ruleset, packet: &Packet) -> MatchResult {
    match ruleset.iter().position(|rule| rule.matches(packet)) {
        Some(index) => MatchResult::matched(
            index,
            ruleset.rules()[index].action,
            (index + 1) as u32,
        ),
        None => MatchResult::default_deny(ruleset.len() as u32),
    }
}

/// Classifies packets one after another in input order.
pub fn classify_batch_sequential(
    ruleset: &Ruleset,
    packets: &[Packet],
) -> (Vec<MatchResult>, ClassifyStats) {
    let mut stats = ClassifyStats::default();
    let results = packets
        .iter()
        .map(|p| {
            let r = classify(ruleset, p);
            stats.record(&r);
            stats.max_worker_comparisons = stats.max_worker_comparisons.max(r.comparisons());
            r
        })
        .collect();
    (results, stats)
}
