//! Seeded ruleset and traffic generators.
//!
//! Both generators draw from [`Xorshift64Star`] in a fixed order, so the
//! output is a pure function of the parameters, including the seed.

use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use crate::classify::classify;
use crate::model::{Action, CidrMatcher, Packet, PortRange, ProtoMatch, Protocol, Rule, Ruleset};
use crate::rng::Xorshift64Star;

/// Rejection-sampling budget per packet for worst-case traffic.
pub const WORST_CASE_ATTEMPTS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum GenError {
    /// A probability outside `0.0..=1.0` (or NaN).
    InvalidProbability { field: &'static str, value: f64 },
    /// Worst-case traffic was requested without the ruleset it must avoid.
    MissingCompanion,
    /// No packet inside the profile avoids every rule.
    NoNonMatchingPacket { packet_index: u64 },
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::InvalidProbability { field, value } => {
                write!(f, "{field} must be within 0.0..=1.0, got {value}")
            }
            GenError::MissingCompanion => {
                f.write_str("worst-case traffic needs the ruleset it should avoid")
            }
            GenError::NoNonMatchingPacket { packet_index } => write!(
                f,
                "no non-matching packet exists within the traffic profile (packet {packet_index})"
            ),
        }
    }
}

impl core::error::Error for GenError {}

fn check_probability(field: &'static str, value: f64) -> Result<(), GenError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(GenError::InvalidProbability { field, value })
    }
}

/// Per-field probability that a generated rule leaves the field unspecified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WildcardProbabilities {
    pub proto: f64,
    pub src: f64,
    pub sport: f64,
    pub dst: f64,
    pub dport: f64,
}

impl WildcardProbabilities {
    pub const fn uniform(p: f64) -> Self {
        WildcardProbabilities {
            proto: p,
            src: p,
            sport: p,
            dst: p,
            dport: p,
        }
    }
}

impl Default for WildcardProbabilities {
    fn default() -> Self {
        WildcardProbabilities {
            proto: 0.3,
            src: 0.3,
            sport: 0.8,
            dst: 0.0,
            dport: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RulesetGenParams {
    pub count: usize,
    pub seed: u64,
    pub wildcard: WildcardProbabilities,
    /// Fraction of rules whose action is ACCEPT.
    pub action_split: f64,
    /// Concrete source and destination prefixes are drawn inside this block.
    pub address_space: CidrMatcher,
}

impl RulesetGenParams {
    pub fn new(count: usize, seed: u64) -> Self {
        RulesetGenParams {
            count,
            seed,
            wildcard: WildcardProbabilities::default(),
            action_split: 0.5,
            address_space: default_space(),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        check_probability("wildcard.proto", self.wildcard.proto)?;
        check_probability("wildcard.src", self.wildcard.src)?;
        check_probability("wildcard.sport", self.wildcard.sport)?;
        check_probability("wildcard.dst", self.wildcard.dst)?;
        check_probability("wildcard.dport", self.wildcard.dport)?;
        check_probability("action_split", self.action_split)
    }
}

fn default_space() -> CidrMatcher {
    CidrMatcher::new(Ipv4Addr::new(10, 0, 0, 0), 8).unwrap()
}

/// Random valid rules. Per rule the draws are, in order: action, then for
/// each of proto, src, sport, dst, dport a wildcard coin followed (if not
/// wildcarded) by the field value.
///
/// Concrete prefixes have a length uniform between two more than the
/// address space's own length and 32. Concrete port fields are, with equal odds, a
/// single well-known port (`0..1024`) or a range of up to 4096 ports starting
/// anywhere.
pub fn generate_ruleset(params: &RulesetGenParams) -> Result<Ruleset, GenError> {
    params.validate()?;
    let mut rng = Xorshift64Star::new(params.seed);
    let w = &params.wildcard;
    let space = params.address_space;
    let rules = (0..params.count)
        .map(|_| {
            let action = if rng.chance(params.action_split) {
                Action::Accept
            } else {
                Action::Drop
            };
            let proto = if rng.chance(w.proto) {
                ProtoMatch::Any
            } else {
                ProtoMatch::Only(Protocol::ALL[rng.below(3) as usize])
            };
            let src = random_prefix(&mut rng, w.src, space);
            let sport = random_ports(&mut rng, w.sport);
            let dst = random_prefix(&mut rng, w.dst, space);
            let dport = random_ports(&mut rng, w.dport);
            Rule {
                action,
                proto,
                src,
                sport,
                dst,
                dport,
            }
        })
        .collect();
    Ok(rules)
}

fn random_prefix(rng: &mut Xorshift64Star, wildcard: f64, space: CidrMatcher) -> CidrMatcher {
    if rng.chance(wildcard) {
        return CidrMatcher::ANY;
    }
    let (lo, hi) = space.bounds();
    let addr = rng.in_range(u64::from(lo), u64::from(hi)) as u32;
    let min_len = (space.prefix_len() + 2).min(32);
    let len = rng.in_range(u64::from(min_len), 32) as u8;
    CidrMatcher::new(Ipv4Addr::from_bits(addr), len).expect("length within 0..=32")
}

fn random_ports(rng: &mut Xorshift64Star, wildcard: f64) -> PortRange {
    if rng.chance(wildcard) {
        return PortRange::ANY;
    }
    if rng.chance(0.5) {
        PortRange::single(rng.below(1024) as u16)
    } else {
        let lo = rng.below(65536) as u16;
        let span = rng.below(4096) as u16;
        PortRange::new(lo, lo.saturating_add(span)).expect("lo <= hi")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchMode {
    /// Headers drawn uniformly inside the profile.
    Uniform,
    /// Headers that match no rule of the companion ruleset.
    WorstCase,
}

/// Homogeneous traffic: one protocol, fixed subnets, uniform ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficProfile {
    pub count: u64,
    pub seed: u64,
    pub proto: Protocol,
    pub src_subnet: CidrMatcher,
    pub dst_subnet: CidrMatcher,
    pub sport_range: PortRange,
    pub dport_range: PortRange,
    pub match_mode: MatchMode,
}

impl TrafficProfile {
    /// TCP from `10.0.0.0/8` ephemeral ports to `10.0.0.0/8` well-known
    /// ports, uniform.
    pub fn new(count: u64, seed: u64) -> Self {
        TrafficProfile {
            count,
            seed,
            proto: Protocol::Tcp,
            src_subnet: default_space(),
            dst_subnet: default_space(),
            sport_range: PortRange::new(1024, 65535).unwrap(),
            dport_range: PortRange::new(0, 1023).unwrap(),
            match_mode: MatchMode::Uniform,
        }
    }

    pub fn worst_case(mut self) -> Self {
        self.match_mode = MatchMode::WorstCase;
        self
    }
}

fn draw_packet(rng: &mut Xorshift64Star, profile: &TrafficProfile, id: u64) -> Packet {
    let in_subnet = |rng: &mut Xorshift64Star, c: &CidrMatcher| {
        let (lo, hi) = c.bounds();
        Ipv4Addr::from_bits(rng.in_range(u64::from(lo), u64::from(hi)) as u32)
    };
    let in_ports = |rng: &mut Xorshift64Star, r: &PortRange| {
        rng.in_range(u64::from(r.lo()), u64::from(r.hi())) as u16
    };
    let src_ip = in_subnet(rng, &profile.src_subnet);
    let src_port = in_ports(rng, &profile.sport_range);
    let dst_ip = in_subnet(rng, &profile.dst_subnet);
    let dst_port = in_ports(rng, &profile.dport_range);
    Packet {
        id,
        proto: profile.proto,
        src_ip,
        src_port,
        dst_ip,
        dst_port,
    }
}

/// Generates `profile.count` packets with ids `0..count`.
///
/// Each packet consumes four draws: source address, source port,
/// destination address, destination port. In [`MatchMode::WorstCase`] a
/// packet is redrawn until it matches no rule of `companion`, up to
/// [`WORST_CASE_ATTEMPTS`] times; after that the last draw is repaired by
/// moving its destination port outside every rule that would otherwise
/// match it. If no such port exists the whole call fails.
pub fn generate_traffic(
    profile: &TrafficProfile,
    companion: Option<&Ruleset>,
) -> Result<Vec<Packet>, GenError> {
    let mut rng = Xorshift64Star::new(profile.seed);
    let worst = match (profile.match_mode, companion) {
        (MatchMode::Uniform, _) => None,
        (MatchMode::WorstCase, Some(rs)) => Some(rs),
        (MatchMode::WorstCase, None) => return Err(GenError::MissingCompanion),
    };
    let mut packets = Vec::with_capacity(usize::try_from(profile.count).unwrap_or(0));
    for id in 0..profile.count {
        let packet = match worst {
            None => draw_packet(&mut rng, profile, id),
            Some(ruleset) => non_matching_packet(&mut rng, profile, ruleset, id)?,
        };
        packets.push(packet);
    }
    Ok(packets)
}

fn non_matching_packet(
    rng: &mut Xorshift64Star,
    profile: &TrafficProfile,
    ruleset: &Ruleset,
    id: u64,
) -> Result<Packet, GenError> {
    let mut candidate = draw_packet(rng, profile, id);
    for _ in 1..WORST_CASE_ATTEMPTS {
        if classify(ruleset, &candidate).matched_index().is_none() {
            return Ok(candidate);
        }
        candidate = draw_packet(rng, profile, id);
    }
    if classify(ruleset, &candidate).matched_index().is_none() {
        return Ok(candidate);
    }
    repair_dport(profile, ruleset, candidate).ok_or(GenError::NoNonMatchingPacket { packet_index: id })
}

/// Picks the smallest destination port in the profile range that lies
/// outside the dport range of every rule matching `candidate` on the other
/// four fields.
fn repair_dport(profile: &TrafficProfile, ruleset: &Ruleset, candidate: Packet) -> Option<Packet> {
    let mut blocking: Vec<(u16, u16)> = ruleset
        .iter()
        .filter(|r| {
            r.proto.matches(candidate.proto)
                && r.src.contains(candidate.src_ip)
                && r.sport.contains(candidate.src_port)
                && r.dst.contains(candidate.dst_ip)
        })
        .map(|r| (r.dport.lo(), r.dport.hi()))
        .collect();
    blocking.sort_unstable();
    let mut port = u32::from(profile.dport_range.lo());
    for (lo, hi) in blocking {
        if u32::from(lo) > port {
            break;
        }
        port = port.max(u32::from(hi) + 1);
    }
    if port > u32::from(profile.dport_range.hi()) {
        return None;
    }
    let repaired = Packet {
        dst_port: port as u16,
        ..candidate
    };
    debug_assert!(classify(ruleset, &repaired).matched_index().is_none());
    Some(repaired)
}
