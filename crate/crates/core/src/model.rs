//! Rules, packets and verdicts.

use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

/// What happens to a packet once a rule (or the default policy) decides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Accept,
    Drop,
}

impl Action {
    /// Verdict applied when no rule matches.
    pub const DEFAULT: Action = Action::Drop;

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Accept => "ACCEPT",
            Action::Drop => "DROP",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transport protocol carried by a concrete packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Tcp, Protocol::Udp, Protocol::Icmp];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
        }
    }

    /// Parses the lowercase token used in rule and traffic files.
    pub fn from_token(token: &str) -> Option<Protocol> {
        match token {
            "tcp" => Some(Protocol::Tcp),
            "udp" => Some(Protocol::Udp),
            "icmp" => Some(Protocol::Icmp),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Protocol field of a rule: a single protocol or the `any` wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtoMatch {
    Any,
    Only(Protocol),
}

impl ProtoMatch {
    #[inline]
    pub fn matches(self, proto: Protocol) -> bool {
        match self {
            ProtoMatch::Any => true,
            ProtoMatch::Only(p) => p == proto,
        }
    }

    pub fn is_wildcard(self) -> bool {
        self == ProtoMatch::Any
    }
}

impl fmt::Display for ProtoMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtoMatch::Any => f.write_str("any"),
            ProtoMatch::Only(p) => p.fmt(f),
        }
    }
}

/// Prefix length outside `0..=32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidPrefix(pub u8);

impl fmt::Display for InvalidPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid CIDR prefix length {} (must be 0..=32)", self.0)
    }
}

/// IPv4 prefix matcher. The base address never has host bits set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CidrMatcher {
    base: u32,
    prefix_len: u8,
}

impl CidrMatcher {
    /// `0.0.0.0/0`, matches every address.
    pub const ANY: CidrMatcher = CidrMatcher {
        base: 0,
        prefix_len: 0,
    };

    /// Builds a matcher, zeroing any host bits in `base`.
    pub fn new(base: Ipv4Addr, prefix_len: u8) -> Result<Self, InvalidPrefix> {
        if prefix_len > 32 {
            return Err(InvalidPrefix(prefix_len));
        }
        Ok(CidrMatcher {
            base: base.to_bits() & Self::mask(prefix_len),
            prefix_len,
        })
    }

    /// A `/32` matcher for exactly one address.
    pub fn host(addr: Ipv4Addr) -> Self {
        CidrMatcher {
            base: addr.to_bits(),
            prefix_len: 32,
        }
    }

    /// Network mask for a prefix length; `/0` is special-cased so no shift by 32 happens.
    #[inline]
    pub fn mask(prefix_len: u8) -> u32 {
        if prefix_len == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(prefix_len))
        }
    }

    pub fn base(&self) -> Ipv4Addr {
        Ipv4Addr::from_bits(self.base)
    }

    pub fn prefix_len(&self) -> u8 {
        self.prefix_len
    }

    pub fn is_wildcard(&self) -> bool {
        self.prefix_len == 0
    }

    /// Number of addresses covered, as a `u64` so that `/0` fits.
    pub fn size(&self) -> u64 {
        1u64 << (32 - u32::from(self.prefix_len))
    }

    /// Smallest and largest covered address.
    pub fn bounds(&self) -> (u32, u32) {
        (self.base, self.base | !Self::mask(self.prefix_len))
    }

    #[inline]
    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        self.contains_bits(addr.to_bits())
    }

    #[inline]
    pub fn contains_bits(&self, addr: u32) -> bool {
        if self.prefix_len == 0 {
            return true;
        }
        let shift = 32 - u32::from(self.prefix_len);
        (addr >> shift) == (self.base >> shift)
    }
}

impl fmt::Display for CidrMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_wildcard() {
            f.write_str("*")
        } else {
            write!(f, "{}/{}", self.base(), self.prefix_len)
        }
    }
}

/// Port range with `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidRange {
    pub lo: u16,
    pub hi: u16,
}

impl fmt::Display for InvalidRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "inverted port range {}-{}", self.lo, self.hi)
    }
}

/// Inclusive port range; `0-65535` is the wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PortRange {
    lo: u16,
    hi: u16,
}

impl PortRange {
    pub const ANY: PortRange = PortRange {
        lo: 0,
        hi: u16::MAX,
    };

    pub fn new(lo: u16, hi: u16) -> Result<Self, InvalidRange> {
        if lo > hi {
            return Err(InvalidRange { lo, hi });
        }
        Ok(PortRange { lo, hi })
    }

    pub fn single(port: u16) -> Self {
        PortRange { lo: port, hi: port }
    }

    pub fn lo(&self) -> u16 {
        self.lo
    }

    pub fn hi(&self) -> u16 {
        self.hi
    }

    pub fn is_wildcard(&self) -> bool {
        *self == Self::ANY
    }

    /// Number of ports covered (1..=65536).
    #[allow(clippy::len_without_is_empty)] // a range always holds at least one port
    pub fn len(&self) -> u32 {
        u32::from(self.hi) - u32::from(self.lo) + 1
    }

    #[inline]
    pub fn contains(&self, port: u16) -> bool {
        self.lo <= port && port <= self.hi
    }
}

impl fmt::Display for PortRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_wildcard() {
            f.write_str("*")
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

/// One filtering rule: a 5-tuple matcher plus the action taken on a match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rule {
    pub action: Action,
    pub proto: ProtoMatch,
    pub src: CidrMatcher,
    pub sport: PortRange,
    pub dst: CidrMatcher,
    pub dport: PortRange,
}

impl Rule {
    /// A rule with every field wildcarded.
    pub const fn any(action: Action) -> Rule {
        Rule {
            action,
            proto: ProtoMatch::Any,
            src: CidrMatcher::ANY,
            sport: PortRange::ANY,
            dst: CidrMatcher::ANY,
            dport: PortRange::ANY,
        }
    }

    /// True iff every field of the rule accepts the corresponding packet field.
    #[inline]
    pub fn matches(&self, packet: &Packet) -> bool {
        self.proto.matches(packet.proto)
            && self.src.contains(packet.src_ip)
            && self.dst.contains(packet.dst_ip)
            && self.sport.contains(packet.src_port)
            && self.dport.contains(packet.dst_port)
    }

    pub fn is_all_wildcard(&self) -> bool {
        self.proto.is_wildcard()
            && self.src.is_wildcard()
            && self.sport.is_wildcard()
            && self.dst.is_wildcard()
            && self.dport.is_wildcard()
    }
}

/// Free-function form of [`Rule::matches`].
#[inline]
pub fn rule_matches(rule: &Rule, packet: &Packet) -> bool {
    rule.matches(packet)
}

/// Ordered rule list. Index 0 has the highest priority; unmatched packets
/// are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Ruleset {
    rules: Vec<Rule>,
}

impl Ruleset {
    pub fn new() -> Self {
        Ruleset::default()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn push(&mut self, rule: Rule) {
        self.rules.push(rule);
    }

    pub fn get(&self, index: usize) -> Option<&Rule> {
        self.rules.get(index)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Rule> {
        self.rules.iter()
    }

    pub fn into_rules(self) -> Vec<Rule> {
        self.rules
    }
}

impl From<Vec<Rule>> for Ruleset {
    fn from(rules: Vec<Rule>) -> Self {
        Ruleset { rules }
    }
}

impl FromIterator<Rule> for Ruleset {
    fn from_iter<I: IntoIterator<Item = Rule>>(iter: I) -> Self {
        Ruleset {
            rules: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Ruleset {
    type Item = &'a Rule;
    type IntoIter = core::slice::Iter<'a, Rule>;

    fn into_iter(self) -> Self::IntoIter {
        self.rules.iter()
    }
}

/// A concrete packet header as seen by the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Packet {
    pub id: u64,
    pub proto: Protocol,
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
}

/// Outcome of classifying one packet.
///
/// `comparisons` counts rules examined, summed over every worker that
/// touched the packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatchResult {
    verdict: Action,
    matched_index: Option<usize>,
    comparisons: u32,
}

impl MatchResult {
    pub fn matched(index: usize, action: Action, comparisons: u32) -> Self {
        MatchResult {
            verdict: action,
            matched_index: Some(index),
            comparisons,
        }
    }

    pub fn default_deny(comparisons: u32) -> Self {
        MatchResult {
            verdict: Action::DEFAULT,
            matched_index: None,
            comparisons,
        }
    }

    pub fn verdict(&self) -> Action {
        self.verdict
    }

    pub fn matched_index(&self) -> Option<usize> {
        self.matched_index
    }

    pub fn comparisons(&self) -> u32 {
        self.comparisons
    }

    /// The `(verdict, matched_index)` pair, which every execution model must
    /// agree on.
    pub fn decision(&self) -> (Action, Option<usize>) {
        (self.verdict, self.matched_index)
    }
}
