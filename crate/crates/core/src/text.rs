//! Line grammar for rules:
//!
//! ```text
//! <ACTION> <proto> <src> <sport> <dst> <dport>
//! ```
//!
//! `ACTION` is `ACCEPT` or `DROP`, `proto` is one of `tcp`, `udp`, `icmp`,
//! `any`. Addresses are `a.b.c.d/len` or `*`; ports are `lo-hi`, a single
//! `n`, or `*`. Anything after `#` is a comment.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use crate::model::{Action, CidrMatcher, PortRange, ProtoMatch, Protocol, Rule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseRuleErrorKind {
    /// Wrong token count or a token that cannot be read at all.
    Syntax(String),
    UnknownAction(String),
    UnknownProtocol(String),
    InvalidPrefix(u32),
    PortOutOfRange(u64),
    InvertedRange { lo: u16, hi: u16 },
}

/// A rule line that failed to parse. `column` is the 1-based character
/// position of the offending token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRuleError {
    pub column: usize,
    pub kind: ParseRuleErrorKind,
}

impl fmt::Display for ParseRuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: ", self.column)?;
        match &self.kind {
            ParseRuleErrorKind::Syntax(msg) => f.write_str(msg),
            ParseRuleErrorKind::UnknownAction(t) => {
                write!(f, "unknown action {t:?} (expected ACCEPT or DROP)")
            }
            ParseRuleErrorKind::UnknownProtocol(t) => {
                write!(f, "unknown protocol {t:?} (expected tcp, udp, icmp or any)")
            }
            ParseRuleErrorKind::InvalidPrefix(p) => {
                write!(f, "invalid CIDR prefix length {p} (must be 0..=32)")
            }
            ParseRuleErrorKind::PortOutOfRange(p) => {
                write!(f, "port {p} out of range (must be 0..=65535)")
            }
            ParseRuleErrorKind::InvertedRange { lo, hi } => {
                write!(f, "inverted port range {lo}-{hi}")
            }
        }
    }
}

impl core::error::Error for ParseRuleError {}

/// Strips a trailing `#` comment.
pub fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses one rule line. CIDR bases are normalized (host bits zeroed).
pub fn parse_rule(line: &str) -> Result<Rule, ParseRuleError> {
    let body = strip_comment(line);
    // split_whitespace does not report offsets, so walk the string once.
    let mut tokens: Vec<(usize, &str)> = Vec::with_capacity(6);
    let mut start = None;
    for (i, c) in body.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                tokens.push((s, &body[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push((s, &body[s..]));
    }

    let column_of = |byte: usize| body[..byte].chars().count() + 1;
    if tokens.len() != 6 {
        let column = tokens
            .get(6)
            .map(|&(b, _)| column_of(b))
            .unwrap_or_else(|| body.chars().count() + 1);
        return Err(ParseRuleError {
            column,
            kind: ParseRuleErrorKind::Syntax(alloc::format!(
                "expected 6 fields, found {}",
                tokens.len()
            )),
        });
    }

    let at = |idx: usize, kind: ParseRuleErrorKind| ParseRuleError {
        column: column_of(tokens[idx].0),
        kind,
    };

    let action = match tokens[0].1 {
        "ACCEPT" => Action::Accept,
        "DROP" => Action::Drop,
        t => return Err(at(0, ParseRuleErrorKind::UnknownAction(t.to_string()))),
    };
    let proto = match tokens[1].1 {
        "any" => ProtoMatch::Any,
        t => match Protocol::from_token(t) {
            Some(p) => ProtoMatch::Only(p),
            None => return Err(at(1, ParseRuleErrorKind::UnknownProtocol(t.to_string()))),
        },
    };
    let src = parse_cidr(tokens[2].1).map_err(|k| at(2, k))?;
    let sport = parse_ports(tokens[3].1).map_err(|k| at(3, k))?;
    let dst = parse_cidr(tokens[4].1).map_err(|k| at(4, k))?;
    let dport = parse_ports(tokens[5].1).map_err(|k| at(5, k))?;

    Ok(Rule {
        action,
        proto,
        src,
        sport,
        dst,
        dport,
    })
}

fn parse_cidr(token: &str) -> Result<CidrMatcher, ParseRuleErrorKind> {
    if token == "*" {
        return Ok(CidrMatcher::ANY);
    }
    let syntax = || ParseRuleErrorKind::Syntax(alloc::format!("malformed address {token:?}"));
    let (addr, len) = token.split_once('/').ok_or_else(syntax)?;
    let addr: Ipv4Addr = addr.parse().map_err(|_| syntax())?;
    if len.is_empty() || !len.bytes().all(|b| b.is_ascii_digit()) {
        return Err(syntax());
    }
    let len: u32 = len
        .parse()
        .map_err(|_| ParseRuleErrorKind::InvalidPrefix(u32::MAX))?;
    let len = u8::try_from(len)
        .ok()
        .filter(|&l| l <= 32)
        .ok_or(ParseRuleErrorKind::InvalidPrefix(len))?;
    CidrMatcher::new(addr, len).map_err(|e| ParseRuleErrorKind::InvalidPrefix(e.0.into()))
}

fn parse_port(token: &str, whole: &str) -> Result<u16, ParseRuleErrorKind> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRuleErrorKind::Syntax(alloc::format!(
            "malformed port {whole:?}"
        )));
    }
    let value: u64 = token.parse().unwrap_or(u64::MAX);
    u16::try_from(value).map_err(|_| ParseRuleErrorKind::PortOutOfRange(value))
}

fn parse_ports(token: &str) -> Result<PortRange, ParseRuleErrorKind> {
    if token == "*" {
        return Ok(PortRange::ANY);
    }
    match token.split_once('-') {
        Some((lo, hi)) => {
            let lo = parse_port(lo, token)?;
            let hi = parse_port(hi, token)?;
            PortRange::new(lo, hi).map_err(|e| ParseRuleErrorKind::InvertedRange {
                lo: e.lo,
                hi: e.hi,
            })
        }
        None => parse_port(token, token).map(PortRange::single),
    }
}

/// Renders a rule in the line grammar. Wildcards print as `*`, single ports
/// as `n-n`.
pub fn format_rule(rule: &Rule) -> String {
    rule.to_string()
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.action, self.proto, self.src, self.sport, self.dst, self.dport
        )
    }
}

impl core::str::FromStr for Rule {
    type Err = ParseRuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rule(s)
    }
}
