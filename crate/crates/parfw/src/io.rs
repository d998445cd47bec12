//! Ruleset text files and traffic CSV files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use parfw_core::text::strip_comment;
use parfw_core::{parse_rule, Packet, Protocol, Ruleset};

use crate::error::Error;

/// Header row of traffic files, in column order.
pub const TRAFFIC_HEADER: [&str; 6] = ["id", "proto", "src_ip", "src_port", "dst_ip", "dst_port"];

/// Reads one rule per line. Blank lines and `#` comments are skipped; the
/// first malformed line aborts the load.
pub fn load_ruleset(path: impl AsRef<Path>) -> Result<Ruleset, Error> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ruleset(&text).map_err(|(line, source)| Error::Rule {
        path: path.to_path_buf(),
        line,
        source,
    })
}

/// Parses ruleset text; errors carry the 1-based line number.
pub fn parse_ruleset(text: &str) -> Result<Ruleset, (usize, parfw_core::ParseRuleError)> {
    let mut ruleset = Ruleset::new();
    for (n, line) in text.lines().enumerate() {
        if strip_comment(line).trim().is_empty() {
            continue;
        }
        ruleset.push(parse_rule(line).map_err(|e| (n + 1, e))?);
    }
    Ok(ruleset)
}

pub fn write_ruleset<W: Write>(ruleset: &Ruleset, mut out: W) -> std::io::Result<()> {
    for rule in ruleset {
        writeln!(out, "{rule}")?;
    }
    out.flush()
}

pub fn save_ruleset(ruleset: &Ruleset, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_ruleset(ruleset, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn write_traffic<W: Write>(packets: &[Packet], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAFFIC_HEADER)?;
    for p in packets {
        w.write_record([
            p.id.to_string(),
            p.proto.as_str().to_string(),
            p.src_ip.to_string(),
            p.src_port.to_string(),
            p.dst_ip.to_string(),
            p.dst_port.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_traffic(packets: &[Packet], path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_traffic(packets, BufWriter::new(file)).map_err(|e| Error::csv(path, e))
}

pub fn load_traffic(path: impl AsRef<Path>) -> Result<Vec<Packet>, Error> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let bad = |line: u64, message: String| Error::Traffic {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut records = reader.records();
    match records.next() {
        None => return Err(bad(1, "missing header row".into())),
        Some(header) => {
            let header = header.map_err(|e| Error::csv(path, e))?;
            if header.iter().ne(TRAFFIC_HEADER) {
                return Err(bad(1, format!("expected header {}", TRAFFIC_HEADER.join(","))));
            }
        }
    }

    let mut packets = Vec::new();
    for record in records {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        packets.push(parse_packet(&record).map_err(|m| bad(line, m))?);
    }
    Ok(packets)
}

fn parse_packet(record: &csv::StringRecord) -> Result<Packet, String> {
    if record.len() != TRAFFIC_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            TRAFFIC_HEADER.len(),
            record.len()
        ));
    }
    let id = record[0]
        .parse::<u64>()
        .map_err(|_| format!("invalid id {:?}", &record[0]))?;
    let proto = Protocol::from_token(&record[1])
        .ok_or_else(|| format!("unknown protocol {:?} (expected tcp, udp or icmp)", &record[1]))?;
    let ip = |name: &str, s: &str| {
        s.parse::<Ipv4Addr>()
            .map_err(|_| format!("invalid {name} {s:?}"))
    };
    let port = |name: &str, s: &str| {
        let value = s
            .parse::<u64>()
            .map_err(|_| format!("invalid {name} {s:?}"))?;
        u16::try_from(value).map_err(|_| format!("{name} {value} out of range (must be 0..=65535)"))
    };
    Ok(Packet {
        id,
        proto,
        src_ip: ip("src_ip", &record[2])?,
        src_port: port("src_port", &record[3])?,
        dst_ip: ip("dst_ip", &record[4])?,
        dst_port: port("dst_port", &record[5])?,
    })
}
