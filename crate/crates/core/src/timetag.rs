//! Picosecond time-tag streams and their on-disk formats.
//!
//! Binary files start with the ASCII line `AFCTT v1 seed=<n>\n` followed by
//! 9-byte records: channel (`u8`) and timestamp (`u64`, little endian, ps).
//! The CSV fallback starts with `# afc-timetag v1 seed=<n>` and the header
//! `channel,timestamp_ps`.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &str = "AFCTT v1";
pub const CSV_MAGIC: &str = "# afc-timetag v1";

pub const PS_PER_NS: f64 = 1e3;
pub const PS_PER_US: f64 = 1e6;
pub const PS_PER_S: f64 = 1e12;

/// Physical origin of a detection, carried alongside simulated streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    /// Photon of a pair in the heralded spectral mode.
    Pair,
    /// Photon of a pair in any other spectral mode.
    OtherMode,
    /// Uncorrelated broadband emission of the source.
    Broadband,
    Dark,
    /// Read from a file; origin not recorded.
    Unknown,
}

impl Origin {
    pub fn is_source(self) -> bool {
        matches!(self, Origin::Pair | Origin::OtherMode | Origin::Broadband)
    }
}

/// Detection times of one channel, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    channel: u8,
    timestamps: Vec<u64>,
    origins: Vec<Origin>,
}

impl TimeTagStream {
    pub fn new(channel: u8, timestamps: Vec<u64>) -> Result<Self> {
        let origins = vec![Origin::Unknown; timestamps.len()];
        Self::with_origins(channel, timestamps, origins)
    }

    pub fn with_origins(channel: u8, timestamps: Vec<u64>, origins: Vec<Origin>) -> Result<Self> {
        if timestamps.len() != origins.len() {
            return Err(Error::Domain(
                "timestamp and origin lists differ in length".into(),
            ));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Unsorted(format!(
                "channel {channel}: timestamp {} at index {} does not exceed {}",
                timestamps[i + 1],
                i + 1,
                timestamps[i]
            )));
        }
        Ok(Self {
            channel,
            timestamps,
            origins,
        })
    }

    /// Sorts the events and drops repeated timestamps, keeping the first.
    pub fn from_unsorted(channel: u8, mut events: Vec<(u64, Origin)>) -> Self {
        events.sort_by_key(|e| e.0);
        events.dedup_by_key(|e| e.0);
        let (timestamps, origins) = events.into_iter().unzip();
        Self {
            channel,
            timestamps,
            origins,
        }
    }

    pub fn empty(channel: u8) -> Self {
        Self {
            channel,
            timestamps: Vec::new(),
            origins: Vec::new(),
        }
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Origin)> + '_ {
        self.timestamps
            .iter()
            .copied()
            .zip(self.origins.iter().copied())
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.origins.iter().filter(|o| **o == origin).count()
    }

    /// Events with `lo <= t < hi`.
    pub fn count_between(&self, lo_ps: u64, hi_ps: u64) -> usize {
        let a = self.timestamps.partition_point(|&t| t < lo_ps);
        let b = self.timestamps.partition_point(|&t| t < hi_ps);
        b.saturating_sub(a)
    }

    /// Keeps the events for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(u64, Origin) -> bool) -> Self {
        let (timestamps, origins) = self.iter().filter(|(t, o)| keep(*t, *o)).unzip();
        Self {
            channel: self.channel,
            timestamps,
            origins,
        }
    }

    pub fn relabeled(&self, channel: u8) -> Self {
        Self {
            channel,
            ..self.clone()
        }
    }
}

/// Converts a time in ns to integer picoseconds.
pub fn ns_to_ps(t_ns: f64) -> Result<u64> {
    let ps = (t_ns * PS_PER_NS).round();
    if !(0.0..=u64::MAX as f64).contains(&ps) || !ps.is_finite() {
        return Err(Error::Overflow(format!(
            "{t_ns} ns is outside the 64-bit picosecond range"
        )));
    }
    Ok(ps as u64)
}

/// Contents of a time-tag file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagFile {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub streams: Vec<TimeTagStream>,
}

impl TimeTagFile {
    pub fn stream(&self, channel: u8) -> Option<&TimeTagStream> {
        self.streams.iter().find(|s| s.channel == channel)
    }

    pub fn total_events(&self) -> usize {
        self.streams.iter().map(|s| s.len()).sum()
    }
}

fn merged(streams: &[&TimeTagStream]) -> Vec<(u64, u8)> {
    let mut all: Vec<(u64, u8)> = streams
        .iter()
        .flat_map(|s| s.timestamps.iter().map(move |&t| (t, s.channel)))
        .collect();
    all.sort_unstable();
    all
}

/// Optional fields of the header line, written as `key=value` tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileHeader {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

impl FileHeader {
    pub fn seeded(seed: Option<u64>) -> Self {
        Self {
            seed,
            config_hash: None,
        }
    }

    fn line(&self, magic: &str) -> String {
        let mut s = magic.to_string();
        if let Some(seed) = self.seed {
            s.push_str(&format!(" seed={seed}"));
        }
        if let Some(h) = &self.config_hash {
            s.push_str(&format!(" config={h}"));
        }
        s
    }

    fn parse(line: &str, magic: &str) -> Result<Self> {
        let rest = line
            .strip_prefix(magic)
            .ok_or_else(|| Error::Format(format!("missing `{magic}` header")))?;
        let mut h = Self::default();
        for token in rest.split_whitespace() {
            match token.split_once('=') {
                Some(("seed", v)) => {
                    h.seed = Some(
                        v.parse()
                            .map_err(|e| Error::Format(format!("bad seed `{v}`: {e}")))?,
                    )
                }
                Some(("config", v))
                    if !v.is_empty() && v.bytes().all(|b| b.is_ascii_hexdigit()) =>
                {
                    h.config_hash = Some(v.to_string())
                }
                _ => return Err(Error::Format(format!("unexpected header field `{token}`"))),
            }
        }
        Ok(h)
    }
}

fn group(records: Vec<(u8, u64)>) -> Result<Vec<TimeTagStream>> {
    if records.is_empty() {
        return Err(Error::EmptyStream("file contains no time tags".into()));
    }
    let mut by_channel: BTreeMap<u8, Vec<u64>> = BTreeMap::new();
    for (c, t) in records {
        by_channel.entry(c).or_default().push(t);
    }
    by_channel
        .into_iter()
        .map(|(c, ts)| TimeTagStream::new(c, ts))
        .collect()
}

pub fn write_binary<W: Write>(out: W, streams: &[&TimeTagStream], seed: Option<u64>) -> Result<()> {
    write_binary_with(out, streams, &FileHeader::seeded(seed))
}

pub fn write_binary_with<W: Write>(
    mut out: W,
    streams: &[&TimeTagStream],
    header: &FileHeader,
) -> Result<()> {
    writeln!(out, "{}", header.line(BINARY_MAGIC))?;
    let mut buf = Vec::with_capacity(9 * 4096);
    for (t, c) in merged(streams) {
        buf.push(c);
        buf.extend_from_slice(&t.to_le_bytes());
        if buf.len() >= 9 * 4096 {
            out.write_all(&buf)?;
            buf.clear();
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<TimeTagFile> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if data.is_empty() {
        return Err(Error::EmptyStream("file is empty".into()));
    }
    let nl = data
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header = std::str::from_utf8(&data[..nl])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    let header = FileHeader::parse(header, BINARY_MAGIC)?;
    let body = &data[nl + 1..];
    if body.len() % 9 != 0 {
        return Err(Error::Format(format!(
            "record section of {} bytes is not a multiple of 9",
            body.len()
        )));
    }
    let records = body
        .chunks_exact(9)
        .map(|r| {
            (
                r[0],
                u64::from_le_bytes(r[1..9].try_into().expect("8 bytes")),
            )
        })
        .collect();
    Ok(TimeTagFile {
        seed: header.seed,
        config_hash: header.config_hash,
        streams: group(records)?,
    })
}

pub fn write_csv<W: Write>(out: W, streams: &[&TimeTagStream], seed: Option<u64>) -> Result<()> {
    write_csv_with(out, streams, &FileHeader::seeded(seed))
}

pub fn write_csv_with<W: Write>(
    mut out: W,
    streams: &[&TimeTagStream],
    header: &FileHeader,
) -> Result<()> {
    writeln!(out, "{}", header.line(CSV_MAGIC))?;
    writeln!(out, "channel,timestamp_ps")?;
    for (t, c) in merged(streams) {
        writeln!(out, "{c},{t}")?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<TimeTagFile> {
    let mut lines = input.lines();
    let first = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::EmptyStream("file is empty".into())),
    };
    let header = FileHeader::parse(first.trim(), CSV_MAGIC)?;
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("channel") {
            continue;
        }
        let (c, t) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("line {}: expected two columns", n + 2)))?;
        let c = c
            .trim()
            .parse::<u8>()
            .map_err(|e| Error::Format(format!("line {}: channel: {e}", n + 2)))?;
        let t = t
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::Format(format!("line {}: timestamp: {e}", n + 2)))?;
        records.push((c, t));
    }
    Ok(TimeTagFile {
        seed: header.seed,
        config_hash: header.config_hash,
        streams: group(records)?,
    })
}

/// Reads either format, detected from the first bytes.
pub fn read_any<R: Read>(mut input: R) -> Result<TimeTagFile> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if data.is_empty() {
        return Err(Error::EmptyStream("file is empty".into()));
    }
    if data.starts_with(BINARY_MAGIC.as_bytes()) {
        read_binary(data.as_slice())
    } else if data.starts_with(CSV_MAGIC.as_bytes()) {
        read_csv(data.as_slice())
    } else {
        Err(Error::Format("unrecognised time-tag file header".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_duplicates() {
        assert!(matches!(
            TimeTagStream::new(0, vec![3, 2]),
            Err(Error::Unsorted(_))
        ));
        assert!(matches!(
            TimeTagStream::new(0, vec![2, 2]),
            Err(Error::Unsorted(_))
        ));
        let s = TimeTagStream::from_unsorted(
            1,
            vec![(5, Origin::Dark), (1, Origin::Pair), (5, Origin::Pair)],
        );
        assert_eq!(s.timestamps(), &[1, 5]);
    }

    #[test]
    fn binary_round_trip() {
        let a = TimeTagStream::new(0, vec![10, 20, u64::MAX]).unwrap();
        let b = TimeTagStream::new(3, vec![15]).unwrap();
        let mut buf = Vec::new();
        write_binary(&mut buf, &[&a, &b], Some(42)).unwrap();
        assert_eq!(buf.len(), "AFCTT v1 seed=42\n".len() + 4 * 9);
        let f = read_any(buf.as_slice()).unwrap();
        assert_eq!(f.seed, Some(42));
        assert_eq!(f.stream(0).unwrap().timestamps(), a.timestamps());
        assert_eq!(f.stream(3).unwrap().timestamps(), b.timestamps());
    }

    #[test]
    fn csv_round_trip() {
        let a = TimeTagStream::new(1, vec![7, 9]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[&a], None).unwrap();
        let f = read_any(buf.as_slice()).unwrap();
        assert_eq!(f.seed, None);
        assert_eq!(f.stream(1).unwrap().timestamps(), &[7, 9]);
    }

    #[test]
    fn empty_and_malformed_files() {
        assert!(matches!(read_any(&b""[..]), Err(Error::EmptyStream(_))));
        assert!(matches!(
            read_any(&b"AFCTT v1 seed=1\n"[..]),
            Err(Error::EmptyStream(_))
        ));
        assert!(matches!(
            read_any(&b"AFCTT v1\n\x00\x01"[..]),
            Err(Error::Format(_))
        ));
        assert!(matches!(read_any(&b"hello"[..]), Err(Error::Format(_))));
        let mut unsorted = b"AFCTT v1\n".to_vec();
        for t in [5u64, 3] {
            unsorted.push(0);
            unsorted.extend_from_slice(&t.to_le_bytes());
        }
        assert!(matches!(
            read_any(unsorted.as_slice()),
            Err(Error::Unsorted(_))
        ));
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(ns_to_ps(2e16), Err(Error::Overflow(_))));
        assert!(matches!(ns_to_ps(-1.0), Err(Error::Overflow(_))));
        assert_eq!(ns_to_ps(1.5).unwrap(), 1500);
    }
}
