//! Time-tagged photon streams and their on-disk formats.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PHTS"
//! 4       2     version (1)
//! 6       2     reserved
//! 8       8     record count
//! 16      16*n  records: channel u8, flags u8, reserved u16, pad u32, timestamp_ps u64
//! ```
//!
//! Records are sorted by timestamp. The text alternative is CSV with the
//! header `channel,timestamp_ps` and one event per line.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PHTS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 16;
const CSV_HEADER: &str = "channel,timestamp_ps";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhotonEvent {
    pub channel: u8,
    pub timestamp_ps: u64,
}

/// Detections of a single channel, sorted by time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhotonStream {
    channel: u8,
    timestamps: Vec<u64>,
}

impl PhotonStream {
    /// Wraps already sorted timestamps; fails if they are not sorted.
    pub fn new(channel: u8, timestamps: Vec<u64>) -> Result<Self> {
        if let Some(i) = timestamps.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::MalformedStream(format!(
                "timestamps not sorted at index {}: {} after {}",
                i + 1,
                timestamps[i + 1],
                timestamps[i]
            )));
        }
        Ok(Self { channel, timestamps })
    }

    pub fn from_unsorted(channel: u8, mut timestamps: Vec<u64>) -> Self {
        timestamps.sort_unstable();
        Self { channel, timestamps }
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn into_timestamps(self) -> Vec<u64> {
        self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// First and last timestamp.
    pub fn bounds(&self) -> Option<(u64, u64)> {
        Some((*self.timestamps.first()?, *self.timestamps.last()?))
    }

    /// Time between first and last detection, in seconds.
    pub fn span_s(&self) -> f64 {
        self.bounds().map_or(0.0, |(a, b)| (b - a) as f64 * 1e-12)
    }

    pub fn events(&self) -> impl Iterator<Item = PhotonEvent> + '_ {
        self.timestamps.iter().map(move |&t| PhotonEvent {
            channel: self.channel,
            timestamp_ps: t,
        })
    }

    /// Merges several streams into one time-ordered stream on `channel`.
    pub fn merged(channel: u8, streams: &[&PhotonStream]) -> Self {
        let mut all: Vec<u64> = streams.iter().flat_map(|s| s.timestamps.iter().copied()).collect();
        all.sort_unstable();
        Self { channel, timestamps: all }
    }
}

/// Span covered jointly by several streams, in seconds.
pub fn joint_span_s(streams: &[&PhotonStream]) -> f64 {
    let bounds: Vec<(u64, u64)> = streams.iter().filter_map(|s| s.bounds()).collect();
    match (bounds.iter().map(|b| b.0).min(), bounds.iter().map(|b| b.1).max()) {
        (Some(a), Some(b)) => (b - a) as f64 * 1e-12,
        _ => 0.0,
    }
}

/// Splits time-ordered events into per-channel streams (channels 0 and 1).
pub fn split_channels(events: &[PhotonEvent]) -> [PhotonStream; 2] {
    let mut out = [
        PhotonStream { channel: 0, timestamps: Vec::new() },
        PhotonStream { channel: 1, timestamps: Vec::new() },
    ];
    for e in events {
        out[e.channel as usize].timestamps.push(e.timestamp_ps);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Binary,
    Csv,
}

fn check_events(events: &[PhotonEvent]) -> Result<()> {
    for (i, e) in events.iter().enumerate() {
        if e.channel > 1 {
            return Err(Error::MalformedStream(format!("record {i}: channel {} is not 0 or 1", e.channel)));
        }
        if i > 0 && e.timestamp_ps < events[i - 1].timestamp_ps {
            return Err(Error::MalformedStream(format!(
                "record {i}: timestamps not sorted ({} after {})",
                e.timestamp_ps,
                events[i - 1].timestamp_ps
            )));
        }
    }
    Ok(())
}

pub fn encode_binary(events: &[PhotonEvent]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * events.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(events.len() as u64).to_le_bytes());
    for e in events {
        out.push(e.channel);
        out.push(0);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&e.timestamp_ps.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Vec<PhotonEvent>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedStream(format!("file too short for header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::MalformedStream(format!("bad magic {:?}, expected \"PHTS\"", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::MalformedStream(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if body.len() % RECORD_LEN != 0 || (body.len() / RECORD_LEN) as u64 != count {
        return Err(Error::MalformedStream(format!(
            "header declares {count} records but body holds {} bytes",
            body.len()
        )));
    }
    let events: Vec<PhotonEvent> = body
        .chunks_exact(RECORD_LEN)
        .map(|r| PhotonEvent {
            channel: r[0],
            timestamp_ps: u64::from_le_bytes(r[8..16].try_into().unwrap()),
        })
        .collect();
    check_events(&events)?;
    Ok(events)
}

pub fn write_events(path: &Path, events: &[PhotonEvent], format: StreamFormat) -> Result<()> {
    check_events(events)?;
    match format {
        StreamFormat::Binary => fs::write(path, encode_binary(events)).map_err(|e| Error::io(path, e)),
        StreamFormat::Csv => {
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            let res: std::io::Result<()> = (|| {
                writeln!(w, "{CSV_HEADER}")?;
                for e in events {
                    writeln!(w, "{},{}", e.channel, e.timestamp_ps)?;
                }
                w.flush()
            })();
            res.map_err(|e| Error::io(path, e))
        }
    }
}

pub fn write_stream(path: &Path, stream: &PhotonStream, format: StreamFormat) -> Result<()> {
    let events: Vec<PhotonEvent> = stream.events().collect();
    write_events(path, &events, format)
}

fn parse_csv(reader: impl BufRead) -> Result<Vec<PhotonEvent>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::MalformedStream(e.to_string()))?
        .ok_or_else(|| Error::MalformedStream("empty file".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::MalformedStream(format!("bad CSV header {header:?}, expected {CSV_HEADER:?}")));
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::MalformedStream(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::MalformedStream(format!("line {}: cannot parse {line:?}", i + 2));
        let (ch, ts) = line.split_once(',').ok_or_else(bad)?;
        events.push(PhotonEvent {
            channel: ch.trim().parse().map_err(|_| bad())?,
            timestamp_ps: ts.trim().parse().map_err(|_| bad())?,
        });
    }
    check_events(&events)?;
    Ok(events)
}

/// Reads a stream file, detecting the binary format by its magic bytes and
/// falling back to CSV otherwise.
pub fn read_events(path: &Path) -> Result<Vec<PhotonEvent>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else if bytes.starts_with(b"channel") {
        parse_csv(BufReader::new(bytes.as_slice()))
    } else if bytes.is_empty() {
        Err(Error::MalformedStream(format!("{}: empty file", path.display())))
    } else {
        Err(Error::MalformedStream(format!(
            "{}: neither a PHTS binary file nor a channel,timestamp_ps CSV",
            path.display()
        )))
    }
}

/// Reads a file and returns the stream of a single channel. Files written by
/// the simulator hold one channel each; `channel = None` accepts whichever
/// single channel is present.
pub fn read_stream(path: &Path, channel: Option<u8>) -> Result<PhotonStream> {
    let events = read_events(path)?;
    let ch = match channel {
        Some(c) => c,
        None => events.first().map_or(0, |e| e.channel),
    };
    let timestamps = events.iter().filter(|e| e.channel == ch).map(|e| e.timestamp_ps).collect();
    PhotonStream::new(ch, timestamps)
}
