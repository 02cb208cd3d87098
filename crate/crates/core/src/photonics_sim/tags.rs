//! Time tags and the `TTAG` binary container.
//!
//! Layout (little-endian): magic `b"TTAG"`, `u16` version = 1, `u64` record
//! count, then `count` records of 10 bytes each: `u64` time in picoseconds,
//! `u8` station, `u8` channel.

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{AliceDetector, Outcome};

pub const TTAG_MAGIC: &[u8; 4] = b"TTAG";
pub const TTAG_VERSION: u16 = 1;
pub const TTAG_HEADER_LEN: usize = 14;
pub const TTAG_RECORD_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Station {
    Alice,
    Bob,
}

impl Station {
    pub fn code(self) -> u8 {
        match self {
            Station::Alice => 0,
            Station::Bob => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Station::Alice),
            1 => Some(Station::Bob),
            _ => None,
        }
    }
}

/// Detector (or classical-pulse) channel of a time tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    T,
    A,
    B,
    C,
    D,
    E,
    F,
    /// Received feed-forward pulse at Bob.
    Ff,
}

impl Channel {
    pub fn code(self) -> u8 {
        match self {
            Channel::T => 0,
            Channel::A => 1,
            Channel::B => 2,
            Channel::C => 3,
            Channel::D => 4,
            Channel::E => 5,
            Channel::F => 6,
            Channel::Ff => 7,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Channel::T,
            1 => Channel::A,
            2 => Channel::B,
            3 => Channel::C,
            4 => Channel::D,
            5 => Channel::E,
            6 => Channel::F,
            7 => Channel::Ff,
            _ => return None,
        })
    }

    pub fn station(self) -> Station {
        match self {
            Channel::T | Channel::A | Channel::B | Channel::C | Channel::D => Station::Alice,
            Channel::E | Channel::F | Channel::Ff => Station::Bob,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::T => "t",
            Channel::A => "a",
            Channel::B => "b",
            Channel::C => "c",
            Channel::D => "d",
            Channel::E => "e",
            Channel::F => "f",
            Channel::Ff => "ff",
        }
    }

    /// Bob's polarization detectors: `e` records the first basis outcome.
    pub fn bob_detector(outcome: Outcome) -> Channel {
        match outcome {
            Outcome::First => Channel::E,
            Outcome::Second => Channel::F,
        }
    }

    pub fn alice_detector(self) -> Option<AliceDetector> {
        match self {
            Channel::T => Some(AliceDetector::T),
            Channel::A => Some(AliceDetector::A),
            Channel::B => Some(AliceDetector::B),
            Channel::C => Some(AliceDetector::C),
            Channel::D => Some(AliceDetector::D),
            _ => None,
        }
    }
}

impl From<AliceDetector> for Channel {
    fn from(d: AliceDetector) -> Self {
        match d {
            AliceDetector::T => Channel::T,
            AliceDetector::A => Channel::A,
            AliceDetector::B => Channel::B,
            AliceDetector::C => Channel::C,
            AliceDetector::D => Channel::D,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "t" => Channel::T,
            "a" => Channel::A,
            "b" => Channel::B,
            "c" => Channel::C,
            "d" => Channel::D,
            "e" => Channel::E,
            "f" => Channel::F,
            "ff" => Channel::Ff,
            other => return Err(format!("unknown channel {other:?}")),
        })
    }
}

/// One detection event in a station's local clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeTag {
    pub station: Station,
    pub channel: Channel,
    pub time_ps: u64,
}

impl TimeTag {
    pub fn new(channel: Channel, time_ps: u64) -> Self {
        TimeTag {
            station: channel.station(),
            channel,
            time_ps,
        }
    }

    /// Ordering key used for every stored stream.
    pub fn sort_key(&self) -> (u64, u8) {
        (self.time_ps, self.channel.code())
    }
}

#[derive(Debug, Error)]
pub enum TtagError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("header declares {declared} records, body holds {found}")]
    CountMismatch { declared: u64, found: u64 },
    #[error("record {index}: invalid station {station} / channel {channel}")]
    InvalidRecord { index: u64, station: u8, channel: u8 },
}

pub fn write_ttag<W: Write>(mut w: W, tags: &[TimeTag]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(TTAG_HEADER_LEN + tags.len() * TTAG_RECORD_LEN);
    buf.extend_from_slice(TTAG_MAGIC);
    buf.extend_from_slice(&TTAG_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tags.len() as u64).to_le_bytes());
    for t in tags {
        buf.extend_from_slice(&t.time_ps.to_le_bytes());
        buf.push(t.station.code());
        buf.push(t.channel.code());
    }
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_ttag<R: Read>(mut r: R) -> Result<Vec<TimeTag>, TtagError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_ttag(&bytes)
}

pub fn decode_ttag(bytes: &[u8]) -> Result<Vec<TimeTag>, TtagError> {
    if bytes.len() < TTAG_HEADER_LEN {
        return Err(TtagError::Io(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            "truncated TTAG header",
        )));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if &magic != TTAG_MAGIC {
        return Err(TtagError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != TTAG_VERSION {
        return Err(TtagError::UnsupportedVersion(version));
    }
    let declared = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let body = &bytes[TTAG_HEADER_LEN..];
    if body.len() % TTAG_RECORD_LEN != 0 || (body.len() / TTAG_RECORD_LEN) as u64 != declared {
        return Err(TtagError::CountMismatch {
            declared,
            found: (body.len() / TTAG_RECORD_LEN) as u64,
        });
    }
    body.chunks_exact(TTAG_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let time_ps = u64::from_le_bytes(rec[0..8].try_into().unwrap());
            let (s, c) = (rec[8], rec[9]);
            match (Station::from_code(s), Channel::from_code(c)) {
                (Some(station), Some(channel)) if channel.station() == station => Ok(TimeTag {
                    station,
                    channel,
                    time_ps,
                }),
                _ => Err(TtagError::InvalidRecord {
                    index: i as u64,
                    station: s,
                    channel: c,
                }),
            }
        })
        .collect()
}
