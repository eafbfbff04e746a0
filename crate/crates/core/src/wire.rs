//! Byte-exact codec for QCM multipart request/reply frames.
//!
//! Frame layout, all integers big-endian:
//!
//! ```text
//! header   version(1) type(1) length(2) xid(4)        8 bytes
//! preamble mp_type(2) pad(4) flags(2)                 8 bytes
//! body     N x stats record                           56 bytes each
//! ```
//!
//! The preamble keeps the declared order `type, pad[4], flags` rather than
//! the standard OpenFlow 1.4 `type, flags, pad[4]`.
//!
//! A stats record is
//! `qchannel(2) qchannel_spec(16) qcom(2) qcom_spec(16) qec(2) qec_spec(16) pad(2)`.

use std::fmt;
use std::io::{Cursor, Read};

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::metadata::{
    validate_record, ChannelSpec, ComProtocolId, ComSpec, EcSpec, QcmRecord, Violation, SPEC_LEN,
};

/// OpenFlow 1.4.
pub const OFP_VERSION: u8 = 5;
pub const OFPT_MULTIPART_REQUEST: u8 = 18;
pub const OFPT_MULTIPART_REPLY: u8 = 19;
pub const OFPMP_QCM: u16 = 17;
pub const OFPMPF_REQ_MORE: u16 = 1 << 0;

pub const HEADER_LEN: usize = 8;
pub const PREAMBLE_LEN: usize = 16;
pub const STATS_LEN: usize = 56;
/// Largest value the 16-bit header length can hold.
pub const MAX_MESSAGE_LEN: usize = u16::MAX as usize;
/// 16 + 1169 * 56 = 65480; one more record would overflow the length field.
pub const MAX_RECORDS_PER_SEGMENT: usize = (MAX_MESSAGE_LEN - PREAMBLE_LEN) / STATS_LEN;

/// Reserved transaction id for unsolicited pushes.
pub const ASYNC_XID: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Reject anything the encoder could not have produced.
    #[default]
    Strict,
    /// Ignore nonzero pad and reserved bytes.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("short input at byte offset {offset}: need {needed} bytes, have {available}")]
    ShortInput {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("header length {length} is below the {HEADER_LEN}-byte minimum")]
    InvalidLength { length: u16 },
    #[error("header length {declared} does not match frame size {actual} (byte offset {offset})")]
    LengthMismatch {
        declared: usize,
        actual: usize,
        offset: usize,
    },
    #[error("message type {0} is not a multipart request or reply")]
    UnknownMessageType(u8),
    #[error("unknown multipart type {0}")]
    UnknownMultipartType(u16),
    #[error("nonzero padding at byte offset {offset}")]
    NonzeroPad { offset: usize },
    #[error("body of {len} bytes is not a multiple of {STATS_LEN}")]
    RaggedBody { len: usize },
    #[error("record at byte offset {offset} is invalid: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidRecord {
        offset: usize,
        violations: Vec<Violation>,
    },
    #[error("{records} records exceed the single-segment capacity of {MAX_RECORDS_PER_SEGMENT}")]
    SegmentOverflow { records: usize },
    #[error("no segments to reassemble")]
    NoSegments,
    #[error("segment {index} has xid {found}, expected {expected}")]
    MixedXid {
        index: usize,
        expected: u32,
        found: u32,
    },
    #[error("segment {index} direction differs from the first segment")]
    MixedDirection { index: usize },
    #[error("final segment still has REQ_MORE set; sequence incomplete")]
    Incomplete,
    #[error("segment {index} is not final but lacks REQ_MORE")]
    MissingMore { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfpHeader {
    pub version: u8,
    pub msg_type: u8,
    pub length: u16,
    pub xid: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Request,
    Reply,
}

impl Direction {
    pub fn msg_type(self) -> u8 {
        match self {
            Direction::Request => OFPT_MULTIPART_REQUEST,
            Direction::Reply => OFPT_MULTIPART_REPLY,
        }
    }

    pub fn from_msg_type(t: u8) -> Option<Direction> {
        match t {
            OFPT_MULTIPART_REQUEST => Some(Direction::Request),
            OFPT_MULTIPART_REPLY => Some(Direction::Reply),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Request => "REQUEST",
            Direction::Reply => "REPLY",
        })
    }
}

/// One QCM multipart segment. The header is derived on encode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QcmMultipart {
    pub direction: Direction,
    pub version: u8,
    pub xid: u32,
    pub flags: u16,
    pub records: Vec<QcmRecord>,
}

impl QcmMultipart {
    pub fn new(direction: Direction, xid: u32, records: Vec<QcmRecord>) -> Self {
        QcmMultipart {
            direction,
            version: OFP_VERSION,
            xid,
            flags: 0,
            records,
        }
    }

    pub fn request(xid: u32) -> Self {
        Self::new(Direction::Request, xid, Vec::new())
    }

    pub fn reply(xid: u32, records: Vec<QcmRecord>) -> Self {
        Self::new(Direction::Reply, xid, records)
    }

    pub fn more(&self) -> bool {
        self.flags & OFPMPF_REQ_MORE != 0
    }

    pub fn encoded_len(&self) -> usize {
        PREAMBLE_LEN + STATS_LEN * self.records.len()
    }

    /// Header as it will appear on the wire; `None` if the frame would not
    /// fit in one segment.
    pub fn header(&self) -> Option<OfpHeader> {
        let length = u16::try_from(self.encoded_len()).ok()?;
        Some(OfpHeader {
            version: self.version,
            msg_type: self.direction.msg_type(),
            length,
            xid: self.xid,
        })
    }

    /// Multi-line description used by the CLI and golden vectors.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "DIRECTION: {}\nVERSION: {}\nXID: {}\nFLAGS: 0x{:04x}\nRECORDS: {}\n",
            self.direction,
            self.version,
            self.xid,
            self.flags,
            self.records.len()
        );
        for (i, r) in self.records.iter().enumerate() {
            s.push_str(&format!("RECORD {i}\n{r}"));
        }
        s
    }
}

pub fn encode_header(h: &OfpHeader) -> Result<[u8; HEADER_LEN], CodecError> {
    if (h.length as usize) < HEADER_LEN {
        return Err(CodecError::InvalidLength { length: h.length });
    }
    let mut out = [0u8; HEADER_LEN];
    out[0] = h.version;
    out[1] = h.msg_type;
    out[2..4].copy_from_slice(&h.length.to_be_bytes());
    out[4..8].copy_from_slice(&h.xid.to_be_bytes());
    Ok(out)
}

pub fn decode_header(b: &[u8]) -> Result<OfpHeader, CodecError> {
    if b.len() < HEADER_LEN {
        return Err(CodecError::ShortInput {
            offset: 0,
            needed: HEADER_LEN,
            available: b.len(),
        });
    }
    let mut c = Cursor::new(b);
    let h = OfpHeader {
        version: c.read_u8().unwrap(),
        msg_type: c.read_u8().unwrap(),
        length: c.read_u16::<BigEndian>().unwrap(),
        xid: c.read_u32::<BigEndian>().unwrap(),
    };
    if (h.length as usize) < HEADER_LEN {
        return Err(CodecError::InvalidLength { length: h.length });
    }
    Ok(h)
}

pub fn encode_stats(r: &QcmRecord) -> Result<[u8; STATS_LEN], CodecError> {
    let violations = validate_record(r);
    if !violations.is_empty() {
        return Err(CodecError::InvalidRecord {
            offset: 0,
            violations,
        });
    }
    Ok(encode_stats_unchecked(r))
}

pub(crate) fn encode_stats_unchecked(r: &QcmRecord) -> [u8; STATS_LEN] {
    let mut out = Vec::with_capacity(STATS_LEN);
    write_stats(&mut out, r);
    out.try_into().expect("stats layout is 56 bytes")
}

fn write_stats(out: &mut Vec<u8>, r: &QcmRecord) {
    let s = &r.qchannel_spec;
    out.write_u16::<BigEndian>(r.qchannel).unwrap();
    out.write_u32::<BigEndian>(s.wavelength_pm).unwrap();
    out.write_u32::<BigEndian>(s.mean_photon_milli).unwrap();
    out.write_u32::<BigEndian>(s.symbol_rate_hz).unwrap();
    out.write_u32::<BigEndian>(s.reserved).unwrap();
    out.write_u16::<BigEndian>(r.qcom.0).unwrap();
    out.extend_from_slice(&r.qcom_spec.0);
    out.write_u16::<BigEndian>(r.qec).unwrap();
    let e = &r.qec_spec;
    out.write_u16::<BigEndian>(e.n).unwrap();
    out.write_u16::<BigEndian>(e.k).unwrap();
    out.write_u16::<BigEndian>(e.d).unwrap();
    out.write_u16::<BigEndian>(e.verify_circuit_id).unwrap();
    out.extend_from_slice(&e.reserved);
    out.extend_from_slice(&[0, 0]);
}

pub fn decode_stats(b: &[u8], mode: DecodeMode) -> Result<QcmRecord, CodecError> {
    decode_stats_at(b, 0, mode)
}

// Relative byte positions inside a stats record.
const CHANNEL_RESERVED_AT: usize = 2 + 12;
const EC_RESERVED_AT: usize = 2 + SPEC_LEN + 2 + SPEC_LEN + 2 + 8;
const STATS_PAD_AT: usize = STATS_LEN - 2;

/// `base` is the offset of `b` inside the enclosing frame, for diagnostics.
fn decode_stats_at(b: &[u8], base: usize, mode: DecodeMode) -> Result<QcmRecord, CodecError> {
    if b.len() != STATS_LEN {
        return Err(if b.len() < STATS_LEN {
            CodecError::ShortInput {
                offset: base,
                needed: STATS_LEN,
                available: b.len(),
            }
        } else {
            CodecError::LengthMismatch {
                declared: STATS_LEN,
                actual: b.len(),
                offset: base + STATS_LEN,
            }
        });
    }
    let mut c = Cursor::new(b);
    let qchannel = c.read_u16::<BigEndian>().unwrap();
    let mut qchannel_spec = ChannelSpec {
        wavelength_pm: c.read_u32::<BigEndian>().unwrap(),
        mean_photon_milli: c.read_u32::<BigEndian>().unwrap(),
        symbol_rate_hz: c.read_u32::<BigEndian>().unwrap(),
        reserved: c.read_u32::<BigEndian>().unwrap(),
    };
    let qcom = ComProtocolId(c.read_u16::<BigEndian>().unwrap());
    let mut blob = [0u8; SPEC_LEN];
    c.read_exact(&mut blob).unwrap();
    let qec = c.read_u16::<BigEndian>().unwrap();
    let mut qec_spec = EcSpec {
        n: c.read_u16::<BigEndian>().unwrap(),
        k: c.read_u16::<BigEndian>().unwrap(),
        d: c.read_u16::<BigEndian>().unwrap(),
        verify_circuit_id: c.read_u16::<BigEndian>().unwrap(),
        reserved: [0; 8],
    };
    c.read_exact(&mut qec_spec.reserved).unwrap();
    let pad = c.read_u16::<BigEndian>().unwrap();

    match mode {
        DecodeMode::Strict => {
            let nonzero = [
                (qchannel_spec.reserved != 0, CHANNEL_RESERVED_AT),
                (qec_spec.reserved != [0; 8], EC_RESERVED_AT),
                (pad != 0, STATS_PAD_AT),
            ];
            if let Some((_, at)) = nonzero.iter().find(|(bad, _)| *bad) {
                let first = b[*at..].iter().position(|&x| x != 0).unwrap_or(0);
                return Err(CodecError::NonzeroPad {
                    offset: base + at + first,
                });
            }
        }
        DecodeMode::Lenient => {
            qchannel_spec.reserved = 0;
            qec_spec.reserved = [0; 8];
        }
    }

    let r = QcmRecord {
        qchannel,
        qchannel_spec,
        qcom,
        qcom_spec: ComSpec(blob),
        qec,
        qec_spec,
    };
    let violations = validate_record(&r);
    if violations.is_empty() {
        Ok(r)
    } else {
        Err(CodecError::InvalidRecord {
            offset: base,
            violations,
        })
    }
}

pub fn encode_multipart(m: &QcmMultipart) -> Result<Vec<u8>, CodecError> {
    if m.records.len() > MAX_RECORDS_PER_SEGMENT {
        return Err(CodecError::SegmentOverflow {
            records: m.records.len(),
        });
    }
    let header = m.header().expect("segment bound checked above");
    let mut out = Vec::with_capacity(m.encoded_len());
    out.extend_from_slice(&encode_header(&header)?);
    out.write_u16::<BigEndian>(OFPMP_QCM).unwrap();
    out.extend_from_slice(&[0; 4]);
    out.write_u16::<BigEndian>(m.flags).unwrap();
    for (i, r) in m.records.iter().enumerate() {
        let violations = validate_record(r);
        if !violations.is_empty() {
            return Err(CodecError::InvalidRecord {
                offset: PREAMBLE_LEN + i * STATS_LEN,
                violations,
            });
        }
        write_stats(&mut out, r);
    }
    debug_assert_eq!(out.len(), header.length as usize);
    Ok(out)
}

/// Decodes exactly one frame; `b` must be exactly `header.length` bytes.
pub fn decode_multipart(b: &[u8], mode: DecodeMode) -> Result<QcmMultipart, CodecError> {
    let header = decode_header(b)?;
    let declared = header.length as usize;
    if b.len() != declared {
        return Err(CodecError::LengthMismatch {
            declared,
            actual: b.len(),
            offset: b.len().min(declared),
        });
    }
    let direction = Direction::from_msg_type(header.msg_type)
        .ok_or(CodecError::UnknownMessageType(header.msg_type))?;
    if b.len() < PREAMBLE_LEN {
        return Err(CodecError::ShortInput {
            offset: HEADER_LEN,
            needed: PREAMBLE_LEN,
            available: b.len(),
        });
    }
    let mut c = Cursor::new(&b[HEADER_LEN..PREAMBLE_LEN]);
    let mp_type = c.read_u16::<BigEndian>().unwrap();
    let mut pad = [0u8; 4];
    c.read_exact(&mut pad).unwrap();
    let flags = c.read_u16::<BigEndian>().unwrap();
    if mp_type != OFPMP_QCM {
        return Err(CodecError::UnknownMultipartType(mp_type));
    }
    if mode == DecodeMode::Strict {
        if let Some(i) = pad.iter().position(|&x| x != 0) {
            return Err(CodecError::NonzeroPad {
                offset: HEADER_LEN + 2 + i,
            });
        }
    }

    let body = &b[PREAMBLE_LEN..];
    if !body.len().is_multiple_of(STATS_LEN) {
        return Err(CodecError::RaggedBody { len: body.len() });
    }
    let records = body
        .chunks_exact(STATS_LEN)
        .enumerate()
        .map(|(i, chunk)| decode_stats_at(chunk, PREAMBLE_LEN + i * STATS_LEN, mode))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(QcmMultipart {
        direction,
        version: header.version,
        xid: header.xid,
        flags,
        records,
    })
}

/// Splits a back-to-back byte stream into frames using each header's length.
/// Returns `(offset, frame)` pairs.
pub fn split_frames(mut b: &[u8]) -> Result<Vec<(usize, &[u8])>, CodecError> {
    let mut out = Vec::new();
    let mut offset = 0;
    while !b.is_empty() {
        let header = decode_header(b).map_err(|e| shift_offset(e, offset))?;
        let len = header.length as usize;
        if b.len() < len {
            return Err(CodecError::ShortInput {
                offset: offset + b.len(),
                needed: len,
                available: b.len(),
            });
        }
        out.push((offset, &b[..len]));
        b = &b[len..];
        offset += len;
    }
    Ok(out)
}

/// Rebases byte offsets in an error produced on a sub-slice starting at `by`.
pub fn shift_offset(e: CodecError, by: usize) -> CodecError {
    match e {
        CodecError::ShortInput {
            offset,
            needed,
            available,
        } => CodecError::ShortInput {
            offset: offset + by,
            needed,
            available,
        },
        CodecError::LengthMismatch {
            declared,
            actual,
            offset,
        } => CodecError::LengthMismatch {
            declared,
            actual,
            offset: offset + by,
        },
        CodecError::NonzeroPad { offset } => CodecError::NonzeroPad {
            offset: offset + by,
        },
        CodecError::InvalidRecord { offset, violations } => CodecError::InvalidRecord {
            offset: offset + by,
            violations,
        },
        other => other,
    }
}

impl CodecError {
    /// Byte offset the error refers to, where one is known.
    pub fn offset(&self) -> Option<usize> {
        match self {
            CodecError::ShortInput { offset, .. }
            | CodecError::LengthMismatch { offset, .. }
            | CodecError::NonzeroPad { offset }
            | CodecError::InvalidRecord { offset, .. } => Some(*offset),
            CodecError::InvalidLength { .. } => Some(2),
            CodecError::UnknownMessageType(_) => Some(1),
            CodecError::UnknownMultipartType(_) => Some(HEADER_LEN),
            CodecError::RaggedBody { .. } => Some(PREAMBLE_LEN),
            _ => None,
        }
    }
}

/// Packs records into maximally full segments chained with REQ_MORE.
pub fn fragment(records: &[QcmRecord], xid: u32, direction: Direction) -> Vec<QcmMultipart> {
    if records.is_empty() {
        return vec![QcmMultipart::new(direction, xid, Vec::new())];
    }
    let count = records.len().div_ceil(MAX_RECORDS_PER_SEGMENT);
    records
        .chunks(MAX_RECORDS_PER_SEGMENT)
        .enumerate()
        .map(|(i, chunk)| {
            let mut m = QcmMultipart::new(direction, xid, chunk.to_vec());
            if i + 1 < count {
                m.flags |= OFPMPF_REQ_MORE;
            }
            m
        })
        .collect()
}

/// Inverse of [`fragment`]; checks xid, direction and the REQ_MORE chain.
pub fn reassemble(segments: &[QcmMultipart]) -> Result<Vec<QcmRecord>, CodecError> {
    let first = segments.first().ok_or(CodecError::NoSegments)?;
    let last = segments.len() - 1;
    let mut out = Vec::new();
    for (index, seg) in segments.iter().enumerate() {
        if seg.xid != first.xid {
            return Err(CodecError::MixedXid {
                index,
                expected: first.xid,
                found: seg.xid,
            });
        }
        if seg.direction != first.direction {
            return Err(CodecError::MixedDirection { index });
        }
        if index == last && seg.more() {
            return Err(CodecError::Incomplete);
        }
        if index != last && !seg.more() {
            return Err(CodecError::MissingMore { index });
        }
        out.extend_from_slice(&seg.records);
    }
    Ok(out)
}

/// Two lowercase hex digits per byte, space-separated, 16 bytes per line.
pub fn to_hex_dump(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 3 + 1);
    for line in bytes.chunks(16) {
        let text: Vec<String> = line.iter().map(|b| format!("{b:02x}")).collect();
        s.push_str(&text.join(" "));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad hex dump at line {line}, column {column}: {reason}")]
pub struct HexError {
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

/// Parses whitespace-separated two-digit hex bytes. `#` starts a comment.
pub fn parse_hex_dump(text: &str) -> Result<Vec<u8>, HexError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut col = 0;
        for tok in line.split(|c: char| c.is_ascii_whitespace()) {
            let column = col + 1;
            col += tok.len() + 1;
            if tok.is_empty() {
                continue;
            }
            if tok.len() != 2 {
                return Err(HexError {
                    line: ln + 1,
                    column,
                    reason: format!("expected two hex digits, got `{tok}`"),
                });
            }
            let byte = u8::from_str_radix(tok, 16).map_err(|_| HexError {
                line: ln + 1,
                column,
                reason: format!("`{tok}` is not hex"),
            })?;
            out.push(byte);
        }
    }
    Ok(out)
}
