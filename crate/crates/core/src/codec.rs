//! Bit-exact stream codecs for the EVT1 binary format and the event CSV format.
//!
//! EVT1 layout (all little-endian):
//!
//! ```text
//! header  (12 bytes): magic "EVT1" | u16 width | u16 height | u32 reserved = 0
//! record  (16 bytes): u64 t_us | u16 x | u16 y | i8 polarity | 3 zero pad bytes
//! ```
//!
//! CSV layout: header line `t_us,x,y,p`, then one `t,x,y,p` row per event with
//! plain decimal fields and `p` in {1,-1}. Both codecs are strict about their
//! canonical form so that `write(parse(input)) == input` holds byte for byte
//! for every well-formed input, and `parse(write(stream)) == stream` for every
//! valid stream.
//!
//! The readers are single-pass: memory use does not grow with event count when
//! events are consumed through the iterator interfaces.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::event::{Event, EventStream, Polarity};

/// EVT1 magic bytes.
pub const EVT1_MAGIC: [u8; 4] = *b"EVT1";
/// Size of the EVT1 header in bytes.
pub const EVT1_HEADER_LEN: usize = 12;
/// Size of one EVT1 event record in bytes.
pub const EVT1_RECORD_LEN: usize = 16;
/// Canonical CSV header line (without newline).
pub const CSV_HEADER: &str = "t_us,x,y,p";

/// Structured decode failure. Every malformed input maps to one of these;
/// decoding never panics.
#[derive(Debug, Error)]
pub enum CodecError {
    #[error("bad magic {found:?}, expected {expected:?}", expected = EVT1_MAGIC)]
    BadMagic { found: [u8; 4] },
    #[error("reserved header field must be zero, found {value:#010x}")]
    BadReserved { value: u32 },
    #[error("truncated input at byte offset {offset}: expected {expected} more byte(s)")]
    Truncated { offset: usize, expected: usize },
    #[error("record {index}: {kind}")]
    InvalidRecord { index: usize, kind: RecordError },
    #[error("line {line}: {reason}")]
    CsvLine { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Per-record validation failure during decoding.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("x={x} outside sensor width {width}")]
    XOutOfBounds { x: u16, width: u16 },
    #[error("y={y} outside sensor height {height}")]
    YOutOfBounds { y: u16, height: u16 },
    #[error("polarity {value} not in {{+1,-1}}")]
    BadPolarity { value: i8 },
    #[error("timestamp {curr} decreases below previous {prev}")]
    DecreasingTimestamp { prev: u64, curr: u64 },
    #[error("nonzero padding bytes {pad:?}")]
    NonZeroPad { pad: [u8; 3] },
}

/// Shared incremental record validation used by both codecs.
struct RecordValidator {
    width: u16,
    height: u16,
    prev_t: Option<u64>,
}

impl RecordValidator {
    fn new(width: u16, height: u16) -> Self {
        RecordValidator {
            width,
            height,
            prev_t: None,
        }
    }

    fn check(&mut self, t_us: u64, x: u16, y: u16, polarity: i8) -> Result<Event, RecordError> {
        if x >= self.width {
            return Err(RecordError::XOutOfBounds {
                x,
                width: self.width,
            });
        }
        if y >= self.height {
            return Err(RecordError::YOutOfBounds {
                y,
                height: self.height,
            });
        }
        let polarity =
            Polarity::from_sign(polarity).ok_or(RecordError::BadPolarity { value: polarity })?;
        if let Some(prev) = self.prev_t {
            if t_us < prev {
                return Err(RecordError::DecreasingTimestamp { prev, curr: t_us });
            }
        }
        self.prev_t = Some(t_us);
        Ok(Event {
            t_us,
            x,
            y,
            polarity,
        })
    }
}

// ---------------------------------------------------------------------------
// EVT1 binary codec
// ---------------------------------------------------------------------------

/// Streaming EVT1 decoder over any byte source.
///
/// The header is decoded eagerly in [`new`](Evt1Reader::new); records are
/// decoded and validated one at a time through the [`Iterator`] impl.
pub struct Evt1Reader<R: Read> {
    source: R,
    width: u16,
    height: u16,
    validator: RecordValidator,
    /// Byte offset of the next unread byte, for truncation diagnostics.
    offset: usize,
    index: usize,
    failed: bool,
}

impl<R: Read> Evt1Reader<R> {
    /// Reads and checks the 12-byte header.
    pub fn new(mut source: R) -> Result<Self, CodecError> {
        let mut header = [0u8; EVT1_HEADER_LEN];
        read_exact_at(&mut source, &mut header, 0)?;
        if header[0..4] != EVT1_MAGIC {
            let mut found = [0u8; 4];
            found.copy_from_slice(&header[0..4]);
            return Err(CodecError::BadMagic { found });
        }
        let width = u16::from_le_bytes([header[4], header[5]]);
        let height = u16::from_le_bytes([header[6], header[7]]);
        let reserved = u32::from_le_bytes([header[8], header[9], header[10], header[11]]);
        if reserved != 0 {
            return Err(CodecError::BadReserved { value: reserved });
        }
        Ok(Evt1Reader {
            source,
            width,
            height,
            validator: RecordValidator::new(width, height),
            offset: EVT1_HEADER_LEN,
            index: 0,
            failed: false,
        })
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    fn next_record(&mut self) -> Result<Option<Event>, CodecError> {
        let mut record = [0u8; EVT1_RECORD_LEN];
        let got = read_up_to(&mut self.source, &mut record)?;
        if got == 0 {
            return Ok(None);
        }
        if got < EVT1_RECORD_LEN {
            return Err(CodecError::Truncated {
                offset: self.offset + got,
                expected: EVT1_RECORD_LEN - got,
            });
        }
        let t_us = u64::from_le_bytes(record[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([record[8], record[9]]);
        let y = u16::from_le_bytes([record[10], record[11]]);
        let polarity = record[12] as i8;
        let pad = [record[13], record[14], record[15]];
        let index = self.index;
        if pad != [0, 0, 0] {
            return Err(CodecError::InvalidRecord {
                index,
                kind: RecordError::NonZeroPad { pad },
            });
        }
        let event = self
            .validator
            .check(t_us, x, y, polarity)
            .map_err(|kind| CodecError::InvalidRecord { index, kind })?;
        self.offset += EVT1_RECORD_LEN;
        self.index += 1;
        Ok(Some(event))
    }
}

impl<R: Read> Iterator for Evt1Reader<R> {
    type Item = Result<Event, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(event)) => Some(Ok(event)),
            Ok(None) => None,
            Err(err) => {
                self.failed = true;
                Some(Err(err))
            }
        }
    }
}

/// Streaming EVT1 encoder. Writes the header on construction, records on
/// [`write_event`](Evt1Writer::write_event).
pub struct Evt1Writer<W: Write> {
    sink: W,
}

impl<W: Write> Evt1Writer<W> {
    pub fn new(mut sink: W, width: u16, height: u16) -> io::Result<Self> {
        let mut header = [0u8; EVT1_HEADER_LEN];
        header[0..4].copy_from_slice(&EVT1_MAGIC);
        header[4..6].copy_from_slice(&width.to_le_bytes());
        header[6..8].copy_from_slice(&height.to_le_bytes());
        // bytes 8..12 stay zero (reserved)
        sink.write_all(&header)?;
        Ok(Evt1Writer { sink })
    }

    pub fn write_event(&mut self, event: &Event) -> io::Result<()> {
        let mut record = [0u8; EVT1_RECORD_LEN];
        record[0..8].copy_from_slice(&event.t_us.to_le_bytes());
        record[8..10].copy_from_slice(&event.x.to_le_bytes());
        record[10..12].copy_from_slice(&event.y.to_le_bytes());
        record[12] = event.polarity.sign() as u8;
        // bytes 13..16 stay zero (pad)
        self.sink.write_all(&record)
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Decodes a full EVT1 byte buffer into a validated stream.
pub fn parse_events_binary(bytes: &[u8]) -> Result<EventStream, CodecError> {
    let mut reader = Evt1Reader::new(bytes)?;
    let mut stream = EventStream::new(reader.width(), reader.height());
    // Record count is known up front for in-memory input.
    stream
        .events
        .reserve((bytes.len().saturating_sub(EVT1_HEADER_LEN)) / EVT1_RECORD_LEN);
    for event in &mut reader {
        stream.events.push(event?);
    }
    Ok(stream)
}

/// Serializes a valid stream to EVT1 bytes. Deterministic: identical streams
/// produce identical bytes.
pub fn write_events_binary(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(EVT1_HEADER_LEN + stream.len() * EVT1_RECORD_LEN);
    let mut writer = Evt1Writer::new(&mut out, stream.width, stream.height)
        .expect("writing to a Vec cannot fail");
    for event in &stream.events {
        writer
            .write_event(event)
            .expect("writing to a Vec cannot fail");
    }
    out
}

// ---------------------------------------------------------------------------
// CSV codec
// ---------------------------------------------------------------------------

/// Streaming CSV decoder. Sensor geometry is supplied by the caller since the
/// text format does not carry it.
pub struct CsvEventReader<R: Read> {
    lines: io::Lines<io::BufReader<R>>,
    validator: RecordValidator,
    /// 1-based line number of the last line handed out.
    line: usize,
    header_seen: bool,
    failed: bool,
}

impl<R: Read> CsvEventReader<R> {
    pub fn new(source: R, width: u16, height: u16) -> Self {
        CsvEventReader {
            lines: io::BufRead::lines(io::BufReader::new(source)),
            validator: RecordValidator::new(width, height),
            line: 0,
            header_seen: false,
            failed: false,
        }
    }

    fn next_event(&mut self) -> Result<Option<Event>, CodecError> {
        loop {
            let raw = match self.lines.next() {
                Some(raw) => raw?,
                None => {
                    if !self.header_seen {
                        return Err(CodecError::CsvLine {
                            line: 1,
                            reason: format!("missing header line `{CSV_HEADER}`"),
                        });
                    }
                    return Ok(None);
                }
            };
            self.line += 1;
            if !self.header_seen {
                if raw != CSV_HEADER {
                    return Err(CodecError::CsvLine {
                        line: self.line,
                        reason: format!("expected header `{CSV_HEADER}`, found `{raw}`"),
                    });
                }
                self.header_seen = true;
                continue;
            }
            return self.parse_row(&raw).map(Some);
        }
    }

    fn parse_row(&mut self, row: &str) -> Result<Event, CodecError> {
        let line = self.line;
        let bad = |reason: String| CodecError::CsvLine { line, reason };
        let mut fields = row.split(',');
        let mut field = |name: &str| {
            fields
                .next()
                .ok_or_else(|| bad(format!("missing field `{name}`")))
        };
        let t_us = parse_decimal(field("t_us")?).map_err(|e| bad(format!("t_us: {e}")))?;
        let x = parse_decimal(field("x")?).map_err(|e| bad(format!("x: {e}")))?;
        let y = parse_decimal(field("y")?).map_err(|e| bad(format!("y: {e}")))?;
        let p = field("p")?;
        if fields.next().is_some() {
            return Err(bad(format!("expected 4 fields, found more in `{row}`")));
        }
        let x = u16::try_from(x).map_err(|_| bad(format!("x={x} exceeds u16 range")))?;
        let y = u16::try_from(y).map_err(|_| bad(format!("y={y} exceeds u16 range")))?;
        let polarity: i8 = match p {
            "1" => 1,
            "-1" => -1,
            other => return Err(bad(format!("p must be 1 or -1, found `{other}`"))),
        };
        self.validator
            .check(t_us, x, y, polarity)
            .map_err(|e| bad(e.to_string()))
    }
}

impl<R: Read> Iterator for CsvEventReader<R> {
    type Item = Result<Event, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_event() {
            Ok(Some(event)) => Some(Ok(event)),
            Ok(None) => None,
            Err(err) => {
                self.failed = true;
                Some(Err(err))
            }
        }
    }
}

/// Canonical decimal field: digits only, no sign, no leading zeros.
fn parse_decimal(field: &str) -> Result<u64, String> {
    if field.is_empty() {
        return Err("empty field".to_string());
    }
    if !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("`{field}` is not a plain decimal integer"));
    }
    if field.len() > 1 && field.starts_with('0') {
        return Err(format!("`{field}` has leading zeros"));
    }
    field.parse::<u64>().map_err(|e| format!("`{field}`: {e}"))
}

/// Decodes canonical event CSV. `width`/`height` define the sensor bounds the
/// rows are validated against.
pub fn parse_events_csv(text: &str, width: u16, height: u16) -> Result<EventStream, CodecError> {
    let mut stream = EventStream::new(width, height);
    for event in CsvEventReader::new(text.as_bytes(), width, height) {
        stream.events.push(event?);
    }
    Ok(stream)
}

/// Serializes a valid stream as canonical CSV (header plus one row per event,
/// `\n` line endings, trailing newline).
pub fn write_events_csv(stream: &EventStream) -> String {
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + stream.len() * 16);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for ev in &stream.events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            ev.t_us,
            ev.x,
            ev.y,
            ev.polarity.sign()
        ));
    }
    out
}

/// Reads as much as possible into `buf`; returns the number of bytes read
/// (less than `buf.len()` only at end of input).
fn read_up_to<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn read_exact_at<R: Read>(source: &mut R, buf: &mut [u8], offset: usize) -> Result<(), CodecError> {
    let got = read_up_to(source, buf)?;
    if got < buf.len() {
        return Err(CodecError::Truncated {
            offset: offset + got,
            expected: buf.len() - got,
        });
    }
    Ok(())
}
