//! Binary PGM (P5) image IO for gray frames and simulator input sequences.
//!
//! Writing is canonical: `P5\n{width} {height}\n255\n` followed by raw bytes.
//! Reading is lenient about whitespace and `#` comments in the header, which
//! is enough to accept files produced by common tooling.

use std::io::{Read, Write};

use thiserror::Error;

use crate::frame::GrayFrame;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a P5 pgm (bad magic)")]
    BadMagic,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0} (must be 1..=255)")]
    BadMaxval(u32),
    #[error("pixel payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_pgm<W: Write>(w: &mut W, frame: &GrayFrame) -> Result<(), PgmError> {
    write!(w, "P5\n{} {}\n255\n", frame.width, frame.height)?;
    w.write_all(frame.values())?;
    Ok(())
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.values().len() + 32);
    write_pgm(&mut out, frame).expect("vec write cannot fail");
    out
}

/// Reads whitespace/comment-separated header tokens, then the raw payload.
pub fn read_pgm<R: Read>(r: &mut R) -> Result<GrayFrame, PgmError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    decode_pgm(&data)
}

pub fn decode_pgm(data: &[u8]) -> Result<GrayFrame, PgmError> {
    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        *field = next_header_value(data, &mut pos)?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || width > u16::MAX as u32 || height == 0 || height > u16::MAX as u32 {
        return Err(PgmError::BadHeader(format!(
            "bad dimensions {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::BadMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    let expected = width as usize * height as usize;
    let payload = data.get(pos..pos + expected).ok_or(PgmError::Truncated {
        expected,
        got: data.len().saturating_sub(pos),
    })?;
    Ok(GrayFrame::from_values(
        width as u16,
        height as u16,
        payload.to_vec(),
    ))
}

fn next_header_value(data: &[u8], pos: &mut usize) -> Result<u32, PgmError> {
    loop {
        match data.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while !matches!(data.get(*pos), None | Some(b'\n')) {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            Some(b) => {
                return Err(PgmError::BadHeader(format!("unexpected byte 0x{b:02x}")));
            }
            None => return Err(PgmError::BadHeader("truncated header".into())),
        }
    }
    let mut value: u64 = 0;
    while let Some(b) = data.get(*pos).filter(|b| b.is_ascii_digit()) {
        value = value * 10 + (b - b'0') as u64;
        if value > u32::MAX as u64 {
            return Err(PgmError::BadHeader("header value overflow".into()));
        }
        *pos += 1;
    }
    Ok(value as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_header_bytes() {
        let mut f = GrayFrame::new(3, 2);
        f.set(0, 0, 7);
        f.set(2, 1, 255);
        let bytes = encode_pgm(&f);
        assert_eq!(&bytes[..9], b"P5\n3 2\n25");
        assert_eq!(bytes.len(), "P5\n3 2\n255\n".len() + 6);
    }

    #[test]
    fn round_trip() {
        let mut f = GrayFrame::new(5, 4);
        for y in 0..4 {
            for x in 0..5 {
                f.set(x, y, (x * 7 + y * 31) as u8);
            }
        }
        let back = decode_pgm(&encode_pgm(&f)).unwrap();
        assert_eq!(back.width, 5);
        assert_eq!(back.height, 4);
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn reads_comments_and_extra_whitespace() {
        let mut data = b"P5 # a comment\n# another\n  3\t2 # dims\n255\n".to_vec();
        data.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let f = decode_pgm(&data).unwrap();
        assert_eq!((f.width, f.height), (3, 2));
        assert_eq!(f.values(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn rejects_p2_ascii_variant() {
        assert!(matches!(
            decode_pgm(b"P2\n3 2\n255\n"),
            Err(PgmError::BadMagic)
        ));
    }

    #[test]
    fn rejects_big_maxval() {
        let data = b"P5\n2 1\n65535\n\0\0\0\0";
        assert!(matches!(decode_pgm(data), Err(PgmError::BadMaxval(65535))));
    }

    #[test]
    fn reports_truncation() {
        let data = b"P5\n3 2\n255\n\x01\x02";
        match decode_pgm(data) {
            Err(PgmError::Truncated {
                expected: 6,
                got: 2,
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
