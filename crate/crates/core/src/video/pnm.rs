//! Binary netpbm I/O: P5 (grayscale PGM) and P6 (color PPM), 8-bit only.

use std::fs;
use std::path::Path;

use crate::error::{Result, RfrError};
use crate::frame::Frame;

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn format_err(offset: usize, message: impl Into<String>) -> RfrError {
    RfrError::Format {
        offset,
        message: message.into(),
    }
}

fn skip_whitespace_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(pos) {
                    pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            _ => return pos,
        }
    }
}

fn parse_number(bytes: &[u8], pos: usize, what: &str) -> Result<(usize, usize)> {
    let pos = skip_whitespace_and_comments(bytes, pos);
    let start = pos;
    let mut end = pos;
    while bytes.get(end).is_some_and(u8::is_ascii_digit) {
        end += 1;
    }
    if end == start {
        return Err(format_err(start, format!("expected {what}")));
    }
    let value = std::str::from_utf8(&bytes[start..end])
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| format_err(start, format!("{what} out of range")))?;
    Ok((value, end))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(format_err(0, "file too short for a netpbm magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        b"P1" | b"P2" | b"P3" | b"P4" => {
            return Err(RfrError::Unsupported(format!(
                "netpbm variant {} (only binary P5/P6 are supported)",
                String::from_utf8_lossy(&bytes[..2])
            )))
        }
        _ => return Err(format_err(0, "missing P5/P6 magic number")),
    };
    let (width, pos) = parse_number(bytes, 2, "width")?;
    let (height, pos) = parse_number(bytes, pos, "height")?;
    let (maxval, pos) = parse_number(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err(pos, "zero image dimension"));
    }
    if maxval == 0 {
        return Err(format_err(pos, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(RfrError::Unsupported(format!(
            "maxval {maxval} (only 8-bit samples are supported)"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(format_err(pos, "expected a single whitespace after maxval")),
    }
    Ok(Header {
        channels,
        width,
        height,
        maxval,
        data_offset: pos + 1,
    })
}

/// Decodes an in-memory P5/P6 image into a planar frame with values in `[0, 1]`.
pub fn decode(bytes: &[u8]) -> Result<Frame> {
    let h = parse_header(bytes)?;
    let n = h.width * h.height * h.channels;
    let payload = &bytes[h.data_offset..];
    if payload.len() < n {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {n} sample bytes, found {}", payload.len()),
        ));
    }
    let scale = h.maxval as f64;
    let plane = h.width * h.height;
    let mut data = vec![0.0; n];
    for (i, &b) in payload[..n].iter().enumerate() {
        let (p, c) = (i / h.channels, i % h.channels);
        data[c * plane + p] = b as f64 / scale;
    }
    Frame::from_vec(h.channels, h.height, h.width, data)
}

/// Encodes a frame as P5 (1 channel) or P6 (3 channels) after clamping to
/// `[0, 1]` and rounding to 8 bits.
pub fn encode(frame: &Frame) -> Result<Vec<u8>> {
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(RfrError::Unsupported(format!(
                "cannot encode a {c}-channel frame as netpbm"
            )))
        }
    };
    let (c, hgt, w) = (frame.channels(), frame.height(), frame.width());
    let mut out = format!("{magic}\n{w} {hgt}\n255\n").into_bytes();
    let plane = hgt * w;
    let data = frame.data();
    out.reserve(plane * c);
    for p in 0..plane {
        for ci in 0..c {
            out.push(quantize(data[ci * plane + p]));
        }
    }
    Ok(out)
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| RfrError::io(path, e))?;
    decode(&bytes)
}

pub fn save_frame(path: &Path, frame: &Frame) -> Result<()> {
    fs::write(path, encode(frame)?).map_err(|e| RfrError::io(path, e))
}
