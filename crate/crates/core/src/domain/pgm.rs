//! Binary PGM (P5) codec for channel masks: 0 is solid, 255 is fluid.

use crate::domain::mask::Cell;
use crate::error::{Error, Result};

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::BadFormat("missing P5 magic".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::BadFormat("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::BadFormat("expected a decimal header field".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::BadFormat(format!("header field {text:?} out of range")))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::BadFormat("missing separator after maxval".into())),
    }
    let [width, height, maxval] = fields;
    Ok(Header {
        width,
        height,
        maxval,
        data_start: pos,
    })
}

pub fn decode_mask(bytes: &[u8]) -> Result<(usize, usize, Vec<Cell>)> {
    let hdr = parse_header(bytes)?;
    if hdr.maxval == 0 || hdr.maxval > 255 {
        return Err(Error::BadFormat(format!(
            "only 8-bit rasters are supported (maxval {})",
            hdr.maxval
        )));
    }
    let n = hdr
        .width
        .checked_mul(hdr.height)
        .ok_or_else(|| Error::BadFormat("raster dimensions overflow".into()))?;
    let data = &bytes[hdr.data_start..];
    if data.len() < n {
        return Err(Error::BadFormat(format!(
            "raster truncated: {} of {n} bytes",
            data.len()
        )));
    }
    let cells = data[..n]
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(Cell::Solid),
            255 => Ok(Cell::Fluid),
            other => Err(Error::BadFormat(format!(
                "pixel {i} has value {other}; masks must be 0 or 255"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((hdr.width, hdr.height, cells))
}

pub fn encode_mask(width: usize, height: usize, cells: &[Cell]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(cells.iter().map(|c| match c {
        Cell::Fluid => 255u8,
        Cell::Solid => 0u8,
    }));
    out
}
