//! Binary PGM (P5) grayscale images, 8-bit only.
//!
//! The narrowest format that lets image fixtures flow through the pipeline:
//! a magic, whitespace-separated dimensions and maxval with `#` comments,
//! then one byte per pixel. Decoded values are scaled to [0, 1].

use crate::error::{Error, Result};

/// Parses a P5 image; returns row-major pixels in [0, 1] plus (height, width).
pub fn decode_pgm(bytes: &[u8]) -> Result<(Vec<f64>, usize, usize)> {
    let mut cursor = 0usize;
    expect_magic(bytes, &mut cursor)?;
    let width = read_header_number(bytes, &mut cursor)?;
    let height = read_header_number(bytes, &mut cursor)?;
    let maxval = read_header_number(bytes, &mut cursor)?;
    if width == 0 || height == 0 {
        return Err(Error::Format("image dimensions must be positive".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "maxval {maxval} unsupported, this reader handles 8-bit images"
        )));
    }
    // Exactly one whitespace byte separates the header from pixel data.
    match bytes.get(cursor) {
        Some(b) if b.is_ascii_whitespace() => cursor += 1,
        _ => return Err(Error::Format("missing separator before pixel data".into())),
    }
    let expected = width * height;
    let data = &bytes[cursor..];
    if data.len() < expected {
        return Err(Error::Format(format!(
            "pixel data has {} bytes, expected {expected}",
            data.len()
        )));
    }
    if data.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after pixel data",
            data.len() - expected
        )));
    }
    let scale = 1.0 / maxval as f64;
    let pixels = data.iter().map(|&b| f64::from(b) * scale).collect();
    Ok((pixels, height, width))
}

/// Encodes row-major pixels in [0, 1] as an 8-bit P5 image.
pub fn encode_pgm(pixels: &[f64], height: usize, width: usize) -> Result<Vec<u8>> {
    if pixels.len() != height * width {
        return Err(Error::Format(format!(
            "{} pixels do not fill {height}x{width}",
            pixels.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for &p in pixels {
        if !p.is_finite() {
            return Err(Error::Format("pixel values must be finite".into()));
        }
        out.push((p.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    Ok(out)
}

fn expect_magic(bytes: &[u8], cursor: &mut usize) -> Result<()> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format(
            "not a binary PGM image (P5 magic missing)".into(),
        ));
    }
    *cursor = 2;
    Ok(())
}

/// Reads the next decimal header field, skipping whitespace and `#` comments.
fn read_header_number(bytes: &[u8], cursor: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*cursor) {
            Some(b) if b.is_ascii_whitespace() => *cursor += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*cursor) {
                    *cursor += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            Some(b) => {
                return Err(Error::Format(format!(
                    "unexpected byte 0x{b:02x} in image header"
                )))
            }
            None => return Err(Error::Format("image header ends prematurely".into())),
        }
    }
    let mut value = 0usize;
    let mut any = false;
    while let Some(&b) = bytes.get(*cursor) {
        if b.is_ascii_digit() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| Error::Format("image header number overflows".into()))?;
            any = true;
            *cursor += 1;
        } else {
            break;
        }
    }
    if !any {
        return Err(Error::Format("expected number in image header".into()));
    }
    Ok(value)
}
