//! Point cloud files: whitespace-separated text triples, or the `BSPC` binary layout
//! (magic, little-endian u32 count, then count × 3 little-endian f64).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const BINARY_MAGIC: &[u8; 4] = b"BSPC";

/// Reads a cloud in either format, detected by the magic bytes. The caller supplies the frame.
pub fn ingest_cloud(path: &Path, frame: Frame, timestep: usize) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let points = if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(&bytes, &name)?
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::parse(&name, format!("byte {}", e.valid_up_to()), "text cloud is not valid UTF-8"))?;
        parse_text(text, &name)?
    };
    PointCloud::new(points, frame, timestep)
}

/// One `x y z` triple per line; blank lines and `#` comments are skipped.
pub fn parse_text(text: &str, source_name: &str) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("line {}", i + 1);
        let mut v = [0.0; 3];
        let mut fields = line.split_whitespace();
        for slot in &mut v {
            let tok = fields.next().ok_or_else(|| Error::parse(source_name, loc(), "expected three coordinates"))?;
            *slot =
                tok.parse::<f64>().map_err(|_| Error::parse(source_name, loc(), format!("invalid number '{tok}'")))?;
            if !slot.is_finite() {
                return Err(Error::parse(source_name, loc(), "coordinates must be finite"));
            }
        }
        if fields.next().is_some() {
            return Err(Error::parse(source_name, loc(), "more than three values on line"));
        }
        out.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}

pub fn parse_binary(bytes: &[u8], source_name: &str) -> Result<Vec<Vec3>> {
    if bytes.len() < 8 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::parse(source_name, "byte 0", "missing BSPC header"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    let need = count * 24;
    if body.len() < need {
        let whole = body.len() / 24;
        return Err(Error::parse(
            source_name,
            format!("byte {}", 8 + whole * 24),
            format!("truncated: header promises {count} points, file holds {whole}"),
        ));
    }
    if body.len() > need {
        return Err(Error::parse(source_name, format!("byte {}", 8 + need), "trailing bytes after last point"));
    }
    let mut out = Vec::with_capacity(count);
    for (k, chunk) in body.chunks_exact(24).enumerate() {
        let f = |o: usize| f64::from_le_bytes(chunk[o..o + 8].try_into().unwrap());
        let p = Vec3::new(f(0), f(8), f(16));
        if !p.is_finite() {
            return Err(Error::parse(source_name, format!("byte {}", 8 + k * 24), "coordinates must be finite"));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn encode_binary(points: &[Vec3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + points.len() * 24);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        for c in p.to_array() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn write_cloud_binary(path: &Path, points: &[Vec3]) -> Result<()> {
    fs::write(path, encode_binary(points)).map_err(|e| Error::io(path, e))
}

/// Text output uses shortest round-trip float formatting, so reading back is exact.
pub fn write_cloud_text(path: &Path, points: &[Vec3]) -> Result<()> {
    let mut buf = Vec::new();
    for p in points {
        writeln!(buf, "{} {} {}", p.x, p.y, p.z).expect("writing to memory");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_two_points() {
        let pts = parse_text("0 0 0\n1 2 3\n", "t").unwrap();
        assert_eq!(pts, vec![Vec3::ZERO, Vec3::new(1.0, 2.0, 3.0)]);
        assert!(parse_text("", "t").unwrap().is_empty());
    }

    #[test]
    fn text_errors_name_line() {
        let e = parse_text("0 0 0\n1 2\n", "cloud.xyz").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = parse_text("1 x 3", "cloud.xyz").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("'x'"), "{e}");
        assert!(parse_text("1 2 3 4", "c").is_err());
        assert!(parse_text("1 nan 3", "c").is_err());
    }

    #[test]
    fn binary_round_trip() {
        let pts = vec![Vec3::new(0.1, -2.5, 1e-300), Vec3::new(f64::MAX, 0.0, -0.0)];
        let back = parse_binary(&encode_binary(&pts), "b").unwrap();
        for (a, b) in pts.iter().zip(&back) {
            assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        }
    }

    #[test]
    fn binary_truncation_reports_offset() {
        let mut bytes = encode_binary(&[Vec3::ZERO, Vec3::splat(1.0)]);
        bytes.truncate(bytes.len() - 5);
        let e = parse_binary(&bytes, "b").unwrap_err().to_string();
        assert!(e.contains("byte 32") && e.contains("truncated"), "{e}");
        assert!(parse_binary(b"BSP", "b").is_err());
    }
}
