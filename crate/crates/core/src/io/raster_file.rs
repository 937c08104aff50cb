//! Raster export: CSV (exact, re-parseable) and a grayscale binary PPM preview.
//!
//! CSV layout: `# key: value` metadata lines, the header
//! `x_min,y_min,cell_size,slab,value_kind`, one row with those values, then one row
//! per x bin (increasing x) holding the y bins in increasing order. Empty cells are `nan`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::coverage::{GridSpec, Raster, ValueKind, VerticalSlab};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "x_min,y_min,cell_size,slab,value_kind";
/// Color of cells without probes in the PPM preview.
pub const NO_DATA_RGB: [u8; 3] = [255, 0, 255];

pub fn raster_to_csv(raster: &Raster, metadata: &[(String, String)]) -> String {
    let spec = &raster.spec;
    let mut s = String::new();
    for (k, v) in metadata {
        writeln!(s, "# {k}: {v}").unwrap();
    }
    writeln!(s, "# x_max: {}", spec.x_max).unwrap();
    writeln!(s, "# y_max: {}", spec.y_max).unwrap();
    writeln!(s, "# z_min: {}", raster.slab.z_min).unwrap();
    writeln!(s, "# z_max: {}", raster.slab.z_max).unwrap();
    writeln!(s, "{CSV_HEADER}").unwrap();
    writeln!(s, "{},{},{},{},{}", spec.x_min, spec.y_min, spec.cell_size, raster.slab.name, raster.kind.as_str())
        .unwrap();
    for row in raster.values.chunks(spec.ny()) {
        let cells: Vec<String> = row
            .iter()
            .map(|v| match v {
                Some(x) => x.to_string(),
                None => "nan".to_string(),
            })
            .collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    s
}

/// Extents written by [`raster_to_csv`] as comment lines after the caller's metadata.
const GEOMETRY_KEYS: [&str; 4] = ["x_max", "y_max", "z_min", "z_max"];

/// Inverse of [`raster_to_csv`]; also returns the caller's metadata lines in file order.
pub fn parse_raster_csv(text: &str, source_name: &str) -> Result<(Raster, Vec<(String, String)>)> {
    let mut meta = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = rest.trim().split_once(':') {
            meta.push((k.trim().to_string(), v.trim().to_string()));
        }
        lines.next();
    }
    let loc = |i: usize| format!("line {}", i + 1);
    let (i, header) = lines.next().ok_or_else(|| Error::parse(source_name, "end of file", "missing header"))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::parse(source_name, loc(i), format!("expected header '{CSV_HEADER}'")));
    }
    let (i, values) = lines.next().ok_or_else(|| Error::parse(source_name, "end of file", "missing grid row"))?;
    let f: Vec<&str> = values.trim().split(',').collect();
    if f.len() != 5 {
        return Err(Error::parse(source_name, loc(i), "grid row needs five fields"));
    }
    let num = |s: &str, what: &str| {
        s.parse::<f64>().map_err(|_| Error::parse(source_name, loc(i), format!("invalid {what} '{s}'")))
    };
    let (x_min, y_min, cell_size) = (num(f[0], "x_min")?, num(f[1], "y_min")?, num(f[2], "cell_size")?);
    let kind = ValueKind::parse(f[4])
        .ok_or_else(|| Error::parse(source_name, loc(i), format!("unknown value kind '{}'", f[4])))?;
    let lookup = |key: &str| -> Result<f64> {
        let v = meta
            .iter()
            .find(|(k, _)| k == key)
            .ok_or_else(|| Error::parse(source_name, "metadata", format!("missing '{key}'")))?;
        v.1.parse().map_err(|_| Error::parse(source_name, "metadata", format!("invalid '{key}'")))
    };
    let spec = GridSpec { x_min, x_max: lookup("x_max")?, y_min, y_max: lookup("y_max")?, cell_size };
    spec.validate().map_err(|e| Error::parse(source_name, loc(i), e.to_string()))?;
    let slab = VerticalSlab { name: f[3].to_string(), z_min: lookup("z_min")?, z_max: lookup("z_max")? };

    let mut cells = Vec::with_capacity(spec.cell_count());
    let mut rows = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let before = cells.len();
        for tok in line.trim().split(',') {
            if tok == "nan" {
                cells.push(None);
            } else {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse(source_name, loc(i), format!("invalid cell value '{tok}'")))?;
                cells.push(Some(v));
            }
        }
        if cells.len() - before != spec.ny() {
            return Err(Error::parse(source_name, loc(i), format!("expected {} cells per row", spec.ny())));
        }
        rows += 1;
    }
    if rows != spec.nx() {
        return Err(Error::parse(source_name, "end of file", format!("expected {} rows, found {rows}", spec.nx())));
    }
    meta.retain(|(k, _)| !GEOMETRY_KEYS.contains(&k.as_str()));
    Ok((Raster { spec, slab, kind, values: cells }, meta))
}

/// Intensity range of the preview: `[0, 1]` for probabilities, `[0, largest value]` for radii.
pub fn display_range(raster: &Raster) -> (f64, f64) {
    match raster.kind {
        ValueKind::DetectionProbability => (0.0, 1.0),
        _ => {
            let hi = raster.values.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
            (0.0, if hi > 0.0 { hi } else { 1.0 })
        }
    }
}

/// Binary PPM with +x up and +y to the left.
pub fn raster_to_ppm(raster: &Raster, metadata: &[(String, String)]) -> Vec<u8> {
    let (nx, ny) = (raster.spec.nx(), raster.spec.ny());
    let (lo, hi) = display_range(raster);
    let mut out = Vec::new();
    let mut head = String::from("P6\n");
    for (k, v) in metadata {
        writeln!(head, "# {k}: {v}").unwrap();
    }
    writeln!(head, "# value_kind: {}", raster.kind.as_str()).unwrap();
    writeln!(head, "# slab: {}", raster.slab.name).unwrap();
    writeln!(head, "# gray range: {lo} (black) to {hi} (white); no data is magenta").unwrap();
    writeln!(head, "# orientation: +x up, +y left").unwrap();
    write!(head, "{ny} {nx}\n255\n").unwrap();
    out.extend_from_slice(head.as_bytes());
    for ix in (0..nx).rev() {
        for iy in (0..ny).rev() {
            match raster.get(ix, iy) {
                Some(v) => {
                    let g = (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8;
                    out.extend_from_slice(&[g, g, g]);
                }
                None => out.extend_from_slice(&NO_DATA_RGB),
            }
        }
    }
    out
}

/// Writes `<stem>.csv` and `<stem>.ppm`, returning both paths.
pub fn emit_raster(raster: &Raster, stem: &Path, metadata: &[(String, String)]) -> Result<(PathBuf, PathBuf)> {
    let csv = stem.with_extension("csv");
    let ppm = stem.with_extension("ppm");
    fs::write(&csv, raster_to_csv(raster, metadata)).map_err(|e| Error::io(&csv, e))?;
    fs::write(&ppm, raster_to_ppm(raster, metadata)).map_err(|e| Error::io(&ppm, e))?;
    Ok((csv, ppm))
}

pub fn read_raster_csv(path: &Path) -> Result<(Raster, Vec<(String, String)>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raster_csv(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(values: Vec<Option<f64>>, kind: ValueKind, nx: usize, ny: usize) -> Raster {
        Raster {
            spec: GridSpec::new(0.0, nx as f64, 0.0, ny as f64, 1.0).unwrap(),
            slab: VerticalSlab::ground(),
            kind,
            values,
        }
    }

    fn pixels(ppm: &[u8]) -> &[u8] {
        // skip the header: the pixel block follows the "255\n" line
        let pos = ppm.windows(4).position(|w| w == b"255\n").unwrap();
        &ppm[pos + 4..]
    }

    #[test]
    fn single_cell() {
        let r = raster(vec![Some(0.75)], ValueKind::DetectionProbability, 1, 1);
        let csv = raster_to_csv(&r, &[]);
        assert_eq!(csv.lines().last().unwrap(), "0.75");
        assert_eq!(pixels(&raster_to_ppm(&r, &[])), &[191, 191, 191]);
    }

    #[test]
    fn all_no_data() {
        let r = raster(vec![None; 6], ValueKind::MeanBlindSpotRadius, 2, 3);
        let csv = raster_to_csv(&r, &[]);
        assert!(csv.lines().rev().take(2).all(|l| l == "nan,nan,nan"));
        let ppm = raster_to_ppm(&r, &[]);
        let px = pixels(&ppm);
        assert_eq!(px.len(), 18);
        assert!(px.chunks(3).all(|c| c == NO_DATA_RGB));
    }

    #[test]
    fn orientation() {
        // 2 rows (x) × 2 columns (y); only the far-left cell (max x, max y) has data
        let r = raster(vec![None, None, None, Some(1.0)], ValueKind::DetectionProbability, 2, 2);
        let ppm = raster_to_ppm(&r, &[]);
        let px = pixels(&ppm);
        assert_eq!(&px[..3], &[255, 255, 255]);
        assert!(px[3..].chunks(3).all(|c| c == NO_DATA_RGB));
    }

    #[test]
    fn csv_round_trip() {
        let vals = vec![Some(0.1 + 0.2), None, Some(1e-17), Some(3.0), Some(2.0 / 3.0), None];
        let mut r = raster(vals, ValueKind::MeanBlindSpotRadius, 3, 2);
        r.spec = GridSpec::new(-1.3, 1.5, -0.7, 1.1, 0.95).unwrap();
        let meta = vec![("seed".to_string(), "7".to_string())];
        let (back, m) = parse_raster_csv(&raster_to_csv(&r, &meta), "x").unwrap();
        assert_eq!(back, r);
        assert_eq!(m[0], meta[0]);
    }

    #[test]
    fn malformed_csv() {
        let r = raster(vec![Some(1.0), Some(2.0)], ValueKind::DetectionProbability, 1, 2);
        let csv = raster_to_csv(&r, &[]);
        assert!(parse_raster_csv(&csv.replace("1,2", "1,x"), "c").is_err());
        assert!(parse_raster_csv(&csv.replace("1,2", "1"), "c").is_err());
        assert!(parse_raster_csv(&csv.replace("value_kind\n", "kind\n"), "c").is_err());
    }
}
