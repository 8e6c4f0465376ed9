//! Field interchange and heatmaps.
//!
//! A field file is CSV with a first comment line `# L=<half width>,n=<nodes>`
//! followed by the header `i,j,value` and one row per node.

use std::io::{BufRead, BufReader, Read, Write};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{Grid2, ScalarField2};

pub fn write_field<W: Write>(field: &ScalarField2, mut out: W) -> Result<()> {
    let g = field.grid();
    writeln!(out, "# L={},n={}", g.half_width(), g.nodes_per_axis())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "value"])?;
    for k in 0..g.len() {
        let (i, j) = g.node(k);
        w.write_record([i.to_string(), j.to_string(), format!("{:e}", field.values()[k])])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(f64, usize)> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| LabError::Parse("field file must start with '# L=...,n=...'".into()))?;
    let mut half_width = None;
    let mut n = None;
    for part in body.split(',') {
        let Some((key, value)) = part.split_once('=') else {
            continue;
        };
        match key.trim() {
            "L" => {
                half_width = Some(value.trim().parse::<f64>().map_err(|e| LabError::Parse(format!("L: {e}")))?)
            }
            "n" => n = Some(value.trim().parse::<usize>().map_err(|e| LabError::Parse(format!("n: {e}")))?),
            _ => {}
        }
    }
    match (half_width, n) {
        (Some(l), Some(n)) => Ok((l, n)),
        _ => Err(LabError::Parse(format!("header {line:?} must name L and n"))),
    }
}

pub fn read_field<R: Read>(input: R) -> Result<ScalarField2> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (half_width, n) = parse_header(&first)?;
    let grid = Grid2::new(half_width, n)?;
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    let mut rdr = csv::Reader::from_reader(reader);
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(LabError::Parse(format!("expected 3 columns, got {}", rec.len())));
        }
        let parse_idx = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| LabError::Parse(format!("index {s:?}: {e}")))
        };
        let (i, j) = (parse_idx(&rec[0])?, parse_idx(&rec[1])?);
        if i >= n || j >= n {
            return Err(LabError::Parse(format!("node ({i}, {j}) outside an {n}x{n} grid")));
        }
        let v = rec[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| LabError::Parse(format!("value {:?}: {e}", &rec[2])))?;
        let k = grid.index(i, j);
        if seen[k] {
            return Err(LabError::Parse(format!("node ({i}, {j}) listed twice")));
        }
        seen[k] = true;
        values[k] = v;
    }
    let missing = seen.iter().filter(|s| !**s).count();
    if missing > 0 {
        return Err(LabError::Parse(format!("{missing} nodes missing from field file")));
    }
    ScalarField2::from_values(grid, values)
}

/// Value range recorded next to a heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapRange {
    pub min: f64,
    pub max: f64,
}

/// 8-bit binary graymap (P5), row 0 at the top = largest `x₂`.
pub fn write_pgm<W: Write>(field: &ScalarField2, mut out: W) -> Result<HeatmapRange> {
    let g = field.grid();
    let n = g.nodes_per_axis();
    let (min, max) = (field.min(), field.max());
    let span = max - min;
    write!(out, "P5\n{n} {n}\n255\n")?;
    let mut bytes = Vec::with_capacity(n * n);
    for j in (0..n).rev() {
        for i in 0..n {
            let t = if span > 0.0 { (field.at(i, j) - min) / span } else { 0.5 };
            bytes.push((t * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out.write_all(&bytes)?;
    Ok(HeatmapRange { min, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample};

    #[test]
    fn field_round_trip() {
        let g = build_grid(1.5, 9).unwrap();
        let f = sample(|x, y| (x * 1.3).sin() + y * y / 3.0, &g).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# L=1.5,n=9\ni,j,value\n"));
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn malformed_files() {
        assert!(read_field("i,j,value\n".as_bytes()).is_err());
        assert!(read_field("# L=1,n=5\ni,j,value\n0,0,1\n".as_bytes()).is_err());
        assert!(read_field("# L=1,n=3\ni,j,value\n".as_bytes()).is_err());
        let mut dup = String::from("# L=1,n=5\ni,j,value\n");
        for _ in 0..2 {
            dup.push_str("0,0,1\n");
        }
        assert!(read_field(dup.as_bytes()).is_err());
    }

    #[test]
    fn pgm_layout() {
        let g = build_grid(1.0, 5).unwrap();
        let f = sample(|_, y| y, &g).unwrap();
        let mut buf = Vec::new();
        let r = write_pgm(&f, &mut buf).unwrap();
        assert_eq!(r, HeatmapRange { min: -1.0, max: 1.0 });
        let header = b"P5\n5 5\n255\n";
        assert_eq!(&buf[..header.len()], header);
        let px = &buf[header.len()..];
        assert_eq!(px.len(), 25);
        assert_eq!(px[0], 255);
        assert_eq!(px[24], 0);
    }
}
