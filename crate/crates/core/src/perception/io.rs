use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PerceptionError, PointCloud};
use crate::geometry::Point3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    AsciiPly,
    XyzCsv,
}

impl CloudFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ply" => Some(Self::AsciiPly),
            "csv" | "xyz" | "txt" => Some(Self::XyzCsv),
            _ => None,
        }
    }
}

pub fn load_point_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, PerceptionError> {
    let text = std::fs::read_to_string(path).map_err(|e| PerceptionError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let pc = match format {
        CloudFormat::AsciiPly => parse_ply(&text)?,
        CloudFormat::XyzCsv => parse_csv(&text)?,
    };
    if pc.is_empty() {
        return Err(PerceptionError::EmptyCloud);
    }
    Ok(pc)
}

/// Writes coordinates in shortest round-trip form, so a reload is bit-exact.
pub fn save_point_cloud(pc: &PointCloud, path: &Path, format: CloudFormat) -> Result<(), PerceptionError> {
    let text = match format {
        CloudFormat::AsciiPly => write_ply(pc),
        CloudFormat::XyzCsv => write_csv(pc),
    };
    std::fs::write(path, text).map_err(|e| PerceptionError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn perr(line: usize, message: impl Into<String>) -> PerceptionError {
    PerceptionError::Parse { line, message: message.into() }
}

fn coord(tok: &str, line: usize) -> Result<f64, PerceptionError> {
    let v: f64 = tok.parse().map_err(|_| perr(line, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(perr(line, format!("non-finite coordinate {tok:?}")));
    }
    Ok(v)
}

fn channel(tok: &str, line: usize) -> Result<u8, PerceptionError> {
    tok.parse().map_err(|_| perr(line, format!("colour channel out of range: {tok:?}")))
}

fn parse_csv(text: &str) -> Result<PointCloud, PerceptionError> {
    let mut points = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = row.split(',').map(str::trim).collect();
        // a header row is tolerated before the first point
        if points.is_empty() && width.is_none() && toks[0].parse::<f64>().is_err() {
            if toks.len() != 3 && toks.len() != 6 {
                return Err(perr(line, format!("expected 3 or 6 columns, found {}", toks.len())));
            }
            width = Some(toks.len());
            continue;
        }
        let w = *width.get_or_insert(toks.len());
        if toks.len() != w || (w != 3 && w != 6) {
            return Err(perr(line, format!("expected {} columns, found {}", if w == 6 { 6 } else { 3 }, toks.len())));
        }
        points.push(Point3::new(coord(toks[0], line)?, coord(toks[1], line)?, coord(toks[2], line)?));
        if w == 6 {
            colors.push([channel(toks[3], line)?, channel(toks[4], line)?, channel(toks[5], line)?]);
        }
    }
    let colors = (width == Some(6)).then_some(colors);
    Ok(PointCloud { points, colors })
}

fn parse_ply(text: &str) -> Result<PointCloud, PerceptionError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(perr(n, "missing 'ply' magic")),
        None => return Err(PerceptionError::EmptyCloud),
    }
    let mut n_vertex = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut last = 1;
    loop {
        let Some((n, l)) = lines.next() else {
            return Err(perr(last + 1, "header ended without 'end_header'"));
        };
        last = n;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => {}
            ["format", f, ..] => return Err(perr(n, format!("unsupported format {f:?}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", count] => {
                if n_vertex.is_some() {
                    return Err(perr(n, "vertex element declared twice"));
                }
                n_vertex = Some(count.parse::<usize>().map_err(|_| perr(n, format!("bad vertex count {count:?}")))?);
                in_vertex = true;
            }
            ["element", ..] => {
                if n_vertex.is_none() {
                    return Err(perr(n, "vertex element must come first"));
                }
                in_vertex = false;
            }
            ["property", "list", ..] if in_vertex => return Err(perr(n, "list property on vertices")),
            ["property", _, name] => {
                if in_vertex {
                    props.push(name.to_string());
                }
            }
            ["property", ..] => {}
            _ => return Err(perr(n, format!("unrecognised header line {l:?}"))),
        }
    }
    let n_vertex = n_vertex.ok_or_else(|| perr(last, "no vertex element"))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (Some(ix), Some(iy), Some(iz)) = (col("x"), col("y"), col("z")) else {
        return Err(perr(last, "vertex element lacks x, y or z"));
    };
    let rgb = match (col("red"), col("green"), col("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let mut points = Vec::with_capacity(n_vertex);
    let mut colors = Vec::new();
    for k in 0..n_vertex {
        let Some((n, l)) = lines.next() else {
            return Err(perr(last + 1, format!("header declares {n_vertex} vertices, file has {k}")));
        };
        last = n;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != props.len() {
            return Err(perr(n, format!("expected {} values, found {}", props.len(), toks.len())));
        }
        points.push(Point3::new(coord(toks[ix], n)?, coord(toks[iy], n)?, coord(toks[iz], n)?));
        if let Some([r, g, b]) = rgb {
            colors.push([channel(toks[r], n)?, channel(toks[g], n)?, channel(toks[b], n)?]);
        }
    }
    Ok(PointCloud { points, colors: rgb.map(|_| colors) })
}

fn write_csv(pc: &PointCloud) -> String {
    let mut s = String::new();
    for (i, p) in pc.points.iter().enumerate() {
        let _ = write!(s, "{},{},{}", p.x, p.y, p.z);
        if let Some(c) = &pc.colors {
            let _ = write!(s, ",{},{},{}", c[i][0], c[i][1], c[i][2]);
        }
        s.push('\n');
    }
    s
}

fn write_ply(pc: &PointCloud) -> String {
    let mut s = String::from("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", pc.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if pc.colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    s.push_str("end_header\n");
    for (i, p) in pc.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(c) = &pc.colors {
            let _ = write!(s, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header_and_comments() {
        let pc = parse_csv("# scan\nx,y,z\n0,0,0\n\n1,2,3\n").unwrap();
        assert_eq!(pc.len(), 2);
        assert_eq!(pc.points[1], Point3::new(1.0, 2.0, 3.0));
        assert!(pc.colors.is_none());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        assert_eq!(parse_csv("0,0,0\n1,2\n").unwrap_err(), perr(2, "expected 3 columns, found 2"));
        assert!(matches!(parse_csv("0,0,0\n1,nan,2\n"), Err(PerceptionError::Parse { line: 2, .. })));
        assert!(matches!(parse_csv("0,0,0\n1,x,2\n"), Err(PerceptionError::Parse { line: 2, .. })));
    }

    #[test]
    fn ply_with_extra_elements() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty float x\nproperty float y\n\
                    property float z\nproperty float intensity\nelement face 1\nproperty list uchar int vertex_indices\n\
                    end_header\n0 0 0 7\n1 1 1 8\n3 0 1 1\n";
        let pc = parse_ply(text).unwrap();
        assert_eq!(pc.points, vec![Point3::zeros(), Point3::new(1.0, 1.0, 1.0)]);
    }

    #[test]
    fn ply_rejects_non_ascii() {
        let text = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(parse_ply(text), Err(PerceptionError::Parse { line: 2, .. })));
    }
}
